"""Adaptive RK4 for complex-valued ODE systems.

Classic fourth-order Runge-Kutta with step-doubling error control: one full
step is compared against two half steps, the relative local error must stay
below `rtol`, and the accepted state is the two-half-step result.  Works on
arbitrarily shaped complex arrays, so density matrices, batched grids and
cumulant states all share the one stepper.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

MAX_HALVINGS = 20


class StepSizeError(RuntimeError):
    pass


def rk4_step(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_fixed(f, y0, t0: float, t1: float, dt: float):
    """Fixed-step RK4 from t0 to t1; the last step is shortened to land on t1."""
    t, y = t0, y0
    while t < t1 - 1e-12 * max(1.0, abs(t1)):
        step = min(dt, t1 - t)
        y = rk4_step(f, t, y, step)
        t += step
    return y


def _advance(f, y, t0, t1, dt_max, rtol):
    t, dt = t0, min(dt_max, max(t1 - t0, 1e-300))
    while t < t1 - 1e-12 * max(1.0, abs(t1)):
        step = min(dt, t1 - t)
        err = 0.0
        for attempt in range(MAX_HALVINGS + 1):
            full = rk4_step(f, t, y, step)
            half = rk4_step(f, t, y, 0.5 * step)
            two = rk4_step(f, t + 0.5 * step, half, 0.5 * step)
            scale = max(np.max(np.abs(two)), 1e-12)
            err = np.max(np.abs(two - full)) / scale
            if err < rtol:
                break
            if attempt == MAX_HALVINGS:
                raise StepSizeError(
                    f"local error {err:.2e} > rtol {rtol:.2e} after "
                    f"{MAX_HALVINGS} halvings at t={t:.4g}"
                )
            step *= 0.5
        y = two
        t += step
        dt = min(2.0 * step, dt_max) if err < rtol / 64.0 else step
    return y


def rk4_adaptive(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    dt0: float,
    rtol: float = 1e-8,
    t_samples: Sequence[float] | None = None,
):
    """Integrate dy/dt = f(t, y) from t0 to t1 with maximum step dt0.

    Returns y(t1), or the list of states at `t_samples` (ascending, within
    [t0, t1]) when given.  Raises StepSizeError when a step cannot meet rtol
    after MAX_HALVINGS halvings.
    """
    if dt0 <= 0:
        raise ValueError("dt0 must be > 0")
    if t_samples is None:
        return _advance(f, y0, t0, t1, dt0, rtol)
    samples = list(t_samples)
    if samples != sorted(samples):
        raise ValueError("t_samples must be ascending")
    if samples and (samples[0] < t0 - 1e-12 or samples[-1] > t1 + 1e-9):
        raise ValueError("t_samples must lie within [t0, t1]")
    out, t, y = [], t0, y0
    for s in samples:
        y = _advance(f, y, t, s, dt0, rtol)
        t = s
        out.append(y)
    return out
