"""Second-order cumulant expansion of the trace-normalized tilted Lindbladian.

State variables: the log-trace l = ln C_chi, the first cumulants
c_j^alpha = <sigma_j^alpha>_chi and the connected two-site correlators
v_kl^{alpha beta} (k != l; same-site products reduce exactly through the
Pauli algebra, so no on-site v is stored as a dynamical variable).  All
third-order cumulants are truncated to zero.  The equations of motion are
implemented term by term in vectorized form; the right-hand side accepts a
leading batch axis so a whole finite-difference stencil of counting fields
integrates in one pass.

Counting observables come out of the cumulant generating function: the
covariance of the jump numbers on two sites is the mixed second chi
derivative of -l, evaluated by a finite-difference stencil, and its steady
growth rate is a least-squares slope over the stationary window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import rk4_adaptive
from .model import ModelParams, coupling_table

AXES = {"x": 0, "y": 1, "z": 2}
BLOWUP = 10.0

# Levi-Civita structure constants eps[a, b, g]
EPS = np.zeros((3, 3, 3))
for a, b, g in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS[a, b, g] = 1.0
    EPS[a, g, b] = -1.0


class UnphysicalTruncationError(RuntimeError):
    """The uncontrolled second-order truncation ran away (|c| beyond bounds)."""


class StencilStepError(RuntimeError):
    """Richardson check of the finite-difference step failed."""


@dataclass
class CumulantState:
    """logC: log-trace ln C_chi; c: (N, 3) first cumulants; v: (N, N, 3, 3)
    second cumulants with zero k=l blocks and v[k,l,a,b] = v[l,k,b,a]."""

    logC: complex
    c: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex)
        self.v = np.asarray(self.v, dtype=complex)
        N = self.c.shape[0]
        if self.c.shape != (N, 3) or self.v.shape != (N, N, 3, 3):
            raise ValueError("inconsistent cumulant array shapes")

    @property
    def N(self) -> int:
        return self.c.shape[0]

    def mx(self) -> np.ndarray:
        return self.c[:, 0].real.copy()


def seed_state(N: int, cx: float = 0.3, cz: float = -0.5) -> CumulantState:
    """Symmetry-broken uncorrelated initial condition (v = 0)."""
    c = np.zeros((N, 3), dtype=complex)
    c[:, 0] = cx
    c[:, 2] = cz
    return CumulantState(logC=0.0 + 0.0j, c=c, v=np.zeros((N, N, 3, 3), complex))


def _zero_diag(v: np.ndarray) -> np.ndarray:
    N = v.shape[-3]
    idx = np.arange(N)
    v[..., idx, idx, :, :] = 0.0
    return v


def _rhs(l, c, v, w, e, J, h, gamma, mean_field_only=False):
    """Batched right-hand side; all arrays may carry leading batch axes:
    l (...,), c (..., N, 3), v (..., N, N, 3, 3), w = exp(i chi) - 1 and
    e = exp(i chi) of shape (..., N)."""
    cx = c[..., 0]
    cz = c[..., 2]
    # trace law: dl/dt = 2 gamma sum_j (e^{i chi_j} - 1)(c_j^z + 1)
    T = 2.0 * gamma * np.sum(w * (cz + 1.0), axis=-1)
    dl = T

    vx = v[..., 0, :]  # v_nl^{x beta}
    # first cumulants
    dc = -2.0 * h * (c @ EPS[2].T)
    S = np.sum(J[:, :, None] * vx, axis=-3)  # sum_n J_nk v_nk^{x gamma}
    S += (cx @ J)[..., None] * c
    dc += 4.0 * (S @ EPS[0].T)
    dc = dc - 2.0 * gamma * c
    dc[..., 2] -= 2.0 * gamma * (e * (cz + 1.0) + 1.0)
    # tilt terms: sum_{j != k} w_j (v_kj^{az} + c_k^a (c_j^z + 1)), minus the
    # trace-subtraction c_k^a * dl
    s = T[..., None] / (2.0 * gamma) - w * (cz + 1.0)
    dc += 2.0 * gamma * (
        np.einsum("...j,...kja->...ka", w, v[..., 2]) + c * s[..., None]
    )
    dc -= c * dl[..., None, None]

    if mean_field_only:
        return dl, dc, np.zeros_like(v)

    # second cumulants: build the (k, a)-side half P and symmetrize with
    # P + P^T(k<->l, a<->b), which realizes the beta-side terms verbatim.
    N = c.shape[-2]
    P = -2.0 * h * (EPS[2] @ v)
    # sum_{n != k,l} J_nk (c_k^g v_nl^{xb} + c_n^x v_kl^{gb}); the n = l
    # exclusion is automatic in the first piece (v_ll = 0) and explicit in q
    A = (J.T @ vx.reshape(vx.shape[:-2] + (N * 3,))).reshape(vx.shape)
    q = (cx @ J)[..., :, None] - J.T * cx[..., None, :]
    rc = c @ EPS[0].T  # eps_{xag} c_k^g
    P += 4.0 * (
        rc[..., :, None, :, None] * A[..., :, :, None, :]
        + q[..., :, :, None, None] * (EPS[0] @ v)
    )
    # direct J_kl coupling of the probed pair
    P[..., 0] += 4.0 * J[:, :, None] * rc[..., :, None, :]
    inner = c[..., :, None, :] * cx[..., None, :, None] + v[..., 0]
    P -= 4.0 * (
        J[:, :, None, None]
        * (inner @ EPS[0].T)[..., :, :, :, None]
        * c[..., None, :, None, :]
    )
    # dissipation and counting on index k
    coef = np.ones(c.shape, dtype=complex)
    coef[..., 2] += e
    P -= 2.0 * gamma * coef[..., :, None, :, None] * v
    P -= 2.0 * gamma * (c * w[..., None])[..., :, None, :, None] * v[..., None, 2, :]

    dv = P + np.swapaxes(np.swapaxes(P, -4, -3), -2, -1)
    # remaining counting terms: 2 gamma sum_{n != k,l} w_n (c_n^z + 1) v
    # minus the trace subtraction v * dl
    u = T[..., None, None] - 2.0 * gamma * (
        (w * (cz + 1.0))[..., :, None] + (w * (cz + 1.0))[..., None, :]
    )
    dv += (u - T[..., None, None])[..., None, None] * v
    return dl, dc, _zero_diag(dv)


def _pack(l, c, v):
    lead = np.shape(l)
    return np.concatenate(
        [np.reshape(l, lead + (1,)), c.reshape(lead + (-1,)), v.reshape(lead + (-1,))],
        axis=-1,
    )


def _unpack(y, N):
    l = y[..., 0]
    c = y[..., 1 : 1 + 3 * N].reshape(y.shape[:-1] + (N, 3))
    v = y[..., 1 + 3 * N :].reshape(y.shape[:-1] + (N, N, 3, 3))
    return l, c, v


def cumulant_rhs(
    state: CumulantState, chi, params: ModelParams, J_ij: np.ndarray | None = None
) -> CumulantState:
    """Time derivative of (logC, c, v) at the given counting field."""
    if J_ij is None:
        J_ij = coupling_table(params)
    chi = np.asarray(chi, dtype=float)
    w = np.exp(1j * chi) - 1.0
    dl, dc, dv = _rhs(
        np.asarray(state.logC), state.c, state.v, w, w + 1.0,
        J_ij, params.h, params.gamma,
    )
    return CumulantState(logC=complex(dl), c=dc, v=dv)


def evolve_cumulants(
    state0: CumulantState,
    chi,
    params: ModelParams,
    t_final: float,
    t_samples=None,
    rtol: float = 1e-8,
    mean_field_only: bool = False,
    J_ij: np.ndarray | None = None,
):
    """Integrate the cumulant equations; returns the final CumulantState or a
    list of states at t_samples.  chi may carry a leading batch axis, in which
    case logC/c/v gain the same axis."""
    N = state0.N
    if J_ij is None:
        J_ij = coupling_table(params)
    chi = np.asarray(chi, dtype=float)
    w = np.exp(1j * chi) - 1.0
    e = w + 1.0
    batch = chi.shape[:-1]
    l0 = np.broadcast_to(np.asarray(state0.logC), batch).astype(complex)
    c0 = np.broadcast_to(state0.c, batch + (N, 3)).astype(complex)
    v0 = np.broadcast_to(state0.v, batch + (N, N, 3, 3)).astype(complex)

    def f(t, y):
        l, c, v = _unpack(y, N)
        dl, dc, dv = _rhs(l, c, v, w, e, J_ij, params.h, params.gamma, mean_field_only)
        return _pack(dl, dc, dv)

    scale = 8.0 * params.gamma + 4.0 * params.h + 8.0 * params.J
    dt0 = 4.0 / scale  # generous cap; step-doubling control shrinks it as needed
    out = rk4_adaptive(f, _pack(l0, c0, v0), 0.0, t_final, dt0, rtol, t_samples)

    def to_state(y):
        l, c, v = _unpack(y, N)
        _check_bounded(c)
        return CumulantState(logC=complex(l), c=c, v=v)

    if batch == ():
        if t_samples is None:
            return to_state(out)
        return [to_state(y) for y in out]
    # batched runs return raw arrays (l, c, v)
    if t_samples is None:
        l, c, v = _unpack(out, N)
        _check_bounded(c)
        return l, c, v
    res = []
    for y in out:
        l, c, v = _unpack(y, N)
        _check_bounded(c)
        res.append((l, c, v))
    return res


def _check_bounded(c):
    if np.max(np.abs(c)) > BLOWUP:
        raise UnphysicalTruncationError(
            f"|c| reached {np.max(np.abs(c)):.2f}: truncation unphysical here"
        )


def steady_cumulants(
    params: ModelParams,
    tol: float = 1e-9,
    t_max: float | None = None,
    rtol: float = 1e-8,
    mean_field_only: bool = False,
    seed: tuple[float, float] = (0.3, -0.5),
) -> CumulantState:
    """Relax the chi = 0 equations from a symmetry-seeded state until the
    cumulants stop moving over a 1/gamma window."""
    if params.gamma <= 0:
        raise ValueError("stationary cumulants need gamma > 0")
    J_ij = coupling_table(params)
    chi = np.zeros(params.N)
    state = seed_state(params.N, *seed)
    window = max(1.0 / params.gamma, 1.0 / params.J)
    if t_max is None:
        t_max = 50.0 / params.gamma + 100.0 * window
    t = 50.0 / params.gamma
    state = evolve_cumulants(state, chi, params, t, rtol=rtol,
                             mean_field_only=mean_field_only, J_ij=J_ij)
    while t < t_max:
        nxt = evolve_cumulants(state, chi, params, window, rtol=rtol,
                               mean_field_only=mean_field_only, J_ij=J_ij)
        t += window
        drift = max(np.max(np.abs(nxt.c - state.c)), np.max(np.abs(nxt.v - state.v)))
        state = nxt
        if drift < tol:
            state.logC = 0.0 + 0.0j
            return state
    raise UnphysicalTruncationError(
        f"stationary cumulants not reached by t={t_max:.3g} (drift {drift:.3e})"
    )


def magnetization_steady(
    params: ModelParams, mean_field_only: bool = False, tol: float = 1e-9
) -> np.ndarray:
    """Stationary per-site m_x from the chi = 0 equations (symmetry-seeded)."""
    return steady_cumulants(params, tol=tol, mean_field_only=mean_field_only).mx()


@dataclass
class CgfStencil:
    """logC samples on the 3x3 counting-field stencil {-delta, 0, delta}^2
    around chi = 0 for one site pair, at a list of times."""

    chi_step: float
    sites: tuple[int, int]
    times: np.ndarray
    values: np.ndarray  # (n_times, 3, 3) complex, axes ordered (-d, 0, +d)

    def covariance(self) -> np.ndarray:
        """-d^2 l / dchi_i dchi_j at chi = 0 per sample time (4-point mixed
        stencil on the corners)."""
        d = self.chi_step
        V = self.values
        mixed = (V[:, 2, 2] - V[:, 2, 0] - V[:, 0, 2] + V[:, 0, 0]) / (4.0 * d * d)
        return -mixed.real


def cgf_stencil(
    params: ModelParams,
    sites: tuple[int, int],
    delta_chi: float,
    times,
    state_ss: CumulantState | None = None,
    rtol: float = 1e-8,
) -> CgfStencil:
    """Integrate the tilted equations from the stationary state on the 3x3
    stencil of counting fields (batched) and collect logC at the sample times."""
    i, j = sites
    if i == j:
        raise ValueError("covariance needs two distinct sites")
    if state_ss is None:
        state_ss = steady_cumulants(params, rtol=rtol)
    offs = np.array([-delta_chi, 0.0, delta_chi])
    chi = np.zeros((3, 3, params.N))
    chi[:, :, i] += offs[:, None]
    chi[:, :, j] += offs[None, :]
    times = np.asarray(times, dtype=float)
    samples = evolve_cumulants(
        state_ss, chi.reshape(9, params.N), params, float(times[-1]),
        t_samples=list(times), rtol=rtol,
    )
    values = np.stack([l.reshape(3, 3) for l, _, _ in samples])
    return CgfStencil(chi_step=delta_chi, sites=(i, j), times=times, values=values)


@dataclass
class CovarianceRate:
    """Stationary growth rate of Cov(n_i, n_j) per unit gamma t."""

    rate: float
    fit_r2: float
    cov_last: float
    richardson_rel: float | None
    stencil: CgfStencil = field(repr=False)


def _slope(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, _), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - (res[0] / ss if res.size and ss > 0 else 0.0)
    return float(slope), float(r2)


def covariance_rate(
    params: ModelParams,
    d: int = 1,
    delta_chi: float = 1e-3,
    t_window: float | None = None,
    n_times: int = 6,
    rtol: float = 1e-8,
    state_ss: CumulantState | None = None,
    richardson: bool = True,
    richardson_tol: float = 1e-3,
    sites: tuple[int, int] | None = None,
) -> CovarianceRate:
    """d Cov(n_1, n_{1+d}) / d(gamma t) in the stationary regime.

    The covariance comes from the mixed finite-difference stencil on the
    cumulant generating function; the rate is the least-squares slope over
    the second half of the counting window.  With richardson=True the
    delta/2 stencil must reproduce the rate to richardson_tol relative,
    otherwise StencilStepError is raised.
    """
    if sites is None:
        sites = (0, d % params.N)
    if state_ss is None:
        state_ss = steady_cumulants(params, rtol=rtol)
    if t_window is None:
        t_window = 20.0 / params.gamma
    times = np.linspace(0.5 * t_window, t_window, n_times)
    i, j = sites
    if i == j:
        raise ValueError("covariance needs two distinct sites")

    # one batch: the 3x3 stencil at delta plus, for the Richardson check,
    # the four corners at delta/2
    offs = np.array([-delta_chi, 0.0, delta_chi])
    chi = np.zeros((3, 3, params.N))
    chi[:, :, i] += offs[:, None]
    chi[:, :, j] += offs[None, :]
    chi = chi.reshape(9, params.N)
    if richardson:
        corners = np.zeros((4, params.N))
        for k, (si, sj) in enumerate([(-1, -1), (-1, 1), (1, -1), (1, 1)]):
            corners[k, i] = 0.5 * si * delta_chi
            corners[k, j] = 0.5 * sj * delta_chi
        chi = np.vstack([chi, corners])
    samples = evolve_cumulants(
        state_ss, chi, params, float(times[-1]), t_samples=list(times), rtol=rtol
    )
    values = np.stack([l[:9].reshape(3, 3) for l, _, _ in samples])
    st = CgfStencil(chi_step=delta_chi, sites=(i, j), times=np.asarray(times), values=values)
    cov = st.covariance()
    slope, r2 = _slope(params.gamma * times, cov)
    rich = None
    if richardson:
        d2 = 0.5 * delta_chi
        half = np.stack([l[9:] for l, _, _ in samples])  # (--, -+, +-, ++)
        cov_half = -(half[:, 3] - half[:, 2] - half[:, 1] + half[:, 0]).real / (
            4.0 * d2 * d2
        )
        slope_half, _ = _slope(params.gamma * times, cov_half)
        denom = max(abs(slope), abs(slope_half), 1e-12)
        rich = abs(slope - slope_half) / denom
        if rich > richardson_tol and abs(slope) > 1e-8:
            raise StencilStepError(
                f"rate changes by {rich:.2e} relative under delta -> delta/2"
            )
    return CovarianceRate(
        rate=slope, fit_r2=r2, cov_last=float(cov[-1]), richardson_rel=rich, stencil=st
    )


def covariance_rate_sweep(
    params: ModelParams,
    gammas,
    d: int = 1,
    **kw,
) -> list[dict]:
    """Rows (alpha, N, d, gamma_over_J, cov_rate, fit_r2, status) over a
    gamma scan; unphysical-truncation points are marked, not extrapolated."""
    rows = []
    for g in gammas:
        p = params.with_(gamma=float(g))
        row = {
            "alpha": p.alpha, "N": p.N, "d": d, "gamma_over_J": g / p.J,
            "cov_rate": np.nan, "fit_r2": np.nan, "status": "ok",
        }
        try:
            res = covariance_rate(p, d=d, **kw)
            row["cov_rate"] = res.rate
            row["fit_r2"] = res.fit_r2
        except UnphysicalTruncationError:
            row["status"] = "unphysical"
        except StencilStepError:
            row["status"] = "stencil"
        rows.append(row)
    return rows
