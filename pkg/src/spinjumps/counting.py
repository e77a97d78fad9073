"""Jump-count distributions and their reconstruction from counting-field grids.

The generating trace Z(chi) = Tr rho_chi(t), sampled on the uniform grid
chi_k = 2 pi k / M, inverts to P(n) = (1/M) sum_k exp(-i n chi_k) Z_k, which
is a plain forward DFT.  Small negative weights (|.| < CLAMP_TOL) are
numerical noise and get clamped.  An undersized grid shows up in two ways:
appreciable negativity of the reconstruction, or mass folded into the top
band of the grid (periodic aliasing of a distribution is positive, so the
band check is the one that catches clean wrap-around).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

CLAMP_TOL = 1e-8
ALIAS_TOL = 1e-6
MIN_GRID = 64


class AliasingError(RuntimeError):
    """The counting grid is too small for the jump numbers reached."""


def recommended_grid_size(gamma: float, t_final: float, n_counted_sites: int) -> int:
    """Power-of-two grid size from the worst-case per-site jump rate 4*gamma."""
    bound = 8 * int(np.ceil(4.0 * gamma * t_final * n_counted_sites))
    m = MIN_GRID
    while m < bound:
        m *= 2
    return m


@dataclass
class CountDistribution:
    """P(n) or P(n1, n2) on the grid of reachable jump numbers.

    probs is 1D for single counting and 2D for joint counting; entry [n]
    (or [n1, n2]) is the probability of that many jumps up to time t.
    """

    probs: np.ndarray
    t: float
    grid_size: int
    counted_sites: tuple = ()
    raw_negativity: float = 0.0
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.support = np.arange(self.probs.shape[0])

    @property
    def ndim(self) -> int:
        return self.probs.ndim

    def mean(self, axis: int = 0) -> float:
        return float(np.sum(self._marginal(axis) * self.support))

    def var(self, axis: int = 0) -> float:
        p = self._marginal(axis)
        m = np.sum(p * self.support)
        return float(np.sum(p * self.support**2) - m**2)

    def cov(self) -> float:
        if self.ndim != 2:
            raise ValueError("covariance needs a joint distribution")
        n = self.support.astype(float)
        joint = float(n @ self.probs @ n)
        return joint - self.mean(0) * self.mean(1)

    def marginal(self, axis: int = 0) -> np.ndarray:
        return self._marginal(axis)

    def _marginal(self, axis: int) -> np.ndarray:
        if self.ndim == 1:
            if axis != 0:
                raise ValueError("1D distribution has a single axis")
            return self.probs
        return self.probs.sum(axis=1 - axis)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.ndim == 1:
                w.writerow(["n", "p"])
                for n, p in zip(self.support, self.probs):
                    w.writerow([int(n), repr(float(p))])
            else:
                w.writerow(["n1", "n2", "p"])
                for n1 in self.support:
                    for n2 in self.support:
                        w.writerow([int(n1), int(n2), repr(float(self.probs[n1, n2]))])


def from_trace_grid(Z: np.ndarray, t: float, counted_sites=()) -> CountDistribution:
    """Invert the trace surface Z over the uniform chi grid into P(n).

    Z has shape (M,) for single counting or (M, M) for joint counting.
    """
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim == 1:
        raw = np.fft.fft(Z) / Z.size
    elif Z.ndim == 2:
        if Z.shape[0] != Z.shape[1]:
            raise ValueError("joint trace surface must be square")
        raw = np.fft.fft2(Z) / Z.size
    else:
        raise ValueError("trace grid must be 1D or 2D")
    p = raw.real
    negativity = float(-min(p.min(), 0.0))
    if negativity > ALIAS_TOL:
        raise AliasingError(
            f"P(n) reaches {-negativity:.3e} < -{ALIAS_TOL}; "
            "counting grid too small for this evolution time"
        )
    M = p.shape[0]
    band = max(1, M // 8)
    if p.ndim == 1:
        edge = p[-band:].sum()
    else:
        edge = p[-band:, :].sum() + p[:, -band:].sum()
    if edge > ALIAS_TOL:
        raise AliasingError(
            f"mass {edge:.3e} in the top {band} grid bins; "
            "counting grid too small for this evolution time"
        )
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    return CountDistribution(
        probs=p,
        t=t,
        grid_size=Z.shape[0],
        counted_sites=tuple(counted_sites),
        raw_negativity=negativity,
    )


def connected_joint(dist: CountDistribution) -> np.ndarray:
    """P(n1, n2) - P(n1) P(n2); sums to zero by the marginals identity."""
    if dist.ndim != 2:
        raise ValueError("connected part needs a joint distribution")
    return dist.probs - np.outer(dist.marginal(0), dist.marginal(1))


def quadrant_sums(dist: CountDistribution) -> dict[str, float]:
    """Sums of the connected joint over the four quadrants around the means.

    Keys: 'hi_hi', 'hi_lo', 'lo_hi', 'lo_lo', splitting each axis at its
    mean (cells at the mean go to the 'hi' side).
    """
    conn = connected_joint(dist)
    n = dist.support.astype(float)
    hi1 = n >= dist.mean(0)
    hi2 = n >= dist.mean(1)
    return {
        "hi_hi": float(conn[np.ix_(hi1, hi2)].sum()),
        "hi_lo": float(conn[np.ix_(hi1, ~hi2)].sum()),
        "lo_hi": float(conn[np.ix_(~hi1, hi2)].sum()),
        "lo_lo": float(conn[np.ix_(~hi1, ~hi2)].sum()),
    }
