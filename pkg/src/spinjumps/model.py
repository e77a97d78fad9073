"""Physical parameters, PBC geometry, Kac normalization and Hamiltonian builders.

Two interaction normalizations coexist in this code base:

* `build_full_hamiltonian` uses the per-pair coefficient J / (2 N_alpha r^alpha)
  of the bare chain Hamiltonian.
* the coupling table `J_ij = J / (N_alpha r_ij^alpha)` enters the cluster
  mean-field and cumulant equations, whose interaction terms carry a pair
  coefficient 2*J_ij.  `hamiltonian_from_couplings` builds the dense operator
  in that convention; it is the one every cross-solver comparison uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .operators import embed, site_ops

# Euler-Maclaurin truncation point for the Hurwitz zeta tail
_ZETA_CUT = 50


@dataclass(frozen=True)
class ModelParams:
    """All physical and geometric parameters of a run.

    N: chain length, Nc: cluster size, J: interaction strength,
    h: transverse field, gamma: emission rate, alpha: range exponent.
    """

    N: int
    Nc: int
    J: float
    h: float
    gamma: float
    alpha: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 1 <= self.Nc <= self.N:
            raise ValueError("Nc must satisfy 1 <= Nc <= N")
        if self.J <= 0:
            raise ValueError("J must be > 0")
        if self.h < 0 or self.gamma < 0 or self.alpha < 0:
            raise ValueError("h, gamma, alpha must be >= 0")

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class MeanFieldDrive:
    """Per-site mean-field amplitudes g_i of the monitored cluster and the
    magnetization profile m_j^x of the unmonitored clusters producing them."""

    g: np.ndarray
    mx: np.ndarray

    def __post_init__(self):
        if np.max(np.abs(self.mx)) > 1 + 1e-9:
            raise ValueError("unphysical magnetization |m_x| > 1")


def pbc_distance(i: int, j: int, N: int) -> int:
    """min(|i-j|, N-|i-j|) on the periodic chain."""
    if not (0 <= i < N and 0 <= j < N):
        raise ValueError(f"site indices ({i}, {j}) out of range for N={N}")
    d = abs(i - j)
    return min(d, N - d)


def hurwitz_zeta(alpha: float, q: float) -> float:
    """Hurwitz zeta sum_{k>=0} (k+q)^(-alpha) for alpha > 1, q > 0.

    Partial sum plus Euler-Maclaurin tail (integral, 1/2-term and two
    Bernoulli corrections); relative accuracy well below 1e-10 for the
    exponents used here.
    """
    if alpha <= 1:
        raise ValueError("Hurwitz zeta series diverges for alpha <= 1")
    if q <= 0:
        raise ValueError("q must be > 0")
    alpha, q = float(alpha), float(q)
    k = np.arange(_ZETA_CUT, dtype=float)
    head = np.sum((k + q) ** (-alpha))
    x = _ZETA_CUT + q
    tail = x ** (1 - alpha) / (alpha - 1)
    tail += 0.5 * x ** (-alpha)
    tail += alpha / 12.0 * x ** (-alpha - 1)
    tail -= alpha * (alpha + 1) * (alpha + 2) / 720.0 * x ** (-alpha - 3)
    return float(head + tail)


def kac_norm(alpha: float, N: int | None = None, thermodynamic: bool = False) -> float:
    """Kac normalization 2*sum_{r=1..N//2} r^(-alpha), or 2*zeta(alpha, 1)
    in the thermodynamic limit (requires alpha > 1).

    For odd N every distance r <= N//2 appears twice per site, so the same
    formula applies with the floor.
    """
    if thermodynamic:
        if alpha <= 1:
            raise ValueError("thermodynamic Kac normalization needs alpha > 1")
        return 2.0 * hurwitz_zeta(alpha, 1.0)
    if N is None:
        raise ValueError("finite-N Kac normalization needs N")
    r = np.arange(1, N // 2 + 1, dtype=float)
    return float(2.0 * np.sum(r ** (-alpha)))


def coupling_table(params: ModelParams) -> np.ndarray:
    """N x N table J_ij = J / (N_alpha r_ij^alpha), zero diagonal, finite-N Kac."""
    N = params.N
    if N == 1:
        return np.zeros((1, 1))
    na = kac_norm(params.alpha, N)
    idx = np.arange(N)
    d = np.abs(idx[:, None] - idx[None, :])
    r = np.minimum(d, N - d).astype(float)
    with np.errstate(divide="ignore"):
        tbl = params.J / (na * r**params.alpha)
    np.fill_diagonal(tbl, 0.0)
    return tbl


def hamiltonian_from_couplings(J_ij: np.ndarray, h: float) -> np.ndarray:
    """Dense H = -sum_{i != j} J_ij sx_i sx_j + h sum_i sz_i.

    The ordered double sum gives each pair the coefficient 2*J_ij, matching
    the cluster mean-field and cumulant conventions.
    """
    n = J_ij.shape[0]
    sx = site_ops("x", n)
    H = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            H -= 2.0 * J_ij[i, j] * (sx[i] @ sx[j])
        H += h * embed("z", i, n)
    return H


def build_full_hamiltonian(params: ModelParams) -> np.ndarray:
    """Bare chain Hamiltonian
    H = -(J / 2 N_alpha) sum_{i<j} r_ij^(-alpha) sx_i sx_j + h sum_i sz_i,
    with finite-N Kac normalization."""
    if params.N > 12:
        raise ValueError("dense chain Hamiltonian capped at N = 12")
    return hamiltonian_from_couplings(coupling_table(params) / 4.0, params.h)


def mean_field_weights(params: ModelParams, thermodynamic: bool = True) -> np.ndarray:
    """Nc x Nc matrix b_ij of inter-cluster coupling weights such that the
    mean-field drive on site i is -2 (J / N_alpha) sx_i sum_j b_ij m_j^x.

    thermodynamic=True (alpha > 1): b_ij resums all translational copies of
    the cluster via Hurwitz zeta functions,
    b_ij = Nc^(-alpha) [zeta(alpha, (i-j)/Nc + 1) + zeta(alpha, (j-i)/Nc + 1)],
    and N_alpha = 2 zeta(alpha, 1).  thermodynamic=False: explicit finite-N
    summation over cluster copies with PBC distances, for any alpha >= 0.
    """
    Nc, alpha = params.Nc, params.alpha
    b = np.zeros((Nc, Nc))
    if thermodynamic:
        if alpha <= 1:
            raise ValueError("zeta-resummed mean field needs alpha > 1")
        for i in range(Nc):
            for j in range(Nc):
                b[i, j] = Nc ** (-alpha) * (
                    hurwitz_zeta(alpha, (i - j) / Nc + 1.0)
                    + hurwitz_zeta(alpha, (j - i) / Nc + 1.0)
                )
        return b
    N = params.N
    if N % Nc != 0:
        raise ValueError("finite-N mean field requires Nc | N")
    for i in range(Nc):
        for j in range(Nc):
            acc = 0.0
            for xi in range(1, N // Nc):
                site = xi * Nc + j
                acc += pbc_distance(i, site, N) ** (-alpha) if alpha > 0 else 1.0
            b[i, j] = acc
    return b


def build_cmf_hamiltonian(
    params: ModelParams,
    mx: np.ndarray,
    thermodynamic: bool = True,
    closed: bool = False,
) -> np.ndarray:
    """Cluster mean-field Hamiltonian for one Nc-site cluster.

    Intra-cluster term -(J/N_alpha) sum_{i != j} |i-j|^(-alpha) sx_i sx_j,
    per-site mean-field drive from `mean_field_weights`, and the transverse
    field.  For Nc=1 and uniform mx=m this reduces to h sz - 2 J m sx.

    closed=True drops the drive and treats the cluster as the whole chain
    (PBC intra-cluster distances, finite-Nc Kac); used to compare against
    the dense solver on equal footing.
    """
    Nc, J, alpha = params.Nc, params.J, params.alpha
    mx = np.asarray(mx, dtype=float)
    if mx.shape != (Nc,):
        raise ValueError(f"mx must have length Nc={Nc}")
    if closed:
        na = kac_norm(alpha, Nc)
        dist = lambda i, j: pbc_distance(i, j, Nc)
    elif thermodynamic:
        na = kac_norm(alpha, thermodynamic=True)
        dist = lambda i, j: abs(i - j)
    else:
        na = kac_norm(alpha, params.N)
        dist = lambda i, j: abs(i - j)

    sx = site_ops("x", Nc)
    H = np.zeros((2**Nc, 2**Nc), dtype=complex)
    for i in range(Nc):
        for j in range(i + 1, Nc):
            H -= 2.0 * (J / na) * dist(i, j) ** (-alpha) * (sx[i] @ sx[j])
        H += params.h * embed("z", i, Nc)
    if not closed:
        b = mean_field_weights(params, thermodynamic=thermodynamic)
        drive = (J / na) * (b @ mx)
        for i in range(Nc):
            H -= 2.0 * drive[i] * sx[i]
    return H


def build_strong_long_range_field(params: ModelParams, mx: np.ndarray) -> np.ndarray:
    """Decoupled mean-field Hamiltonian -2 J mbar sum_i sx_i + h sum_i sz_i,
    valid for 0 <= alpha < 1 where the intra-cluster corrections vanish."""
    if not 0 <= params.alpha < 1:
        raise ValueError("strong-long-range branch requires 0 <= alpha < 1")
    mx = np.asarray(mx, dtype=float)
    if mx.shape != (params.Nc,):
        raise ValueError(f"mx must have length Nc={params.Nc}")
    mbar = float(np.mean(mx))
    Nc = params.Nc
    H = np.zeros((2**Nc, 2**Nc), dtype=complex)
    for i in range(Nc):
        H += -2.0 * params.J * mbar * embed("x", i, Nc) + params.h * embed("z", i, Nc)
    return H


def cluster_drive_hamiltonian(params: ModelParams, drive: MeanFieldDrive) -> np.ndarray:
    """Hamiltonian of the monitored cluster:
    -(J/N_alpha) sum_{i != j} sx_i sx_j / r_ij^alpha - 2J sum_i g_i sx_i + h sum_i sz_i.

    Intra-cluster distances are plain |i-j| (the cluster is a chain segment)
    and N_alpha matches the mode the drive g was computed in.
    """
    Nc, J, alpha = params.Nc, params.J, params.alpha
    if alpha > 1:
        na = kac_norm(alpha, thermodynamic=True)
    else:
        na = kac_norm(alpha, params.N)
    sx = site_ops("x", Nc)
    H = np.zeros((2**Nc, 2**Nc), dtype=complex)
    for i in range(Nc):
        for j in range(i + 1, Nc):
            H -= 2.0 * (J / na) * abs(i - j) ** (-alpha) * (sx[i] @ sx[j])
        H += params.h * embed("z", i, Nc)
        H -= 2.0 * J * float(drive.g[i]) * sx[i]
    return H


def monitored_drive(
    params: ModelParams,
    mx_steady: np.ndarray,
    thermodynamic: bool | None = None,
) -> MeanFieldDrive:
    """Mean-field amplitudes g_i = sum_{j outside cluster} m_j^x / (N_alpha r_ij^alpha),
    with the unmonitored magnetization pattern mx_steady repeated over all
    translational copies of the cluster.

    By default the zeta-resummed thermodynamic sum is used for alpha > 1 and
    the explicit finite-N sum otherwise.
    """
    mx = np.asarray(mx_steady, dtype=float)
    if mx.shape != (params.Nc,):
        raise ValueError(f"mx_steady must have length Nc={params.Nc}")
    if thermodynamic is None:
        thermodynamic = params.alpha > 1
    b = mean_field_weights(params, thermodynamic=thermodynamic)
    if thermodynamic:
        na = kac_norm(params.alpha, thermodynamic=True)
    else:
        na = kac_norm(params.alpha, params.N)
    g = (b @ mx) / na
    return MeanFieldDrive(g=g, mx=mx)
