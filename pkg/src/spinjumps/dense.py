"""Exact dense integration of the (tilted) Lindblad equation for small chains.

Every solver here works on explicit 2^n x 2^n complex arrays and serves as
ground truth for the approximate methods.  The counting field enters only
through per-site complex weights w_j multiplying the recycling term
gamma * w_j * sm_j rho sp_j: w_j = 1 is plain Lindblad, w_j = exp(i chi_j)
is tilted counting and w_j = 0 removes the click channel (no-click
evolution).
"""

from __future__ import annotations

import numpy as np

from .counting import CountDistribution, from_trace_grid, recommended_grid_size
from .integrate import rk4_adaptive
from .model import ModelParams, build_full_hamiltonian
from .operators import site_ops


class LindbladSystem:
    """Precomputed operators for a fixed Hamiltonian and decay rate."""

    def __init__(self, H: np.ndarray, gamma: float, n_sites: int | None = None):
        H = np.asarray(H, dtype=complex)
        dim = H.shape[0]
        if H.shape != (dim, dim):
            raise ValueError("H must be square")
        n = int(round(np.log2(dim)))
        if 2**n != dim:
            raise ValueError("H dimension must be a power of 2")
        if n_sites is not None and n_sites != n:
            raise ValueError("n_sites inconsistent with H dimension")
        self.n_sites = n
        self.dim = dim
        self.gamma = float(gamma)
        self.H = H
        self.sm = np.stack(site_ops("minus", n))
        self.sp = np.stack(site_ops("plus", n))
        self.num = np.stack([p @ m for p, m in zip(self.sp, self.sm)])
        self.heff = H - 0.5j * gamma * self.num.sum(axis=0)

    def weights_from_chi(self, chi) -> np.ndarray:
        """exp(i chi_j) per site; chi may be scalar (same field on all sites),
        a length-n vector, or a batch of such vectors."""
        chi = np.asarray(chi, dtype=float)
        if chi.ndim == 0:
            chi = np.full(self.n_sites, float(chi))
        if chi.shape[-1] != self.n_sites:
            raise ValueError(f"chi must have {self.n_sites} per-site entries")
        return np.exp(1j * chi)

    def rhs(self, rho: np.ndarray, weights=None) -> np.ndarray:
        """d rho / dt with per-site recycling weights (default 1: Eq. of motion
        of the plain Lindbladian).  rho may carry leading batch axes; weights
        broadcast as (..., n_sites)."""
        out = -1j * (self.heff @ rho - rho @ self.heff.conj().T)
        for j in range(self.n_sites):
            term = self.sm[j] @ rho @ self.sp[j]
            if weights is not None:
                w = np.asarray(weights)[..., j]
                term = term * np.asarray(w)[..., None, None]
            out += self.gamma * term
        return out

    def liouvillian_matrix(self, weights=None) -> np.ndarray:
        """Vectorized generator acting on row-major-flattened rho."""
        d = self.dim
        eye = np.eye(d, dtype=complex)
        L = -1j * (np.kron(self.heff, eye) - np.kron(eye, self.heff.conj()))
        for j in range(self.n_sites):
            w = 1.0 if weights is None else np.asarray(weights)[j]
            L += self.gamma * w * np.kron(self.sm[j], self.sp[j].T)
        return L


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, gamma: float, chi=None) -> np.ndarray:
    """One-shot right-hand side -i[H, rho] + gamma sum_j (w_j sm_j rho sp_j
    - {sp_j sm_j, rho}/2) with w_j = exp(i chi_j) (1 when chi is None)."""
    sys = LindbladSystem(H, gamma)
    w = None if chi is None else sys.weights_from_chi(chi)
    return sys.rhs(rho, w)


def default_step(sys: LindbladSystem) -> float:
    # conservative max step from the fastest generator scale
    scale = 4.0 * sys.gamma + 2.0 * np.linalg.norm(sys.H, ord=2)
    return 0.25 / max(scale, 1e-12)


def integrate_lindblad(
    rho0: np.ndarray,
    H: np.ndarray,
    gamma: float,
    t_final: float,
    chi=None,
    dt: float | None = None,
    rtol: float = 1e-8,
    t_samples=None,
):
    """Integrate the (tilted) Lindblad equation from rho0 to t_final.

    rho0 may be a single matrix or a batch (B, d, d); chi may then be a
    matching batch of counting-field vectors.
    """
    sys = LindbladSystem(H, gamma)
    w = None if chi is None else sys.weights_from_chi(chi)
    if dt is None:
        dt = default_step(sys)
    f = lambda t, y: sys.rhs(y, w)
    return rk4_adaptive(f, np.asarray(rho0, dtype=complex), 0.0, t_final, dt, rtol, t_samples)


def product_state(bloch: np.ndarray | list, n_sites: int) -> np.ndarray:
    """Pure product density matrix with the same Bloch vector on every site
    (or one vector per site when given an (n, 3) array)."""
    bloch = np.atleast_2d(np.asarray(bloch, dtype=float))
    if bloch.shape == (1, 3):
        bloch = np.repeat(bloch, n_sites, axis=0)
    if bloch.shape != (n_sites, 3):
        raise ValueError("bloch must be (3,) or (n_sites, 3)")
    rho = np.ones((1, 1), dtype=complex)
    for bx, by, bz in bloch:
        site = 0.5 * np.array([[1 + bz, bx - 1j * by], [bx + 1j * by, 1 - bz]])
        rho = np.kron(rho, site)
    return rho


def symmetry_broken_state(n_sites: int, mx: float = 0.3) -> np.ndarray:
    """Pure product state with <sx> = mx, <sz> < 0; seeds the FM fixed point."""
    return product_state([mx, 0.0, -np.sqrt(max(0.0, 1.0 - mx**2))], n_sites)


class SteadyStateError(RuntimeError):
    def __init__(self, residual, t_reached):
        super().__init__(
            f"steady state not reached: residual {residual:.3e} at t={t_reached:.3g}"
        )
        self.residual = residual
        self.t_reached = t_reached


def steady_state(
    H: np.ndarray,
    gamma: float,
    rho0: np.ndarray | None = None,
    tol: float = 1e-10,
    t_max: float | None = None,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Relax from a symmetry-broken product state until the Frobenius change
    over a window of 1/gamma drops below tol."""
    if gamma <= 0:
        raise ValueError("steady state needs gamma > 0")
    sys = LindbladSystem(H, gamma)
    rho = symmetry_broken_state(sys.n_sites) if rho0 is None else np.asarray(rho0, complex)
    window = 1.0 / gamma
    if t_max is None:
        t_max = 400.0 / gamma
    f = lambda t, y: sys.rhs(y)
    dt = default_step(sys)
    t = 0.0
    while t < t_max:
        nxt = rk4_adaptive(f, rho, 0.0, window, dt, rtol)
        t += window
        if np.linalg.norm(nxt - rho) < tol:
            return nxt
        rho = nxt
    raise SteadyStateError(np.linalg.norm(nxt - rho), t)


def fcs_dense(
    params: ModelParams,
    t_final: float,
    M: int | None = None,
    counted_sites=None,
    rho0: np.ndarray | None = None,
    H: np.ndarray | None = None,
    rtol: float = 1e-8,
) -> CountDistribution:
    """Exact P(n) of the total number of jumps on `counted_sites` (default:
    all sites) up to t_final, by tilted evolution over a uniform chi grid and
    inverse DFT.  Starts from the untilted steady state unless rho0 is given.
    """
    if H is None:
        H = build_full_hamiltonian(params)
    n = params.N
    if counted_sites is None:
        counted_sites = tuple(range(n))
    bound = recommended_grid_size(params.gamma, t_final, len(counted_sites))
    if M is None:
        M = bound
    elif M & (M - 1):
        raise ValueError("M must be a power of 2")
    elif M < bound:
        raise ValueError(f"M={M} below the aliasing-safe bound {bound}")
    if rho0 is None:
        rho0 = steady_state(H, params.gamma)
    chi = np.zeros((M, n))
    chi[:, list(counted_sites)] = (2 * np.pi * np.arange(M) / M)[:, None]
    batch = np.broadcast_to(rho0, (M, *rho0.shape)).copy()
    rho_t = integrate_lindblad(batch, H, params.gamma, t_final, chi=chi, rtol=rtol)
    Z = np.trace(rho_t, axis1=-2, axis2=-1)
    return from_trace_grid(Z, t_final, counted_sites)


def wtd_dense(
    params: ModelParams,
    site: int = 0,
    t_grid: np.ndarray | None = None,
    H: np.ndarray | None = None,
    rho_ss: np.ndarray | None = None,
    rtol: float = 1e-9,
):
    """Waiting-time density between consecutive clicks on one monitored site,
    W(t) = Tr[L_j e^{(L - L_j) t} L_j rho_ss] / Tr[L_j rho_ss] with
    L_j rho = gamma sm_j rho sp_j, evaluated on a log-spaced grid.

    Returns (t_grid, w).  Raises ValueError when the steady state is dark on
    the monitored site.
    """
    if params.N > 6:
        raise ValueError("dense waiting-time evolution capped at N = 6")
    if H is None:
        H = build_full_hamiltonian(params)
    sys = LindbladSystem(H, params.gamma)
    if rho_ss is None:
        rho_ss = steady_state(H, params.gamma)
    sigma0 = params.gamma * (sys.sm[site] @ rho_ss @ sys.sp[site])
    denom = np.trace(sigma0).real
    if denom < 1e-14:
        raise ValueError("dark steady state: waiting-time distribution undefined")
    if t_grid is None:
        t_grid = np.geomspace(1e-3 / params.gamma, 30.0 / params.gamma, 200)
    weights = np.ones(params.N, dtype=complex)
    weights[site] = 0.0
    f = lambda t, y: sys.rhs(y, weights)
    states = rk4_adaptive(
        f, sigma0, 0.0, float(t_grid[-1]), default_step(sys), rtol, t_samples=list(t_grid)
    )
    w = np.array(
        [params.gamma * np.trace(sys.num[site] @ s).real / denom for s in states]
    )
    return np.asarray(t_grid), w
