"""Monte Carlo unraveling of the dissipative dynamics into jump records.

Two unravelings live here:

* `McwfEngine` / `mcwf_trajectory`: pure-state Monte Carlo wavefunction for
  the full chain, with every site monitored.
* `MonitoredClusterSampler`: mixed unraveling of one cluster where only site
  0 is monitored; the other sites keep their full Lindblad dissipators, so
  the state is a density matrix evolving under the no-click generator.

Both generators are time independent, so the smooth evolution uses exact
matrix exponentials precomputed for one coarse step and its dyadic halvings.
A jump fires when the squared norm (resp. trace) crosses a uniform draw r;
the decay is monotone, so the crossing is bracketed by coarse steps and then
located by walking down the halvings — bias-free in the step size, with the
jump time resolved to dt / 2^JUMP_BITS.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .counting import CountDistribution
from .dense import LindbladSystem
from .model import MeanFieldDrive, ModelParams, build_full_hamiltonian, cluster_drive_hamiltonian
from .operators import site_ops

JUMP_BITS = 42  # jump-time resolution: coarse step / 2^42


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based per-trajectory stream: the (seed, index) pair keys a
    Philox generator, so the parallel execution order cannot matter."""
    key = np.array([np.uint64(master_seed), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class JumpRecord:
    """Detection record of one trajectory: ordered (time, site) events."""

    events: list
    t_final: float
    seed: int

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("jump times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] > self.t_final):
            raise ValueError("jump times must lie in [0, t_final]")

    def count(self, sites, t: float | None = None) -> int:
        t = self.t_final if t is None else t
        sites = set(sites)
        return sum(1 for tt, s in self.events if s in sites and tt <= t)


def export_records(records: list[JumpRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_id", "time", "site"])
        for i, rec in enumerate(records):
            for t, s in rec.events:
                w.writerow([i, repr(float(t)), int(s)])


def import_records(path, t_final: float) -> list[JumpRecord]:
    by_id: dict[int, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_id.setdefault(int(row["trajectory_id"]), []).append(
                (float(row["time"]), int(row["site"]))
            )
    return [
        JumpRecord(events=sorted(ev), t_final=t_final, seed=-1)
        for _, ev in sorted(by_id.items())
    ]


class _DyadicPropagator:
    """expm(G * dt / 2^j) for j = 0..JUMP_BITS over a linear generator G."""

    def __init__(self, G: np.ndarray, dt: float):
        self.dt = float(dt)
        self.steps = [expm(G * (dt / 2**j)) for j in range(JUMP_BITS + 1)]


def _advance(prop: _DyadicPropagator, v, weight, r, duration):
    """Advance v by `duration`, or up to the time where weight(v) crosses r.

    Returns (state, elapsed, crossed).  Assumes weight is non-increasing
    along the flow; duration is decomposed into coarse steps plus a dyadic
    tail, and a crossing inside any chunk is refined by the halvings.
    """
    elapsed = 0.0
    for j in range(JUMP_BITS + 1):
        size = prop.dt / 2**j
        while duration - elapsed >= size * (1.0 - 1e-9):
            cand = prop.steps[j] @ v
            if weight(cand) <= r:
                # crossing inside this chunk: walk the finer halvings
                for jj in range(j + 1, JUMP_BITS + 1):
                    cand = prop.steps[jj] @ v
                    if weight(cand) > r:
                        v = cand
                        elapsed += prop.dt / 2**jj
                return v, elapsed, True
            v = cand
            elapsed += size
            if j == 0:
                continue
            break  # at most one chunk per dyadic level below the coarse one
    return v, elapsed, False


@dataclass
class PureState:
    amplitudes: np.ndarray

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "PureState":
        return PureState(self.amplitudes / np.sqrt(self.norm2))


class McwfEngine:
    """Monte Carlo wavefunction sampler for a fixed chain Hamiltonian."""

    def __init__(self, params: ModelParams, H: np.ndarray | None = None, dt: float | None = None):
        if params.N > 12:
            raise ValueError("dense trajectory evolution capped at N = 12")
        if H is None:
            H = build_full_hamiltonian(params)
        self.params = params
        self.gamma = params.gamma
        self.sm = site_ops("minus", params.N)
        num = [m.conj().T @ m for m in self.sm]
        self.H_nh = H - 0.5j * self.gamma * sum(num)
        if dt is None:
            scale = 4.0 * self.gamma + 2.0 * np.linalg.norm(H, ord=2)
            dt = 0.5 / max(scale, 1e-12)
        self.prop = _DyadicPropagator(-1j * self.H_nh, dt)

    def trajectory(
        self, psi0: np.ndarray, t_final: float, seed: int, traj_index: int = 0
    ) -> tuple[PureState, JumpRecord]:
        rng = trajectory_rng(seed, traj_index)
        psi = np.asarray(psi0, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        norm2 = lambda v: float(np.vdot(v, v).real)
        events = []
        t = 0.0
        while True:
            r = rng.random()
            psi, elapsed, crossed = _advance(self.prop, psi, norm2, r, t_final - t)
            t += elapsed
            if not crossed or t >= t_final:
                break
            rates = np.array([self.gamma * norm2(m @ psi) for m in self.sm])
            site = int(rng.choice(self.params.N, p=rates / rates.sum()))
            events.append((t, site))
            psi = self.sm[site] @ psi
            psi /= np.linalg.norm(psi)
        return PureState(psi).normalized(), JumpRecord(events, t_final, seed)


def mcwf_trajectory(
    params: ModelParams,
    psi0: np.ndarray,
    t_final: float,
    seed: int,
    traj_index: int = 0,
    H: np.ndarray | None = None,
) -> tuple[PureState, JumpRecord]:
    """One pure-state trajectory; see McwfEngine for the scheme."""
    return McwfEngine(params, H).trajectory(psi0, t_final, seed, traj_index)


def run_ensemble(
    params: ModelParams,
    psi0: np.ndarray,
    t_final: float,
    n_traj: int,
    seed: int,
    H: np.ndarray | None = None,
    keep_states: bool = False,
):
    """n_traj independent trajectories with per-index Philox streams.

    Returns the jump records, or (records, final states) with keep_states.
    """
    engine = McwfEngine(params, H)
    records, states = [], []
    for i in range(n_traj):
        st, rec = engine.trajectory(psi0, t_final, seed, traj_index=i)
        records.append(rec)
        if keep_states:
            states.append(st)
    return (records, states) if keep_states else records


def empirical_fcs(records: list[JumpRecord], sites_counted, t: float) -> CountDistribution:
    """Histogram of jump counts on `sites_counted` up to time t."""
    if not records:
        raise ValueError("no trajectory records given")
    if any(rec.t_final < t for rec in records):
        raise ValueError("records end before the requested counting time")
    counts = np.array([rec.count(sites_counted, t) for rec in records])
    probs = np.bincount(counts).astype(float) / len(records)
    return CountDistribution(probs=probs, t=t, grid_size=0, counted_sites=tuple(sites_counted))


def empirical_fcs_joint(
    records: list[JumpRecord], site_a: int, site_b: int, t: float
) -> CountDistribution:
    """Joint histogram of (n_a, n_b) up to time t."""
    if not records:
        raise ValueError("no trajectory records given")
    na = np.array([rec.count([site_a], t) for rec in records])
    nb = np.array([rec.count([site_b], t) for rec in records])
    side = int(max(na.max(), nb.max())) + 1
    probs = np.zeros((side, side))
    for a, b in zip(na, nb):
        probs[a, b] += 1.0
    probs /= len(records)
    return CountDistribution(probs=probs, t=t, grid_size=0, counted_sites=(site_a, site_b))


class MonitoredClusterSampler:
    """Mixed unraveling of one cluster: site 0 monitored, the rest Lindbladian.

    The cluster density matrix flows deterministically under the no-click
    generator (full cluster Lindbladian minus the site-0 recycling term);
    site-0 clicks are sampled from the trace decay by the same uniform-draw
    crossing scheme as the pure-state unraveling, after which
    rho -> sm_0 rho sp_0 / trace.
    """

    def __init__(
        self,
        params: ModelParams,
        drive: MeanFieldDrive,
        dt: float | None = None,
        H: np.ndarray | None = None,
    ):
        if params.Nc > 6:
            raise ValueError("monitored-cluster evolution capped at Nc = 6")
        self.params = params
        if H is None:
            H = cluster_drive_hamiltonian(params, drive)
        self.sys = LindbladSystem(H, params.gamma, n_sites=params.Nc)
        d = self.sys.dim
        weights = np.ones(params.Nc)
        weights[0] = 0.0
        G = self.sys.liouvillian_matrix(weights)
        if dt is None:
            scale = 4.0 * params.gamma + 2.0 * np.linalg.norm(H, ord=2)
            dt = 1.0 / max(scale, 1e-12)
        self.prop = _DyadicPropagator(G, dt)
        self._diag = np.arange(d) * d + np.arange(d)
        self.sm0 = self.sys.sm[0]
        self.sp0 = self.sys.sp[0]

    def trace(self, vec_rho: np.ndarray) -> float:
        return float(vec_rho[self._diag].sum().real)

    def _normalized_vec(self, rho: np.ndarray) -> np.ndarray:
        vec = np.asarray(rho, dtype=complex).reshape(-1).copy()
        tr = self.trace(vec)
        if tr <= 0:
            raise ValueError("initial cluster state has non-positive trace")
        return vec / tr

    def click_state(self, vec_rho: np.ndarray) -> np.ndarray:
        d = self.sys.dim
        rho = self.sm0 @ vec_rho.reshape(d, d) @ self.sp0
        tr = np.trace(rho).real
        if tr <= 0:
            raise RuntimeError("click applied to a state dark on site 0")
        return (rho / tr).reshape(-1)

    def sample_intervals(
        self,
        rho0: np.ndarray,
        rng: np.random.Generator,
        n_intervals: int,
        t_horizon: float,
    ) -> list[tuple[float, bool]]:
        """Waiting intervals between consecutive site-0 clicks.

        Entries are (interval, censored); a censored interval means no click
        within t_horizon, after which the replica restarts from rho0.  The
        first entry is the wait for the initial click from rho0 (stationary
        conditioning is the caller's concern via burn-in).
        """
        out = []
        vec = self._normalized_vec(rho0)
        while len(out) < n_intervals:
            r = rng.random()
            vec, elapsed, crossed = _advance(self.prop, vec, self.trace, r, t_horizon)
            if crossed:
                out.append((elapsed, False))
                vec = self.click_state(vec)
            else:
                out.append((t_horizon, True))
                vec = self._normalized_vec(rho0)
        return out

    def trajectory(
        self, rho0: np.ndarray, t_final: float, seed: int, traj_index: int = 0
    ) -> JumpRecord:
        """Site-0 click record up to t_final starting from rho0."""
        rng = trajectory_rng(seed, traj_index)
        vec = self._normalized_vec(rho0)
        events = []
        t = 0.0
        while t < t_final:
            r = rng.random()
            vec, elapsed, crossed = _advance(self.prop, vec, self.trace, r, t_final - t)
            t += elapsed
            if not crossed or t >= t_final:
                break
            events.append((t, 0))
            vec = self.click_state(vec)
        return JumpRecord(events, t_final, seed)


def monitored_cluster_trajectory(
    params: ModelParams,
    drive: MeanFieldDrive,
    rho0: np.ndarray,
    t_final: float,
    seed: int,
    traj_index: int = 0,
) -> JumpRecord:
    sampler = MonitoredClusterSampler(params, drive)
    return sampler.trajectory(rho0, t_final, seed, traj_index=traj_index)
