import numpy as np
import pytest

from spinjumps import dense
from spinjumps.fcs_cmf import (
    CmfSolver,
    IntegrationError,
    TiltedPairState,
    central_pair,
    cmf_steady_state,
    covariance_growth_rate,
    covariance_via_cgf,
    evolve_pair,
    reconstruct_pn,
    tilted_trace_grid,
)
from spinjumps.model import ModelParams, build_cmf_hamiltonian
from spinjumps.wtd import mx_star

FM = ModelParams(N=100, Nc=2, J=1.0, h=1.0, gamma=0.5, alpha=1.1)


def test_central_pair():
    assert central_pair(2) == (0, 1)
    assert central_pair(4) == (1, 2)
    with pytest.raises(ValueError):
        central_pair(1)


def test_steady_state_single_site_matches_closed_form():
    p = FM.with_(Nc=1)
    _, mx = cmf_steady_state(p, tol=1e-11, rtol=1e-10)
    assert abs(mx[0]) == pytest.approx(mx_star(p.h, p.J, p.gamma), abs=1e-6)


def test_steady_state_paramagnetic_unmagnetized():
    p = FM.with_(Nc=1, gamma=2.5)
    _, mx = cmf_steady_state(p)
    assert abs(mx[0]) < 1e-6


def test_untilted_node_tracks_reference():
    # a chi = 0 node in the tilted batch must follow rho_mf exactly
    state = TiltedPairState(
        rho_tilted=dense.symmetry_broken_state(2),
        rho_mf=dense.symmetry_broken_state(2),
        chi=np.zeros(2),
    )
    out = evolve_pair(state, FM, 3.0)
    assert np.allclose(out.rho_tilted, out.rho_mf, atol=1e-10)
    assert abs(out.trace_tilted() - 1.0) < 1e-9


def test_closed_mode_matches_dense_lindblad():
    p = ModelParams(N=3, Nc=3, J=1.0, h=1.0, gamma=0.5, alpha=1.1)
    rho0 = dense.symmetry_broken_state(3)
    solver = CmfSolver(p, closed=True)
    y = solver.evolve(
        np.stack([rho0, rho0]).astype(complex), np.ones((2, 3), complex), 4.0,
        rtol=1e-10,
    )
    H = build_cmf_hamiltonian(p, np.zeros(3), closed=True)
    ref = dense.integrate_lindblad(rho0, H, p.gamma, 4.0, rtol=1e-10)
    assert np.max(np.abs(y[1] - ref)) < 1e-8


def test_reconstruct_pn_is_distribution():
    dist = reconstruct_pn(FM, t_final=4.0, M=64, counted_sites=(0,))
    assert dist.probs.ndim == 1
    assert dist.probs.sum() == pytest.approx(1.0)
    assert np.all(dist.probs >= 0.0)


def test_fm_distribution_broadens_with_time():
    early = reconstruct_pn(FM, t_final=5.0 / FM.gamma, M=64, counted_sites=(0,))
    late = reconstruct_pn(FM, t_final=20.0 / FM.gamma, M=128, counted_sites=(0,))
    assert late.mean() > early.mean()
    assert late.var() > early.var()


def test_pm_distribution_stays_peaked():
    p = FM.with_(h=2.5)
    dist = reconstruct_pn(p, t_final=20.0 / p.gamma, M=64, counted_sites=(0,))
    assert dist.probs[:3].sum() > 0.9


def test_grid_validation():
    with pytest.raises(ValueError):
        tilted_trace_grid(FM, 2.0, M=48, counted_sites=(0,))
    with pytest.raises(ValueError):
        tilted_trace_grid(FM, 2.0, M=64, counted_sites=(0, 1, 1))


def test_covariance_consistent_between_dft_and_cgf_routes():
    t = 6.0
    dist = reconstruct_pn(FM, t_final=t, M=64, counted_sites=(0, 1))
    cov_stencil = covariance_via_cgf(FM, t, counted_sites=(0, 1))
    assert dist.cov() == pytest.approx(cov_stencil, abs=5e-5)


def test_covariance_growth_rate_fit_quality():
    stats = covariance_growth_rate(FM, t_final=10.0 / FM.gamma, M=64)
    assert stats.fit_r2 > 0.99
    assert not stats.stationary_warning
    assert stats.growth_rate < 0.0  # antibunching in the ordered phase
    with pytest.raises(ValueError):
        covariance_growth_rate(FM, t_final=5.0, n_times=3)


def test_solver_positivity_guard():
    solver = CmfSolver(FM)
    bad = np.stack([-np.eye(4), np.eye(4)]).astype(complex)
    with pytest.raises(IntegrationError):
        solver._check_reference(bad[0])
