import numpy as np
import pytest

from spinjumps.dense import (
    LindbladSystem,
    default_step,
    fcs_dense,
    integrate_lindblad,
    product_state,
    steady_state,
    symmetry_broken_state,
    wtd_dense,
)
from spinjumps.model import ModelParams, build_full_hamiltonian
from spinjumps.operators import embed


def small_params(**kw):
    base = dict(N=2, Nc=2, J=1.0, h=1.0, gamma=0.5, alpha=1.5)
    base.update(kw)
    return ModelParams(**base)


def test_product_state_properties():
    rho = product_state([0.3, 0.1, -0.5], 2)
    assert np.trace(rho) == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    sx0 = embed("x", 0, 2)
    assert np.trace(sx0 @ rho).real == pytest.approx(0.3)
    with pytest.raises(ValueError):
        product_state(np.ones((3, 3)), 2)


def test_trace_and_hermiticity_preserved():
    p = small_params()
    H = build_full_hamiltonian(p)
    rho0 = symmetry_broken_state(2)
    rho = integrate_lindblad(rho0, H, p.gamma, 5.0, rtol=1e-10)
    assert abs(np.trace(rho) - 1.0) < 1e-9
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-9
    assert np.linalg.eigvalsh(rho).min() > -1e-9


def test_rhs_matches_liouvillian_matrix():
    p = small_params()
    H = build_full_hamiltonian(p)
    sys = LindbladSystem(H, p.gamma)
    rng = np.random.default_rng(1)
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    w = sys.weights_from_chi(np.array([0.3, -0.7]))
    L = sys.liouvillian_matrix(w)
    assert np.allclose((L @ rho.reshape(-1)).reshape(4, 4), sys.rhs(rho, w))


def test_batched_integration_matches_loop():
    p = small_params()
    H = build_full_hamiltonian(p)
    chis = np.array([[0.0, 0.0], [0.4, 0.0], [0.2, 0.9]])
    rho0 = symmetry_broken_state(2)
    batch = np.broadcast_to(rho0, (3, 4, 4)).copy()
    together = integrate_lindblad(batch, H, p.gamma, 2.0, chi=chis, rtol=1e-10)
    for k in range(3):
        single = integrate_lindblad(rho0, H, p.gamma, 2.0, chi=chis[k], rtol=1e-10)
        assert np.allclose(together[k], single, atol=1e-10)


def test_steady_state_is_fixed_point():
    p = small_params()
    H = build_full_hamiltonian(p)
    rho = steady_state(H, p.gamma, tol=1e-12)
    sys = LindbladSystem(H, p.gamma)
    assert np.max(np.abs(sys.rhs(rho))) < 1e-9


def test_single_spin_counting_statistics():
    # J = h = 0, start fully excited: exactly one jump ever, at rate 4*gamma
    gamma, t = 0.3, 1.2
    p = ModelParams(N=1, Nc=1, J=1.0, h=0.0, gamma=gamma, alpha=2.0)
    H = np.zeros((2, 2), dtype=complex)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    dist = fcs_dense(p, t, H=H, rho0=rho0, rtol=1e-10)
    assert dist.probs[0] == pytest.approx(np.exp(-4.0 * gamma * t), abs=1e-8)
    assert dist.probs[1] == pytest.approx(1.0 - np.exp(-4.0 * gamma * t), abs=1e-8)
    assert np.all(dist.probs[2:] < 1e-8)


def test_fcs_dense_grid_validation():
    p = small_params()
    with pytest.raises(ValueError):
        fcs_dense(p, 2.0, M=63)
    with pytest.raises(ValueError):
        fcs_dense(p, 50.0, M=64)  # below the aliasing-safe bound


def test_wtd_dense_normalizes():
    # driven single site in the ordered phase: the click density integrates
    # to ~1 over a long horizon
    from spinjumps.model import build_cmf_hamiltonian
    from spinjumps.wtd import mx_star

    p = ModelParams(N=1, Nc=1, J=1.0, h=1.0, gamma=0.5, alpha=1.5)
    m = mx_star(p.h, p.J, p.gamma)
    H = build_cmf_hamiltonian(p, np.array([m]))
    t, w = wtd_dense(p, site=0, H=H)
    assert np.all(w >= -1e-12)
    assert np.trapezoid(w, t) == pytest.approx(1.0, abs=2e-3)


def test_wtd_dense_dark_state_raises():
    # paramagnetic single site: the steady state is dark on the monitored site
    p = ModelParams(N=1, Nc=1, J=1.0, h=2.5, gamma=1.0, alpha=1.5)
    H = p.h * embed("z", 0, 1)
    with pytest.raises(ValueError):
        wtd_dense(p, site=0, H=H)


def test_default_step_positive():
    p = small_params()
    sys = LindbladSystem(build_full_hamiltonian(p), p.gamma)
    assert 0 < default_step(sys) < 1.0
