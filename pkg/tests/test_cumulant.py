import numpy as np
import pytest

from spinjumps import dense
from spinjumps.cumulant import (
    EPS,
    CumulantState,
    UnphysicalTruncationError,
    _rhs,
    covariance_rate,
    cumulant_rhs,
    evolve_cumulants,
    magnetization_steady,
    seed_state,
    steady_cumulants,
)
from spinjumps.model import ModelParams, coupling_table, hamiltonian_from_couplings
from spinjumps.operators import embed
from spinjumps.wtd import mx_star


def random_state(N, seed):
    """Random small cumulant state with the exchange symmetry
    v[k,l,a,b] = v[l,k,b,a] and zero diagonal blocks."""
    rng = np.random.default_rng(seed)
    c = 0.3 * (rng.normal(size=(N, 3)) + 1j * rng.normal(size=(N, 3)))
    v = 0.1 * (rng.normal(size=(N, N, 3, 3)) + 1j * rng.normal(size=(N, N, 3, 3)))
    v = 0.5 * (v + np.swapaxes(np.swapaxes(v, 0, 1), 2, 3))
    idx = np.arange(N)
    v[idx, idx] = 0.0
    return CumulantState(logC=0.1 + 0.05j, c=c, v=v)


def loop_reference_rhs(state, chi, J, h, gamma):
    """Literal index-by-index transcription of the truncated equations of
    motion; the production right-hand side must agree to machine precision."""
    c, v = state.c, state.v
    N = c.shape[0]
    w = np.exp(1j * np.asarray(chi, float)) - 1.0
    e = w + 1.0
    dz = lambda a: 1.0 if a == 2 else 0.0
    dx = lambda a: 1.0 if a == 0 else 0.0

    dl = 2.0 * gamma * sum(w[j] * (c[j, 2] + 1.0) for j in range(N))

    dc = np.zeros_like(c)
    for k in range(N):
        for a in range(3):
            val = 0.0
            for g in range(3):
                val += -2.0 * h * EPS[2, a, g] * c[k, g]
                for n in range(N):
                    if n != k:
                        val += 4.0 * EPS[0, a, g] * J[n, k] * (
                            v[n, k, 0, g] + c[n, 0] * c[k, g]
                        )
            val -= 2.0 * gamma * (e[k] * dz(a) * (c[k, 2] + 1.0) + dz(a) + c[k, a])
            for j in range(N):
                if j != k:
                    val += 2.0 * gamma * w[j] * (
                        v[k, j, a, 2] + c[k, a] * c[j, 2] + c[k, a]
                    )
            dc[k, a] = val - c[k, a] * dl

    dv = np.zeros_like(v)
    for k in range(N):
        for l in range(N):
            if l == k:
                continue
            for a in range(3):
                for b in range(3):
                    P = 0.0
                    for g in range(3):
                        P += -2.0 * h * EPS[2, a, g] * v[k, l, g, b]
                        for n in range(N):
                            if n != k and n != l:
                                P += 4.0 * EPS[0, a, g] * J[n, k] * (
                                    c[k, g] * v[n, l, 0, b] + c[n, 0] * v[k, l, g, b]
                                )
                        P += 4.0 * J[k, l] * EPS[0, a, g] * (
                            dx(b) * c[k, g]
                            - c[l, b] * (c[k, g] * c[l, 0] + v[k, l, g, 0])
                        )
                    P -= 2.0 * gamma * (
                        (dz(a) * e[k] + 1.0) * v[k, l, a, b]
                        + c[k, a] * w[k] * v[k, l, 2, b]
                    )
                    Q = 0.0
                    for g in range(3):
                        Q += -2.0 * h * EPS[2, b, g] * v[k, l, a, g]
                        for n in range(N):
                            if n != k and n != l:
                                Q += 4.0 * EPS[0, b, g] * J[n, l] * (
                                    c[l, g] * v[k, n, a, 0] + c[n, 0] * v[k, l, a, g]
                                )
                        Q += 4.0 * J[k, l] * EPS[0, b, g] * (
                            dx(a) * c[l, g]
                            - c[k, a] * (c[l, g] * c[k, 0] + v[l, k, g, 0])
                        )
                    Q -= 2.0 * gamma * (
                        (dz(b) * e[l] + 1.0) * v[k, l, a, b]
                        + c[l, b] * w[l] * v[k, l, a, 2]
                    )
                    R = 0.0
                    for n in range(N):
                        if n != k and n != l:
                            R += 2.0 * gamma * w[n] * (c[n, 2] + 1.0) * v[k, l, a, b]
                    dv[k, l, a, b] = P + Q + R - v[k, l, a, b] * dl
    return dl, dc, dv


def test_rhs_matches_literal_loop_transcription():
    N = 4
    p = ModelParams(N=N, Nc=1, J=1.0, h=0.8, gamma=0.6, alpha=1.3)
    J = coupling_table(p)
    state = random_state(N, seed=2)
    chi = np.array([0.3, -0.9, 0.0, 1.7])
    got = cumulant_rhs(state, chi, p, J_ij=J)
    dl, dc, dv = loop_reference_rhs(state, chi, J, p.h, p.gamma)
    assert abs(got.logC - dl) < 1e-12
    assert np.max(np.abs(got.c - dc)) < 1e-12
    assert np.max(np.abs(got.v - dv)) < 1e-12


def test_rhs_batched_equals_per_point():
    N = 3
    p = ModelParams(N=N, Nc=1, J=1.0, h=1.0, gamma=0.5, alpha=2.0)
    J = coupling_table(p)
    state = random_state(N, seed=7)
    chis = np.array([[0.0, 0.0, 0.0], [0.4, 0.0, -0.2], [1.0, 2.0, 3.0]])
    w = np.exp(1j * chis) - 1.0
    l = np.full(3, state.logC)
    c = np.broadcast_to(state.c, (3, N, 3)).copy()
    v = np.broadcast_to(state.v, (3, N, N, 3, 3)).copy()
    dl, dc, dv = _rhs(l, c, v, w, w + 1.0, J, p.h, p.gamma)
    for k in range(3):
        single = cumulant_rhs(state, chis[k], p, J_ij=J)
        assert abs(dl[k] - single.logC) < 1e-13
        assert np.max(np.abs(dc[k] - single.c)) < 1e-13
        assert np.max(np.abs(dv[k] - single.v)) < 1e-13


def test_rhs_exact_against_dense_at_product_state():
    # third cumulants vanish at a product state, so the truncated equations
    # must reproduce the exact tilted derivatives of (logC, c, v) there
    N = 3
    p = ModelParams(N=N, Nc=1, J=1.0, h=0.8, gamma=0.6, alpha=1.3)
    J = coupling_table(p)
    H = hamiltonian_from_couplings(J, p.h)
    chi = np.array([0.5, 0.0, -1.1])
    rng = np.random.default_rng(4)
    bloch = rng.normal(size=(N, 3))
    bloch *= 0.8 / np.linalg.norm(bloch, axis=1, keepdims=True)
    rho = dense.product_state(bloch, N)
    drho = dense.lindblad_rhs(rho, H, p.gamma, chi=chi)

    sig = {lbl: [embed(lbl, k, N) for k in range(N)] for lbl in "xyz"}
    c = np.array([[np.trace(sig[lbl][k] @ rho) for lbl in "xyz"] for k in range(N)])
    dl = np.trace(drho)  # Tr rho = 1, so dlogC = dTr
    # trace-normalized first cumulants: dc = Tr(sigma drho) - c dTr
    dc = np.array(
        [[np.trace(sig[lbl][k] @ drho) for lbl in "xyz"] for k in range(N)]
    ) - c * dl
    # and dv = d<sig sig> - dc c - c dc, with d<..> also trace-normalized
    dv = np.zeros((N, N, 3, 3), dtype=complex)
    for k in range(N):
        for l in range(N):
            if l == k:
                continue
            for a, la in enumerate("xyz"):
                for b, lb in enumerate("xyz"):
                    pair = sig[la][k] @ sig[lb][l]
                    dpair = np.trace(pair @ drho) - np.trace(pair @ rho) * dl
                    dv[k, l, a, b] = dpair - dc[k, a] * c[l, b] - c[k, a] * dc[l, b]

    state = CumulantState(logC=0.0, c=c, v=np.zeros((N, N, 3, 3), complex))
    got = cumulant_rhs(state, chi, p, J_ij=J)
    assert abs(got.logC - dl) < 1e-12
    assert np.max(np.abs(got.c - dc)) < 1e-12
    assert np.max(np.abs(got.v - dv)) < 1e-12


def test_mean_field_reduction_single_site_law():
    # with the counting field off and v frozen at zero, one spin with
    # J-coupling absent decays as <sz>(t) = 2 exp(-4 gamma t) - 1
    gamma = 0.3
    p = ModelParams(N=1, Nc=1, J=1.0, h=0.0, gamma=gamma, alpha=2.0)
    out = evolve_cumulants(
        seed_state(1, cx=0.0, cz=1.0), np.zeros(1), p, 2.0,
        t_samples=[0.5, 1.0, 2.0], rtol=1e-10, mean_field_only=True,
    )
    for t, st in zip([0.5, 1.0, 2.0], out):
        assert st.c[0, 2].real == pytest.approx(2.0 * np.exp(-4.0 * gamma * t) - 1.0,
                                                abs=1e-8)
        assert np.all(st.v == 0.0)


def test_mean_field_steady_magnetization():
    # odd N: the per-site coupling budget is exactly J under the Kac norm
    p = ModelParams(N=51, Nc=1, J=1.0, h=1.0, gamma=0.5, alpha=0.0)
    mx = magnetization_steady(p, mean_field_only=True)
    assert abs(mx[0]) == pytest.approx(mx_star(p.h, p.J, p.gamma), abs=1e-6)


def test_covariance_rate_reflection_symmetry():
    # PBC: the pair (0, d) and the pair (0, N - d) are related by reflection
    p = ModelParams(N=10, Nc=1, J=1.0, h=1.0, gamma=1.5, alpha=1.1)
    ss = steady_cumulants(p, rtol=1e-8)
    r1 = covariance_rate(p, sites=(0, 3), state_ss=ss, richardson=False)
    r2 = covariance_rate(p, sites=(0, 7), state_ss=ss, richardson=False)
    assert r1.rate == pytest.approx(r2.rate, rel=1e-9)


def test_mean_count_consistent_with_trace_law():
    # i * d logC / d chi_0 at chi = 0 is <n_0>, which grows at 2 gamma (c_z+1)
    p = ModelParams(N=6, Nc=1, J=1.0, h=1.0, gamma=1.5, alpha=0.0)
    ss = steady_cumulants(p, rtol=1e-9)
    t = 5.0
    delta = 1e-4
    chi = np.zeros((2, 6))
    chi[0, 0], chi[1, 0] = delta, -delta
    l, _, _ = evolve_cumulants(ss, chi, p, t, rtol=1e-9)
    mean_n = (l[0] - l[1]).imag / (2.0 * delta)
    rate = 2.0 * p.gamma * (ss.c[0, 2].real + 1.0)
    assert mean_n == pytest.approx(rate * t, rel=1e-5)


def test_state_validation_and_blowup():
    with pytest.raises(ValueError):
        CumulantState(logC=0.0, c=np.zeros((3, 2)), v=np.zeros((3, 3, 3, 3)))
    p = ModelParams(N=2, Nc=1, J=1.0, h=1.0, gamma=0.5, alpha=2.0)
    bad = seed_state(2, cx=50.0, cz=0.0)
    with pytest.raises(UnphysicalTruncationError):
        evolve_cumulants(bad, np.zeros(2), p, 0.1, rtol=1e-6)
    with pytest.raises(ValueError):
        steady_cumulants(p.with_(gamma=0.0))
