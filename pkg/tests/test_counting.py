import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from spinjumps.counting import (
    AliasingError,
    CountDistribution,
    connected_joint,
    from_trace_grid,
    quadrant_sums,
    recommended_grid_size,
)


def trace_from_probs(p, M):
    """Forward map P(n) -> Z(chi_k) = sum_n P(n) e^{+i n chi_k}, matching the
    counting-field weight e^{+i chi} of the tilted evolution."""
    chi = 2.0 * np.pi * np.arange(M) / M
    n = np.arange(len(p))
    return np.exp(1j * np.outer(chi, n)) @ p


def test_dft_roundtrip_poisson():
    M = 64
    p = poisson.pmf(np.arange(M), 6.0)
    dist = from_trace_grid(trace_from_probs(p, M), t=1.0)
    assert np.allclose(dist.probs, p, atol=1e-12)
    assert dist.mean() == pytest.approx(p @ np.arange(M))


def test_joint_roundtrip_and_cov():
    M = 32
    rng = np.random.default_rng(3)
    p = np.zeros((M, M))
    p[:12, :12] = rng.random((12, 12))  # compact support, clear of the grid edge
    p /= p.sum()
    chi = 2.0 * np.pi * np.arange(M) / M
    ph = np.exp(1j * np.outer(chi, np.arange(M)))
    Z = ph @ p @ ph.T
    dist = from_trace_grid(Z, t=1.0)
    assert np.allclose(dist.probs, p, atol=1e-12)
    n = np.arange(M)
    cov_direct = n @ p @ n - (p.sum(1) @ n) * (p.sum(0) @ n)
    assert dist.cov() == pytest.approx(cov_direct, abs=1e-10)


def test_aliasing_detection():
    # mass beyond the grid folds back into the top band of the support
    M = 8
    p = poisson.pmf(np.arange(64), 12.0)
    Z = trace_from_probs(p, M)
    with pytest.raises(AliasingError):
        from_trace_grid(Z, t=1.0)
    # a synthetic surface with genuine negativity is also rejected
    q = poisson.pmf(np.arange(16), 2.0).astype(float)
    q[12] = -2e-5
    with pytest.raises(AliasingError):
        from_trace_grid(trace_from_probs(q, 16), t=1.0)


def test_small_negativity_clamped():
    M = 16
    p = poisson.pmf(np.arange(M), 2.0)
    Z = trace_from_probs(p, M) + 1e-10
    dist = from_trace_grid(Z, t=1.0)
    assert np.all(dist.probs >= 0.0)
    assert dist.probs.sum() == pytest.approx(1.0)
    assert dist.raw_negativity < 1e-8


def test_recommended_grid_size_power_of_two_and_monotone():
    m1 = recommended_grid_size(0.5, 10.0, 1)
    m2 = recommended_grid_size(0.5, 40.0, 1)
    assert m1 & (m1 - 1) == 0
    assert m2 >= m1 >= 64


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_connected_joint_sums_to_zero(seed):
    rng = np.random.default_rng(seed)
    p = rng.random((7, 7))
    p /= p.sum()
    dist = CountDistribution(probs=p, t=1.0, grid_size=0)
    conn = connected_joint(dist)
    assert abs(conn.sum()) < 1e-12
    q = quadrant_sums(dist)
    assert abs(sum(q.values())) < 1e-12


def test_marginals_consistency():
    rng = np.random.default_rng(5)
    p = rng.random((6, 6))
    p /= p.sum()
    dist = CountDistribution(probs=p, t=1.0, grid_size=0)
    assert np.allclose(dist.marginal(0), p.sum(axis=1))
    assert np.allclose(dist.marginal(1), p.sum(axis=0))
    with pytest.raises(ValueError):
        CountDistribution(probs=p.sum(axis=0), t=1.0, grid_size=0).cov()


def test_csv_export(tmp_path):
    p = np.array([0.5, 0.3, 0.2])
    dist = CountDistribution(probs=p, t=2.0, grid_size=64)
    path = tmp_path / "pn.csv"
    dist.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "n,p"
    assert len(rows) == 4
