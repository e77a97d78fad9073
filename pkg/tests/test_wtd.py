import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from spinjumps.dense import product_state
from spinjumps.fcs_cmf import cmf_steady_state
from spinjumps.model import ModelParams, monitored_drive
from spinjumps.trajectories import MonitoredClusterSampler
from spinjumps.wtd import (
    WtdAnalytic,
    WtdSummary,
    divergence_boundary,
    finite_mean_extent,
    mx_star,
    wtd_analytic_cdf,
    wtd_analytic_pdf,
    wtd_histogram,
    wtd_moments,
    wtd_monte_carlo,
    wtd_sweep,
)

FM = ModelParams(N=100, Nc=1, J=1.0, h=1.0, gamma=0.5, alpha=1.5)


@given(h=st.floats(0.0, 3.0), gamma=st.floats(0.0, 3.0))
@settings(max_examples=200)
def test_mx_star_zero_exactly_outside_ordered_region(h, gamma):
    m = mx_star(h, 1.0, gamma)
    assert m >= 0.0
    if -h * h + 2.0 * h - gamma * gamma <= 0:
        assert m == 0.0
    else:
        assert m > 0.0
    with pytest.raises(ValueError):
        mx_star(1.0, 0.0, 0.5)


def test_analytic_pdf_nonnegative_dense_grid():
    for gamma in (0.2, 0.5, 0.9):
        wa = WtdAnalytic(J=1.0, h=1.0, gamma=gamma)
        t = np.linspace(0.0, 80.0, 40000)
        assert wtd_analytic_pdf(t, wa).min() >= -1e-12


def test_analytic_cdf_matches_pdf_integral():
    wa = WtdAnalytic(J=1.0, h=1.0, gamma=0.5)
    t = np.linspace(0.0, 60.0, 200001)
    pdf = wtd_analytic_pdf(t, wa)
    cdf_num = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(t))])
    cdf = wtd_analytic_cdf(t, wa)
    assert np.max(np.abs(cdf - cdf_num)) < 1e-7
    assert cdf[-1] == pytest.approx(1.0, abs=1e-8)
    assert cdf[0] == 0.0


def test_moments_match_numeric_quadrature():
    from scipy.integrate import quad

    wa = WtdAnalytic(J=1.0, h=0.8, gamma=0.4)
    mean, var = wtd_moments(wa)
    f = lambda t: wtd_analytic_pdf(t, wa)
    m1 = quad(lambda t: t * f(t), 0, 400, limit=2000)[0]
    m2 = quad(lambda t: t * t * f(t), 0, 600, limit=2000)[0]
    assert mean == pytest.approx(m1, rel=1e-8)
    assert var == pytest.approx(m2 - m1 * m1, rel=1e-7)


def test_moments_diverge_in_paramagnet():
    wa = WtdAnalytic(J=1.0, h=2.5, gamma=1.0)
    assert wa.mx_star == 0.0
    assert wtd_moments(wa) == (float("inf"), float("inf"))
    assert wtd_analytic_pdf(1.0, wa) == 0.0


def test_monte_carlo_reproducible_and_sane():
    s1 = wtd_monte_carlo(FM, 300, seed=4)
    s2 = wtd_monte_carlo(FM, 300, seed=4)
    assert np.array_equal(s1.samples, s2.samples)
    assert s1.ci95 == s2.ci95
    assert not s1.divergent
    mean, _ = wtd_moments(WtdAnalytic.from_params(FM))
    assert s1.ci95[0] < mean < s1.ci95[1] or abs(s1.mean - mean) / mean < 0.15
    with pytest.raises(ValueError):
        wtd_monte_carlo(FM, 0, seed=1)


def test_monte_carlo_detects_divergence():
    pm = FM.with_(gamma=2.0)  # deep paramagnet: dark steady state
    s = wtd_monte_carlo(pm, 50, seed=0)
    assert s.divergent
    assert s.censored_frac > 0.5


def test_initial_state_independence_after_burn_in():
    rho_ss, mx = cmf_steady_state(FM)
    sampler = MonitoredClusterSampler(FM, monitored_drive(FM, mx))
    up = product_state([0.0, 0.0, 1.0], 1)
    down = product_state([0.0, 0.0, -1.0], 1)
    a = wtd_monte_carlo(FM, 400, seed=9, sampler=sampler, rho0=up)
    b = wtd_monte_carlo(FM, 400, seed=10, sampler=sampler, rho0=down)
    assert ks_2samp(a.samples, b.samples).pvalue > 0.01
    with pytest.raises(ValueError):
        wtd_monte_carlo(FM, 10, seed=0, sampler=sampler)


def test_summary_validation():
    with pytest.raises(ValueError):
        WtdSummary(mean=1.0, variance=-1.0, n_samples=3, ci95=(0, 1), divergent=False)


def test_histogram_normalized():
    rng = np.random.default_rng(0)
    centers, density = wtd_histogram(rng.exponential(2.0, size=5000), n_bins=40)
    widths = centers[1] - centers[0]
    assert density @ np.full_like(density, widths) == pytest.approx(1.0, abs=1e-9)


def test_sweep_rows_and_extent():
    rows = wtd_sweep(FM, gammas=[0.5, 2.0], nc_list=[1], n_samples=60, seed=1)
    assert len(rows) == 2
    fm_row, pm_row = rows
    assert not fm_row["divergent"]
    assert fm_row["inv_mean"] > 0
    assert pm_row["divergent"]
    assert pm_row["inv_mean"] == 0.0
    for r in rows:
        assert {"alpha", "h_over_J", "gamma_over_J", "Nc", "inv_mean",
                "inv_var", "ci_lo", "ci_hi", "censored_frac", "divergent"} <= set(r)
    assert finite_mean_extent(rows, 1) == pytest.approx(0.5)


def test_divergence_boundary_single_site():
    # Nc = 1 closed form: finite mean iff gamma < sqrt(2hJ - h^2) (= 0.995)
    p = FM.with_(h=0.9)
    b = divergence_boundary(p, 0.75, 1.15, step=0.05, n_samples=150, seed=2)
    assert b == pytest.approx(0.95, abs=0.051)
