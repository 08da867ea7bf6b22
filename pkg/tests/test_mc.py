"""Monte-Carlo estimators, Cesaro averages, and the Markov process."""

import math

import numpy as np
import pytest

from lorentzgas import billiard, kernel, mc


def test_kish_n_eff():
    assert mc.kish_n_eff(np.ones(100)) == pytest.approx(100.0)
    w = np.zeros(100)
    w[0] = 1.0
    assert mc.kish_n_eff(w) == pytest.approx(1.0)


def test_chi_square_detects_wrong_distribution():
    rng = np.random.default_rng(0)
    n = 50000
    x = rng.random(n)
    edges = np.linspace(0.0, 1.0, 11)
    obs = np.histogram(x, bins=edges)[0] / n
    exp_good = np.full(10, 0.1)
    exp_bad = np.linspace(0.05, 0.15, 10)
    assert mc.chi_square_weighted(obs, exp_good, n).pvalue > 1e-3
    assert mc.chi_square_weighted(obs, exp_bad, n).pvalue < 1e-6


def test_generic_direction_deterministic():
    a = mc.generic_direction(9)
    b = mc.generic_direction(9)
    assert (a.cos, a.sin) == (b.cos, b.sin)
    assert 0.0 < a.sin < a.cos  # open first octant


def test_mu_bin_mass_riemann_oracle():
    A_edges = np.array([0.0, 0.3, 1.0])
    B_edges = np.array([0.0, 0.5, 1.0])
    Q_edges = np.array([0.0, 0.6, 1.0])
    masses = mc.mu_bin_mass(A_edges, B_edges, Q_edges)
    n = 220
    a = (np.arange(n) + 0.5) / n
    da = 1.0 / n
    dens = kernel.density_nu(a[:, None, None], a[None, :, None],
                             a[None, None, :])
    for i in range(2):
        for j in range(2):
            for k in range(2):
                sel = dens[(a >= A_edges[i]) & (a < A_edges[i + 1])][
                    :, (a >= B_edges[j]) & (a < B_edges[j + 1])][
                    :, :, (a >= Q_edges[k]) & (a < Q_edges[k + 1])]
                brute = float(sel.sum()) * da ** 3
                # midpoint rule meets the indicator boundary of the
                # density, so the oracle is only first-order accurate
                assert masses[i, j, k] == pytest.approx(brute, abs=6e-3)
    assert masses.sum() == pytest.approx(1.0, abs=1e-10)


def test_block_bootstrap_accepts_correct_law():
    rng = np.random.default_rng(1)
    exp = np.full(8, 0.125)
    blocks = []
    for _ in range(60):
        counts = np.histogram(rng.random(40), bins=np.linspace(0, 1, 9))[0]
        blocks.append(counts.astype(float))
    p = mc.block_bootstrap_pvalue(np.array(blocks), exp, seed=3)
    assert p > 1e-3


def test_block_bootstrap_rejects_wrong_law():
    rng = np.random.default_rng(2)
    exp = np.full(8, 0.125)
    blocks = []
    for _ in range(60):
        counts = np.histogram(rng.random(40) ** 2,
                              bins=np.linspace(0, 1, 9))[0]
        blocks.append(counts.astype(float))
    p = mc.block_bootstrap_pvalue(np.array(blocks), exp, seed=3)
    assert p < 0.01


def test_cesaro_kernel_estimate_normalization():
    est = mc.cesaro_kernel_estimate(
        0.2, mc.generic_direction(4), 1e-3,
        np.linspace(0.0, 4.0, 5), np.linspace(-1.0, 1.0, 5),
        points_per_decade=40)
    assert est.weights.sum() + est.tail_weight == pytest.approx(1.0,
                                                                abs=1e-12)
    assert est.n_excluded < est.n_total // 10


def test_cesaro_config_distribution_fields():
    out = mc.cesaro_config_distribution(mc.generic_direction(5), 1e-3,
                                        points_per_decade=40)
    w = out["weights"]
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all((out["A"] >= 0) & (out["A"] < 1))
    assert np.all(out["B"] < 1 - out["A"])
    assert set(np.unique(out["sigma"])) <= {-1.0, 1.0}
    assert out["n_indep"] >= 1
    assert np.all(np.diff(out["block"]) >= 0)


def test_asymptotic_transfer_check_order():
    chk = mc.asymptotic_transfer_check(mc.generic_direction(9),
                                       np.geomspace(1e-4, 1e-2, 13), 0.3)
    assert chk.slope > 1.8
    good = ~chk.excluded
    assert np.nanmax(chk.err_h[good]) < 1e-12


def test_markov_step_invariants():
    rng = np.random.default_rng(6)
    st = mc.MarkovState((0.2, 0.7), billiard.Direction.from_angle(0.5),
                        0.3, 0.1, 0.0)
    for _ in range(50):
        new = mc.markov_step(st, rng)
        assert new.t == pytest.approx(st.t + st.s)
        assert 0.0 < new.s
        assert -1.0 <= new.h <= 1.0
        # scattering angle consistent with the new impact parameter
        dth = (new.direction.theta - st.direction.theta) % (2 * math.pi)
        expected = (math.pi - 2.0 * math.asin(new.h)) % (2 * math.pi)
        assert dth == pytest.approx(expected, abs=1e-12)
        st = new


def test_markov_chain_histogram_total_mass():
    s_edges = np.concatenate([np.linspace(0, 2, 9), [100.0]])
    h_edges = np.linspace(-1, 1, 5)
    probs, n_eff = mc.markov_chain_histogram(200, 80, 7, s_edges, h_edges)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert n_eff > 100


def test_sample_from_E_matches_density():
    rng = np.random.default_rng(8)
    s, h = mc.sample_from_E(rng, 100000)
    assert np.all(s >= 0) and np.all(np.abs(h) <= 1)
    # marginal density at s=0 integrates E(0,h)=1 over h: P(s<ds) ~ 2*ds/(2)
    frac = float(np.mean(s < 0.5))
    tab = kernel.build_E_table(s_max=10.0, n_s=2001, n_h=201)
    sg = np.linspace(0, 0.5, 501)
    hg = np.linspace(-1, 1, 201)
    ss, hh = np.meshgrid(0.5 * (sg[:-1] + sg[1:]), 0.5 * (hg[:-1] + hg[1:]),
                         indexing="ij")
    expect = float(np.sum(tab(ss.ravel(), hh.ravel()))
                   * (sg[1] - sg[0]) * (hg[1] - hg[0]))
    assert frac == pytest.approx(expect, rel=0.02)


def test_markov_ensemble_snapshots():
    def f_in(x1, x2, th):
        return np.ones_like(np.asarray(x1, dtype=float))

    snaps = mc.markov_ensemble(f_in, 500, 2.0, [0.0, 1.0, 2.0], seed=9)
    assert [s["t"] for s in snaps] == [0.0, 1.0, 2.0]
    for s in snaps:
        assert len(s["x1"]) == 500
        assert np.all((s["x1"] >= 0) & (s["x1"] < 1))
        assert np.all(np.abs(s["h"]) <= 1)


def test_billiard_ensemble_smoke():
    def f_in(x1, x2, th):
        return np.ones_like(np.asarray(x1, dtype=float))

    out = mc.billiard_ensemble(f_in, 0.05, 100, 0.5, [0.0, 0.5], seed=10)
    assert [s["t"] for s in out] == [0.0, 0.5]
    final = out[-1]
    assert len(final["x1"]) + final["n_dropped"] == 100
    assert np.all((final["x1"] >= 0) & (final["x1"] < 1))


def test_hypothesis_h_correlation_smoke():
    res = mc.hypothesis_h_correlation(mc.generic_direction(3), 0.01,
                                      n_collisions=300, seed=4)
    assert res["n_used"] > 100
    assert abs(res["mean_sigma_product"]) <= 1.0
    for key in ("corr_A", "corr_B", "corr_Q"):
        assert math.isnan(res[key]) or abs(res[key]) <= 1.0
