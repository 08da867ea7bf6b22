"""Continued-fraction and Farey routes to the three-obstacle parameters."""

import math
from fractions import Fraction

import numpy as np
import pytest

from lorentzgas import arithmetic

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def brute_best_approx_denominators(alpha: Fraction, q_max: int):
    """All q that strictly improve min_p |q alpha - p| (best approximations
    of the second kind) -- must be exactly the CF convergent denominators."""
    best = None
    out = []
    for q in range(1, q_max + 1):
        p = round(q * alpha)
        d = abs(q * alpha - p)
        if best is None or d < best:
            best = d
            out.append(q)
    return out


def test_cf_expand_golden_digits():
    exp = arithmetic.cf_expand(GOLDEN, max_digits=12)
    assert all(a == 1 for a in exp.digits)
    # Fibonacci convergents
    fib = [0, 1, 1, 2, 3, 5, 8, 13, 21, 34]
    assert list(exp.q[:len(fib)]) == fib[:len(exp.q)] or \
        list(exp.q[2:8]) == [1, 2, 3, 5, 8, 13]


def test_cf_convergents_are_best_approximations():
    rng = np.random.default_rng(3)
    for _ in range(20):
        alpha = Fraction(int(rng.integers(1, 400)), int(rng.integers(401, 997)))
        exp = arithmetic.cf_expand(alpha, max_digits=30)
        brute = brute_best_approx_denominators(alpha, alpha.denominator)
        qs = []
        for q in exp.q[1:]:
            if 0 < q <= alpha.denominator and (not qs or q > qs[-1]):
                qs.append(q)
        assert qs == brute


def test_cf_recurrence_and_d_values():
    rng = np.random.default_rng(4)
    for _ in range(50):
        alpha = float(rng.uniform(0.02, 0.98))
        exp = arithmetic.cf_expand(alpha, max_digits=15)
        for k in range(2, len(exp.p)):
            a = exp.digits[k - 2]
            assert exp.p[k] == a * exp.p[k - 1] + exp.p[k - 2]
            assert exp.q[k] == a * exp.q[k - 1] + exp.q[k - 2]
            d = abs(exp.q[k] * Fraction(alpha) - exp.p[k])
            assert exp.d[k] == pytest.approx(float(d), abs=1e-14)


def test_farey_neighbors_brute():
    """Stern-Brocot neighbors by direct enumeration of all fractions."""
    rng = np.random.default_rng(5)
    for _ in range(30):
        alpha = float(rng.uniform(0.02, 0.98))
        qmax = int(rng.integers(5, 60))
        pair = arithmetic.farey_neighbors(alpha, qmax)
        lo_best, hi_best = (0, 1), (1, 1)
        for q in range(1, qmax + 1):
            for p in range(0, q + 1):
                if math.gcd(p, q) != 1:
                    continue
                if p / q <= alpha and p * lo_best[1] >= lo_best[0] * q:
                    lo_best = (p, q)
                if p / q >= alpha and p * hi_best[1] <= hi_best[0] * q:
                    hi_best = (p, q)
        assert (pair.p, pair.q) == lo_best or (pair.p, pair.q) == hi_best
        assert {(pair.p, pair.q), (pair.pp, pair.qp)} == {lo_best, hi_best}
        # unimodularity
        assert abs(pair.p * pair.qp - pair.pp * pair.q) == 1


def test_golden_worked_example_both_routes():
    theta = math.atan(GOLDEN)
    c = math.cos(theta)
    r = 0.05 * c          # eps = 2r/cos(theta) = 0.1
    for fn in (arithmetic.obstacle_params_cf, arithmetic.obstacle_params_farey):
        cfg = fn((c, math.sin(theta)), r)
        assert cfg.A == pytest.approx(0.098301, abs=1e-6)
        assert cfg.B == pytest.approx(0.442719, abs=1e-6)
        assert cfg.Q == pytest.approx(0.5, abs=1e-9)
        assert cfg.Qbar == pytest.approx(0.8, abs=1e-9)
        assert cfg.sigma == -1


def test_routes_agree_small_sample():
    rng = np.random.default_rng(6)
    for _ in range(300):
        theta = math.atan(float(rng.uniform(0.02, 0.98)))
        r = float(10.0 ** rng.uniform(-5.0, -1.0))
        w = (math.cos(theta), math.sin(theta))
        ca = arithmetic.obstacle_params_cf(w, r)
        cb = arithmetic.obstacle_params_farey(w, r)
        assert ca.A == pytest.approx(cb.A, abs=1e-11)
        assert ca.B == pytest.approx(cb.B, abs=1e-11)
        assert ca.Q == pytest.approx(cb.Q, abs=1e-11)
        assert ca.sigma == cb.sigma


def test_parameter_identities_and_ranges():
    rng = np.random.default_rng(7)
    for _ in range(300):
        theta = math.atan(float(rng.uniform(0.02, 0.98)))
        r = float(10.0 ** rng.uniform(-5.0, -1.0))
        cfg = arithmetic.obstacle_params_cf((math.cos(theta), math.sin(theta)),
                                            r)
        assert 0.0 <= cfg.A < 1.0
        assert 0.0 <= cfg.B < 1.0 - cfg.A
        assert 0.0 < cfg.Q <= 1.0
        assert cfg.sigma in (-1, 1)
        # closure identity linking the two return distances
        assert cfg.Qbar * (1.0 - cfg.A) + cfg.Q * (1.0 - cfg.B) == \
            pytest.approx(1.0, abs=1e-9)


def test_three_obstacle_lattice_unimodular():
    rng = np.random.default_rng(8)
    for _ in range(200):
        theta = math.atan(float(rng.uniform(0.02, 0.98)))
        r = float(10.0 ** rng.uniform(-5.0, -1.0))
        (q, p), (qbar, pbar), det = arithmetic.three_obstacle_lattice(
            (math.cos(theta), math.sin(theta)), r)
        assert det in (-1, 1)
        assert q * pbar - p * qbar in (-1, 1)
        assert 0 < q <= qbar


def test_first_below_golden():
    exp = arithmetic.cf_expand(GOLDEN, max_digits=20)
    n = arithmetic.first_below(exp, 0.1)
    # |5 alpha - 3| = 0.0901699... is the first value below 0.1 (q = 5)
    assert exp.d[n] < 0.1 <= exp.d[n - 1]
    assert exp.q[n] == 5


def test_octant_validation():
    with pytest.raises(arithmetic.OctantError):
        arithmetic.obstacle_params_cf((0.5, 0.9), 1e-3)   # above diagonal
    with pytest.raises(arithmetic.OctantError):
        arithmetic.obstacle_params_cf((-0.9, 0.1), 1e-3)  # negative w1
