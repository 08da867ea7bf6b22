"""Continued-fraction and Farey-fraction machinery for 3-obstacle configurations.

Two independent routes compute the configuration parameters (A, B, Q, Qbar,
sigma) of the three obstacles that can be hit next when leaving an obstacle
in direction omega at radius r:

* the continued-fraction route, driven by the denominators q_n and the
  approximation errors d_n = |q_n*alpha - p_n| of alpha = omega2/omega1;
* the Farey route, driven by the pair of neighbours of alpha among reduced
  fractions with denominator at most floor(1/eps), eps = 2r/omega1.

Both are exact-integer computations on the exact rational alpha = w2/w1
formed from the stored float components,
so the cross-validation of the two routes is meaningful at the 1e-10 level.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

__all__ = [
    "CFExpansion",
    "ObstacleConfig",
    "FareyPair",
    "OctantError",
    "PrecisionExhausted",
    "cf_expand",
    "first_below",
    "obstacle_params_cf",
    "farey_neighbors",
    "obstacle_params_farey",
    "three_obstacle_lattice",
    "log_r_grid",
]

# Below this scale float64 can no longer represent d_n meaningfully
# relative to the float input alpha.
_D_FLOOR = 1e-14
# Flagging tolerance for floor() arguments sitting on an exact integer.
_FLOOR_EDGE_TOL = 1e-13


class OctantError(ValueError):
    """Direction outside the first octant 0 < omega2 < omega1."""


class PrecisionExhausted(RuntimeError):
    """d_n fell below the float64 resolution floor before the stop rule."""


@dataclass(frozen=True)
class CFExpansion:
    """Continued-fraction state of alpha in (0,1).

    digits[k] is a_{k+1} (the paper-style digits a_1..a_n); p[n], q[n] are
    the convergent numerator/denominator arrays with p[0]=1, p[1]=0,
    q[0]=0, q[1]=1 and p[n+1] = a_n p[n] + p[n-1] (same for q); d[n] is
    |q[n]*alpha - p[n]|, with d[0]=1, d[1]=alpha.
    """

    alpha: float
    digits: Tuple[int, ...]
    p: Tuple[int, ...]
    q: Tuple[int, ...]
    d: Tuple[float, ...]
    # Exact values of d_n as Fractions (same indexing); kept so that the
    # obstacle-parameter formulas can take floors without roundoff risk.
    d_exact: Tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.d)


def cf_expand(alpha, max_digits: int = None, eps: float = None) -> CFExpansion:
    """Expand alpha in (0,1) as a continued fraction.

    alpha may be a float or an exact Fraction.  Stops once d_n <= eps (if
    eps is given) or after max_digits digits.  The expansion is computed
    by exact integer Euclid on the rational value of alpha, so digits and
    convergents are exact.

    Raises PrecisionExhausted if d_n drops below 1e-14 before the stop
    rule is met (the float alpha cannot resolve scales below that).
    """
    frac = Fraction(alpha)
    if not 0 < frac < 1:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if max_digits is None and eps is None:
        max_digits = 40
    a_num, a_den = frac.numerator, frac.denominator
    alpha = float(frac)

    digits: List[int] = []
    p = [1, 0]
    q = [0, 1]
    # d_n = |q_n*alpha - p_n| held exactly as integers d_num[n]/a_den;
    # the recurrence d_{n+1} = d_{n-1} - a_n*d_n is the Euclid remainder step.
    d_num = [a_den, a_num]
    d = [1.0, alpha]
    eps_f = None if eps is None else Fraction(eps)

    while True:
        n = len(d) - 1  # highest index currently available
        if eps_f is not None and Fraction(d_num[-1], a_den) <= eps_f:
            break
        if max_digits is not None and len(digits) >= max_digits:
            break
        if d_num[-1] == 0:
            break  # alpha is rational and the expansion terminated exactly
        if d[n] < _D_FLOOR:
            raise PrecisionExhausted(
                f"d_{n} = {d[n]:.3e} below resolution floor before stop rule"
            )
        a = d_num[-2] // d_num[-1]
        digits.append(a)
        p.append(a * p[-1] + p[-2])
        q.append(a * q[-1] + q[-2])
        d_num.append(d_num[-2] - a * d_num[-1])
        d.append(d_num[-1] / a_den)

    d_exact = tuple(Fraction(x, a_den) for x in d_num)
    return CFExpansion(alpha, tuple(digits), tuple(p), tuple(q), tuple(d), d_exact)


def first_below(expansion: CFExpansion, epsilon: float) -> int:
    """N(alpha, eps) = inf{n >= 0 : d_n <= eps}.

    Raises ValueError if the expansion is too short; extend via cf_expand
    with eps=epsilon in that case.
    """
    eps_f = Fraction(epsilon)
    if not 0 < eps_f <= 1:
        raise ValueError(f"epsilon must be in (0,1], got {epsilon}")
    for n, dn in enumerate(expansion.d_exact):
        if dn <= eps_f:
            return n
    raise ValueError(
        "expansion too short: min d = "
        f"{expansion.d[-1]:.3e} > eps = {epsilon:.3e}; extend the expansion"
    )


@dataclass(frozen=True)
class ObstacleConfig:
    """3-obstacle configuration parameters at a given (omega, r).

    Satisfies A + B <= 1, Qbar*(1-A) + Q*(1-B) = 1, 0 < Q < 1/(2-A-B) <= 1,
    D = 1 - A.  sigma = (-1)^N with N the continued-fraction stopping index.
    Farey-side extras D, Qprime, b are filled by both routes.
    """

    A: float
    B: float
    Q: float
    Qbar: float
    sigma: int
    D: float
    Qprime: float
    b: float
    floor_edge_flag: bool = False

    def validate(self, tol: float = 1e-10) -> None:
        assert -tol <= self.A <= 1 + tol, self
        assert -tol <= self.B <= 1 + tol, self
        assert self.A + self.B <= 1 + tol, self
        assert 0 < self.Q <= 1 + tol, self
        assert abs(self.Qbar * (1 - self.A) + self.Q * (1 - self.B) - 1) <= tol, self
        assert self.Q < 1 / (2 - self.A - self.B) + tol, self
        assert self.sigma in (+1, -1), self
        assert abs(self.D - (1 - self.A)) <= tol, self


def _check_octant(omega) -> Tuple[float, float]:
    w1, w2 = float(omega[0]), float(omega[1])
    if not (0.0 < w2 < w1):
        raise OctantError(f"direction ({w1}, {w2}) not in the open first octant")
    return w1, w2


def obstacle_params_cf(omega, r: float) -> ObstacleConfig:
    """Configuration parameters via the continued fraction of alpha = w2/w1.

    A = 1 - d_N/eps, B = 1 - d_{N-1}/eps - floor((eps-d_{N-1})/d_N)*d_N/eps,
    Q = eps*q_N, sigma = (-1)^N, with eps = 2r/w1 and N the first index
    with d_N <= eps.  floor() is the mathematical floor (may be negative).
    """
    w1, w2 = _check_octant(omega)
    # alpha and eps as exact ratios of the stored floats, matching the
    # geometry which uses w1 and w2 individually (rounding the quotients
    # would shift d_N by ~q_N ulp and A by ~q_N ulp / eps).
    alpha = Fraction(w2) / Fraction(w1)
    eps_f = 2 * Fraction(r) / Fraction(w1)
    eps = float(eps_f)
    if not 0 < eps_f <= 1:
        raise ValueError(f"eps = 2r/omega1 = {eps} outside (0, 1]")
    cf = cf_expand(alpha, eps=eps_f)
    N = first_below(cf, eps_f)
    if N == 0:
        raise ValueError(f"eps = {eps} >= 1 = d_0; no nontrivial configuration")

    dN = cf.d_exact[N]
    dNm1 = cf.d_exact[N - 1]
    k = math.floor((eps_f - dNm1) / dN)  # exact floor, always <= -1
    edge = abs(float((eps_f - dNm1) / dN) - round(float((eps_f - dNm1) / dN))) < _FLOOR_EDGE_TOL

    A = float(1 - dN / eps_f)
    B = float(1 - dNm1 / eps_f - k * dN / eps_f)
    Q = float(eps_f * cf.q[N])
    sigma = -1 if N % 2 else +1
    qbar_int = cf.q[N - 1] - k * cf.q[N]
    Qbar = float(eps_f * qbar_int)
    D = 1.0 - A
    Qprime = Qbar  # eps * (other Farey neighbour denominator); see lattice note
    b = (Q - 1 + Qprime * D) / Q if Q > 0 else 0.0
    cfg = ObstacleConfig(A, B, Q, Qbar, sigma, D, Qprime, b, floor_edge_flag=edge)
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class FareyPair:
    """Consecutive fractions p/q < alpha < pp/qp among denominators <= Qmax."""

    p: int
    q: int
    pp: int
    qp: int
    Qmax: int

    def validate(self) -> None:
        assert self.pp * self.q - self.p * self.qp == 1, self
        assert self.q + self.qp > self.Qmax, self


def farey_neighbors(alpha, Qmax: int) -> FareyPair:
    """Neighbours of alpha among reduced fractions with denominator <= Qmax.

    alpha may be a float or an exact Fraction.  Stern-Brocot mediant
    descent in exact integer arithmetic.  The left neighbour may be 0/1
    for very small alpha.
    """
    if Qmax < 1:
        raise ValueError("Qmax must be >= 1")
    frac = Fraction(alpha)
    if not 0 < frac < 1:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    p, q = 0, 1
    pp, qp = 1, 1
    while q + qp <= Qmax:
        pm, qm = p + pp, q + qp
        if frac < Fraction(pm, qm):
            pp, qp = pm, qm
        elif frac > Fraction(pm, qm):
            p, q = pm, qm
        else:
            raise ValueError(f"alpha = {alpha} is a fraction with denominator <= Qmax")
    pair = FareyPair(p, q, pp, qp, Qmax)
    pair.validate()
    return pair


def obstacle_params_farey(omega, r: float) -> ObstacleConfig:
    """Configuration parameters via Farey neighbours at Qmax = floor(1/eps).

    Distinguishes three cases depending on where alpha sits between the
    neighbours p/q < alpha < p'/q':
      (i)   alpha <  (p'-eps)/q' : q_N = q,  d_N = q*alpha - p,  Q' = eps*q'
      (ii)  in between           : q_N = min(q,q'), d_N from the smaller side,
                                   Q' = eps*max(q,q')
      (iii) alpha >  (p+eps)/q   : q_N = q', d_N = p' - q'*alpha, Q' = eps*q
    Then D = d_N/eps, A = 1-D, b = (Q-1+Q'D)/Q, B = b - floor(b/D)*D.
    sigma = -1 when the convergent is the left neighbour (N odd), else +1.
    """
    w1, w2 = _check_octant(omega)
    # Same exact rationals as the continued-fraction route, so the two
    # routes agree to roundoff rather than to a quotient-rounding shift.
    alpha = Fraction(w2) / Fraction(w1)
    eps_f = 2 * Fraction(r) / Fraction(w1)
    eps = float(eps_f)
    if not 0 < eps_f < 1:
        raise ValueError(f"eps = 2r/omega1 = {eps} outside (0, 1)")
    Qmax = math.floor(1 / eps_f)
    pair = farey_neighbors(alpha, Qmax)
    p, q, pp, qp = pair.p, pair.q, pair.pp, pair.qp

    # Exact case selection (alpha and eps are both exact rationals here).
    left_d = q * alpha - p        # > 0
    right_d = pp - qp * alpha     # > 0
    if alpha < (pp - eps_f) / qp:
        qN, dN, qPrime = q, left_d, qp
        left_side = True
    elif alpha > (p + eps_f) / q:
        qN, dN, qPrime = qp, right_d, q
        left_side = False
    else:
        if q < qp:
            qN, dN, qPrime = q, left_d, qp
            left_side = True
        else:
            qN, dN, qPrime = qp, right_d, q
            left_side = False

    D = dN / eps_f
    A = float(1 - D)
    Q = float(eps_f * qN)
    Qp = float(eps_f * qPrime)
    b_f = (eps_f * qN - 1 + eps_f * qPrime * D) / (eps_f * qN)
    k = math.floor(b_f / D)
    edge = abs(float(b_f / D) - round(float(b_f / D))) < _FLOOR_EDGE_TOL
    B = float(b_f - k * D)
    sigma = -1 if left_side else +1
    Qbar = (1 - Q * (1 - B)) / (1 - A)
    cfg = ObstacleConfig(A, B, Q, Qbar, sigma, float(D), Qp, float(b_f),
                         floor_edge_flag=edge)
    cfg.validate()
    return cfg


def three_obstacle_lattice(omega, r: float) -> Tuple[Tuple[int, int], Tuple[int, int], int]:
    """Lattice vectors (q,p), (qbar,pbar) of the 3-obstacle triple, and the
    determinant sigma = q*pbar - qbar*p in {+1,-1} (exact integers).

    The next obstacle centre hit after leaving the origin obstacle is one of
    (q,p), (qbar,pbar), (q+qbar, p+pbar), with 0 < q < qbar.
    """
    w1, w2 = _check_octant(omega)
    alpha = Fraction(w2) / Fraction(w1)
    eps_f = 2 * Fraction(r) / Fraction(w1)
    cf = cf_expand(alpha, eps=eps_f)
    N = first_below(cf, eps_f)
    if N == 0:
        raise ValueError("eps >= 1: no nontrivial triple")
    k = math.floor((eps_f - cf.d_exact[N - 1]) / cf.d_exact[N])
    q, p = cf.q[N], cf.p[N]
    qbar, pbar = cf.q[N - 1] - k * cf.q[N], cf.p[N - 1] - k * cf.p[N]
    sigma = q * pbar - qbar * p
    assert sigma in (1, -1)
    # q < qbar except at N = 1 where q = qbar = 1 (vectors (1,p), (1,p+1))
    assert 0 < q <= qbar and (q, p) != (qbar, pbar)
    return (q, p), (qbar, pbar), sigma


def log_r_grid(r_min: float, r_max: float = 0.25,
               points_per_decade: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """Log-spaced radii and normalized dr/r trapezoid weights.

    Uniform in ln r with trapezoid end-point halving, normalized to sum 1;
    this realizes the Cesaro average (1/|ln eps|) * integral dr/r.
    """
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    n = max(2, int(round(points_per_decade * math.log10(r_max / r_min))) + 1)
    r = np.geomspace(r_min, r_max, n)
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    w /= w.sum()
    return r, w
