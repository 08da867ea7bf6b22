"""Closed-form limit objects of the Boltzmann-Grad limit.

Contains the limiting transfer map T_{A,B,Q,sigma}, the transition
probability P(S,h|h') (both the four-term form and the simplified form),
its S-integral Pi(h|h'), the equilibrium profile E(s,h), the measures
mu / nu / lambda with samplers, and the interval-counting identity behind
the distribution of (A,B,Q).

All density evaluators accept numpy arrays and broadcast.
"""

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import integrate

from .arithmetic import ObstacleConfig

__all__ = [
    "PI2", "THREE_OVER_PI2", "SIX_OVER_PI2", "TWELVE_OVER_PI2",
    "KernelPoint", "EquilibriumTable",
    "limit_transfer", "limit_transfer_arrays",
    "p_simple", "p_full", "pi_kernel",
    "p_cdf_S", "p_bin_mass",
    "g_profile", "equilibrium_E", "build_E_table",
    "G_of_tau", "rho_of_s", "e_bin_mass",
    "sample_mu", "sample_P", "sample_lambda",
    "density_mu", "density_nu", "density_lambda",
    "count_M", "brute_count_M",
    "phi_map", "psi_wrap",
]

# All 3/pi^2-style constants derive from one pi^2 value.
PI2 = math.pi * math.pi
THREE_OVER_PI2 = 3.0 / PI2
SIX_OVER_PI2 = 6.0 / PI2
TWELVE_OVER_PI2 = 12.0 / PI2

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class KernelPoint:
    """A point (S, h, h') with the derived eta/zeta notation."""

    S: float
    h: float
    hprime: float

    @property
    def eta(self) -> float:
        return 0.5 * abs(self.h - self.hprime)

    @property
    def zeta(self) -> float:
        return 0.5 * abs(self.h + self.hprime)


# ----------------------------------------------------------------------
# Limiting transfer map
# ----------------------------------------------------------------------

def limit_transfer(cfg: ObstacleConfig, hprime: float) -> Tuple[float, float]:
    """Limiting transfer map T_{A,B,Q,sigma}(h') -> (S, h).

    Case selection on sigma*h' (ties go to the first listed case):
      sigma*h' in [1-2A, 1]   -> (Q,       h' - 2*sigma*(1-A))
      sigma*h' in [-1, -1+2B] -> (Qbar,    h' + 2*sigma*(1-B))
      otherwise               -> (Qbar+Q,  h' + 2*sigma*(A-B))
    """
    A, B, Q, Qbar, sig = cfg.A, cfg.B, cfg.Q, cfg.Qbar, cfg.sigma
    sh = sig * hprime
    if sh >= 1.0 - 2.0 * A:
        S, h = Q, hprime - 2.0 * sig * (1.0 - A)
    elif sh <= -1.0 + 2.0 * B:
        S, h = Qbar, hprime + 2.0 * sig * (1.0 - B)
    else:
        S, h = Qbar + Q, hprime + 2.0 * sig * (A - B)
    return S, min(1.0, max(-1.0, h))


def limit_transfer_arrays(A, B, Q, Qbar, sigma, hprime):
    """Vectorized limit_transfer over congruent arrays."""
    A = np.asarray(A, dtype=float)
    sh = sigma * hprime
    case1 = sh >= 1.0 - 2.0 * A
    case2 = ~case1 & (sh <= -1.0 + 2.0 * B)
    S = np.where(case1, Q, np.where(case2, Qbar, Qbar + Q))
    h = np.where(case1, hprime - 2.0 * sigma * (1.0 - A),
                 np.where(case2, hprime + 2.0 * sigma * (1.0 - B),
                          hprime + 2.0 * sigma * (A - B)))
    return S, np.clip(h, -1.0, 1.0)


# ----------------------------------------------------------------------
# Transition probability P(S,h|h')
# ----------------------------------------------------------------------

def _reduce_hh(h, hp):
    """Map (h, h') into the half-domain |h'| <= h using the symmetries
    P(S,h|h') = P(S,h'|h) = P(S,-h|-h').  Returns (H, Hp)."""
    h = np.asarray(h, dtype=float)
    hp = np.asarray(hp, dtype=float)
    swap = np.abs(h) < np.abs(hp)
    H = np.where(swap, hp, h)
    Hp = np.where(swap, h, hp)
    flip = H < 0
    return np.where(flip, -H, H), np.where(flip, -Hp, Hp)


def p_simple(S, h, hprime):
    """Simplified closed form of the transition probability.

    On |h'| <= h:  P = (3/pi^2) * min(1, (2/S - (1+h'))_+ / (h - h'));
    the min is resolved by comparison before division, so the diagonal
    h = h' is exact.  Other (h,h') reached through the symmetries.
    """
    S = np.asarray(S, dtype=float)
    H, Hp = _reduce_hh(h, hprime)
    with np.errstate(divide="ignore"):
        num = np.maximum(2.0 / np.where(S > 0, S, _TINY) - (1.0 + Hp), 0.0)
    den = H - Hp
    sat = num >= den
    val = np.where(sat, 1.0, num / np.where(sat, 1.0, np.maximum(den, _TINY)))
    out = THREE_OVER_PI2 * val
    if out.ndim == 0:
        return float(out)
    return out


def p_full(S, h, hprime):
    """Four-term eta/zeta form of the transition probability.

    Must agree pointwise with p_simple; S = 0 and the diagonal h = h'
    return the corresponding limits to avoid the 1/(S*eta) indeterminacy.
    """
    # Extended precision: the third/fourth terms suffer catastrophic
    # cancellation (difference of O(1) quantities of size O(S*eta)) that
    # float64 alone resolves only to ~1e-12 relative.
    S = np.asarray(S, dtype=np.longdouble)
    h = np.asarray(h, dtype=np.longdouble)
    hp = np.asarray(hprime, dtype=np.longdouble)
    eta = 0.5 * np.abs(h - hp)
    zeta = 0.5 * np.abs(h + hp)
    se = S * eta
    t1 = np.minimum(se, np.maximum(1.0 - S, 0.0))
    t2 = np.maximum(se - np.abs(1.0 - S), 0.0)
    m = 0.5 * S + 0.5 * S * zeta
    t3 = np.maximum(np.minimum(S - 0.5 * se, 1.0 + 0.5 * se) - np.maximum(m, 1.0), 0.0)
    t4 = np.maximum(np.minimum(S - 0.5 * se, 1.0) - np.maximum(m, 1.0 - 0.5 * se), 0.0)
    good = se > 0
    val = np.where(good, (t1 + t2 + t3 + t4) / np.where(good, se, 1.0), 0.0)
    out = (THREE_OVER_PI2 * val).astype(float)
    S = S.astype(float)
    h = h.astype(float)
    hp = hp.astype(float)
    # S*eta = 0: take the limit (p_simple handles both degenerations).
    deg = ~good
    if np.any(deg):
        lim = np.broadcast_to(np.asarray(p_simple(S, h, hp)), out.shape)
        out = np.where(deg, lim, out)
    if out.ndim == 0:
        return float(out)
    return out


def pi_kernel(h, hprime):
    """Pi(h|h') = integral of P(S,h|h') over S in (0, inf).

    Closed form (6/pi^2) * ln((1+h)/(1+h')) / (h-h') on |h'| < h,
    diagonal limit 6/(pi^2 (1+h)), extended by the same symmetries as P.
    """
    H, Hp = _reduce_hh(h, hprime)
    d = H - Hp
    near = d < 1e-9
    # ln((1+H)/(1+Hp))/d -> 1/(1+H) as d -> 0.
    safe_d = np.where(near, 1.0, d)
    val = np.where(near,
                   1.0 / (1.0 + H),
                   np.log1p(d / (1.0 + np.where(near, 0.0, Hp))) / safe_d)
    out = SIX_OVER_PI2 * val
    if out.ndim == 0:
        return float(out)
    return out


def p_cdf_S(S, h, hprime):
    """Analytic integral of P(.,h|h') over scaled path lengths [0, S].

    In the reduced variables |h'| <= h the integrand is 3/pi^2 on
    [0, 2/(1+h)], the decreasing arc (3/pi^2)(2/S-(1+h'))/(h-h') on
    [2/(1+h), 2/(1+h')], and zero beyond; the integral is elementary.
    """
    S = np.asarray(S, dtype=float)
    H, Hp = _reduce_hh(h, hprime)
    s1 = 2.0 / (1.0 + H)
    s2 = 2.0 / np.maximum(1.0 + Hp, _TINY)
    d = H - Hp
    flat = np.minimum(S, s1)
    a = np.minimum(S, s2)
    diag = d <= 1e-12
    safe_d = np.where(diag, 1.0, d)
    arc = np.where(a > s1,
                   (2.0 * np.log(np.maximum(a / s1, 1.0))
                    - (1.0 + Hp) * np.maximum(a - s1, 0.0)) / safe_d,
                   0.0)
    arc = np.where(diag, 0.0, arc)
    out = THREE_OVER_PI2 * (flat + arc)
    if out.ndim == 0:
        return float(out)
    return out


_GAUSS_N = 24
_GX, _GW = np.polynomial.legendre.leggauss(_GAUSS_N)


def p_bin_mass(S_lo, S_hi, h_lo, h_hi, hprime):
    """integral of P(S,h|h') over the rectangle [S_lo,S_hi] x [h_lo,h_hi].

    Analytic in S (p_cdf_S), Gauss-Legendre in h on subintervals split at
    the kink points h = +-h'.  S_hi = inf allowed.
    """
    edges = sorted({h_lo, h_hi} | {x for x in (hprime, -hprime) if h_lo < x < h_hi})
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        hs = mid + half * _GX
        vals = (pi_kernel(hs, hprime) - p_cdf_S(S_lo, hs, hprime)
                if math.isinf(S_hi)
                else p_cdf_S(S_hi, hs, hprime) - p_cdf_S(S_lo, hs, hprime))
        total += float(np.dot(_GW, vals) * half)
    return total


# ----------------------------------------------------------------------
# Equilibrium profile E(s,h)
# ----------------------------------------------------------------------

def g_profile(tau, h):
    """g(tau, h) = integral of P(tau, h | h') over h' in [-1, 1], closed form.

    Piecewise-elementary in c = 2/tau - 1; even in h; supported on
    tau < 2/(1-|h|).
    """
    tau = np.asarray(tau, dtype=float)
    h = np.abs(np.asarray(h, dtype=float))
    errstate = np.errstate(divide="ignore", over="ignore", invalid="ignore")
    errstate.__enter__()
    c = 2.0 / np.where(tau > 0, tau, _TINY) - 1.0

    # R1: h' in [-h, h]
    mid = (-h < c) & (c < h)
    hc = np.where(mid, h - c, 1.0)
    twoh = np.maximum(2.0 * h, _TINY)
    r1 = np.where(c >= h, 2.0 * h,
                  np.where(mid, (h + c) - hc * np.log(twoh / hc), 0.0))
    # R2: h' in (h, 1]
    lo2 = (h < c) & (c < 1.0)
    ch = np.where(lo2, c - h, 1.0)
    r2 = np.where(c >= 1.0, 1.0 - h,
                  np.where(lo2, ch + ch * np.log(np.maximum(1.0 - h, _TINY) / ch), 0.0))
    # R3: h' in [-1, -h)
    band = (-h < c) & (c <= h)          # fraction only
    upper = (h < c) & (c < 1.0)         # ones part + fraction
    r3 = np.where(c >= 1.0, 1.0 - h, 0.0)
    r3 = np.where(band, (c + h) * np.log((1.0 + h) / twoh), r3)
    r3 = np.where(upper, (c - h) + (c + h) * np.log((1.0 + h) / np.maximum(h + c, _TINY)), r3)

    out = THREE_OVER_PI2 * (r1 + r2 + r3)
    errstate.__exit__(None, None, None)
    if out.ndim == 0:
        return float(out)
    return out


def _tau_breaks(h: float):
    """S-values where g(., h) changes branch."""
    h = abs(h)
    pts = [1.0, 2.0 / (1.0 + h)]
    if h < 1.0:
        pts.append(2.0 / (1.0 - h))
    return sorted(pts)


def tau_support(h: float) -> float:
    """g(tau,h) = 0 for tau beyond 2/(1-|h|)."""
    h = abs(h)
    return math.inf if h >= 1.0 else 2.0 / (1.0 - h)


def equilibrium_E(s: float, h: float) -> float:
    """E(s,h): integral of P(tau,h|h') over h' in [-1,1] and tau > 2s.

    Adaptive quadrature of the closed-form h'-profile g; the tau support
    is bounded (2/(1-|h|)) except at |h| = 1, where a 1/tau^2 tail is
    integrated on a logarithmic grid.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    sup = tau_support(h)
    lo = 2.0 * s
    if lo >= sup:
        return 0.0
    if math.isinf(sup):
        # |h| = 1: finite part + log-grid tail
        tmax = max(4.0 * lo, 1e8)
        grid = np.geomspace(max(lo, 1e-3), tmax, 4000)
        if lo < 1e-3:
            grid = np.concatenate([np.linspace(lo, 1e-3, 50, endpoint=False), grid])
        return float(np.trapezoid(g_profile(grid, h), grid))
    pts = [p for p in _tau_breaks(h) if lo < p < sup]
    val, _ = integrate.quad(lambda t: g_profile(t, h), lo, sup,
                            points=pts or None, limit=200)
    return val


def G_of_tau(tau):
    """G(tau) = double integral of P(tau,h|h') over h,h' in [-1,1]^2.

    Computed as the h-integral of the closed-form profile g with fixed
    Gauss rules on the two segments split at the branch point h = |c|.
    Vectorized over tau.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    c = np.clip(np.abs(2.0 / np.maximum(tau, _TINY) - 1.0), 0.0, 1.0)
    gx, gw = np.polynomial.legendre.leggauss(32)
    out = np.zeros_like(tau)
    for lo, hi in ((np.zeros_like(c), c), (c, np.ones_like(c))):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * gx[None, :]
        vals = g_profile(np.broadcast_to(tau[:, None], nodes.shape), nodes)
        out += 2.0 * half * (vals @ gw)
    return out if out.size > 1 else float(out[0])


def rho_of_s(s, tau_cap: float = 1e7, n_grid: int = 6000):
    """rho(s) = integral of E(s,h) over h = integral of G(tau) for tau > 2s.

    Numeric log-grid integration of G with the analytic 8/(pi^2 tau^3)
    tail beyond tau_cap.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    lo = max(2.0 * float(s_arr.min()), 1e-6)
    grid = np.geomspace(lo, tau_cap, n_grid)
    G = G_of_tau(grid)
    # reverse cumulative integral on the grid
    seg = 0.5 * (G[1:] + G[:-1]) * np.diff(grid)
    tail_from = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    tail_cap = 4.0 / (PI2 * tau_cap ** 2)  # integral of 8/(pi^2 t^3) beyond cap
    out = np.interp(2.0 * s_arr, grid, tail_from) + tail_cap
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class EquilibriumTable:
    """Tabulated E(s,h) with bilinear interpolation.

    s_grid is stretched (uniform near 0, logarithmic after s = 2);
    h_grid uniform on [-1, 1]; tail_constant 1/pi^2 describes
    integral E dh ~ tail_constant / s^2.
    """

    s_grid: np.ndarray
    h_grid: np.ndarray
    values: np.ndarray  # shape (len(s_grid), len(h_grid))
    tail_constant: float = 1.0 / PI2

    def __call__(self, s, h):
        s = np.asarray(s, dtype=float)
        h = np.asarray(h, dtype=float)
        i = np.clip(np.searchsorted(self.s_grid, s) - 1, 0, len(self.s_grid) - 2)
        j = np.clip(np.searchsorted(self.h_grid, h) - 1, 0, len(self.h_grid) - 2)
        s0, s1 = self.s_grid[i], self.s_grid[i + 1]
        h0, h1 = self.h_grid[j], self.h_grid[j + 1]
        ts = np.clip((s - s0) / (s1 - s0), 0.0, 1.0)
        th = np.clip((h - h0) / (h1 - h0), 0.0, 1.0)
        v = self.values
        out = ((1 - ts) * (1 - th) * v[i, j] + ts * (1 - th) * v[i + 1, j]
               + (1 - ts) * th * v[i, j + 1] + ts * th * v[i + 1, j + 1])
        # beyond the table in s the profile is zero except near |h|=1
        out = np.where(s > self.s_grid[-1], 0.0, out)
        if out.ndim == 0:
            return float(out)
        return out


def stretched_s_grid(s_max: float = 200.0, n: int = 1025,
                     s_lin: float = 2.0) -> np.ndarray:
    """Uniform spacing on [0, s_lin], logarithmic from s_lin to s_max."""
    n_lin = n // 2
    lin = np.linspace(0.0, s_lin, n_lin, endpoint=False)
    log = np.geomspace(s_lin, s_max, n - n_lin)
    return np.concatenate([lin, log])


def _E_column(h: float, s_values: np.ndarray, s_max_hint: float = 200.0):
    """E(s, h) at the given s values via reverse-cumulative trapezoid
    integration of the closed-form profile g on a dense tau grid."""
    sup = tau_support(h)
    cap = min(sup, max(4.0 * s_max_hint, 1e6))
    base = np.unique(np.concatenate([
        np.linspace(0.0, min(4.0, cap), 16001),
        np.geomspace(min(4.0, cap), cap, 16000) if cap > 4.0 else [],
        [b for b in _tau_breaks(h) if b <= cap],
    ]))
    gv = g_profile(base, h)
    seg = 0.5 * (gv[1:] + gv[:-1]) * np.diff(base)
    rev = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    tail = 0.0
    if math.isinf(sup):
        tail = 2.0 * cap * g_profile(cap, h)  # ~ a/tau^2 tail estimate
    return np.interp(2.0 * np.asarray(s_values, dtype=float), base, rev + tail,
                     right=tail if math.isinf(sup) else 0.0)


def build_E_table(s_max: float = 200.0, n_s: int = 8193,
                  n_h: int = 2049) -> EquilibriumTable:
    """Tabulate E by reverse-cumulative integration of g per h column."""
    s_grid = stretched_s_grid(s_max, n_s)
    h_grid = np.linspace(-1.0, 1.0, n_h)
    values = np.empty((n_s, n_h))
    for j, h in enumerate(h_grid):
        if j > n_h // 2:  # symmetry E(s,-h) = E(s,h)
            values[:, j] = values[:, n_h - 1 - j]
            continue
        values[:, j] = _E_column(h, s_grid, s_max)
    values[0, :] = 1.0  # E(0,h) = 1 exactly
    return EquilibriumTable(s_grid, h_grid, values)


def e_bin_mass(s_lo, s_hi, h_lo, h_hi, n_h: int = 8, n_s_fine: int = 1001):
    """integral of E over [s_lo,s_hi] x [h_lo,h_hi] (Gauss in h, fine
    trapezoid in s of the reverse-cumulative column integral)."""
    mid = 0.5 * (h_lo + h_hi)
    half = 0.5 * (h_hi - h_lo)
    gx, gw = np.polynomial.legendre.leggauss(n_h)
    hs = mid + half * gx
    svals = np.linspace(s_lo, s_hi, n_s_fine)
    total = 0.0
    for w, h in zip(gw, hs):
        total += w * np.trapezoid(_E_column(h, svals, max(s_hi, 200.0)), svals)
    return float(total * half)


# ----------------------------------------------------------------------
# Measures mu, nu, lambda
# ----------------------------------------------------------------------

def density_mu(A, B, Q, sigma):
    """mu-density (per sigma value) on (A,B,Q):
    (6/pi^2) * 1_{0<A<1} 1_{0<B<1-A} 1_{0<Q<1/(2-A-B)} / (1-A)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    ind = ((A > 0) & (A < 1) & (B > 0) & (B < 1 - A)
           & (Q > 0) & (Q < 1.0 / (2.0 - A - B)))
    out = np.where(ind, SIX_OVER_PI2 / np.maximum(1.0 - A, _TINY), 0.0)
    out = out * np.where(np.abs(np.asarray(sigma)) == 1, 1.0, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def density_nu(A, B, Q):
    """nu-density on (A,B,Q): sigma-summed mu, (12/pi^2)/(1-A) on the domain."""
    return 2.0 * density_mu(A, B, Q, 1)


def density_lambda(Q, Qp, D):
    """lambda-density on (Q,Q',D):

    (12/pi^2)(1/Q) * [ 1_{0<Q,Q'<1} 1_{Q+Q'>1} 1_{0<D<(1-Q)/Q'}
                     + 1_{Q<Q'} 1_{Q+Q'>1} 1_{(1-Q)/Q'<D<1} ].
    """
    Q = np.asarray(Q, dtype=float)
    Qp = np.asarray(Qp, dtype=float)
    D = np.asarray(D, dtype=float)
    thr = (1.0 - Q) / np.maximum(Qp, _TINY)
    base = (Q > 0) & (Q < 1) & (Qp > 0) & (Qp < 1) & (Q + Qp > 1)
    ind1 = base & (D > 0) & (D < thr)
    ind2 = base & (Q < Qp) & (D > thr) & (D < 1)
    out = np.where(ind1 | ind2, TWELVE_OVER_PI2 / np.maximum(Q, _TINY), 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def sample_mu(rng: np.random.Generator, n: int):
    """Draw n samples of (A, B, Q, sigma) from mu.

    Rejection in (A, B', Q) uniform on (0,1)^3 accepting
    Q < 1/(1 + (1-A)(1-B')); acceptance probability pi^2/12.
    Returns arrays (A, B, Q, sigma).
    """
    A = np.empty(n)
    B = np.empty(n)
    Q = np.empty(n)
    filled = 0
    while filled < n:
        m = int((n - filled) / 0.8) + 16
        a = rng.random(m)
        bp = rng.random(m)
        q = rng.random(m)
        acc = q < 1.0 / (1.0 + (1.0 - a) * (1.0 - bp))
        k = min(int(acc.sum()), n - filled)
        A[filled:filled + k] = a[acc][:k]
        B[filled:filled + k] = (1.0 - a[acc][:k]) * bp[acc][:k]
        Q[filled:filled + k] = q[acc][:k]
        filled += k
    sigma = np.where(rng.random(n) < 0.5, 1, -1)
    return A, B, Q, sigma


def qbar_from(A, B, Q):
    """Qbar from the identity Qbar(1-A) + Q(1-B) = 1."""
    return (1.0 - np.asarray(Q) * (1.0 - np.asarray(B))) / (1.0 - np.asarray(A))


def sample_P(hprime: float, rng: np.random.Generator, n: int):
    """Draw (S, h) from P(.,.|h') as the pushforward of mu under the
    limiting transfer map."""
    A, B, Q, sigma = sample_mu(rng, n)
    Qbar = (1.0 - Q * (1.0 - B)) / (1.0 - A)
    return limit_transfer_arrays(A, B, Q, Qbar, sigma, hprime)


def sample_lambda(rng: np.random.Generator, n: int, q_floor: float = 1e-6):
    """Draw (Q, Q', D) from lambda by rejection.

    Proposal: Q log-uniform on [q_floor, 1] (density proportional to 1/Q),
    Q' and D uniform; accept on the union of the two indicator boxes
    (disjoint in D).  The mass below q_floor is O(q_floor) and neglected.
    """
    out_Q = np.empty(n)
    out_Qp = np.empty(n)
    out_D = np.empty(n)
    filled = 0
    lf = math.log(q_floor)
    while filled < n:
        m = int((n - filled) * 16) + 64
        Q = np.exp(lf * rng.random(m))
        Qp = rng.random(m)
        D = rng.random(m)
        acc = density_lambda(Q, Qp, D) > 0
        k = min(int(acc.sum()), n - filled)
        out_Q[filled:filled + k] = Q[acc][:k]
        out_Qp[filled:filled + k] = Qp[acc][:k]
        out_D[filled:filled + k] = D[acc][:k]
        filled += k
    return out_Q, out_Qp, out_D


def phi_map(Q, Qp, D):
    """Phi: (Q, Q', D) -> (A, b, Q) with A = 1-D, b = (Q-1+Q'D)/Q."""
    A = 1.0 - np.asarray(D, dtype=float)
    b = (np.asarray(Q) - 1.0 + np.asarray(Qp) * np.asarray(D)) / np.asarray(Q)
    return A, b, np.asarray(Q, dtype=float)


def psi_wrap(b, A):
    """Psi: b -> B = b - floor(b/(1-A))*(1-A), wrapping into [0, 1-A)."""
    D = 1.0 - np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return b - np.floor(b / D) * D


# ----------------------------------------------------------------------
# Interval counting M(A,B,Q)
# ----------------------------------------------------------------------

def _lambda_intervals(A: float, Q: float):
    """The two intervals Lambda_1, Lambda_2 behind the count identity."""
    l1 = (A - A / Q, min(1.0 - A / Q, 0.0))
    l2 = (max(2.0 - A - 1.0 / Q, 0.0), 1.0 - A / Q)
    return l1, l2


def count_M(A: float, B: float, Q: float) -> int:
    """Closed form: M(A,B,Q) = 1 if Q < 1/(2-A-B) else 0."""
    return int(Q < 1.0 / (2.0 - A - B))


def brute_count_M(A: float, B: float, Q: float, edge_tol: float = 1e-13) -> int:
    """Direct count of integers n with B + n(1-A) in Lambda_1, plus
    integers n with B + n(1-A) in Lambda_2.

    Raises ValueError when an endpoint sits within edge_tol of a lattice
    point B + n(1-A) (degenerate boundary input).
    """
    (a1, b1), (a2, b2) = _lambda_intervals(A, Q)
    step = 1.0 - A
    total = 0
    for (lo, hi) in ((a1, b1), (a2, b2)):
        if hi <= lo:
            continue
        n_lo = math.ceil((lo - B) / step)
        n_hi = math.floor((hi - B) / step)
        for n in range(n_lo - 2, n_hi + 3):
            x = B + n * step
            if min(abs(x - lo), abs(x - hi)) < edge_tol:
                raise ValueError(f"degenerate boundary input at n={n}")
            if lo < x < hi:
                total += 1
    return total
