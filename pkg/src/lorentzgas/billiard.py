"""Exact dynamics of a point particle among disk obstacles of radius r
centered at the integer lattice: Z_r = {x in R^2 : dist(x, Z^2) > r}.

The ray tracer marches through lattice columns along the dominant axis
(after reducing the direction to the cone |omega2| <= omega1 by exact
lattice symmetries) and tests the at-most-two candidate disks per column,
vectorized in chunks; cost is O(path length).
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

__all__ = [
    "Direction", "ParticleState", "CollisionEvent", "TransferResult", "ExitHit",
    "NoCollisionError", "TangentialHitError", "NotOnBoundaryError",
    "reflect", "exit_time", "flow", "collision_sequence",
    "impact_parameter", "boundary_point", "transfer_map",
    "T_HORIZON_DEFAULT",
]

T_HORIZON_DEFAULT = 1.0e6
_GRAZE_TOL = 1e-12   # on |omega . n| at a hit
_T_MIN = 1e-12       # hits closer than this are the departure point itself


class NoCollisionError(RuntimeError):
    """The ray does not meet any obstacle.

    reason is 'channel' (provably clear rational channel) or 'horizon'
    (no hit within the configured flight horizon).
    """

    def __init__(self, reason: str, horizon: float = None):
        super().__init__(f"no collision ({reason})")
        self.reason = reason
        self.horizon = horizon


class TangentialHitError(RuntimeError):
    """Grazing collision with |omega . n| below tolerance."""

    def __init__(self, tau: float, point):
        super().__init__(f"tangential hit at tau={tau}")
        self.tau = tau
        self.point = point


class NotOnBoundaryError(ValueError):
    """Point not within tolerance of any obstacle circle."""


@dataclass(frozen=True)
class Direction:
    """Unit vector on S^1 stored as angle with cached components."""

    theta: float
    cos: float
    sin: float

    @classmethod
    def from_angle(cls, theta: float) -> "Direction":
        theta = theta % (2.0 * math.pi)
        return cls(theta, math.cos(theta), math.sin(theta))

    @classmethod
    def from_components(cls, w1: float, w2: float) -> "Direction":
        norm = math.hypot(w1, w2)
        if abs(norm - 1.0) > 1e-9:
            w1, w2 = w1 / norm, w2 / norm
        return cls(math.atan2(w2, w1) % (2.0 * math.pi), w1, w2)

    def rotated(self, phi: float) -> "Direction":
        return Direction.from_angle(self.theta + phi)


@dataclass(frozen=True)
class ParticleState:
    position: Tuple[float, float]
    direction: Direction


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    point: Tuple[float, float]
    outgoing: Direction
    impact: float


@dataclass(frozen=True)
class TransferResult:
    flight: float  # S = 2 r tau
    impact: float  # h in [-1, 1]


@dataclass(frozen=True)
class ExitHit:
    tau: float
    center: Tuple[int, int]
    point: Tuple[float, float]


def reflect(omega: Direction, normal: Tuple[float, float]) -> Direction:
    """Specular reflection omega' = omega - 2 (omega.n) n."""
    n1, n2 = normal
    if abs(n1 * n1 + n2 * n2 - 1.0) > 1e-12:
        raise ValueError("normal must be unit length")
    dot = omega.cos * n1 + omega.sin * n2
    return Direction.from_components(omega.cos - 2.0 * dot * n1,
                                     omega.sin - 2.0 * dot * n2)


def _first_hit_cone(x1: float, x2: float, w1: float, w2: float, r: float,
                    horizon: float):
    """First disk hit for a direction in the cone w1 > 0, |w2| <= w1.

    Marches integer columns m; per column the ray passes (m, y(m)) and only
    the disks centered at (m, floor(y)) and (m, floor(y)+1) can be hit.
    Returns (t, m, n) or None.
    """
    slope = w2 / w1
    r2 = r * r
    m_end = x1 + horizon * w1 + 1.0
    m_lo = math.floor(x1) - 1
    best_t = math.inf
    best_mn = None
    chunk = 4096
    while m_lo <= m_end:
        m_hi = min(m_lo + chunk, m_end)
        m = np.arange(m_lo, math.floor(m_hi) + 1, dtype=float)
        dm = m - x1
        y = x2 + dm * slope
        nf = np.floor(y)
        for n in (nf, nf + 1.0):
            dy = n - x2
            cross = dm * w2 - dy * w1
            proj = dm * w1 + dy * w2
            disc = r2 - cross * cross
            ok = (disc >= 0.0) & (proj > 0.0)
            if not ok.any():
                continue
            t = proj[ok] - np.sqrt(disc[ok])
            t_ok = t > _T_MIN
            if not t_ok.any():
                continue
            i = np.argmin(np.where(t_ok, t, np.inf))
            if t[i] < best_t:
                best_t = float(t[i])
                best_mn = (int(m[ok][i]), int(n[ok][i]))
        m_lo = math.floor(m_hi) + 1
        chunk = min(chunk * 4, 1 << 18)
        # hits in later columns have t >= (column - x1) - 2
        if best_mn is not None and best_t < (m_lo - x1) - 2.0:
            break
    if best_mn is None or best_t > horizon:
        return None
    return best_t, best_mn[0], best_mn[1]


def _cone_transform(w1: float, w2: float):
    """Lattice symmetry mapping omega into the cone w1 > 0, |w2| <= w1.

    Returns (fwd, inv) acting on coordinate pairs.
    """
    swap = abs(w2) > abs(w1)
    if swap:
        w1, w2 = w2, w1
    neg = w1 < 0
    def fwd(a, b):
        if swap:
            a, b = b, a
        return (-a if neg else a, b)
    def inv(a, b):
        a = -a if neg else a
        if swap:
            a, b = b, a
        return (a, b)
    return fwd, inv


def exit_time(state: ParticleState, r: float,
              horizon: float = T_HORIZON_DEFAULT) -> ExitHit:
    """Exit time tau_r = inf{t > 0 : x + t omega in boundary of Z_r},
    with the hit obstacle center and hit point.

    Raises NoCollisionError('channel') for an axis-aligned ray in a clear
    channel, NoCollisionError('horizon') when no hit occurs within the
    flight horizon, and TangentialHitError on a grazing hit.
    """
    if not 0.0 < r < 0.5:
        raise ValueError(f"r must be in (0, 1/2), got {r}")
    x1, x2 = state.position
    w1, w2 = state.direction.cos, state.direction.sin
    fwd, inv = _cone_transform(w1, w2)
    u1, u2 = fwd(x1, x2)
    v1, v2 = fwd(w1, w2)
    if v2 == 0.0:
        # exactly axis-aligned: clear-channel detection is exact
        off = abs(u2 - round(u2))
        if off > r:
            raise NoCollisionError("channel")
    hit = _first_hit_cone(u1, u2, v1, v2, r, horizon)
    if hit is None:
        raise NoCollisionError("horizon", horizon)
    t, m, n = hit
    cx, cy = inv(float(m), float(n))
    px, py = x1 + t * w1, x2 + t * w2
    # |omega . n| at the hit classifies grazing
    nx, ny = (px - cx) / r, (py - cy) / r
    if abs(w1 * nx + w2 * ny) < _GRAZE_TOL:
        raise TangentialHitError(t, (px, py))
    return ExitHit(t, (int(round(cx)), int(round(cy))), (px, py))


def impact_parameter(point: Tuple[float, float], direction: Direction,
                     r: float) -> float:
    """h = sin(signed angle from the direction to the inward normal n_x),
    positive when n_x is counterclockwise of the direction.

    Valid for both the incoming and the outgoing direction of a collision
    (the cross product with n is preserved by specular reflection).
    """
    px, py = point
    cx, cy = round(px), round(py)
    dx, dy = px - cx, py - cy
    dist = math.hypot(dx, dy)
    if abs(dist - r) > 1e-8:
        raise NotOnBoundaryError(
            f"point {point} at distance {dist} from nearest center, r={r}")
    nx, ny = dx / dist, dy / dist
    return direction.cos * ny - direction.sin * nx


def boundary_point(h_prime: float, omega: Direction, r: float) -> ParticleState:
    """Outgoing boundary state on the obstacle at the origin with impact
    parameter h' (inverse of impact_parameter on the outgoing chart)."""
    if not -1.0 <= h_prime <= 1.0:
        raise ValueError("|h'| must be <= 1")
    psi = omega.theta + math.asin(h_prime)
    return ParticleState((r * math.cos(psi), r * math.sin(psi)), omega)


def _collide(state: ParticleState, hit: ExitHit, r: float):
    """Reflect at a hit point; returns (outgoing Direction, h)."""
    px, py = hit.point
    cx, cy = hit.center
    nx, ny = (px - cx) / r, (py - cy) / r
    norm = math.hypot(nx, ny)
    nx, ny = nx / norm, ny / norm
    h = state.direction.cos * ny - state.direction.sin * nx
    out = reflect(state.direction, (nx, ny))
    return out, h


def flow(state: ParticleState, r: float, t: float,
         horizon: float = T_HORIZON_DEFAULT) -> ParticleState:
    """Billiard flow (X_r, Omega_r)(t): free flight + specular bounces."""
    if t < 0:
        raise ValueError("t must be >= 0")
    remaining = t
    while remaining > 0.0:
        try:
            hit = exit_time(state, r, horizon=min(horizon, remaining))
        except NoCollisionError:
            x1, x2 = state.position
            return ParticleState((x1 + remaining * state.direction.cos,
                                  x2 + remaining * state.direction.sin),
                                 state.direction)
        if hit.tau >= remaining:
            x1, x2 = state.position
            return ParticleState((x1 + remaining * state.direction.cos,
                                  x2 + remaining * state.direction.sin),
                                 state.direction)
        out, _ = _collide(state, hit, r)
        state = ParticleState(hit.point, out)
        remaining -= hit.tau
    return state


def collision_sequence(state: ParticleState, r: float, n: int,
                       horizon: float = T_HORIZON_DEFAULT) -> List[CollisionEvent]:
    """First n collision events (t_j, x_j, omega_j, h_j) of the trajectory.

    On NoCollision/TangentialHit the partial sequence collected so far is
    attached to the raised exception as .events.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    events: List[CollisionEvent] = []
    t_abs = 0.0
    try:
        for _ in range(n):
            hit = exit_time(state, r, horizon=horizon)
            t_abs += hit.tau
            out, h = _collide(state, hit, r)
            events.append(CollisionEvent(t_abs, hit.point, out, h))
            state = ParticleState(hit.point, out)
    except (NoCollisionError, TangentialHitError) as exc:
        exc.events = events
        raise
    return events


def transfer_map(h_prime: float, omega: Direction, r: float,
                 s_horizon: float = 1.0e4) -> TransferResult:
    """Transfer map T_r(h', omega) = (2 r tau, h): scaled free path to the
    next collision and the impact parameter there.

    The flight horizon is s_horizon in the scaled variable S = 2 r tau, so
    the search range tracks the mean free path as r -> 0.

    The direction is reduced to the first octant by a quarter-turn
    rotation (exact lattice symmetry) plus, for a negative reduced angle,
    the reflection omega2 -> -omega2 which flips the sign of both h' and h.
    """
    theta = omega.theta
    m = math.floor((2.0 / math.pi) * (theta + math.pi / 4.0))
    theta_t = theta - m * (math.pi / 2.0)
    sgn = 1.0 if theta_t >= 0.0 else -1.0
    omega0 = Direction.from_angle(abs(theta_t))
    start = boundary_point(sgn * h_prime, omega0, r)
    hit = exit_time(start, r, horizon=s_horizon / (2.0 * r))
    # h = perpendicular signed distance of the hit centre from the ray,
    # over r.  Exact rational arithmetic on the stored floats: the naive
    # cross product at the hit point loses ~ulp(flight length)/r digits.
    cx, cy = hit.center
    x1, x2 = start.position
    cross = ((Fraction(cx) - Fraction(x1)) * Fraction(omega0.sin)
             - (Fraction(cy) - Fraction(x2)) * Fraction(omega0.cos))
    h1 = float(cross / Fraction(r))
    return TransferResult(2.0 * r * hit.tau, sgn * h1)
