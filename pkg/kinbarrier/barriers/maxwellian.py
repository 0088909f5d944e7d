"""
Barriers for initial data close to a local Maxwellian.

On t ≥ 1 the barriers are l₀^# = C₁(t)·M₁ and u₀^# = C₂(t)·M₂. The amplitudes
solve a Riccati system whose solution is known in closed form; it stays
bounded as long as the boundedness margin exceeds one.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ..phase.fields import DistributionField
from ..phase.grids import MaxwellianSpec, velocity_lattice
from ..utils import DomainError
from .vacuum import BarrierException

_log = logging.getLogger(__name__)

GAUSSIAN_CUTOFF = 1e-12
POINTS_PER_WIDTH = 6
PHI_SAMPLE_TIMES = (1., 2., 5., 10., 100., math.inf)
PHI_SAMPLES_PER_AXIS = 5
PHI_SUP_MARGIN = 1.05
# lattice points times evaluation points handled at once
PHI_BLOCK_ENTRIES = 2 ** 22
PROFILE_TIMES = tuple(np.logspace(0, 3, 13))


class BarrierBlowUp(BarrierException):
    """The barrier amplitudes blow up at a finite time."""

    def __init__(self, critical_t, margin):
        self.critical_t = critical_t
        self.margin = margin

    def __str__(self):
        return f"Barrier blows up in finite time: boundedness margin {self.margin:.6g} <= 1, " \
               f"C2(t) diverges at t* = {self.critical_t:.6g}."


def maxwellian_distance(M1, M2):
    """d(M₁, M₂) = |C₂−C₁| + |α₂−α₁| + |β₂−β₁|."""
    if M1.shift != M2.shift:
        raise DomainError('maxwellian_distance', f"Maxwellians live in different frames (shift {M1.shift} "
                                                 f"vs. {M2.shift})")
    return abs(M2.C - M1.C) + abs(M2.alpha - M1.alpha) + abs(M2.beta - M1.beta)


#
# The function φ_{α,β}
#
def phi_eval(alpha, beta, t, x, v, kernel):
    """φ_{α,β}(t,x,v) = ‖b‖∫exp(−α|x+u|² − β|v−u/t|²)|u|^{−λ}du.

    x and v are single points or arrays of shape (P, n); t may be infinite.
    The integral is a lattice sum centered at u = 0, whose cell carries the
    cell-averaged singular value, truncated where the Gaussian factor drops
    below 1e−12.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    single = x.ndim == 1
    x, v = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(v))
    n = kernel.n
    inverse_t = 0. if np.isinf(t) else 1 / t
    rate = alpha + beta * inverse_t ** 2
    center = (-alpha * x + beta * inverse_t * v) / rate
    half_width = np.max(np.linalg.norm(center, axis=-1)) + math.sqrt(math.log(1 / GAUSSIAN_CUTOFF) / rate)
    h = 1 / (POINTS_PER_WIDTH * math.sqrt(rate))
    u = velocity_lattice(np.zeros(n), h, half_width, n)
    weights = kernel.potential(np.linalg.norm(u, axis=-1), h) * h ** n
    block = max(1, PHI_BLOCK_ENTRIES // len(u))
    values = np.empty(len(x))
    for start in range(0, len(x), block):
        xs = x[start:start + block, None, :]
        vs = v[start:start + block, None, :]
        exponent = -alpha * np.sum((xs + u) ** 2, axis=-1) - beta * np.sum((vs - u * inverse_t) ** 2, axis=-1)
        values[start:start + block] = np.exp(exponent) @ weights
    values *= kernel.norm
    return float(values[0]) if single else values


@dataclass(frozen=True)
class PhiSups:
    """Sup norms ‖φ₁‖, ‖φ₂‖, ‖φ₁−φ₂‖, ‖φ₁+φ₂‖ over t ≥ 1 and phase space."""
    phi1: float
    phi2: float
    diff: float
    sum: float
    exact: bool = False

    def to_dict(self):
        return dict(phi1=self.phi1, phi2=self.phi2, diff=self.diff, sum=self.sum, exact=self.exact)


def _sample_axis(rate, count=PHI_SAMPLES_PER_AXIS):
    if rate <= 0:
        return np.zeros(1)
    return np.linspace(-1.5, 1.5, count) / math.sqrt(rate)


def _box_points(axis, n):
    return np.array(list(itertools.product(axis, repeat=n)), dtype=float)


def phi_sup_norms(M1, M2, kernel):
    """Estimate sup norms of φ₁ = φ_{α₁,β₁}, φ₂ = φ_{α₂,β₂} and their difference and sum.

    For λ = 0 and β₁ = β₂ = 0 the values are exact: φ_i = ‖b‖(π/α_i)^{n/2}.
    Otherwise φ is maximized over a (t, x, v) sample lattice followed by one
    local refinement around each maximizer, and the result is multiplied by
    the margin factor 1.05.
    """
    n = kernel.n
    if kernel.lam == 0 and M1.beta == 0 and M2.beta == 0:
        phi1 = kernel.norm * (math.pi / M1.alpha) ** (n / 2)
        phi2 = kernel.norm * (math.pi / M2.alpha) ** (n / 2)
        return PhiSups(phi1=phi1, phi2=phi2, diff=abs(phi1 - phi2), sum=phi1 + phi2, exact=True)

    alpha = min(M1.alpha, M2.alpha)
    beta = min(M1.beta, M2.beta)
    x_axis = _sample_axis(alpha)
    v_axis = _sample_axis(beta)
    times = PHI_SAMPLE_TIMES if beta > 0 else (1.,)
    x_points = _box_points(x_axis, n)
    v_points = _box_points(v_axis, n)
    xs = np.repeat(x_points, len(v_points), axis=0)
    vs = np.tile(v_points, (len(x_points), 1))

    def evaluate(t, x, v):
        phi1 = phi_eval(M1.alpha, M1.beta, t, x, v, kernel)
        phi2 = phi_eval(M2.alpha, M2.beta, t, x, v, kernel)
        return dict(phi1=phi1, phi2=phi2, diff=np.abs(phi1 - phi2), sum=phi1 + phi2)

    best = {}
    for t in times:
        values = evaluate(t, xs, vs)
        for name, val in values.items():
            i = int(np.argmax(val))
            if name not in best or val[i] > best[name][0]:
                best[name] = (float(val[i]), t, xs[i], vs[i])

    # one local refinement pass around every maximizer
    dx = (x_axis[1] - x_axis[0]) / 2 if len(x_axis) > 1 else 0.
    dv = (v_axis[1] - v_axis[0]) / 2 if len(v_axis) > 1 else 0.
    offsets_x = _box_points((-dx, 0., dx), n)
    offsets_v = _box_points((-dv, 0., dv), n)
    for name, (value, t, x0, v0) in list(best.items()):
        rx = np.repeat(x0 + offsets_x, len(offsets_v), axis=0)
        rv = np.tile(v0 + offsets_v, (len(offsets_x), 1))
        refined = float(np.max(evaluate(t, rx, rv)[name]))
        best[name] = (max(value, refined), t, x0, v0)
        _log.debug("sup %s = %.6g near t=%s, x=%s, v=%s", name, best[name][0], t, x0, v0)

    return PhiSups(**{name: PHI_SUP_MARGIN * best[name][0] for name in ('phi1', 'phi2', 'diff', 'sum')})


#
# Barrier amplitudes
#
def barrier_k2(C1_init, C2_init, phi_sums):
    """k² = (‖φ₁+φ₂‖ − ‖φ₁−φ₂‖)/(‖φ₁+φ₂‖ + ‖φ₁−φ₂‖)·C₁(1)C₂(1).

    phi_sums is the pair (‖φ₁+φ₂‖, ‖φ₁−φ₂‖) or a PhiSups.
    """
    A, B = (phi_sums.sum, phi_sums.diff) if isinstance(phi_sums, PhiSups) else phi_sums
    if not A > B >= 0:
        raise DomainError('barrier_k2', f"need ‖phi1+phi2‖ > ‖phi1-phi2‖ >= 0, got {A} and {B}")
    return (A - B) / (A + B) * C1_init * C2_init


def check_barrier_parameters(M, M1, M2, lam, n):
    """Raise DomainError unless M₁, M₂ bracket M as the near-Maxwellian construction needs."""
    maxwellian_distance(M1, M)
    maxwellian_distance(M2, M)
    if not (M2.alpha <= M.alpha <= M1.alpha and M2.beta <= M.beta <= M1.beta and M1.C <= M.C <= M2.C):
        raise DomainError('MaxwellianBarrier', "need alpha2 <= alpha <= alpha1, beta2 <= beta <= beta1 and "
                                               "C1 <= C <= C2")
    if not (M.C / 2 <= M1.C and M2.C <= 2 * M.C and M.alpha / 2 <= M2.alpha and M1.alpha <= 2 * M.alpha
            and M.beta / 2 <= M2.beta and M1.beta <= 2 * M.beta):
        raise DomainError('MaxwellianBarrier', "parameters of M1 and M2 must lie within a factor 2 of M")
    if M.beta == 0 and not (M1.beta == 0 and M2.beta == 0):
        raise DomainError('MaxwellianBarrier', "beta = 0 (infinite mass) requires beta1 = beta2 = 0")
    if not (0 <= lam < n - 1):
        raise DomainError('MaxwellianBarrier', f"need 0 <= lambda < n-1, got {lam}")


@dataclass(frozen=True)
class MaxwellianBarrier:
    """Sandwich C₁(t)M₁ ≤ f^# ≤ C₂(t)M₂ around the target local Maxwellian M, for t ≥ 1."""
    M: MaxwellianSpec
    M1: MaxwellianSpec
    M2: MaxwellianSpec
    eps: float
    lam: float
    n: int
    phi: PhiSups
    k2: float = field(init=False)

    def __post_init__(self):
        check_barrier_parameters(self.M, self.M1, self.M2, self.lam, self.n)
        object.__setattr__(self, 'k2', barrier_k2(self.M1.C, self.M2.C, self.phi))

    @classmethod
    def build(cls, M, M1, M2, eps, kernel, phi=None):
        if phi is None:
            phi = phi_sup_norms(M1, M2, kernel)
        barrier = cls(M=M, M1=M1, M2=M2, eps=eps, lam=kernel.lam, n=kernel.n, phi=phi)
        _log.info("Near-Maxwellian barrier: k^2=%.6g, sups %s, margin %.6g", barrier.k2, phi.to_dict(),
                  barrier.margin)
        return barrier

    @property
    def k(self):
        return math.sqrt(self.k2)

    @property
    def m(self):
        """n − λ, the decay exponent of the collision terms in t."""
        return self.n - self.lam

    @property
    def rate(self):
        """k·(‖φ₁+φ₂‖ + ‖φ₁−φ₂‖)/(n−λ−1)."""
        return self.k * (self.phi.sum + self.phi.diff) / (self.m - 1)

    @property
    def margin(self):
        return boundedness_condition(self)

    @property
    def envelope_rates(self):
        """Decay rates of the upper barrier envelope M₂."""
        return self.M2.alpha, self.M2.beta

    def amplitude(self, t):
        return c2_profile(t, self)

    def rhs(self, t, C):
        """Right side of the amplitude ODE system at time t for C = (C₁, C₂)."""
        C1, C2 = C
        A, B = self.phi.sum, self.phi.diff
        scale = 2 * t ** self.m
        return np.array([((C1 ** 2 - C1 * C2) * A - (C1 ** 2 + C1 * C2) * B) / scale,
                         ((C2 ** 2 - C1 * C2) * A + (C2 ** 2 + C1 * C2) * B) / scale])

    def lower(self, grid, t):
        """l₀^#(t) = C₁(t)·M₁(x, v) on the grid (trajectory frame)."""
        return DistributionField.from_matrix(grid, t, c1_profile(t, self) * grid.envelope(self.M1.alpha,
                                                                                            self.M1.beta),
                                             'trajectory')

    def upper(self, grid, t):
        """u₀^#(t) = C₂(t)·M₂(x, v) on the grid (trajectory frame)."""
        return DistributionField.from_matrix(grid, t, c2_profile(t, self) * grid.envelope(self.M2.alpha,
                                                                                            self.M2.beta),
                                             'trajectory')

    def to_dict(self):
        times = np.asarray(PROFILE_TIMES)
        return dict(regime='near_maxwellian', M=self.M.to_dict(), M1=self.M1.to_dict(), M2=self.M2.to_dict(),
                    eps=self.eps, k2=self.k2, margin=self.margin, phi_sups=self.phi.to_dict(),
                    distances=dict(M1=maxwellian_distance(self.M1, self.M),
                                   M2=maxwellian_distance(self.M2, self.M)),
                    profiles=dict(t=times, C1=c1_profile(times, self), C2=c2_profile(times, self)))


def boundedness_condition(barrier):
    """Ratio ((C₂(1)+k)/(C₂(1)−k))/exp(k(‖φ₁+φ₂‖+‖φ₁−φ₂‖)/(n−λ−1)); +∞ if C₂(1) = k."""
    C2, k = barrier.M2.C, barrier.k
    if C2 <= k:
        return math.inf
    log_margin = math.log((C2 + k) / (C2 - k)) - barrier.rate
    return math.exp(min(log_margin, 700.))


def critical_time(barrier):
    """Time t* at which C₂ diverges, +∞ while the boundedness margin exceeds one."""
    C2, k = barrier.M2.C, barrier.k
    if C2 <= k or boundedness_condition(barrier) > 1:
        return math.inf
    m = barrier.m
    base = 1 - (m - 1) * math.log((C2 + k) / (C2 - k)) / (k * (barrier.phi.sum + barrier.phi.diff))
    if base <= 0:
        return math.inf
    return base ** (-1 / (m - 1))


def c2_profile(t, barrier):
    """C₂(t) solving (C₂(1)+k)/(C₂(1)−k)·(C₂(t)−k)/(C₂(t)+k) = exp(k(A+B)/(n−λ−1)·(1 − t^{1−(n−λ)}))."""
    margin = boundedness_condition(barrier)
    if margin <= 1:
        raise BarrierBlowUp(critical_time(barrier), margin)
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise DomainError('c2_profile', "barrier amplitudes are defined for t >= 1")
    C2, k = barrier.M2.C, barrier.k
    if C2 <= k:
        return np.full_like(t, C2)[()]
    growth = np.exp(barrier.rate * (1 - t ** (1 - barrier.m)))
    rho = growth * (C2 - k) / (C2 + k)
    return (k * (1 + rho) / (1 - rho))[()]


def c1_profile(t, barrier):
    """C₁(t) = C₁(1)C₂(1)/C₂(t)."""
    return barrier.M1.C * barrier.M2.C / c2_profile(t, barrier)


def integrate_barrier_odes(barrier, t_eval, rtol=1e-12):
    """High-order numerical solution (C₁(t), C₂(t)) of the amplitude system at t_eval ≥ 1."""
    t_eval = np.asarray(t_eval, dtype=float)
    t_end = float(np.max(t_eval))
    t_star = critical_time(barrier)
    if t_end >= t_star:
        raise BarrierBlowUp(t_star, boundedness_condition(barrier))
    if t_end == 1:
        return np.full_like(t_eval, barrier.M1.C), np.full_like(t_eval, barrier.M2.C)
    solution = solve_ivp(barrier.rhs, (1., t_end), [barrier.M1.C, barrier.M2.C], method='DOP853',
                         t_eval=t_eval, rtol=rtol, atol=rtol * barrier.M2.C * 1e-3)
    if not solution.success:
        raise BarrierException(f"Integration of barrier amplitudes failed: {solution.message}")
    return solution.y[0], solution.y[1]
