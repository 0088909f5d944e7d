"""
Barriers for initial data close to vacuum.

The upper barrier is the traveling Maxwellian u₀ = C·M_{α,β}(x − tv, v), i.e.
stationary in the trajectory frame, the lower barrier is zero. C is the
smaller root of ‖f₀‖_{α,β} + k_{α,β}·C² = C.
"""
import logging
import math
from dataclasses import dataclass

from ..kernel.kernels import sphere_area
from ..phase.fields import DistributionField, weighted_sup_norm
from ..utils import DomainError

_log = logging.getLogger(__name__)


class BarrierException(Exception):
    """Generic exception for barrier construction."""
    pass


class SmallnessViolated(BarrierException):
    """Initial datum too large for the near-vacuum barrier."""

    def __init__(self, f0_norm, k_ab):
        self.f0_norm = f0_norm
        self.k_ab = k_ab

    @property
    def threshold(self):
        return 1 / (4 * self.k_ab)

    def __str__(self):
        return f"Smallness violated: ‖f0‖_(alpha,beta) = {self.f0_norm:.6g} exceeds 1/(4 k_(alpha,beta)) = " \
               f"{self.threshold:.6g}, the threshold for global existence near vacuum."


class BetaUnavailable(BarrierException):
    """The near-vacuum constant needs β > 0."""

    def __init__(self, beta):
        self.beta = beta

    def __str__(self):
        return f"The near-vacuum constant k_(alpha,beta) is unavailable for beta = {self.beta}; " \
               "use the near-Maxwellian regime for infinite mass."


def dimensional_constant(n):
    """C_n = π^{n/2}, the full Gaussian integral bounding the velocity tail."""
    return math.pi ** (n / 2)


def k_alpha_beta(alpha, beta, kernel):
    """k_{α,β} = √π α^{−1/2} ‖b‖ (|S^{n−1}|/(n−λ−1) + C_n β^{−n/2})."""
    if beta <= 0:
        raise BetaUnavailable(beta)
    if alpha <= 0:
        raise DomainError('k_alpha_beta', f"alpha must be positive, got {alpha}")
    n = kernel.n
    if not kernel.lam < n - 1:
        raise DomainError('k_alpha_beta', f"need lambda < n-1 = {n - 1}, got {kernel.lam}")
    return math.sqrt(math.pi / alpha) * kernel.norm * \
        (sphere_area(n) / (n - kernel.lam - 1) + dimensional_constant(n) * beta ** (-n / 2))


def vacuum_fixed_point(f0_norm, k_ab):
    """Smaller root C = (1 − √(1 − 4k‖f₀‖))/(2k) of ‖f₀‖ + k·C² = C."""
    if f0_norm < 0 or k_ab <= 0:
        raise DomainError('vacuum_fixed_point', f"need f0_norm >= 0 and k > 0, got {f0_norm}, {k_ab}")
    if f0_norm > 1 / (4 * k_ab):
        raise SmallnessViolated(f0_norm, k_ab)
    discriminant = max(0., 1 - 4 * k_ab * f0_norm)
    # rationalized form, no cancellation for small f0_norm
    return 2 * f0_norm / (1 + math.sqrt(discriminant))


@dataclass(frozen=True)
class VacuumBarrier:
    alpha: float
    beta: float
    k_ab: float
    C: float
    f0_norm: float
    Cn: float

    @classmethod
    def build(cls, f0, kernel, alpha, beta):
        """Barrier for the lab-frame initial datum f0."""
        k_ab = k_alpha_beta(alpha, beta, kernel)
        f0_norm = weighted_sup_norm(f0, alpha, beta)
        C = vacuum_fixed_point(f0_norm, k_ab)
        _log.info("Near-vacuum barrier: k=%.6g, ‖f0‖=%.6g (%.3g of threshold), C=%.6g",
                  k_ab, f0_norm, 4 * k_ab * f0_norm, C)
        return cls(alpha=alpha, beta=beta, k_ab=k_ab, C=C, f0_norm=f0_norm, Cn=dimensional_constant(kernel.n))

    @property
    def envelope_rates(self):
        return self.alpha, self.beta

    def amplitude(self, t):
        return self.C

    @property
    def gain_bound(self):
        """Bound k·C² on the time-integrated gain of the upper barrier, relative to M_{α,β}."""
        return self.k_ab * self.C ** 2

    def lower(self, grid, t):
        return DistributionField.zeros(grid, t, frame='trajectory')

    def upper(self, grid, t):
        """u₀^#(t) = C·M_{α,β}(x, v)."""
        return DistributionField.from_matrix(grid, t, self.C * grid.envelope(self.alpha, self.beta), 'trajectory')

    def to_dict(self):
        return dict(regime='near_vacuum', alpha=self.alpha, beta=self.beta, k_ab=self.k_ab, C=self.C,
                    f0_norm=self.f0_norm, Cn=self.Cn, threshold=1 / (4 * self.k_ab),
                    gain_bound=self.gain_bound)
