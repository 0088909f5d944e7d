"""
Collision kernels B(|u|, û·σ) = |u|^{-λ} b(û·σ) and angular integration on the sphere.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import gamma

from ..utils import DomainError

_log = logging.getLogger(__name__)

ANGULAR_FORMS = ('constant', 'power', 'tabulated', 'symmetrized')
KERNEL_MODES = ('near_vacuum', 'near_maxwellian')
SUPPORTED_DIMENSIONS = (2, 3)

ANGULAR_RTOL = 1e-10
ANGULAR_ATOL = 1e-14


class KernelException(Exception):
    """Generic exception for problems with collision kernels."""
    pass


class KernelDomainError(KernelException, DomainError):
    """Kernel parameters violate the admissible range."""

    def __init__(self, reason, code='invalid'):
        DomainError.__init__(self, 'kernel', reason)
        self.code = code


class IntegrationFailure(KernelException):
    """Angular quadrature did not produce a finite value."""

    def __init__(self, what, value):
        self._what = what
        self._value = value

    def __str__(self):
        return f"Integration of {self._what} failed (result: {self._value})."


def sphere_area(n):
    """Surface measure |S^{n-1}| of the unit sphere in R^n."""
    if n < 2:
        raise DomainError('sphere_area', f"dimension must be at least 2, got {n}")
    return 2 * math.pi ** (n / 2) / gamma(n / 2)


def ball_volume(n):
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def singular_cap(h, n, lam):
    """Average of |u|^{-λ} over the ball of volume h^n centered at the origin.

    The ball radius r₀ solves |B₁| r₀^n = h^n, the average is (n/(n−λ)) r₀^{−λ}.
    """
    if lam >= n:
        raise DomainError('singular_cap', f"|u|^(-{lam}) is not locally integrable in dimension {n}")
    r0 = (h ** n / ball_volume(n)) ** (1 / n)
    return n / (n - lam) * r0 ** (-lam)


@dataclass(frozen=True)
class AngularKernel:
    """Angular part b(s), s = û·σ ∈ [−1, 1], of a cut-off collision kernel.

    Forms:
      constant:    b(s) = value
      power:       b(s) = value·|s|^power, power ≥ 0
      tabulated:   piecewise linear through `samples` on equidistant nodes of [−1, 1]
      symmetrized: (base(s) + base(−s))·1{s ≤ 0}
    """
    form: str
    value: float = 1.0
    power: float = 0.0
    samples: tuple = ()
    base: 'AngularKernel' = field(default=None, repr=False)

    def __post_init__(self):
        if self.form not in ANGULAR_FORMS:
            raise KernelDomainError(f"unknown angular form '{self.form}', expected one of {ANGULAR_FORMS}",
                                    code='angular_form')
        if self.form in ('constant', 'power'):
            if not np.isfinite(self.value) or self.value < 0:
                raise KernelDomainError(f"angular kernel value must be finite and nonnegative, got {self.value}",
                                        code='angular_negative')
        if self.form == 'power' and not self.power >= 0:
            raise KernelDomainError(f"power exponent must be nonnegative, got {self.power}",
                                    code='angular_power')
        if self.form == 'tabulated':
            samples = np.asarray(self.samples, dtype=float)
            if samples.ndim != 1 or len(samples) < 2:
                raise KernelDomainError("tabulated angular kernel needs at least two samples",
                                        code='angular_samples')
            if np.any(np.isnan(samples)) or np.any(samples < 0):
                raise KernelDomainError("tabulated angular kernel must be nonnegative",
                                        code='angular_negative')
            object.__setattr__(self, 'samples', tuple(float(s) for s in samples))
        if self.form == 'symmetrized' and not isinstance(self.base, AngularKernel):
            raise KernelDomainError("symmetrized kernel needs a base kernel", code='angular_form')

    @property
    def nodes(self):
        return np.linspace(-1, 1, len(self.samples))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.form == 'constant':
            return np.full_like(s, self.value)
        elif self.form == 'power':
            return self.value * np.abs(s) ** self.power
        elif self.form == 'tabulated':
            return np.interp(s, self.nodes, self.samples)
        else:
            return np.where(s <= 0, self.base(s) + self.base(-s), 0.)

    def breakpoints(self):
        """Abscissae in (−1, 1) where b may fail to be smooth."""
        if self.form == 'tabulated':
            pts = self.nodes[1:-1]
        elif self.form == 'power':
            pts = np.array([0.])
        elif self.form == 'symmetrized':
            inner = self.base.breakpoints()
            pts = np.concatenate([inner, -inner, [0.]])
        else:
            pts = np.array([])
        return np.unique(pts[(pts > -1) & (pts < 1)])

    def scaled(self, c):
        """Return the kernel c·b for c ≥ 0."""
        if self.form == 'tabulated':
            return AngularKernel('tabulated', samples=tuple(c * np.asarray(self.samples)))
        elif self.form == 'symmetrized':
            return AngularKernel('symmetrized', base=self.base.scaled(c))
        return AngularKernel(self.form, value=c * self.value, power=self.power)


def symmetrize(b):
    """Symmetrized angular kernel b̄(s) = (b(s) + b(−s))·1{s ≤ 0}.

    Its angular norm equals the one of b.
    """
    return AngularKernel('symmetrized', base=b)


def _sphere_integral(func, n, breakpoints, what):
    """∫_{S^{n-1}} F(û·σ) dσ for a zonal integrand F given on [−1, 1]."""
    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            if n == 2:
                # s = cos θ removes the (1−s²)^{−1/2} endpoint singularity
                theta_points = np.sort(np.arccos(breakpoints)) if len(breakpoints) else None
                value, _ = integrate.quad(lambda theta: func(math.cos(theta)), 0, math.pi,
                                          points=theta_points, epsrel=ANGULAR_RTOL, epsabs=ANGULAR_ATOL,
                                          limit=max(200, 4 * len(breakpoints)))
                value *= 2
            else:
                value, _ = integrate.quad(lambda s: func(s) * (1 - s * s) ** ((n - 3) / 2), -1, 1,
                                          points=breakpoints if len(breakpoints) else None,
                                          epsrel=ANGULAR_RTOL, epsabs=ANGULAR_ATOL,
                                          limit=max(200, 4 * len(breakpoints)))
                value *= sphere_area(n - 1)
        except integrate.IntegrationWarning as exc:
            raise IntegrationFailure(what, str(exc)) from exc
    if not np.isfinite(value):
        raise IntegrationFailure(what, value)
    return value


def angular_integral(b, n):
    """‖b‖_{L¹(S^{n−1})} for an angular kernel in dimension n."""
    return _sphere_integral(lambda s: float(b(s)), n, b.breakpoints(), f"angular kernel '{b.form}'")


def gain_weight(b, n, a):
    """Angular weight ∫ (2/(1−s))^a b̄(s) dσ of the symmetrized kernel.

    Finite for every real a since b̄ vanishes for s > 0, where 2/(1−s) ≤ 2.
    For a = 0 this is the angular norm of b.
    """
    bbar = symmetrize(b)
    return _sphere_integral(lambda s: (2 / (1 - s)) ** a * float(bbar(s)) if s <= 0 else 0., n,
                            bbar.breakpoints(), f"symmetrized angular kernel (a={a})")


@dataclass(frozen=True)
class CollisionKernel:
    """Soft-potential kernel |u|^{-λ} b(û·σ) in dimension n for a given barrier regime."""
    lam: float
    angular: AngularKernel
    n: int = 2
    mode: str = 'near_vacuum'

    def __post_init__(self):
        if self.n not in SUPPORTED_DIMENSIONS:
            raise KernelDomainError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {self.n}",
                                    code='dimension')
        if self.mode not in KERNEL_MODES:
            raise KernelDomainError(f"unknown mode '{self.mode}', expected one of {KERNEL_MODES}", code='mode')
        upper = self.n - 1
        if self.mode == 'near_maxwellian' and not (0 <= self.lam < upper):
            raise KernelDomainError(f"soft-potential range 0 <= lambda < n-1 = {upper} violated "
                                    f"(lambda = {self.lam})", code='soft_potential_range')
        if self.mode == 'near_vacuum' and not (-1 <= self.lam < upper):
            raise KernelDomainError(f"near-vacuum range -1 <= lambda < n-1 = {upper} violated "
                                    f"(lambda = {self.lam})", code='soft_potential_range')
        _log.debug("Collision kernel lambda=%s n=%s mode=%s, angular norm %s",
                   self.lam, self.n, self.mode, self.norm)

    @cached_property
    def norm(self):
        """‖b‖_{L¹(S^{n−1})}"""
        return angular_integral(self.angular, self.n)

    def potential(self, r, h):
        """|u|^{-λ} with the cell-averaged value below one lattice cell of size h."""
        r = np.asarray(r, dtype=float)
        cap = singular_cap(h, self.n, self.lam)
        small = r < 0.5 * h
        with np.errstate(divide='ignore'):
            values = np.where(small, 1., r) ** (-self.lam)
        return np.where(small, cap, values)


def angular_norm(kernel, n=None):
    """‖b‖_{L¹(S^{n−1})} of a CollisionKernel (or of an AngularKernel in dimension n)."""
    if isinstance(kernel, CollisionKernel):
        return kernel.norm
    if n is None:
        raise DomainError('angular_norm', "dimension required for a bare angular kernel")
    return angular_integral(kernel, n)
