"""
Finite differences, weak Lebesgue norms, potential splitting and Lᵖ estimates of the collision terms.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize
from scipy.special import comb

from ..collision.quadrature import CollisionQuadrature
from ..kernel.kernels import ball_volume, gain_weight, sphere_area
from ..utils import DomainError, make_verdict

_log = logging.getLogger(__name__)

VARIABLES = ('position', 'velocity')
LATTICE_RTOL = 1e-9
EXPONENT_RTOL = 1e-12

WEAK_NORM_LOG_RADII = (math.log(1e-3), math.log(1e3))
WEAK_NORM_SCAN_POINTS = 61

Q_ESTIMATE_SAMPLES = 10
Q_ESTIMATE_STABILITY_FACTOR = 2.


#
# Finite differences
#
@dataclass(frozen=True)
class DifferenceOperator:
    """(D_{h,e} f)(x, v) = (f(· + h·e) − f(·))/h in position or velocity."""
    variable: str
    direction: tuple
    h: float

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise DomainError('DifferenceOperator', f"variable must be one of {VARIABLES}, got '{self.variable}'")
        direction = tuple(float(c) for c in self.direction)
        if abs(math.sqrt(sum(c * c for c in direction)) - 1) > 1e-12:
            raise DomainError('DifferenceOperator', f"direction must be a unit vector, got {direction}")
        if not self.h > 0:
            raise DomainError('DifferenceOperator', f"step must be positive, got {self.h}")
        object.__setattr__(self, 'direction', direction)

    @classmethod
    def along_axis(cls, variable, axis, n, h):
        direction = [0.] * n
        direction[axis] = 1.
        return cls(variable, tuple(direction), h)

    def offsets(self, grid):
        """Integer cell offsets of the translation by h·direction on the grid."""
        if len(self.direction) != grid.n:
            raise DomainError('DifferenceOperator', f"direction of length {len(self.direction)} on a grid of "
                                                    f"dimension {grid.n}")
        cellsize = grid.hx if self.variable == 'position' else grid.hv
        steps = self.h * np.asarray(self.direction) / cellsize
        offsets = np.rint(steps)
        if np.any(np.abs(steps - offsets) > LATTICE_RTOL * np.maximum(1., np.abs(steps))):
            raise DomainError('DifferenceOperator', f"h·direction = {self.h * np.asarray(self.direction)} is "
                                                    f"not a multiple of the cell size {cellsize}")
        return offsets.astype(int)

    def to_dict(self):
        return dict(variable=self.variable, direction=self.direction, h=self.h)


def _shift(values, axis, k):
    """values[..., i + k, ...] along axis with zero extension."""
    if k == 0:
        return values
    out = np.zeros_like(values)
    N = values.shape[axis]
    if abs(k) >= N:
        return out
    target = [slice(None)] * values.ndim
    source = [slice(None)] * values.ndim
    if k > 0:
        target[axis], source[axis] = slice(0, N - k), slice(k, N)
    else:
        target[axis], source[axis] = slice(-k, N), slice(0, N + k)
    out[tuple(target)] = values[tuple(source)]
    return out


def _axes(d, grid):
    first = 0 if d.variable == 'position' else grid.n
    return range(first, first + grid.n)


def translate(matrix, grid, d):
    """Values at (x + h·e, v) or (x, v + h·e), zero outside the box, for arrays (..., Nx^n, Nv^n)."""
    matrix = np.asarray(matrix, dtype=float)
    lead = matrix.shape[:-2]
    values = matrix.reshape(lead + grid.shape)
    for axis, k in zip(_axes(d, grid), d.offsets(grid)):
        values = _shift(values, len(lead) + axis, int(k))
    return values.reshape(matrix.shape)


def finite_difference(f, d):
    """D_{h,e} f of a DistributionField, in matrix layout.

    The result is signed, so it is returned as an array and not as a field.
    """
    return finite_difference_matrix(f.matrix, f.grid, d)


def finite_difference_matrix(matrix, grid, d):
    """D_{h,e} applied along the trailing (x-cell, v-cell) axes."""
    matrix = np.asarray(matrix, dtype=float)
    return (translate(matrix, grid, d) - matrix) / d.h


def interior_mask(grid, d):
    """Cells whose translate lies inside the box, in matrix layout."""
    inside = np.ones(grid.shape, dtype=bool)
    for axis, k in zip(_axes(d, grid), d.offsets(grid)):
        index = np.arange(grid.shape[axis]) + k
        ok = (index >= 0) & (index < grid.shape[axis])
        shape = [1] * len(grid.shape)
        shape[axis] = -1
        inside &= ok.reshape(shape)
    return inside.reshape(grid.matrix_shape)


#
# Weak Lebesgue norms
#
def weak_lp_norm(radial, s, n, log_radii=WEAK_NORM_LOG_RADII, scan_points=WEAK_NORM_SCAN_POINTS):
    """Weak Lˢ norm of a radial nonincreasing function on R^n.

    For such functions the sup over sets of finite measure is attained on
    centered balls: sup_ρ |B_ρ|^{−1/s'} ∫_{B_ρ} |f|, 1/s' = 1 − 1/s. The sup is
    taken over radii in exp(log_radii), first on a logarithmic scan, then
    refined by a bounded scalar maximization around the best scan point.
    """
    if not 1 < s < math.inf:
        raise DomainError('weak_lp_norm', f"need 1 < s < inf, got {s}")
    conjugate = 1 - 1 / s
    area = sphere_area(n)
    volume = ball_volume(n)

    def average(log_rho):
        rho = math.exp(log_rho)
        mass, _ = integrate.quad(lambda r: abs(radial(r)) * r ** (n - 1), 0, rho, limit=200)
        return area * mass / (volume * rho ** n) ** conjugate

    scan = np.linspace(*log_radii, scan_points)
    values = np.array([average(g) for g in scan])
    i = int(np.argmax(values))
    bounds = scan[max(i - 1, 0)], scan[min(i + 1, scan_points - 1)]
    refined = optimize.minimize_scalar(lambda g: -average(g), bounds=bounds, method='bounded')
    return float(max(values[i], -refined.fun))


def weak_norm_power(lam, n):
    """‖|u|^{−λ}‖ in weak L^{n/λ}(R^n): |S^{n−1}|·|B₁|^{λ/n−1}/(n−λ); 1 for λ = 0."""
    if lam == 0:
        return 1.
    if not 0 < lam < n:
        raise DomainError('weak_norm_power', f"need 0 <= lambda < n, got {lam}")
    return sphere_area(n) * ball_volume(n) ** (lam / n - 1) / (n - lam)


#
# Splitting of the soft potential
#
@dataclass(frozen=True)
class RadialPotential:
    """Φ₁ = (|u|^{−λ} − 1)·1{|u| ≤ 1} ('near') or Φ₂ = min(1, |u|^{−λ}) ('far')."""
    part: str
    lam: float
    n: int
    s: float
    norm: float
    exponent: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore'):
            power = r ** (-self.lam)
        if self.part == 'near':
            return np.where(r <= 1, power - 1, 0.)[()]
        return np.where(r <= 1, 1., power)[()]

    def to_dict(self):
        return dict(part=self.part, lam=self.lam, n=self.n, s=self.s, norm=self.norm, exponent=self.exponent)


def near_part_norm(lam, n, s, closed_form=True):
    """‖(|u|^{−λ} − 1)·1{|u| ≤ 1}‖_{Lˢ}.

    For integer s the binomial expansion gives (|S^{n−1}|·Σ_k C(s,k)(−1)^{s−k}/(n−λk))^{1/s};
    otherwise, or with closed_form=False, the radial integral is done by quadrature.
    """
    if lam == 0:
        return 0.
    area = sphere_area(n)
    if closed_form and float(s).is_integer():
        s = int(s)
        total = sum(comb(s, k, exact=True) * (-1) ** (s - k) / (n - lam * k) for k in range(s + 1))
        return (area * total) ** (1 / s)
    value, _ = integrate.quad(lambda r: (r ** (-lam) - 1) ** s * r ** (n - 1), 0, 1, limit=200)
    return (area * value) ** (1 / s)


def potential_split(kernel, s):
    """Split |u|^{−λ} = Φ₁ + Φ₂ with Φ₁ ∈ Lˢ supported in the unit ball and 0 < Φ₂ ≤ 1.

    Returns the pair of RadialPotential descriptors. Needs 1 ≤ s < n/λ.
    """
    lam, n = kernel.lam, kernel.n
    upper = math.inf if lam <= 0 else n / lam
    if not 1 <= s < upper:
        raise DomainError('potential_split', f"need 1 <= s < n/lambda = {upper}, got s = {s}")
    near = RadialPotential('near', lam, n, s, near_part_norm(lam, n, s), exponent=s)
    far = RadialPotential('far', lam, n, s, 1., exponent=math.inf)
    return near, far


def splitting_exponent(kernel):
    """An s in (n/(n−1), n/λ), the midpoint of the admissible interval."""
    lam, n = kernel.lam, kernel.n
    lower = n / (n - 1)
    if lam <= 0:
        return 2 * lower
    return (lower + n / lam) / 2


#
# Lᵖ estimates of gain and loss terms
#
def check_exponents(p, q, r, lam, n):
    """1/p + 1/q + λ/n = 1 + 1/r with p, q, r in [1, ∞]."""
    for name, value in (('p', p), ('q', q), ('r', r)):
        if not value >= 1:
            raise DomainError('q_estimate', f"exponent {name} must be at least 1, got {value}")
    lhs = 1 / p + 1 / q + lam / n
    rhs = 1 + 1 / r
    if abs(lhs - rhs) > EXPONENT_RTOL:
        raise DomainError('q_estimate', f"exponents violate 1/p + 1/q + lambda/n = 1 + 1/r: {lhs} != {rhs}")


def velocity_norm(values, measure, p):
    """Lᵖ norm of a vector of velocity samples with cell measure `measure`.

    Normalized by the largest entry first, so scaling the values by a power
    of two scales the result exactly.
    """
    a = np.abs(np.asarray(values, dtype=float))
    top = float(np.max(a)) if a.size else 0.
    if top == 0:
        return 0.
    if np.isinf(p):
        return top
    return top * float(np.sum((a / top) ** p) * measure) ** (1 / p)


def q_estimate_ratios(F, G, q, p, q_exp, r, a=0.):
    """Ratios of ‖Q₊(f,g)‖_r and ‖Q₋(f,g)‖_r to ‖f‖_p·‖g‖_q times the potential norms.

    F and G are velocity samples at one x-cell. The gain ratio is divided by
    the symmetrized angular weight with exponent a, the loss ratio by the
    angular norm; both by the weak norm of |u|^{−λ}.
    """
    kernel = q.kernel
    check_exponents(p, q_exp, r, kernel.lam, kernel.n)
    F = np.asarray(F, dtype=float)[None, :]
    G = np.asarray(G, dtype=float)[None, :]
    measure = q.grid.hv ** q.grid.n
    denominator = velocity_norm(F, measure, p) * velocity_norm(G, measure, q_exp)
    if denominator == 0:
        return dict(gain=0., loss=0.)
    weak = weak_norm_power(kernel.lam, kernel.n)
    gain_values = q.gain_matrix(F, G)[0]
    loss_values = (F * q.loss_rate_matrix(G))[0]
    gain_ratio = velocity_norm(gain_values, measure, r) / (denominator * gain_weight(kernel.angular, kernel.n, a)
                                                           * weak)
    loss_ratio = velocity_norm(loss_values, measure, r) / (denominator * kernel.norm * weak)
    return dict(gain=gain_ratio, loss=loss_ratio)


def random_velocity_profile(rng, grid, max_bumps=3):
    """Random nonnegative mixture of Gaussians in v, as a function of velocity points."""
    count = rng.integers(1, max_bumps + 1)
    centers = rng.uniform(-grid.Lv / 2, grid.Lv / 2, size=(count, grid.n))
    rates = rng.uniform(0.5, 2., size=count)
    amplitudes = rng.uniform(0.5, 1.5, size=count)

    def profile(v):
        v = np.asarray(v, dtype=float)
        d2 = np.sum((v[:, None, :] - centers[None, :, :]) ** 2, axis=-1)
        return np.exp(-d2 * rates) @ amplitudes

    return profile


def q_estimate_check(q, p, q_exp, r, samples=Q_ESTIMATE_SAMPLES, seed=0, refine=True, a=0.):
    """Gain and loss ratios over `samples` random pairs of velocity profiles.

    The verdict requires finite ratios and, with refine, the largest ratio on
    the grid with doubled Nv to lie within a factor 2 of the coarse one.
    """
    check_exponents(p, q_exp, r, q.kernel.lam, q.kernel.n)
    rng = np.random.default_rng(seed)
    pairs = [(random_velocity_profile(rng, q.grid), random_velocity_profile(rng, q.grid)) for _ in range(samples)]

    def ratios_on(quadrature):
        v = quadrature.grid.v_points
        return [q_estimate_ratios(f(v), g(v), quadrature, p, q_exp, r, a=a) for f, g in pairs]

    coarse = ratios_on(q)
    gain = np.array([c['gain'] for c in coarse])
    loss = np.array([c['loss'] for c in coarse])
    passed = bool(np.all(np.isfinite(gain)) and np.all(np.isfinite(loss)))
    details = dict(p=p, q=q_exp, r=r, a=a, samples=samples, gain_ratios=gain, loss_ratios=loss)
    worst = float(max(np.max(gain), np.max(loss)))

    if refine:
        fine_grid = replace(q.grid, Nv=2 * q.grid.Nv)
        fine = ratios_on(CollisionQuadrature(q.kernel, fine_grid, Nsigma=q.Nsigma, pool=q.pool))
        fine_gain = np.array([c['gain'] for c in fine])
        fine_loss = np.array([c['loss'] for c in fine])
        stability = dict(gain=_stability(np.max(gain), np.max(fine_gain)),
                         loss=_stability(np.max(loss), np.max(fine_loss)))
        passed &= all(1 / Q_ESTIMATE_STABILITY_FACTOR <= value <= Q_ESTIMATE_STABILITY_FACTOR
                      for value in stability.values())
        details.update(refined_gain_ratios=fine_gain, refined_loss_ratios=fine_loss, stability=stability)

    _log.info("Lp estimates (p=%s, q=%s, r=%s): worst ratio %.6g", p, q_exp, r, worst)
    return make_verdict('q_estimates', passed, worst_ratio=worst, **details)


def _stability(coarse, fine):
    if coarse == 0 and fine == 0:
        return 1.
    return float(fine / coarse) if coarse > 0 else math.inf
