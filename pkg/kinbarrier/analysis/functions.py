"""
Implementations of verification checks on solver runs.

The first argument is a random generator ("rng"), a KSRun ("run") or a pair
of KSRun instances ("pair"), the second the CollisionQuadrature the runs were
computed with. Every check returns a verdict as built by make_verdict; if the
verdict carries a 'trace', it is a mapping of equal-length columns written
as CSV next to the verdict.
"""
import logging
import math

import numpy as np

from ..barriers.vacuum import VacuumBarrier, k_alpha_beta
from ..collision.quadrature import collision_moments
from ..phase.fields import DistributionField, lp, transport, velocity_lp, weighted_sup
from ..utils import DomainError, make_verdict
from .estimates import DifferenceOperator, finite_difference_matrix, potential_split, q_estimate_check, \
    splitting_exponent, weak_norm_power
from .registry import CheckRegistry

_log = logging.getLogger(__name__)

# relative size of the roundoff floor added to difference envelopes
NOISE_RTOL = 1e-8
LGAMMA_RTOL = 1e-8
GROWTH_FACTOR = 1.1
INVARIANTS_TOLERANCE = 0.25
INVARIANT_SLICES = 3


def register_implementation(flavor='verdict', name=None):
    """Decorator for marking a function as implementation of a check.

    :param flavor: 'verdict' or 'trace', the latter if the check emits a CSV trace
    :param name: name used in configuration files, default is the function name
    """

    def register_decorator(func):
        """
        :param func: function to be registered, first arg must be "rng", "run" or "pair"
        :return: decorated function
        """
        registry = CheckRegistry()  # singleton
        registry.add_implementation(name or func.__name__, flavor, func)
        return func

    return register_decorator


def _decay_exponent(kernel):
    m = kernel.n - kernel.lam
    if not m > 1:
        raise DomainError('gronwall envelope', f"need n - lambda > 1, got {m}")
    return m


def _lgamma_norms(lab, grid, lam):
    """sup over x-cells of ‖f(t, x, ·)‖_{L^γ_v}, γ = n/(n−λ), at every time."""
    gamma = grid.n / (grid.n - lam)
    return np.max(velocity_lp(lab, grid, gamma), axis=-1)


def _fitted_constant(norms, t, m):
    return float(np.max(norms * (1 + t) ** m))


def _gronwall_rate(kernel, c_gamma):
    """K = 2‖b‖·‖|u|^{−λ}‖_{weak}·C_γ, gain plus loss with the measured L^γ_v decay constant."""
    return 2 * kernel.norm * weak_norm_power(kernel.lam, kernel.n) * c_gamma


def _worst(ratios, t, **where):
    i = int(np.argmax(ratios))
    return float(ratios[i]), dict(t=float(t[i]), **where)


def _ratios(values, envelope):
    return np.where(envelope > 0, values / np.where(envelope > 0, envelope, 1.), 0.)


@register_implementation(flavor='trace')
def gradient_gronwall(run, q, p=2, steps=(1, 2)):
    """‖D_{h,e_i} f‖_{Lᵖ}(t) ≤ ‖D f₀‖_{Lᵖ}·exp(K(1 − (1+t)^{1−m})/(m−1)), m = n − λ.

    The norms are taken in the trajectory frame, where the position
    difference commutes with the transform. Only the step h = hx enters the
    verdict; larger multiples of hx are traced to probe convergence in h.
    """
    if not 1 < p < math.inf:
        raise DomainError('gradient_gronwall', f"need 1 < p < inf, got {p}")
    kernel = q.kernel
    m = _decay_exponent(kernel)
    grid = run.grid
    t = run.lab_times
    values = run.solution.values
    c_gamma = _fitted_constant(_lgamma_norms(run.lab_matrices(), grid, kernel.lam), t, m)
    K = _gronwall_rate(kernel, c_gamma)
    growth = np.exp(K * (1 - (1 + t) ** (1 - m)) / (m - 1))
    floor = NOISE_RTOL * float(np.max(lp(values, grid, p))) / grid.hx

    trace = dict(t=t, growth=growth)
    worst, location = 0., None
    for step in steps:
        for axis in range(grid.n):
            d = DifferenceOperator.along_axis('position', axis, grid.n, step * grid.hx)
            norms = lp(finite_difference_matrix(values, grid, d), grid, p)
            envelope = norms[0] * growth + floor
            trace[f'D{axis}_h{step}'] = norms
            trace[f'envelope{axis}_h{step}'] = envelope
            if step == 1:
                ratio, where = _worst(_ratios(norms, envelope), t, direction=axis)
                if location is None or ratio > worst:
                    worst, location = ratio, where

    _log.info("Gronwall gradient check (p=%s): worst ratio %.6g, K=%.6g", p, worst, K)
    return make_verdict('gradient_gronwall', worst <= 1, worst_ratio=worst, location=location, p=p, K=K,
                        c_gamma=c_gamma, gamma=grid.n / (grid.n - kernel.lam), limit_factor=math.exp(K / (m - 1)),
                        noise_floor=floor, trace=trace)


@register_implementation(flavor='trace')
def velocity_gradient(run, q, p=2):
    """‖D_{h,e_i}^v f‖_{Lᵖ}(t) ≤ C·(‖D^v f₀‖_{Lᵖ} + t·‖D^x f₀‖_{Lᵖ}), C = exp(K/(m−1)).

    Velocity differences do not commute with the trajectory transform, so
    the norms are taken of the lab-frame solution.
    """
    kernel = q.kernel
    m = _decay_exponent(kernel)
    grid = run.grid
    t = run.lab_times
    lab = run.lab_matrices()
    c_gamma = _fitted_constant(_lgamma_norms(lab, grid, kernel.lam), t, m)
    K = _gronwall_rate(kernel, c_gamma)
    C = math.exp(K / (m - 1))
    floor = NOISE_RTOL * float(np.max(lp(lab, grid, p))) / min(grid.hx, grid.hv)

    trace = dict(t=t)
    worst, location = 0., None
    for axis in range(grid.n):
        dv = DifferenceOperator.along_axis('velocity', axis, grid.n, grid.hv)
        dx = DifferenceOperator.along_axis('position', axis, grid.n, grid.hx)
        v_norms = lp(finite_difference_matrix(lab, grid, dv), grid, p)
        x_initial = float(lp(finite_difference_matrix(lab[0], grid, dx), grid, p))
        bound = C * (v_norms[0] + t * x_initial) + floor
        trace[f'Dv{axis}'] = v_norms
        trace[f'bound{axis}'] = bound
        ratio, where = _worst(_ratios(v_norms, bound), t, direction=axis)
        if location is None or ratio > worst:
            worst, location = ratio, where

    _log.info("Velocity gradient check (p=%s): worst ratio %.6g, C=%.6g", p, worst, C)
    return make_verdict('velocity_gradient', worst <= 1, worst_ratio=worst, location=location, p=p, K=K, C=C,
                        noise_floor=floor, trace=trace)


def lgamma_barrier_constant(barrier, m, gamma, times):
    """A·(π/γ)^{m/2}·(1/α + 1/β)^{m/2} with A the largest upper barrier amplitude; ∞ for β = 0."""
    alpha, beta = barrier.envelope_rates
    if beta <= 0:
        return math.inf
    amplitude = max(float(barrier.amplitude(ti)) for ti in times)
    return amplitude * (math.pi / gamma) ** (m / 2) * (1 / alpha + 1 / beta) ** (m / 2)


def _fitted_rate(norms, t):
    """Decay exponent of a power law fitted to the second half of the run, None without decay data."""
    late = (t >= t[-1] / 2) & (norms > 0)
    if t[-1] <= 0 or np.count_nonzero(late) < 2:
        return None
    return float(-np.polyfit(np.log1p(t[late]), np.log(norms[late]), 1)[0])


@register_implementation(flavor='trace')
def lgamma_decay(run, q, rtol=LGAMMA_RTOL):
    """sup_x ‖f(t, x, ·)‖_{L^γ_v} ≤ C/(1+t)^{n−λ}, γ = n/(n−λ).

    The fitted constant of the solution is compared with the closed-form
    constant implied by the barrier envelope, or with the constant fitted to
    the upper barrier on the grid if the envelope has infinite mass. The
    decay exponent fitted to the second half of the run is reported next to
    the predicted n − λ; short runs are not yet asymptotic, so it does not
    enter the verdict.
    """
    kernel = q.kernel
    grid = run.grid
    m = grid.n - kernel.lam
    gamma = grid.n / m
    t = run.lab_times
    norms = _lgamma_norms(run.lab_matrices(), grid, kernel.lam)
    fitted = _fitted_constant(norms, t, m)

    barrier = run.barrier
    upper = np.stack([np.maximum(transport(barrier.upper(grid, ti).matrix, grid, -ti), 0.)
                      for ti in run.solution.times])
    barrier_norms = _lgamma_norms(upper, grid, kernel.lam)
    grid_constant = _fitted_constant(barrier_norms, t, m)
    analytic = lgamma_barrier_constant(barrier, m, gamma, run.solution.times)
    reference = analytic if math.isfinite(analytic) else grid_constant

    ratio = fitted / reference if reference > 0 else 0.
    rate = _fitted_rate(norms, t)
    location = dict(t=float(t[int(np.argmax(norms * (1 + t) ** m))]))
    _log.info("L^gamma decay: fitted C=%.6g, barrier C=%.6g, fitted rate %s, predicted rate %.6g", fitted,
              reference, rate, m)
    return make_verdict('lgamma_decay', ratio <= 1 + rtol, worst_ratio=ratio, location=location, gamma=gamma,
                        fitted_constant=fitted, barrier_constant=reference, analytic_constant=analytic,
                        grid_barrier_constant=grid_constant, fitted_rate=rate, predicted_rate=m,
                        trace=dict(t=t, norm=norms, barrier_norm=barrier_norms,
                                   envelope=reference / (1 + t) ** m))


@register_implementation()
def q_estimates(rng, q, p=2, q_exponent=2, r=4, samples=10, refine=True, a=0.):
    """Ratios of the gain and loss Lᵖ estimates over random velocity profiles."""
    return q_estimate_check(q, p, q_exponent, r, samples=samples, seed=int(rng.integers(2 ** 31)), refine=refine,
                            a=a)


def _no_growth(ratios, factor):
    half = len(ratios) // 2
    first = float(np.max(ratios[:half + 1]))
    second = float(np.max(ratios[half + 1:])) if len(ratios) > half + 1 else 0.
    return second <= factor * first, first, second


@register_implementation(flavor='trace')
def stability(pair, q, p_values=(1, 2, math.inf), growth_factor=GROWTH_FACTOR):
    """‖f − g‖(t)/‖f₀ − g₀‖ in Lᵖ and in the weighted sup norm of the traveling envelope.

    The constant is not known, so the verdict monitors that the ratios do not
    grow: the max over the second half of the run must stay below
    growth_factor times the max over the first half.
    """
    run_f, run_g = pair
    if run_f.grid != run_g.grid or not np.array_equal(run_f.solution.times, run_g.solution.times):
        raise DomainError('stability', "runs live on different grids or time grids")
    if type(run_f.barrier) is not type(run_g.barrier):
        raise DomainError('stability', "runs use different barrier regimes")
    grid = run_f.grid
    kernel = q.kernel
    t = run_f.lab_times
    diff = run_f.solution.values - run_g.solution.values

    series = {f'L{p}': lp(diff, grid, p) for p in p_values}
    series['weighted'] = weighted_sup(diff, grid, *run_f.barrier.envelope_rates)

    trace = dict(t=t)
    passed = True
    worst, location = 0., None
    monitors = {}
    for name, norms in series.items():
        if norms[0] > 0:
            ratios = norms / norms[0]
        else:
            ratios = np.where(norms > 0, math.inf, 0.)
        ok, first, second = _no_growth(ratios, growth_factor)
        passed &= ok
        monitors[name] = dict(first_half=first, second_half=second, passed=ok)
        trace[name] = norms
        trace[f'{name}_ratio'] = ratios
        ratio, where = _worst(ratios, t, norm=name)
        if location is None or ratio > worst:
            worst, location = ratio, where

    s = splitting_exponent(kernel)
    near, far = potential_split(kernel, s)
    _log.info("Stability: worst ratio %.6g, %s", worst, "no growth" if passed else "GROWTH")
    return make_verdict('stability', passed, worst_ratio=worst, location=location, monitors=monitors,
                        growth_factor=growth_factor, identical=bool(not np.any(diff)),
                        splitting=dict(s=s, s_conjugate=s / (s - 1), gronwall_exponent=grid.n * (1 - 1 / s),
                                       near=near.to_dict(), far=far.to_dict()),
                        trace=trace)


@register_implementation(flavor='trace')
def weighted_gradient(run, q):
    """‖(D_{h,e_i} f)^#(t)‖_{α,β} ≤ 2‖D f₀‖_{α,β}/(2 − √2) for small near-vacuum data.

    Applies when ‖f₀‖_{2α,β} ≤ 3/(16 k_{2α,β}); otherwise the check is skipped.
    """
    barrier = run.barrier
    if not isinstance(barrier, VacuumBarrier):
        _log.warning("Weighted gradient check skipped: needs a near-vacuum run.")
        return make_verdict('weighted_gradient', True, skipped=True, reason="needs a near-vacuum run")
    grid = run.grid
    alpha, beta = barrier.alpha, barrier.beta
    k_double = k_alpha_beta(2 * alpha, beta, q.kernel)
    f0_norm = float(weighted_sup(run.f0.matrix, grid, 2 * alpha, beta))
    threshold = 3 / (16 * k_double)
    details = dict(f0_norm=f0_norm, threshold=threshold, k_ratio=barrier.k_ab / k_double)
    if f0_norm > threshold:
        _log.warning("Weighted gradient check skipped: ‖f0‖_(2alpha,beta) = %.6g exceeds %.6g.", f0_norm,
                     threshold)
        return make_verdict('weighted_gradient', True, skipped=True,
                            reason="‖f0‖_(2alpha,beta) exceeds 3/(16 k_(2alpha,beta))", **details)

    t = run.lab_times
    values = run.solution.values
    floor = NOISE_RTOL * float(np.max(weighted_sup(values, grid, alpha, beta))) / grid.hx
    trace = dict(t=t)
    worst, location = 0., None
    for axis in range(grid.n):
        d = DifferenceOperator.along_axis('position', axis, grid.n, grid.hx)
        norms = weighted_sup(finite_difference_matrix(values, grid, d), grid, alpha, beta)
        bound = 2 * norms[0] / (2 - math.sqrt(2)) + floor
        trace[f'D{axis}'] = norms
        trace[f'bound{axis}'] = np.full_like(norms, bound)
        ratio, where = _worst(_ratios(norms, np.full_like(norms, bound)), t, direction=axis)
        if location is None or ratio > worst:
            worst, location = ratio, where

    _log.info("Weighted gradient check: worst ratio %.6g", worst)
    return make_verdict('weighted_gradient', worst <= 1, worst_ratio=worst, location=location, skipped=False,
                        noise_floor=floor, trace=trace, **details)


@register_implementation(flavor='trace')
def collision_invariants(run, q, slices=INVARIANT_SLICES, tolerance=INVARIANTS_TOLERANCE):
    """Weak-form moment residuals of Q(f, f) against 1, v and |v|² at `slices` times of the run."""
    grid = run.grid
    lab = run.lab_matrices()
    indices = np.unique(np.linspace(0, len(lab) - 1, slices).round().astype(int))
    trace = dict(t=[], residual=[])
    worst, location = 0., None
    for k in indices:
        field = DistributionField.from_matrix(grid, run.lab_times[k], lab[k], 'lab')
        moments = collision_moments(q, field)
        trace['t'].append(float(run.lab_times[k]))
        trace['residual'].append(moments['residual'])
        for name, value in moments['relative'].items():
            trace.setdefault(name, []).append(value)
        if location is None or moments['residual'] > worst:
            worst = moments['residual']
            location = dict(t=float(run.lab_times[k]),
                            invariant=max(moments['relative'], key=moments['relative'].get))

    _log.info("Collision invariants: worst relative residual %.3g", worst)
    return make_verdict('collision_invariants', worst <= tolerance, worst_ratio=worst / tolerance,
                        location=location, tolerance=tolerance, worst_residual=worst, trace=trace)
