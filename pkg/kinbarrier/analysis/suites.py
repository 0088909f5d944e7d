"""
Closed-form and geometry suite: checks against exact values that need no PDE solve.

Entries take a numpy random generator and return a verdict. They reach the
collision geometry through the quadrature module, so patched implementations
are what gets checked.
"""
import logging
import math
import time

import numpy as np

from ..barriers.maxwellian import BarrierBlowUp, MaxwellianBarrier, PhiSups, c1_profile, c2_profile, \
    critical_time, integrate_barrier_odes
from ..barriers.vacuum import k_alpha_beta, vacuum_fixed_point
from ..collision import quadrature
from ..kernel.kernels import AngularKernel, CollisionKernel, angular_integral, sphere_area
from ..phase.grids import MaxwellianSpec
from ..utils import make_verdict
from .estimates import near_part_norm, potential_split, weak_lp_norm, weak_norm_power

_log = logging.getLogger(__name__)

GEOMETRY_SAMPLES = 10 ** 4
GEOMETRY_RTOL = 1e-12
CLOSED_FORM_RTOL = 1e-10
FIXED_POINT_RTOL = 1e-14
PROFILE_RTOL = 1e-6
PROFILE_STEPS = (1e-2, 1e-3)
# quadratic decay gives 100 over one decade of dt
PROFILE_ORDER_RATIO = 50
WEAK_NORM_RTOL = 1e-3
SPLIT_NORM_RTOL = 1e-6

SUITE = []


def suite_entry(func):
    SUITE.append(func)
    return func


def _relative(value, expected):
    return abs(value - expected) / abs(expected) if expected != 0 else abs(value)


def _closed_form_verdict(name, pairs, rtol):
    """Verdict over (label, value, expected) triples with relative tolerance rtol."""
    errors = {label: _relative(value, expected) for label, value, expected in pairs}
    worst_label = max(errors, key=errors.get)
    worst = errors[worst_label]
    return make_verdict(name, worst <= rtol, worst_ratio=worst / rtol, location=worst_label, errors=errors,
                        rtol=rtol)


def _random_unit(rng, size, n):
    sigma = rng.normal(size=(size, n))
    return sigma / np.linalg.norm(sigma, axis=-1, keepdims=True)


@suite_entry
def sphere_areas(rng):
    return _closed_form_verdict('sphere_areas', [('n=2', sphere_area(2), 2 * math.pi),
                                                 ('n=3', sphere_area(3), 4 * math.pi),
                                                 ('n=4', sphere_area(4), 2 * math.pi ** 2)], CLOSED_FORM_RTOL)


@suite_entry
def angular_norms(rng):
    c = float(rng.uniform(0.1, 2.))
    linear = AngularKernel('tabulated', samples=(0., c))
    squared = AngularKernel('power', value=c, power=2.)
    return _closed_form_verdict('angular_norms', [
        ('constant n=2', angular_integral(AngularKernel('constant', value=c), 2), 2 * math.pi * c),
        ('constant n=3', angular_integral(AngularKernel('constant', value=c), 3), 4 * math.pi * c),
        ('power 2 n=2', angular_integral(squared, 2), math.pi * c),
        ('power 2 n=3', angular_integral(squared, 3), 4 * math.pi * c / 3),
        ('linear n=3', angular_integral(linear, 3), 2 * math.pi * c),
    ], CLOSED_FORM_RTOL)


@suite_entry
def post_collision_conservation(rng, samples=GEOMETRY_SAMPLES):
    """Momentum and energy of (v, v_*) are kept by the collision map."""
    errors = {}
    for n in (2, 3):
        v = rng.normal(scale=3., size=(samples, n))
        v_star = rng.normal(scale=3., size=(samples, n))
        vp, vsp = quadrature.post_collision(v, v_star, _random_unit(rng, samples, n))
        scale = np.sum(v * v, axis=-1) + np.sum(v_star * v_star, axis=-1)
        momentum = np.linalg.norm(vp + vsp - v - v_star, axis=-1) / np.sqrt(scale)
        energy = np.abs(np.sum(vp * vp, axis=-1) + np.sum(vsp * vsp, axis=-1) - scale) / scale
        errors[f'momentum n={n}'] = float(np.max(momentum))
        errors[f'energy n={n}'] = float(np.max(energy))
    worst_label = max(errors, key=errors.get)
    worst = errors[worst_label]
    return make_verdict('post_collision_conservation', worst <= GEOMETRY_RTOL, worst_ratio=worst / GEOMETRY_RTOL,
                        location=worst_label, errors=errors, samples=samples)


@suite_entry
def trajectory_identity(rng, samples=GEOMETRY_SAMPLES):
    """|x+τ(v−'v)|² + |x+τ(v−'v_*)|² = |x|² + |x+τu|² at random samples."""
    worst, location = 0., None
    for n in (2, 3):
        x = rng.normal(scale=3., size=(samples, n))
        v = rng.normal(scale=3., size=(samples, n))
        v_star = rng.normal(scale=3., size=(samples, n))
        tau = rng.uniform(0., 10., size=samples)
        residual = quadrature.trajectory_identity_check(x, v, v_star, _random_unit(rng, samples, n), tau)
        ratio = residual / quadrature.trajectory_identity_tolerance(x, v, v_star, tau)
        i = int(np.argmax(ratio))
        if location is None or ratio[i] > worst:
            worst, location = float(ratio[i]), dict(n=n, x=x[i], v=v[i], v_star=v_star[i], tau=float(tau[i]))
    return make_verdict('trajectory_identity', worst <= 1, worst_ratio=worst, location=location, samples=samples)


@suite_entry
def k_scaling(rng):
    """k_{c²α,β} = k_{α,β}/c."""
    kernel = CollisionKernel(lam=0.5, angular=AngularKernel('constant', value=1 / (2 * math.pi)), n=2)
    alpha, beta = float(rng.uniform(0.5, 2.)), float(rng.uniform(0.5, 2.))
    k = k_alpha_beta(alpha, beta, kernel)
    return _closed_form_verdict('k_scaling', [(f'c={c}', k_alpha_beta(c ** 2 * alpha, beta, kernel), k / c)
                                              for c in (0.5, 2., 3., 10.)], GEOMETRY_RTOL)


@suite_entry
def fixed_point_algebra(rng, sweep=100):
    """C = 1/4 for (k, ‖f₀‖) = (1, 3/16) and ‖f₀‖ + kC² = C along a sweep up to the threshold."""
    errors = {'k=1, f0=3/16': _relative(vacuum_fixed_point(3 / 16, 1.), 0.25)}
    worst_sweep = 0.
    for k in (0.1, 1., 37.):
        for f0_norm in np.linspace(0, 1 / (4 * k), sweep):
            C = vacuum_fixed_point(f0_norm, k)
            worst_sweep = max(worst_sweep, abs(f0_norm + k * C ** 2 - C) / max(C, np.finfo(float).tiny))
    errors['quadratic identity'] = worst_sweep
    worst_label = max(errors, key=errors.get)
    worst = errors[worst_label]
    return make_verdict('fixed_point_algebra', worst <= FIXED_POINT_RTOL, worst_ratio=worst / FIXED_POINT_RTOL,
                        location=worst_label, errors=errors)


def _sample_barrier(phi, C1=1., C2=2.):
    M = MaxwellianSpec(1.5, 1., 1., shift=1.)
    M1 = MaxwellianSpec(C1, 1.2, 1.2, shift=1.)
    M2 = MaxwellianSpec(C2, 0.8, 0.8, shift=1.)
    return MaxwellianBarrier(M=M, M1=M1, M2=M2, eps=1., lam=0.5, n=2, phi=phi)


@suite_entry
def barrier_product(rng):
    """C₁(t)·C₂(t) = C₁(1)·C₂(1)."""
    barrier = _sample_barrier(PhiSups(phi1=0.1, phi2=0.1, diff=0.002, sum=0.2))
    times = np.sort(rng.uniform(1., 100., size=50))
    product = c1_profile(times, barrier) * c2_profile(times, barrier)
    worst = float(np.max(np.abs(product / (barrier.M1.C * barrier.M2.C) - 1)))
    return make_verdict('barrier_product', worst <= CLOSED_FORM_RTOL, worst_ratio=worst / CLOSED_FORM_RTOL,
                        location=None, worst_error=worst)


def _profile_residual(barrier, times, dt):
    """max |C₂′ − RHS| over times, C₂′ by central differences with step dt."""
    derivative = (c2_profile(times + dt, barrier) - c2_profile(times - dt, barrier)) / (2 * dt)
    rhs = np.array([barrier.rhs(t, (c1_profile(t, barrier), c2_profile(t, barrier)))[1] for t in times])
    return float(np.max(np.abs(derivative - rhs)))


@suite_entry
def c2_profile_ode(rng):
    """Closed-form C₂ against DOP853 integration and against the ODE by central differences."""
    barrier = _sample_barrier(PhiSups(phi1=0.1, phi2=0.1, diff=0.002, sum=0.2))
    times = np.logspace(0, 2, 41)
    C1, C2 = integrate_barrier_odes(barrier, times)
    agreement = float(max(np.max(np.abs(c2_profile(times, barrier) / C2 - 1)),
                          np.max(np.abs(c1_profile(times, barrier) / C1 - 1))))
    inner = times[(times > 1.1) & (times <= 10.)]
    residuals = {dt: _profile_residual(barrier, inner, dt) for dt in PROFILE_STEPS}
    coarse, fine = (residuals[dt] for dt in PROFILE_STEPS)
    ratio = coarse / fine if fine > 0 else math.inf
    passed = agreement <= PROFILE_RTOL and ratio >= PROFILE_ORDER_RATIO
    return make_verdict('c2_profile_ode', passed, worst_ratio=agreement / PROFILE_RTOL, location=None,
                        agreement=agreement, ode_residuals={str(dt): r for dt, r in residuals.items()},
                        residual_ratio=ratio)


@suite_entry
def equal_barriers(rng):
    """M₁ = M₂ gives constant amplitudes, exactly."""
    M = MaxwellianSpec(1.5, 1., 1., shift=1.)
    barrier = MaxwellianBarrier(M=M, M1=M, M2=M, eps=0.1, lam=0.5, n=2, phi=PhiSups(0.1, 0.1, 0., 0.2))
    times = np.logspace(0, 3, 25)
    values = c2_profile(times, barrier)
    passed = bool(np.all(values == M.C))
    return make_verdict('equal_barriers', passed, worst_ratio=None, location=None,
                        worst_error=float(np.max(np.abs(values - M.C))))


@suite_entry
def barrier_blow_up(rng):
    """Amplitudes violating the boundedness condition are refused with the critical time."""
    barrier = _sample_barrier(PhiSups(phi1=1., phi2=1., diff=0.02, sum=2.))
    t_star = critical_time(barrier)
    try:
        c2_profile(2., barrier)
    except BarrierBlowUp as exc:
        return make_verdict('barrier_blow_up', math.isclose(exc.critical_t, t_star), worst_ratio=None,
                            location=None, margin=barrier.margin, critical_t=t_star)
    return make_verdict('barrier_blow_up', False, worst_ratio=None, location=None, margin=barrier.margin,
                        critical_t=t_star)


@suite_entry
def potential_split_identity(rng, samples=100):
    """Φ₁ + Φ₂ = |u|^{−λ} at random radii, and the closed-form ‖Φ₁‖_{L²} = √(π/3) for n = 2, λ = 1/2."""
    kernel = CollisionKernel(lam=0.5, angular=AngularKernel('constant', value=1 / (2 * math.pi)), n=2)
    near, far = potential_split(kernel, 2)
    r = np.linalg.norm(rng.normal(size=(samples, 2)), axis=-1)
    identity = float(np.max(np.abs(near(r) + far(r) - r ** (-0.5)) / r ** (-0.5)))
    errors = dict(identity=identity,
                  closed_form=_relative(near.norm, math.sqrt(math.pi / 3)),
                  quadrature=_relative(near_part_norm(0.5, 2, 2, closed_form=False), near.norm))
    passed = identity <= GEOMETRY_RTOL and errors['closed_form'] <= CLOSED_FORM_RTOL and \
        errors['quadrature'] <= SPLIT_NORM_RTOL
    return make_verdict('potential_split_identity', passed, worst_ratio=None, location=None, errors=errors)


@suite_entry
def weak_norm_closed_form(rng):
    """Weak L² norm of |u|^{−1} in two dimensions: 2√π."""
    expected = 2 * math.sqrt(math.pi)
    numerical = weak_lp_norm(lambda r: 1 / r, 2, 2)
    return _closed_form_verdict('weak_norm_closed_form', [('closed form', weak_norm_power(1., 2), expected),
                                                          ('sup over balls', numerical, expected)], WEAK_NORM_RTOL)


def run_suite(seed=0, names=None):
    """Run the suite entries (all, or those in names) and return their verdicts.

    An entry that raises is reported as failed with the error message.
    """
    rng = np.random.default_rng(seed)
    verdicts = []
    for entry in SUITE:
        if names is not None and entry.__name__ not in names:
            continue
        start_time = time.perf_counter()
        try:
            verdict = entry(rng)
        except Exception as exc:
            _log.exception("Suite entry '%s' raised.", entry.__name__)
            verdict = make_verdict(entry.__name__, False, error=str(exc))
        verdict['elapsed'] = time.perf_counter() - start_time
        _log.info("Suite entry '%s': %s", entry.__name__, "pass" if verdict['pass'] else "FAIL")
        verdicts.append(verdict)
    return verdicts
