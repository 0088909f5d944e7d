import math

import numpy as np
import pytest

from kinbarrier.analysis.functions import _fitted_rate, collision_invariants, gradient_gronwall, \
    lgamma_barrier_constant, lgamma_decay, q_estimates, stability, velocity_gradient, weighted_gradient
from kinbarrier.analysis.registry import CheckRegistry
from kinbarrier.barriers.maxwellian import MaxwellianBarrier, PhiSups
from kinbarrier.barriers.vacuum import VacuumBarrier, k_alpha_beta
from kinbarrier.collision.quadrature import CollisionQuadrature
from kinbarrier.kernel.kernels import AngularKernel, CollisionKernel
from kinbarrier.phase.fields import DistributionField, FieldSeries, sample_maxwellian
from kinbarrier.phase.grids import MaxwellianSpec, PhaseGrid
from kinbarrier.solver.iteration import IterationReport, KSRun, barrier_series, ks_solve
from kinbarrier.utils import DomainError


###############################################################################
# Helpers for doing tests
###############################################################################

def _kernel():
    return CollisionKernel(lam=0.5, angular=AngularKernel('constant', value=1 / (2 * math.pi)), n=2,
                           mode='near_vacuum')


def _initial_datum(grid, kernel, factor=1.):
    k = k_alpha_beta(1., 1., kernel)
    return sample_maxwellian([MaxwellianSpec(factor * 0.8 / (4 * k), 2., 1.)], grid, frame='trajectory')


def _solve(f0, kernel, q):
    barrier = VacuumBarrier.build(f0, kernel, 1., 1.)
    return ks_solve(f0, barrier, T=2., Nt=8, q=q, tol=1e-8)


def _stationary_run(barrier, f0, times, values=None):
    """KSRun whose solution is the upper barrier (or the given values)."""
    lower, upper = barrier_series(barrier, f0.grid, times)
    solution = upper if values is None else FieldSeries(f0.grid, times, values)
    return KSRun(solution=solution, lower=lower, upper=upper, f0=f0, barrier=barrier,
                 report=IterationReport(time_offset=float(times[0])))


@pytest.fixture(scope='module')
def setup():
    grid = PhaseGrid(n=2, Lx=3., Lv=3., Nx=6, Nv=6)
    kernel = _kernel()
    return grid, kernel, CollisionQuadrature(kernel, grid, Nsigma=8)


@pytest.fixture(scope='module')
def run(setup):
    grid, kernel, q = setup
    return _solve(_initial_datum(grid, kernel), kernel, q)


@pytest.fixture(scope='module')
def perturbed_run(setup):
    grid, kernel, q = setup
    return _solve(_initial_datum(grid, kernel, factor=1 + 1e-3), kernel, q)


@pytest.fixture(scope='module')
def zero_run(setup):
    grid, kernel, q = setup
    f0 = DistributionField.zeros(grid, frame='trajectory')
    barrier = VacuumBarrier.build(DistributionField.zeros(grid), kernel, 1., 1.)
    return ks_solve(f0, barrier, T=2., Nt=8, q=q)


###############################################################################
# Tests
###############################################################################

def test_gradient_gronwall(run, setup):
    _, _, q = setup
    verdict = gradient_gronwall(run, q, p=2)
    trace = verdict['trace']
    assert verdict['name'] == 'gradient_gronwall'
    assert verdict['K'] > 0 and verdict['c_gamma'] > 0
    assert verdict['gamma'] == pytest.approx(4 / 3)
    assert verdict['limit_factor'] == pytest.approx(math.exp(verdict['K'] / 0.5))
    assert trace['growth'][0] == 1
    assert np.all(np.diff(trace['growth']) > 0)
    assert np.all(trace['growth'] < verdict['limit_factor'])
    assert set(trace) >= {'t', 'D0_h1', 'D1_h1', 'D0_h2', 'envelope0_h1'}
    assert all(len(column) == 9 for column in trace.values())
    # the envelope starts at the measured norm
    assert trace['D0_h1'][0] <= trace['envelope0_h1'][0]
    assert verdict['worst_ratio'] > 0
    assert verdict['location']['direction'] in (0, 1)


def test_gradient_gronwall_exponent_range(run, setup):
    _, _, q = setup
    for p in (1, math.inf):
        with pytest.raises(DomainError):
            gradient_gronwall(run, q, p=p)


def test_checks_on_zero_datum(zero_run, setup):
    _, _, q = setup
    for check in (gradient_gronwall, velocity_gradient, lgamma_decay):
        verdict = check(zero_run, q)
        assert verdict['pass'], verdict['name']
        assert verdict['worst_ratio'] == 0


def test_velocity_gradient(run, setup):
    _, _, q = setup
    verdict = velocity_gradient(run, q)
    trace = verdict['trace']
    assert verdict['C'] == pytest.approx(math.exp(verdict['K'] / 0.5))
    assert verdict['C'] >= 1
    for axis in (0, 1):
        # t = 0: the bound is C times the initial norm
        assert trace[f'Dv{axis}'][0] <= trace[f'bound{axis}'][0]
        assert np.all(np.diff(trace[f'bound{axis}']) >= 0)


def test_lgamma_decay(run, setup):
    _, _, q = setup
    verdict = lgamma_decay(run, q)
    assert verdict['pass']
    assert verdict['fitted_constant'] <= verdict['grid_barrier_constant'] * (1 + 1e-8)
    # the closed-form envelope constant is the reference
    assert verdict['barrier_constant'] == verdict['analytic_constant']
    assert verdict['grid_barrier_constant'] <= verdict['analytic_constant']
    assert verdict['predicted_rate'] == 1.5
    assert verdict['fitted_rate'] > 0
    assert verdict['gamma'] == pytest.approx(4 / 3)
    barrier = run.barrier
    assert verdict['analytic_constant'] == pytest.approx(barrier.C * (3 * math.pi / 4) ** 0.75 * 2 ** 0.75)
    trace = verdict['trace']
    assert np.all(np.diff(trace['envelope']) < 0)


def test_lgamma_decay_is_linear_in_amplitude(setup):
    grid, kernel, q = setup
    f0 = _initial_datum(grid, kernel)
    barrier = VacuumBarrier.build(f0, kernel, 1., 1.)
    times = np.linspace(0., 2., 5)
    on_barrier = lgamma_decay(_stationary_run(barrier, f0, times), q)
    assert on_barrier['fitted_constant'] == on_barrier['grid_barrier_constant']
    assert on_barrier['pass']

    upper = barrier_series(barrier, grid, times)[1]
    doubled = lgamma_decay(_stationary_run(barrier, f0, times, 2 * upper.values), q)
    assert doubled['fitted_constant'] == pytest.approx(2 * on_barrier['fitted_constant'], rel=1e-12)
    assert doubled['worst_ratio'] == pytest.approx(2 * on_barrier['worst_ratio'], rel=1e-12)
    assert doubled['barrier_constant'] == on_barrier['barrier_constant']

    # well above the barrier envelope
    above = lgamma_decay(_stationary_run(barrier, f0, times, 4 * upper.values), q)
    assert not above['pass']
    assert above['worst_ratio'] > 1


def test_fitted_rate_of_power_law():
    t = np.linspace(0., 4., 9)
    assert _fitted_rate(3. * (1 + t) ** -1.5, t) == pytest.approx(1.5, rel=1e-12)
    assert _fitted_rate(np.zeros_like(t), t) is None
    assert _fitted_rate(np.ones(1), np.zeros(1)) is None


def test_lgamma_barrier_constant_infinite_mass():
    M = MaxwellianSpec(1., 1., 0.)
    barrier = MaxwellianBarrier(M=M, M1=M, M2=M, eps=0.1, lam=0., n=2, phi=PhiSups(1., 1., 0., 2.))
    assert lgamma_barrier_constant(barrier, 2, 1, [1., 2.]) == math.inf


def test_stability_identical_runs(run, setup):
    _, _, q = setup
    verdict = stability((run, run), q)
    assert verdict['pass']
    assert verdict['identical']
    assert verdict['worst_ratio'] == 0
    for name in ('L1', 'L2', 'Linf', 'weighted'):
        assert np.all(verdict['trace'][name] == 0)


def test_stability_perturbed_runs(run, perturbed_run, setup):
    _, _, q = setup
    verdict = stability((run, perturbed_run), q, growth_factor=1.5)
    assert not verdict['identical']
    for name in ('L1', 'L2', 'Linf', 'weighted'):
        assert verdict['trace'][f'{name}_ratio'][0] == 1
        assert verdict['monitors'][name]['passed'], (name, verdict['monitors'][name])
    assert verdict['pass']
    splitting = verdict['splitting']
    assert splitting['s'] == 3
    assert splitting['gronwall_exponent'] > 1
    assert splitting['near']['norm'] > 0


def test_stability_incompatible_runs(run, setup):
    grid, kernel, q = setup
    other_grid = PhaseGrid(n=2, Lx=3., Lv=3., Nx=4, Nv=4)
    other = _solve(_initial_datum(other_grid, kernel), kernel, CollisionQuadrature(kernel, other_grid, Nsigma=8))
    with pytest.raises(DomainError):
        stability((run, other), q)


def test_weighted_gradient(run, setup):
    _, _, q = setup
    verdict = weighted_gradient(run, q)
    assert not verdict['skipped']
    assert verdict['f0_norm'] <= verdict['threshold']
    assert verdict['k_ratio'] == pytest.approx(math.sqrt(2), rel=1e-12)
    assert verdict['pass']
    assert verdict['worst_ratio'] <= 1


def test_weighted_gradient_skipped(setup):
    grid, kernel, q = setup
    k = k_alpha_beta(1., 1., kernel)
    f0 = sample_maxwellian([MaxwellianSpec(0.8 / (4 * k), 1.2, 1.)], grid, frame='trajectory')
    barrier = VacuumBarrier.build(f0, kernel, 1., 1.)
    verdict = weighted_gradient(_stationary_run(barrier, f0, np.linspace(0., 1., 3)), q)
    assert verdict['skipped'] and verdict['pass']
    assert verdict['f0_norm'] > verdict['threshold']


def test_weighted_gradient_needs_near_vacuum(setup):
    grid, _, q = setup
    M = MaxwellianSpec(1., 1., 1., shift=1.)
    barrier = MaxwellianBarrier(M=M, M1=M, M2=M, eps=0.1, lam=0.5, n=2, phi=PhiSups(0.1, 0.1, 0., 0.2))
    f0 = sample_maxwellian([M], grid, t=1., frame='trajectory')
    verdict = weighted_gradient(_stationary_run(barrier, f0, np.linspace(1., 2., 3)), q)
    assert verdict['skipped'] and verdict['pass']
    assert 'near-vacuum' in verdict['reason']


def test_collision_invariants(run, setup):
    _, _, q = setup
    verdict = collision_invariants(run, q, tolerance=1.)
    assert verdict['pass']
    trace = verdict['trace']
    assert trace['t'] == [0., 1., 2.]
    assert all(0 <= r <= 1 for r in trace['residual'])
    assert set(trace) == {'t', 'residual', 'mass', 'momentum_0', 'momentum_1', 'energy'}
    assert verdict['location']['invariant'] in ('mass', 'momentum_0', 'momentum_1', 'energy')


def test_q_estimates_through_registry(setup):
    _, _, q = setup
    func = CheckRegistry().get_implementation('q_estimates', 'rng')
    assert func is q_estimates
    verdict = func(np.random.default_rng(0), q, samples=2, refine=False)
    assert verdict['pass']
    assert verdict['r'] == 4


@pytest.mark.slow
def test_regularity_on_acceptance_run():
    grid = PhaseGrid(n=2, Lx=4., Lv=4., Nx=12, Nv=12)
    kernel = _kernel()
    q = CollisionQuadrature(kernel, grid, Nsigma=16)
    f0 = _initial_datum(grid, kernel)
    run = ks_solve(f0, VacuumBarrier.build(f0, kernel, 1., 1.), T=5., Nt=64, q=q)
    assert gradient_gronwall(run, q, p=2)['pass']
    assert velocity_gradient(run, q, p=2)['pass']
    assert weighted_gradient(run, q)['pass']
    assert lgamma_decay(run, q)['pass']

    g0 = _initial_datum(grid, kernel, factor=1 + 1e-3)
    other = ks_solve(g0, VacuumBarrier.build(g0, kernel, 1., 1.), T=5., Nt=64, q=q)
    assert stability((run, other), q)['pass']
