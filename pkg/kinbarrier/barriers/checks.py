"""
Numerical certificates for the barrier constructions.
"""
import logging
import math
from dataclasses import replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..collision.quadrature import gain_at, loss_rate_at
from ..phase.fields import weighted_sup
from ..phase.grids import MaxwellianSpec, maxwellian_eval
from ..solver.iteration import barrier_series, linear_step
from ..utils import DomainError, make_verdict
from .maxwellian import c1_profile, c2_profile, maxwellian_distance
from .vacuum import BarrierException, VacuumBarrier, k_alpha_beta

_log = logging.getLogger(__name__)

GAUSSIAN_CUTOFF = 1e-12
GAIN_INTEGRAL_RTOL = 1e-3
GAUSS_NODES_PER_PANEL = 6
SANDWICH_RTOL = 1e-12
BEGINNING_ORDER_RTOL = 1e-10
DIFFERENTIAL_RTOL = 5e-2
POINTS_PER_WIDTH = 8


class InequalityViolation(BarrierException):
    """A barrier inequality fails beyond its quadrature tolerance."""

    def __init__(self, verdict):
        self.verdict = verdict

    def __str__(self):
        return f"Inequality '{self.verdict['name']}' violated: worst ratio {self.verdict['worst_ratio']:.6g} " \
               f"at {self.verdict['location']}."


def sample_cells(grid, count, seed=0):
    """`count` distinct random (x, v) cell centers of the grid, as two arrays of shape (count, n)."""
    rng = np.random.default_rng(seed)
    cells = rng.choice(grid.nx_cells * grid.nv_cells, size=min(count, grid.nx_cells * grid.nv_cells),
                       replace=False)
    ix, iv = np.divmod(cells, grid.nv_cells)
    return grid.x_points[ix], grid.v_points[iv]


def _lattice(specs, tau, x, v, points_per_width):
    """Step and half-width of the velocity lattice resolving products of lab Maxwellians at time tau."""
    alpha_min = min(m.alpha for m in specs)
    beta_min = min(m.beta for m in specs)
    alpha_max = max(m.alpha for m in specs)
    beta_max = max(m.beta for m in specs)
    rate_min = alpha_min * tau ** 2 + beta_min
    rate_max = alpha_max * tau ** 2 + beta_max
    y = x + tau * v
    center = alpha_min * tau * y / rate_min
    half_width = np.linalg.norm(center - v) + math.sqrt(math.log(1 / GAUSSIAN_CUTOFF) / rate_min)
    return 1 / (points_per_width * math.sqrt(rate_max)), half_width


def _lab_callable(spec, tau, y):
    """w ↦ spec(y − τw, w), the lab field at position y of the trajectory-frame envelope spec."""
    moving = replace(spec, shift=tau)
    return lambda w: maxwellian_eval(moving, y, w)


def _time_panels(T):
    edges = [0.]
    edge = 0.25
    while edge < T:
        edges.append(edge)
        edge *= 2
    edges.append(T)
    nodes, weights = leggauss(GAUSS_NODES_PER_PANEL)
    taus, taus_w = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        taus.append((a + b) / 2 + (b - a) / 2 * nodes)
        taus_w.append((b - a) / 2 * weights)
    return np.concatenate(taus), np.concatenate(taus_w)


def gain_time_integral_check(f, g, alpha, beta, kernel, T, x_samples, v_samples, nsigma=16,
                             points_per_width=POINTS_PER_WIDTH, rtol=GAIN_INTEGRAL_RTOL):
    """Check ∫₀ᵀ Q₊^#(f,g)(τ,x,v)dτ ≤ k_{α,β}·M_{α,β}(x,v)·‖f^#‖·‖g^#‖ at sampled (x, v).

    f and g are trajectory-frame envelopes given as MaxwellianSpec with zero
    shift, decaying at least as fast as M_{α,β}, so that ‖f^#‖_{α,β} = f.C.
    The τ-integral uses Gauss–Legendre panels refined towards τ = 0, the
    velocity integrals the pointwise gain quadrature.
    """
    for spec in (f, g):
        if spec.shift != 0 or spec.alpha < alpha or spec.beta < beta:
            raise DomainError('gain_time_integral_check', f"{spec} is not bounded by M_(alpha,beta) in the "
                                                          "trajectory frame")
    k_ab = k_alpha_beta(alpha, beta, kernel)
    envelope = MaxwellianSpec(1., alpha, beta)
    taus, weights = _time_panels(T)
    worst, location = 0., None
    ratios = []
    for x, v in zip(np.asarray(x_samples, dtype=float), np.asarray(v_samples, dtype=float)):
        integral = 0.
        if f.C > 0 and g.C > 0:
            for tau, w_tau in zip(taus, weights):
                y = x + tau * v
                h, half_width = _lattice((f, g), tau, x, v, points_per_width)
                integral += w_tau * gain_at(_lab_callable(f, tau, y), _lab_callable(g, tau, y), v, kernel, h,
                                            half_width, nsigma=nsigma)
        bound = k_ab * envelope(x, v) * f.C * g.C
        ratio = integral / bound if bound > 0 else 0.
        ratios.append(ratio)
        if ratio > worst or location is None:
            worst, location = max(worst, ratio), dict(x=x, v=v)
    verdict = make_verdict('gain_time_integral', worst <= 1 + rtol, worst_ratio=worst, location=location,
                           k_ab=k_ab, T=T, ratios=ratios)
    _log.info("Time-integrated gain bound: worst ratio %.6g over %d samples", worst, len(ratios))
    if not verdict['pass']:
        raise InequalityViolation(verdict)
    return verdict


def sandwich_check(f0, M1, M2, eps, M):
    """Check M₁ ≤ f₀ ≤ M₂ on all lab-frame cells and d(M_i, M) < eps.

    The Maxwellians carry their frame shift, so M_i(x − v, v) is compared with f₀(x, v).
    """
    grid = f0.grid
    x = grid.x_points[:, None, :]
    v = grid.v_points[None, :, :]
    values = f0.matrix
    lower = maxwellian_eval(M1, x, v)
    upper = maxwellian_eval(M2, x, v)
    below = lower - values - SANDWICH_RTOL * lower
    above = values - upper - SANDWICH_RTOL * upper
    distances = dict(M1=maxwellian_distance(M1, M), M2=maxwellian_distance(M2, M))
    location = None
    worst = max(float(np.max(below)), float(np.max(above)))
    if worst > 0:
        violations = below if np.max(below) >= np.max(above) else above
        ix, iv = np.unravel_index(int(np.argmax(violations)), violations.shape)
        location = dict(x=grid.x_points[ix], v=grid.v_points[iv],
                        side='lower' if violations is below else 'upper')
    close = distances['M1'] < eps and distances['M2'] < eps
    return make_verdict('sandwich', worst <= 0 and close, worst_ratio=None, location=location,
                        worst_excess=max(worst, 0.), distances=distances, eps=eps, distances_ok=close)


def _order_report(l0, l1, u1, u0, scale, slack=0.):
    report = {}
    passed = True
    for name, smaller, larger in (('0 <= l0', np.zeros_like(l0.values), l0.values),
                                  ('l0 <= l1', l0.values, l1.values),
                                  ('l1 <= u1', l1.values, u1.values),
                                  ('u1 <= u0', u1.values, u0.values)):
        excess = smaller - larger - slack
        index = np.unravel_index(int(np.argmax(excess)), excess.shape)
        worst = float(excess[index])
        ok = worst <= BEGINNING_ORDER_RTOL * scale
        passed &= ok
        report[name] = {'worst_excess': max(worst, 0.), 'pass': ok,
                        'location': None if ok else dict(t=float(l0.times[index[0]]), x_cell=int(index[1]),
                                                           v_cell=int(index[2]))}
    return passed, report


def _differential_inequalities(barrier, kernel, grid, times, count, seed, points_per_width, rtol):
    """Check dl₀^#/dt + Q₋^#(l₀,u₀) ≤ Q₊^#(l₀,l₀) and du₀^#/dt + Q₋^#(u₀,l₀) ≥ Q₊^#(u₀,u₀) pointwise."""
    M1, M2 = barrier.M1, barrier.M2
    xs, vs = sample_cells(grid, count, seed)
    base1 = MaxwellianSpec(1., M1.alpha, M1.beta)
    base2 = MaxwellianSpec(1., M2.alpha, M2.beta)
    points = []
    worst = -math.inf
    for t in times:
        delta = 1e-5 * t
        dC1 = (c1_profile(t + delta, barrier) - c1_profile(t - delta, barrier)) / (2 * delta)
        dC2 = (c2_profile(t + delta, barrier) - c2_profile(t - delta, barrier)) / (2 * delta)
        l0 = replace(base1, C=float(c1_profile(t, barrier)))
        u0 = replace(base2, C=float(c2_profile(t, barrier)))
        for x, v in zip(xs, vs):
            y = x + t * v
            h, half_width = _lattice((l0, u0), t, x, v, points_per_width)
            lower_lab = _lab_callable(l0, t, y)
            upper_lab = _lab_callable(u0, t, y)
            l_value = float(l0(x, v))
            u_value = float(u0(x, v))
            gain_l = gain_at(lower_lab, lower_lab, v, kernel, h, half_width)
            gain_u = gain_at(upper_lab, upper_lab, v, kernel, h, half_width)
            loss_l = l_value * loss_rate_at(upper_lab, v, kernel, h, half_width)
            loss_u = u_value * loss_rate_at(lower_lab, v, kernel, h, half_width)
            d_l = dC1 * float(base1(x, v))
            d_u = dC2 * float(base2(x, v))
            lower_excess = (d_l + loss_l - gain_l) / (abs(d_l) + loss_l + gain_l)
            upper_excess = (gain_u - d_u - loss_u) / (abs(d_u) + loss_u + gain_u)
            worst = max(worst, lower_excess, upper_excess)
            points.append({'t': t, 'x': x, 'v': v, 'lower_excess': lower_excess, 'upper_excess': upper_excess,
                           'pass': max(lower_excess, upper_excess) <= rtol})
    return worst <= rtol, worst, points


def beginning_condition_check(barrier, f0, q, T, Nt, samples=16, seed=0, times=None,
                              points_per_width=POINTS_PER_WIDTH, rtol=DIFFERENTIAL_RTOL, envelope_rtol=None):
    """Certify the beginning condition 0 ≤ l₀^# ≤ l₁^# ≤ u₁^# ≤ u₀^# for the trajectory-frame datum f0.

    For near-Maxwellian barriers the differential inequalities of the barrier
    envelopes are checked as well, at `samples` random cells and the sample
    times `times` (default: six times spread over the run).
    """
    grid = f0.grid
    time_grid = f0.t + np.linspace(0., T, Nt + 1)
    l0, u0 = barrier_series(barrier, grid, time_grid)
    l1, u1 = linear_step(l0, u0, f0, q)
    scale = max(float(np.max(u0.values)), float(np.max(f0.matrix)), np.finfo(float).tiny)
    if envelope_rtol is None:
        envelope_rtol = 0. if isinstance(barrier, VacuumBarrier) else rtol
    passed, order = _order_report(l0, l1, u1, u0, scale, slack=envelope_rtol * u0.values)
    details = dict(order=order, envelope_rtol=envelope_rtol)

    if isinstance(barrier, VacuumBarrier):
        u1_norm = float(np.max(weighted_sup(u1.values, grid, barrier.alpha, barrier.beta)))
        details.update(u1_norm=u1_norm, u1_bound=barrier.f0_norm + barrier.gain_bound)
    else:
        if times is None:
            times = f0.t + T * np.array([0.05, 0.1, 0.2, 0.4, 0.7, 1.])
        ok, worst, points = _differential_inequalities(barrier, q.kernel, grid, times, samples, seed,
                                                       points_per_width, rtol)
        passed &= ok
        details.update(differential_worst=worst, differential_rtol=rtol, points=points)

    location = None
    for name, entry in order.items():
        if not entry['pass']:
            location = dict(entry['location'], relation=name)
            break
    verdict = make_verdict('beginning_condition', passed, worst_ratio=None, location=location, **details)
    _log.info("Beginning condition %s.", "holds" if passed else "FAILS")
    return verdict
