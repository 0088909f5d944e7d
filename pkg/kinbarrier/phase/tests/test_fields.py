import math

import numpy as np
import pytest

from kinbarrier.phase.grids import PhaseGrid, MaxwellianSpec, maxwellian_eval, default_half_width
from kinbarrier.phase.fields import (
    DistributionField, FieldSeries, InvalidField, FrameMismatch,
    weighted_sup_norm, lp_norm, to_trajectory, from_trajectory, sample_maxwellian, transport)
from kinbarrier.utils import DomainError


def test_maxwellian_eval_examples():
    assert maxwellian_eval(MaxwellianSpec(1, 1, 1), [0, 0], [0, 0]) == 1
    assert maxwellian_eval(MaxwellianSpec(2, 3.7, 0, shift=0.5), [0.25, 1.], [0.5, 2.]) == 2
    assert maxwellian_eval(MaxwellianSpec(1, 1, 0, shift=1), [1, 0], [0, 0]) == pytest.approx(math.exp(-1))


def test_maxwellian_spec_invariants():
    with pytest.raises(DomainError):
        MaxwellianSpec(1, 0, 1)
    with pytest.raises(DomainError):
        MaxwellianSpec(-1, 1, 1)
    MaxwellianSpec(0, 1, 0)  # β = 0 is the infinite-mass case


def test_grid_invariants():
    with pytest.raises(DomainError):
        PhaseGrid(n=2, Lx=1, Lv=1, Nx=3, Nv=8)
    with pytest.raises(DomainError):
        PhaseGrid(n=2, Lx=0, Lv=1, Nx=8, Nv=8)
    grid = PhaseGrid(n=2, Lx=2, Lv=3, Nx=4, Nv=6)
    np.testing.assert_allclose(grid.x_axis, [-1.5, -0.5, 0.5, 1.5])
    assert not np.any(grid.v_axis == 0)
    assert grid.x_points.shape == (16, 2)
    assert grid.cell_volume == pytest.approx(1 * 1 * 1 * 1)


def test_default_half_width():
    L = default_half_width(2.)
    assert math.exp(-2 * L ** 2) < 1e-8
    assert math.exp(-2 * (0.999 * L) ** 2) > 1e-8


def test_field_rejects_negative_values(small_grid):
    values = np.zeros(small_grid.shape)
    values[0, 0, 0, 0] = -1e-3
    with pytest.raises(InvalidField):
        DistributionField(small_grid, 0., values)
    values[0, 0, 0, 0] = np.nan
    with pytest.raises(InvalidField):
        DistributionField(small_grid, 0., values)


def test_field_is_immutable(small_grid):
    f = DistributionField.zeros(small_grid)
    with pytest.raises(ValueError):
        f.values[0, 0, 0, 0] = 1.


def test_weighted_sup_norm_of_matching_maxwellian_is_one(small_grid):
    f = sample_maxwellian(MaxwellianSpec(1., 0.7, 1.3), small_grid)
    assert weighted_sup_norm(f, 0.7, 1.3) == 1.
    assert weighted_sup_norm(DistributionField.zeros(small_grid), 0.7, 1.3) == 0.


def test_weighted_sup_norm_of_faster_decay(small_grid):
    alpha, beta = 0.5, 1.
    f = sample_maxwellian(MaxwellianSpec(0.5, 2 * alpha, beta), small_grid)
    ratios = f.matrix * np.exp(alpha * np.sum(small_grid.x_points ** 2, axis=1))[:, None] * \
        np.exp(beta * np.sum(small_grid.v_points ** 2, axis=1))[None, :]
    xmin = np.min(np.sum(small_grid.x_points ** 2, axis=1))
    assert weighted_sup_norm(f, alpha, beta) == pytest.approx(ratios.max(), rel=1e-13)
    assert weighted_sup_norm(f, alpha, beta) == pytest.approx(0.5 * math.exp(-alpha * xmin), rel=1e-13)


def test_lp_norm_examples(small_grid):
    c = 0.3
    f = DistributionField(small_grid, 0., np.full(small_grid.shape, c))
    volume = (2 * small_grid.Lx) ** 2 * (2 * small_grid.Lv) ** 2
    assert lp_norm(f, 1) == pytest.approx(c * volume, rel=1e-13)
    assert lp_norm(f, np.inf) == c

    spike = np.zeros(small_grid.shape)
    spike[1, 2, 3, 0] = 2.5
    g = DistributionField(small_grid, 0., spike)
    assert lp_norm(g, 2) == pytest.approx(2.5 * math.sqrt(small_grid.cell_volume), rel=1e-14)


def test_lp_norm_exponent_below_one(small_grid):
    f = DistributionField(small_grid, 0., np.ones(small_grid.shape))
    with pytest.raises(DomainError, match="at least 1, got 0.5"):
        lp_norm(f, 0.5)


def test_lp_norm_of_maxwellian_converges_under_refinement():
    m = MaxwellianSpec(1.2, 1., 1.)
    L = default_half_width(1.)
    exact = 1.2 * math.pi ** 2
    errors = []
    for N in (6, 12):
        grid = PhaseGrid(n=2, Lx=L, Lv=L, Nx=N, Nv=N)
        errors.append(abs(lp_norm(sample_maxwellian(m, grid), 1) / exact - 1))
    assert errors[1] <= errors[0] / 2


def test_trajectory_transform_at_time_zero_is_identity(small_grid):
    f = sample_maxwellian(MaxwellianSpec(1., 1., 1.), small_grid)
    g = to_trajectory(f)
    assert g.frame == 'trajectory'
    np.testing.assert_allclose(g.values, f.values, rtol=0, atol=1e-15)


def test_zero_velocity_slice_is_unchanged():
    grid = PhaseGrid(n=2, Lx=3, Lv=3, Nx=6, Nv=5)  # odd Nv puts a cell center at v = 0
    rng = np.random.default_rng(1)
    f = DistributionField(grid, 1.7, rng.uniform(size=grid.shape))
    g = to_trajectory(f)
    np.testing.assert_array_equal(g.values[:, :, 2, 2], f.values[:, :, 2, 2])


def test_round_trip_is_exact_for_fields_affine_in_x():
    grid = PhaseGrid(n=2, Lx=4, Lv=2, Nx=8, Nv=8)
    t = 0.4 * grid.hx / grid.Lv  # t·Lv < hx/2
    x = grid.x_points
    m = MaxwellianSpec(1., 1., 1.)
    vfactor = maxwellian_eval(m, np.zeros_like(grid.v_points), grid.v_points)
    values = (8. + x[:, 0] + 0.5 * x[:, 1])[:, None] * vfactor[None, :]
    f = DistributionField.from_matrix(grid, t, values)
    back = from_trajectory(to_trajectory(f))
    interior = (slice(1, -1),) * 2
    np.testing.assert_allclose(back.values[interior], f.values[interior], rtol=1e-13)


def test_transport_preserves_nonnegativity_and_order(small_grid):
    rng = np.random.default_rng(3)
    lower = rng.uniform(size=small_grid.matrix_shape)
    upper = lower + rng.uniform(size=small_grid.matrix_shape)
    tl, tu = transport(lower, small_grid, 0.8), transport(upper, small_grid, 0.8)
    assert np.all(tl >= 0)
    assert np.all(tu >= tl)


def test_frame_mismatch(small_grid):
    f = DistributionField.zeros(small_grid, t=1., frame='trajectory')
    with pytest.raises(FrameMismatch):
        to_trajectory(f)
    with pytest.raises(FrameMismatch):
        from_trajectory(from_trajectory(f))


def test_sample_maxwellian_in_trajectory_frame(small_grid):
    m = MaxwellianSpec(1., 1., 1., shift=1.)
    g = sample_maxwellian(m, small_grid, t=1., frame='trajectory')
    expected = sample_maxwellian(MaxwellianSpec(1., 1., 1.), small_grid, t=1., frame='lab')
    np.testing.assert_allclose(g.matrix, expected.matrix, rtol=1e-14)


def test_field_series(small_grid):
    f = sample_maxwellian(MaxwellianSpec(1., 1., 1.), small_grid, frame='trajectory')
    series = FieldSeries.stationary(f, np.linspace(0, 1, 5))
    assert len(series) == 5
    assert series.field(3).t == pytest.approx(0.75)
    np.testing.assert_array_equal(series.field(3).values, f.values)
