import math

import numpy as np
import pytest

from kinbarrier.collision import quadrature
from kinbarrier.collision.quadrature import CollisionQuadrature, apply_Q, collision_moments, gain, gain_at, \
    loss_rate, loss_rate_at, post_collision, sigma_nodes, trajectory_identity_check, trajectory_identity_tolerance
from kinbarrier.phase.fields import DistributionField, FrameMismatch, sample_maxwellian
from kinbarrier.phase.grids import MaxwellianSpec, PhaseGrid, default_half_width
from kinbarrier.taskapp.workers import CellPool
from kinbarrier.utils import DomainError


def _random_unit(rng, size, n):
    s = rng.normal(size=(size, n))
    return s / np.linalg.norm(s, axis=-1, keepdims=True)


def _homogeneous(grid, values_v):
    return DistributionField.from_matrix(grid, 0., np.broadcast_to(values_v, grid.matrix_shape))


def _two_bumps(grid):
    v = grid.v_points
    values = np.exp(-1.5 * np.sum((v - [0.6, 0.]) ** 2, axis=-1)) + \
        0.5 * np.exp(-2. * np.sum((v + [0.5, 0.3]) ** 2, axis=-1))
    return _homogeneous(grid, values)


def test_post_collision_examples():
    vp, vsp = post_collision([1., 0.], [-1., 0.], [1., 0.])
    np.testing.assert_allclose(vp, [-1., 0.])
    np.testing.assert_allclose(vsp, [1., 0.])

    vp, vsp = post_collision([1., 2.], [3., 2.], [0., 1.])  # σ ⟂ u
    np.testing.assert_array_equal(vp, [1., 2.])
    np.testing.assert_array_equal(vsp, [3., 2.])


@pytest.mark.parametrize('n', [2, 3])
def test_post_collision_conserves_momentum_and_energy(n):
    rng = np.random.default_rng(1)
    size = 10000
    v = rng.normal(scale=3, size=(size, n))
    v_star = rng.normal(scale=3, size=(size, n))
    vp, vsp = post_collision(v, v_star, _random_unit(rng, size, n))
    momentum_scale = np.linalg.norm(v, axis=-1) + np.linalg.norm(v_star, axis=-1)
    energy = np.sum(v ** 2, axis=-1) + np.sum(v_star ** 2, axis=-1)
    assert np.all(np.linalg.norm(vp + vsp - v - v_star, axis=-1) <= 1e-12 * momentum_scale)
    assert np.all(np.abs(np.sum(vp ** 2, axis=-1) + np.sum(vsp ** 2, axis=-1) - energy) <= 1e-12 * energy)


def test_post_collision_rejects_non_unit_sigma():
    with pytest.raises(DomainError):
        post_collision([1., 0.], [0., 0.], [1., 1.])


def test_trajectory_identity():
    assert trajectory_identity_check([1., 2.], [0.3, 0.1], [-1., 2.], [0.6, 0.8], 0.) == 0.
    # σ ⟂ u: both sides agree term by term
    assert trajectory_identity_check([1., 2.], [1., 0.], [-1., 0.], [0., 1.], 3.) == 0.

    rng = np.random.default_rng(2)
    size = 1000
    x = rng.normal(scale=5, size=(size, 3))
    v = rng.normal(scale=3, size=(size, 3))
    v_star = rng.normal(scale=3, size=(size, 3))
    tau = rng.uniform(0, 10, size=size)
    residual = trajectory_identity_check(x, v, v_star, _random_unit(rng, size, 3), tau)
    assert np.all(residual <= trajectory_identity_tolerance(x, v, v_star, tau))


def test_sigma_nodes():
    nodes, weights = sigma_nodes(2, 16)
    assert len(nodes) == 16
    assert weights.sum() == pytest.approx(2 * math.pi, rel=1e-14)
    np.testing.assert_allclose(np.linalg.norm(nodes, axis=-1), 1., rtol=1e-15)

    nodes, weights = sigma_nodes(3, 32)
    assert len(nodes) == 32
    assert weights.sum() == pytest.approx(4 * math.pi, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(nodes, axis=-1), 1., rtol=1e-14)
    # second moments of the sphere: ∫ σ_i² = 4π/3
    np.testing.assert_allclose(weights @ nodes ** 2, 4 * math.pi / 3, rtol=1e-12)

    with pytest.raises(DomainError):
        sigma_nodes(2, 4)


def test_quadrature_singular_cap(soft_quadrature):
    grid = soft_quadrature.grid
    r0 = math.sqrt(grid.hv ** 2 / math.pi)
    assert soft_quadrature.singular_cap == pytest.approx(2 / 1.5 * r0 ** -0.5, rel=1e-14)
    # diagonal of the potential table carries the cap
    np.testing.assert_allclose(np.diag(soft_quadrature.potential_table), soft_quadrature.singular_cap * grid.hv ** 2)


def test_loss_rate_for_velocity_independent_kernel(hard_sphere_like_kernel, velocity_grid):
    g = _two_bumps(velocity_grid)
    R = loss_rate(g, hard_sphere_like_kernel)
    mass = g.matrix.sum(axis=1) * velocity_grid.hv ** 2
    np.testing.assert_allclose(R, (hard_sphere_like_kernel.norm * mass)[:, None] * np.ones_like(R), rtol=1e-12)

    zero = DistributionField.zeros(velocity_grid)
    assert np.all(loss_rate(zero, hard_sphere_like_kernel) == 0)


def test_loss_rate_of_single_cell_spike(soft_kernel, velocity_grid):
    grid = velocity_grid
    j0 = 5 * grid.Nv + 7
    m = 0.3
    spike = np.zeros(grid.matrix_shape)
    spike[:, j0] = m / grid.hv ** 2
    R = loss_rate(DistributionField.from_matrix(grid, 0., spike), soft_kernel)
    distance = np.linalg.norm(grid.v_points - grid.v_points[j0], axis=-1)
    far = distance > grid.hv
    np.testing.assert_allclose(R[0, far], soft_kernel.norm * m * distance[far] ** -0.5, rtol=1e-12)


def test_quadrature_loss_rate_matches_field_interface(soft_quadrature):
    g = _two_bumps(soft_quadrature.grid)
    np.testing.assert_allclose(soft_quadrature.loss_rate_matrix(g.matrix), loss_rate(g, soft_quadrature.kernel),
                               rtol=1e-13)


def test_gain_vanishes_for_zero_input(soft_quadrature):
    f = _two_bumps(soft_quadrature.grid)
    zero = DistributionField.zeros(soft_quadrature.grid)
    assert np.all(gain(f, zero, soft_quadrature) == 0)
    assert np.all(gain(zero, f, soft_quadrature) == 0)
    assert np.all(apply_Q(f, zero, soft_quadrature) == 0)


def test_gain_requires_same_frame(soft_quadrature):
    f = DistributionField.zeros(soft_quadrature.grid)
    g = DistributionField.zeros(soft_quadrature.grid, t=1., frame='trajectory')
    with pytest.raises(FrameMismatch):
        gain(f, g, soft_quadrature)


def test_gain_and_loss_are_monotone(soft_quadrature):
    rng = np.random.default_rng(3)
    shape = soft_quadrature.grid.matrix_shape
    f = rng.uniform(size=shape)
    g = rng.uniform(size=shape)
    f_upper = f + rng.uniform(size=shape)
    g_upper = g + rng.uniform(size=shape)
    assert np.all(soft_quadrature.gain_matrix(f, g) <= soft_quadrature.gain_matrix(f_upper, g_upper))
    assert np.all(soft_quadrature.loss_rate_matrix(g) <= soft_quadrature.loss_rate_matrix(g_upper))


def test_apply_Q_is_bilinear(soft_quadrature):
    rng = np.random.default_rng(4)
    shape = soft_quadrature.grid.matrix_shape
    f1, f2, g1, g2 = (rng.uniform(size=shape) for _ in range(4))
    Q = soft_quadrature.apply_matrix
    scale = np.max(np.abs(Q(f1 + f2, g1 + g2)))
    np.testing.assert_allclose(Q(f1 + f2, g1), Q(f1, g1) + Q(f2, g1), atol=1e-12 * scale)
    np.testing.assert_allclose(Q(f1, g1 + g2), Q(f1, g1) + Q(f1, g2), atol=1e-12 * scale)
    np.testing.assert_allclose(Q(2.5 * f1, g1), 2.5 * Q(f1, g1), atol=1e-12 * scale)


def test_sparse_and_dense_tables_agree(soft_kernel, velocity_grid, monkeypatch):
    f = _two_bumps(velocity_grid)
    dense = CollisionQuadrature(soft_kernel, velocity_grid, Nsigma=16)
    assert dense.dense
    expected = dense.gain_matrix(f.matrix, f.matrix)
    monkeypatch.setattr(quadrature, 'DENSE_TABLE_LIMIT', 0)
    sparse = CollisionQuadrature(soft_kernel, velocity_grid, Nsigma=16)
    assert not sparse.dense
    np.testing.assert_allclose(sparse.gain_matrix(f.matrix, f.matrix), expected, rtol=1e-12,
                               atol=1e-14 * expected.max())


def test_worker_count_does_not_change_gain(soft_kernel):
    grid = PhaseGrid(n=2, Lx=2., Lv=3., Nx=8, Nv=8)
    rng = np.random.default_rng(6)
    F = rng.uniform(size=grid.matrix_shape)
    G = rng.uniform(size=grid.matrix_shape)
    with CellPool(workers=1, block_size=5) as serial, CellPool(workers=3, block_size=5) as parallel:
        a = CollisionQuadrature(soft_kernel, grid, Nsigma=8, pool=serial).apply_matrix(F, G)
        b = CollisionQuadrature(soft_kernel, grid, Nsigma=8, pool=parallel).apply_matrix(F, G)
    np.testing.assert_array_equal(a, b)


def test_weak_form_residuals_decrease_under_refinement(soft_kernel):
    Lv = default_half_width(1.5)
    coarse_grid = PhaseGrid(n=2, Lx=1., Lv=Lv, Nx=4, Nv=12)
    fine_grid = PhaseGrid(n=2, Lx=1., Lv=Lv, Nx=4, Nv=16)
    coarse = collision_moments(CollisionQuadrature(soft_kernel, coarse_grid, Nsigma=16), _two_bumps(coarse_grid))
    fine = collision_moments(CollisionQuadrature(soft_kernel, fine_grid, Nsigma=32), _two_bumps(fine_grid))
    assert coarse['residual'] < 0.2
    assert fine['residual'] < coarse['residual']
    assert set(coarse['relative']) == {'mass', 'momentum_0', 'momentum_1', 'energy'}
    # homogeneous data: every x-cell carries the same moments
    np.testing.assert_allclose(coarse['moments']['mass'], coarse['moments']['mass'][0], rtol=1e-12)


def test_maxwellian_equilibrium_under_refinement(hard_sphere_like_kernel):
    Lv = default_half_width(1.)
    ratios = []
    for Nv, Nsigma in ((12, 16), (16, 32)):
        grid = PhaseGrid(n=2, Lx=1., Lv=Lv, Nx=4, Nv=Nv)
        f = sample_maxwellian(MaxwellianSpec(1., 1., 1.), grid)
        q = CollisionQuadrature(hard_sphere_like_kernel, grid, Nsigma=Nsigma)
        Q = q.apply_matrix(f.matrix, f.matrix)
        ratios.append(np.max(np.abs(Q)) / np.max(q.gain_matrix(f.matrix, f.matrix)))
    assert ratios[1] < ratios[0]


def test_pointwise_gain_equals_loss_for_maxwellian(soft_kernel):
    def maxwellian(w):
        return np.exp(-np.sum(w * w, axis=-1))

    for v in ([0., 0.], [0.7, -0.2], [1.5, 1.]):
        g = gain_at(maxwellian, maxwellian, v, soft_kernel, h=0.2, half_width=5.)
        R = loss_rate_at(maxwellian, v, soft_kernel, h=0.2, half_width=5.)
        # ‖b‖ is computed by adaptive quadrature, the angular rule sums b exactly
        assert g == pytest.approx(maxwellian(np.asarray(v)) * R, rel=1e-9)


def test_pointwise_loss_rate_converges_to_grid_value(hard_sphere_like_kernel):
    def maxwellian(w):
        return np.exp(-np.sum(w * w, axis=-1))

    # λ = 0: R = ‖b‖·∫M = π‖b‖
    R = loss_rate_at(maxwellian, [0.3, 0.1], hard_sphere_like_kernel, h=0.1, half_width=6.)
    assert R == pytest.approx(math.pi * hard_sphere_like_kernel.norm, rel=1e-10)
