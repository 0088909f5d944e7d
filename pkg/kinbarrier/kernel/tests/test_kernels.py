import math

import numpy as np
import pytest

from kinbarrier.kernel.kernels import (
    AngularKernel, CollisionKernel, KernelDomainError, IntegrationFailure,
    sphere_area, angular_norm, symmetrize, singular_cap, gain_weight, ball_volume)
from kinbarrier.utils import DomainError


@pytest.mark.parametrize('n,expected', [(2, 2 * math.pi), (3, 4 * math.pi), (4, 2 * math.pi ** 2)])
def test_sphere_area(n, expected):
    assert sphere_area(n) == pytest.approx(expected, rel=1e-14)


def test_sphere_area_rejects_small_dimension():
    with pytest.raises(DomainError):
        sphere_area(1)


@pytest.mark.parametrize('n,b,expected', [
    (3, AngularKernel('constant'), 4 * math.pi),
    (2, AngularKernel('constant'), 2 * math.pi),
    (3, AngularKernel('power', power=1), 2 * math.pi),
    (2, AngularKernel('power', value=0.5, power=2), 0.5 * math.pi),  # 2∫cos²θ dθ over [0, π]
])
def test_angular_norm_closed_forms(n, b, expected):
    assert angular_norm(b, n) == pytest.approx(expected, rel=1e-10)


def test_angular_norm_of_collision_kernel_equals_sphere_area():
    k = CollisionKernel(lam=0.5, angular=AngularKernel('constant'), n=3)
    assert angular_norm(k) == pytest.approx(sphere_area(3), rel=1e-12)


def test_angular_norm_is_positively_homogeneous():
    b = AngularKernel('tabulated', samples=(0.3, 1.2, 0.1, 0.7, 2.0))
    for n in (2, 3):
        assert angular_norm(b.scaled(3.5), n) == pytest.approx(3.5 * angular_norm(b, n), rel=1e-12)


def test_symmetrize_direct_substitution():
    bbar = symmetrize(AngularKernel('constant'))
    np.testing.assert_array_equal(bbar(np.array([-1., -0.3, 0., 0.2, 1.])), [2, 2, 2, 0, 0])

    ramp = AngularKernel('tabulated', samples=(0., 0., 1.))  # s·1{s≥0}
    s = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(symmetrize(ramp)(s), np.where(s <= 0, -s, 0.), atol=1e-15)


def test_symmetrize_keeps_angular_norm():
    rng = np.random.default_rng(7)
    for _ in range(5):
        b = AngularKernel('tabulated', samples=tuple(rng.uniform(0, 2, size=rng.integers(3, 12))))
        for n in (2, 3):
            assert angular_norm(symmetrize(b), n) == pytest.approx(angular_norm(b, n), rel=1e-8)


def test_gain_weight_reduces_to_norm():
    b = AngularKernel('power', power=1)
    assert gain_weight(b, 3, 0.) == pytest.approx(angular_norm(b, 3), rel=1e-10)
    # 2/(1−s) ∈ [1, 2] on the support of b̄
    w = gain_weight(b, 3, 1.5)
    assert angular_norm(b, 3) < w < 2 ** 1.5 * angular_norm(b, 3)


def test_singular_cap_is_ball_average():
    h, n, lam = 0.3, 2, 0.5
    r0 = (h ** n / ball_volume(n)) ** (1 / n)
    # radial average of r^{-λ} over the ball
    avg = n / r0 ** n * r0 ** (n - lam) / (n - lam)
    assert singular_cap(h, n, lam) == pytest.approx(avg, rel=1e-14)
    assert singular_cap(h, 3, 0.) == pytest.approx(1.)


@pytest.mark.parametrize('mode,lam', [('near_maxwellian', 1.0), ('near_maxwellian', -0.1),
                                      ('near_vacuum', 1.0), ('near_vacuum', -1.5)])
def test_kernel_rejects_lambda_outside_range(mode, lam):
    with pytest.raises(KernelDomainError) as exc:
        CollisionKernel(lam=lam, angular=AngularKernel('constant'), n=2, mode=mode)
    assert exc.value.code == 'soft_potential_range'


def test_near_vacuum_admits_relaxed_range():
    k = CollisionKernel(lam=-1, angular=AngularKernel('constant'), n=3, mode='near_vacuum')
    assert k.norm == pytest.approx(4 * math.pi)


def test_invalid_angular_kernels():
    with pytest.raises(KernelDomainError):
        AngularKernel('tabulated', samples=(1., -0.5, 1.))
    with pytest.raises(KernelDomainError):
        AngularKernel('constant', value=-1)
    with pytest.raises(KernelDomainError):
        AngularKernel('bumpy')


def test_non_integrable_tabulated_kernel():
    with pytest.raises(IntegrationFailure):
        CollisionKernel(lam=0.5, angular=AngularKernel('tabulated', samples=(1., np.inf, 1.)), n=2)


def test_potential_uses_cap_below_one_cell():
    k = CollisionKernel(lam=0.5, angular=AngularKernel('constant'), n=2)
    values = k.potential(np.array([0., 0.4, 0.8]), h=0.4)
    assert values[0] == pytest.approx(singular_cap(0.4, 2, 0.5))
    assert values[1] == pytest.approx(0.4 ** -0.5)
    assert values[2] == pytest.approx(0.8 ** -0.5)
