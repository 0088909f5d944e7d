#
# Common settings and fixtures used with pytest
#
import logging

import pytest

from kinbarrier.collision.quadrature import CollisionQuadrature
from kinbarrier.kernel.kernels import AngularKernel, CollisionKernel
from kinbarrier.phase.grids import PhaseGrid, default_half_width

_log = logging.getLogger(__name__)

UNIT_NORM_B = 1 / (2 * 3.141592653589793)  # constant b on S¹ with ‖b‖ = 1


@pytest.fixture
def small_grid():
    return PhaseGrid(n=2, Lx=3., Lv=3., Nx=6, Nv=6)


@pytest.fixture
def constant_b():
    return AngularKernel('constant', value=UNIT_NORM_B)


@pytest.fixture
def soft_kernel(constant_b):
    """λ = 1/2 in two dimensions with ‖b‖ = 1."""
    return CollisionKernel(lam=0.5, angular=constant_b, n=2, mode='near_vacuum')


@pytest.fixture
def hard_sphere_like_kernel(constant_b):
    """λ = 0, i.e. a velocity-independent kernel."""
    return CollisionKernel(lam=0., angular=constant_b, n=2, mode='near_maxwellian')


@pytest.fixture
def velocity_grid():
    """Grid with a single relevant x-scale, velocities resolving a unit Maxwellian."""
    return PhaseGrid(n=2, Lx=1., Lv=default_half_width(1.), Nx=4, Nv=12)


@pytest.fixture
def soft_quadrature(soft_kernel, velocity_grid):
    return CollisionQuadrature(soft_kernel, velocity_grid, Nsigma=16)

