"""
Truncated tensor grids on phase space and Maxwellian envelopes.
"""
import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache

import numpy as np

from ..utils import DomainError

MIN_POINTS_PER_AXIS = 4
TAIL_THRESHOLD = 1e-8


def default_half_width(rate, threshold=TAIL_THRESHOLD):
    """Smallest L with exp(−rate·L²) < threshold."""
    if rate <= 0:
        raise DomainError('default_half_width', "a positive decay rate is needed to truncate the box")
    return math.sqrt(math.log(1 / threshold) / rate) * (1 + 1e-12)


def cell_centers(L, N):
    h = 2 * L / N
    return -L + (np.arange(N) + 0.5) * h


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid of cell centers on [−Lx, Lx]^n × [−Lv, Lv]^n.

    Values on the grid are stored with shape (Nx,)*n + (Nv,)*n; the flat
    "matrix" layout (Nx^n, Nv^n) is used by all compute kernels.
    """
    n: int
    Lx: float
    Lv: float
    Nx: int
    Nv: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError('PhaseGrid', f"dimension must be positive, got {self.n}")
        if self.Nx < MIN_POINTS_PER_AXIS or self.Nv < MIN_POINTS_PER_AXIS:
            raise DomainError('PhaseGrid', f"need at least {MIN_POINTS_PER_AXIS} points per axis, "
                                           f"got Nx={self.Nx}, Nv={self.Nv}")
        if not (self.Lx > 0 and self.Lv > 0):
            raise DomainError('PhaseGrid', f"half-widths must be positive, got Lx={self.Lx}, Lv={self.Lv}")

    @property
    def hx(self):
        return 2 * self.Lx / self.Nx

    @property
    def hv(self):
        return 2 * self.Lv / self.Nv

    @property
    def shape(self):
        return (self.Nx,) * self.n + (self.Nv,) * self.n

    @property
    def nx_cells(self):
        return self.Nx ** self.n

    @property
    def nv_cells(self):
        return self.Nv ** self.n

    @property
    def matrix_shape(self):
        return self.nx_cells, self.nv_cells

    @property
    def cell_volume(self):
        return self.hx ** self.n * self.hv ** self.n

    @cached_property
    def x_axis(self):
        return cell_centers(self.Lx, self.Nx)

    @cached_property
    def v_axis(self):
        return cell_centers(self.Lv, self.Nv)

    @cached_property
    def x_points(self):
        """Cell centers in x, shape (Nx^n, n), C order."""
        return _tensor_points(self.x_axis, self.n)

    @cached_property
    def v_points(self):
        """Cell centers in v, shape (Nv^n, n), C order."""
        return _tensor_points(self.v_axis, self.n)

    def x_index(self, cell):
        return np.unravel_index(cell, (self.Nx,) * self.n)

    def v_index(self, cell):
        return np.unravel_index(cell, (self.Nv,) * self.n)

    def envelope(self, alpha, beta):
        """exp(−α|x|² − β|v|²) in matrix layout, evaluated exactly like sampled Maxwellians."""
        return _envelope(self, float(alpha), float(beta))

    def refined(self, factor=2):
        return replace(self, Nx=self.Nx * factor, Nv=self.Nv * factor)

    def to_dict(self):
        return dict(n=self.n, Lx=self.Lx, Lv=self.Lv, Nx=self.Nx, Nv=self.Nv)


def _tensor_points(axis, n):
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=-1)


def velocity_lattice(center, h, half_width, n):
    """Lattice center + h·k, |k_i| ≤ ceil(half_width/h), as array of shape (M, n)."""
    K = int(math.ceil(half_width / h))
    offsets = np.array(list(itertools.product(range(-K, K + 1), repeat=n)), dtype=float)
    return np.asarray(center, dtype=float) + h * offsets


@dataclass(frozen=True)
class MaxwellianSpec:
    """Envelope C·exp(−α|x − s·v|² − β|v|²).

    β = 0 encodes the infinite-mass case; on a truncated grid such fields
    carry finite mass only.
    """
    C: float
    alpha: float
    beta: float
    shift: float = 0.

    def __post_init__(self):
        if not (self.C >= 0 and self.alpha > 0 and self.beta >= 0):
            raise DomainError('MaxwellianSpec', f"need C >= 0, alpha > 0, beta >= 0; got C={self.C}, "
                                                f"alpha={self.alpha}, beta={self.beta}")

    def __call__(self, x, v):
        return maxwellian_eval(self, x, v)

    def scaled(self, c):
        return replace(self, C=c * self.C)

    def to_dict(self):
        return dict(C=self.C, alpha=self.alpha, beta=self.beta, shift=self.shift)


def maxwellian_eval(m, x, v):
    """C·exp(−α|x−s·v|²−β|v|²) for positions/velocities with trailing axis n."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    y = x - m.shift * v
    return m.C * np.exp(-m.alpha * np.sum(y * y, axis=-1) - m.beta * np.sum(v * v, axis=-1))


@lru_cache(maxsize=32)
def _envelope(grid, alpha, beta):
    values = maxwellian_eval(MaxwellianSpec(1., alpha, beta), grid.x_points[:, None, :], grid.v_points[None, :, :])
    values.flags.writeable = False
    return values
