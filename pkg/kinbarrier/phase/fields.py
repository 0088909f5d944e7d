"""
Distribution fields on a phase grid, norms and the free-transport (trajectory) transform.

A field in the trajectory frame holds f^#(t, x, v) = f(t, x + t·v, v).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..utils import DomainError
from .grids import PhaseGrid, maxwellian_eval

_log = logging.getLogger(__name__)

FRAMES = ('lab', 'trajectory')


class FieldException(Exception):
    """Generic exception for problems with distribution fields."""
    pass


class InvalidField(FieldException):
    """Field values violate nonnegativity or finiteness."""

    def __init__(self, reason):
        self._reason = reason

    def __str__(self):
        return f"Invalid distribution field: {self._reason}"


class FrameMismatch(FieldException):
    """A field was passed in the wrong frame or on a different grid."""

    def __init__(self, expected, got):
        self._expected = expected
        self._got = got

    def __str__(self):
        return f"Expected {self._expected}, got {self._got}."


@dataclass(frozen=True, eq=False)
class DistributionField:
    """Immutable snapshot of nonnegative values of f (or f^#) at time t."""
    grid: PhaseGrid
    t: float
    values: np.ndarray
    frame: str = 'lab'

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise FrameMismatch(f"frame in {FRAMES}", self.frame)
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.nx_cells * self.grid.nv_cells:
            raise InvalidField(f"{values.size} values for a grid with shape {self.grid.shape}")
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise InvalidField("non-finite values")
        if np.any(values < 0):
            raise InvalidField(f"negative values (min {values.min()})")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def matrix(self):
        """Values in (x-cell, v-cell) layout."""
        return self.values.reshape(self.grid.matrix_shape)

    @classmethod
    def from_matrix(cls, grid, t, matrix, frame='lab', clamp=False):
        matrix = np.asarray(matrix, dtype=float)
        if clamp:
            matrix = np.maximum(matrix, 0.)
        return cls(grid, t, matrix.reshape(grid.shape), frame)

    @classmethod
    def zeros(cls, grid, t=0., frame='lab'):
        return cls(grid, t, np.zeros(grid.shape), frame)

    def with_values(self, matrix, clamp=False):
        return DistributionField.from_matrix(self.grid, self.t, matrix, self.frame, clamp=clamp)

    def scaled(self, c):
        return self.with_values(c * self.matrix)

    def at_time(self, t):
        """Same values relabeled to time t (only meaningful for time-independent data)."""
        return DistributionField(self.grid, t, self.values, self.frame)


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """Fields on a common grid and frame at times `times`.

    values has shape (len(times), Nx^n, Nv^n).
    """
    grid: PhaseGrid
    times: np.ndarray
    values: np.ndarray
    frame: str = 'trajectory'

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float).reshape((len(times),) + self.grid.matrix_shape)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidField("series values must be finite and nonnegative")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.times)

    def field(self, k):
        return DistributionField.from_matrix(self.grid, self.times[k], self.values[k], self.frame)

    def fields(self):
        return [self.field(k) for k in range(len(self))]

    @classmethod
    def stationary(cls, field, times):
        """Series repeating the values of `field` at every time."""
        values = np.broadcast_to(field.matrix, (len(times),) + field.grid.matrix_shape)
        return cls(field.grid, times, values, field.frame)

    @classmethod
    def from_fields(cls, fields):
        grid = fields[0].grid
        frame = fields[0].frame
        for f in fields:
            check_compatible(fields[0], f)
        return cls(grid, [f.t for f in fields], np.stack([f.matrix for f in fields]), frame)


def check_compatible(f, g, frame=None):
    if f.grid != g.grid:
        raise FrameMismatch(f"grid {f.grid}", f"grid {g.grid}")
    if f.frame != g.frame:
        raise FrameMismatch(f"frame '{f.frame}'", f"frame '{g.frame}'")
    if frame is not None and f.frame != frame:
        raise FrameMismatch(f"frame '{frame}'", f"frame '{f.frame}'")


#
# Norms
#
def weighted_sup(matrix, grid, alpha, beta):
    """max |values|·exp(α|x|²+β|v|²) over the trailing (x-cell, v-cell) axes."""
    # dividing by the sampled envelope makes ‖M_{α,β}‖_{α,β} = 1 bit-exactly
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.abs(matrix) / grid.envelope(alpha, beta)
    return np.max(np.nan_to_num(ratio, nan=0.), axis=(-2, -1))


def weighted_sup_norm(f, alpha, beta):
    """‖f‖_{α,β} = max over cells of f·exp(α|x|²+β|v|²)."""
    return float(weighted_sup(f.matrix, f.grid, alpha, beta))


def lp(matrix, grid, p):
    """Grid Lᵖ norm over (x, v) of the trailing two axes."""
    a = np.abs(matrix)
    if np.isinf(p):
        return np.max(a, axis=(-2, -1))
    return (np.sum(a ** p, axis=(-2, -1)) * grid.cell_volume) ** (1 / p)


def lp_norm(f, p):
    """(Σ values^p · hx^n hv^n)^{1/p}, or the max value for p = ∞."""
    if p < 1:
        raise DomainError('lp_norm', f"exponent p must be at least 1, got {p}")
    return float(lp(f.matrix, f.grid, p))


def velocity_lp(matrix, grid, p):
    """Lᵖ_v norm for each x-cell, shape (..., Nx^n)."""
    a = np.abs(matrix)
    if np.isinf(p):
        return np.max(a, axis=-1)
    return (np.sum(a ** p, axis=-1) * grid.hv ** grid.n) ** (1 / p)


#
# Trajectory transform
#
def transport(matrix, grid, t):
    """Resample values at (x + t·v, v) by multilinear interpolation in x.

    Outside the box the field is zero; between the outermost cell centers and
    the box edge it decays linearly to zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    if t == 0:
        return matrix.copy()
    xshape = (grid.Nx,) * grid.n
    out = np.empty_like(matrix)
    for j, v in enumerate(grid.v_points):
        shift = -t * v / grid.hx
        column = matrix[:, j]
        if not np.any(shift) or not np.any(column):
            out[:, j] = column
            continue
        out[:, j] = ndimage.shift(column.reshape(xshape), shift, order=1,
                                  mode='grid-constant', cval=0.).ravel()
    return out


def to_trajectory(f):
    """f ↦ f^#, f^#(t, x, v) = f(t, x + t·v, v)."""
    if f.frame != 'lab':
        raise FrameMismatch("a lab-frame field", f"frame '{f.frame}'")
    return DistributionField.from_matrix(f.grid, f.t, transport(f.matrix, f.grid, f.t), 'trajectory', clamp=True)


def from_trajectory(g):
    """g^# ↦ g, g(t, x, v) = g^#(t, x − t·v, v)."""
    if g.frame != 'trajectory':
        raise FrameMismatch("a trajectory-frame field", f"frame '{g.frame}'")
    return DistributionField.from_matrix(g.grid, g.t, transport(g.matrix, g.grid, -g.t), 'lab', clamp=True)


def sample_maxwellian(specs, grid, t=0., frame='lab'):
    """Sample a Maxwellian (or a sum of them) directly in the requested frame.

    In the trajectory frame the lab envelope is evaluated at (x + t·v, v), so
    no interpolation error enters.
    """
    if not isinstance(specs, (list, tuple)):
        specs = [specs]
    x = grid.x_points[:, None, :]
    v = grid.v_points[None, :, :]
    if frame == 'trajectory':
        x = x + t * v
    values = sum(maxwellian_eval(m, x, v) for m in specs)
    return DistributionField.from_matrix(grid, t, values, frame)
