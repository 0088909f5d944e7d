"""
Quadrature of the collision operator Q(f, g) = Q₊(f, g) − f·R(g) on a phase grid.

Everything is pointwise in x. The gain term goes through a table T with

    Q₊(f, g)(x, v_i) = Σ_{a,b} T[i, a, b]·f(x, v_a)·g(x, v_b)

collecting the kernel weights of all pairs (v_i, v_*), the angular nodes σ and
the multilinear interpolation stencils of the post-collision velocities
('v, 'v_*). The table only depends on kernel, velocity grid and angular rule.
"""
import itertools
import logging
import math
import time
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse
from numpy.polynomial.legendre import leggauss

from ..kernel.kernels import singular_cap
from ..phase.fields import check_compatible
from ..phase.grids import velocity_lattice
from ..taskapp.workers import serial_pool
from ..utils import DomainError

_log = logging.getLogger(__name__)

MIN_SIGMA_NODES = 8
UNIT_TOLERANCE = 1e-12
TRAJECTORY_IDENTITY_RTOL = 1e-12

# tables with at most this many entries are kept dense
DENSE_TABLE_LIMIT = 2 * 10 ** 7
# entries accumulated per block while building the gain table
TABLE_BLOCK_ENTRIES = 2 ** 22

DEFAULT_POINTWISE_SIGMA_NODES = 32


#
# Geometry
#
def sigma_nodes(n, count):
    """Angular nodes and weights on S^{n−1}.

    n = 2: `count` equally spaced angles with equal weights 2π/count.
    n = 3: Gauss–Legendre in cos θ (m nodes) times 2m uniform azimuths, m ≈ sqrt(count/2).
    The weights sum to |S^{n−1}|.
    """
    if count < MIN_SIGMA_NODES:
        raise DomainError('sigma_nodes', f"need at least {MIN_SIGMA_NODES} angular nodes, got {count}")
    if n == 2:
        theta = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1), np.full(count, 2 * np.pi / count)
    elif n == 3:
        m = max(2, int(round(math.sqrt(count / 2))))
        s, w = leggauss(m)
        phi = 2 * np.pi * (np.arange(2 * m) + 0.5) / (2 * m)
        S, P = np.meshgrid(s, phi, indexing='ij')
        r = np.sqrt(1 - S ** 2)
        nodes = np.stack([S, r * np.cos(P), r * np.sin(P)], axis=-1).reshape(-1, 3)
        weights = (w[:, None] * np.full(2 * m, np.pi / m)[None, :]).ravel()
        return nodes, weights
    raise DomainError('sigma_nodes', f"unsupported dimension {n}")


def post_collision(v, v_star, sigma):
    """Pre/post-collisional velocities 'v = v − (u·σ)σ, 'v_* = v_* + (u·σ)σ with u = v − v_*.

    Works on arrays with the velocity components on the last axis.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    length = np.linalg.norm(sigma, axis=-1)
    if np.any(np.abs(length - 1) > UNIT_TOLERANCE):
        raise DomainError('post_collision', f"sigma must be a unit vector, got |sigma| = {np.max(length)}")
    us = np.sum((v - v_star) * sigma, axis=-1, keepdims=True)
    return v - us * sigma, v_star + us * sigma


def trajectory_identity_check(x, v, v_star, sigma, tau):
    """|x+τ(v−'v)|² + |x+τ(v−'v_*)|² − (|x|² + |x+τu|²) in absolute value."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    tau = np.asarray(tau, dtype=float)[..., None]
    vp, vsp = post_collision(v, v_star, sigma)
    u = v - v_star
    lhs = np.sum((x + tau * (v - vp)) ** 2, axis=-1) + np.sum((x + tau * (v - vsp)) ** 2, axis=-1)
    rhs = np.sum(x ** 2, axis=-1) + np.sum((x + tau * u) ** 2, axis=-1)
    return np.abs(lhs - rhs)


def trajectory_identity_tolerance(x, v, v_star, tau):
    """Contract for trajectory_identity_check: 1e−12·(1 + |x|² + |u|²τ²)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(v, dtype=float) - np.asarray(v_star, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return TRAJECTORY_IDENTITY_RTOL * (1 + np.sum(x ** 2, axis=-1) + np.sum(u ** 2, axis=-1) * tau ** 2)


def _directions(u, r):
    """û = u/|u|; the first unit vector where u = 0."""
    e1 = np.zeros(u.shape[-1])
    e1[0] = 1.
    safe = np.where(r > 0, r, 1.)[..., None]
    return np.where(r[..., None] > 0, u / safe, e1)


def _stencils(points, axis0, h, N):
    """Multilinear stencils of points (..., n) on the tensor grid with first node axis0 and spacing h.

    Returns a list with (flat index, weight) for each of the 2^n corners.
    Corners outside the grid carry weight 0 (zero extension).
    """
    n = points.shape[-1]
    s = (points - axis0) / h
    lower = np.floor(s)
    theta = s - lower
    lower = lower.astype(np.int64)
    corners = []
    for offset in itertools.product((0, 1), repeat=n):
        index = np.zeros(points.shape[:-1], dtype=np.int64)
        weight = np.ones(points.shape[:-1])
        valid = np.ones(points.shape[:-1], dtype=bool)
        for d, o in enumerate(offset):
            k = lower[..., d] + o
            valid &= (k >= 0) & (k < N)
            weight = weight * (theta[..., d] if o else 1 - theta[..., d])
            index = index * N + k
        corners.append((np.where(valid, index, 0), np.where(valid, weight, 0.)))
    return corners


@lru_cache(maxsize=8)
def _potential_table(kernel, grid):
    """K(|v_i − v_j|)·hv^n with the singular cell replaced by the cell average."""
    v = grid.v_points
    r = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
    table = kernel.potential(r, grid.hv) * grid.hv ** grid.n
    table.flags.writeable = False
    return table


#
# Quadrature on a phase grid
#
class CollisionQuadrature:
    """Precomputed quadrature of Q₊ and R for a kernel on the velocity part of a grid."""

    def __init__(self, kernel, grid, Nsigma=16, pool=None):
        if kernel.n != grid.n:
            raise DomainError('CollisionQuadrature', f"kernel dimension {kernel.n} differs from grid dimension "
                                                     f"{grid.n}")
        self.kernel = kernel
        self.grid = grid
        self.sigma_nodes, self.sigma_weights = sigma_nodes(grid.n, Nsigma)
        self.Nsigma = len(self.sigma_weights)
        self.singular_cap = singular_cap(grid.hv, grid.n, kernel.lam)
        self.pool = serial_pool() if pool is None else pool

    def __repr__(self):
        return f"CollisionQuadrature(lam={self.kernel.lam}, n={self.grid.n}, Nv={self.grid.Nv}, " \
               f"Nsigma={self.Nsigma})"

    @property
    def dense(self):
        return self.grid.nv_cells ** 3 <= DENSE_TABLE_LIMIT

    @property
    def potential_table(self):
        return _potential_table(self.kernel, self.grid)

    @cached_property
    def gain_table(self):
        """T[i, a, b] as dense (N, N, N) array or as CSR matrix of shape (N, N²)."""
        start_time = time.perf_counter()
        grid = self.grid
        N = grid.nv_cells
        v = grid.v_points
        axis0 = grid.v_axis[0]
        block_size = max(1, TABLE_BLOCK_ENTRIES // (N * N))
        blocks = []
        for start in range(0, N, block_size):
            stop = min(start + block_size, N)
            c = stop - start
            vi = v[start:stop, None, :]
            vj = v[None, :, :]
            u = vi - vj
            r = np.linalg.norm(u, axis=-1)
            uhat = _directions(u, r)
            kern = self.potential_table[start:stop]
            rows = np.broadcast_to(np.arange(c)[:, None] * (N * N), (c, N))
            acc = np.zeros(c * N * N)
            for sigma, w_sigma in zip(self.sigma_nodes, self.sigma_weights):
                us = (u @ sigma)[..., None]
                weight = kern * self.kernel.angular(np.clip(uhat @ sigma, -1, 1)) * w_sigma
                prime = _stencils(vi - us * sigma, axis0, grid.hv, grid.Nv)
                prime_star = _stencils(vj + us * sigma, axis0, grid.hv, grid.Nv)
                index = [(rows + ia * N + ib).ravel() for ia, _ in prime for ib, _ in prime_star]
                contribution = [(weight * wa * wb).ravel() for _, wa in prime for _, wb in prime_star]
                acc += np.bincount(np.concatenate(index), weights=np.concatenate(contribution),
                                   minlength=acc.size)
            block = acc.reshape(c, N * N)
            blocks.append(block if self.dense else scipy.sparse.csr_matrix(block))
        if self.dense:
            table = np.concatenate(blocks).reshape(N, N, N)
            table.flags.writeable = False
        else:
            table = scipy.sparse.vstack(blocks, format='csr')
        _log.debug("Built %s gain table for %r in %.3f s.", 'dense' if self.dense else 'sparse', self,
                   time.perf_counter() - start_time)
        return table

    #
    # Matrix layout (x-cells, v-cells)
    #
    def loss_rate_matrix(self, G):
        """R(g) = ‖b‖·Σ_{v_*} g(x, v_*)·K(|v − v_*|)·hv^n."""
        G = np.asarray(G, dtype=float)
        table = self.potential_table
        norm = self.kernel.norm
        return self.pool.map_cells(lambda cells: norm * (G[cells] @ table.T), len(G))

    def gain_matrix(self, F, G):
        F = np.asarray(F, dtype=float)
        G = np.asarray(G, dtype=float)
        table = self.gain_table
        N = self.grid.nv_cells

        if self.dense:
            def block(cells):
                H = np.tensordot(F[cells], table, axes=([1], [1]))
                return np.einsum('xib,xb->xi', H, G[cells])
        else:
            def block(cells):
                outer = (F[cells][:, :, None] * G[cells][:, None, :]).reshape(-1, N * N)
                return np.asarray((table @ outer.T).T)

        return self.pool.map_cells(block, len(F))

    def apply_matrix(self, F, G):
        F = np.asarray(F, dtype=float)
        return self.gain_matrix(F, G) - F * self.loss_rate_matrix(G)


#
# Field interface
#
def loss_rate(g, kernel):
    """Loss rate R(g) of a field, as array in matrix layout."""
    if kernel.n != g.grid.n:
        raise DomainError('loss_rate', f"kernel dimension {kernel.n} differs from grid dimension {g.grid.n}")
    return kernel.norm * (g.matrix @ _potential_table(kernel, g.grid).T)


def gain(f, g, q):
    """Gain term Q₊(f, g), as array in matrix layout."""
    check_compatible(f, g)
    return q.gain_matrix(f.matrix, g.matrix)


def apply_Q(f, g, q):
    """Q(f, g) = Q₊(f, g) − f·R(g), as array in matrix layout."""
    check_compatible(f, g)
    return q.apply_matrix(f.matrix, g.matrix)


def collision_moments(q, f):
    """Weak-form moments Σ_v Q(f,f)·φ·hv^n for φ ∈ {1, v_1, ..., v_n, |v|²}.

    The relative residual of each moment divides the largest absolute moment
    over x by the largest value of Σ_v (Q₊ + Q₋)·|φ|·hv^n.
    """
    grid = f.grid
    F = f.matrix
    gain_values = q.gain_matrix(F, F)
    loss_values = F * q.loss_rate_matrix(F)
    values = gain_values - loss_values
    v = grid.v_points
    tests = {'mass': np.ones(len(v))}
    for d in range(grid.n):
        tests[f'momentum_{d}'] = v[:, d]
    tests['energy'] = np.sum(v * v, axis=-1)
    measure = grid.hv ** grid.n
    moments = {}
    relative = {}
    for name, phi in tests.items():
        m = values @ phi * measure
        scale = np.max((gain_values + loss_values) @ np.abs(phi) * measure)
        moments[name] = m
        relative[name] = float(np.max(np.abs(m)) / scale) if scale > 0 else 0.
    return dict(moments=moments, relative=relative, residual=max(relative.values()))


#
# Pointwise evaluation for analytic envelopes
#
def loss_rate_at(g, v, kernel, h, half_width):
    """R(g)(v) for a callable g(w) on the lattice v + h·k, |k_i| ≤ half_width/h."""
    v = np.asarray(v, dtype=float)
    v_star = velocity_lattice(v, h, half_width, kernel.n)
    r = np.linalg.norm(v - v_star, axis=-1)
    return float(kernel.norm * np.sum(g(v_star) * kernel.potential(r, h)) * h ** kernel.n)


def gain_at(f, g, v, kernel, h, half_width, nsigma=DEFAULT_POINTWISE_SIGMA_NODES):
    """Q₊(f, g)(v) for callables f(w), g(w) on the lattice v + h·k, |k_i| ≤ half_width/h.

    No interpolation enters: f and g are evaluated at the exact post-collision velocities.
    """
    v = np.asarray(v, dtype=float)
    v_star = velocity_lattice(v, h, half_width, kernel.n)
    u = v - v_star
    r = np.linalg.norm(u, axis=-1)
    uhat = _directions(u, r)
    kern = kernel.potential(r, h) * h ** kernel.n
    nodes, weights = sigma_nodes(kernel.n, nsigma)
    total = 0.
    for sigma, w_sigma in zip(nodes, weights):
        us = (u @ sigma)[:, None]
        b = kernel.angular(np.clip(uhat @ sigma, -1, 1))
        total += w_sigma * np.sum(kern * b * f(v - us * sigma) * g(v_star + us * sigma))
    return float(total)
