"""Kernel tables on the lattice, generated potentials, energies and heights.

Potentials are collocated at cell centers while each cell's mass is spread
uniformly over the cell, so the interaction between two cells whose centers
differ by ``Δk·h`` is the average of W over the cube of side h centered at
``Δk·h``.  For singular kernels that average is finite exactly when W is
locally integrable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import roots_legendre

from .grid import DiscreteMeasure, Domain, GridSpec, bump_profile
from .kernels import Kernel


class FieldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cube quadrature


def _gauss_tensor(d: int, n: int):
    x, w = roots_legendre(n)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    pts = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    return pts, wts


def cube_integral(f, lo, side: float, rtol: float = 1e-6, n: int = 6, max_depth: int = 12) -> float:
    """∫ f over the cube ``lo + [0, side]^d`` by adaptive tensor Gauss rules.

    A cube is accepted once the parent rule agrees with the sum over its
    2^d children to ``rtol``; otherwise every child is refined.
    """
    lo = np.asarray(lo, dtype=float)
    d = lo.size
    pts, wts = _gauss_tensor(d, n)
    corners = np.array(list(itertools.product((0.0, 0.5), repeat=d)))

    def rule(origin, s):
        return float(np.dot(wts, f(origin + s * pts))) * s ** d

    def refine(origin, s, coarse, depth):
        kids = [(origin + s * c, s / 2) for c in corners]
        vals = [rule(o, t) for o, t in kids]
        fine = sum(vals)
        if depth >= max_depth or abs(fine - coarse) <= rtol * abs(fine):
            return fine
        return sum(refine(o, t, v, depth + 1) for (o, t), v in zip(kids, vals))

    return refine(lo, float(side), rule(lo, float(side)), 0)


def cell_average(k: Kernel, center, h: float, rtol: float = 1e-6) -> float:
    """Average of W over the cube of side ``h`` centered at ``center``.

    When the cube contains the origin it is cut into orthant cubes with the
    singularity at a corner; each is reduced level by level (the corner child
    is a scaled copy) and the leftover corner is closed with the geometric
    tail for the declared exponent.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    d = center.size
    lo = center - h / 2
    hi = center + h / 2
    if not (np.all(lo < 0) and np.all(hi > 0)) or not k.singular:
        return cube_integral(k.value, lo, h, rtol) / h ** d
    total = 0.0
    b = k.b_near if k.b_near is not None else 0.0
    q = 2.0 ** (-(d + b))
    for signs in itertools.product((-1.0, 1.0), repeat=d):
        signs = np.asarray(signs)
        ext = np.where(signs > 0, hi, -lo)

        def f(p, signs=signs):
            return k.value(p * signs)

        total += _corner_box(f, ext, q, rtol)
    return total / h ** d


def _corner_box(f, ext, q, rtol, max_levels: int = 80):
    """∫ f over the box ``[0, ext]`` with a singularity at the origin."""
    d = ext.size
    corners = [np.asarray(c) for c in itertools.product((0.0, 1.0), repeat=d) if any(c)]
    total = 0.0
    box = ext.astype(float)
    last = None
    for _ in range(max_levels):
        half = box / 2
        ring = 0.0
        for c in corners:
            ring += _box_integral(f, c * half, half, rtol)
        total += ring
        if last is not None and ring != 0 and abs(ring * q / (1 - q)) <= 1e-14 * abs(total):
            break
        last = ring
        box = half
    # remaining corner box, scaled copy of the last ring level
    return total + ring * q / (1 - q)


def _box_integral(f, lo, ext, rtol):
    """Adaptive integral over an axis-aligned box, split into near-cubes."""
    side = float(ext.min())
    counts = np.maximum(1, np.round(ext / side)).astype(int)
    steps = ext / counts
    d = ext.size
    total = 0.0
    if np.allclose(steps, steps[0]):
        for idx in itertools.product(*[range(c) for c in counts]):
            total += cube_integral(f, lo + np.asarray(idx) * steps, steps[0], rtol)
        return total
    # anisotropic box: map the unit cube
    scale = np.prod(steps)
    for idx in itertools.product(*[range(c) for c in counts]):
        origin = lo + np.asarray(idx) * steps
        total += cube_integral(lambda p: f(origin + p * steps), np.zeros(d), 1.0, rtol) * scale
    return total


# ---------------------------------------------------------------------------
# kernel table


@dataclass(frozen=True, eq=False)
class KernelTable:
    """``T[Δk]`` for every lattice offset the grid can realize.

    ``table`` has shape ``2*n - 1`` along each axis; offset ``Δk`` sits at
    index ``Δk + n - 1``.
    """

    kernel: Kernel
    grid: GridSpec
    table: np.ndarray

    @property
    def diagonal(self) -> float:
        return float(self.table[tuple(n - 1 for n in self.grid.shape)])

    def column(self, index) -> np.ndarray:
        """``T[i - c]`` as a grid array, i.e. the potential of a unit atom at c."""
        sl = tuple(slice(n - 1 - c, 2 * n - 1 - c) for c, n in zip(index, self.grid.shape))
        return self.table[sl]

    def offset(self, dk) -> float:
        return float(self.table[tuple(int(a) + n - 1 for a, n in zip(dk, self.grid.shape))])

    def convolve(self, w: np.ndarray, method: str = "auto") -> np.ndarray:
        """``(T w)_i = sum_j T[i-j] w_j`` on the grid."""
        w = np.asarray(w, dtype=float).reshape(self.grid.shape)
        if method == "auto":
            method = "direct" if w.size <= 64 else "fft"
        if method == "direct":
            return _direct(self.table, w)
        if method == "fft":
            full = fftconvolve(w, self.table, mode="full")
            sl = tuple(slice(n - 1, 2 * n - 1) for n in self.grid.shape)
            return np.ascontiguousarray(full[sl])
        raise FieldError(f"unknown convolution method {method!r}")

    def quadratic(self, w: np.ndarray, method: str = "auto") -> float:
        """``w·Tw`` for a signed weight array."""
        w = np.asarray(w, dtype=float).reshape(self.grid.shape)
        return float(np.sum(w * self.convolve(w, method)))


def _direct(table, w):
    out = np.zeros(w.shape)
    shape = w.shape
    for j in zip(*np.nonzero(w)):
        sl = tuple(slice(n - 1 - c, 2 * n - 1 - c) for c, n in zip(j, shape))
        out += w[j] * table[sl]
    return out


def _offset_grid(grid: GridSpec) -> np.ndarray:
    axes = [np.arange(-(n - 1), n) * grid.spacing for n in grid.shape]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def cell_averaged_kernel(k: Kernel, grid: GridSpec, rtol: float = 1e-6) -> KernelTable:
    """Build ``T`` for ``k`` on ``grid`` (cached on the pair)."""
    if k.dim != grid.dim:
        raise FieldError("kernel and grid dimensions differ")
    if not k.locally_integrable():
        raise FieldError("kernel not locally integrable")
    return _table(k, grid, rtol)


@lru_cache(maxsize=16)
def _table(k, grid, rtol):
    d = grid.dim
    h = grid.spacing
    offs = _offset_grid(grid)
    with np.errstate(divide="ignore"):
        T = np.asarray(k.value(offs), dtype=float)
    if k.singular:
        mid = tuple(n - 1 for n in grid.shape)
        for dk in itertools.product((-1, 0, 1), repeat=d):
            idx = tuple(m + a for m, a in zip(mid, dk))
            if any(i < 0 or i >= 2 * n - 1 for i, n in zip(idx, grid.shape)):
                continue
            T[idx] = cell_average(k, np.asarray(dk, dtype=float) * h, h, rtol)
        # exact evenness
        T = 0.5 * (T + T[tuple(slice(None, None, -1) for _ in range(d))])
    if not np.all(np.isfinite(T)):
        raise FieldError("kernel not locally integrable")
    T.setflags(write=False)
    return KernelTable(k, grid, T)


def as_table(k, grid: GridSpec) -> KernelTable:
    if isinstance(k, KernelTable):
        if k.grid != grid:
            raise FieldError("incompatible grids")
        return k
    return cell_averaged_kernel(k, grid)


# ---------------------------------------------------------------------------
# external potentials


@dataclass(frozen=True, eq=False)
class ExternalPotential:
    grid: GridSpec
    values: np.ndarray
    u_infty: float = 0.0
    builder: str = "tabulated"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise FieldError("external potential must be finite (bounded from below)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def infimum(self) -> float:
        return float(self.values.min())

    def scaled(self, factor: float) -> "ExternalPotential":
        return ExternalPotential(self.grid, self.values * factor, self.u_infty * factor,
                                 self.builder, {**self.params, "factor": factor})


def zero_potential(grid: GridSpec) -> ExternalPotential:
    return ExternalPotential(grid, np.zeros(grid.shape), 0.0, "zero")


def bump_well(grid: GridSpec, depth: float, radius: float, center=None,
              u_infty: float = 0.0) -> ExternalPotential:
    """``U = u_infty - depth * e * bump(|x - center| / radius)``; minimum ``u_infty - depth``."""
    r = grid.radii(center)
    vals = u_infty - depth * math.e * bump_profile(r / radius)
    return ExternalPotential(grid, vals, u_infty, "bump_well",
                             {"depth": depth, "radius": radius,
                              "center": None if center is None else list(center)})


def balayage(k, omega: DiscreteMeasure, mass: float = 1.0) -> ExternalPotential:
    """``U = -mass * (W * omega)`` with ``omega`` a probability measure."""
    T = as_table(k, omega.grid)
    vals = -mass * T.convolve(omega.weights)
    return ExternalPotential(omega.grid, vals, 0.0, "balayage", {"mass": mass})


# ---------------------------------------------------------------------------
# potentials, energy, height


@dataclass(frozen=True, eq=False)
class PotentialField:
    grid: GridSpec
    values: np.ndarray


def _check_grids(*grids):
    g0 = grids[0]
    for g in grids[1:]:
        if g != g0:
            raise FieldError("incompatible grids")


def generated_potential(k, U: ExternalPotential, m: DiscreteMeasure,
                        method: str = "auto") -> PotentialField:
    """``V = W*m + U`` at cell centers."""
    _check_grids(U.grid, m.grid)
    T = as_table(k, m.grid)
    return PotentialField(m.grid, T.convolve(m.weights, method) + U.values)


def interaction_energy(k, grid: GridSpec, w: np.ndarray, method: str = "auto") -> float:
    """``E_W[w] = ½ w·Tw`` for signed weights."""
    return 0.5 * as_table(k, grid).quadratic(w, method)


def energy(k, U: ExternalPotential, m: DiscreteMeasure, method: str = "auto") -> float:
    _check_grids(U.grid, m.grid)
    T = as_table(k, m.grid)
    w = m.weights
    return 0.5 * float(np.sum(w * T.convolve(w, method))) + float(np.sum(U.values * w))


def masked_argmin(values: np.ndarray, mask: np.ndarray):
    """Minimum of ``values`` over ``mask`` and the first (C-order) index attaining it."""
    if not mask.any():
        raise FieldError("empty S")
    v = np.where(mask, values, np.inf)
    flat = int(np.argmin(v))
    idx = np.unravel_index(flat, values.shape)
    return float(v[idx]), tuple(int(i) for i in idx)


def height(k, U: ExternalPotential, m: DiscreteMeasure, S: Domain, method: str = "auto"):
    """``H_S[m] = min over S of V[m]`` and its witnessing cell."""
    _check_grids(U.grid, m.grid, S.grid)
    if not S.mask.any():
        raise FieldError("empty S")
    V = generated_potential(k, U, m, method).values
    return masked_argmin(V, S.mask)


def export_potential_rows(V: PotentialField):
    """Rows ``(indices..., coordinates..., V)`` in C order."""
    g = V.grid
    c = g.centers().reshape(-1, g.dim)
    idx = np.stack(np.unravel_index(np.arange(g.size), g.shape), axis=-1)
    return idx, c, V.values.reshape(-1)
