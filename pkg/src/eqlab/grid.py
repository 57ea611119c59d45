"""Uniform lattices, feasibility masks and discrete probability measures.

A measure lives on the cells of a :class:`GridSpec`; a cell belongs to a set
(a domain, a ball) iff its center does.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SUPPORT_THRESHOLD = 1e-10
MASS_TOL = 1e-12


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice of ``prod(shape)`` cubic cells of side ``spacing``."""

    dim: int
    origin: tuple[float, ...]
    spacing: float
    shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if self.dim < 1:
            raise GridError("dim must be >= 1")
        if len(self.origin) != self.dim or len(self.shape) != self.dim:
            raise GridError("origin/shape length must equal dim")
        if not self.spacing > 0:
            raise GridError("spacing must be positive")
        if min(self.shape) < 1:
            raise GridError("every shape entry must be >= 1")

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], h: float) -> "GridSpec":
        """Grid covering ``[lower, upper]`` with cells of side ``h`` (rounded up)."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        shape = np.maximum(1, np.round((upper - lower) / h).astype(int))
        return cls(len(lower), tuple(lower), float(h), tuple(shape))

    @classmethod
    def centered(cls, dim: int, half_width: float, n: int) -> "GridSpec":
        """``n**dim`` cells covering ``[-half_width, half_width]**dim``."""
        h = 2.0 * half_width / n
        return cls(dim, (-half_width,) * dim, h, (n,) * dim)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axes(self) -> list[np.ndarray]:
        return [self.origin[a] + (np.arange(n) + 0.5) * self.spacing
                for a, n in enumerate(self.shape)]

    def centers(self) -> np.ndarray:
        """Cell centers, array of shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def radii(self, center: Sequence[float] | None = None) -> np.ndarray:
        c = self.centers()
        if center is not None:
            c = c - np.asarray(center, dtype=float)
        return np.sqrt(np.sum(c * c, axis=-1))

    def center_of(self, index: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(index) + 0.5) * self.spacing

    def circumradius(self) -> float:
        """Largest distance from the origin to a cell center."""
        return float(self.radii().max())

    def ball_mask(self, radius: float, center: Sequence[float] | None = None,
                  closed: bool = False) -> np.ndarray:
        r = self.radii(center)
        return r <= radius if closed else r < radius


# ---------------------------------------------------------------------------
# domains


FULL_SPACE = "full_space"
HALF_LINE = "half_line"
CURVED_HALF_SPACE = "curved_half_space"
BALL = "ball"


@dataclass(frozen=True, eq=False)
class Domain:
    grid: GridSpec
    mask: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise GridError("mask shape does not match grid")
        if not m.any():
            raise GridError("infeasible domain")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    def interior(self) -> "Domain":
        """Masked cells whose lattice neighbours (faces) are masked too.

        The outer face of the grid box is not treated as a boundary: it is a
        truncation artifact, not part of the boundary of D.
        """
        m = self.mask.copy()
        inner = m.copy()
        for axis in range(self.grid.dim):
            for shift in (1, -1):
                nb = np.roll(m, shift, axis=axis)
                edge = [slice(None)] * self.grid.dim
                edge[axis] = 0 if shift == 1 else -1
                nb[tuple(edge)] = m[tuple(edge)]
                inner &= nb
        if not inner.any():
            return self
        return Domain(self.grid, inner, self.kind, dict(self.params))


def make_domain(kind: str, grid: GridSpec, params: dict | None = None) -> Domain:
    """Build the feasibility mask for ``kind`` on ``grid``.

    ``half_line`` needs ``params["x0"]``; ``curved_half_space`` needs
    ``params["phi"]``, one sample of the boundary graph per column of the last
    axis (shape ``grid.shape[:-1]``); ``ball`` needs ``params["radius"]``.
    """
    params = dict(params or {})
    c = grid.centers()
    if kind == FULL_SPACE:
        mask = np.ones(grid.shape, dtype=bool)
    elif kind == HALF_LINE:
        if grid.dim != 1:
            raise GridError("half_line requires dim == 1")
        mask = c[..., 0] >= float(params["x0"])
    elif kind == CURVED_HALF_SPACE:
        if grid.dim < 2:
            raise GridError("curved_half_space requires dim >= 2")
        phi = np.asarray(params["phi"], dtype=float)
        if phi.shape != grid.shape[:-1]:
            raise GridError("bad Φ table")
        if grid.dim >= 3:
            warnings.warn("curved half-space with d >= 3 is beyond the proven existence "
                          "theorem; results carry no guarantee", stacklevel=2)
        mask = c[..., -1] >= phi[..., None]
    elif kind == BALL:
        mask = grid.ball_mask(float(params["radius"]), params.get("center"), closed=True)
    else:
        raise GridError(f"unknown domain kind {kind!r}")
    return Domain(grid, mask, kind, params)


def modulus_of_continuity(grid: GridSpec, phi: np.ndarray, eps: float) -> float:
    """Sampled ``sup |Φ(x̂)-Φ(ŷ)|`` over column centers with ``|x̂-ŷ| <= eps``."""
    phi = np.asarray(phi, dtype=float)
    h = grid.spacing
    k = int(math.floor(eps / h + 1e-12))
    best = 0.0
    for off in np.ndindex(*(2 * k + 1,) * phi.ndim):
        off = np.asarray(off) - k
        if h * np.linalg.norm(off) > eps + 1e-12 or not off.any():
            continue
        src = tuple(slice(max(0, -o), n - max(0, o)) for o, n in zip(off, phi.shape))
        dst = tuple(slice(max(0, o), n - max(0, -o)) for o, n in zip(off, phi.shape))
        a, b = phi[src], phi[dst]
        if a.size:
            best = max(best, float(np.abs(a - b).max()))
    return best


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Nonnegative cell weights on a grid.

    Probability measures are the default; ``check_mass=False`` admits the
    sub-probability intermediates some constructions need.
    """

    grid: GridSpec
    weights: np.ndarray
    check_mass: bool = True

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(w)):
            raise GridError("weights must be finite")
        if (w < 0).any():
            raise GridError("weights must be nonnegative")
        if self.check_mass and abs(w.sum() - 1.0) > MASS_TOL * max(1, w.size) ** 0.5 * 10:
            raise GridError(f"total mass {w.sum()!r} is not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def support(self, threshold: float = 0.0) -> np.ndarray:
        return self.weights > threshold

    def l1(self, other: "DiscreteMeasure") -> float:
        return float(np.abs(self.weights - other.weights).sum())

    @classmethod
    def point_mass(cls, grid: GridSpec, index: Sequence[int]) -> "DiscreteMeasure":
        w = np.zeros(grid.shape)
        w[tuple(index)] = 1.0
        return cls(grid, w)

    @classmethod
    def uniform(cls, grid: GridSpec, mask: np.ndarray | None = None) -> "DiscreteMeasure":
        m = np.ones(grid.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if not m.any():
            raise GridError("cannot normalize")
        return cls(grid, m / m.sum())

    @classmethod
    def from_density(cls, grid: GridSpec, density: np.ndarray) -> "DiscreteMeasure":
        return normalize(cls(grid, np.asarray(density, dtype=float), check_mass=False))


def bump_measure(grid: GridSpec, radius: float, center: Sequence[float] | None = None) -> DiscreteMeasure:
    """Standard bump of the given radius sampled at cell centers, unit mass."""
    if radius < grid.spacing * (1 - 1e-12):
        raise GridError("mollifier under-resolved")
    return DiscreteMeasure.from_density(grid, bump_profile(grid.radii(center) / radius))


def boundary_mass(m: DiscreteMeasure, R: float, width: float | None = None) -> float:
    """Mass in cells whose centers lie within ``width`` (default 2h) inside |x| = R."""
    w = 2 * m.grid.spacing if width is None else width
    r = m.grid.radii()
    return float(m.weights[(r > R - w) & (r <= R)].sum())


def normalize(m: DiscreteMeasure) -> DiscreteMeasure:
    total = m.weights.sum()
    if not total > 0:
        raise GridError("cannot normalize")
    return DiscreteMeasure(m.grid, m.weights / total)


def truncate_rescale(m: DiscreteMeasure, R: float) -> DiscreteMeasure:
    """Restrict to cells with center in the open ball ``B(0;R)`` and renormalize."""
    inside = m.grid.ball_mask(R)
    w = np.where(inside, m.weights, 0.0)
    captured = w.sum()
    if not captured > 0:
        raise GridError("empty truncation")
    if captured == m.weights.sum():
        return DiscreteMeasure(m.grid, m.weights)
    return DiscreteMeasure(m.grid, w / captured)


def captured_mass(m: DiscreteMeasure, R: float) -> float:
    return float(m.weights[m.grid.ball_mask(R)].sum())


def bump_profile(r: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on r < 1, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def bump_stencil(grid: GridSpec, eps: float) -> np.ndarray:
    """Discretely normalized bump of radius ``eps`` sampled on lattice offsets."""
    k = int(math.ceil(eps / grid.spacing))
    ax = np.arange(-k, k + 1) * grid.spacing
    mesh = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    r = np.sqrt(sum(g * g for g in mesh))
    s = bump_profile(r / eps)
    return s / s.sum()


def ball_stencil(grid: GridSpec, radius: float) -> np.ndarray:
    """Uniform weights on lattice offsets with ``|offset| < radius``."""
    k = int(math.ceil(radius / grid.spacing))
    ax = np.arange(-k, k + 1) * grid.spacing
    mesh = np.meshgrid(*([ax] * grid.dim), indexing="ij")
    r = np.sqrt(sum(g * g for g in mesh))
    s = (r < radius).astype(float)
    return s / s.sum()


def _convolve_same(w: np.ndarray, stencil: np.ndarray) -> np.ndarray:
    from scipy.signal import convolve

    out = convolve(w, stencil, mode="same", method="direct")
    return np.maximum(out, 0.0)


def _fits_after_spread(w: np.ndarray, k: int) -> bool:
    supp = np.nonzero(w > 0)
    for axis, n in enumerate(w.shape):
        if supp[axis].min() - k < 0 or supp[axis].max() + k > n - 1:
            return False
    return True


def mollify(m: DiscreteMeasure, eps: float) -> DiscreteMeasure:
    """Convolve with the normalized bump of radius ``eps``.

    The bump is radially decreasing and sampled at lattice offsets, so the
    support grows by less than ``eps + h`` in every direction.
    """
    h = m.grid.spacing
    if eps < h * (1 - 1e-12):
        raise GridError("mollifier under-resolved")
    stencil = bump_stencil(m.grid, eps)
    k = stencil.shape[0] // 2
    if not _fits_after_spread(m.weights, k):
        raise GridError("mollified support leaves the grid")
    w = _convolve_same(m.weights, stencil)
    return DiscreteMeasure(m.grid, w / w.sum() * m.weights.sum(), check_mass=m.check_mass)


def translate(m: DiscreteMeasure, shift: Sequence[float]) -> DiscreteMeasure:
    """Move all weights by a lattice vector ``shift`` (length units)."""
    h = m.grid.spacing
    shift = np.asarray(shift, dtype=float).reshape(m.grid.dim)
    steps = np.round(shift / h)
    if np.any(np.abs(steps * h - shift) > 1e-9 * max(h, 1.0)):
        raise GridError("shift must be a lattice vector")
    steps = steps.astype(int)
    w = m.weights
    supp = np.nonzero(w > 0)
    for axis, n in enumerate(w.shape):
        if supp[axis].min() + steps[axis] < 0 or supp[axis].max() + steps[axis] > n - 1:
            raise GridError("translation out of bounds")
    out = np.zeros_like(w)
    src = tuple(slice(max(0, -s), n - max(0, s)) for s, n in zip(steps, w.shape))
    dst = tuple(slice(max(0, s), n - max(0, -s)) for s, n in zip(steps, w.shape))
    out[dst] = w[src]
    return DiscreteMeasure(m.grid, out, check_mass=m.check_mass)


def compactify(m: DiscreteMeasure, R1: float, R2: float) -> DiscreteMeasure:
    """Keep the mass in ``B(0;R1)``; spread the rest uniformly over ``B(0;R2)``."""
    if not R2 > 0:
        raise GridError("R2 must be positive")
    g = m.grid
    keep = g.ball_mask(R1)
    target = g.ball_mask(R2)
    w = np.where(keep, m.weights, 0.0)
    excess = 1.0 - w.sum()
    if excess <= 0:
        return DiscreteMeasure(g, m.weights)
    if not target.any():
        raise GridError("cannot place excess mass")
    w = w + excess * target / target.sum()
    return DiscreteMeasure(g, w)


def support_diameter(m: DiscreteMeasure, threshold: float = SUPPORT_THRESHOLD) -> float:
    """Largest distance between centers of cells carrying weight > ``threshold``."""
    pts = m.grid.centers()[m.weights > threshold]
    if len(pts) < 2:
        return 0.0
    from scipy.spatial import ConvexHull, QhullError
    from scipy.spatial.distance import pdist

    if len(pts) > 2000 and m.grid.dim > 1:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    if m.grid.dim == 1:
        return float(pts.max() - pts.min())
    return float(pdist(pts).max())
