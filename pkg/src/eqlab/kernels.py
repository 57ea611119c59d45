"""Interaction kernels W(x) and the analysis tools that only need W.

Every kernel is an immutable, hashable value.  Radial kernels expose a profile
``w(r)`` with its first two derivatives; the Laplacian then follows from
``w'' + (d-1) w'/r``.  The anisotropic family ``-|x|^b/b (1 + alpha*omega)``
carries an angular factor whose spherical Laplacian is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, special
from scipy.interpolate import CubicSpline


class KernelError(ValueError):
    pass


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def newtonian_profile(d: int, r):
    """Repulsive Newtonian potential N with -ΔN = δ, as a function of |x|."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        if d == 2:
            return -np.log(r) / (2 * math.pi)
        return -r ** (2.0 - d) / ((2.0 - d) * sphere_area(d))


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise KernelError(f"expected points with last axis {d}, got {x.shape}")
    return x


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


@dataclass(frozen=True)
class Kernel:
    """Base descriptor; subclasses fill in the profile."""

    dim: int

    singular = False
    radial = True
    derivable = True
    variant = "kernel"

    def __post_init__(self):
        if self.dim < 1:
            raise KernelError("dim must be >= 1")

    # -- radial profile --------------------------------------------------

    def profile(self, r, order: int = 0):
        """``w(r)``, ``w'(r)`` or ``w''(r)`` for ``order`` 0, 1, 2."""
        raise NotImplementedError

    def radial_laplacian(self, r):
        r = np.asarray(r, dtype=float)
        return self.profile(r, 2) + (self.dim - 1) * self.profile(r, 1) / r

    # -- pointwise evaluation --------------------------------------------

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.profile(r), dtype=float)
        if self.singular:
            out = np.where(r == 0, np.inf, out)
        return out

    def laplacian(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        if np.any(r == 0):
            raise KernelError("singular point")
        return self.radial_laplacian(r)

    def gradient_norm(self, x):
        x = _as_points(x, self.dim)
        return np.abs(self.profile(_norm(x), 1))

    def gradient(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        return (self.profile(r, 1) / r)[..., None] * x

    # -- global quantities -----------------------------------------------

    @property
    def b_near(self) -> float | None:
        """Declared power of the singularity at the origin (None if bounded)."""
        return None

    @property
    def a_far(self) -> float | None:
        return None

    def limit_at_infinity(self) -> float:
        return 0.0

    def infimum(self) -> float:
        return 0.0

    def locally_integrable(self) -> bool:
        return self.b_near is None or self.b_near > -self.dim


def _check_exponent(b: float, d: int) -> None:
    if not (-d < b < 0):
        raise KernelError("b out of (−d,0)")


@dataclass(frozen=True)
class Riesz(Kernel):
    """W(x) = -|x|^b / b for -d < b < 0."""

    b: float = -1.0

    singular = True
    variant = "riesz"

    def __post_init__(self):
        super().__post_init__()
        _check_exponent(self.b, self.dim)

    def profile(self, r, order=0):
        r = np.asarray(r, dtype=float)
        b = self.b
        if order == 0:
            return -r ** b / b
        if order == 1:
            return -r ** (b - 1)
        return -(b - 1) * r ** (b - 2)

    def radial_laplacian(self, r):
        return -(self.b + self.dim - 2) * np.asarray(r, dtype=float) ** (self.b - 2)

    @property
    def b_near(self):
        return self.b

    @property
    def a_far(self):
        return self.b


@dataclass(frozen=True)
class PowerSum(Kernel):
    """W(x) = sum_j A_j (-|x|^{b_j} / b_j)."""

    terms: tuple[tuple[float, float], ...] = ((1.0, -1.0),)

    singular = True
    variant = "power_sum"

    def __post_init__(self):
        super().__post_init__()
        terms = tuple(sorted((float(a), float(b)) for a, b in self.terms))
        terms = tuple(sorted(terms, key=lambda t: t[1]))
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise KernelError("power_sum needs at least one term")
        for a, b in terms:
            if not a > 0:
                raise KernelError("power_sum amplitudes must be positive")
            _check_exponent(b, self.dim)
        bs = [b for _, b in terms]
        if len(set(bs)) != len(bs):
            raise KernelError("power_sum exponents must be distinct")

    def profile(self, r, order=0):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for a, b in self.terms:
            if order == 0:
                out = out - a * r ** b / b
            elif order == 1:
                out = out - a * r ** (b - 1)
            else:
                out = out - a * (b - 1) * r ** (b - 2)
        return out

    @property
    def b_near(self):
        return self.terms[0][1]

    @property
    def a_far(self):
        return self.terms[-1][1]


@dataclass(frozen=True)
class Newtonian(Kernel):
    """Repulsive Newtonian potential; harmonic away from the origin."""

    variant = "newtonian"

    @property
    def singular(self):
        return self.dim >= 2

    def profile(self, r, order=0):
        r = np.asarray(r, dtype=float)
        d = self.dim
        area = sphere_area(d)
        if order == 0:
            return newtonian_profile(d, r)
        if order == 1:
            return -r ** (1.0 - d) / area
        return (d - 1) * r ** (-float(d)) / area

    def radial_laplacian(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    @property
    def b_near(self):
        return None if self.dim == 1 else (0.0 if self.dim == 2 else 2.0 - self.dim)

    @property
    def a_far(self):
        return self.b_near if self.dim > 2 else None

    def limit_at_infinity(self):
        return 0.0 if self.dim >= 3 else -math.inf

    def infimum(self):
        return 0.0 if self.dim >= 3 else -math.inf


@dataclass(frozen=True)
class GaussianBounded(Kernel):
    """offset + amplitude * exp(-(r/scale)^power) * (1 - cos(cos_freq r) or 1).

    ``offset=1, amplitude=-1`` gives the fully attractive ``1 - e^{-r^2}``;
    a nonzero ``cos_freq`` produces a kernel whose Fourier transform changes
    sign.
    """

    scale: float = 1.0
    power: float = 2.0
    amplitude: float = 1.0
    offset: float = 0.0
    cos_freq: float = 0.0

    variant = "gaussian_bounded"

    def __post_init__(self):
        super().__post_init__()
        if not self.scale > 0:
            raise KernelError("scale must be positive")
        if not self.power > 0:
            raise KernelError("power must be positive")

    def profile(self, r, order=0):
        r = np.asarray(r, dtype=float)
        s, p, k = self.scale, self.power, self.cos_freq
        q = r / s
        g = np.exp(-q ** p)
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = -(p / s) * q ** (p - 1) * g
            g2 = g * ((p / s) ** 2 * q ** (2 * p - 2) - p * (p - 1) / s ** 2 * q ** (p - 2))
        if k:
            c, c1, c2 = 1 - np.cos(k * r), k * np.sin(k * r), k * k * np.cos(k * r)
        else:
            c, c1, c2 = 1.0, 0.0, 0.0
        if order == 0:
            return self.offset + self.amplitude * g * c
        if order == 1:
            return self.amplitude * (g1 * c + g * c1)
        return self.amplitude * (g2 * c + 2 * g1 * c1 + g * c2)

    def limit_at_infinity(self):
        return float(self.offset)

    def infimum(self):
        r = np.concatenate([[0.0], np.geomspace(1e-4, 50.0, 20000) * self.scale])
        return float(min(np.min(self.profile(r)), self.offset))


@dataclass(frozen=True)
class Tabulated(Kernel):
    """Radial kernel interpolated by a cubic spline through ``(radius, value)``.

    Constant extension outside the table; derivatives are not trusted.
    """

    radii: tuple[float, ...] = (0.0, 1.0)
    values: tuple[float, ...] = (1.0, 0.0)

    variant = "tabulated"
    derivable = False

    def __post_init__(self):
        super().__post_init__()
        r = np.asarray(self.radii, dtype=float)
        if len(r) < 2 or len(r) != len(self.values) or np.any(np.diff(r) <= 0) or r[0] < 0:
            raise KernelError("tabulated kernel needs increasing radii and matching values")
        object.__setattr__(self, "radii", tuple(float(v) for v in self.radii))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def _spline(self):
        return _spline(self.radii, self.values)

    def profile(self, r, order=0):
        if order:
            raise KernelError("insufficient smoothness data")
        r = np.clip(np.asarray(r, dtype=float), self.radii[0], self.radii[-1])
        return self._spline(r)

    def laplacian(self, x):
        raise KernelError("insufficient smoothness data")

    def limit_at_infinity(self):
        return self.values[-1]

    def infimum(self):
        r = np.linspace(self.radii[0], self.radii[-1], 20001)
        return float(self._spline(r).min())


@lru_cache(maxsize=64)
def _spline(radii, values):
    return CubicSpline(np.asarray(radii), np.asarray(values))


def load_tabulated(path, dim: int) -> Tabulated:
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if data.shape[1] != 2:
        raise KernelError("tabulated kernel CSV needs two columns")
    return Tabulated(dim, tuple(data[:, 0]), tuple(data[:, 1]))


@dataclass(frozen=True)
class Anisotropic(Kernel):
    """W(x) = -|x|^b/b * (1 + alpha*omega(x/|x|)).

    ``coeffs[k]`` multiplies ``cos(k*theta)`` in d = 2 and the zonal Legendre
    polynomial ``P_k(x_d/|x|)`` in d = 3; only even orders are allowed so that
    W stays even.
    """

    b: float = -1.0
    alpha: float = 0.0
    coeffs: tuple[float, ...] = (1.0,)

    singular = True
    radial = False
    variant = "anisotropic"

    def __post_init__(self):
        super().__post_init__()
        if self.dim not in (2, 3):
            raise KernelError("anisotropic kernels are implemented for d = 2 and 3")
        _check_exponent(self.b, self.dim)
        if self.alpha < 0:
            raise KernelError("alpha must be >= 0")
        c = tuple(float(v) for v in self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if any(v != 0 for v in c[1::2]):
            raise KernelError("odd harmonics would break W(x) = W(-x)")
        t = np.linspace(0.0, math.pi, 4001)
        if self._omega_angle(t).min() < -1e-12:
            raise KernelError("omega must be nonnegative")

    # angle: polar angle from the x_0 axis (d=2) or from the x_d axis (d=3)
    def _angle(self, x):
        if self.dim == 2:
            return np.arctan2(x[..., 1], x[..., 0])
        r = _norm(x)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.arccos(np.clip(x[..., 2] / r, -1.0, 1.0))

    def _omega_angle(self, t, order=0):
        """omega, d omega/dtheta, or Δ_S omega as functions of the angle."""
        c = np.asarray(self.coeffs)
        t = np.asarray(t, dtype=float)
        ks = np.arange(len(c))
        if self.dim == 2:
            if order == 0:
                return sum(ck * np.cos(k * t) for k, ck in zip(ks, c))
            if order == 1:
                return sum(-k * ck * np.sin(k * t) for k, ck in zip(ks, c))
            return sum(-k * k * ck * np.cos(k * t) for k, ck in zip(ks, c))
        u = np.cos(t)
        if order == 0:
            return legendre.legval(u, c)
        if order == 1:
            return -np.sin(t) * legendre.legval(u, legendre.legder(c))
        return legendre.legval(u, -ks * (ks + 1) * c)

    def omega(self, x):
        return self._omega_angle(self._angle(_as_points(x, self.dim)))

    def spherical_laplacian_omega(self, x):
        return self._omega_angle(self._angle(_as_points(x, self.dim)), 2)

    def value(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -r ** self.b / self.b * (1 + self.alpha * self._omega_angle(self._angle(x)))
        return np.where(r == 0, np.inf, out)

    def laplacian(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        if np.any(r == 0):
            raise KernelError("singular point")
        t = self._angle(x)
        b, d, a = self.b, self.dim, self.alpha
        ang = -(b + d - 2) * (1 + a * self._omega_angle(t)) - (a / b) * self._omega_angle(t, 2)
        return ang * r ** (b - 2)

    def gradient_norm(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        t = self._angle(x)
        f = -r ** self.b / self.b
        f1 = -r ** (self.b - 1)
        radial = f1 * (1 + self.alpha * self._omega_angle(t))
        tangential = f / r * self.alpha * self._omega_angle(t, 1)
        return np.sqrt(radial ** 2 + tangential ** 2)

    def gradient(self, x):
        x = _as_points(x, self.dim)
        r = _norm(x)
        t = self._angle(x)
        f = -r ** self.b / self.b
        f1 = -r ** (self.b - 1)
        rhat = x / r[..., None]
        if self.dim == 2:
            that = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        else:
            # unit vector of increasing polar angle
            rho = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
            safe = np.where(rho > 0, rho, 1.0)
            that = np.stack([np.cos(t) * x[..., 0] / safe, np.cos(t) * x[..., 1] / safe,
                             -np.sin(t)], axis=-1)
        radial = f1 * (1 + self.alpha * self._omega_angle(t))
        tangential = f / r * self.alpha * self._omega_angle(t, 1)
        return radial[..., None] * rhat + tangential[..., None] * that

    def profile(self, r, order=0):
        raise KernelError("anisotropic kernel has no radial profile")

    @property
    def b_near(self):
        return self.b

    @property
    def a_far(self):
        return self.b


KERNEL_TYPES = {
    "riesz": Riesz,
    "power_sum": PowerSum,
    "newtonian": Newtonian,
    "gaussian_bounded": GaussianBounded,
    "tabulated": Tabulated,
    "anisotropic": Anisotropic,
}


def make_kernel(variant: str, dim: int, **params) -> Kernel:
    try:
        cls = KERNEL_TYPES[variant]
    except KeyError:
        raise KernelError(f"unknown kernel variant {variant!r}") from None
    if variant == "power_sum":
        params["terms"] = tuple(tuple(t) for t in params.get("terms", ()))
    if variant == "anisotropic" and "coeffs" in params:
        params["coeffs"] = tuple(params["coeffs"])
    return cls(dim, **params)


def evaluate(k: Kernel, x):
    return k.value(x)


def laplacian(k: Kernel, x):
    return k.laplacian(x)


# ---------------------------------------------------------------------------
# essential convexity certificate


@dataclass(frozen=True)
class SamplePlan:
    n_radii: int = 64
    r_min: float = 1e-3
    r_max: float = 1e3
    n_angles: int = 16
    near: tuple[float, float] = (1e-3, 1e-1)
    far: tuple[float, float] = (10.0, 1e3)
    slope_tol: float = 0.01


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    residual: float


@dataclass(frozen=True)
class ConvexityCertificate:
    is_essentially_convex: bool
    min_laplacian_samples: float
    min_value_samples: float
    exponent_fit: dict
    checks: dict
    violations: tuple = field(default_factory=tuple)

    @property
    def b_near(self):
        return self.exponent_fit["near"]["W"].slope

    @property
    def a_far(self):
        return self.exponent_fit["far"]["W"].slope

    def to_dict(self) -> dict:
        fits = {w: {q: {"slope": f.slope, "residual": f.residual} for q, f in v.items()}
                for w, v in self.exponent_fit.items()}
        return {
            "is_essentially_convex": self.is_essentially_convex,
            "min_laplacian_samples": self.min_laplacian_samples,
            "min_value_samples": self.min_value_samples,
            "exponent_fit": fits,
            "checks": dict(self.checks),
            "violations": [dict(v) for v in self.violations],
        }


def directions(d: int, n: int) -> np.ndarray:
    """Deterministic unit vectors: ±1 in d=1, equispaced in d=2, Fibonacci in d=3."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        t = 2 * math.pi * np.arange(n) / n
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        phi = math.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)
        return np.concatenate([pts, [[0, 0, 1.0], [0, 0, -1.0]]])
    rng = np.random.default_rng(0)
    g = rng.standard_normal((n, d))
    return g / _norm(g)[:, None]


def _fit(r, y):
    lr, ly = np.log(r), np.log(y)
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return ExponentFit(float(coef[0]), float(np.sqrt(np.mean(res ** 2))))


@lru_cache(maxsize=256)
def check_essential_convexity(k: Kernel, plan: SamplePlan = SamplePlan()) -> ConvexityCertificate:
    """Sample ΔW, W and |∇W| on log shells and test the defining conditions.

    The fitted slopes of the angular maxima of |W|, |∇W| and |ΔW| over the
    near and far windows stand in for the power-law bounds: the W slope must
    lie in ``(-d, min(2-d, 0))``, and the derivative slopes must be no worse
    than one and two orders below it (within ``plan.slope_tol``).
    """
    if not k.derivable:
        raise KernelError("insufficient smoothness data")
    d = k.dim
    r = np.geomspace(plan.r_min, plan.r_max, plan.n_radii)
    u = directions(d, plan.n_angles)
    pts = r[:, None, None] * u[None, :, :]
    with np.errstate(all="ignore"):
        W = np.asarray(k.value(pts), dtype=float)
        G = np.asarray(k.gradient_norm(pts), dtype=float)
        L = np.asarray(k.laplacian(pts), dtype=float)
    violations = []
    bad = np.argwhere(~(L > 0))
    for i, j in bad[:32]:
        violations.append({"check": "laplacian", "x": pts[i, j].tolist(), "value": float(L[i, j])})
    negW = np.argwhere(W < 0)
    for i, j in negW[:32]:
        violations.append({"check": "nonnegative", "x": pts[i, j].tolist(), "value": float(W[i, j])})

    hi = min(2.0 - d, 0.0)
    fits = {}
    checks = {"laplacian_positive": bool(bad.size == 0), "nonnegative": bool(negW.size == 0)}
    tol = plan.slope_tol
    for name, (lo_r, hi_r) in (("near", plan.near), ("far", plan.far)):
        sel = (r >= lo_r * (1 - 1e-12)) & (r <= hi_r * (1 + 1e-12))
        env = {"W": np.abs(W[sel]).max(axis=1), "grad": np.abs(G[sel]).max(axis=1),
               "lap": np.abs(L[sel]).max(axis=1)}
        if not all(np.all(np.isfinite(v) & (v > 0)) for v in env.values()):
            fits[name] = {q: ExponentFit(math.nan, math.nan) for q in env}
            checks[f"{name}_exponent"] = False
            checks[f"{name}_derivatives"] = False
            continue
        f = {q: _fit(r[sel], v) for q, v in env.items()}
        fits[name] = f
        s = f["W"].slope
        checks[f"{name}_exponent"] = bool(-d < s < hi)
        if name == "near":
            ok = (f["grad"].slope >= (s - 1) - tol * abs(s - 1)
                  and f["lap"].slope >= (s - 2) - tol * abs(s - 2))
        else:
            ok = (f["grad"].slope <= (s - 1) + tol * abs(s - 1)
                  and f["lap"].slope <= (s - 2) + tol * abs(s - 2))
        checks[f"{name}_derivatives"] = bool(ok)
    return ConvexityCertificate(
        is_essentially_convex=all(checks.values()),
        min_laplacian_samples=float(np.nanmin(L)),
        min_value_samples=float(np.nanmin(W)),
        exponent_fit=fits,
        checks=checks,
        violations=tuple(violations),
    )


def is_certified(k: Kernel) -> bool:
    try:
        return check_essential_convexity(k).is_essentially_convex
    except KernelError:
        return False


def _require_certified(k: Kernel) -> None:
    if not is_certified(k):
        raise KernelError("representation requires essential convexity")


# ---------------------------------------------------------------------------
# representation formula and Fourier estimate


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 500)
    kw.setdefault("epsrel", 1e-10)
    kw.setdefault("epsabs", 0.0)
    val, _ = integrate.quad(f, a, b, **kw)
    return val


def _log_quad(f, a, b, **kw):
    """∫_a^b f(s) ds in the variable log s, split into decades."""
    if b <= a:
        return 0.0
    edges = np.geomspace(a, b, max(2, int(math.ceil(math.log10(b / a))) + 1))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += _quad(lambda t: f(math.exp(t)) * math.exp(t), math.log(lo), math.log(hi), **kw)
    return total


def shell_nodes(d: int, eps: float, R: float, n_shells: int, n_dir: int | None = None):
    """Log-spaced shell midpoints and direction nodes with their volume weights."""
    if n_dir is None:
        # 190 Fibonacci points plus the two poles make 192 in d = 3
        n_dir = {1: 2, 2: 48, 3: 190}.get(d, 192)
    edges = np.geomspace(eps, R, n_shells + 1)
    mids = np.sqrt(edges[:-1] * edges[1:])
    shell_vol = sphere_area(d) * (edges[1:] ** d - edges[:-1] ** d) / d
    return mids, shell_vol, directions(d, n_dir)


def representation_reconstruct(k: Kernel, x, eps: float, R: float, n_shells: int = 4000) -> float:
    """Rebuild W(x) from ΔW through the truncated subharmonic representation.

    Radial kernels use the one-dimensional form
    ``|S^{d-1}| ∫_eps^R (N(x) - N(s))_+ s^{d-1} ΔW(s) ds``; the anisotropic
    family falls back to a tensor midpoint rule on log-spaced shells.
    """
    _require_certified(k)
    x = np.asarray(_as_points(x, k.dim), dtype=float).reshape(k.dim)
    rx = float(np.linalg.norm(x))
    if not (0 < eps < rx < R):
        raise KernelError("need 0 < eps < |x| < R")
    d = k.dim
    if k.radial:
        Nx = float(newtonian_profile(d, rx))

        def f(s):
            gap = Nx - float(newtonian_profile(d, s))
            return max(gap, 0.0) * s ** (d - 1) * float(k.radial_laplacian(s))

        # the bracket vanishes for s < |x|
        inner = _log_quad(f, eps, rx)
        outer = _log_quad(f, rx, R)
        return sphere_area(d) * (inner + outer)
    mids, vol, u = shell_nodes(d, eps, R, n_shells)
    Nx = float(newtonian_profile(d, rx))
    total = 0.0
    for s, v in zip(mids, vol):
        y = s * u
        bracket = Nx - 0.5 * newtonian_profile(d, _norm(x - y)) - 0.5 * newtonian_profile(d, _norm(x + y))
        total += v * float(np.mean(bracket * k.laplacian(y)))
    return total


def sphere_mean_cos(d: int, kappa):
    """Average of cos(kappa u·e) over unit vectors u: Γ(d/2)(2/κ)^ν J_ν(κ)."""
    kappa = np.asarray(kappa, dtype=float)
    if d == 1:
        return np.cos(kappa)
    if d == 3:
        return np.sinc(kappa / math.pi)
    nu = d / 2 - 1
    small = np.abs(kappa) < 1e-3
    safe = np.where(small, 1.0, kappa)
    big = math.gamma(d / 2) * (2 / safe) ** nu * special.jv(nu, safe)
    k2 = kappa * kappa
    series = 1 - k2 / (2 * d) + k2 * k2 / (8 * d * (d + 2))
    return np.where(small, series, big)


def one_minus_sphere_mean_cos(d: int, kappa):
    """1 - sphere_mean_cos without cancellation at small kappa."""
    kappa = np.asarray(kappa, dtype=float)
    if d == 1:
        return 2 * np.sin(kappa / 2) ** 2
    k2 = kappa * kappa
    small = np.abs(kappa) < 1e-2
    series = k2 / (2 * d) - k2 * k2 / (8 * d * (d + 2)) + k2 ** 3 / (48 * d * (d + 2) * (d + 4))
    return np.where(small, series, 1 - sphere_mean_cos(d, np.where(small, 1.0, kappa)))


def fourier_estimate(k: Kernel, xi, eps: float = 1e-6, R: float = 1e6,
                     n_shells: int = 4000) -> float:
    """(1/4π²)|ξ|^{-2} ∫_{eps<|y|<R} (1 - cos 2πy·ξ) ΔW(y) dy."""
    xi = np.asarray(_as_points(xi, k.dim), dtype=float).reshape(k.dim)
    q = float(np.linalg.norm(xi))
    if q == 0:
        raise KernelError("zero frequency excluded")
    _require_certified(k)
    d = k.dim
    kappa = 2 * math.pi * q
    pref = 1.0 / (4 * math.pi ** 2 * q * q)
    if not k.radial:
        mids, vol, u = shell_nodes(d, eps, R, n_shells)
        total = 0.0
        for s, v in zip(mids, vol):
            y = s * u
            total += v * float(np.mean((1 - np.cos(2 * math.pi * (y @ xi))) * k.laplacian(y)))
        return pref * total

    area = sphere_area(d)

    def lap(s):
        return float(k.radial_laplacian(s)) * s ** (d - 1)

    # near the origin the bracket is O(s^2); integrate the stable form
    s0 = min(R, 20.0 / kappa)
    inner = _log_quad(lambda s: float(one_minus_sphere_mean_cos(d, kappa * s)) * lap(s), eps, s0)
    outer = 0.0
    if R > s0:
        smooth = _log_quad(lap, s0, R)
        if d == 1:
            osc = _quad(lap, s0, R, weight="cos", wvar=kappa, limit=2000)
        elif d == 3:
            osc = _quad(lambda s: lap(s) / (kappa * s), s0, R, weight="sin", wvar=kappa, limit=2000)
        else:
            osc = _bessel_tail(d, lap, kappa, s0, R)
        outer = smooth - osc
    return pref * area * (inner + outer)


def _bessel_tail(d, f, kappa, a, b, max_periods: int = 4000):
    """∫_a^b f(s) j(κs) ds by half-period panels; the remainder past the panel
    budget oscillates with decaying amplitude and is dropped."""
    half = math.pi / kappa
    stop = min(b, a + max_periods * half)
    edges = np.arange(a, stop, half)
    edges = np.append(edges, stop)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += _quad(lambda s: f(s) * float(sphere_mean_cos(d, kappa * s)), lo, hi, limit=50)
    return total
