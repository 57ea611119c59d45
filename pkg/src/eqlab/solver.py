"""Energy minimization and height maximization over the masked simplex.

Frank–Wolfe keeps the generated potential up to date incrementally: moving
mass ``γ`` onto cell ``c`` changes ``Tw`` by ``γ (T[·-c] - Tw)``.  The
linear-minimization oracle is the argmin of V over the domain, which is
exactly the quantity the Euler–Lagrange condition talks about.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.signal import convolve

from .field import ExternalPotential, as_table, masked_argmin
from .grid import DiscreteMeasure, Domain, GridError, ball_stencil


class SolverError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    tol: float = 1e-7
    step: str = "exact"  # or "classic" (2/(k+2))
    seed: int | None = None
    init: str = "uniform"  # or "random", "point"
    polish: bool = True
    polish_max_support: int = 1500
    polish_max_iters: int = 2000
    refresh_every: int = 250
    ascent_step: float = 0.3
    ascent_patience: int = 500
    ascent_min_ratio: float = 1e-4

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iters >= 1):
            raise SolverError("tolerances must be positive")
        if self.step not in ("exact", "classic"):
            raise SolverError(f"unknown step rule {self.step!r}")
        if self.init not in ("uniform", "random", "point"):
            raise SolverError(f"unknown initialization {self.init!r}")


@dataclass
class SolveTrace:
    iterations: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    step: list = field(default_factory=list)
    cell: list = field(default_factory=list)
    status: str = "max_iters"
    polish: dict = field(default_factory=dict)

    def record(self, it, obj, gap, step, cell):
        self.iterations.append(int(it))
        self.objective.append(float(obj))
        self.gap.append(float(gap))
        self.step.append(float(step))
        self.cell.append(tuple(int(c) for c in cell))

    def __len__(self):
        return len(self.iterations)

    def rows(self):
        return list(zip(self.iterations, self.objective, self.gap, self.step))


def initial_weights(D: Domain, cfg: SolverConfig) -> np.ndarray:
    mask = D.mask
    w = np.zeros(D.grid.shape)
    if cfg.init == "uniform":
        w[mask] = 1.0 / mask.sum()
    elif cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        w[mask] = rng.dirichlet(np.ones(int(mask.sum())))
    else:
        rng = np.random.default_rng(cfg.seed)
        flat = np.flatnonzero(mask.reshape(-1))
        w.reshape(-1)[flat[rng.integers(len(flat))]] = 1.0
    return w


def _relative(gap, level):
    return gap / max(1.0, abs(level))


def frank_wolfe_minimize(k, U: ExternalPotential, D: Domain, cfg: SolverConfig = SolverConfig(),
                         init: DiscreteMeasure | None = None):
    """Minimize ``E = ½ w·Tw + U·w`` over probability weights on ``D.mask``.

    Returns the final measure and its :class:`SolveTrace`.  With
    ``cfg.polish`` the Frank–Wolfe iterate is handed to an active-set solve of
    the KKT system restricted to its support, which drives the
    Euler–Lagrange residuals down to rounding level.
    """
    if U.grid != D.grid:
        raise SolverError("incompatible grids")
    T = as_table(k, D.grid)
    mask = D.mask
    if init is not None:
        if init.grid != D.grid:
            raise SolverError("incompatible grids")
        w = np.array(init.weights, dtype=float)
        if (w[~mask] > 0).any():
            raise SolverError("bad initialization")
    else:
        w = initial_weights(D, cfg)
    u = U.values
    field_ = T.convolve(w)
    energy = 0.5 * float(np.sum(w * field_)) + float(np.sum(u * w))
    if not math.isfinite(energy):
        raise SolverError("bad initialization")
    T0 = T.diagonal
    trace = SolveTrace()
    for it in range(cfg.max_iters):
        if it and it % cfg.refresh_every == 0:
            field_ = T.convolve(w)
        V = field_ + u
        vmin, c = masked_argmin(V, mask)
        avg = float(np.sum(w * V))
        gap = max(0.0, avg - vmin)
        energy = 0.5 * float(np.sum(w * field_)) + float(np.sum(u * w))
        if _relative(gap, avg) <= cfg.tol:
            trace.record(it, energy, gap, 0.0, c)
            trace.status = "converged"
            break
        if cfg.step == "classic":
            gamma = 2.0 / (it + 2.0)
        else:
            curv = T0 - 2.0 * field_[c] + float(np.sum(w * field_))
            gamma = 1.0 if curv <= 0 else min(1.0, gap / curv)
        trace.record(it, energy, gap, gamma, c)
        col = T.column(c)
        w *= 1.0 - gamma
        w[c] += gamma
        field_ *= 1.0 - gamma
        field_ += gamma * col
    else:
        field_ = T.convolve(w)
        V = field_ + u
        vmin, c = masked_argmin(V, mask)
        avg = float(np.sum(w * V))
        gap = max(0.0, avg - vmin)
        energy = 0.5 * float(np.sum(w * field_)) + float(np.sum(u * w))
        trace.record(cfg.max_iters, energy, gap, 0.0, c)
        if _relative(gap, avg) <= cfg.tol:
            trace.status = "converged"
    if cfg.polish:
        w = _polish(T, u, mask, w, cfg, trace)
    w = np.maximum(w, 0.0)
    w /= w.sum()
    return DiscreteMeasure(D.grid, w), trace


def _polish(T, u, mask, w, cfg, trace):
    """Primal active-set method for the simplex QP, warm-started at ``w``."""
    support = np.flatnonzero((w > 0).reshape(-1))
    if len(support) > cfg.polish_max_support:
        trace.polish = {"status": "skipped", "iterations": 0}
        return w
    shape = w.shape
    flat_mask = mask.reshape(-1)
    x = w.reshape(-1).copy()
    S = list(support)
    scale = max(1.0, float(np.abs(u).max()), abs(T.diagonal))
    tol = 1e-11 * scale
    status = "max_iters"
    it = 0
    offsets = np.stack(np.unravel_index(np.arange(x.size), shape), axis=-1)

    def gram(idx):
        dk = offsets[idx][:, None, :] - offsets[idx][None, :, :]
        ix = tuple((dk[..., a] + shape[a] - 1) for a in range(len(shape)))
        return T.table[ix]

    def objective(v):
        return 0.5 * float(np.sum(v * T.convolve(v.reshape(shape)).reshape(-1))) + float(np.dot(u.reshape(-1), v))

    start = objective(x)
    # the polish shares the iteration budget with the Frank-Wolfe phase
    for it in range(1, min(cfg.polish_max_iters, cfg.max_iters) + 1):
        idx = np.asarray(S)
        n = len(idx)
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = gram(idx)
        K[:n, n] = -1.0
        K[n, :n] = 1.0
        rhs = np.concatenate([-u.reshape(-1)[idx], [1.0]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            status = "singular"
            break
        y, lam = sol[:n], sol[n]
        if (y < 0).any():
            cur = x[idx]
            neg = y < 0
            ratios = cur[neg] / (cur[neg] - y[neg])
            alpha = float(ratios.min())
            new = cur + alpha * (y - cur)
            drop = np.zeros(n, dtype=bool)
            drop[np.flatnonzero(neg)[np.argmin(ratios)]] = True
            drop |= new <= 0
            x[idx] = np.where(drop, 0.0, new)
            S = [s for s, dr in zip(S, drop) if not dr]
            continue
        x[:] = 0.0
        x[idx] = y
        V = T.convolve(x.reshape(shape)).reshape(-1) + u.reshape(-1)
        slack = np.where(flat_mask, V - lam, np.inf)
        slack[idx] = np.inf
        j = int(np.argmin(slack))
        if slack[j] >= -tol:
            status = "converged"
            break
        S.append(j)
    end = objective(x)
    if not end <= start + 1e-12 * max(1.0, abs(start)) or not np.isfinite(end):
        trace.polish = {"status": "rejected", "iterations": it}
        return w
    trace.polish = {"status": status, "iterations": it, "support": len(S)}
    out = x.reshape(shape)
    V = T.convolve(out) + u
    vmin, c = masked_argmin(V, mask)
    avg = float(np.sum(out * V))
    gap = max(0.0, avg - vmin)
    trace.record(trace.iterations[-1] + 1, end, gap, 0.0, c)
    if status == "converged" or _relative(gap, avg) <= cfg.tol:
        trace.status = "converged"
    return out


# ---------------------------------------------------------------------------
# height ascent


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def height_ascent(k, U: ExternalPotential, S: Domain, cfg: SolverConfig = SolverConfig(),
                  init: DiscreteMeasure | None = None, refine: bool = False):
    """Projected supergradient ascent on ``H_S[w] = min_S (Tw + U)``.

    The supergradient at ``w`` is the column ``T[· - x*]`` at the height
    witness ``x*``; steps are ``cfg.ascent_step / sqrt(k)`` along the
    normalized supergradient, followed by projection onto the simplex over
    ``S``.  After ``cfg.ascent_patience`` non-improving steps the schedule
    restarts from the best iterate with ``c`` divided by four; it stops once
    ``c`` falls below ``cfg.ascent_min_ratio`` times its initial value.  The
    best iterate is returned.  With ``refine`` the result is
    replaced by the optimum of the equivalent linear program when that is
    higher.
    """
    if U.grid != S.grid:
        raise SolverError("incompatible grids")
    T = as_table(k, S.grid)
    mask = S.mask
    u = U.values
    if init is not None:
        w = np.array(init.weights, dtype=float)
    else:
        w = initial_weights(S, cfg)
    sel = mask.reshape(-1)
    trace = SolveTrace()
    field_ = T.convolve(w)
    best_h, best_w = -math.inf, w.copy()
    stale = 0
    c_stage, k_stage = cfg.ascent_step, 0
    for it in range(1, cfg.max_iters + 1):
        k_stage += 1
        h, c = masked_argmin(field_ + u, mask)
        if h > best_h + 1e-15 * max(1.0, abs(h)):
            best_h, best_w, stale = h, w.copy(), 0
        else:
            stale += 1
        if stale >= cfg.ascent_patience:
            if c_stage / 4 < cfg.ascent_step * cfg.ascent_min_ratio:
                trace.record(it, h, best_h - h, 0.0, c)
                trace.status = "converged"
                break
            # restart the c/sqrt(k) schedule from the best point with a smaller c
            c_stage, k_stage, stale = c_stage / 4, 1, 0
            w = best_w.copy()
            field_ = T.convolve(w)
            h, c = masked_argmin(field_ + u, mask)
        g = T.column(c).reshape(-1)[sel]
        g = g - g.mean()
        norm = float(np.linalg.norm(g))
        if norm == 0:
            trace.record(it, h, 0.0, 0.0, c)
            trace.status = "converged"
            break
        eta = c_stage / math.sqrt(k_stage)
        trace.record(it, h, best_h - h, eta, c)
        flat = w.reshape(-1)
        flat[sel] = project_simplex(flat[sel] + eta * g / norm)
        field_ = T.convolve(w)
    if refine:
        lp = _height_lp(T, u, mask)
        if lp is not None:
            h_lp, _ = masked_argmin(T.convolve(lp) + u, mask)
            trace.polish = {"status": "lp", "height": h_lp}
            if h_lp > best_h:
                best_h, best_w = h_lp, lp
    best_w = np.maximum(best_w, 0.0)
    return DiscreteMeasure(S.grid, best_w / best_w.sum()), trace


def _height_lp(T, u, mask, max_cells: int = 4000):
    """max t subject to (Tw + U)_i >= t on S, w in the simplex over S."""
    idx = np.flatnonzero(mask.reshape(-1))
    n = len(idx)
    if n > max_cells:
        return None
    shape = mask.shape
    offsets = np.stack(np.unravel_index(idx, shape), axis=-1)
    dk = offsets[:, None, :] - offsets[None, :, :]
    G = T.table[tuple(dk[..., a] + shape[a] - 1 for a in range(len(shape)))]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([-G, np.ones((n, 1))])
    b = u.reshape(-1)[idx]
    A_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if not res.success:
        return None
    w = np.zeros(mask.size)
    w[idx] = np.maximum(res.x[:n], 0.0)
    return (w / w.sum()).reshape(shape)


# ---------------------------------------------------------------------------
# microscopic diffusion


@dataclass(frozen=True)
class DiffusionReport:
    sigma_mass: float
    far_values: np.ndarray
    far_cells: np.ndarray
    far_min: float

    @property
    def positive(self) -> bool:
        return self.far_min > 0


def microscopic_diffusion(k, m: DiscreteMeasure, x, delta: float, S: Domain | None = None):
    """Spread the mass of ``m`` near ``x`` uniformly over balls of radius ``delta``.

    ``σ = m χ_{B(x;δ)}`` is replaced by ``σ * uniform(B(0;δ))``; the report
    lists ``W*μ`` for ``μ = σ*uniform - σ`` at cells of ``S`` (all cells if
    omitted) with ``|y - x| >= 3δ``.
    """
    g = m.grid
    if delta < 2 * g.spacing * (1 - 1e-12):
        raise SolverError("delta must be at least 2h")
    x = np.asarray(x, dtype=float).reshape(g.dim)
    near = g.radii(x) < delta
    sigma = np.where(near, m.weights, 0.0)
    if not sigma.sum() > 0:
        raise SolverError("empty σ")
    stencil = ball_stencil(g, delta)
    r = stencil.shape[0] // 2
    supp = np.nonzero(sigma)
    for axis, n in enumerate(g.shape):
        if supp[axis].min() - r < 0 or supp[axis].max() + r > n - 1:
            raise GridError("diffusion leaves the grid")
    spread = convolve(sigma, stencil, mode="same", method="direct")
    spread = np.maximum(spread, 0.0)
    spread *= sigma.sum() / spread.sum()
    mu = spread - sigma
    out = np.maximum(m.weights - sigma + spread, 0.0)
    out = DiscreteMeasure(g, out / out.sum() * m.weights.sum(), check_mass=m.check_mass)
    T = as_table(k, g)
    pot = T.convolve(mu)
    far = g.radii(x) >= 3 * delta
    if S is not None:
        far &= S.mask
    vals = pot[far]
    cells = np.argwhere(far)
    fmin = float(vals.min()) if vals.size else math.nan
    return out, DiffusionReport(float(sigma.sum()), vals, cells, fmin)
