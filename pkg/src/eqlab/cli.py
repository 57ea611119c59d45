"""Command-line front end.

Experiments are described by an INI file whose values are Python literals::

    [kernel]
    variant = riesz
    dim = 1
    b = -0.5

    [grid]
    half_width = 2.0
    n = 256

    [potential]
    builder = balayage
    mass = 1.0
    omega_radius = 0.5

Exit codes: 0 pass, 1 error, 2 refuted / not_exists, 3 inconclusive / not
converged.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from . import grid as gm
from .analysis import (EXISTS, NOT_EXISTS, PASS, ProbeConfig, existence_probe,
                       nonexistence_scenario, truncation_probe, verify_euler_lagrange)
from .field import (ExternalPotential, balayage, bump_well, energy, generated_potential,
                    height, zero_potential)
from .io import (read_measure_csv, read_potential_csv, write_json, write_measure_csv,
                 write_potential_csv, write_table_csv, write_trace_csv)
from .kernels import (KernelError, check_essential_convexity, fourier_estimate, load_tabulated,
                      make_kernel, representation_reconstruct)
from .solver import SolverConfig, frank_wolfe_minimize, height_ascent

log = logging.getLogger("eqlab")

EXIT_OK, EXIT_ERROR, EXIT_REFUTED, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)
    path: Path | None = None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        parser.optionxform = str
        parser.read(path)
        return cls.from_parser(parser, path)

    @classmethod
    def from_string(cls, text: str, base: Path | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        parser.optionxform = str
        parser.read_string(text)
        return cls.from_parser(parser, base)

    @classmethod
    def from_parser(cls, parser, path=None):
        secs = {s: {k: _literal(v) for k, v in parser.items(s)} for s in parser.sections()}
        return cls(secs, Path(path) if path else None)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def resolve(self, p) -> Path:
        p = Path(p)
        if not p.is_absolute() and self.path is not None:
            p = self.path.parent / p
        if not p.exists():
            raise ConfigError(f"referenced file {p} not found")
        return p

    def echo(self) -> dict:
        return {s: {k: v if isinstance(v, (int, float, str, bool, list, tuple, type(None))) else repr(v)
                    for k, v in sec.items()} for s, sec in self.sections.items()}


# ---------------------------------------------------------------------------
# builders


def build_kernel(cfg: ExperimentConfig):
    sec = cfg.section("kernel")
    if "variant" not in sec or "dim" not in sec:
        raise ConfigError("[kernel] needs variant and dim")
    variant = sec.pop("variant")
    dim = int(sec.pop("dim"))
    if variant == "tabulated":
        return load_tabulated(cfg.resolve(sec["file"]), dim)
    return make_kernel(variant, dim, **sec)


def build_grid(cfg: ExperimentConfig, dim: int) -> gm.GridSpec:
    sec = cfg.section("grid")
    if "half_width" in sec:
        return gm.GridSpec.centered(dim, float(sec["half_width"]), int(sec["n"]))
    if {"lower", "upper", "h"} <= sec.keys():
        return gm.GridSpec.box(np.broadcast_to(sec["lower"], dim), np.broadcast_to(sec["upper"], dim),
                               float(sec["h"]))
    raise ConfigError("[grid] needs half_width and n, or lower, upper and h")


def build_domain(cfg: ExperimentConfig, grid: gm.GridSpec) -> gm.Domain:
    sec = cfg.section("domain")
    kind = sec.pop("kind", gm.FULL_SPACE)
    if kind == gm.CURVED_HALF_SPACE:
        if "phi_file" in sec:
            sec["phi"] = np.loadtxt(cfg.resolve(sec.pop("phi_file")), delimiter=",", ndmin=1)
        sec["phi"] = np.broadcast_to(np.asarray(sec.get("phi", 0.0), dtype=float), grid.shape[:-1]) \
            if np.ndim(sec.get("phi", 0.0)) == 0 else np.asarray(sec["phi"], dtype=float)
    return gm.make_domain(kind, grid, sec)


def build_omega(cfg: ExperimentConfig, grid: gm.GridSpec) -> gm.DiscreteMeasure:
    sec = cfg.section("potential")
    return gm.bump_measure(grid, float(sec.get("omega_radius", 0.5)), sec.get("omega_center"))


def build_potential(cfg: ExperimentConfig, kernel, grid: gm.GridSpec) -> ExternalPotential:
    sec = cfg.section("potential")
    builder = sec.get("builder", "zero")
    if builder == "zero":
        return zero_potential(grid)
    if builder == "bump_well":
        return bump_well(grid, float(sec["depth"]), float(sec["radius"]), sec.get("center"),
                         float(sec.get("u_infty", 0.0)))
    if builder == "balayage":
        return balayage(kernel, build_omega(cfg, grid), float(sec.get("mass", 1.0)))
    if builder == "tabulated":
        vals = read_potential_csv(cfg.resolve(sec["file"]), grid)
        return ExternalPotential(grid, vals, float(sec.get("u_infty", 0.0)), "tabulated")
    raise ConfigError(f"unknown potential builder {builder!r}")


def build_solver(cfg: ExperimentConfig, seed=None) -> SolverConfig:
    sec = cfg.section("solver")
    if seed is not None:
        sec["seed"] = seed
    known = SolverConfig.__dataclass_fields__
    unknown = set(sec) - set(known)
    if unknown:
        raise ConfigError(f"unknown solver keys {sorted(unknown)}")
    return SolverConfig(**sec)


def build_probe(cfg: ExperimentConfig, solver: SolverConfig) -> ProbeConfig:
    sec = cfg.section("probe")
    kw = {k: sec[k] for k in ("eps", "boundary_fraction", "truncation_tol", "captured_threshold") if k in sec}
    return ProbeConfig(solver=solver, **kw)


# ---------------------------------------------------------------------------
# commands


class Context:
    def __init__(self, cfg: ExperimentConfig, out: Path, seed):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.outputs: list[str] = []
        self.summary: dict = {}

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(name)
        return p

    def setup(self):
        kernel = build_kernel(self.cfg)
        grid = build_grid(self.cfg, kernel.dim)
        return kernel, grid


def cmd_kernel_check(ctx: Context, args) -> int:
    kernel = build_kernel(ctx.cfg)
    cert = check_essential_convexity(kernel)
    write_json(ctx.path("certificate.json"), {"kernel": repr(kernel), **cert.to_dict()})
    ctx.summary = {"is_essentially_convex": cert.is_essentially_convex}
    return EXIT_OK if cert.is_essentially_convex else EXIT_REFUTED


def cmd_minimize(ctx: Context, args) -> int:
    kernel, grid = ctx.setup()
    D = build_domain(ctx.cfg, grid)
    U = build_potential(ctx.cfg, kernel, grid)
    scfg = build_solver(ctx.cfg, ctx.seed)
    m, trace = frank_wolfe_minimize(kernel, U, D, scfg)
    el = verify_euler_lagrange(kernel, U, D, m)
    write_measure_csv(ctx.path("measure.csv"), m)
    write_trace_csv(ctx.path("trace.csv"), trace)
    write_potential_csv(ctx.path("potential.csv"), grid, generated_potential(kernel, U, m).values)
    report = {"el": el.to_dict(), "energy": energy(kernel, U, m), "status": trace.status,
              "iterations": len(trace), "polish": trace.polish,
              "support_diameter": gm.support_diameter(m)}
    if U.builder == "balayage" and U.params.get("mass") == 1.0:
        report["l1_to_omega"] = m.l1(build_omega(ctx.cfg, grid))
    write_json(ctx.path("el_report.json"), report)
    ctx.summary = {"status": trace.status, "el_pass": el.passed}
    if el.passed:
        return EXIT_OK
    log.warning("not converged: Euler-Lagrange residuals above tolerance")
    return EXIT_INCONCLUSIVE


def cmd_height(ctx: Context, args) -> int:
    kernel, grid = ctx.setup()
    S = build_domain(ctx.cfg, grid)
    U = build_potential(ctx.cfg, kernel, grid)
    scfg = build_solver(ctx.cfg, ctx.seed)
    refine = bool(ctx.cfg.section("height").get("refine", False))
    m, trace = height_ascent(kernel, U, S, scfg, refine=refine)
    H, cell = height(kernel, U, m, S)
    el = verify_euler_lagrange(kernel, U, S, m)
    write_measure_csv(ctx.path("measure.csv"), m)
    write_trace_csv(ctx.path("trace.csv"), trace)
    write_json(ctx.path("height.json"), {"height": H, "witness": list(cell), "status": trace.status,
                                         "iterations": len(trace), "el": el.to_dict(),
                                         "duality_gap": abs(H - el.C0)})
    ctx.summary = {"height": H, "status": trace.status}
    return EXIT_OK if trace.status == "converged" else EXIT_INCONCLUSIVE


def _write_witnesses(ctx, report):
    for name, m in report.witnesses.items():
        fname = "witness_" + "".join(c if c.isalnum() or c in "._-" else "_" for c in name) + ".csv"
        write_measure_csv(ctx.path(fname), m)
        report.witness_files.append(fname)


def cmd_probe(ctx: Context, args) -> int:
    kernel, grid = ctx.setup()
    scfg = build_solver(ctx.cfg, ctx.seed)
    pcfg = build_probe(ctx.cfg, scfg)
    psec = ctx.cfg.section("probe")
    if args.kind == "exist":
        D = build_domain(ctx.cfg, grid)
        U = build_potential(ctx.cfg, kernel, grid)
        cand = None
        if psec.get("candidate") == "omega":
            cand = build_omega(ctx.cfg, grid)
        report = existence_probe(kernel, U, D, cand, pcfg)
        code = EXIT_OK if report.verdict == EXISTS else EXIT_INCONCLUSIVE
    elif args.kind == "nonexist":
        phi = build_omega(ctx.cfg, grid)
        report = nonexistence_scenario(kernel, float(psec["alpha"]), phi, list(psec["R_list"]), pcfg)
        code = EXIT_REFUTED if report.verdict == NOT_EXISTS else EXIT_INCONCLUSIVE
    else:
        U = build_potential(ctx.cfg, kernel, grid)
        if "measure" in psec:
            m = read_measure_csv(ctx.cfg.resolve(psec["measure"]), grid)
        else:
            sigma = float(psec.get("sigma", 1.0))
            r = grid.radii()
            m = gm.DiscreteMeasure.from_density(grid, np.exp(-r ** 2 / (2 * sigma ** 2)))
        report = truncation_probe(kernel, U, m, list(psec["R_list"]), pcfg)
        code = EXIT_OK if report.verdict == PASS else EXIT_REFUTED
    _write_witnesses(ctx, report)
    write_json(ctx.path("report.json"), report.to_dict())
    ctx.summary = {"verdict": report.verdict, "margin": report.margin}
    return code


def _points(sec, dim):
    pts = sec.get("points")
    if pts is None:
        radii = sec.get("radii", [0.5, 1.0, 1.5, 2.0])
        pts = [[float(r)] + [0.0] * (dim - 1) for r in radii]
    return [np.asarray(p, dtype=float).reshape(dim) for p in pts]


def cmd_repr(ctx: Context, args) -> int:
    kernel = build_kernel(ctx.cfg)
    sec = ctx.cfg.section("repr")
    eps, R = float(sec.get("eps", 1e-3)), float(sec.get("R", 1e3))
    tol = float(sec.get("tol", 0.02))
    d = kernel.dim
    rows = []
    for x in _points(sec, d):
        rec = representation_reconstruct(kernel, x, eps, R)
        ref = float(kernel.value(x))
        rows.append(list(x) + [rec, ref, abs(rec - ref) / abs(ref)])
    header = [f"x{a}" for a in range(d)] + ["reconstructed", "reference", "relative_error"]
    write_table_csv(ctx.path("repr.csv"), header, rows)
    worst = max(r[-1] for r in rows)
    ctx.summary = {"max_relative_error": worst}
    return EXIT_OK if worst <= tol else EXIT_INCONCLUSIVE


def cmd_fourier(ctx: Context, args) -> int:
    kernel = build_kernel(ctx.cfg)
    sec = ctx.cfg.section("fourier")
    eps, R = float(sec.get("eps", 1e-6)), float(sec.get("R", 1e6))
    tol = float(sec.get("tol", 0.03))
    d = kernel.dim
    xis = sec.get("xi", [1.0, 2.0])
    xis = [np.asarray(x if np.ndim(x) else [x] + [0.0] * (d - 1), dtype=float).reshape(d) for x in xis]
    est = [fourier_estimate(kernel, xi, eps, R) for xi in xis]
    power = kernel.b_near if kernel.variant == "riesz" else None
    rows = []
    q0 = float(np.linalg.norm(xis[0]))
    for xi, e in zip(xis, est):
        q = float(np.linalg.norm(xi))
        ref = est[0] * (q / q0) ** (-d - power) if power is not None else float("nan")
        rel = abs(e - ref) / abs(ref) if power is not None else float("nan")
        rows.append(list(xi) + [e, ref, rel])
    header = [f"xi{a}" for a in range(d)] + ["estimate", "reference", "relative_error"]
    write_table_csv(ctx.path("fourier.csv"), header, rows)
    positive = all(e > 0 for e in est)
    worst = max((r[-1] for r in rows if r[-1] == r[-1]), default=0.0)
    ctx.summary = {"positive": positive, "max_relative_error": worst}
    if not positive:
        return EXIT_REFUTED
    return EXIT_OK if worst <= tol else EXIT_INCONCLUSIVE


def cmd_el_verify(ctx: Context, args) -> int:
    kernel, grid = ctx.setup()
    D = build_domain(ctx.cfg, grid)
    U = build_potential(ctx.cfg, kernel, grid)
    if args.measure is not None:
        path = Path(args.measure)
    elif "measure" in ctx.cfg.section("el"):
        path = ctx.cfg.resolve(ctx.cfg.section("el")["measure"])
    else:
        raise ConfigError("el-verify needs --measure or [el] measure")
    if not path.exists():
        raise ConfigError(f"measure file {path} not found")
    m = read_measure_csv(path, grid)
    sec = ctx.cfg.section("el")
    el = verify_euler_lagrange(kernel, U, D, m, sec.get("tol"))
    write_json(ctx.path("el_report.json"), el.to_dict())
    ctx.summary = {"el_pass": el.passed}
    return EXIT_OK if el.passed else EXIT_REFUTED


COMMANDS = {
    "kernel-check": cmd_kernel_check,
    "minimize": cmd_minimize,
    "height": cmd_height,
    "probe": cmd_probe,
    "repr": cmd_repr,
    "fourier": cmd_fourier,
    "el-verify": cmd_el_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment INI file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="overrides [solver] seed")
    common.add_argument("--threads", type=int, default=None, help="BLAS/FFT thread limit")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="eqlab", description="Interaction-energy minimization laboratory")
    p.add_argument("--version", action="version", version=f"eqlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "probe":
            sp.add_argument("kind", choices=["exist", "nonexist", "truncate"])
        if name == "el-verify":
            sp.add_argument("--measure", default=None, help="measure CSV to verify")
    return p


def _manifest(ctx: Context, args, code: int, wall: float) -> dict:
    seed = args.seed if args.seed is not None else ctx.cfg.section("solver").get("seed")
    return {
        "command": args.command if args.command != "probe" else f"probe {args.kind}",
        "config_file": str(args.config),
        "config": ctx.cfg.echo() if ctx.cfg else None,
        "seed": seed,
        "threads": args.threads,
        "exit_code": code,
        "outputs": sorted(ctx.outputs),
        "summary": ctx.summary,
        "versions": {"eqlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": wall,
    }


def run(args) -> int:
    start = time.perf_counter()
    out = Path(args.out)
    ctx = Context(ExperimentConfig(), out, args.seed)
    try:
        ctx.cfg = ExperimentConfig.from_file(args.config)
        code = COMMANDS[args.command](ctx, args)
    except (ConfigError, KernelError, gm.GridError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        code = EXIT_ERROR
    write_json(out / "manifest.json", _manifest(ctx, args, code, time.perf_counter() - start))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        with threadpool_limits(limits=args.threads):
            return run(args)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
