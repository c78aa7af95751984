"""Command-line front door: ``sectorflow <subcommand> [flags]``.

Every subcommand writes CSV/JSON into the output directory (``--out``, else
``$SECTORFLOW_OUT``, else ``./sectorflow_out``) and prints one summary line.
Exit codes: 0 success, 1 configuration error, 2 numerical-guard failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

CSV_COLUMNS = """\
CSV columns:
  solve           solve.csv: x, y, F, F_exact
  hessian-growth  hessian_growth.csv: p, r, r_over_p
  strip           strip_profile.csv: p, xi, K, ML, dML (sup over theta, y)
  weights         weights.csv: delta, p, sampled, envelope, dual_sampled
  opnorm          opnorm.csv: p, delta, estimate, estimate_over_p
  simulate        snapshot_XXXXXX.csv: id, x, y, gamma, omega
                  diagnostics.csv: time, circulation, omega_l1, omega_l2,
                  omega_inf, energy, energy_pairs, Q, log_lipschitz
  verify-all      c*_*.csv / c*_*.json per acceptance criterion, summary.json
"""

COMMANDS = ("solve", "hessian-growth", "strip", "weights", "opnorm", "simulate", "verify-all")
COMMON = ("alpha", "radius", "n", "p", "delta", "trials", "seed", "out", "workers", "fast")
SIMULATION = ("dt", "steps", "snapshot_every", "diagnostics_every", "log_lipschitz_pairs",
              "patch_kind", "patch_center", "patch_radius", "patch_omega", "points", "gammas")
ALLOWED_KEYS = frozenset(COMMON + SIMULATION)

DEFAULTS = {
    "solve": {"alpha": math.pi / 3, "radius": 1.0, "n": 64},
    "hessian-growth": {"alpha": math.pi / 3, "n": 64, "p": [4, 8, 16, 32], "seed": 3, "trials": 10},
    "strip": {"alpha": math.pi / 3, "p": [4.0], "n": 1024},
    "weights": {"p": [2, 4, 8], "delta": [0.25, 0.5, 0.75]},
    "opnorm": {"p": [4, 8, 16, 32], "delta": [0.5], "trials": 8, "seed": 7, "n": 64},
    "simulate": {"alpha": math.pi / 2, "radius": 1.0, "n": 400, "seed": 0},
    "verify-all": {},
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--alpha", type=float, help="sector aperture in radians")
    g.add_argument("--radius", type=float, help="truncation radius")
    g.add_argument("--n", type=int, help="resolution (mesh nodes per axis, particles, or strip N)")
    g.add_argument("--p", type=_floats, help="exponents, comma-separated")
    g.add_argument("--delta", type=_floats, help="power-weight parameters, comma-separated")
    g.add_argument("--trials", type=int, help="random trials / data count")
    g.add_argument("--seed", type=int, help="random seed")
    g.add_argument("--out", help="output directory (fallback $SECTORFLOW_OUT)")
    g.add_argument("--workers", type=int, help="worker threads (default: all CPUs)")
    g.add_argument("--fast", action="store_true", default=None, help="reduced resolution")
    g.add_argument("--config", help="flat JSON file; flags override its keys")
    parser = _Parser(prog="sectorflow", description=__doc__.splitlines()[0], epilog=CSV_COLUMNS,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "solve": "manufactured Dirichlet solve on a truncated sector",
        "hessian-growth": "r(p) = max ||D^2 G f||_p / ||f||_p over bounded data",
        "strip": "manufactured strip solve and kernel-bound profile",
        "weights": "sampled A_p characteristics of power weights",
        "opnorm": "weighted operator-norm estimates of the gradient kernel",
        "simulate": "vortex-particle Euler run",
        "verify-all": "run every acceptance experiment",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], epilog=CSV_COLUMNS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat JSON object")
    unknown = sorted(set(data) - ALLOWED_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("p", "delta"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    cfg.update(load_config(args.config))
    for key in COMMON:
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    cfg["fast"] = bool(cfg.get("fast", False))
    cfg["out"] = Path(cfg.get("out") or os.environ.get("SECTORFLOW_OUT") or "sectorflow_out")
    cfg["workers"] = int(cfg.get("workers") or os.cpu_count() or 1)
    if cfg["workers"] < 1:
        raise ConfigError("--workers must be positive")
    for key in ("n", "trials"):
        if key in cfg and int(cfg[key]) < 1:
            raise ConfigError(f"--{key} must be positive")
    return cfg


def _set_threads(workers: int) -> None:
    import numba

    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))


# -- subcommands ---------------------------------------------------------------------


def cmd_solve(cfg: dict) -> str:
    from . import elliptic as E
    from .experiments import ManufacturedSector, write_json, write_rows
    from .geometry import Sector

    sector = Sector(cfg["alpha"], 0j, cfg["radius"])
    mesh = E.build_mesh(sector, n=int(cfg["n"]))
    case = ManufacturedSector(sector.alpha, sector.truncation_radius)
    F = E.solve_dirichlet(mesh, E.GridFunction.from_callable(mesh, case.laplacian))
    exact = case.F(mesh.nodes)
    err = float(np.sqrt(np.sum((F.values - exact) ** 2 * mesh.weights) / np.sum(exact**2 * mesh.weights)))
    write_rows(cfg["out"] / "solve.csv", ["x", "y", "F", "F_exact"],
               [(z.real, z.imag, a, b) for z, a, b in zip(mesh.nodes, F.values, exact)])
    write_json(cfg["out"] / "solve.json", {"alpha": sector.alpha, "radius": sector.truncation_radius,
                                           "n": int(cfg["n"]), "rel_l2_error": err})
    return f"solve alpha={sector.alpha:.6g} n={cfg['n']} rel_l2_error={err:.4g}"


def cmd_hessian_growth(cfg: dict) -> str:
    from .experiments import _spread, hessian_growth, write_json, write_rows

    ps = tuple(cfg["p"])
    r, table = hessian_growth(alpha=cfg["alpha"], n=int(cfg["n"]), ps=ps, count=int(cfg["trials"]),
                              seed=int(cfg["seed"]))
    write_rows(cfg["out"] / "hessian_growth.csv", ["p", "r", "r_over_p"],
               [(p, float(v), float(v) / p) for p, v in zip(ps, r)])
    spread = _spread(r, ps)
    write_json(cfg["out"] / "hessian_growth.json",
               {"alpha": cfg["alpha"], "n": int(cfg["n"]), "p": list(ps), "seed": int(cfg["seed"]),
                "data": int(cfg["trials"]), "r": list(r), "per_datum": table.tolist(), "spread": spread})
    return f"hessian-growth alpha={cfg['alpha']:.6g} n={cfg['n']} r_over_p_spread={spread:.4g}"


def cmd_strip(cfg: dict) -> str:
    from . import strip as S
    from .experiments import manufactured_strip, strip_profile, write_json, write_rows

    alpha = cfg["alpha"]
    lines = []
    rows = []
    summary = {"alpha": alpha, "N": int(cfg["n"]), "cases": []}
    for p in cfg["p"]:
        grid = S.StripGrid(alpha, p, N=int(cfg["n"]), M=64 if cfg["fast"] else 128)
        h, U_ex, _, _ = manufactured_strip(grid)
        U, _, _ = S.strip_solve(S.StripField(grid, h))
        w = grid.dt * grid.theta_weights[None, :]
        err = float(np.sqrt(np.sum(np.abs(U.values - U_ex) ** 2 * w) / np.sum(U_ex**2 * w)))
        prof = strip_profile(alpha, p, 20.0 if cfg["fast"] else 40.0)
        sup = {g: prof.ratios[g].max(axis=(1, 2)) for g in ("K", "ML", "dML")}
        for k, xi in enumerate(prof.xi):
            rows.append((p, float(xi), *(float(sup[g][k]) for g in ("K", "ML", "dML"))))
        summary["cases"].append({"p": p, "rel_l2_error": err, "suprema": prof.suprema})
        lines.append(f"p={p:g} rel_l2_error={err:.3g}")
    write_rows(cfg["out"] / "strip_profile.csv", ["p", "xi", "K", "ML", "dML"], rows)
    write_json(cfg["out"] / "strip.json", summary)
    return f"strip alpha={alpha:.6g} N={cfg['n']} " + " ".join(lines)


def cmd_weights(cfg: dict) -> str:
    from . import weights as W
    from .experiments import write_json, write_rows

    balls = W.sample_balls(1.0, 3 if cfg["fast"] else 5, 5)
    rows = []
    for d in cfg["delta"]:
        for p in cfg["p"]:
            w = W.Weight.power(d, p)
            rows.append((d, p, W.ap_characteristic(w, p, balls), W.power_weight_ap_bound(d, p),
                         W.ap_characteristic(W.dual_weight(w, p), p / (p - 1), balls)))
    write_rows(cfg["out"] / "weights.csv", ["delta", "p", "sampled", "envelope", "dual_sampled"], rows)
    worst = max(r[2] / r[3] for r in rows)
    write_json(cfg["out"] / "weights.json", {"balls": len(balls), "max_sampled_over_envelope": worst})
    return f"weights cases={len(rows)} max_sampled_over_envelope={worst:.4g}"


def cmd_opnorm(cfg: dict) -> str:
    from . import kernels as Kn
    from . import weights as W

    out = []
    for d in cfg["delta"]:
        ests = [W.weighted_operator_norm_estimate(Kn.free_space_kernel_gradient, p, d, int(cfg["trials"]),
                                                  int(cfg["seed"]), n=int(cfg["n"]), workers=cfg["workers"])
                for p in cfg["p"]]
        name = "opnorm.csv" if len(cfg["delta"]) == 1 else f"opnorm_delta{d:g}.csv"
        W.write_norm_table(ests, cfg["out"] / name, {"family": "bumps"})
        out.append(f"delta={d:g} " + " ".join(f"{e.estimate:.4g}" for e in ests))
    return "opnorm " + "; ".join(out)


def _simulation_config(cfg: dict):
    from . import euler as V

    kind = cfg.get("patch_kind", "disk")
    if kind == "point":
        pts = tuple(complex(*xy) for xy in cfg.get("points", []))
        patch = V.PatchSpec(kind="point", points=pts, gammas=tuple(float(g) for g in cfg.get("gammas", [])))
    else:
        alpha = cfg["alpha"]
        default_c = 0.5 * cfg["radius"] * np.exp(0.5j * alpha) if math.isfinite(cfg["radius"]) else np.exp(0.5j * alpha)
        c = cfg.get("patch_center")
        patch = V.PatchSpec(kind=kind, center=complex(*c) if c is not None else complex(default_c),
                            radius=float(cfg.get("patch_radius", 0.1)), omega=float(cfg.get("patch_omega", 1.0)))
    return V.SimConfig(alpha=cfg["alpha"], radius=cfg["radius"], patch=patch, n=int(cfg["n"]),
                       dt=float(cfg.get("dt", 1e-3)), steps=int(cfg.get("steps", 20 if cfg["fast"] else 100)),
                       seed=int(cfg["seed"]), snapshot_every=int(cfg.get("snapshot_every", 10)),
                       diagnostics_every=int(cfg.get("diagnostics_every", 10)),
                       log_lipschitz_pairs=int(cfg.get("log_lipschitz_pairs", 0)), out=str(cfg["out"]))


def cmd_simulate(cfg: dict) -> str:
    from . import euler as V

    config = _simulation_config(cfg)
    result = V.run(config)
    d0, d1 = result.diagnostics[0], result.diagnostics[-1]
    return (f"simulate particles={result.final.n} steps={config.steps} "
            f"circulation={d1.circulation:.6g} energy_drift={abs(d1.energy - d0.energy):.3g}")


def cmd_verify_all(cfg: dict) -> str:
    from .experiments import run_all, write_json

    results = run_all(fast=cfg["fast"], out=cfg["out"], workers=cfg["workers"])
    for r in results:
        print(r.line(), flush=True)
    write_json(cfg["out"] / "summary.json",
               {"fast": cfg["fast"], "results": [{"criterion": r.criterion, "name": r.name, "passed": r.passed}
                                                 for r in results]})
    passed = sum(r.passed for r in results)
    return f"verify-all passed={passed}/{len(results)}"


HANDLERS = {
    "solve": cmd_solve,
    "hessian-growth": cmd_hessian_growth,
    "strip": cmd_strip,
    "weights": cmd_weights,
    "opnorm": cmd_opnorm,
    "simulate": cmd_simulate,
    "verify-all": cmd_verify_all,
}


def run_command(argv: list[str] | None = None) -> int:
    from .euler import NumericalGuardError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        cfg["out"].mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"sectorflow: config error: {exc}", file=sys.stderr)
        return 1
    _set_threads(cfg["workers"])
    try:
        print(HANDLERS[args.command](cfg), flush=True)
    except NumericalGuardError as exc:
        print(f"sectorflow: numerical guard: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError) as exc:
        print(f"sectorflow: config error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
