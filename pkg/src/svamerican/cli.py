"""Command-line driver: price, boundary, verify and converge.

Usage::

    svamerican price --config heston.json [--solver.epsilon 1e-4 ...]
    svamerican converge --config heston.json --axis epsilon

Configuration is a single JSON document; any leaf can be overridden from the
command line with a dotted flag.  Exit codes: 0 success, 2 model class
rejected (nonnegative Fichera function), 3 numerical failure, 4 acceptance
band violated, 1 for invalid configuration or parameters.
"""

from __future__ import annotations

import argparse
import copy
import inspect
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import export
from .errors import (AcceptanceViolation, ConfigurationError, DegenerateBoundaryUnsupported,
                     SVAmericanError, TruncationError)
from .free_boundary import check_partition, check_structure, extract
from .grid import build_grid, default_y_max
from .mc_oracle import european_value, lsmc_value, policy_value, simulate
from .model import FicheraCase, _REGISTRY, fichera_classify, model_from_config
from .solver import SolveConfig, psor_solve, solve

logger = logging.getLogger("svamerican")

OUTPUT_ENV = "SVAMERICAN_OUTPUT_DIR"
DEFAULT_OUTPUT = "svamerican-output"
AXES = ("epsilon", "grid", "domain", "paths")

# allowed keys per block, with defaults (None: required or derived)
GRID_KEYS = {"s_half_width": 4.0, "y_max": None, "n_s": 101, "n_y": 51, "n_theta": 100}
SOLVER_KEYS = {"method": "penalty", "epsilon": None, "epsilon_schedule": None, "newton_tol": 1e-9,
               "newton_max_iter": 50, "theta_scheme": 0.5, "rannacher_steps": 5,
               "linear_solver": "banded-lu", "strict": True, "psor_omega": 1.5,
               "psor_tol": 1e-10, "psor_max_iter": 20000}
MC_KEYS = {"n_paths": 200_000, "n_steps": 250, "seed": 12345, "basis_degree": 2,
           "antithetic": False}
SPOT_KEYS = {"x0": None, "y0": None}
OUTPUT_KEYS = {"directory": None, "formats": ["csv", "json"], "surface_slices": "final"}
BLOCKS = {"model": None, "grid": GRID_KEYS, "solver": SOLVER_KEYS, "mc": MC_KEYS,
          "spot": SPOT_KEYS, "output": OUTPUT_KEYS}


@dataclass(frozen=True)
class RunConfig:
    model: dict
    grid: dict
    solver: dict
    mc: dict
    spot: dict
    output: dict

    def to_dict(self) -> dict:
        return {"model": dict(self.model), "grid": dict(self.grid), "solver": dict(self.solver),
                "mc": dict(self.mc), "spot": dict(self.spot), "output": dict(self.output)}

    # -- builders -----------------------------------------------------------
    def build_model(self):
        return model_from_config(self.model)

    def build_grid(self, model):
        g = self.grid
        y_max = g["y_max"] if g["y_max"] is not None else default_y_max(model)
        return build_grid(model, g["s_half_width"], y_max, g["n_s"], g["n_y"], g["n_theta"])

    def solve_config(self) -> SolveConfig:
        s = self.solver
        kw = {k: s[k] for k in ("newton_tol", "newton_max_iter", "theta_scheme",
                                "rannacher_steps", "linear_solver", "strict", "psor_omega",
                                "psor_tol", "psor_max_iter")}
        if s["epsilon_schedule"] is not None:
            kw["epsilon_schedule"] = tuple(s["epsilon_schedule"])
        elif s["epsilon"] is not None:
            kw["epsilon"] = s["epsilon"]
        return SolveConfig(**kw)

    def spot_point(self, model) -> tuple[float, float]:
        x0 = self.spot["x0"] if self.spot["x0"] is not None else model.K
        y0 = self.spot["y0"]
        if y0 is None:
            y0 = model.params.get("m", 0.04)
        return float(x0), float(y0)

    def output_dir(self) -> Path:
        d = self.output["directory"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
        return Path(d)


def _check_block(name: str, block, allowed: dict) -> dict:
    if not isinstance(block, dict):
        raise ConfigurationError(f"{name}: expected an object, got {type(block).__name__}")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown key {name}.{unknown[0]}")
    out = copy.deepcopy(allowed)
    out.update(block)
    return out


def _check_model_block(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigurationError("model: expected an object")
    if "model" not in block:
        raise ConfigurationError("missing required key model.model")
    name = block["model"]
    if name not in _REGISTRY:
        raise ConfigurationError(f"model.model: unknown model {name!r}; registered: {sorted(_REGISTRY)}")
    params = inspect.signature(_REGISTRY[name]).parameters
    unknown = sorted(set(block) - set(params) - {"model"})
    if unknown:
        raise ConfigurationError(f"unknown key model.{unknown[0]}")
    missing = [p for p, v in params.items()
               if v.default is inspect.Parameter.empty and p not in block]
    if missing:
        raise ConfigurationError(f"missing required key model.{missing[0]}")
    for k, v in block.items():
        if k != "model" and not _is_num(v):
            raise ConfigurationError(f"model.{k}: expected a number, got {v!r}")
    return dict(block)


def _expect(cond: bool, path: str, what: str):
    if not cond:
        raise ConfigurationError(f"{path}: {what}")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_config(doc: dict) -> RunConfig:
    """Validate a raw config document; every problem names its dotted path."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be an object")
    unknown = sorted(set(doc) - set(BLOCKS))
    if unknown:
        raise ConfigurationError(f"unknown key {unknown[0]}")
    if "model" not in doc:
        raise ConfigurationError("missing required key model")
    model = _check_model_block(doc["model"])
    blocks = {name: _check_block(name, doc.get(name, {}), allowed)
              for name, allowed in BLOCKS.items() if allowed is not None}

    g = blocks["grid"]
    for k in ("n_s", "n_y", "n_theta"):
        _expect(_is_int(g[k]), f"grid.{k}", "expected an integer")
    for k in ("s_half_width", "y_max"):
        _expect(g[k] is None and k == "y_max" or _is_num(g[k]), f"grid.{k}", "expected a number")

    s = blocks["solver"]
    _expect(s["method"] in ("penalty", "psor"), "solver.method", "must be 'penalty' or 'psor'")
    _expect(s["epsilon"] is None or s["epsilon_schedule"] is None, "solver.epsilon",
            "give either epsilon or epsilon_schedule, not both")
    if s["epsilon_schedule"] is not None:
        _expect(isinstance(s["epsilon_schedule"], list) and all(map(_is_num, s["epsilon_schedule"])),
                "solver.epsilon_schedule", "expected a list of numbers")
    for k in ("epsilon", "newton_tol", "theta_scheme", "psor_omega", "psor_tol"):
        _expect(s[k] is None or _is_num(s[k]), f"solver.{k}", "expected a number")
    for k in ("newton_max_iter", "rannacher_steps", "psor_max_iter"):
        _expect(_is_int(s[k]), f"solver.{k}", "expected an integer")
    _expect(isinstance(s["strict"], bool), "solver.strict", "expected a boolean")

    mc = blocks["mc"]
    for k in ("n_paths", "n_steps", "seed", "basis_degree"):
        _expect(_is_int(mc[k]), f"mc.{k}", "expected an integer")
    _expect(mc["basis_degree"] in (2, 3), "mc.basis_degree", "must be 2 or 3")
    _expect(isinstance(mc["antithetic"], bool), "mc.antithetic", "expected a boolean")

    sp = blocks["spot"]
    for k in ("x0", "y0"):
        _expect(sp[k] is None or _is_num(sp[k]), f"spot.{k}", "expected a number")

    out = blocks["output"]
    _expect(isinstance(out["formats"], list) and set(out["formats"]) <= {"csv", "json"},
            "output.formats", "must be a list drawn from ['csv', 'json']")
    _expect(out["surface_slices"] in ("final", "all"), "output.surface_slices",
            "must be 'final' or 'all'")
    _expect(out["directory"] is None or isinstance(out["directory"], str), "output.directory",
            "expected a string")

    cfg = RunConfig(model=model, **blocks)
    try:
        cfg.solve_config()
    except ConfigurationError as exc:
        raise ConfigurationError(f"solver: {exc}") from None
    return cfg


def apply_overrides(doc: dict, pairs: list[tuple[str, str]]) -> dict:
    """Set dotted leaf paths, e.g. ("solver.epsilon", "1e-4"); values are parsed as JSON when possible."""
    doc = copy.deepcopy(doc)
    for path, raw in pairs:
        parts = path.split(".")
        if len(parts) != 2 or parts[0] not in BLOCKS:
            raise ConfigurationError(f"bad override path {path!r}; expected <block>.<key>")
        allowed = BLOCKS[parts[0]]
        if allowed is not None and parts[1] not in allowed:
            raise ConfigurationError(f"unknown key {path}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        doc.setdefault(parts[0], {})[parts[1]] = value
    return doc


def _split_overrides(tokens: list[str]) -> list[tuple[str, str]]:
    pairs, i = [], 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigurationError(f"unrecognised argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigurationError(f"override {tok} needs a value")
            value = tokens[i + 1]
            i += 2
        pairs.append((key, value))
    return pairs


def load_config(path, overrides: list[tuple[str, str]] = ()) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(apply_overrides(doc, list(overrides)))


# -- pipeline pieces ------------------------------------------------------------

def _classify(model, strict: bool) -> dict:
    rep = fichera_classify(model)
    info = {"F_value": rep.F_value, "case": rep.case.value}
    if rep.case is FicheraCase.F2_noBoundary and strict:
        raise DegenerateBoundaryUnsupported(
            f"Fichera function F={rep.F_value:.4g} >= 0 (case F2): no boundary datum at y=0; "
            "only case F1 is supported")
    return info


def _run_solver(cfg: RunConfig, model, grid):
    sc = cfg.solve_config()
    return psor_solve(model, grid, sc) if cfg.solver["method"] == "psor" else solve(model, grid, sc)


def _price(result, x0, y0) -> float:
    """Bilinear value at t = 0; with no time steps the initial slice is all there is."""
    if result.grid.n_theta == 0:
        from .solver import interpolate_surface
        return interpolate_surface(result.final.values, result.grid, math.log(x0), y0)
    return result.price_at(x0, y0, t=0.0, method="linear")


def _boundary_touch(result) -> bool:
    try:
        extract(result)
    except TruncationError:
        return True
    return False


def _want(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.output["formats"]


# -- subcommands ------------------------------------------------------------

def cmd_price(cfg: RunConfig) -> dict:
    model = cfg.build_model()
    fichera = _classify(model, cfg.solver["strict"])
    grid = cfg.build_grid(model)
    result = _run_solver(cfg, model, grid)
    x0, y0 = cfg.spot_point(model)
    price = _price(result, x0, y0)
    summary = {
        "command": "price", "price_at_spot": price, "spot": {"x0": x0, "y0": y0, "t": 0.0},
        "fichera": fichera, "method": result.method,
        "residuals": result.complementarity_residual,
        "max_residual": float(result.complementarity_residual.max()),
        "schedule_residuals": result.schedule_residuals,
        "newton_stats": {"total": int(sum(result.newton_iterations)),
                         "max": int(max(result.newton_iterations, default=0))},
        "boundary_touch": _boundary_touch(result) if grid.n_theta else False,
        "wallclock": result.wallclock,
    }
    out = cfg.output_dir()
    if _want(cfg, "csv"):
        summary["surface_csv_sha256"] = export.write_surface_csv(
            result, out / "surface.csv", cfg.output["surface_slices"])
        if _want(cfg, "json"):
            export.write_json(out / "surface.meta.json", export.surface_metadata(result))
    if _want(cfg, "json"):
        summary = export.write_json(out / "summary.json", summary, cfg.to_dict())
    return summary


def cmd_boundary(cfg: RunConfig) -> dict:
    model = cfg.build_model()
    _classify(model, cfg.solver["strict"])
    grid = cfg.build_grid(model)
    result = _run_solver(cfg, model, grid)
    fb = extract(result)
    rep = check_structure(fb)
    partition = check_partition(result, fb)
    report = {
        "command": "boundary", "tol_used": fb.tol_used,
        "checks": {k: {"passed": c.passed, "worst": c.worst, "cells": c.cells}
                   for k, c in rep.checks.items()},
        "partition_violations": len(partition),
        "passed": rep.passed and not partition,
        "wallclock": result.wallclock,
    }
    out = cfg.output_dir()
    if _want(cfg, "csv"):
        report["boundary_csv_sha256"] = export.write_boundary_csv(fb, out / "boundary.csv")
    if _want(cfg, "json"):
        report = export.write_json(out / "structure.json", report, cfg.to_dict())
    if not report["passed"]:
        failed = [k for k, c in rep.checks.items() if not c.passed]
        if partition:
            failed.append("partition")
        raise AcceptanceViolation(f"structure checks failed: {', '.join(failed)}")
    return report


def verify_bands(pde: float, lsmc, policy, european, K: float) -> dict[str, bool]:
    """Acceptance bands of the PDE/Monte Carlo cross-check."""
    se = lsmc.std_error
    return {
        "pde_vs_lsmc": abs(pde - lsmc.value) <= max(3.0 * se, 0.01 * K),
        "policy_vs_lsmc": policy.value >= lsmc.value - 3.0 * se,
        "european_le_policy": european.value <= policy.value + 3.0 * policy.std_error,
        "policy_le_lsmc": policy.value <= lsmc.value + 6.0 * se,
        "pde_ge_european": pde >= european.value - 3.0 * european.std_error,
        "pde_ge_policy": pde >= policy.value - 3.0 * policy.std_error,
        "pde_ge_lsmc": pde >= lsmc.value - 3.0 * se,
    }


def cmd_verify(cfg: RunConfig) -> dict:
    model = cfg.build_model()
    _classify(model, cfg.solver["strict"])
    grid = cfg.build_grid(model)
    result = _run_solver(cfg, model, grid)
    x0, y0 = cfg.spot_point(model)
    pde = _price(result, x0, y0)
    fb = extract(result)
    mc = cfg.mc
    paths = simulate(model, x0, y0, 0.0, mc["n_paths"], mc["n_steps"], mc["seed"],
                     antithetic=mc["antithetic"])
    lsmc = lsmc_value(paths, model, mc["basis_degree"])
    policy, stops = policy_value(paths, fb, model, return_stops=True)
    euro = european_value(paths, model)
    bands = verify_bands(pde, lsmc, policy, euro, model.K)
    report = {
        "command": "verify", "pde_price": pde, "spot": {"x0": x0, "y0": y0},
        "estimates": {"lsmc": lsmc.to_dict(), "policy": policy.to_dict(),
                      "european": euro.to_dict()},
        "deviation_pde_lsmc": pde - lsmc.value, "bands": bands, "passed": all(bands.values()),
        "wallclock": result.wallclock,
    }
    out = cfg.output_dir()
    if _want(cfg, "csv"):
        report["exercise_histogram_sha256"] = export.write_exercise_histogram(
            out / "exercise_times.csv", stops, paths.times)
    if _want(cfg, "json"):
        report = export.write_json(out / "verify.json", report, cfg.to_dict())
    if not all(bands.values()):
        bad = [k for k, ok in bands.items() if not ok]
        raise AcceptanceViolation(f"verification bands violated: {', '.join(bad)}")
    return report


def _level_config(cfg: RunConfig, axis: str, level: int) -> RunConfig:
    d = cfg.to_dict()
    f = 2 ** level
    if axis == "epsilon":
        base = cfg.solve_config().epsilon
        d["solver"]["epsilon"], d["solver"]["epsilon_schedule"] = base / f, None
        d["solver"]["method"] = "penalty"
    elif axis == "grid":
        for k in ("n_s", "n_y", "n_theta"):
            d["grid"][k] = cfg.grid[k] * f
    elif axis == "domain":
        model = cfg.build_model()
        y_max = cfg.grid["y_max"] if cfg.grid["y_max"] is not None else default_y_max(model)
        d["grid"]["s_half_width"] = cfg.grid["s_half_width"] * f
        d["grid"]["y_max"] = y_max * f
        d["grid"]["n_s"] = cfg.grid["n_s"] * f
        d["grid"]["n_y"] = cfg.grid["n_y"] * f
    elif axis == "paths":
        d["mc"]["n_paths"] = cfg.mc["n_paths"] * 4 ** level
    return parse_config(d)


def _leg(args) -> dict:
    cfg, axis, level = args
    model = cfg.build_model()
    if axis == "paths":
        x0, y0 = cfg.spot_point(model)
        mc = cfg.mc
        paths = simulate(model, x0, y0, 0.0, mc["n_paths"], mc["n_steps"], mc["seed"],
                         antithetic=mc["antithetic"])
        est = lsmc_value(paths, model, mc["basis_degree"])
        return {"level": level, "parameter": float(mc["n_paths"]), "price": est.value,
                "std_error": est.std_error}
    grid = cfg.build_grid(model)
    result = _run_solver(cfg, model, grid)
    x0, y0 = cfg.spot_point(model)
    param = {"epsilon": cfg.solve_config().epsilon, "grid": float(cfg.grid["n_s"]),
             "domain": float(cfg.grid["s_half_width"])}[axis]
    return {"level": level, "parameter": param, "price": _price(result, x0, y0),
            "std_error": 0.0}


def cmd_converge(cfg: RunConfig, axis: str, levels: int = 3, workers: int | None = None) -> dict:
    if axis not in AXES:
        raise ConfigurationError(f"axis must be one of {AXES}")
    if levels < 2:
        raise ConfigurationError("levels must be at least 2")
    model = cfg.build_model()
    _classify(model, cfg.solver["strict"])
    jobs = [(_level_config(cfg, axis, k), axis, k) for k in range(levels)]
    workers = workers or min(levels, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_leg, jobs))
    else:
        rows = [_leg(j) for j in jobs]
    prev = None
    for row in rows:
        row["diff"] = abs(row["price"] - prev) if prev is not None else math.nan
        prev = row["price"]
    table = {"command": "converge", "axis": axis, "rows": rows}
    out = cfg.output_dir()
    if _want(cfg, "csv"):
        table["table_csv_sha256"] = export.write_table_csv(out / f"converge_{axis}.csv", rows)
    if _want(cfg, "json"):
        table = export.write_json(out / f"converge_{axis}.json", table, cfg.to_dict())
    return table


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svamerican",
                                description="American put under stochastic volatility: "
                                            "penalty PDE solver with PSOR and Monte Carlo checks.",
                                epilog="Override any config leaf with --<block>.<key> VALUE, "
                                       f"e.g. --solver.epsilon 1e-4.  ${OUTPUT_ENV} sets the "
                                       "default output directory.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("price", "solve and report the price at the spot"),
                       ("boundary", "extract the exercise boundary and run structure checks"),
                       ("verify", "cross-check the PDE against Monte Carlo"),
                       ("converge", "refinement study along one axis")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        if name == "converge":
            sp.add_argument("--axis", required=True, choices=AXES)
            sp.add_argument("--levels", type=int, default=3)
            sp.add_argument("--workers", type=int, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _split_overrides(rest))
        if args.command == "price":
            doc = cmd_price(cfg)
        elif args.command == "boundary":
            doc = cmd_boundary(cfg)
        elif args.command == "verify":
            doc = cmd_verify(cfg)
        else:
            doc = cmd_converge(cfg, args.axis, args.levels, args.workers)
    except SVAmericanError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [cli.IOError]: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(export.strip_volatile(export._clean(doc)), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
