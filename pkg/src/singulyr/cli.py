"""Command-line experiment harness.

    singulyr fixed-points --function "exp(1/z)" --inner 1e-5 --outer 1 --out runs/exp
    singulyr corollary --function "exp(z)" --out runs/corollary
    singulyr renorm --preset exp-inv-renorm --out runs/renorm
    singulyr verify

A scenario is a single JSON document (``--config``); command-line flags
override its fields. Every run writes its tables plus ``manifest.json``.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, presets, tables
from .dynamics import (DegenerateInvolution, divergence_check, find_fixed_points, find_preimages,
                       find_two_cycles)
from .evaluation import SingularitySetup
from .expr import ExprError, format_ast, invert_conjugate, parse
from .metric_lemma import SelectionError, load_problem, select, verify_conditions
from .render import render_field
from .zalcman import GrowthNotReached, convergence_report, renormalize, step_diagnostics

SCENARIOS = ("fixed-points", "two-cycles", "renorm", "corollary-entire", "corollary-punctured",
             "field-render", "metric-lemma-file")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ScenarioConfig:
    scenario: str
    function: Optional[str] = None
    v: complex = 0j
    omitted: Optional[complex] = None
    domain_radius: float = 1.0
    inner: Optional[float] = None
    outer: Optional[float] = None
    lambda_targets: Optional[list[float]] = None
    radii: int = 48
    angles: int = 256
    essential_at: str = "0"
    center: complex = 0j
    half_width: Optional[float] = None
    resolution: Optional[int] = None
    metric_file: Optional[str] = None
    out: str = "out"
    seed: int = 0

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}")
        if self.scenario != "metric-lemma-file":
            if not self.function:
                raise ConfigError("function", "required")
            try:
                parse(self.function)
            except ExprError as exc:
                raise ConfigError("function", str(exc)) from None
        if not self.domain_radius > 0:
            raise ConfigError("domain_radius", "must be positive")
        if self.scenario in ("fixed-points", "two-cycles", "corollary-entire", "corollary-punctured"):
            for name in ("inner", "outer"):
                if getattr(self, name) is None:
                    raise ConfigError(name, "required")
                if not getattr(self, name) > 0:
                    raise ConfigError(name, "must be positive")
            if not self.inner < self.outer:
                raise ConfigError("inner", "must be smaller than outer")
            if self.outer > self.domain_radius:
                raise ConfigError("outer", "must not exceed domain_radius")
            if self.radii < 2 or self.angles < 1:
                raise ConfigError("radii", "grid densities must be positive (radii >= 2)")
        if self.scenario == "renorm":
            if not self.lambda_targets:
                raise ConfigError("lambda_targets", "required")
            lt = list(self.lambda_targets)
            if any(not x > 0 for x in lt) or lt != sorted(lt):
                raise ConfigError("lambda_targets", "must be positive and increasing")
        if self.scenario == "corollary-punctured" and self.essential_at not in ("0", "inf"):
            raise ConfigError("essential_at", "must be '0' or 'inf'")
        if self.scenario == "field-render":
            if self.half_width is None or not self.half_width > 0:
                raise ConfigError("half_width", "required and positive")
            if self.resolution is None or not 1 <= self.resolution <= 4096:
                raise ConfigError("resolution", "required, between 1 and 4096")
        if self.scenario == "metric-lemma-file" and not self.metric_file:
            raise ConfigError("metric_file", "required")

    def setup(self, g=None) -> SingularitySetup:
        return SingularitySetup(g if g is not None else parse(self.function), self.v, self.domain_radius,
                                self.omitted)

    def echo(self) -> dict:
        return tables.to_jsonable(asdict(self))


def _complex(value, path: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        parts = value.split(",")
        try:
            if len(parts) == 2:
                return complex(float(parts[0]), float(parts[1]))
            if len(parts) == 1:
                return complex(float(parts[0]))
        except ValueError:
            pass
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(path, f"expected a complex number as [re, im] or 're,im', got {value!r}")


def config_from_dict(doc: dict) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown field")
    if "scenario" not in doc:
        raise ConfigError("scenario", "required")
    doc = dict(doc)
    for key in ("v", "center"):
        if key in doc:
            doc[key] = _complex(doc[key], key)
    if doc.get("omitted") is not None:
        doc["omitted"] = _complex(doc["omitted"], "omitted")
    for key in ("domain_radius", "inner", "outer", "half_width"):
        if doc.get(key) is not None:
            try:
                doc[key] = float(doc[key])
            except (TypeError, ValueError):
                raise ConfigError(key, "must be a number") from None
    if doc.get("lambda_targets") is not None:
        try:
            doc["lambda_targets"] = [float(x) for x in doc["lambda_targets"]]
        except (TypeError, ValueError):
            raise ConfigError("lambda_targets", "must be a list of numbers") from None
    cfg = ScenarioConfig(**doc)
    cfg.validate()
    return cfg


# -- scenarios ---------------------------------------------------------------


class ScenarioFailed(RuntimeError):
    pass


def _fixed_point_outputs(cfg: ScenarioConfig, setup: SingularitySetup, out: Path, manifest: dict) -> None:
    recs = find_fixed_points(setup, cfg.inner, cfg.outer, radii=cfg.radii, angles=cfg.angles)
    tables.fixed_points_csv(recs, out / "fixed_points.csv")
    tables.write_json(recs, out / "fixed_points.json")
    manifest["records"] = len(recs)
    if len(recs) < 3:
        raise ScenarioFailed(f"only {len(recs)} fixed points found in [{cfg.inner:g}, {cfg.outer:g}]")
    report = divergence_check(recs, setup.v)
    tables.write_json(report, out / "divergence.json")
    manifest["verdict"] = "diverging" if report.diverging else "not diverging"


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run one scenario, write its files into ``cfg.out`` and return the manifest."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "config": cfg.echo(),
        "versions": {"singulyr": __version__, "python": platform.python_version(), "numpy": np.__version__},
    }
    t0 = time.perf_counter()
    status = "ok"
    try:
        _dispatch(cfg, out, manifest)
    except ScenarioFailed as exc:
        status = f"failed: {exc}"
        raise
    finally:
        manifest["status"] = status
        manifest["timings"] = {"total_seconds": time.perf_counter() - t0}
        tables.write_json(manifest, out / "manifest.json")
    return manifest


def _dispatch(cfg: ScenarioConfig, out: Path, manifest: dict) -> None:
    sc = cfg.scenario
    if sc == "fixed-points":
        _fixed_point_outputs(cfg, cfg.setup(), out, manifest)
    elif sc in ("corollary-entire", "corollary-punctured"):
        f = parse(cfg.function)
        if sc == "corollary-entire" or cfg.essential_at == "inf":
            g = invert_conjugate(f)
            manifest["conjugation"] = {"rule": "g(z) = 1/f(1/z)", "f": format_ast(f), "g": format_ast(g)}
        else:
            g = f
            manifest["conjugation"] = {"rule": "g = f", "f": format_ast(f), "g": format_ast(g)}
        setup = SingularitySetup(g, 0j, cfg.domain_radius, cfg.omitted)
        _fixed_point_outputs(cfg, setup, out, manifest)
    elif sc == "two-cycles":
        setup = cfg.setup()
        try:
            cycles = find_two_cycles(setup, cfg.inner, cfg.outer, radii=cfg.radii, angles=cfg.angles)
        except DegenerateInvolution as exc:
            manifest["degenerate_involution"] = exc.fraction
            raise ScenarioFailed(str(exc)) from None
        tables.cycles_csv(cycles, out / "two_cycles.csv")
        tables.write_json(cycles, out / "two_cycles.json")
        pre = find_preimages(setup, setup.v, cfg.inner, cfg.outer, radii=cfg.radii, angles=cfg.angles)
        tables.preimages_csv(pre, out / "preimages.csv")
        manifest["records"] = len(cycles)
        manifest["preimages"] = {"found": len(pre.members), "critical": len(pre.members) - len(pre.noncritical)}
        if not cycles:
            raise ScenarioFailed("no 2-cycles found")
    elif sc == "renorm":
        setup = cfg.setup()
        try:
            steps = renormalize(setup, cfg.lambda_targets)
        except GrowthNotReached as exc:
            raise ScenarioFailed(str(exc)) from None
        diags = [step_diagnostics(s, setup) for s in steps]
        tables.renorm_csv(steps, diags, out / "renorm.csv")
        payload = {"steps": steps, "diagnostics": diags}
        if len(steps) >= 2:
            payload["convergence"] = convergence_report(steps, setup, min(1.0, min(s.lam for s in steps) / 3))
        tables.write_json(payload, out / "renorm.json")
        manifest["records"] = len(steps)
    elif sc == "field-render":
        render_field(cfg.setup(), cfg.center, cfg.half_width, cfg.resolution, out / "field.ppm")
    elif sc == "metric-lemma-file":
        problem = load_problem(cfg.metric_file)
        try:
            res = select(problem)
        except SelectionError as exc:
            raise ScenarioFailed(str(exc)) from None
        report = verify_conditions(problem, res.w)
        tables.write_json({"w": res.w, "iterations": res.iterations, "trace": res.trace,
                           "trace_length": res.trace_length, "conditions": report,
                           "distance_bound_held": report.distance_label}, out / "selection.json")


# -- argument parsing ----------------------------------------------------------

_COMMAND_SCENARIO = {
    "fixed-points": "fixed-points",
    "two-cycles": "two-cycles",
    "renorm": "renorm",
    "field": "field-render",
    "metric-lemma": "metric-lemma-file",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="singulyr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON document")
    common.add_argument("--preset", choices=sorted(presets.PRESETS))
    common.add_argument("--function")
    common.add_argument("--v", help="singularity as re,im")
    common.add_argument("--omitted", help="omitted value as re,im")
    common.add_argument("--inner", type=float)
    common.add_argument("--outer", type=float)
    common.add_argument("--domain-radius", type=float)
    common.add_argument("--radii", type=int)
    common.add_argument("--angles", type=int)
    common.add_argument("--out")
    common.add_argument("--seed", type=int)

    for name in ("fixed-points", "two-cycles"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("renorm", parents=[common])
    p.add_argument("--lambdas", help="comma-separated increasing targets, e.g. 10,100,1000")
    p = sub.add_parser("corollary", parents=[common])
    p.add_argument("--case", choices=["entire", "punctured"], help="default: entire")
    p.add_argument("--essential-at", choices=["0", "inf"])
    p = sub.add_parser("field", parents=[common])
    p.add_argument("--center", help="window centre as re,im")
    p.add_argument("--half-width", type=float)
    p.add_argument("--resolution", type=int)
    p = sub.add_parser("metric-lemma", parents=[common])
    p.add_argument("metric_file", nargs="?")
    sub.add_parser("verify", help="run the acceptance criteria")
    return parser


def _config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    doc: dict = {}
    if args.preset:
        doc.update(presets.PRESETS[args.preset])
    if args.config:
        doc.update(json.loads(Path(args.config).read_text()))
    if args.command == "corollary":
        if args.case:
            doc["scenario"] = f"corollary-{args.case}"
        elif not str(doc.get("scenario", "")).startswith("corollary-"):
            doc["scenario"] = "corollary-entire"
    else:
        doc.setdefault("scenario", _COMMAND_SCENARIO[args.command])
        if doc["scenario"] != _COMMAND_SCENARIO[args.command]:
            raise ConfigError("scenario", f"config is for {doc['scenario']!r}, not {args.command!r}")
    flags = {
        "function": args.function, "v": args.v, "omitted": args.omitted, "inner": args.inner,
        "outer": args.outer, "domain_radius": args.domain_radius, "radii": args.radii, "angles": args.angles,
        "out": args.out, "seed": args.seed,
        "center": getattr(args, "center", None), "half_width": getattr(args, "half_width", None),
        "resolution": getattr(args, "resolution", None), "essential_at": getattr(args, "essential_at", None),
        "metric_file": getattr(args, "metric_file", None),
    }
    if getattr(args, "lambdas", None):
        try:
            flags["lambda_targets"] = [float(x) for x in args.lambdas.split(",")]
        except ValueError:
            raise ConfigError("lambda_targets", f"cannot parse {args.lambdas!r}") from None
    doc.update({k: val for k, val in flags.items() if val is not None})
    if doc.get("scenario") == "corollary-entire":
        doc.pop("essential_at", None)
    return config_from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "verify":
        from .acceptance import run_all
        results = run_all(echo=print)
        failed = [r for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
        return 1 if failed else 0
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run_scenario(cfg)
    except ScenarioFailed as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return 1
    summary = {k: manifest[k] for k in ("records", "verdict", "conjugation") if k in manifest}
    print(json.dumps({"out": cfg.out, **tables.to_jsonable(summary)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
