"""Command-line orchestration: graph files in, certification reports out.

Subcommands:
  certify <config.json>   full pipeline to report.csv / report.json / curve.svg
  pareto  <config.json>   compute and persist base-certificate fronts
  export  <config.json> --radius x_add=..  write the instance as a CPLEX LP file

Exit codes: 0 success, 1 internal error, 2 input error. Failures print a
machine-readable JSON object with the failing stage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

from .collective import (
    CertOptions,
    build_instance,
    build_problem,
    expected_problem_size,
    sweep,
)
from .errors import InputError
from .graph import AXES, BudgetVector, load_graph, load_threat_model
from .lp import export_lp
from .pareto import compute_front, get_certificate, load_fronts, save_fronts
from .report import CertificationReport, config_hash, tool_versions
from .smoothing import (
    estimate_predictions,
    is_certified,
    load_predictions,
    load_smoothing_params,
    save_predictions,
)


@dataclass
class RunConfig:
    raw: dict
    base_dir: str
    graph_path: str
    threat_model_path: str
    fronts_path: str | None
    smoothing_path: str | None
    predictions_path: str | None
    output_dir: str
    mode: str
    sweep_axis: str
    radii: list
    seed: int
    n_class_samples: int
    n_prob_samples: int
    alpha: float
    layers: int
    targets: list | None
    log_x: bool
    workers: int


def parse_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"config file {path}: parse error at line {e.lineno}: {e.msg}")
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(base, p)

    for key in ("graph", "threat_model"):
        if key not in doc:
            raise InputError(f"config: missing field {key!r}")
    fronts = doc.get("fronts")
    smoothing = doc.get("smoothing")
    if (fronts is None) == (smoothing is None):
        raise InputError("config: exactly one of 'fronts' and 'smoothing' must be given")
    sweep_doc = doc.get("sweep")
    if not isinstance(sweep_doc, dict) or "axis" not in sweep_doc or "radii" not in sweep_doc:
        raise InputError("config: 'sweep' must provide 'axis' and 'radii'")
    axis = sweep_doc["axis"]
    if axis not in AXES:
        raise InputError(f"config: unknown sweep axis {axis!r}")
    radii = [int(r) for r in sweep_doc["radii"]]
    if not radii:
        raise InputError("config: sweep radii must be non-empty")
    if any(r < 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("config: sweep radii must be non-negative and strictly increasing")
    mode = doc.get("mode", "exact")
    if mode not in ("exact", "relaxed"):
        raise InputError(f"config: mode must be 'exact' or 'relaxed', got {mode!r}")
    alpha = float(doc.get("alpha", 0.01))
    if not 0.0 < alpha < 1.0:
        raise InputError("config: alpha must lie in (0, 1)")
    layers = int(doc.get("layers", 2))
    if layers < 1:
        raise InputError("config: layers must be >= 1")
    n_class = int(doc.get("n_class_samples", 1000))
    n_prob = int(doc.get("n_prob_samples", 10**6))
    if n_class < 1 or n_prob < 1:
        raise InputError("config: sample counts must be >= 1")
    targets = doc.get("targets")
    return RunConfig(
        raw=doc,
        base_dir=base,
        graph_path=resolve(doc["graph"]),
        threat_model_path=resolve(doc["threat_model"]),
        fronts_path=resolve(fronts),
        smoothing_path=resolve(smoothing),
        predictions_path=resolve(doc.get("predictions")),
        output_dir=resolve(doc.get("output_dir", "out")),
        mode=mode,
        sweep_axis=axis,
        radii=radii,
        seed=int(doc.get("seed", 0)),
        n_class_samples=n_class,
        n_prob_samples=n_prob,
        alpha=alpha,
        layers=layers,
        targets=None if targets is None else [int(t) for t in targets],
        log_x=bool(doc.get("log_x", False)),
        workers=int(doc.get("workers", 1)),
    )


class StageFailure(Exception):
    def __init__(self, stage, error, exit_code):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = str(error)
        self.exit_code = exit_code


class _Stages:
    """Runs pipeline stages, classifying failures for the exit code."""

    def __init__(self):
        self.current = None

    def run(self, stage, fn, *args, **kwargs):
        self.current = stage
        try:
            return fn(*args, **kwargs)
        except StageFailure:
            raise
        except (InputError, FileNotFoundError, KeyError) as e:
            raise StageFailure(stage, e, 2)
        except Exception as e:  # noqa: BLE001 - report then exit nonzero
            raise StageFailure(stage, e, 1)


def _emit_failure(exc: StageFailure) -> int:
    print(json.dumps({"stage": exc.stage, "error": exc.error}), file=sys.stdout)
    return exc.exit_code


def _resolve_targets(cfg, g, predictions):
    if cfg.targets is not None:
        return cfg.targets
    if predictions is not None and g.labels is not None:
        by_node = {p.node: p for p in predictions}
        return [
            n
            for n in range(g.num_nodes)
            if n in by_node and by_node[n].majority_class == g.labels[n]
        ]
    return list(range(g.num_nodes))


def _front_box(tm, axis, radii):
    target = max(max(radii), getattr(tm.global_budget, axis))
    return tm.global_budget.with_axis(axis, target)


def _obtain_predictions(stages, cfg, g):
    if cfg.predictions_path is not None:
        return stages.run("predictions", load_predictions, cfg.predictions_path)
    if cfg.smoothing_path is None:
        return None
    sp = stages.run("load_smoothing", load_smoothing_params, cfg.smoothing_path)

    def estimate():
        return estimate_predictions(
            g,
            sp,
            cfg.layers,
            cfg.n_class_samples,
            cfg.n_prob_samples,
            cfg.alpha,
            cfg.seed,
            workers=cfg.workers,
        )

    return stages.run("predictions", estimate)


def _obtain_fronts(stages, cfg, g, tm, targets, predictions):
    box = _front_box(tm, cfg.sweep_axis, cfg.radii)
    if cfg.fronts_path is not None:
        loaded = stages.run("fronts", load_fronts, cfg.fronts_path)

        def pick():
            certs = {}
            for n in targets:
                cert = get_certificate(loaded, n, box)
                certs[n] = cert
            return certs

        return stages.run("fronts", pick)

    sp = stages.run("load_smoothing", load_smoothing_params, cfg.smoothing_path)
    by_node = {p.node: p for p in predictions}

    def compute_all():
        certs = {}
        for n in targets:
            pred = by_node.get(n)
            if pred is None:
                raise InputError(f"no prediction available for target node {n}")
            p_n = pred.p_lower

            def oracle(budget, p_n=p_n):
                return is_certified(budget, p_n, sp)

            certs[n] = compute_front(oracle, box, node=n)
        return certs

    return stages.run("fronts", compute_all)


def _load_common(stages, cfg):
    g = stages.run("load_graph", load_graph, cfg.graph_path)
    tm = stages.run("load_threat_model", load_threat_model, cfg.threat_model_path)
    stages.run("load_threat_model", tm.validate_for, g)
    return g, tm


def cmd_certify(config_path, mode_override=None, seed_override=None) -> int:
    stages = _Stages()
    try:
        cfg = stages.run("load_config", parse_run_config, config_path)
        if mode_override:
            cfg.mode = mode_override
        if seed_override is not None:
            cfg.seed = seed_override
        g, tm = _load_common(stages, cfg)
        predictions = _obtain_predictions(stages, cfg, g)
        targets = stages.run("targets", _resolve_targets, cfg, g, predictions)
        if not targets:
            raise StageFailure("targets", "no target nodes remain", 2)
        certs = _obtain_fronts(stages, cfg, g, tm, targets, predictions)
        options = CertOptions(relaxed=(cfg.mode == "relaxed"), layers=cfg.layers)
        tm_max = tm.with_global(cfg.sweep_axis, max(max(cfg.radii), getattr(tm.global_budget, cfg.sweep_axis)))
        inst = stages.run(
            "receptive_fields", build_instance, g, tm_max, certs, targets, options
        )
        points = stages.run("sweep", sweep, inst, cfg.sweep_axis, cfg.radii)

        def write_report():
            os.makedirs(cfg.output_dir, exist_ok=True)
            provenance = {
                "config_hash": config_hash(cfg.raw),
                "seed": cfg.seed,
                "mode": cfg.mode,
                "versions": tool_versions(),
            }
            report = CertificationReport.from_sweep(points, len(targets), provenance)
            if predictions is not None and cfg.predictions_path is None:
                save_predictions(predictions, os.path.join(cfg.output_dir, "predictions.json"))
            report.write(
                os.path.join(cfg.output_dir, "report.csv"),
                os.path.join(cfg.output_dir, "report.json"),
                os.path.join(cfg.output_dir, "curve.svg"),
                log_x=cfg.log_x,
            )
            return report

        report = stages.run("report", write_report)
        print(
            json.dumps(
                {
                    "output_dir": cfg.output_dir,
                    "num_targets": len(targets),
                    "summary": report.summary,
                }
            )
        )
        return 0
    except StageFailure as exc:
        return _emit_failure(exc)


def cmd_pareto(config_path, seed_override=None) -> int:
    stages = _Stages()
    try:
        cfg = stages.run("load_config", parse_run_config, config_path)
        if seed_override is not None:
            cfg.seed = seed_override
        if cfg.smoothing_path is None:
            raise StageFailure("load_config", "pareto requires 'smoothing' in the config", 2)
        g, tm = _load_common(stages, cfg)
        predictions = _obtain_predictions(stages, cfg, g)
        targets = stages.run("targets", _resolve_targets, cfg, g, predictions)
        certs = _obtain_fronts(stages, cfg, g, tm, targets, predictions)

        def write_fronts():
            os.makedirs(cfg.output_dir, exist_ok=True)
            out = os.path.join(cfg.output_dir, "fronts.json")
            save_fronts(list(certs.values()), out)
            return out

        out = stages.run("report", write_fronts)
        print(json.dumps({"fronts": out, "num_targets": len(targets)}))
        return 0
    except StageFailure as exc:
        return _emit_failure(exc)


def _parse_radius_spec(spec: str) -> BudgetVector:
    values = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InputError(f"bad --radius component {part!r}, expected axis=value")
        key, val = part.split("=", 1)
        key = key.strip()
        if key not in AXES:
            raise InputError(f"unknown budget axis {key!r}")
        values[key] = int(val)
    return BudgetVector(**{axis: values.get(axis, 0) for axis in AXES})


def cmd_export(config_path, radius_spec, mode_override=None, output=None, seed_override=None) -> int:
    stages = _Stages()
    try:
        cfg = stages.run("load_config", parse_run_config, config_path)
        if mode_override:
            cfg.mode = mode_override
        if seed_override is not None:
            cfg.seed = seed_override
        budget = stages.run("load_config", _parse_radius_spec, radius_spec)
        g, tm = _load_common(stages, cfg)
        predictions = _obtain_predictions(stages, cfg, g)
        targets = stages.run("targets", _resolve_targets, cfg, g, predictions)
        certs = _obtain_fronts(stages, cfg, g, tm, targets, predictions)
        import dataclasses

        tm_b = dataclasses.replace(tm, global_budget=budget)
        options = CertOptions(relaxed=(cfg.mode == "relaxed"), layers=cfg.layers)
        inst = stages.run("receptive_fields", build_instance, g, tm_b, certs, targets, options)

        def export():
            problem = build_problem(inst)
            expected = expected_problem_size(inst)
            actual_rows = problem.num_constraints
            actual_decl = len(problem.integer_indices())
            actual_vars = problem.num_variables
            if (actual_rows, actual_decl, actual_vars) != (
                expected.rows,
                expected.declarations,
                expected.variables,
            ):
                raise RuntimeError(
                    "problem size mismatch: built "
                    f"({actual_rows} rows, {actual_decl} declarations, {actual_vars} vars), "
                    f"expected ({expected.rows}, {expected.declarations}, {expected.variables})"
                )
            os.makedirs(cfg.output_dir, exist_ok=True)
            path = output or os.path.join(cfg.output_dir, "problem.lp")
            export_lp(problem, path)
            return path, expected, actual_vars

        path, expected, actual_vars = stages.run("export", export)
        print(
            json.dumps(
                {
                    "lp_file": path,
                    "variables": actual_vars,
                    "rows": expected.rows,
                    "constraints": expected.constraints,
                    "budget": dict(zip(AXES, budget.as_tuple())),
                }
            )
        )
        return 0
    except StageFailure as exc:
        return _emit_failure(exc)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="collectcert",
        description="Collective robustness certification for attributed graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", help="run the certification pipeline")
    p_cert.add_argument("config")
    p_cert.add_argument("--mode", choices=["exact", "relaxed"])
    p_cert.add_argument("--seed", type=int)

    p_par = sub.add_parser("pareto", help="compute and persist base-certificate fronts")
    p_par.add_argument("config")
    p_par.add_argument("--seed", type=int)

    p_exp = sub.add_parser("export", help="write the problem as a CPLEX LP file")
    p_exp.add_argument("config")
    p_exp.add_argument(
        "--radius", required=True, help="budget, e.g. x_add=0,x_del=2,a_add=0,a_del=0"
    )
    p_exp.add_argument("--mode", choices=["exact", "relaxed"])
    p_exp.add_argument("--output")
    p_exp.add_argument("--seed", type=int)

    args = parser.parse_args(argv)
    if args.command == "certify":
        return cmd_certify(args.config, mode_override=args.mode, seed_override=args.seed)
    if args.command == "pareto":
        return cmd_pareto(args.config, seed_override=args.seed)
    if args.command == "export":
        return cmd_export(
            args.config,
            args.radius,
            mode_override=args.mode,
            output=args.output,
            seed_override=args.seed,
        )
    parser.error("unknown command")
    return 1


if __name__ == "__main__":
    sys.exit(main())
