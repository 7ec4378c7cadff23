#!/usr/bin/env python3
"""
ricci-uniform: curvature, Ricci flow and constant-curvature weights on graphs.

    ricci_uniform.py info       --builtin d6_6
    ricci_uniform.py curvature  --builtin gp_8_3 --verify
    ricci_uniform.py flow       --builtin d6_6 --target average --t-max 30 --stratify 2.0 --csv run.csv --plot run.svg
    ricci_uniform.py uniformize --graph my_graph.txt

Reports are JSON on stdout (or --report FILE); logs go to stderr.
Exit codes: 0 success, 1 input error, 2 numerical failure, 3 density condition fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ConfigLoader import config
from Curvature import (
    CurvatureException,
    CurvatureMethod,
    GirthError,
    curvature_alpha_oracle,
    curvature_lp,
    curvature_vector,
    node_curvature,
)
from Graph import Graph, GraphException, WeightVector, load_weighted_graph
from GraphLibrary import BUILTIN_GRAPHS, build, builtin_names, edge_classes
from LinearProgram import NumericalFailure
from ReportWriter import plot_trajectory, write_report, write_trajectory_csv
from RicciFlow import (
    ConsistencyError,
    IntegratorOptions,
    OptionsError,
    PrescribedCurvature,
    StepFailure,
    average_curvature_exact,
    convergence_report,
    integrate,
    lyapunov,
    weight_excursion,
    normalized_limit,
    stratify,
)
from Uniformization import (
    DivergenceError,
    NotApplicable,
    SizeError,
    check_condition,
    classify_constant_weight,
    solve_constant_weights,
)

logger = logging.getLogger("ricci_uniform")

COMMANDS = ("info", "curvature", "flow", "uniformize")

# Edge-class summary thresholds: decayed below, grown above
DECAY_THRESHOLD = 0.7
GROWTH_THRESHOLD = 1.2


class ExitCode(Enum):
    SUCCESS = 0
    INPUT_ERROR = 1
    NUMERICAL_FAILURE = 2
    CONDITION_FAILURE = 3

    @property
    def desc(self):
        return {
            ExitCode.SUCCESS: "Success",
            ExitCode.INPUT_ERROR: "Invalid input or options",
            ExitCode.NUMERICAL_FAILURE: "Numerical failure",
            ExitCode.CONDITION_FAILURE: "Density condition not satisfied",
        }[self]


@dataclass
class RunConfig:
    command: str
    graph_path: Optional[str] = None
    builtin: Optional[str] = None
    target: str = "average"
    dt: Optional[float] = None
    t_max: Optional[float] = None
    tol: Optional[float] = None
    sample_every: Optional[int] = None
    seed: int = 0
    random_init: bool = False
    report_path: Optional[str] = None
    csv_path: Optional[str] = None
    plot_path: Optional[str] = None
    stratify: Optional[float] = None
    verify: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command '{self.command}'. Choose from {', '.join(COMMANDS)}.")
        if (self.graph_path is None) == (self.builtin is None):
            raise ValueError("Give exactly one of --graph FILE or --builtin NAME.")
        if self.builtin is not None and self.builtin not in BUILTIN_GRAPHS:
            raise ValueError(f"Unknown builtin '{self.builtin}'. Available: {', '.join(builtin_names())}")
        for name in ("dt", "t_max", "stratify"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive, got {value}")
        if self.tol is not None and self.tol < 0:
            raise ValueError(f"--tol must be non-negative, got {self.tol}")
        if self.sample_every is not None and self.sample_every < 1:
            raise ValueError(f"--sample-every must be at least 1, got {self.sample_every}")

    @property
    def name(self) -> str:
        return self.builtin if self.builtin is not None else Path(self.graph_path).stem

    def integrator_options(self) -> IntegratorOptions:
        return IntegratorOptions.from_config(dt=self.dt, t_max=self.t_max, tol=self.tol, sample_every=self.sample_every)


def load_input(cfg: RunConfig) -> Tuple[Graph, WeightVector]:
    """Graph plus initial weights (file weights, unit weights, or seeded random)."""
    if cfg.builtin is not None:
        graph = build(cfg.builtin)
        weights = WeightVector.ones(graph)
    else:
        graph, weights = load_weighted_graph(Path(cfg.graph_path))
    if cfg.random_init:
        low, high = config.get_random_init_range()
        weights = WeightVector.random(graph, np.random.default_rng(cfg.seed), low, high)
    return graph, weights


def resolve_target(cfg: RunConfig, graph: Graph) -> PrescribedCurvature:
    if cfg.target == "zero":
        return PrescribedCurvature.zero(graph)
    if cfg.target == "average":
        return PrescribedCurvature.average(graph)
    return PrescribedCurvature.from_file(graph, cfg.target)


def _graph_summary(cfg: RunConfig, graph: Graph) -> Dict[str, object]:
    return {"graph": cfg.name, "vertices": graph.vertex_count, "edges": graph.edge_count, "girth": graph.girth}


def _edge_rows(graph: Graph, weights: np.ndarray, kappa: np.ndarray) -> List[Dict[str, object]]:
    return [
        {
            "edge": i,
            "u": graph.label(u),
            "v": graph.label(v),
            "weight": float(weights[i]),
            "kappa": float(kappa[i]),
        }
        for i, (u, v) in enumerate(graph.edges)
    ]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_info(cfg: RunConfig) -> Tuple[Dict[str, object], ExitCode]:
    graph, _ = load_input(cfg)
    report = _graph_summary(cfg, graph)
    if graph.girth >= config.get_closed_form_min_girth():
        kappa_bar = average_curvature_exact(graph)
        report["average_curvature"] = float(kappa_bar)
        report["average_curvature_exact"] = str(kappa_bar)
    else:
        report["average_curvature"] = None
    report["classification"] = str(classify_constant_weight(graph))
    report["density_condition"] = check_condition(graph).as_dict(graph)
    return report, ExitCode.SUCCESS


def cmd_curvature(cfg: RunConfig) -> Tuple[Dict[str, object], ExitCode]:
    graph, weights = load_input(cfg)
    kappa = curvature_vector(graph, weights)
    rows = _edge_rows(graph, weights.values, kappa.values)
    for row in rows:
        row["method"] = kappa.method.value

    report = _graph_summary(cfg, graph)
    report.update(
        {
            "method": kappa.method.value,
            "total_curvature": kappa.total,
            "edges_table": rows,
            "node_curvature": node_curvature(graph, kappa).tolist(),
        }
    )

    if cfg.verify:
        deltas = []
        if kappa.method == CurvatureMethod.CLOSED_FORM:
            reference_name = CurvatureMethod.LIPSCHITZ_LP.value
            for i, row in enumerate(rows):
                reference = curvature_lp(graph, weights, i)
                row[reference_name] = reference
                deltas.append(abs(reference - kappa[i]))
        else:
            reference_name = CurvatureMethod.ALPHA_ORACLE.value
            for i, row in enumerate(rows):
                reference = curvature_alpha_oracle(graph, weights, i)
                row[reference_name] = reference
                deltas.append(abs(reference - kappa[i]))
        report["verify"] = {"reference": reference_name, "max_delta": max(deltas)}
        logger.info("Cross-method max |delta| = %.3e against %s", max(deltas), reference_name)
    return report, ExitCode.SUCCESS


def cmd_flow(cfg: RunConfig) -> Tuple[Dict[str, object], ExitCode]:
    graph, weights = load_input(cfg)
    target = resolve_target(cfg, graph)
    options = cfg.integrator_options()

    exit_code = ExitCode.SUCCESS
    try:
        trajectory = integrate(graph, weights, target, options)
    except StepFailure as e:
        logger.error("%s", e)
        trajectory = e.trajectory
        exit_code = ExitCode.NUMERICAL_FAILURE

    report = _graph_summary(cfg, graph)
    report["target"] = {"kind": target.kind.value, "values": target.values.tolist()}
    report["trajectory"] = trajectory.describe()

    if trajectory.samples:
        final = trajectory.final
        convergence = convergence_report(trajectory, target, tol=options.tol)
        report["convergence"] = convergence.as_dict()
        report["final"] = {
            "t": final.t,
            "lyapunov": lyapunov(final.kappa, target),
            "potential_drop": final.potential_drop,
            "edges_table": _edge_rows(graph, final.weights, final.kappa.values),
            "normalized_weights": normalized_limit(trajectory).tolist(),
        }
        if cfg.stratify is not None:
            selected = stratify(final.weights, cfg.stratify)
            report["stratify"] = {
                "threshold": cfg.stratify,
                "edges": selected,
                "labels": [graph.edge_label(i) for i in selected],
            }

        classes = edge_classes(cfg.builtin, graph) if cfg.builtin is not None else {}
        if classes:
            summary = {}
            for name, indices in classes.items():
                values = final.weights[indices]
                summary[name] = {
                    "edges": indices,
                    "min": float(values.min()),
                    "max": float(values.max()),
                    "mean": float(values.mean()),
                    "below_decay": int(np.count_nonzero(values < DECAY_THRESHOLD)),
                    "above_growth": int(np.count_nonzero(values > GROWTH_THRESHOLD)),
                }
                logger.info(
                    "Class %s: %d of %d edges below %.2g, %d above %.2g",
                    name,
                    summary[name]["below_decay"],
                    len(indices),
                    DECAY_THRESHOLD,
                    summary[name]["above_growth"],
                    GROWTH_THRESHOLD,
                )
            report["edge_classes"] = summary
            excursions = {}
            for name, indices in classes.items():
                if len(indices) == 1:
                    excursion = weight_excursion(trajectory, indices[0])
                    excursions[name] = {
                        "initial": excursion.initial,
                        "peak": excursion.peak,
                        "peak_time": excursion.peak_time,
                        "final": excursion.final,
                        "rose_then_fell": excursion.rose_then_fell,
                    }
                    logger.info(
                        "Class %s: weight %.4g -> peak %.4g at t=%.3g -> %.4g (rose then fell: %s)",
                        name,
                        excursion.initial,
                        excursion.peak,
                        excursion.peak_time,
                        excursion.final,
                        excursion.rose_then_fell,
                    )
            report["monotonicity"] = excursions

        if cfg.csv_path:
            write_trajectory_csv(trajectory, cfg.csv_path)
        if cfg.plot_path:
            kappa_bar = float(target.values[0]) if target.is_constant else None
            plot_trajectory(trajectory, cfg.plot_path, kappa_bar=kappa_bar, edge_classes=classes or None, title=cfg.name)
    return report, exit_code


def cmd_uniformize(cfg: RunConfig) -> Tuple[Dict[str, object], ExitCode]:
    graph, _ = load_input(cfg)
    report = _graph_summary(cfg, graph)
    certificate = check_condition(graph)
    report["density_condition"] = certificate.as_dict(graph)
    if not certificate.satisfied:
        logger.warning("Density condition fails; no constant-curvature weights exist. Solve skipped.")
        return report, ExitCode.CONDITION_FAILURE

    result = solve_constant_weights(graph)
    report["solution"] = result.as_dict(graph)
    report["solution"]["normalized_weights"] = (result.weights.values / result.weights.values.sum()).tolist()
    report["solution"]["edges_table"] = _edge_rows(graph, result.weights.values, result.curvature.values)
    return report, ExitCode.SUCCESS


HANDLERS = {
    "info": cmd_info,
    "curvature": cmd_curvature,
    "flow": cmd_flow,
    "uniformize": cmd_uniformize,
}

INPUT_ERRORS = (GraphException, OSError, OptionsError, ConsistencyError, NotApplicable, SizeError, GirthError)
NUMERICAL_ERRORS = (NumericalFailure, CurvatureException, DivergenceError, StepFailure)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ricci-uniform",
        description="Lin-Lu-Yau curvature, prescribed-curvature Ricci flow and constant-curvature weights.",
    )
    parser.add_argument("command", choices=COMMANDS)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--graph", metavar="FILE", help="edge list (u v [w]) or .json graph document")
    source.add_argument("--builtin", metavar="NAME", help=f"named graph: {', '.join(builtin_names())}")
    parser.add_argument("--target", default="average", help="zero | average | FILE of 'edge_index value' lines")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--t-max", dest="t_max", type=float)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--sample-every", dest="sample_every", type=int)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--random-init", dest="random_init", action="store_true")
    parser.add_argument("--plot", dest="plot_path", metavar="FILE.svg")
    parser.add_argument("--csv", dest="csv_path", metavar="FILE.csv")
    parser.add_argument("--report", dest="report_path", metavar="FILE.json")
    parser.add_argument("--stratify", type=float, metavar="THRESHOLD")
    parser.add_argument("--verify", action="store_true", help="add a cross-method delta column")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def run(cfg: RunConfig) -> ExitCode:
    try:
        report, code = HANDLERS[cfg.command](cfg)
    except INPUT_ERRORS as e:
        logger.error("%s: %s", ExitCode.INPUT_ERROR.desc, e)
        return ExitCode.INPUT_ERROR
    except NUMERICAL_ERRORS as e:
        logger.error("%s: %s", ExitCode.NUMERICAL_FAILURE.desc, e)
        return ExitCode.NUMERICAL_FAILURE
    report["exit_code"] = code.value
    write_report(report, cfg.report_path)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; usage errors are input errors here
        return ExitCode.SUCCESS.value if e.code in (0, None) else ExitCode.INPUT_ERROR.value
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="[%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )
    fields = vars(args)
    fields.pop("verbose")
    try:
        cfg = RunConfig(graph_path=fields.pop("graph"), **fields)
    except ValueError as e:
        logger.error("%s: %s", ExitCode.INPUT_ERROR.desc, e)
        return ExitCode.INPUT_ERROR.value
    return run(cfg).value


if __name__ == "__main__":
    sys.exit(main())
