"""
RicciFlow - prescribed-curvature Ricci flow on edge weights.

    d w_i / dt = -(kappa_i(w) - kappa*_i) w_i

integrated in r = ln(w) so weights stay positive by construction. A run is
sequenced by RicciFlowStateMachine (ready -> integrating -> converged |
horizon_reached | failed), which validates inputs and drives the owned
FlowIntegrator. Running out of time without converging is a normal outcome,
not an error.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from statemachine import State, StateMachine

from ConfigLoader import config
from Curvature import CurvatureMethod, CurvatureVector, GirthError, curvature_vector
from FlowIntegrator import FlowForm, FlowIntegrator, StepRejected
from Graph import Graph, GraphParseError, GraphValidationError, WeightVector

logger = logging.getLogger(__name__)

# Norms at or below this are excluded from the rate fit
RATE_FIT_FLOOR = 1e-12


class FlowException(Exception):
    pass


class StepFailure(FlowException):
    """Step halving hit the minimum step; carries the trajectory up to the failure."""

    def __init__(self, message: str, trajectory: "FlowTrajectory"):
        self.trajectory = trajectory
        super().__init__(message)


class ConsistencyError(FlowException):
    """Target violates the total-curvature constraint sum(kappa*) = 2(|V| - |E|)."""
    pass


class OptionsError(FlowException, ValueError):
    """Integrator option out of range."""
    pass


class TargetKind(Enum):
    ZERO = "zero"
    AVERAGE = "average"
    CUSTOM = "custom"


class TerminationReason(Enum):
    CONVERGED = "converged"
    HORIZON_REACHED = "horizon_reached"
    FAILED = "failed"

    @property
    def desc(self):
        return {
            TerminationReason.CONVERGED: "Residual fell below tolerance",
            TerminationReason.HORIZON_REACHED: "Reached t_max without meeting tolerance",
            TerminationReason.FAILED: "Step halving reached the minimum step",
        }[self]


def average_curvature_exact(graph: Graph) -> Fraction:
    if graph.girth < config.get_closed_form_min_girth():
        raise GirthError(graph.girth, config.get_closed_form_min_girth())
    return 2 * (Fraction(graph.vertex_count, graph.edge_count) - 1)


def average_curvature(graph: Graph) -> float:
    """kappa_bar = 2(|V|/|E| - 1), the only admissible constant target when girth >= 6."""
    return float(average_curvature_exact(graph))


def total_curvature(graph: Graph) -> int:
    return 2 * (graph.vertex_count - graph.edge_count)


@dataclass(frozen=True, eq=False)
class PrescribedCurvature:
    values: np.ndarray
    kind: TargetKind

    def __post_init__(self) -> None:
        array = np.asarray(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(array)):
            raise ValueError("Target curvature must be finite.")
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    @classmethod
    def zero(cls, graph: Graph) -> "PrescribedCurvature":
        return cls(np.zeros(graph.edge_count), TargetKind.ZERO)

    @classmethod
    def average(cls, graph: Graph) -> "PrescribedCurvature":
        return cls(np.full(graph.edge_count, average_curvature(graph)), TargetKind.AVERAGE)

    @classmethod
    def custom(cls, graph: Graph, values: Sequence[float]) -> "PrescribedCurvature":
        array = np.asarray(values, dtype=float).reshape(-1)
        if array.size != graph.edge_count:
            raise GraphValidationError(f"Target has {array.size} entries, graph has {graph.edge_count} edges.")
        return cls(array, TargetKind.CUSTOM)

    @classmethod
    def from_curvature(cls, kappa: CurvatureVector) -> "PrescribedCurvature":
        return cls(kappa.values.copy(), TargetKind.CUSTOM)

    @classmethod
    def from_file(cls, graph: Graph, path: Union[str, Path]) -> "PrescribedCurvature":
        """Read `edge_index value` lines; every edge must appear exactly once."""
        values: Dict[int, float] = {}
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise GraphParseError(f"Could not read target file: {e}", source=str(path))
        for line_number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise GraphParseError("Expected 'edge_index value'", line_number=line_number, source=str(path))
            try:
                index, value = int(tokens[0]), float(tokens[1])
            except ValueError:
                raise GraphParseError(f"Could not parse '{line}'", line_number=line_number, source=str(path))
            if not math.isfinite(value):
                raise GraphParseError(f"Target value {tokens[1]} is not finite", line_number=line_number, source=str(path))
            if not 0 <= index < graph.edge_count:
                raise GraphParseError(f"Edge index {index} out of range", line_number=line_number, source=str(path))
            if index in values:
                raise GraphParseError(f"Edge index {index} given twice", line_number=line_number, source=str(path))
            values[index] = value
        missing = [i for i in range(graph.edge_count) if i not in values]
        if missing:
            raise GraphValidationError(f"{path}: no target for edges {missing}")
        return cls.custom(graph, [values[i] for i in range(graph.edge_count)])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def consistency_gap(self, graph: Graph) -> float:
        return float(self.values.sum()) - total_curvature(graph)

    def is_consistent(self, graph: Graph, tol: Optional[float] = None) -> bool:
        tol = config.get_consistency_tolerance() if tol is None else tol
        return abs(self.consistency_gap(graph)) <= tol


@dataclass(frozen=True)
class IntegratorOptions:
    dt: float = 1e-2
    t_max: float = 30.0
    tol: float = 1e-8
    sample_every: int = 10
    max_step_change: float = 0.5
    min_dt: float = 1e-12
    early_stop: bool = True

    def __post_init__(self) -> None:
        for name in ("dt", "t_max", "max_step_change", "min_dt"):
            if not getattr(self, name) > 0:
                raise OptionsError(f"Integrator option {name} must be positive, got {getattr(self, name)}")
        if self.tol < 0:
            raise OptionsError(f"Integrator option tol must be non-negative, got {self.tol}")
        if self.sample_every < 1:
            raise OptionsError(f"Integrator option sample_every must be >= 1, got {self.sample_every}")

    @classmethod
    def from_config(cls, **overrides) -> "IntegratorOptions":
        values = config.get_flow_defaults()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass(frozen=True, eq=False)
class FlowSample:
    t: float
    r: np.ndarray
    kappa: CurvatureVector
    lyapunov: float
    potential_drop: float

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.r)


@dataclass(eq=False)
class FlowTrajectory:
    graph: Graph
    target: PrescribedCurvature
    samples: List[FlowSample] = field(default_factory=list)
    options: Optional[IntegratorOptions] = None
    form: FlowForm = FlowForm.PRESCRIBED
    termination: Optional[TerminationReason] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def final(self) -> FlowSample:
        return self.samples[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([sample.t for sample in self.samples])

    def weight_matrix(self) -> np.ndarray:
        """Samples x edges."""
        return np.array([sample.weights for sample in self.samples])

    def curvature_matrix(self) -> np.ndarray:
        return np.array([sample.kappa.values for sample in self.samples])

    def lyapunov_series(self) -> np.ndarray:
        return np.array([sample.lyapunov for sample in self.samples])

    def residuals(self) -> np.ndarray:
        """Sup-norm residual against the target, per sample."""
        return np.max(np.abs(self.curvature_matrix() - self.target.values), axis=1)

    def describe(self) -> Dict[str, object]:
        return {
            "form": self.form.value,
            "termination": self.termination.value if self.termination else None,
            "samples": len(self.samples),
            "t_final": self.final.t if self.samples else None,
            "options": asdict(self.options) if self.options else None,
            **self.metadata,
        }


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    converged: bool
    residual: float
    limit_weights: Optional[WeightVector] = None
    limit_curvature: Optional[CurvatureVector] = None
    rate: Optional[float] = None
    r_squared: Optional[float] = None
    termination: Optional[TerminationReason] = None

    def as_dict(self) -> Dict[str, object]:
        return {
            "converged": self.converged,
            "residual": self.residual,
            "rate": self.rate,
            "r_squared": self.r_squared,
            "termination": self.termination.value if self.termination else None,
            "limit_weights": self.limit_weights.values.tolist() if self.limit_weights else None,
            "limit_curvature": self.limit_curvature.values.tolist() if self.limit_curvature else None,
        }


# ----------------------------------------------------------------------
# Pointwise quantities
# ----------------------------------------------------------------------

def flow_rhs(
    graph: Graph, r: np.ndarray, target: PrescribedCurvature, method: CurvatureMethod = CurvatureMethod.AUTO
) -> np.ndarray:
    """-(kappa(e^r) - kappa*)"""
    kappa = curvature_vector(graph, WeightVector.from_log(r), method)
    return -(kappa.values - target.values)


def lyapunov(kappa: CurvatureVector, target: PrescribedCurvature) -> float:
    """g = sum (kappa_i - kappa*_i)^2"""
    if len(kappa) != target.values.size:
        raise ValueError(f"Curvature has {len(kappa)} entries, target has {target.values.size}.")
    return float(np.sum((kappa.values - target.values) ** 2))


def flow_potential(graph: Graph, r: np.ndarray, target: PrescribedCurvature) -> float:
    """
    Phi(r) = 2 sum_x ln m(x) - 2 sum_i r_i - sum_i kappa*_i r_i.
    Its gradient is kappa - kappa* when girth >= 6.
    """
    r = np.asarray(r, dtype=float)
    masses = WeightVector.from_log(r).masses(graph)
    return float(2.0 * np.log(masses).sum() - 2.0 * r.sum() - target.values @ r)


# ----------------------------------------------------------------------
# Run sequencing
# ----------------------------------------------------------------------

class RicciFlowStateMachine(StateMachine):
    """
    Sequences one flow run. Validation happens before entering `integrating`;
    the RK4 work is delegated to the owned FlowIntegrator.
    """

    ready = State("Ready", initial=True)
    integrating = State("Integrating")
    converged = State("Converged", final=True)
    horizon_reached = State("Horizon Reached", final=True)
    failed = State("Failed", final=True)

    begin = ready.to(integrating)
    finish_converged = integrating.to(converged)
    finish_horizon = integrating.to(horizon_reached)
    abort = integrating.to(failed)

    def __init__(
        self,
        graph: Graph,
        initial_weights: WeightVector,
        target: PrescribedCurvature,
        options: Optional[IntegratorOptions] = None,
        *,
        form: FlowForm = FlowForm.PRESCRIBED,
        method: CurvatureMethod = CurvatureMethod.AUTO,
    ) -> None:
        initial_weights.check_against(graph)
        if target.values.size != graph.edge_count:
            raise GraphValidationError(f"Target has {target.values.size} entries, graph has {graph.edge_count} edges.")

        self.graph = graph
        self.initial_weights = initial_weights
        self.target = target
        self.options = options if options is not None else IntegratorOptions.from_config()
        self.form = form
        self.method = method
        self._closed_form = graph.girth >= config.get_closed_form_min_girth()
        self._executor = FlowIntegrator(
            graph,
            target.values,
            form=form,
            method=method,
            max_step_change=self.options.max_step_change,
            min_dt=self.options.min_dt,
        )
        self.trajectory = FlowTrajectory(graph=graph, target=target, options=self.options, form=form)
        super().__init__()

    def on_enter_integrating(self) -> None:
        if self._closed_form and self.form == FlowForm.PRESCRIBED and not self.target.is_consistent(self.graph):
            logger.warning(
                "Target total %.6g differs from 2(|V|-|E|) = %d; sum(ln w) will drift and the flow cannot converge.",
                float(self.target.values.sum()),
                total_curvature(self.graph),
            )
        logger.info(
            "Flow start: |V|=%d |E|=%d target=%s form=%s dt=%g t_max=%g",
            self.graph.vertex_count,
            self.graph.edge_count,
            self.target.kind.value,
            self.form.value,
            self.options.dt,
            self.options.t_max,
        )

    def _record(self, t: float, r: np.ndarray, kappa: CurvatureVector, drop: float) -> None:
        self.trajectory.samples.append(
            FlowSample(t=t, r=r.copy(), kappa=kappa, lyapunov=lyapunov(kappa, self.target), potential_drop=drop)
        )

    def _potential_drop(self, r0: np.ndarray, r: np.ndarray, accumulated: float) -> float:
        if self._closed_form and self.form == FlowForm.PRESCRIBED:
            return flow_potential(self.graph, r0, self.target) - flow_potential(self.graph, r, self.target)
        return accumulated

    def run(self) -> FlowTrajectory:
        self.begin()
        opts = self.options
        r0 = self.initial_weights.log()
        r = r0.copy()
        steps = int(math.ceil(opts.t_max / opts.dt - 1e-9))
        watch_residual = opts.early_stop and self.form == FlowForm.PRESCRIBED
        accumulated = 0.0
        t = 0.0

        for step in range(steps + 1):
            start = self._executor.rates(r)
            kappa = start[1]
            residual = float(np.max(np.abs(kappa.values - self.target.values)))
            drop = self._potential_drop(r0, r, accumulated)

            if watch_residual and residual <= opts.tol:
                self._record(t, r, kappa, drop)
                return self._finish(TerminationReason.CONVERGED, residual)
            if step == steps:
                self._record(t, r, kappa, drop)
                reason = TerminationReason.CONVERGED if residual <= opts.tol else TerminationReason.HORIZON_REACHED
                return self._finish(reason, residual)
            if step % opts.sample_every == 0:
                self._record(t, r, kappa, drop)

            t_next = min((step + 1) * opts.dt, opts.t_max)
            try:
                r, decrease = self._executor.advance(r, t_next - t, start)
            except StepRejected as e:
                self.abort()
                self.trajectory.termination = TerminationReason.FAILED
                self.trajectory.metadata["failure_time"] = t
                logger.error("Flow failed at t=%.6g: %s", t, e)
                raise StepFailure(f"Integration failed at t={t:.6g}: {e}", self.trajectory) from e
            accumulated += decrease
            t = t_next

        raise AssertionError("unreachable")

    def _finish(self, reason: TerminationReason, residual: float) -> FlowTrajectory:
        if reason == TerminationReason.CONVERGED:
            self.finish_converged()
        else:
            self.finish_horizon()
        self.trajectory.termination = reason
        self.trajectory.metadata.update(
            {
                "final_residual": residual,
                "halvings": self._executor.halvings,
                "curvature_evaluations": self._executor.evaluations,
            }
        )
        logger.info("Flow %s at t=%.6g, residual %.3e", reason.value, self.trajectory.final.t, residual)
        return self.trajectory


def integrate(
    graph: Graph,
    initial_weights: WeightVector,
    target: PrescribedCurvature,
    options: Optional[IntegratorOptions] = None,
    *,
    form: FlowForm = FlowForm.PRESCRIBED,
    method: CurvatureMethod = CurvatureMethod.AUTO,
) -> FlowTrajectory:
    """Run the flow from initial_weights; raises StepFailure with the partial trajectory."""
    machine = RicciFlowStateMachine(graph, initial_weights, target, options, form=form, method=method)
    return machine.run()


# ----------------------------------------------------------------------
# Gauge transformations
# ----------------------------------------------------------------------

def _regauge(traj: FlowTrajectory, log_shift, form: FlowForm) -> FlowTrajectory:
    samples = []
    for sample in traj.samples:
        r = log_shift(sample)
        kappa = curvature_vector(traj.graph, WeightVector.from_log(r))
        samples.append(replace(sample, r=r, kappa=kappa))
    return FlowTrajectory(
        graph=traj.graph,
        target=traj.target,
        samples=samples,
        options=traj.options,
        form=form,
        termination=traj.termination,
        metadata=dict(traj.metadata, gauge_source=traj.form.value),
    )


def gauge_to_unnormalized(traj: FlowTrajectory, target: PrescribedCurvature) -> FlowTrajectory:
    """
    w~_i(t) = exp(-t kappa*_i) w_i(t) solves d w~/dt = -kappa w~. Exact when
    the target is constant, which is the case the average target covers.
    """
    if not target.is_constant:
        logger.warning("Gauge to the un-normalized flow is only exact for constant targets.")
    return _regauge(traj, lambda sample: sample.r - sample.t * target.values, FlowForm.UNNORMALIZED)


def gauge_to_normalized(traj: FlowTrajectory, target: PrescribedCurvature) -> FlowTrajectory:
    """Un-normalized gauge followed by rescaling to unit total weight."""
    if not target.is_constant:
        logger.warning("Gauge to the normalized flow is only exact for constant targets.")

    def shift(sample: FlowSample) -> np.ndarray:
        r = sample.r - sample.t * target.values
        return r - np.log(np.exp(r).sum())

    return _regauge(traj, shift, FlowForm.NORMALIZED)


# ----------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------

def convergence_report(traj: FlowTrajectory, target: PrescribedCurvature, tol: Optional[float] = None) -> ConvergenceReport:
    """
    converged iff the final sup-norm residual is within tol. The rate is the
    least-squares slope of ln ||kappa - kappa*||_2 against t over the final
    half of the samples.
    """
    if not traj.samples:
        raise ValueError("Empty trajectory.")
    tol = config.get_flow_defaults()["tol"] if tol is None else tol

    kappas = traj.curvature_matrix()
    residual = float(np.max(np.abs(kappas[-1] - target.values)))
    converged = residual <= tol

    window = slice(len(traj.samples) // 2, None)
    times = traj.times[window]
    norms = np.linalg.norm(kappas[window] - target.values, axis=1)
    keep = norms > RATE_FIT_FLOOR
    rate = r_squared = None
    if np.count_nonzero(keep) >= 2 and np.ptp(times[keep]) > 0:
        logs = np.log(norms[keep])
        slope, intercept = np.polyfit(times[keep], logs, 1)
        fitted = slope * times[keep] + intercept
        total = float(np.sum((logs - logs.mean()) ** 2))
        r_squared = 1.0 - float(np.sum((logs - fitted) ** 2)) / total if total > 0 else 1.0
        rate = float(slope)

    final = traj.final
    return ConvergenceReport(
        converged=converged,
        residual=residual,
        limit_weights=WeightVector(final.weights) if converged else None,
        limit_curvature=final.kappa if converged else None,
        rate=rate,
        r_squared=r_squared,
        termination=traj.termination,
    )


def stratify(weights: Union[WeightVector, np.ndarray], threshold: float) -> List[int]:
    """Edge indices whose weight exceeds threshold (bottleneck candidates)."""
    values = weights.values if isinstance(weights, WeightVector) else np.asarray(weights)
    return [int(i) for i in np.flatnonzero(values > threshold)]


@dataclass(frozen=True)
class WeightExcursion:
    edge: int
    initial: float
    peak: float
    peak_time: float
    final: float

    @property
    def rose_then_fell(self) -> bool:
        return self.peak > self.initial and self.final < self.peak


def weight_excursion(traj: FlowTrajectory, edge: int) -> WeightExcursion:
    series = traj.weight_matrix()[:, edge]
    peak_index = int(np.argmax(series))
    return WeightExcursion(
        edge=edge,
        initial=float(series[0]),
        peak=float(series[peak_index]),
        peak_time=float(traj.times[peak_index]),
        final=float(series[-1]),
    )


def normalized_limit(traj: FlowTrajectory) -> np.ndarray:
    """Final weights rescaled to sum 1."""
    weights = traj.final.weights
    return weights / weights.sum()
