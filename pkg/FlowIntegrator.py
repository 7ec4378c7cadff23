"""
FlowIntegrator - RK4 stepping of the Ricci flow in log-weight coordinates.

This module holds the numerical stepping only. Run validation, sampling and
termination bookkeeping live in RicciFlowStateMachine, which owns one
integrator per run. Other code should go through RicciFlow.integrate.
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from Curvature import CurvatureMethod, CurvatureVector, curvature_vector
from Graph import Graph, WeightVector

logger = logging.getLogger(__name__)


class FlowForm(Enum):
    """The three gauge-equivalent forms of the flow."""
    PRESCRIBED = "prescribed"      # dr/dt = -(kappa - kappa*)
    UNNORMALIZED = "unnormalized"  # dr/dt = -kappa
    NORMALIZED = "normalized"      # dr/dt = -kappa + <kappa, w> / sum(w)


class StepRejected(Exception):
    """Raised when halving cannot bring a step under the change limit."""

    def __init__(self, step: float):
        self.step = step
        super().__init__(f"Step size fell to {step:.3e} without meeting the change limit.")


class FlowIntegrator:
    """
    Classic fourth-order Runge-Kutta on r = ln(w).

    A nominal step of length dt is covered by sub-steps: a sub-step whose
    largest |delta r_i| exceeds max_step_change is halved and retried, and
    the step is abandoned once the sub-step drops below min_dt.
    """

    def __init__(
        self,
        graph: Graph,
        target_values: np.ndarray,
        form: FlowForm = FlowForm.PRESCRIBED,
        method: CurvatureMethod = CurvatureMethod.AUTO,
        max_step_change: float = 0.5,
        min_dt: float = 1e-12,
    ):
        self._graph = graph
        self._target = np.asarray(target_values, dtype=float)
        self._form = form
        self._method = method
        self._max_step_change = max_step_change
        self._min_dt = min_dt
        self.halvings = 0
        self.evaluations = 0

    @property
    def form(self) -> FlowForm:
        return self._form

    def curvature(self, r: np.ndarray) -> CurvatureVector:
        self.evaluations += 1
        return curvature_vector(self._graph, WeightVector.from_log(r), self._method)

    def rates(self, r: np.ndarray, kappa: Optional[CurvatureVector] = None) -> Tuple[np.ndarray, CurvatureVector]:
        """dr/dt at r, together with the curvature it was built from."""
        if kappa is None:
            kappa = self.curvature(r)
        values = kappa.values
        if self._form == FlowForm.PRESCRIBED:
            drdt = -(values - self._target)
        elif self._form == FlowForm.UNNORMALIZED:
            drdt = -values
        else:
            weights = np.exp(r)
            drdt = -values + float(values @ weights) / float(weights.sum())
        return drdt, kappa

    def _dissipation(self, drdt: np.ndarray, kappa: CurvatureVector) -> float:
        # Rate of decrease of the flow potential along the trajectory
        reference = self._target if self._form == FlowForm.PRESCRIBED else 0.0
        return float((kappa.values - reference) @ (-drdt))

    def rk4_step(
        self, r: np.ndarray, h: float, start: Optional[Tuple[np.ndarray, CurvatureVector]] = None
    ) -> Tuple[np.ndarray, float]:
        """One RK4 step of size h. Returns (r_new, potential decrease over the step)."""
        k1, kappa1 = start if start is not None else self.rates(r)
        k2, kappa2 = self.rates(r + 0.5 * h * k1)
        k3, kappa3 = self.rates(r + 0.5 * h * k2)
        k4, kappa4 = self.rates(r + h * k3)
        r_new = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        decrease = (h / 6.0) * (
            self._dissipation(k1, kappa1)
            + 2.0 * self._dissipation(k2, kappa2)
            + 2.0 * self._dissipation(k3, kappa3)
            + self._dissipation(k4, kappa4)
        )
        return r_new, decrease

    def advance(
        self, r: np.ndarray, dt: float, start: Optional[Tuple[np.ndarray, CurvatureVector]] = None
    ) -> Tuple[np.ndarray, float]:
        """Cover a nominal step of length dt, halving sub-steps as needed."""
        remaining = dt
        h = dt
        decrease = 0.0
        while remaining > 0.0:
            h = min(h, remaining)
            candidate, step_decrease = self.rk4_step(r, h, start)
            if not np.all(np.isfinite(candidate)):
                change = np.inf
            else:
                change = float(np.max(np.abs(candidate - r)))
            if change > self._max_step_change:
                h /= 2.0
                self.halvings += 1
                logger.debug("Step change %.3g exceeds %.3g, halving to %.3e", change, self._max_step_change, h)
                if h < self._min_dt:
                    raise StepRejected(h)
                continue
            r = candidate
            decrease += step_decrease
            remaining -= h
            start = None
            if remaining <= dt * 1e-12:
                break
        return r, decrease
