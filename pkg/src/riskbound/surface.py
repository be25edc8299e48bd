"""Online fitting of an upper-bounding disturbance-norm surface.

The fitter folds a stream of state-indexed disturbance-norm records into
batches of N consecutive records.  Each completed batch contributes one GP
training pair: the batch's last model state, and the batch's largest norm
sample plus the discrepancy margin beta.  Grouping N single samples makes
the max exceed the Value-at-Risk of at least one sampled variable with
probability 1 - (1-eps)^N, and the bounded-discrepancy margin beta extends
that exceedance to every state in the batch; the fitted GP upper bound
mu(x) + B*sigma(x) then upper-bounds the Surface-at-Risk with joint
probability (1 - (1-eps)^N)^iota after iota batches.

The bounded-discrepancy assumption itself (states within alpha have surface
values within beta) is verified post hoc from data: per-batch maxima of
pairwise state distance (alpha_D) and pairwise norm gap (beta_D) are
recorded and compared against alpha, beta.  Violations warn by default and
abort only when configured to.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence, Union

import numpy as np

from . import gpr
from .gpr import ConfidenceParams, GpPosterior, SquaredExponentialKernel
from .risk import EpsLike, _as_eps, exceedance_probability
from .sysmodel import DisturbanceRecord

__all__ = [
    "AssumptionViolation",
    "DiscrepancyParams",
    "Batch",
    "BatchDiagnostics",
    "SarModel",
    "CoverageReport",
    "batch_target",
    "verify_assumption",
    "OnlineSurfaceFitter",
    "fit_online",
    "evaluate_surface",
    "evaluate_surface_many",
    "coverage_report",
    "sar_model_to_dict",
    "sar_model_from_dict",
    "save_sar_model",
    "load_sar_model",
]

TargetState = Literal["last", "argmax"]
ViolationPolicy = Literal["warn", "abort"]


class AssumptionViolation(RuntimeError):
    """A batch exceeded the configured alpha/beta bounds under policy=abort."""


@dataclass(frozen=True)
class DiscrepancyParams:
    """Bounded-discrepancy parameters: states within ``alpha`` are assumed
    to have surface values within ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")


@dataclass(frozen=True)
class Batch:
    """Exactly N records with consecutive model time indices."""

    records: tuple[DisturbanceRecord, ...]
    batch_index: int

    def __post_init__(self) -> None:
        if not self.records:
            raise ValueError("batch must contain at least one record")
        indices = [r.model_time_index for r in self.records]
        if indices != list(range(indices[0], indices[0] + len(indices))):
            raise ValueError("batch records must have consecutive model time indices")

    @property
    def states(self) -> np.ndarray:
        return np.stack([r.model_state for r in self.records])

    @property
    def norms(self) -> np.ndarray:
        return np.array([r.norm_sample for r in self.records])


@dataclass(frozen=True)
class BatchDiagnostics:
    """Data-level check of the bounded-discrepancy assumption on one batch."""

    batch_index: int
    alpha_d: float
    beta_d: float
    alpha_ok: bool
    beta_ok: bool

    def to_dict(self) -> dict:
        return {
            "batch_index": self.batch_index,
            "alpha_d": self.alpha_d,
            "beta_d": self.beta_d,
            "alpha_ok": self.alpha_ok,
            "beta_ok": self.beta_ok,
        }


def batch_target(
    batch: Batch, params: DiscrepancyParams, target_state: TargetState = "last"
) -> tuple[np.ndarray, float]:
    """GP training pair for one batch: (state, max norm sample + beta).

    The state is the batch's last model state by default; ``argmax``
    attributes the target to the state where the max was sampled instead
    (earliest index on ties), for comparison studies.
    """
    norms = batch.norms
    target = float(norms.max() + params.beta)
    if target_state == "last":
        state = batch.records[-1].model_state
    elif target_state == "argmax":
        state = batch.records[int(norms.argmax())].model_state
    else:
        raise ValueError(f"unknown target_state: {target_state!r}")
    return state.copy(), target


def verify_assumption(batch: Batch, params: DiscrepancyParams) -> BatchDiagnostics:
    """Exact pairwise maxima over the batch, flagged against alpha/beta.

    Squared distances accumulate axis by axis with elementwise adds so the
    result is bit-identical to a scalar pairwise scan (no reassociation).
    """
    states = batch.states
    n = states.shape[0]
    d2 = np.zeros((n, n))
    for axis in range(states.shape[1]):
        dk = states[:, None, axis] - states[None, :, axis]
        d2 += dk * dk
    alpha_d = float(np.sqrt(d2).max())
    norms = batch.norms
    beta_d = float(norms.max() - norms.min())
    return BatchDiagnostics(
        batch_index=batch.batch_index,
        alpha_d=alpha_d,
        beta_d=beta_d,
        alpha_ok=alpha_d <= params.alpha,
        beta_ok=beta_d <= params.beta,
    )


@dataclass(frozen=True, eq=False)
class SarModel:
    """Fitted upper-bound surface: a GP over model states plus the RKHS
    bound; evaluation is mu(x) + B*sigma(x), clamped at zero.

    ``joint_confidence`` is (1 - (1-eps)^N)^iota, the probability with which
    every GP target upper-bounds its batch's Values-at-Risk.
    """

    gp: GpPosterior
    confidence: ConfidenceParams
    eps: float
    n_per_batch: int
    diagnostics: tuple[BatchDiagnostics, ...] = ()

    @property
    def iterations(self) -> int:
        return self.gp.count

    @property
    def joint_confidence(self) -> float:
        return exceedance_probability(self.eps, self.n_per_batch) ** self.iterations

    def evaluate(self, x_hat: np.ndarray) -> float:
        return evaluate_surface(self, x_hat)


def evaluate_surface(model: SarModel, x_hat: np.ndarray) -> float:
    """Upper-bound surface value at a model state; never negative."""
    params = replace(model.confidence, noise_scale=0.0)
    return max(0.0, gpr.upper_bound(model.gp, params, x_hat))


def evaluate_surface_many(model: SarModel, queries: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate_surface` over rows of ``queries``."""
    params = replace(model.confidence, noise_scale=0.0)
    return np.maximum(0.0, gpr.upper_bound_many(model.gp, params, queries))


class OnlineSurfaceFitter:
    """Single-consumer fold over a disturbance-record stream.

    Pushes accumulate records; every ``n_per_batch``-th record completes a
    batch, appends one GP pair, refits the posterior (full refit, with the
    regularizer tracking the growing dataset) and records diagnostics.
    Trailing incomplete batches are never used: padding would bias the max
    statistic.  ``model`` returns the latest immutable snapshot.
    """

    def __init__(
        self,
        params: DiscrepancyParams,
        eps: EpsLike,
        n_per_batch: int,
        kernel: SquaredExponentialKernel,
        confidence: ConfidenceParams,
        policy: ViolationPolicy = "warn",
        target_state: TargetState = "last",
    ) -> None:
        if n_per_batch < 1:
            raise ValueError(f"n_per_batch must be >= 1, got {n_per_batch}")
        if policy not in ("warn", "abort"):
            raise ValueError(f"unknown policy: {policy!r}")
        self.params = params
        self.eps = _as_eps(eps)
        self.n_per_batch = int(n_per_batch)
        self.kernel = kernel
        self.confidence = confidence
        self.policy = policy
        self.target_state: TargetState = target_state
        self._pending: list[DisturbanceRecord] = []
        self._states: list[np.ndarray] = []
        self._targets: list[float] = []
        self._diagnostics: list[BatchDiagnostics] = []
        self._model = SarModel(
            gp=gpr.fit(np.zeros((0, 0)), np.zeros(0), kernel),
            confidence=confidence,
            eps=self.eps,
            n_per_batch=self.n_per_batch,
        )

    @property
    def model(self) -> SarModel:
        return self._model

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def push(self, record: DisturbanceRecord) -> SarModel | None:
        """Consume one record; returns the new snapshot when a batch
        completes, else None."""
        self._pending.append(record)
        if len(self._pending) < self.n_per_batch:
            return None
        batch = Batch(tuple(self._pending), batch_index=len(self._targets))
        self._pending = []
        return self._complete_batch(batch)

    def _complete_batch(self, batch: Batch) -> SarModel:
        diag = verify_assumption(batch, self.params)
        self._diagnostics.append(diag)
        if not (diag.alpha_ok and diag.beta_ok):
            message = (
                f"batch {diag.batch_index}: bounded-discrepancy check failed "
                f"(alpha_D={diag.alpha_d:.4g} vs alpha={self.params.alpha:.4g}, "
                f"beta_D={diag.beta_d:.4g} vs beta={self.params.beta:.4g})"
            )
            if self.policy == "abort":
                raise AssumptionViolation(message)
            warnings.warn(message, stacklevel=3)
        state, target = batch_target(batch, self.params, self.target_state)
        self._states.append(state)
        self._targets.append(target)
        gp = gpr.fit(np.stack(self._states), np.array(self._targets), self.kernel)
        self._model = SarModel(
            gp=gp,
            confidence=self.confidence,
            eps=self.eps,
            n_per_batch=self.n_per_batch,
            diagnostics=tuple(self._diagnostics),
        )
        return self._model

    def extend(self, records: Iterable[DisturbanceRecord]) -> SarModel:
        for record in records:
            self.push(record)
        return self._model


def fit_online(
    records: Iterable[DisturbanceRecord],
    params: DiscrepancyParams,
    eps: EpsLike,
    n_per_batch: int,
    kernel: SquaredExponentialKernel,
    confidence: ConfidenceParams,
    policy: ViolationPolicy = "warn",
    target_state: TargetState = "last",
) -> SarModel:
    """Fold a full record stream and return the final model snapshot."""
    fitter = OnlineSurfaceFitter(
        params, eps, n_per_batch, kernel, confidence, policy, target_state
    )
    return fitter.extend(records)


@dataclass(frozen=True)
class CoverageReport:
    """Fraction of grid points where the surface upper-bounds the ground
    truth, plus the mean slack (surface minus truth) as a tightness metric."""

    coverage: float
    mean_slack: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "mean_slack": self.mean_slack,
            "n_points": self.n_points,
        }


def coverage_report(
    model: SarModel, ground_truth: Mapping[tuple, float]
) -> CoverageReport:
    """Compare the fitted surface against per-index ground-truth values."""
    if not ground_truth:
        raise ValueError("ground truth grid must be non-empty")
    points = np.array([list(k) for k in ground_truth.keys()], dtype=float)
    truth = np.array(list(ground_truth.values()), dtype=float)
    surface = evaluate_surface_many(model, points)
    covered = surface >= truth
    return CoverageReport(
        coverage=float(covered.mean()),
        mean_slack=float((surface - truth).mean()),
        n_points=int(truth.size),
    )


SAR_SCHEMA_VERSION = 1


def sar_model_to_dict(model: SarModel) -> dict:
    return {
        "schema_version": SAR_SCHEMA_VERSION,
        "kind": "sar_model",
        "eps": model.eps,
        "n_per_batch": model.n_per_batch,
        "iterations": model.iterations,
        "joint_confidence": model.joint_confidence,
        "confidence": {
            "rkhs_bound": model.confidence.rkhs_bound,
            "noise_scale": model.confidence.noise_scale,
            "conf_delta": model.confidence.conf_delta,
            "sigma_mode": model.confidence.sigma_mode,
        },
        "gp": gpr.posterior_to_dict(model.gp),
        "diagnostics": [d.to_dict() for d in model.diagnostics],
    }


def sar_model_from_dict(payload: dict) -> SarModel:
    if payload.get("kind") != "sar_model":
        raise ValueError(f"not a sar_model payload: kind={payload.get('kind')!r}")
    conf = payload["confidence"]
    return SarModel(
        gp=gpr.posterior_from_dict(payload["gp"]),
        confidence=ConfidenceParams(
            rkhs_bound=float(conf["rkhs_bound"]),
            noise_scale=float(conf["noise_scale"]),
            conf_delta=float(conf["conf_delta"]),
            sigma_mode=conf.get("sigma_mode", "variance"),
        ),
        eps=float(payload["eps"]),
        n_per_batch=int(payload["n_per_batch"]),
        diagnostics=tuple(
            BatchDiagnostics(
                batch_index=int(d["batch_index"]),
                alpha_d=float(d["alpha_d"]),
                beta_d=float(d["beta_d"]),
                alpha_ok=bool(d["alpha_ok"]),
                beta_ok=bool(d["beta_ok"]),
            )
            for d in payload.get("diagnostics", [])
        ),
    )


def save_sar_model(model: SarModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(sar_model_to_dict(model), indent=2, sort_keys=True))


def load_sar_model(path: Union[str, Path]) -> SarModel:
    return sar_model_from_dict(json.loads(Path(path).read_text()))
