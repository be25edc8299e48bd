"""Waypoint tracking: baseline Lyapunov controller and risk-aware augmentation.

The baseline commands a box-clipped proportional velocity toward the active
waypoint; with gain * dt in (0, 2) the noise-free single-integrator loop
contracts the distance every step.  The augmented controller adds a
feedforward term along the error direction sized by the fitted disturbance
bound: the surface gives only a norm, so worst-case rejection pushes toward
the goal, with the per-step displacement bound converted to a velocity by
1/dt.  The term is disabled inside a small deadband where the unit vector
is ill-conditioned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np

from .surface import SarModel, evaluate_surface
from .sysmodel import (
    MODEL_DT,
    MODEL_INPUT_BOX,
    Box,
    DivergenceError,
    World,
    rng_stream,
)

__all__ = [
    "WaypointCourse",
    "ControllerConfig",
    "TraceStep",
    "RunTrace",
    "WaypointResult",
    "CourseMetrics",
    "baseline_input",
    "augmented_input",
    "controller_input",
    "run_course",
    "save_trace",
    "load_trace",
]


@dataclass(frozen=True, eq=False)
class WaypointCourse:
    """Ordered waypoints with an arrival radius and per-waypoint timeout."""

    waypoints: tuple
    arrival_radius: float = 0.1
    waypoint_timeout: float = 10.0
    global_timeout: float | None = None

    def __post_init__(self) -> None:
        wps = tuple(np.asarray(w, dtype=float) for w in self.waypoints)
        if not wps:
            raise ValueError("course must contain at least one waypoint")
        if not self.arrival_radius > 0:
            raise ValueError("arrival_radius must be positive")
        if not self.waypoint_timeout > 0:
            raise ValueError("waypoint_timeout must be positive")
        object.__setattr__(self, "waypoints", wps)

    @property
    def effective_global_timeout(self) -> float:
        if self.global_timeout is not None:
            return self.global_timeout
        return self.waypoint_timeout * len(self.waypoints)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "waypoint_course",
            "waypoints": [w.tolist() for w in self.waypoints],
            "arrival_radius": self.arrival_radius,
            "waypoint_timeout": self.waypoint_timeout,
            "global_timeout": self.global_timeout,
        }

    @staticmethod
    def from_dict(payload: dict) -> "WaypointCourse":
        if payload.get("kind") != "waypoint_course":
            raise ValueError(f"not a waypoint_course payload: {payload.get('kind')!r}")
        return WaypointCourse(
            waypoints=tuple(payload["waypoints"]),
            arrival_radius=float(payload.get("arrival_radius", 0.1)),
            waypoint_timeout=float(payload.get("waypoint_timeout", 10.0)),
            global_timeout=payload.get("global_timeout"),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @staticmethod
    def load(path: Union[str, Path]) -> "WaypointCourse":
        return WaypointCourse.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ControllerConfig:
    """Gain, input box and mode; augmented mode carries the fitted surface.

    Default gain 25 puts gain * dt at 0.5, well inside the (0, 2) stability
    range while hitting the velocity caps far from waypoints.  The deadband
    default is half the standard arrival radius, so rejection never chatters
    where arrival is about to trigger anyway.
    """

    gain: float = 25.0
    input_box: Box = MODEL_INPUT_BOX
    deadband: float = 0.05
    mode: Literal["baseline", "augmented"] = "baseline"
    sar: SarModel | None = None
    dt: float = MODEL_DT

    def __post_init__(self) -> None:
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if self.mode not in ("baseline", "augmented"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.mode == "augmented" and self.sar is None:
            raise ValueError("augmented mode requires a fitted surface")
        if self.deadband < 0:
            raise ValueError("deadband must be non-negative")


def baseline_input(x_hat: np.ndarray, w: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """u = clip_box(gain * (w - x_hat))."""
    x_hat = np.asarray(x_hat, dtype=float)
    w = np.asarray(w, dtype=float)
    return cfg.input_box.clip(cfg.gain * (w - x_hat))


def augmented_input(x_hat: np.ndarray, w: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    """Baseline plus bound-sized feedforward along the error direction.

    The feedforward velocity is evaluate_surface(x_hat) / dt; it switches
    off when the error norm is at or below the deadband (the output is then
    the baseline command, discontinuously).
    """
    if cfg.sar is None:
        raise ValueError("augmented_input requires cfg.sar")
    x_hat = np.asarray(x_hat, dtype=float)
    w = np.asarray(w, dtype=float)
    error = w - x_hat
    dist = float(np.linalg.norm(error))
    command = cfg.gain * error
    if dist > cfg.deadband:
        bound = evaluate_surface(cfg.sar, x_hat)
        command = command + (bound / cfg.dt) * (error / dist)
    return cfg.input_box.clip(command)


def controller_input(x_hat: np.ndarray, w: np.ndarray, cfg: ControllerConfig) -> np.ndarray:
    if cfg.mode == "augmented":
        return augmented_input(x_hat, w, cfg)
    return baseline_input(x_hat, w, cfg)


@dataclass(frozen=True, eq=False)
class TraceStep:
    """One model step: index, state, input, norm sample, chased waypoint."""

    j: int
    x_hat: np.ndarray
    u_hat: np.ndarray
    delta: float
    waypoint: int
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "x_hat": self.x_hat.tolist(),
            "u_hat": self.u_hat.tolist(),
            "delta": self.delta,
            "waypoint": self.waypoint,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class WaypointResult:
    index: int
    steps: int
    seconds: float
    arrived: bool
    timed_out: bool

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "steps": self.steps,
            "seconds": self.seconds,
            "arrived": self.arrived,
            "timed_out": self.timed_out,
        }


@dataclass(frozen=True)
class CourseMetrics:
    waypoints: tuple[WaypointResult, ...]
    total_steps: int
    total_seconds: float
    completed: bool
    diverged: bool

    @property
    def n_timeouts(self) -> int:
        return sum(1 for w in self.waypoints if w.timed_out)

    def to_dict(self) -> dict:
        return {
            "waypoints": [w.to_dict() for w in self.waypoints],
            "total_steps": self.total_steps,
            "total_seconds": self.total_seconds,
            "completed": self.completed,
            "diverged": self.diverged,
            "n_timeouts": self.n_timeouts,
        }


@dataclass(eq=False)
class RunTrace:
    """Time-stamped record of one course run, one entry per model step."""

    steps: list
    dt: float
    mode: str
    metrics: CourseMetrics | None = None

    def records(self):
        """Disturbance records for surface fitting (state, norm, index)."""
        from .sysmodel import DisturbanceRecord

        return [DisturbanceRecord(s.x_hat, s.delta, s.j) for s in self.steps]


def run_course(
    world: World,
    course: WaypointCourse,
    cfg: ControllerConfig,
    seed: int | None = None,
) -> tuple[RunTrace, CourseMetrics]:
    """Step the world at the model rate through the course.

    Arrival (within arrival_radius) advances to the next waypoint; a
    waypoint that exceeds its timeout is flagged and skipped so the run
    always terminates.  A divergence error propagates with the partial
    trace attached (``err.trace``).
    """
    if seed is not None:
        world.rng = rng_stream(seed, 0)
    dt = world.sim.dt
    timeout_steps = int(math.ceil(course.waypoint_timeout / dt))
    global_steps = int(math.ceil(course.effective_global_timeout / dt))
    steps: list[TraceStep] = []
    results: list[WaypointResult] = []
    flags_next: list[str] = []
    wp_idx = 0
    steps_since_wp = 0
    total = 0
    diverged = False

    def close_waypoint(arrived: bool) -> None:
        nonlocal wp_idx, steps_since_wp
        results.append(
            WaypointResult(
                index=wp_idx,
                steps=steps_since_wp,
                seconds=steps_since_wp * dt,
                arrived=arrived,
                timed_out=not arrived,
            )
        )
        if steps:
            tag = f"{'arrived' if arrived else 'timeout'}:{wp_idx}"
            steps[-1] = TraceStep(
                steps[-1].j,
                steps[-1].x_hat,
                steps[-1].u_hat,
                steps[-1].delta,
                steps[-1].waypoint,
                steps[-1].flags + (tag,),
            )
        wp_idx += 1
        steps_since_wp = 0

    while wp_idx < len(course.waypoints) and total < global_steps:
        x_hat = world.model_state()
        target = course.waypoints[wp_idx]
        if np.linalg.norm(target - x_hat) <= course.arrival_radius:
            close_waypoint(arrived=True)
            continue
        if steps_since_wp >= timeout_steps:
            close_waypoint(arrived=False)
            continue
        u_hat = controller_input(x_hat, target, cfg)
        try:
            record = world.norm_sample(u_hat)
        except DivergenceError as err:
            diverged = True
            metrics = CourseMetrics(
                waypoints=tuple(results),
                total_steps=total,
                total_seconds=total * dt,
                completed=False,
                diverged=True,
            )
            err.trace = RunTrace(steps, dt, cfg.mode, metrics)  # type: ignore[attr-defined]
            err.metrics = metrics  # type: ignore[attr-defined]
            raise
        steps.append(
            TraceStep(record.model_time_index, x_hat, u_hat, record.norm_sample, wp_idx)
        )
        total += 1
        steps_since_wp += 1

    if wp_idx < len(course.waypoints):
        # global timeout ended the run mid-waypoint
        close_waypoint(arrived=False)

    completed = (
        wp_idx == len(course.waypoints)
        and all(r.arrived for r in results)
        and not diverged
    )
    metrics = CourseMetrics(
        waypoints=tuple(results),
        total_steps=total,
        total_seconds=total * dt,
        completed=completed,
        diverged=diverged,
    )
    trace = RunTrace(steps, dt, cfg.mode, metrics)
    return trace, metrics


TRACE_SCHEMA_VERSION = 1


def save_trace(trace: RunTrace, path: Union[str, Path]) -> None:
    """JSON-lines: a header line, then one record per model step."""
    with open(path, "w") as fh:
        header = {
            "schema_version": TRACE_SCHEMA_VERSION,
            "kind": "run_trace",
            "dt": trace.dt,
            "mode": trace.mode,
        }
        if trace.metrics is not None:
            header["metrics"] = trace.metrics.to_dict()
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for step in trace.steps:
            fh.write(json.dumps(step.to_dict(), sort_keys=True) + "\n")


def load_trace(path: Union[str, Path]) -> RunTrace:
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"empty trace file: {path}")
    header = json.loads(lines[0])
    if header.get("kind") != "run_trace":
        raise ValueError(f"not a run_trace file: {path}")
    steps = []
    for line in lines[1:]:
        rec = json.loads(line)
        steps.append(
            TraceStep(
                j=int(rec["j"]),
                x_hat=np.asarray(rec["x_hat"], dtype=float),
                u_hat=np.asarray(rec["u_hat"], dtype=float),
                delta=float(rec["delta"]),
                waypoint=int(rec["waypoint"]),
                flags=tuple(rec.get("flags", ())),
            )
        )
    return RunTrace(steps, float(header["dt"]), str(header.get("mode", "baseline")))
