"""Experiment orchestration: fit on the first traversal, deploy afterwards.

A scenario bundles a world, a course and every fitting constant.  Running an
experiment executes the two-phase protocol: phase 1 traverses the course
once under the baseline controller while the online fitter consumes the
disturbance records; phase 2 repeats the course with the frozen fitted
surface feeding the augmented controller.  Baseline and augmented episodes
share a random stream per episode, so their disturbance realizations are
identical and the timing comparison is noise-controlled.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .control import (
    ControllerConfig,
    CourseMetrics,
    RunTrace,
    WaypointCourse,
    run_course,
)
from .gpr import ConfidenceParams, SquaredExponentialKernel
from .risk import Binomial, Gaussian, analytic_var, empirical_var
from .surface import (
    CoverageReport,
    DiscrepancyParams,
    SarModel,
    coverage_report,
    evaluate_surface_many,
    fit_online,
)
from .sysmodel import (
    Box,
    DivergenceError,
    WorldConfig,
    build_world,
    probe_norm_samples,
    rng_stream,
)

__all__ = [
    "Scenario",
    "EpisodeResult",
    "ExperimentReport",
    "run_experiment",
    "simulate_phase",
    "scenario_ground_truth",
    "scenario_coverage",
    "figure2_fixture",
    "ProcessFixture",
    "export_plot_data",
    "builtin_scenario",
    "builtin_course",
    "list_builtin_scenarios",
    "load_scenario",
    "save_scenario",
    "save_report",
]

# Stream ids: one substream family per role, so phases never share draws.
FIT_STREAM = 1
EPISODE_STREAM_BASE = 1000
COVERAGE_STREAM = 5000

SCENARIO_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    """One experiment parameterization; labels follow the A-D convention."""

    label: str
    world: WorldConfig
    course: WaypointCourse
    eps: float = 0.05
    n_per_batch: int = 60
    length_scale: float = 1.0
    signal_variance: float = 1.0
    rkhs_bound: float = 1.0
    alpha: float = 3.0
    beta: float = 0.05
    gain: float = 25.0
    deadband: float | None = None
    sigma_mode: str = "variance"
    n_episodes: int = 10
    coverage_grid: int = 10
    coverage_samples: int = 200
    coverage_height: float | None = None
    policy: str = "warn"
    target_state: str = "last"

    def kernel(self) -> SquaredExponentialKernel:
        return SquaredExponentialKernel(self.length_scale, self.signal_variance)

    def confidence(self) -> ConfidenceParams:
        return ConfidenceParams(
            rkhs_bound=self.rkhs_bound, noise_scale=0.0, sigma_mode=self.sigma_mode
        )

    def discrepancy(self) -> DiscrepancyParams:
        return DiscrepancyParams(self.alpha, self.beta)

    def controller(self, mode: str, sar: SarModel | None = None) -> ControllerConfig:
        deadband = self.deadband
        if deadband is None:
            deadband = self.course.arrival_radius / 2.0
        return ControllerConfig(
            gain=self.gain,
            input_box=self.world.sim.input_box,
            deadband=deadband,
            mode=mode,  # type: ignore[arg-type]
            sar=sar,
            dt=self.world.dt,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "kind": "scenario",
            "label": self.label,
            "world": self.world.to_dict(),
            "course": self.course.to_dict(),
            "eps": self.eps,
            "n_per_batch": self.n_per_batch,
            "length_scale": self.length_scale,
            "signal_variance": self.signal_variance,
            "rkhs_bound": self.rkhs_bound,
            "alpha": self.alpha,
            "beta": self.beta,
            "gain": self.gain,
            "deadband": self.deadband,
            "sigma_mode": self.sigma_mode,
            "n_episodes": self.n_episodes,
            "coverage_grid": self.coverage_grid,
            "coverage_samples": self.coverage_samples,
            "coverage_height": self.coverage_height,
            "policy": self.policy,
            "target_state": self.target_state,
        }

    @staticmethod
    def from_dict(payload: dict) -> "Scenario":
        if payload.get("kind") != "scenario":
            raise ValueError(f"not a scenario payload: {payload.get('kind')!r}")
        kwargs = {k: v for k, v in payload.items() if k not in ("schema_version", "kind")}
        kwargs["world"] = WorldConfig.from_dict(payload["world"])
        kwargs["course"] = WaypointCourse.from_dict(payload["course"])
        return Scenario(**kwargs)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))


def _data_dir() -> "resources.abc.Traversable":
    return resources.files("riskbound") / "data"


def list_builtin_scenarios() -> list[str]:
    return sorted(
        p.name.removesuffix(".json")
        for p in (_data_dir() / "scenarios").iterdir()
        if p.name.endswith(".json")
    )


def builtin_scenario(name: str) -> Scenario:
    path = _data_dir() / "scenarios" / f"{name}.json"
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ValueError(
            f"unknown builtin scenario {name!r}; available: {list_builtin_scenarios()}"
        ) from None
    return Scenario.from_dict(json.loads(text))


def builtin_course(name: str) -> WaypointCourse:
    path = _data_dir() / "courses" / f"{name}.json"
    return WaypointCourse.from_dict(json.loads(path.read_text()))


def resolve_scenario(spec: Union[str, Path, Scenario]) -> Scenario:
    """Accept a Scenario, a filesystem path, or a builtin scenario name."""
    if isinstance(spec, Scenario):
        return spec
    path = Path(spec)
    if path.exists():
        return load_scenario(path)
    return builtin_scenario(str(spec))


@dataclass(frozen=True)
class EpisodeResult:
    episode: int
    stream_id: int
    baseline_seconds: float | None
    augmented_seconds: float | None
    baseline_timeouts: int
    augmented_timeouts: int
    baseline_completed: bool
    augmented_completed: bool
    diverged: bool

    @property
    def speedup(self) -> float | None:
        if self.baseline_seconds and self.augmented_seconds:
            return self.baseline_seconds / self.augmented_seconds
        return None

    def to_dict(self) -> dict:
        return {
            "episode": self.episode,
            "stream_id": self.stream_id,
            "baseline_seconds": self.baseline_seconds,
            "augmented_seconds": self.augmented_seconds,
            "baseline_timeouts": self.baseline_timeouts,
            "augmented_timeouts": self.augmented_timeouts,
            "baseline_completed": self.baseline_completed,
            "augmented_completed": self.augmented_completed,
            "diverged": self.diverged,
            "speedup": self.speedup,
        }


@dataclass(frozen=True)
class ExperimentReport:
    """Everything the two-phase protocol measured, JSON-serializable."""

    label: str
    seed: int
    phase1_seconds: float
    phase1_steps: int
    phase1_timeouts: int
    phase1_records: int
    iterations: int
    joint_confidence: float
    episodes: tuple[EpisodeResult, ...]
    mean_speedup: float | None
    speedup_of_means: float | None
    win_fraction: float | None
    coverage: CoverageReport
    diagnostics: tuple

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "experiment_report",
            "label": self.label,
            "seed": self.seed,
            "phase1": {
                "seconds": self.phase1_seconds,
                "steps": self.phase1_steps,
                "timeouts": self.phase1_timeouts,
                "records": self.phase1_records,
            },
            "fit": {
                "iterations": self.iterations,
                "joint_confidence": self.joint_confidence,
                "diagnostics": [d.to_dict() for d in self.diagnostics],
            },
            "phase2": {
                "episodes": [e.to_dict() for e in self.episodes],
                "mean_speedup": self.mean_speedup,
                "speedup_of_means": self.speedup_of_means,
                "win_fraction": self.win_fraction,
            },
            "coverage": self.coverage.to_dict(),
        }


def save_report(report: ExperimentReport, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))


def simulate_phase(
    scenario: Scenario,
    seed: int,
    phase: str = "baseline",
    sar: SarModel | None = None,
    stream_id: int | None = None,
) -> tuple[RunTrace, CourseMetrics]:
    """Run one course traversal of the given phase in a fresh world."""
    if phase not in ("baseline", "augmented"):
        raise ValueError(f"unknown phase: {phase!r}")
    if phase == "augmented" and sar is None:
        raise ValueError("augmented phase requires a fitted surface")
    if stream_id is None:
        stream_id = FIT_STREAM if phase == "baseline" else EPISODE_STREAM_BASE
    world = build_world(scenario.world, seed, stream_id)
    cfg = scenario.controller(phase, sar)
    return run_course(world, scenario.course, cfg)


def fit_from_trace(scenario: Scenario, trace: RunTrace) -> SarModel:
    return fit_online(
        trace.records(),
        scenario.discrepancy(),
        scenario.eps,
        scenario.n_per_batch,
        scenario.kernel(),
        scenario.confidence(),
        policy=scenario.policy,  # type: ignore[arg-type]
        target_state=scenario.target_state,  # type: ignore[arg-type]
    )


def scenario_ground_truth(
    scenario: Scenario, seed: int, grid_n: int | None = None, n_samples: int | None = None
) -> dict[tuple, float]:
    """Monte Carlo Surface-at-Risk ground truth on a horizontal grid.

    Samples the hover-probe disturbance-norm distribution at each grid
    point (exact for integrator worlds) and takes the empirical VaR.  The
    grid spans the model box in x and y at a fixed height, by default the
    mean course waypoint height.
    """
    grid_n = grid_n or scenario.coverage_grid
    n_samples = n_samples or scenario.coverage_samples
    box = scenario.world.sim.state_box
    height = scenario.coverage_height
    if height is None:
        height = float(np.mean([w[2] for w in scenario.course.waypoints]))
    xs = np.linspace(box.lo[0], box.hi[0], grid_n)
    ys = np.linspace(box.lo[1], box.hi[1], grid_n)
    rng = rng_stream(seed, COVERAGE_STREAM)
    truth: dict[tuple, float] = {}
    for x in xs:
        for y in ys:
            point = np.array([x, y, height])
            samples = probe_norm_samples(scenario.world, point, n_samples, rng)
            truth[(float(x), float(y), float(height))] = empirical_var(samples, scenario.eps)
    return truth


def scenario_coverage(
    scenario: Scenario, model: SarModel, seed: int,
    grid_n: int | None = None, n_samples: int | None = None,
) -> CoverageReport:
    return coverage_report(model, scenario_ground_truth(scenario, seed, grid_n, n_samples))


def run_experiment(scenario: Union[str, Path, Scenario], seed: int) -> ExperimentReport:
    """Two-phase protocol: fit on one baseline traversal, deploy and compare.

    Phase 2 runs paired episodes: baseline and augmented against identical
    disturbance realizations (same per-episode stream).  Divergence in
    phase 1 aborts; in phase 2 it marks the episode failed and continues.
    """
    scn = resolve_scenario(scenario)
    try:
        trace1, metrics1 = simulate_phase(scn, seed, "baseline")
    except DivergenceError as err:
        raise DivergenceError(
            f"phase 1 (fitting traversal) diverged for scenario {scn.label!r}: {err}"
        ) from err
    model = fit_from_trace(scn, trace1)

    episodes: list[EpisodeResult] = []
    for e in range(scn.n_episodes):
        stream = EPISODE_STREAM_BASE + e
        base_seconds = aug_seconds = None
        base_timeouts = aug_timeouts = 0
        base_done = aug_done = False
        diverged = False
        try:
            _, mb = simulate_phase(scn, seed, "baseline", stream_id=stream)
            base_seconds = mb.total_seconds
            base_timeouts = mb.n_timeouts
            base_done = mb.completed
            _, ma = simulate_phase(scn, seed, "augmented", sar=model, stream_id=stream)
            aug_seconds = ma.total_seconds
            aug_timeouts = ma.n_timeouts
            aug_done = ma.completed
        except DivergenceError:
            diverged = True
        episodes.append(
            EpisodeResult(
                episode=e,
                stream_id=stream,
                baseline_seconds=base_seconds,
                augmented_seconds=aug_seconds,
                baseline_timeouts=base_timeouts,
                augmented_timeouts=aug_timeouts,
                baseline_completed=base_done,
                augmented_completed=aug_done,
                diverged=diverged,
            )
        )

    paired = [e for e in episodes if e.speedup is not None]
    mean_speedup = float(np.mean([e.speedup for e in paired])) if paired else None
    base_mean = np.mean([e.baseline_seconds for e in paired]) if paired else None
    aug_mean = np.mean([e.augmented_seconds for e in paired]) if paired else None
    speedup_of_means = (
        float(base_mean / aug_mean) if paired and aug_mean else None
    )
    win_fraction = (
        float(np.mean([e.augmented_seconds < e.baseline_seconds for e in paired]))
        if paired
        else None
    )
    cov = scenario_coverage(scn, model, seed)
    return ExperimentReport(
        label=scn.label,
        seed=seed,
        phase1_seconds=metrics1.total_seconds,
        phase1_steps=metrics1.total_steps,
        phase1_timeouts=metrics1.n_timeouts,
        phase1_records=len(trace1.steps),
        iterations=model.iterations,
        joint_confidence=model.joint_confidence,
        episodes=tuple(episodes),
        mean_speedup=mean_speedup,
        speedup_of_means=speedup_of_means,
        win_fraction=win_fraction,
        coverage=cov,
        diagnostics=model.diagnostics,
    )


@dataclass(frozen=True, eq=False)
class ProcessFixture:
    """Sample paths of a reference stochastic process plus its analytic and
    empirical Surface-at-Risk curves per risk level."""

    name: str
    times: np.ndarray
    paths: np.ndarray
    analytic_sar: dict
    empirical_sar: dict


def figure2_fixture(
    n_paths: int = 200,
    seed: int = 0,
    eps_levels: tuple[float, ...] = (0.1, 0.05, 0.01),
) -> dict[str, ProcessFixture]:
    """Wiener and binomial reference processes with layered risk surfaces.

    The Wiener marginal at time t is N(0, t); the binomial process counts
    successes over integer trials at p = 1/2.  Useful for validating the
    empirical surface estimator against closed forms.
    """
    rng = rng_stream(seed, 0)
    dt = 0.05
    times = np.arange(1, 61) * dt
    increments = rng.standard_normal((n_paths, times.size)) * np.sqrt(dt)
    wiener_paths = np.cumsum(increments, axis=1)
    wiener_analytic = {
        eps: np.array([analytic_var(Gaussian(0.0, np.sqrt(t)), eps) for t in times])
        for eps in eps_levels
    }
    wiener_empirical = {
        eps: np.array([empirical_var(wiener_paths[:, i], eps) for i in range(times.size)])
        for eps in eps_levels
    }
    wiener = ProcessFixture("wiener", times, wiener_paths, wiener_analytic, wiener_empirical)

    p = 0.5
    trials = np.arange(1, 31)
    bern = (rng.random((n_paths, trials.size)) < p).astype(float)
    binom_paths = np.cumsum(bern, axis=1)
    binom_analytic = {
        eps: np.array([analytic_var(Binomial(int(m), p), eps) for m in trials])
        for eps in eps_levels
    }
    binom_empirical = {
        eps: np.array([empirical_var(binom_paths[:, i], eps) for i in range(trials.size)])
        for eps in eps_levels
    }
    binom = ProcessFixture(
        "binomial", trials.astype(float), binom_paths, binom_analytic, binom_empirical
    )
    return {"wiener": wiener, "binomial": binom}


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def export_plot_data(
    obj,
    kind: str,
    out_dir: Union[str, Path],
    grid_n: int = 40,
    height: float | None = None,
    box: Box | None = None,
    max_paths: int = 20,
) -> list[Path]:
    """Write plot-ready CSV files; returns the written paths.

    Kinds: ``surface-slice`` (SarModel -> x,y,z,value on a horizontal
    grid), ``sar-vs-samples`` (ProcessFixture or mapping of them ->
    t,series,value in long form), ``course-3d`` (RunTrace ->
    t,x,y,z,waypoint_id), ``batch-diagnostics`` (SarModel or
    ExperimentReport -> per-batch alpha_D/beta_D table).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "surface-slice":
        if not isinstance(obj, SarModel):
            raise ValueError("surface-slice expects a SarModel")
        b = box or Box([-2.0, -2.0, 1.2], [2.0, 2.0, 2.0])
        z = height if height is not None else float((b.lo[2] + b.hi[2]) / 2.0)
        xs = np.linspace(b.lo[0], b.hi[0], grid_n)
        ys = np.linspace(b.lo[1], b.hi[1], grid_n)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel(), np.full(xx.size, z)], axis=-1)
        vals = evaluate_surface_many(obj, pts)
        rows = [(p[0], p[1], p[2], v) for p, v in zip(pts, vals)]
        return [_write_csv(out / "surface_slice.csv", ["x", "y", "z", "value"], rows)]
    if kind == "sar-vs-samples":
        fixtures = obj if isinstance(obj, dict) else {getattr(obj, "name", "process"): obj}
        written = []
        for name, fx in fixtures.items():
            rows = []
            for i in range(min(max_paths, fx.paths.shape[0])):
                rows.extend(
                    (t, f"path_{i}", v) for t, v in zip(fx.times, fx.paths[i])
                )
            for eps, curve in sorted(fx.analytic_sar.items(), reverse=True):
                rows.extend(
                    (t, f"analytic_sar_eps{eps:g}", v) for t, v in zip(fx.times, curve)
                )
            for eps, curve in sorted(fx.empirical_sar.items(), reverse=True):
                rows.extend(
                    (t, f"empirical_sar_eps{eps:g}", v) for t, v in zip(fx.times, curve)
                )
            written.append(
                _write_csv(out / f"sar_vs_samples_{name}.csv", ["t", "series", "value"], rows)
            )
        return written
    if kind == "course-3d":
        if not isinstance(obj, RunTrace):
            raise ValueError("course-3d expects a RunTrace")
        rows = [
            (i * obj.dt, s.x_hat[0], s.x_hat[1], s.x_hat[2], s.waypoint)
            for i, s in enumerate(obj.steps)
        ]
        return [
            _write_csv(out / "course_3d.csv", ["t", "x", "y", "z", "waypoint_id"], rows)
        ]
    if kind == "batch-diagnostics":
        diags = obj.diagnostics if hasattr(obj, "diagnostics") else obj
        rows = [
            (d.batch_index, d.alpha_d, d.beta_d, d.alpha_ok, d.beta_ok) for d in diags
        ]
        return [
            _write_csv(
                out / "batch_diagnostics.csv",
                ["batch_index", "alpha_d", "beta_d", "alpha_ok", "beta_ok"],
                rows,
            )
        ]
    raise ValueError(f"unknown export kind: {kind!r}")
