"""True-system / sim-model pairs with stochastic disturbance fields.

A *world* bundles a true system ``x_{k+1} = f(x_k, u_k) + xi`` running at a
fast inner rate, a simple sim model ``xhat_{j+1} = fhat(xhat_j, uhat_j)``
running at the model rate, a projection map from true state to model state,
an extension map from model input (plus true state) to true input, and a
time-dilation parameter K: the number of inner steps per model step.  The
inner time step is ``dt / K`` so the two clocks align.

Observing the world means holding a model input fixed (zero-order hold),
advancing the true system K inner steps, and projecting the final true
state.  The norm of the gap between that observation and the sim model's
one-step prediction is a disturbance-norm sample; the stochastic fields
below (wind, ground effect, tether pull) are what make it a random variable.

Fields contribute additive per-inner-step position displacements, the
position-level realization of the true system's noise term.  Shipped true
systems keep position in the first three state components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "DivergenceError",
    "Box",
    "MODEL_STATE_BOX",
    "MODEL_INPUT_BOX",
    "MODEL_DT",
    "TIME_DILATION",
    "ConstantWind",
    "GroundEffect",
    "Tether",
    "Composite",
    "DisturbanceField",
    "DisturbanceRecord",
    "SimModel",
    "TrueSystem",
    "SystemMaps",
    "World",
    "WorldConfig",
    "rng_stream",
    "observe",
    "disturbance_norm_sample",
    "build_integrator_world",
    "build_quadrotor_like_world",
    "build_world",
    "probe_norm_samples",
    "field_to_dict",
    "field_from_dict",
]


class DivergenceError(RuntimeError):
    """True state left the safety envelope; the run cannot continue."""


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent, reproducible random substream for (seed, stream_id)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box; used for state sets, input sets and safety envelopes."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal shapes")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return int(self.lo.shape[0])

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        xa = np.asarray(x, dtype=float).ravel()
        return bool(np.all(xa >= self.lo - tol) and np.all(xa <= self.hi + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def inflate(self, factor: float) -> "Box":
        """Grow each side by ``factor`` times its half-width about the center."""
        center = (self.lo + self.hi) / 2.0
        half = (self.hi - self.lo) / 2.0 * (1.0 + factor)
        return Box(center - half, center + half)

    def grid(self, n: int) -> np.ndarray:
        """Regular n-per-axis grid of box points, shape (n**dim, dim)."""
        axes = [np.linspace(l, h, n) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


# Model-level constants of the shipped single-integrator testbed.
MODEL_STATE_BOX = Box([-2.0, -2.0, 1.2], [2.0, 2.0, 2.0])
MODEL_INPUT_BOX = Box([-0.8, -0.8, -0.5], [0.8, 0.8, 0.5])
MODEL_DT = 0.02
TIME_DILATION = 20


@dataclass(frozen=True)
class ConstantWind:
    """Steady wind plus isotropic gusts.

    Per inner step of length dt the displacement is ``velocity * dt`` plus,
    when ``gust_stddev > 0``, a draw from N(0, (gust_stddev * dt)^2) per axis
    (a gust velocity held over the step).
    """

    velocity: tuple[float, float, float]
    gust_stddev: float = 0.0

    def displacement(self, pos: np.ndarray, dt: float, rng: np.random.Generator | None) -> np.ndarray:
        base = np.asarray(self.velocity, dtype=float) * dt
        disp = np.broadcast_to(base, pos.shape).copy() if pos.ndim > 1 else base
        if self.gust_stddev > 0.0 and rng is not None:
            disp = disp + rng.standard_normal(pos.shape) * (self.gust_stddev * dt)
        return disp


@dataclass(frozen=True)
class GroundEffect:
    """Upward push decaying exponentially with height above the floor."""

    gain: float
    decay_height: float
    floor: float = 0.0

    def displacement(self, pos: np.ndarray, dt: float, rng: np.random.Generator | None) -> np.ndarray:
        z = pos[..., 2]
        push = self.gain * np.exp(-(z - self.floor) / self.decay_height) * dt
        disp = np.zeros_like(pos)
        disp[..., 2] = push
        return disp


@dataclass(frozen=True)
class Tether:
    """Spring-like pull toward an anchor point, velocity per meter of offset."""

    anchor: tuple[float, float, float]
    stiffness: float

    def displacement(self, pos: np.ndarray, dt: float, rng: np.random.Generator | None) -> np.ndarray:
        return -self.stiffness * (pos - np.asarray(self.anchor, dtype=float)) * dt


@dataclass(frozen=True)
class Composite:
    """Vector sum of member fields' displacements."""

    members: tuple

    def displacement(self, pos: np.ndarray, dt: float, rng: np.random.Generator | None) -> np.ndarray:
        disp = np.zeros_like(np.asarray(pos, dtype=float))
        for member in self.members:
            disp = disp + member.displacement(pos, dt, rng)
        return disp


DisturbanceField = Union[ConstantWind, GroundEffect, Tether, Composite]


def field_to_dict(f: DisturbanceField) -> dict:
    if isinstance(f, ConstantWind):
        return {"kind": "constant-wind", "velocity": list(f.velocity), "gust_stddev": f.gust_stddev}
    if isinstance(f, GroundEffect):
        return {"kind": "ground-effect", "gain": f.gain, "decay_height": f.decay_height, "floor": f.floor}
    if isinstance(f, Tether):
        return {"kind": "tether", "anchor": list(f.anchor), "stiffness": f.stiffness}
    if isinstance(f, Composite):
        return {"kind": "composite", "members": [field_to_dict(m) for m in f.members]}
    raise TypeError(f"unsupported field: {f!r}")


def field_from_dict(payload: dict) -> DisturbanceField:
    kind = payload.get("kind")
    if kind == "constant-wind":
        return ConstantWind(tuple(payload["velocity"]), float(payload.get("gust_stddev", 0.0)))
    if kind == "ground-effect":
        return GroundEffect(
            float(payload["gain"]), float(payload["decay_height"]), float(payload.get("floor", 0.0))
        )
    if kind == "tether":
        return Tether(tuple(payload["anchor"]), float(payload["stiffness"]))
    if kind == "composite":
        return Composite(tuple(field_from_dict(m) for m in payload["members"]))
    raise ValueError(f"unknown disturbance field kind: {kind!r}")


@dataclass(frozen=True, eq=False)
class DisturbanceRecord:
    """One state-indexed disturbance-norm sample."""

    model_state: np.ndarray
    norm_sample: float
    model_time_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_state", np.asarray(self.model_state, dtype=float))
        if not (math.isfinite(self.norm_sample) and self.norm_sample >= 0.0):
            raise ValueError(f"norm sample must be finite and >= 0, got {self.norm_sample}")


@dataclass(frozen=True)
class SimModel:
    """Single-integrator sim model: xhat_{j+1} = xhat_j + uhat_j * dt."""

    state_box: Box = MODEL_STATE_BOX
    input_box: Box = MODEL_INPUT_BOX
    dt: float = MODEL_DT

    @property
    def state_dim(self) -> int:
        return self.state_box.dim

    @property
    def input_dim(self) -> int:
        return self.input_box.dim

    def step(self, x_hat: np.ndarray, u_hat: np.ndarray) -> np.ndarray:
        return np.asarray(x_hat, dtype=float) + np.asarray(u_hat, dtype=float) * self.dt


@dataclass(frozen=True)
class TrueSystem:
    """Deterministic part of the true dynamics; noise enters via fields.

    ``step(x, u, dt)`` must be deterministic.  Position lives in ``x[:3]``.
    """

    state_dim: int
    input_dim: int
    step: Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SystemMaps:
    """Projection M_x, input extension M_u and the time-dilation K."""

    project: Callable[[np.ndarray], np.ndarray]
    extend: Callable[[np.ndarray, np.ndarray], np.ndarray]
    time_dilation: int

    def __post_init__(self) -> None:
        if self.time_dilation < 1:
            raise ValueError(f"time_dilation must be >= 1, got {self.time_dilation}")


class World:
    """A true system, its maps, a sim model and disturbance fields, with
    a private random stream.  Single-threaded: the instance owns its rng
    position and current true state."""

    def __init__(
        self,
        true_system: TrueSystem,
        maps: SystemMaps,
        sim: SimModel,
        fields: Sequence[DisturbanceField],
        rng: np.random.Generator,
        initial_state: np.ndarray,
        safety_box: Box | None = None,
        config: "WorldConfig | None" = None,
    ) -> None:
        self.true_system = true_system
        self.maps = maps
        self.sim = sim
        self.fields = tuple(fields)
        self.rng = rng
        self.state = np.asarray(initial_state, dtype=float).copy()
        self.safety_box = safety_box or sim.state_box.inflate(0.5)
        self.model_time_index = 0
        self.config = config

    @property
    def dt_inner(self) -> float:
        return self.sim.dt / self.maps.time_dilation

    def model_state(self) -> np.ndarray:
        return self.maps.project(self.state)

    def _true_step(self, u: np.ndarray) -> None:
        dt = self.dt_inner
        x = self.true_system.step(self.state, u, dt)
        if self.fields:
            pos = x[:3]
            disp = np.zeros(3)
            for f in self.fields:
                disp = disp + f.displacement(pos, dt, self.rng)
            x = x.copy()
            x[:3] += disp
        self.state = x
        pos = x[:3]
        lo, hi = self.safety_box.lo, self.safety_box.hi
        if (pos < lo).any() or (pos > hi).any():
            raise DivergenceError(
                f"true position {pos.tolist()} left the safety envelope "
                f"[{lo.tolist()}, {hi.tolist()}]"
            )

    def observe(self, u_hat: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        """Hold ``u_hat`` for K inner steps from ``x0`` (default: current
        state) and return the projected true state."""
        u_hat = np.asarray(u_hat, dtype=float)
        if not self.sim.input_box.contains(u_hat):
            raise ValueError(f"model input {u_hat.tolist()} outside the input box")
        if x0 is not None:
            self.state = np.asarray(x0, dtype=float).copy()
        for _ in range(self.maps.time_dilation):
            u = self.maps.extend(u_hat, self.state)
            self._true_step(u)
        return self.maps.project(self.state)

    def norm_sample(self, u_hat: np.ndarray) -> DisturbanceRecord:
        """One disturbance-norm sample from the current state; advances the
        world one model step and increments the model time index."""
        x_hat = self.maps.project(self.state)
        predicted = self.sim.step(x_hat, u_hat)
        observed = self.observe(u_hat)
        delta = float(np.linalg.norm(observed - predicted))
        record = DisturbanceRecord(x_hat, delta, self.model_time_index)
        self.model_time_index += 1
        return record


def observe(world: World, x0: np.ndarray, u_hat: np.ndarray) -> np.ndarray:
    """Project the true state after K inner steps under a held model input."""
    return world.observe(u_hat, x0=x0)


def disturbance_norm_sample(
    world: World, x_kj: np.ndarray, controller_output: np.ndarray
) -> DisturbanceRecord:
    """Norm of the gap between observed and predicted model-state evolution."""
    world.state = np.asarray(x_kj, dtype=float).copy()
    return world.norm_sample(controller_output)


@dataclass(frozen=True)
class WorldConfig:
    """Declarative world description; a run is a pure function of
    (config, seed, stream_id)."""

    kind: str = "quadrotor_like"  # or "integrator"
    time_dilation: int = TIME_DILATION
    dt: float = MODEL_DT
    initial_position: tuple[float, float, float] = (0.0, 0.0, 1.5)
    fields: tuple[DisturbanceField, ...] = ()
    tracking_time_constant: float = 0.05
    mass: float = 1.0
    max_accel: float | None = None
    safety_inflation: float = 0.5
    state_box_lo: tuple[float, ...] = tuple(MODEL_STATE_BOX.lo)
    state_box_hi: tuple[float, ...] = tuple(MODEL_STATE_BOX.hi)
    input_box_lo: tuple[float, ...] = tuple(MODEL_INPUT_BOX.lo)
    input_box_hi: tuple[float, ...] = tuple(MODEL_INPUT_BOX.hi)

    def __post_init__(self) -> None:
        if self.kind not in ("integrator", "quadrotor_like"):
            raise ValueError(f"unknown world kind: {self.kind!r}")
        if self.time_dilation < 1:
            raise ValueError("time_dilation must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.kind == "quadrotor_like":
            if self.tracking_time_constant <= 0 or self.mass <= 0:
                raise ValueError("tracking_time_constant and mass must be positive")

    @property
    def sim(self) -> SimModel:
        return SimModel(
            Box(self.state_box_lo, self.state_box_hi),
            Box(self.input_box_lo, self.input_box_hi),
            self.dt,
        )

    @property
    def settling_time(self) -> float:
        """Time for the inner velocity loop to settle within 2%."""
        return 4.0 * self.tracking_time_constant

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "time_dilation": self.time_dilation,
            "dt": self.dt,
            "initial_position": list(self.initial_position),
            "fields": [field_to_dict(f) for f in self.fields],
            "tracking_time_constant": self.tracking_time_constant,
            "mass": self.mass,
            "max_accel": self.max_accel,
            "safety_inflation": self.safety_inflation,
            "state_box_lo": list(self.state_box_lo),
            "state_box_hi": list(self.state_box_hi),
            "input_box_lo": list(self.input_box_lo),
            "input_box_hi": list(self.input_box_hi),
        }

    @staticmethod
    def from_dict(payload: dict) -> "WorldConfig":
        kwargs = dict(payload)
        kwargs["fields"] = tuple(field_from_dict(f) for f in payload.get("fields", ()))
        for key in (
            "initial_position",
            "state_box_lo",
            "state_box_hi",
            "input_box_lo",
            "input_box_hi",
        ):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return WorldConfig(**kwargs)


def build_integrator_world(
    config: WorldConfig | None = None, seed: int = 0, stream_id: int = 0
) -> World:
    """Matched pair: the true system IS the single integrator, the
    projection is the identity and the extension passes the model input
    through.  With no fields the disturbance norm is identically zero."""
    cfg = config or WorldConfig(kind="integrator")
    if cfg.kind != "integrator":
        cfg = replace(cfg, kind="integrator")
    sim = cfg.sim

    def step(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        return x + u * dt

    true_system = TrueSystem(state_dim=3, input_dim=3, step=step)
    maps = SystemMaps(
        project=lambda x: x[:3].copy(),
        extend=lambda u_hat, x: u_hat,
        time_dilation=cfg.time_dilation,
    )
    initial = np.asarray(cfg.initial_position, dtype=float)
    return World(
        true_system,
        maps,
        sim,
        cfg.fields,
        rng_stream(seed, stream_id),
        initial,
        sim.state_box.inflate(cfg.safety_inflation),
        config=cfg,
    )


def build_quadrotor_like_world(
    config: WorldConfig | None = None, seed: int = 0, stream_id: int = 0
) -> World:
    """Desk-scale stand-in for a velocity-commanded rotorcraft: a
    double-integrator true system whose input extension is an inner-loop
    P controller driving true velocity toward the commanded model input
    with the configured tracking time constant."""
    cfg = config or WorldConfig(kind="quadrotor_like")
    if cfg.kind != "quadrotor_like":
        cfg = replace(cfg, kind="quadrotor_like")
    sim = cfg.sim
    tau = cfg.tracking_time_constant
    mass = cfg.mass
    max_accel = cfg.max_accel

    def step(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
        nxt = x.copy()
        nxt[:3] += x[3:] * dt
        nxt[3:] += u * dt
        return nxt

    def extend(u_hat: np.ndarray, x: np.ndarray) -> np.ndarray:
        force = (mass / tau) * (u_hat - x[3:])
        accel = force / mass
        if max_accel is not None:
            accel = np.clip(accel, -max_accel, max_accel)
        return accel

    true_system = TrueSystem(state_dim=6, input_dim=3, step=step)
    maps = SystemMaps(
        project=lambda x: x[:3].copy(),
        extend=extend,
        time_dilation=cfg.time_dilation,
    )
    initial = np.concatenate([np.asarray(cfg.initial_position, dtype=float), np.zeros(3)])
    return World(
        true_system,
        maps,
        sim,
        cfg.fields,
        rng_stream(seed, stream_id),
        initial,
        sim.state_box.inflate(cfg.safety_inflation),
        config=cfg,
    )


def build_world(config: WorldConfig, seed: int = 0, stream_id: int = 0) -> World:
    if config.kind == "integrator":
        return build_integrator_world(config, seed, stream_id)
    return build_quadrotor_like_world(config, seed, stream_id)


def probe_norm_samples(
    config: WorldConfig,
    x_hat: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized disturbance-norm samples at a model state, hover probe.

    Starts ``n_samples`` independent copies of the true system at the given
    model state with zero velocity, holds a zero model input for K inner
    steps, and returns the gap norms.  For integrator worlds this is exactly
    the per-state disturbance-norm distribution (the gap does not depend on
    the held input); for the quadrotor-like world it omits inner-loop
    tracking transients, so it is the at-rest disturbance content.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    dt = config.dt / config.time_dilation
    pos = np.broadcast_to(x_hat, (n_samples, 3)).copy()
    for _ in range(config.time_dilation):
        disp = np.zeros_like(pos)
        for f in config.fields:
            disp = disp + f.displacement(pos, dt, rng)
        pos = pos + disp
    return np.linalg.norm(pos - x_hat, axis=1)
