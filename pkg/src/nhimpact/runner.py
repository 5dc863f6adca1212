"""Simulation orchestration, config ingestion and file output."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dynamics
from .errors import (
    ConfigError,
    GeometryError,
    GrazingError,
    NHImpactError,
    NumericalError,
    OutputError,
    SpecificationError,
    StepRejectedError,
)
from .hamiltonian import equivalence_check, pontryagin_stepper
from .impact import (
    locate_crossing,
    normalized_normal_speed,
    resolve_impact,
    zeno_guard,
)
from .model import (
    PontryaginState,
    SystemSpec,
    Tolerances,
    Trajectory,
    energy,
    state_from_qv,
)
from .scenarios import ScenarioSpec, get_scenario

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "NHIMPACT_OUTPUT_DIR"
MAX_STEP_HALVINGS = 20
# residual bounds re-checked before an event is written out
EVENT_RESIDUAL_BOUND = 1e-9

FORMULATIONS = ("lagrangian", "hamiltonian")


@dataclass
class OutputSettings:
    trajectory: Optional[str] = None
    events: Optional[str] = None
    stride: int = 1
    wrap_angles: bool = False


@dataclass
class SimConfig:
    scenario: str
    parameters: dict = field(default_factory=dict)
    initial_q: Optional[list] = None
    initial_v: Optional[list] = None
    t0: float = 0.0
    t1: float = 1.0
    h: float = 1e-3
    tolerances: Tolerances = field(default_factory=Tolerances)
    max_impacts: int = 100
    zeno_window: Optional[float] = None
    formulation: str = "lagrangian"
    outputs: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ConfigError(f"t1 must exceed t0 (got t0={self.t0}, t1={self.t1})")
        if not self.h > 0:
            raise ConfigError(f"step h must be positive, got {self.h}")
        if int(self.max_impacts) != self.max_impacts or self.max_impacts < 0:
            raise ConfigError(f"max_impacts must be a nonnegative integer, got {self.max_impacts}")
        if self.zeno_window is None:
            self.zeno_window = self.t1 - self.t0
        if not self.zeno_window > 0:
            raise ConfigError(f"zeno_window must be positive, got {self.zeno_window}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if (self.initial_q is None) != (self.initial_v is None):
            raise ConfigError("initial needs both q and v")
        if int(self.outputs.stride) != self.outputs.stride or self.outputs.stride < 1:
            raise ConfigError(f"outputs.stride must be a positive integer, got {self.outputs.stride}")


_TOP_KEYS = {"scenario", "initial", "t0", "t1", "h", "tolerances", "max_impacts",
             "zeno_window", "formulation", "outputs"}


def _reject_unknown(section: str, data: dict, allowed: set) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a JSON object")
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {sorted(extra)}")


def _number(section: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{section} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def config_from_dict(data: dict) -> SimConfig:
    """Strict parse: unknown keys anywhere are an error."""
    _reject_unknown("config", data, _TOP_KEYS)
    if "scenario" not in data or "t1" not in data:
        raise ConfigError("config needs at least 'scenario' and 't1'")
    sc = data["scenario"]
    _reject_unknown("scenario", sc, {"name", "parameters"})
    if "name" not in sc:
        raise ConfigError("scenario.name is required")
    params = sc.get("parameters", {})
    _reject_unknown("scenario.parameters", params, set(params))
    params = {k: _number(f"scenario.parameters.{k}", v) for k, v in params.items()}
    if "n" in params:
        params["n"] = _number("scenario.parameters.n", params["n"], int)

    init = data.get("initial")
    q0 = v0 = None
    if init is not None:
        _reject_unknown("initial", init, {"q", "v"})
        if "q" not in init or "v" not in init:
            raise ConfigError("initial needs both q and v")
        q0 = [_number("initial.q", x) for x in init["q"]]
        v0 = [_number("initial.v", x) for x in init["v"]]

    tol_data = data.get("tolerances", {})
    _reject_unknown("tolerances", tol_data, {"constraint", "legendre", "boundary", "t", "graze"})
    try:
        tol = Tolerances(**{k: _number(f"tolerances.{k}", v) for k, v in tol_data.items()})
    except SpecificationError as exc:
        raise ConfigError(str(exc)) from None

    out_data = data.get("outputs", {})
    _reject_unknown("outputs", out_data, {"trajectory", "events", "stride", "wrap_angles"})
    outputs = OutputSettings(
        trajectory=out_data.get("trajectory"),
        events=out_data.get("events"),
        stride=_number("outputs.stride", out_data.get("stride", 1), int),
        wrap_angles=bool(out_data.get("wrap_angles", False)),
    )
    zw = data.get("zeno_window")
    return SimConfig(
        scenario=sc["name"],
        parameters=params,
        initial_q=q0,
        initial_v=v0,
        t0=_number("t0", data.get("t0", 0.0)),
        t1=_number("t1", data["t1"]),
        h=_number("h", data.get("h", 1e-3)),
        tolerances=tol,
        max_impacts=_number("max_impacts", data.get("max_impacts", 100), int),
        zeno_window=None if zw is None else _number("zeno_window", zw),
        formulation=data.get("formulation", "lagrangian"),
        outputs=outputs,
    )


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data)


def prepare(config: SimConfig):
    """Build the scenario and the initial state, checking every precondition."""
    scenario = get_scenario(config.scenario, config.parameters)
    spec = scenario.system
    tol = config.tolerances
    if config.initial_q is not None:
        try:
            s0 = state_from_qv(spec, config.t0, config.initial_q, config.initial_v)
        except SpecificationError as exc:
            raise ConfigError(f"initial state: {exc}") from None
    else:
        d = scenario.default_initial
        s0 = PontryaginState(config.t0, d.q, d.v, d.p)
    spec.validate_at(s0.q, tol.boundary)
    if spec.b(s0.q) > tol.boundary:
        raise ConfigError(f"initial configuration lies outside the region: b(q0)={spec.b(s0.q):.3e}")
    if spec.n_constraints:
        r = float(np.max(np.abs(spec.mu(s0.q) @ s0.v)))
        if r > tol.constraint:
            raise ConfigError(f"initial velocity violates the constraints (residual {r:.3e})")
    return scenario, spec, s0


def make_stepper(spec: SystemSpec, formulation: str, tol: Tolerances):
    if formulation == "hamiltonian":
        return pontryagin_stepper(spec, tol)

    def _step(s, h):
        return dynamics.step(spec, s, h, tol).state

    return _step


def _guarded_step(stepper, s: PontryaginState, h: float) -> PontryaginState:
    for _ in range(MAX_STEP_HALVINGS):
        try:
            return stepper(s, h)
        except StepRejectedError:
            h *= 0.5
            logger.debug("step rejected at t=%s, retrying with h=%s", s.t, h)
    raise StepRejectedError(f"step rejected {MAX_STEP_HALVINGS} times at t={s.t}")


def run_simulation(config: SimConfig, formulation: Optional[str] = None) -> Trajectory:
    """Integrate smooth arcs and resolve every impact until ``config.t1``.

    Each arc ends with the located pre-impact state and the following arc
    starts with the post-impact state at the same time. Errors raised
    mid-run carry the partial trajectory in ``exc.trajectory``.
    """
    formulation = formulation or config.formulation
    scenario, spec, s = prepare(config)
    tol = config.tolerances
    stepper = make_stepper(spec, formulation, tol)
    traj = Trajectory()
    arc = [s]

    def impact(s_pre):
        nonlocal arc
        event = resolve_impact(spec, s_pre, tol)
        traj.events.append(event)
        traj.arcs.append(arc)
        arc = [event.post]
        zeno_guard(traj.events, config.zeno_window, config.max_impacts, trajectory=traj)
        return event.post

    try:
        if abs(spec.b(s.q)) <= tol.boundary:
            speed = normalized_normal_speed(spec, s.q, s.v)
            if speed > tol.graze:
                s = impact(s)
            elif speed >= -tol.graze:
                raise GrazingError(
                    f"initial state touches the boundary tangentially "
                    f"(normalized normal speed {speed:.3e})",
                    state=s,
                )
        t_end = config.t1
        eps = 1e-12 * max(1.0, abs(t_end))
        while t_end - s.t > eps:
            h = min(config.h, t_end - s.t)
            new = _guarded_step(stepper, s, h)
            b_old, b_new = spec.b(s.q), spec.b(new.q)
            if b_old < 0 <= b_new:
                _, s_star = locate_crossing(spec, s, new, tol.t, stepper=stepper, tol=tol)
                arc.append(s_star)
                s = impact(s_star)
            elif b_new > tol.boundary:
                raise GeometryError(f"trajectory left the admissible region at t={new.t} (b={b_new:.3e})")
            else:
                arc.append(new)
                s = new
    except NHImpactError as exc:
        if exc.trajectory is None:
            exc.trajectory = traj
        if arc and (not traj.arcs or traj.arcs[-1] is not arc):
            traj.arcs.append(arc)
        raise
    traj.arcs.append(arc)
    return traj


def resolve_output_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _wrap(angle: float) -> float:
    w = math.remainder(angle, 2 * math.pi)
    return math.pi if w == -math.pi else w


def trajectory_rows(spec: SystemSpec, traj: Trajectory, stride: int = 1, angle_indices=()):
    for arc in traj.arcs:
        last = len(arc) - 1
        for i, s in enumerate(arc):
            if i % stride and i != last:
                continue
            q = [float(x) for x in s.q]
            for k in angle_indices:
                q[k] = _wrap(q[k])
            yield [s.t, *q, *map(float, s.v), *map(float, s.p), energy(spec, s)]


def write_trajectory(spec: SystemSpec, traj: Trajectory, path, stride: int = 1,
                     angle_indices=()) -> Path:
    """CSV with header ``t,q1..qn,v1..vn,p1..pn,E``; floats in shortest round-trip form."""
    n = spec.dim
    header = ["t", *(f"q{i}" for i in range(1, n + 1)), *(f"v{i}" for i in range(1, n + 1)),
              *(f"p{i}" for i in range(1, n + 1)), "E"]
    path = resolve_output_path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in trajectory_rows(spec, traj, stride, angle_indices):
                w.writerow([repr(float(x)) for x in row])
    except OSError as exc:
        raise OutputError(f"cannot write trajectory to {path}: {exc}") from None
    return path


def read_trajectory(path) -> dict:
    """Parse a trajectory CSV back into float arrays keyed by column group."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = (len(header) - 2) // 3
    data = np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))
    return {
        "t": data[:, 0],
        "q": data[:, 1:1 + n],
        "v": data[:, 1 + n:1 + 2 * n],
        "p": data[:, 1 + 2 * n:1 + 3 * n],
        "E": data[:, -1],
        "header": header,
    }


def check_event_residuals(event, tol: Tolerances = Tolerances()) -> None:
    r = event.residuals
    problems = []
    if r["boundary"] > tol.boundary:
        problems.append(f"boundary {r['boundary']:.3e}")
    if r["energy_relative"] > EVENT_RESIDUAL_BOUND:
        problems.append(f"energy {r['energy_relative']:.3e}")
    for key in ("jump", "constraint"):
        if r[key] > EVENT_RESIDUAL_BOUND:
            problems.append(f"{key} {r[key]:.3e}")
    if not r["normal_speed_post"] < 0:
        problems.append("post-impact velocity not inward")
    if problems:
        raise NumericalError(f"impact at t={event.t_impact} fails validation: {', '.join(problems)}")


def event_record(event) -> dict:
    return {
        "t": float(event.t_impact),
        "q": [float(x) for x in event.q_impact],
        "p_pre": [float(x) for x in event.pre.p],
        "p_post": [float(x) for x in event.post.p],
        "v_pre": [float(x) for x in event.pre.v],
        "v_post": [float(x) for x in event.post.v],
        "multipliers": [float(x) for x in event.multipliers],
        "residuals": {k: float(v) for k, v in event.residuals.items()},
    }


def write_events(traj: Trajectory, path, tol: Tolerances = Tolerances()) -> Path:
    for ev in traj.events:
        check_event_residuals(ev, tol)
    path = resolve_output_path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump([event_record(ev) for ev in traj.events], fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write events to {path}: {exc}") from None
    return path


def write_outputs(config: SimConfig, scenario: ScenarioSpec, spec: SystemSpec, traj: Trajectory) -> list:
    written = []
    out = config.outputs
    angles = scenario.angle_indices if out.wrap_angles else ()
    if out.trajectory:
        written.append(write_trajectory(spec, traj, out.trajectory, out.stride, angles))
    if out.events:
        written.append(write_events(traj, out.events, config.tolerances))
    return written


def compare_formulations(config: SimConfig) -> dict:
    """Run both formulations from the same initial data and compare them."""
    _, spec, _ = prepare(config)
    traj_l = run_simulation(config, "lagrangian")
    traj_h = run_simulation(config, "hamiltonian")
    deviation = equivalence_check(spec, traj_l, traj_h)
    table = [
        {
            "t_lagrangian": ev_l.t_impact,
            "t_hamiltonian": ev_h.t_impact,
            "dt": abs(ev_l.t_impact - ev_h.t_impact),
            "p_post_deviation": float(np.max(np.abs(ev_l.post.p - ev_h.post.p))),
        }
        for ev_l, ev_h in zip(traj_l.events, traj_h.events)
    ]
    return {
        "deviation": deviation,
        "events": table,
        "n_samples": len(traj_l),
        "trajectories": (traj_l, traj_h),
    }
