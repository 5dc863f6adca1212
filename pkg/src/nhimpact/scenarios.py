"""Built-in systems with analytic derivatives.

``disk``: a vertical disk rolling without slipping on the plane, heading
angle ``phi``, rotation angle ``theta``, contact point ``(x, y)``, and a wall
at ``y + R sin(phi) = wall``.

``bouncing_particle``: unit-mass particle in R^n, no constraints, wall at
``q_1 = wall``, optional uniform field of strength ``g`` pushing toward the
wall (so that it keeps bouncing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SpecificationError
from .model import PontryaginState, SystemSpec, state_from_qv


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    parameters: dict
    build: Callable[[dict], SystemSpec]
    default_initial: PontryaginState
    golden: list = field(default_factory=list)
    angle_indices: tuple = ()

    @property
    def system(self) -> SystemSpec:
        return self.build(self.parameters)


def _build_disk(params: dict) -> SystemSpec:
    m, I, J, R, wall = (float(params[k]) for k in ("m", "I", "J", "R", "wall"))
    M = np.diag([m, m, I, J])
    dM = np.zeros((4, 4, 4))

    def mu(q):
        c, s = math.cos(q[3]), math.sin(q[3])
        return np.array([[1.0, 0.0, -R * c, 0.0], [0.0, 1.0, -R * s, 0.0]])

    def dmu(q):
        c, s = math.cos(q[3]), math.sin(q[3])
        d = np.zeros((2, 4, 4))
        d[0, 2, 3] = R * s
        d[1, 2, 3] = -R * c
        return d

    return SystemSpec(
        dim=4,
        mass_matrix=lambda q: M,
        potential=lambda q: 0.0,
        constraint_forms=mu,
        boundary_fn=lambda q: q[1] + R * math.sin(q[3]) - wall,
        boundary_gradient=lambda q: np.array([0.0, 1.0, 0.0, R * math.cos(q[3])]),
        n_constraints=2,
        mass_matrix_derivative=lambda q: dM,
        potential_gradient=lambda q: np.zeros(4),
        constraint_derivative=dmu,
        name="disk",
    )


def disk_rolling_velocity(q, v_theta: float, v_phi: float, R: float = 1.0) -> np.ndarray:
    """Velocity compatible with rolling without slipping at heading ``q[3]``."""
    phi = q[3]
    return np.array([R * v_theta * math.cos(phi), R * v_theta * math.sin(phi), v_theta, v_phi])


def disk_scenario(m: float = 1.0, I: float = 1.0, J: float = 1.0, R: float = 1.0,
                  wall: float = 10.0) -> ScenarioSpec:
    params = {"m": m, "I": I, "J": J, "R": R, "wall": wall}
    for key in ("m", "I", "J", "R"):
        if not params[key] > 0:
            raise SpecificationError(f"disk parameter {key} must be positive, got {params[key]}")
    spec = _build_disk(params)
    q0 = np.array([0.0, 0.0, 0.0, math.pi / 2])
    if not spec.b(q0) < 0:
        raise SpecificationError(f"wall={wall} leaves the default start outside the region")
    s0 = state_from_qv(spec, 0.0, q0, disk_rolling_velocity(q0, 1.0, 0.0, R))
    golden = [
        (
            "orthogonal impact at phi=pi/2: p_x, p_phi kept, p_y and p_theta flipped",
            golden_disk_orthogonal_impact(params, s0.p),
            1e-9,
        )
    ]
    return ScenarioSpec("disk", params, _build_disk, s0, golden, angle_indices=(2, 3))


def golden_disk_orthogonal_impact(params: dict, p_pre) -> np.ndarray:
    """Post-impact momentum for a disk meeting the wall head-on (phi = pi/2)."""
    p_pre = np.asarray(p_pre, dtype=float)
    return np.array([0.0, -p_pre[1], -p_pre[2], p_pre[3]])


def _build_particle(params: dict) -> SystemSpec:
    n = int(params["n"])
    wall, g = float(params["wall"]), float(params["g"])
    eye = np.eye(n)
    db = np.zeros(n)
    db[0] = 1.0
    grad = -g * db
    return SystemSpec(
        dim=n,
        mass_matrix=lambda q: eye,
        potential=lambda q: -g * q[0],
        constraint_forms=lambda q: np.zeros((0, n)),
        boundary_fn=lambda q: q[0] - wall,
        boundary_gradient=lambda q: db,
        n_constraints=0,
        mass_matrix_derivative=lambda q: np.zeros((n, n, n)),
        potential_gradient=lambda q: grad,
        name="bouncing_particle",
    )


def bouncing_particle_scenario(n: int = 1, wall: float = 1.0, g: float = 0.0) -> ScenarioSpec:
    if int(n) != n or n < 1:
        raise SpecificationError(f"particle dimension must be a positive integer, got {n}")
    params = {"n": int(n), "wall": wall, "g": g}
    spec = _build_particle(params)
    q0 = np.zeros(int(n))
    if not spec.b(q0) < 0:
        raise SpecificationError(f"wall={wall} must be positive so that the origin is interior")
    v0 = np.zeros(int(n))
    v0[0] = 1.0
    return ScenarioSpec("bouncing_particle", params, _build_particle, state_from_qv(spec, 0.0, q0, v0))


SCENARIOS = {
    "disk": disk_scenario,
    "bouncing_particle": bouncing_particle_scenario,
}


def get_scenario(name: str, parameters: dict | None = None) -> ScenarioSpec:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise SpecificationError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None
    try:
        return factory(**(parameters or {}))
    except TypeError as exc:
        raise SpecificationError(f"bad parameters for scenario {name!r}: {exc}") from None
