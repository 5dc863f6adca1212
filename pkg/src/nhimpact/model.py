"""Core objects: system description, Pontryagin-bundle states, impact events.

A system is given in a single global chart by a mechanical Lagrangian
``L(q, v) = 1/2 v^T M(q) v - V(q)``, a set of linear velocity constraints
``mu(q) v = 0`` (rows of ``mu`` are one-forms) and a boundary function
``b(q)`` whose zero level set is the wall; the admissible region is
``b(q) <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    BlowUpError,
    GeometryError,
    RankDropError,
    SingularMetricError,
    SpecificationError,
)

Array = np.ndarray

FD_REL_STEP = 1e-6
# cond(M) above this is treated as singular
MAX_METRIC_CONDITION = 1e12


@dataclass(frozen=True)
class Tolerances:
    constraint: float = 1e-8
    legendre: float = 1e-10
    boundary: float = 1e-9
    t: float = 1e-10
    graze: float = 1e-8

    def __post_init__(self):
        for name in ("constraint", "legendre", "boundary", "t", "graze"):
            if not getattr(self, name) > 0:
                raise SpecificationError(f"tolerance {name!r} must be positive")


def _fd_step(q: Array) -> float:
    return FD_REL_STEP * max(1.0, float(np.max(np.abs(q)))) if q.size else FD_REL_STEP


def _central_difference(fn: Callable[[Array], Array], q: Array) -> Array:
    """Stack of partials ``d fn / d q_k`` along a trailing axis."""
    h = _fd_step(q)
    cols = []
    for k in range(q.size):
        e = np.zeros_like(q)
        e[k] = h
        cols.append((np.asarray(fn(q + e), float) - np.asarray(fn(q - e), float)) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class SystemSpec:
    """Mechanical system with linear nonholonomic constraints and a wall.

    Derivative callables are optional; when absent, central finite
    differences are used. Shapes:

    * ``mass_matrix_derivative(q)[i, j, k] = dM_ij / dq_k``
    * ``constraint_derivative(q)[a, i, k] = d mu^a_i / dq_k``
    """

    dim: int
    mass_matrix: Callable[[Array], Array]
    potential: Callable[[Array], float]
    constraint_forms: Callable[[Array], Array]
    boundary_fn: Callable[[Array], float]
    boundary_gradient: Callable[[Array], Array]
    n_constraints: int = 0
    mass_matrix_derivative: Optional[Callable[[Array], Array]] = None
    potential_gradient: Optional[Callable[[Array], Array]] = None
    constraint_derivative: Optional[Callable[[Array], Array]] = None
    name: str = "system"

    def __post_init__(self):
        if not (isinstance(self.dim, (int, np.integer)) and self.dim > 0):
            raise SpecificationError(f"dim must be a positive integer, got {self.dim!r}")
        if not 0 <= self.n_constraints < self.dim:
            raise SpecificationError(
                f"need 0 <= n_constraints < dim, got {self.n_constraints} and {self.dim}"
            )

    def check_q(self, q) -> Array:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise SpecificationError(f"expected a {self.dim}-vector, got shape {q.shape}")
        return q

    def M(self, q: Array) -> Array:
        return np.asarray(self.mass_matrix(q), dtype=float).reshape(self.dim, self.dim)

    def V(self, q: Array) -> float:
        return float(self.potential(q))

    def mu(self, q: Array) -> Array:
        return np.asarray(self.constraint_forms(q), dtype=float).reshape(
            self.n_constraints, self.dim
        )

    def b(self, q: Array) -> float:
        return float(self.boundary_fn(q))

    def db(self, q: Array) -> Array:
        return np.asarray(self.boundary_gradient(q), dtype=float).reshape(self.dim)

    def dM(self, q: Array) -> Array:
        if self.mass_matrix_derivative is not None:
            return np.asarray(self.mass_matrix_derivative(q), dtype=float)
        return _central_difference(self.M, q)

    def grad_V(self, q: Array) -> Array:
        if self.potential_gradient is not None:
            return np.asarray(self.potential_gradient(q), dtype=float).reshape(self.dim)
        return _central_difference(lambda x: np.array(self.V(x)), q)

    def dmu(self, q: Array) -> Array:
        if self.n_constraints == 0:
            return np.zeros((0, self.dim, self.dim))
        if self.constraint_derivative is not None:
            return np.asarray(self.constraint_derivative(q), dtype=float)
        return _central_difference(self.mu, q)

    def validate_at(self, q, tol_boundary: float = Tolerances.boundary) -> None:
        """Check the structural invariants at ``q``; raise on violation."""
        q = self.check_q(q)
        M = self.M(q)
        if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
            raise SpecificationError(f"mass matrix not symmetric at q={q}")
        eig = np.linalg.eigvalsh(M)
        if eig[0] <= 0 or eig[-1] / eig[0] > MAX_METRIC_CONDITION:
            raise SingularMetricError(f"mass matrix not positive definite at q={q}")
        if self.n_constraints:
            s = np.linalg.svd(self.mu(q), compute_uv=False)
            if s[-1] <= 1e-9 * s[0]:
                raise RankDropError(f"constraint forms lose rank at q={q}")
        if abs(self.b(q)) <= tol_boundary and not np.any(self.db(q)):
            raise GeometryError(f"boundary gradient vanishes on the boundary at q={q}")


@dataclass(frozen=True)
class PontryaginState:
    """Point ``(q, v, p)`` of TQ + T*Q at time ``t``."""

    t: float
    q: Array
    v: Array
    p: Array

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        for name in ("q", "v", "p"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.q))
                and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.p))):
            raise BlowUpError(f"non-finite state at t={self.t}")


@dataclass(frozen=True)
class ImpactEvent:
    t_impact: float
    q_impact: Array
    pre: PontryaginState
    post: PontryaginState
    multipliers: Array
    residuals: dict


@dataclass
class Trajectory:
    """Smooth arcs separated by impacts; ``arcs[i]`` ends at ``events[i]``."""

    arcs: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def states(self):
        for arc in self.arcs:
            yield from arc

    def __len__(self):
        return sum(len(a) for a in self.arcs)


def lagrangian(spec: SystemSpec, q, v) -> float:
    q = spec.check_q(q)
    v = spec.check_q(v)
    return 0.5 * float(v @ spec.M(q) @ v) - spec.V(q)


def energy(spec: SystemSpec, s: PontryaginState) -> float:
    """``E = p . v - L(q, v)``, evaluated on the full Pontryagin triple."""
    return float(s.p @ s.v) - lagrangian(spec, s.q, s.v)


def legendre(spec: SystemSpec, q, v) -> Array:
    q = spec.check_q(q)
    v = spec.check_q(v)
    return spec.M(q) @ v


def legendre_inv(spec: SystemSpec, q, p) -> Array:
    q = spec.check_q(q)
    p = spec.check_q(p)
    M = spec.M(q)
    if np.linalg.cond(M) > MAX_METRIC_CONDITION:
        raise SingularMetricError(f"mass matrix singular to working precision at q={q}")
    return np.linalg.solve(M, p)


def state_from_qv(spec: SystemSpec, t: float, q, v) -> PontryaginState:
    """State on the Legendre graph: ``p = M(q) v``."""
    q = spec.check_q(q)
    v = spec.check_q(v)
    return PontryaginState(t, q, v, legendre(spec, q, v))


def state_from_qp(spec: SystemSpec, t: float, q, p) -> PontryaginState:
    q = spec.check_q(q)
    p = spec.check_q(p)
    return PontryaginState(t, q, legendre_inv(spec, q, p), p)
