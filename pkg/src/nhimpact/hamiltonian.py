"""Phase-space formulation for hyperregular systems.

The implicit Hamilton equations are integrated in multiplier form

    q' = dH/dp,   p' = -dH/dq + mu(q)^T lam,

with ``lam`` fixed by keeping ``mu(q) dH/dp = 0`` along the flow. This is
deliberately a separate code path from the Lagrangian integrator (it
solves for ``lam`` through the Schur complement ``mu M^-1 mu^T`` and
projects momenta rather than velocities), so agreement between the two is
a meaningful check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlowUpError,
    ConstraintDegeneracyError,
    SpecificationError,
    StepRejectedError,
    StructuralMismatchError,
)
from .model import (
    Array,
    PontryaginState,
    SystemSpec,
    Tolerances,
    Trajectory,
    legendre_inv,
)


@dataclass(frozen=True)
class HamiltonianState:
    t: float
    q: Array
    p: Array

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", np.array(self.q, dtype=float))
        object.__setattr__(self, "p", np.array(self.p, dtype=float))
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise BlowUpError(f"non-finite Hamiltonian state at t={self.t}")

    @classmethod
    def from_pontryagin(cls, s: PontryaginState) -> "HamiltonianState":
        return cls(s.t, s.q, s.p)

    def to_pontryagin(self, spec: SystemSpec) -> PontryaginState:
        return PontryaginState(self.t, self.q, legendre_inv(spec, self.q, self.p), self.p)


def hamiltonian(spec: SystemSpec, q, p) -> float:
    q = spec.check_q(q)
    p = spec.check_q(p)
    return 0.5 * float(p @ legendre_inv(spec, q, p)) + spec.V(q)


def _vector_field(spec: SystemSpec, q: Array, p: Array):
    M = spec.M(q)
    qdot = np.linalg.solve(M, p)  # dH/dp
    dM = spec.dM(q)
    dH_dq = -0.5 * np.einsum("ijk,i,j->k", dM, qdot, qdot) + spec.grad_V(q)
    if spec.n_constraints == 0:
        return qdot, -dH_dq, np.zeros(0)
    mu = spec.mu(q)
    minv_mut = np.linalg.solve(M, mu.T)
    schur = mu @ minv_mut
    mdot_qdot = np.einsum("ijk,j,k->i", dM, qdot, qdot)
    rhs = mu @ np.linalg.solve(M, dH_dq + mdot_qdot) - np.einsum(
        "aik,i,k->a", spec.dmu(q), qdot, qdot
    )
    try:
        lam = np.linalg.solve(schur, rhs)
    except np.linalg.LinAlgError:
        raise ConstraintDegeneracyError(f"singular constraint Schur complement at q={q}") from None
    return qdot, -dH_dq + mu.T @ lam, lam


def project_momentum(spec: SystemSpec, q: Array, p: Array) -> Array:
    """Remove the part of ``p`` that makes ``dH/dp`` violate the constraints."""
    if spec.n_constraints == 0:
        return np.array(p, dtype=float)
    M = spec.M(q)
    mu = spec.mu(q)
    v = np.linalg.solve(M, p)
    schur = mu @ np.linalg.solve(M, mu.T)
    return p - mu.T @ np.linalg.solve(schur, mu @ v)


def hamiltonian_step(spec: SystemSpec, s: HamiltonianState, h: float,
                     tol: Tolerances = Tolerances()) -> HamiltonianState:
    if not h > 0:
        raise SpecificationError(f"step size must be positive, got {h}")
    q, p = s.q, s.p
    k1q, k1p, _ = _vector_field(spec, q, p)
    k2q, k2p, _ = _vector_field(spec, q + 0.5 * h * k1q, p + 0.5 * h * k1p)
    k3q, k3p, _ = _vector_field(spec, q + 0.5 * h * k2q, p + 0.5 * h * k2p)
    k4q, k4p, _ = _vector_field(spec, q + h * k3q, p + h * k3p)
    q1 = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
    p1 = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    if spec.n_constraints:
        mu1 = spec.mu(q1)
        drift = float(np.max(np.abs(mu1 @ np.linalg.solve(spec.M(q1), p1))))
        if drift > 10 * tol.constraint:
            raise StepRejectedError(f"constraint drift {drift:.3e} at t={s.t + h}", drift=drift)
        p1 = project_momentum(spec, q1, p1)
    return HamiltonianState(s.t + h, q1, p1)


def pontryagin_stepper(spec: SystemSpec, tol: Tolerances = Tolerances()):
    """Adapter so the event machinery can drive the Hamiltonian integrator."""

    def _step(s: PontryaginState, h: float) -> PontryaginState:
        return hamiltonian_step(spec, HamiltonianState.from_pontryagin(s), h, tol).to_pontryagin(spec)

    return _step


def _sample_deviation(a: PontryaginState, b: PontryaginState) -> float:
    return float(np.max(np.abs(a.q - b.q)) + np.max(np.abs(a.p - b.p)))


def equivalence_check(spec: SystemSpec, traj_L: Trajectory, traj_H: Trajectory,
                      time_tol: float = 1e-9) -> float:
    """Max of ``|q_L - q_H| + |p_L - p_H|`` over shared sample times and impacts.

    Samples are paired arc by arc by time; both runs must have been made
    with the same step size so that their sample grids coincide.
    """
    if len(traj_L.events) != len(traj_H.events) or len(traj_L.arcs) != len(traj_H.arcs):
        raise StructuralMismatchError(
            f"impact counts differ: {len(traj_L.events)} (Lagrangian) vs "
            f"{len(traj_H.events)} (Hamiltonian)"
        )
    worst = 0.0
    for arc_l, arc_h in zip(traj_L.arcs, traj_H.arcs):
        times_h = np.array([s.t for s in arc_h])
        matched = 0
        for s in arc_l:
            if times_h.size == 0:
                break
            j = int(np.searchsorted(times_h, s.t))
            j = min(range(max(j - 1, 0), min(j + 1, times_h.size)), key=lambda i: abs(times_h[i] - s.t))
            if abs(times_h[j] - s.t) <= time_tol:
                worst = max(worst, _sample_deviation(s, arc_h[j]))
                matched += 1
        if arc_l and matched == 0:
            raise StructuralMismatchError("arcs share no sample times")
    for ev_l, ev_h in zip(traj_L.events, traj_H.events):
        worst = max(worst, _sample_deviation(ev_l.pre, ev_h.pre), _sample_deviation(ev_l.post, ev_h.post))
    return worst
