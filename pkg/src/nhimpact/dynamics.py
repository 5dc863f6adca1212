"""Smooth motion between impacts.

The implicit Euler-Lagrange system is reduced to multiplier form

    M(q) a = dL/dq - (dM/dt) v + mu(q)^T lam,
    mu(q) a = -(d mu/dt) v,

(the second line is the velocity constraint differentiated once) and
integrated with classical RK4 on ``(q, v)``. After every step the velocity
is projected back onto the constraint distribution and the momentum is
recomputed through the Legendre transform, so accepted states lie on the
Legendre graph and satisfy the constraints to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import project_velocity
from .errors import ConstraintDegeneracyError, SpecificationError, StepRejectedError
from .model import Array, PontryaginState, SystemSpec, Tolerances, energy, legendre

# relative residual above which a saddle solve is treated as degenerate
SADDLE_RTOL = 1e-10


@dataclass(frozen=True)
class SmoothStepResult:
    state: PontryaginState
    multipliers: Array
    energy: float
    residuals: dict


def _force_terms(spec: SystemSpec, q: Array, v: Array):
    """Right-hand sides of the saddle system (without the multiplier term)."""
    dM = spec.dM(q)
    dL_dq = 0.5 * np.einsum("ijk,i,j->k", dM, v, v) - spec.grad_V(q)
    mdot_v = np.einsum("ijk,j,k->i", dM, v, v)
    hidden = -np.einsum("aik,i,k->a", spec.dmu(q), v, v)
    return dL_dq - mdot_v, hidden


def _saddle_solve(spec: SystemSpec, q: Array, v: Array):
    n, m = spec.dim, spec.n_constraints
    M = spec.M(q)
    f, g = _force_terms(spec, q, v)
    if m == 0:
        return np.linalg.solve(M, f), np.zeros(0)
    mu = spec.mu(q)
    K = np.zeros((n + m, n + m))
    K[:n, :n] = M
    K[:n, n:] = -mu.T
    K[n:, :n] = mu
    rhs = np.concatenate([f, g])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise ConstraintDegeneracyError(f"singular saddle matrix at q={q}") from None
    scale = np.abs(K).max() * np.abs(sol).max() + np.abs(rhs).max()
    if not np.all(np.isfinite(sol)) or np.abs(K @ sol - rhs).max() > SADDLE_RTOL * scale:
        raise ConstraintDegeneracyError(f"ill-conditioned saddle matrix at q={q}")
    return sol[:n], sol[n:]


def constrained_acceleration(spec: SystemSpec, q, v, tol_constraint: float | None = None):
    """Acceleration and constraint-force multipliers ``(a, lam)`` at ``(q, v)``.

    The reaction force is ``mu(q)^T lam``. If ``tol_constraint`` is given, ``v``
    must already satisfy the constraints to that tolerance.
    """
    q = spec.check_q(q)
    v = spec.check_q(v)
    if tol_constraint is not None and spec.n_constraints:
        r = np.max(np.abs(spec.mu(q) @ v))
        if r > tol_constraint:
            raise SpecificationError(f"velocity violates constraints (residual {r:.3e})")
    return _saddle_solve(spec, q, v)


def _rk4(spec: SystemSpec, q: Array, v: Array, h: float):
    def f(q_, v_):
        return v_, _saddle_solve(spec, q_, v_)[0]

    k1q, k1v = f(q, v)
    k2q, k2v = f(q + 0.5 * h * k1q, v + 0.5 * h * k1v)
    k3q, k3v = f(q + 0.5 * h * k2q, v + 0.5 * h * k2v)
    k4q, k4v = f(q + h * k3q, v + h * k3v)
    q_new = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
    v_new = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return q_new, v_new


def step(spec: SystemSpec, s: PontryaginState, h: float, tol: Tolerances = Tolerances()) -> SmoothStepResult:
    """Advance one RK4 step of length ``h`` and restore the constraints."""
    if not h > 0:
        raise SpecificationError(f"step size must be positive, got {h}")
    q1, v1 = _rk4(spec, s.q, s.v, h)
    mu1 = spec.mu(q1)
    drift = float(np.max(np.abs(mu1 @ v1))) if spec.n_constraints else 0.0
    if drift > 10 * tol.constraint:
        raise StepRejectedError(f"constraint drift {drift:.3e} at t={s.t + h}", drift=drift)
    v1 = project_velocity(spec, q1, v1)
    p1 = legendre(spec, q1, v1)
    new = PontryaginState(s.t + h, q1, v1, p1)
    residuals = {
        "constraint": float(np.max(np.abs(mu1 @ v1))) if spec.n_constraints else 0.0,
        "constraint_before_projection": drift,
        "legendre": float(np.max(np.abs(p1 - spec.M(q1) @ v1))),
    }
    if residuals["constraint"] > 10 * tol.constraint or residuals["legendre"] > 10 * tol.legendre:
        raise StepRejectedError(f"residuals out of tolerance at t={new.t}: {residuals}")
    _, lam = _saddle_solve(spec, q1, v1)
    return SmoothStepResult(new, lam, energy(spec, new), residuals)


def integrate(spec: SystemSpec, s0: PontryaginState, t1: float, h: float,
              tol: Tolerances = Tolerances()) -> list:
    """Plain fixed-step integration to ``t1`` with no event handling."""
    arc = [s0]
    s = s0
    while t1 - s.t > 1e-12 * max(1.0, abs(t1)):
        s = step(spec, s, min(h, t1 - s.t), tol).state
        arc.append(s)
    return arc


def energy_monitor(spec: SystemSpec, arc) -> float:
    """Largest deviation of the energy from its initial value along ``arc``."""
    arc = list(arc)
    if not arc:
        raise SpecificationError("energy_monitor needs a nonempty arc")
    e0 = energy(spec, arc[0])
    return max(abs(energy(spec, s) - e0) for s in arc)
