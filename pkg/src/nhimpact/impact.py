"""Collision detection and elastic impact resolution.

An elastic impact at a wall point ``q`` keeps ``q`` and maps ``p-`` to ``p+``
such that

* ``p+ - p-`` lies in ``(T dQ)° + Δ°`` (the span of ``db`` and the
  constraint forms),
* ``v+ = M^-1 p+`` satisfies the constraints, and
* the energy is unchanged.

Because ``v-`` already satisfies the constraints, the linear conditions
cut the jump down to a single direction ``w``; energy conservation is then
a quadratic in the coefficient along ``w`` whose roots are zero (no
impact) and one reflecting root.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constraints import RANK_RTOL, impact_subspaces, project_velocity
from .dynamics import step as lagrangian_step
from .errors import (
    EventLocalizationError,
    GrazingError,
    ImpactInfeasibleError,
    ZenoError,
)
from .model import Array, ImpactEvent, PontryaginState, SystemSpec, Tolerances, energy, legendre

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 128

Stepper = Callable[[PontryaginState, float], PontryaginState]


@dataclass(frozen=True)
class GuardEvaluation:
    q: Array
    b_value: float
    normal_speed: float
    active: bool


def evaluate_guard(spec: SystemSpec, s: PontryaginState, tol: Tolerances = Tolerances()) -> GuardEvaluation:
    """Guard: on the wall and moving outward (``db(q) . v > 0``)."""
    bval = spec.b(s.q)
    ns = float(spec.db(s.q) @ s.v)
    return GuardEvaluation(s.q, bval, ns, abs(bval) <= tol.boundary and ns > 0)


def normalized_normal_speed(spec: SystemSpec, q: Array, v: Array) -> float:
    db = spec.db(q)
    vmax = float(np.max(np.abs(v))) if np.size(v) else 0.0
    if vmax == 0.0:
        return 0.0
    v = np.asarray(v) / vmax  # guards |v|^2 against underflow
    scale = np.linalg.norm(db) * np.linalg.norm(v)
    return float(db @ v) / scale if scale > 0 else 0.0


def snap_to_boundary(spec: SystemSpec, s: PontryaginState) -> PontryaginState:
    """One Newton correction of ``q`` along ``db``, then re-project ``v``."""
    db = spec.db(s.q)
    q = s.q - spec.b(s.q) * db / float(db @ db)
    v = project_velocity(spec, q, s.v)
    return PontryaginState(s.t, q, v, legendre(spec, q, v))


def locate_crossing(spec: SystemSpec, s_before: PontryaginState, s_after: PontryaginState,
                    tol_t: float, stepper: Optional[Stepper] = None,
                    tol: Tolerances = Tolerances()):
    """Time and state at which the step ``s_before -> s_after`` meets the wall.

    Bisects on the sub-step length, re-integrating from ``s_before`` with
    ``stepper`` each time, until the bracket is narrower than ``tol_t``.
    """
    if stepper is None:
        def stepper(s, h):
            return lagrangian_step(spec, s, h, tol).state

    b_lo = spec.b(s_before.q)
    b_hi = spec.b(s_after.q)
    if not (b_lo < 0 <= b_hi):
        raise EventLocalizationError(
            f"no boundary crossing bracketed in [{s_before.t}, {s_after.t}] "
            f"(b={b_lo:.3e} -> {b_hi:.3e})"
        )
    lo, hi = 0.0, s_after.t - s_before.t
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= tol_t:
            break
        mid = 0.5 * (lo + hi)
        if spec.b(stepper(s_before, mid).q) < 0:
            lo = mid
        else:
            hi = mid
    else:
        raise EventLocalizationError(f"bisection did not converge near t={s_before.t + hi}")
    dt = 0.5 * (lo + hi)
    s_star = snap_to_boundary(spec, stepper(s_before, dt))
    if abs(spec.b(s_star.q)) > tol.boundary:
        raise EventLocalizationError(
            f"could not place the state on the boundary: b={spec.b(s_star.q):.3e}"
        )
    return s_star.t, s_star


def impact_quadratic(spec: SystemSpec, q: Array, p_pre: Array, p_base: Array, w: Array):
    """Coefficients ``(a2, a1, a0)`` of ``E(p_base + s w) - E(p_pre)`` as a polynomial in ``s``.

    The potential term cancels since ``q`` does not jump. ``a0`` vanishes
    whenever ``p_base = p_pre``, i.e. whenever ``v-`` satisfies the constraints.
    """
    M = spec.M(q)
    minv_w = np.linalg.solve(M, w)
    v_base = np.linalg.solve(M, p_base)
    v_pre = np.linalg.solve(M, p_pre)
    a0 = 0.5 * float(p_base @ v_base) - 0.5 * float(p_pre @ v_pre)
    return 0.5 * float(w @ minv_w), float(w @ v_base), a0


def resolve_impact(spec: SystemSpec, s_pre: PontryaginState, tol: Tolerances = Tolerances()) -> ImpactEvent:
    q, v_pre, p_pre = s_pre.q, s_pre.v, s_pre.p
    sub = impact_subspaces(spec, q, tol.boundary)
    db = sub.boundary_annihilator[0]
    speed = normalized_normal_speed(spec, q, v_pre)
    if speed <= tol.graze:
        raise GrazingError(
            f"grazing contact at t={s_pre.t}: normalized normal speed {speed:.3e} "
            f"<= {tol.graze:.1e}; no reflecting branch",
            state=s_pre,
        )

    M = spec.M(q)
    mu = spec.mu(q)
    B = sub.jump_basis
    # the conditions are homogeneous of degree one in (v, p): solve at unit scale
    c = float(np.max(np.abs(p_pre)))
    v_pre, p_pre = v_pre / c, p_pre / c
    # constraint on v+ = M^-1 (p- + B^T lam): mu M^-1 B^T lam = -mu v- (= 0 on-shell)
    C = mu @ np.linalg.solve(M, B.T)
    k = B.shape[0]
    if C.shape[0]:
        _, sv, vt = np.linalg.svd(C)
        rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size else 0
        free = vt[rank:]
        lam_p = np.linalg.lstsq(C, -(mu @ v_pre), rcond=None)[0]
    else:
        free = np.eye(k)
        lam_p = np.zeros(k)
    if free.shape[0] != 1:
        raise ImpactInfeasibleError(
            f"jump family has dimension {free.shape[0]} instead of 1 at q={q}"
        )
    d = free[0]
    p_base = p_pre + lam_p @ B
    w = d @ B

    a2, a1, a0 = impact_quadratic(spec, q, p_pre, p_base, w)
    disc = a1 * a1 - 4 * a2 * a0
    if a2 <= 0 or disc < 0:
        raise ImpactInfeasibleError(f"energy condition has no real root at t={s_pre.t}")
    sq = np.sqrt(disc)
    # cancellation-free pair of roots
    qq = -0.5 * (a1 + np.copysign(sq, a1))
    roots = [qq / a2, a0 / qq if qq != 0 else 0.0]
    candidates = []
    for s in roots:
        lam = lam_p + s * d
        if np.max(np.abs(lam)) <= 1e-12:
            continue  # identity map
        p_post = p_base + s * w
        v_post = np.linalg.solve(M, p_post)
        if float(db @ v_post) < 0:
            candidates.append((s, lam, p_post, v_post))
    if not candidates:
        raise ImpactInfeasibleError(
            f"no nontrivial inward solution of the impact conditions at t={s_pre.t} (roots {roots})"
        )
    if len(candidates) > 1:
        # keep the branch that reverses the normal speed most strongly, as at head-on incidence
        candidates.sort(key=lambda cand: float(db @ cand[3]))
        logger.info("two admissible impact branches at t=%s; keeping s=%s", s_pre.t, candidates[0][0])
    _, lam, p_post, v_post = candidates[0]
    v_pre, p_pre = s_pre.v, s_pre.p
    p_post, v_post = c * p_post, c * v_post

    post = PontryaginState(s_pre.t, q, v_post, p_post)
    e_pre, e_post = energy(spec, s_pre), energy(spec, post)
    dp = p_post - p_pre
    residuals = {
        "boundary": abs(spec.b(q)),
        "energy": abs(e_post - e_pre),
        "energy_relative": abs(e_post - e_pre) / max(1.0, abs(e_pre)),
        "jump": float(np.max(np.abs(dp - (dp @ B.T) @ B))),
        "constraint": float(np.max(np.abs(mu @ v_post))) if mu.size else 0.0,
        "normal_speed_pre": float(db @ v_pre),
        "normal_speed_post": float(db @ v_post),
    }
    # coefficients on the natural spanning set (db, mu^1, ..., mu^m)
    natural = np.vstack([db[None, :], mu])
    multipliers = np.linalg.lstsq(natural.T, dp, rcond=None)[0]
    return ImpactEvent(s_pre.t, q.copy(), s_pre, post, multipliers, residuals)


def zeno_guard(events, window: float, max_impacts: int, trajectory=None) -> bool:
    """True unless some window of length ``window`` holds more than ``max_impacts`` events."""
    times = [e.t_impact for e in events]
    j = 0
    for i in range(len(times)):
        while times[i] - times[j] > window:
            j += 1
        if i - j + 1 > max_impacts:
            raise ZenoError(
                f"{i - j + 1} impacts within {window} time units "
                f"(t={times[j]}..{times[i]}), limit {max_impacts}",
                trajectory=trajectory,
                events=list(events),
            )
    return True
