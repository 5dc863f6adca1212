"""Constraint distribution, its annihilator, and the impact jump subspace.

All bases are built from SVDs, so they are orthonormal but otherwise
arbitrary; nothing downstream may depend on the particular basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, RankDropError
from .model import Array, SystemSpec, Tolerances

# singular values below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-9


@dataclass(frozen=True)
class DistributionBasis:
    q: Array
    tangent_basis: Array  # n x (n - m), columns span the allowed velocities
    annihilator_basis: Array  # m x n, rows are the constraint one-forms


@dataclass(frozen=True)
class ImpactSubspaces:
    q: Array
    boundary_annihilator: Array  # 1 x n
    jump_basis: Array  # k x n, orthonormal rows
    admissible_tangent: Array  # n x (n - k), orthonormal columns


def _null_space(A: Array, expected_rank: int) -> Array:
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(A)
    if s.size < expected_rank or s[expected_rank - 1] <= RANK_RTOL * s[0]:
        raise RankDropError(f"rank below {expected_rank} (singular values {s})")
    return vt[expected_rank:].T


def distribution_at(spec: SystemSpec, q) -> DistributionBasis:
    q = spec.check_q(q)
    mu = spec.mu(q)
    try:
        T = _null_space(mu, spec.n_constraints)
    except RankDropError as exc:
        raise RankDropError(f"constraint forms at q={q}: {exc}") from None
    return DistributionBasis(q=q, tangent_basis=T, annihilator_basis=mu)


def project_velocity(spec: SystemSpec, q, v) -> Array:
    """M(q)-orthogonal projection of ``v`` onto the allowed velocities."""
    q = spec.check_q(q)
    v = spec.check_q(v)
    if spec.n_constraints == 0:
        return v.copy()
    T = distribution_at(spec, q).tangent_basis
    M = spec.M(q)
    coeffs = np.linalg.solve(T.T @ M @ T, T.T @ (M @ v))
    return T @ coeffs


def impact_subspaces(spec: SystemSpec, q, tol_boundary: float = Tolerances.boundary) -> ImpactSubspaces:
    """Jump subspace ``(T dQ)° + Δ°`` and its annihilated tangent space at a wall point.

    Raises GeometryError when ``q`` is off the wall, the wall is singular
    there, or the distribution is not transversal to the wall (``db`` in the
    span of the constraint forms), in which case the jump subspace would
    not be complemented by a one-dimensional normal direction.
    """
    q = spec.check_q(q)
    bval = spec.b(q)
    if abs(bval) > tol_boundary:
        raise GeometryError(f"q is not on the boundary: b(q)={bval:.3e}")
    db = spec.db(q)
    if not np.any(db) or np.linalg.norm(db) < RANK_RTOL:
        raise GeometryError(f"degenerate boundary: db(q)=0 at q={q}")
    mu = spec.mu(q)
    stack = np.vstack([db[None, :], mu])
    _, s, vt = np.linalg.svd(stack)
    k = int(np.sum(s > RANK_RTOL * s[0]))
    m = spec.n_constraints
    if k < m:
        raise RankDropError(f"constraint forms lose rank at boundary point q={q}")
    if k == m:
        raise GeometryError(
            f"distribution not transversal to the boundary at q={q}: db lies in the span of mu"
        )
    return ImpactSubspaces(
        q=q,
        boundary_annihilator=db[None, :],
        jump_basis=vt[:k],
        admissible_tangent=vt[k:].T,
    )
