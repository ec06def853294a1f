"""Closed-form minimization of the weighted squared loss over a half-space.

For weights ``eta``, features ``F`` and a direction ``z``::

    I = min_theta 1/2 ||f - F theta||^2_{D_eta}   s.t.   z^T theta >= 0

The minimum is half the misspecification of the unconstrained best fit
``theta*``, plus ``(z^T theta*)^2 / (2 ||z||^2_{V^dagger})`` when ``theta*``
violates the constraint and ``z`` lies in ``im(V)``. If ``z`` has a component
outside ``im(V)`` the constraint can be met for free by moving along it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotFullyRealizable, OptimalArmConstraint
from .linalg import DEFAULT_RANK_TOL, WeightedFit, weighted_fit
from .model import Allocation, BanditInstance, GapTable, Representation, compute_gaps

DEFAULT_DELTA_MARGIN = 1e-6


class Case(str, enum.Enum):
    VACUOUS_Z_ZERO = "VACUOUS_Z_ZERO"
    KERNEL_DIRECTION = "KERNEL_DIRECTION"
    UNCONSTRAINED_OPTIMUM = "UNCONSTRAINED_OPTIMUM"
    BOUNDARY_PROJECTION = "BOUNDARY_PROJECTION"


@dataclass(frozen=True)
class HalfspaceResult:
    value: float
    minimizer: np.ndarray
    case_tag: Case
    sub_optimality_term: float
    misspecification: float


def halfspace_from_fit(fit: WeightedFit, z: np.ndarray,
                       delta_margin: float = DEFAULT_DELTA_MARGIN) -> HalfspaceResult:
    """Solve the half-space problem given a precomputed weighted fit."""
    z = np.asarray(z, dtype=np.float64)
    theta = fit.theta
    base = 0.5 * fit.misspec
    if not np.any(z):
        return HalfspaceResult(base, theta.copy(), Case.VACUOUS_Z_ZERO, 0.0, fit.misspec)
    zt = float(z @ theta)
    if not fit.contains(z):
        if zt > 0:
            return HalfspaceResult(base, theta.copy(), Case.UNCONSTRAINED_OPTIMUM, 0.0, fit.misspec)
        # Moving along the kernel part leaves the weighted loss unchanged.
        u = fit.kernel_component(z)
        c = max(0.0, (delta_margin - zt) / float(u @ u))
        return HalfspaceResult(base, theta + c * u, Case.KERNEL_DIRECTION, 0.0, fit.misspec)
    if zt > 0:
        return HalfspaceResult(base, theta.copy(), Case.UNCONSTRAINED_OPTIMUM, 0.0, fit.misspec)
    nz = fit.vdag_norm2(z)
    assert nz > 0, "z in im(V) and nonzero must have positive V^dagger norm"
    c = zt * zt / nz
    minimizer = theta - (zt / nz) * fit.vdag(z)
    return HalfspaceResult(base + 0.5 * c, minimizer, Case.BOUNDARY_PROJECTION, c, fit.misspec)


def halfspace_min(rewards, rep: Representation, alloc: Allocation, z,
                  rank_tol: float = DEFAULT_RANK_TOL,
                  delta_margin: float = DEFAULT_DELTA_MARGIN) -> HalfspaceResult:
    fit = weighted_fit(rep, alloc, rewards, rank_tol)
    return halfspace_from_fit(fit, z, delta_margin)


def constraint_direction(rep: Representation, gaps: GapTable, x: int, a: int) -> np.ndarray:
    """``phi(x, a) - phi(x, pi*(x))``: the alternative half-space is ``z^T theta >= 0``."""
    if a == gaps.optimal_arm[x]:
        raise OptimalArmConstraint(f"arm {a} is optimal in context {x}")
    return rep.features[x, a] - rep.features[x, gaps.optimal_arm[x]]


def constraint_I(instance: BanditInstance, rep: Representation, alloc: Allocation,
                 x: int, a: int, rank_tol: float = DEFAULT_RANK_TOL,
                 delta_margin: float = DEFAULT_DELTA_MARGIN) -> HalfspaceResult:
    """Information collected by ``alloc`` against alternatives where ``a`` beats ``pi*(x)``
    under ``rep``. A feasible allocation needs value >= 1 for every triple."""
    gaps = compute_gaps(instance)
    z = constraint_direction(rep, gaps, x, a)
    return halfspace_min(instance.rewards, rep, alloc, z, rank_tol, delta_margin)


def fr_term(fit: WeightedFit, z: np.ndarray, gap: float) -> float:
    """``gap^2 1{z in im V} / (2 ||z||^2_{V^dagger})`` for a realizable fit."""
    if not fit.contains(z):
        return 0.0
    nz = fit.vdag_norm2(z)
    if nz == 0:
        return np.inf
    return gap * gap / (2.0 * nz)


def fr_constraint(instance: BanditInstance, reps, alloc: Allocation, x: int, a: int,
                  rank_tol: float = DEFAULT_RANK_TOL, realizable_tol: float = 1e-9) -> float:
    """Best certificate across representations, for fully realizable sets."""
    from .checks import is_realizable

    gaps = compute_gaps(instance)
    if a == gaps.optimal_arm[x]:
        raise OptimalArmConstraint(f"arm {a} is optimal in context {x}")
    best = 0.0
    for rep in reps:
        ok, _, _ = is_realizable(instance, rep, realizable_tol)
        if not ok:
            raise NotFullyRealizable(f"representation {rep.name!r} is misspecified")
        fit = weighted_fit(rep, alloc, instance.rewards, rank_tol)
        z = constraint_direction(rep, gaps, x, a)
        best = max(best, fr_term(fit, z, gaps.gaps[x, a]))
    return best
