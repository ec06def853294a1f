"""Structural conditions on representation sets.

All conditions are exact-arithmetic statements; the tolerances here are the
bridge to floating point and every one of them is a keyword argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotFullyRealizable, Unrealizable
from .linalg import DEFAULT_RANK_TOL, in_image, weighted_fit
from .model import (Allocation, BanditInstance, Representation, as_rep_set, compute_gaps,
                    feature_gap, optimal_policy_allocation)

DEFAULT_REALIZABLE_TOL = 1e-9
POSITIVITY_TOL = 1e-9


@dataclass
class ConditionReport:
    witnesses: list = field(default_factory=list)
    numeric_margins: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.witnesses

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witnesses": [list(w) if isinstance(w, tuple) else w
                                                    for w in self.witnesses],
                "numeric_margins": self.numeric_margins}


def _scale(instance: BanditInstance) -> float:
    return max(1.0, float(instance.f @ instance.f))


def is_realizable(instance: BanditInstance, rep: Representation,
                  tol: float = DEFAULT_REALIZABLE_TOL):
    """Fit ``f*`` with uniform weights; realizable iff the residual is within
    ``tol * ||f*||^2``. Returns ``(realizable, residual, theta)``."""
    alloc = Allocation(np.ones(instance.shape))
    fit = weighted_fit(rep, alloc, instance.rewards, DEFAULT_RANK_TOL)
    bound = tol * max(float(instance.f @ instance.f), 1e-300)
    return fit.misspec <= bound, fit.misspec, fit.theta


def realizable_mask(instance, reps, tol: float = DEFAULT_REALIZABLE_TOL) -> list[bool]:
    return [is_realizable(instance, r, tol)[0] for r in as_rep_set(reps)]


def check_hls(instance: BanditInstance, rep: Representation,
              tol: float = DEFAULT_RANK_TOL) -> ConditionReport:
    """Suboptimal features must lie in the span of the optimal-arm features."""
    gaps = compute_gaps(instance)
    X = instance.num_contexts
    opt = rep.features[np.arange(X), gaps.optimal_arm]
    gram = opt.T @ opt
    report = ConditionReport()
    for x, a in gaps.suboptimal_pairs():
        if not in_image(gram, rep.features[x, a], tol):
            report.witnesses.append((rep.name, x, a))
    report.numeric_margins["optimal_feature_rank"] = int(np.linalg.matrix_rank(opt)) if X else 0
    return report


def check_sublog(instance: BanditInstance, reps, tol: float = DEFAULT_REALIZABLE_TOL,
                 rank_tol: float = DEFAULT_RANK_TOL) -> ConditionReport:
    """Zero-complexity condition: every representation that fits ``f*`` exactly on
    optimal pairs must certify every suboptimal pair using optimal-arm data only."""
    reps = as_rep_set(reps)
    if not any(realizable_mask(instance, reps, tol)):
        raise Unrealizable("no realizable representation in the set")
    gaps = compute_gaps(instance)
    eta_star = optimal_policy_allocation(instance)
    report = ConditionReport()
    for rep in reps:
        fit = weighted_fit(rep, eta_star, instance.rewards, rank_tol)
        report.numeric_margins[f"{rep.name}.mse_opt"] = fit.misspec
        if fit.misspec > tol * _scale(instance):
            continue
        for x, a in gaps.suboptimal_pairs():
            z = feature_gap(rep, gaps, x, a)
            est_gap = float(z @ fit.theta)
            thresh = POSITIVITY_TOL * np.linalg.norm(fit.theta) * np.linalg.norm(z)
            if not est_gap > thresh:
                report.witnesses.append((rep.name, x, a, "estimated gap not positive"))
            if not fit.contains(rep.features[x, a]):
                report.witnesses.append((rep.name, x, a, "feature outside optimal design"))
    return report


def check_sublog_fr(instance: BanditInstance, reps, tol: float = DEFAULT_REALIZABLE_TOL,
                    rank_tol: float = DEFAULT_RANK_TOL) -> ConditionReport:
    """Fully realizable variant: each pair needs one certifying representation."""
    reps = as_rep_set(reps)
    for rep, ok in zip(reps, realizable_mask(instance, reps, tol)):
        if not ok:
            raise NotFullyRealizable(f"representation {rep.name!r} is misspecified")
    gaps = compute_gaps(instance)
    eta_star = optimal_policy_allocation(instance)
    fits = [weighted_fit(rep, eta_star, instance.rewards, rank_tol) for rep in reps]
    report = ConditionReport()
    certifiers = {}
    for x, a in gaps.suboptimal_pairs():
        names = [rep.name for rep, fit in zip(reps, fits)
                 if fit.contains(feature_gap(rep, gaps, x, a))]
        certifiers[f"{x},{a}"] = names
        if not names:
            report.witnesses.append((x, a))
    report.numeric_margins["certifiers"] = certifiers
    return report


def check_detectability(instance: BanditInstance, reps, eps_threshold: float,
                        tol: float = DEFAULT_REALIZABLE_TOL) -> ConditionReport:
    """Unique realizable representation, all others visibly wrong under the
    optimal policy by at least ``eps_threshold`` in squared error."""
    reps = as_rep_set(reps)
    mask = realizable_mask(instance, reps, tol)
    eta_star = optimal_policy_allocation(instance)
    report = ConditionReport()
    n_real = sum(mask)
    if n_real != 1:
        report.witnesses.append(("realizable_count", n_real))
    for rep, ok in zip(reps, mask):
        mse = weighted_fit(rep, eta_star, instance.rewards).misspec
        report.numeric_margins[rep.name] = mse
        if not ok and mse < eps_threshold:
            report.witnesses.append((rep.name, "undetectable under optimal policy", mse))
    return report
