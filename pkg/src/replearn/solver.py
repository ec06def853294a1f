"""Allocation programs behind the regret complexity measures.

The feasible set ``{eta : I_eta(phi, x, a) >= 1 for all triples}`` is an
intersection of half-spaces in ``eta``: for any ``theta`` in the alternative
half-space of a triple, ``sum eta * 1/2 (f - F theta)^2 >= I_eta``. The solver
is Kelley's cutting-plane method: solve a linear master over the cuts found so
far, ask the half-space oracle for violated triples at the master solution,
and add the cut generated by the oracle's minimizer.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from .checks import DEFAULT_REALIZABLE_TOL, check_sublog, is_realizable, realizable_mask
from .errors import InfeasibleAtCap, NotFullyRealizable, Unrealizable
from .halfspace import DEFAULT_DELTA_MARGIN, constraint_direction, halfspace_from_fit
from .linalg import DEFAULT_RANK_TOL, WeightedFit
from .model import (Allocation, BanditInstance, GapTable, Representation, as_rep_set,
                    compute_gaps, optimal_policy_allocation)

log = logging.getLogger(__name__)

TIE_MARGIN = 1e-12


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    TOLERANCE_REACHED = "ToleranceReached"
    ITERATION_CAP = "IterationCap"


@dataclass(frozen=True)
class SolverOptions:
    eps_feas: float = 1e-4
    eps_obj: float = 1e-6
    max_iters: int = 2000
    M: float = 1e8
    rank_tol: float = DEFAULT_RANK_TOL
    delta_margin: float = DEFAULT_DELTA_MARGIN
    realizable_tol: float = DEFAULT_REALIZABLE_TOL
    enum_budget: int = 4096
    # "most": one cut per iteration (most violated triple); "violated": one per violated triple
    cut_rule: str = "violated"

    def __post_init__(self):
        for name in ("eps_feas", "eps_obj", "M", "rank_tol", "delta_margin",
                     "realizable_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_iters < 1 or self.enum_budget < 1:
            raise ValueError("max_iters and enum_budget must be positive")
        if self.cut_rule not in ("most", "violated"):
            raise ValueError("cut_rule must be 'most' or 'violated'")


@dataclass
class ComplexitySolution:
    value: float
    allocation: Allocation
    constraint_slacks: dict
    status: Status
    iterations: int
    M_used: float
    lower_bound: float = 0.0
    near_zero: bool = False
    notes: dict = field(default_factory=dict)

    def recompute_value(self, gaps: GapTable) -> float:
        return float(np.sum(self.allocation.eta * gaps.gaps))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower_bound": self.lower_bound,
            "status": self.status.value,
            "iterations": self.iterations,
            "M_used": self.M_used,
            "near_zero": self.near_zero,
            "allocation": self.allocation.eta.tolist(),
            "constraint_slacks": [
                {"rep": k[0], "x": k[1], "a": k[2], "I": v}
                for k, v in self.constraint_slacks.items()
            ],
            "notes": self.notes,
        }


class _Program:
    """A set of (representation, x, a) constraints over one instance."""

    def __init__(self, instance: BanditInstance, reps, triples, opts: SolverOptions):
        self.instance = instance
        self.reps = list(reps)
        self.gaps = compute_gaps(instance)
        self.opts = opts
        self.f = instance.f
        self.triples = sorted(triples)
        self.by_rep: dict[int, list[int]] = {}
        self.dirs = []
        for k, (i, x, a) in enumerate(self.triples):
            self.by_rep.setdefault(i, []).append(k)
            self.dirs.append(constraint_direction(self.reps[i], self.gaps, x, a))
        self.cost = self.gaps.gaps.reshape(-1)
        self.opt_mask = self.gaps.optimal_mask().reshape(-1)

    def evaluate(self, eta: np.ndarray):
        """Constraint values and oracle minimizers at a flat allocation."""
        values = np.empty(len(self.triples))
        minimizers = [None] * len(self.triples)
        for i, ks in self.by_rep.items():
            fit = WeightedFit(self.reps[i].matrix, eta, self.f, self.opts.rank_tol)
            for k in ks:
                res = halfspace_from_fit(fit, self.dirs[k], self.opts.delta_margin)
                values[k] = res.value
                minimizers[k] = res.minimizer
        return values, minimizers

    def cut(self, k: int, theta: np.ndarray) -> np.ndarray:
        i = self.triples[k][0]
        r = self.f - self.reps[i].matrix @ theta
        return 0.5 * r * r

    def slacks(self, values) -> dict:
        return {(self.reps[i].name, x, a): float(v)
                for (i, x, a), v in zip(self.triples, values)}


def _master(cost, opt_mask, cuts, M):
    n = cost.shape[0]
    bounds = [(0.0, M) if o else (0.0, None) for o in opt_mask]
    if not cuts:
        return np.zeros(n), 0.0
    A = -np.vstack(cuts)
    b = -np.ones(len(cuts))
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleAtCap(f"no allocation satisfies the cuts with optimal-arm mass <= {M:g}")
    if res.status != 0:
        raise RuntimeError(f"master LP failed: {res.message}")
    return np.maximum(res.x, 0.0), float(res.fun)


def _cutting_plane(prog: _Program, opts: SolverOptions) -> ComplexitySolution:
    shape = prog.instance.shape
    n = prog.cost.shape[0]
    M = opts.M
    cuts: list[np.ndarray] = []
    if not prog.triples:
        eta = np.where(prog.opt_mask, 0.0, 0.0)
        return ComplexitySolution(0.0, Allocation(eta.reshape(shape), M), {}, Status.OPTIMAL,
                                  0, M)

    # seed with cuts at the uniform allocation and at the optimal policy
    for seed in (np.ones(n), prog.opt_mask.astype(float)):
        vals, mins = prog.evaluate(seed)
        for k in range(len(prog.triples)):
            cuts.append(prog.cut(k, mins[k]))

    lp_value = 0.0
    prev_lp = None
    stall = 0
    it = 0
    eta = np.zeros(n)
    vals = np.zeros(len(prog.triples))
    status = Status.ITERATION_CAP
    for it in range(1, opts.max_iters + 1):
        eta, lp_value = _master(prog.cost, prog.opt_mask, cuts, M)
        vals, mins = prog.evaluate(eta)
        worst = float(vals.min())
        if worst >= 1.0 - opts.eps_feas:
            status = Status.OPTIMAL
            break
        if prev_lp is not None and abs(lp_value - prev_lp) <= opts.eps_obj * max(abs(lp_value), 1e-12):
            stall += 1
        else:
            stall = 0
        prev_lp = lp_value
        if opts.cut_rule == "most":
            chosen = [int(np.flatnonzero(vals <= worst + TIE_MARGIN)[0])]
        else:
            chosen = [int(k) for k in np.flatnonzero(vals < 1.0 - opts.eps_feas)]
        added = 0
        for k in chosen:
            c = prog.cut(k, mins[k])
            if float(c @ eta) < 1.0 - 1e-12:
                cuts.append(c)
                added += 1
        if not added:
            log.warning("oracle produced no separating cut at iteration %d", it)
            status = Status.TOLERANCE_REACHED
            break

    if status is not Status.OPTIMAL:
        worst = float(vals.min())
        if worst > 0:
            # constraint values are positively homogeneous in eta
            eta = eta / min(worst, 1.0)
            vals, _ = prog.evaluate(eta)

    alloc = Allocation(eta.reshape(shape), M)
    value = float(np.sum(eta * prog.cost))
    return ComplexitySolution(
        value=value,
        allocation=alloc,
        constraint_slacks=prog.slacks(vals),
        status=status,
        iterations=it,
        M_used=M,
        lower_bound=lp_value,
    )


def _flag_near_zero(sol: ComplexitySolution, instance, reps, opts: SolverOptions):
    gaps = compute_gaps(instance)
    sol.near_zero = sol.value < 10 * opts.eps_feas * gaps.max_gap
    if sol.near_zero:
        try:
            sol.notes["sublog_condition_holds"] = check_sublog(instance, reps, opts.realizable_tol).holds
        except Unrealizable:
            sol.notes["sublog_condition_holds"] = None


def all_triples(reps, gaps: GapTable) -> list[tuple[int, int, int]]:
    return [(i, x, a) for i in range(len(reps)) for x, a in gaps.suboptimal_pairs()]


def solve_replearn(instance: BanditInstance, reps, opts: SolverOptions = SolverOptions()
                   ) -> ComplexitySolution:
    """Complexity of learning ``instance`` knowing only that one representation
    in ``reps`` is realizable."""
    reps = as_rep_set(reps)
    reps.check_compatible(instance)
    if not any(realizable_mask(instance, reps, opts.realizable_tol)):
        raise Unrealizable("no representation in the set realizes the rewards")
    gaps = compute_gaps(instance)
    prog = _Program(instance, reps, all_triples(reps, gaps), opts)
    sol = _cutting_plane(prog, opts)
    _flag_near_zero(sol, instance, reps, opts)
    return sol


def solve_clb(instance: BanditInstance, rep: Representation,
              opts: SolverOptions = SolverOptions()) -> ComplexitySolution:
    """Complexity with a single known realizable representation. Also reports
    ``gap^2 / ||z||^2_{V^dagger}`` per suboptimal pair at the solution."""
    ok, _, _ = is_realizable(instance, rep, opts.realizable_tol)
    if not ok:
        raise Unrealizable(f"representation {rep.name!r} is misspecified")
    sol = solve_replearn(instance, [rep], opts)
    gaps = compute_gaps(instance)
    fit = WeightedFit(rep.matrix, sol.allocation.flat, instance.f, opts.rank_tol)
    audit = {}
    for x, a in gaps.suboptimal_pairs():
        z = constraint_direction(rep, gaps, x, a)
        nz = fit.vdag_norm2(z) if fit.contains(z) else np.inf
        audit[f"{x},{a}"] = float(gaps.gaps[x, a] ** 2 / nz) if nz > 0 else np.inf
    sol.notes["closed_form_ratios"] = audit
    return sol


def solve_unstructured(instance: BanditInstance) -> float:
    """Sum of ``2 / gap`` over suboptimal pairs."""
    gaps = compute_gaps(instance)
    return float(sum(2.0 / gaps.gaps[x, a] for x, a in gaps.suboptimal_pairs()))


def _solve_assignment(instance, reps, gaps, assignment, opts):
    triples = [(assignment[p], x, a) for p, (x, a) in enumerate(gaps.suboptimal_pairs())]
    return _cutting_plane(_Program(instance, reps, triples, opts), opts)


def solve_fully_realizable(instance: BanditInstance, reps,
                           opts: SolverOptions = SolverOptions()) -> ComplexitySolution:
    """Complexity when every representation is known to be realizable.

    Each suboptimal pair may be certified by a different representation, so
    the feasible set is a union of convex sets, one per assignment of pairs to
    representations. Assignments are enumerated when there are at most
    ``opts.enum_budget`` of them; otherwise a greedy assignment is improved by
    single-pair moves and the status is ``ToleranceReached``.
    """
    reps = as_rep_set(reps)
    reps.check_compatible(instance)
    for rep, ok in zip(reps, realizable_mask(instance, reps, opts.realizable_tol)):
        if not ok:
            raise NotFullyRealizable(f"representation {rep.name!r} is misspecified")
    gaps = compute_gaps(instance)
    subopt = gaps.suboptimal_pairs()
    n_reps = len(reps)
    if not subopt:
        return _solve_assignment(instance, reps, gaps, (), opts)

    total = n_reps ** len(subopt)
    if total <= opts.enum_budget:
        best, best_assign = None, None
        for assign in itertools.product(range(n_reps), repeat=len(subopt)):
            try:
                sol = _solve_assignment(instance, reps, gaps, assign, opts)
            except InfeasibleAtCap:
                continue
            if best is None or sol.value < best.value - TIE_MARGIN:
                best, best_assign = sol, assign
        if best is None:
            raise InfeasibleAtCap("no assignment is feasible under the optimal-arm cap")
        searched = total
    else:
        uniform = np.ones(instance.num_contexts * instance.num_arms)
        fits = [WeightedFit(r.matrix, uniform, instance.f, opts.rank_tol) for r in reps]
        assign = []
        for x, a in subopt:
            scores = [halfspace_from_fit(fits[i], constraint_direction(reps[i], gaps, x, a)).value
                      for i in range(n_reps)]
            assign.append(int(np.argmax(scores)))
        best_assign = tuple(assign)
        best = _solve_assignment(instance, reps, gaps, best_assign, opts)
        searched = 1
        improved = True
        while improved and searched < opts.enum_budget:
            improved = False
            for p in range(len(subopt)):
                for i in range(n_reps):
                    if i == best_assign[p] or searched >= opts.enum_budget:
                        continue
                    cand = best_assign[:p] + (i,) + best_assign[p + 1:]
                    searched += 1
                    try:
                        sol = _solve_assignment(instance, reps, gaps, cand, opts)
                    except InfeasibleAtCap:
                        continue
                    if sol.value < best.value - TIE_MARGIN:
                        best, best_assign, improved = sol, cand, True
        best.status = Status.TOLERANCE_REACHED

    best.notes["assignment"] = {f"{x},{a}": reps[i].name
                                for (x, a), i in zip(subopt, best_assign)}
    best.notes["assignments_searched"] = searched
    best.constraint_slacks = fr_slacks(instance, reps, best.allocation, opts)
    return best


def fr_slacks(instance, reps, alloc: Allocation, opts: SolverOptions) -> dict:
    from .halfspace import fr_term

    gaps = compute_gaps(instance)
    fits = [WeightedFit(r.matrix, alloc.flat, instance.f, opts.rank_tol) for r in reps]
    out = {}
    for x, a in gaps.suboptimal_pairs():
        out[("max", x, a)] = float(max(
            fr_term(fit, constraint_direction(r, gaps, x, a), gaps.gaps[x, a])
            for r, fit in zip(reps, fits)))
    return out


@dataclass
class FeasibilityReport:
    entries: list
    eps_feas: float

    @property
    def feasible(self) -> bool:
        return all(v >= 1.0 - self.eps_feas for *_, v in self.entries)

    @property
    def min_value(self) -> float:
        return min((v for *_, v in self.entries), default=np.inf)


def check_feasible(instance: BanditInstance, reps, alloc: Allocation, family: str = "replearn",
                   opts: SolverOptions = SolverOptions()) -> FeasibilityReport:
    """Constraint values of ``alloc``; one entry per (rep, x, a) or, for the
    fully realizable family, per (x, a) with the best representation."""
    reps = as_rep_set(reps)
    reps.check_compatible(instance)
    if family == "replearn":
        gaps = compute_gaps(instance)
        prog = _Program(instance, reps, all_triples(reps, gaps), opts)
        vals, _ = prog.evaluate(alloc.flat)
        entries = [(reps[i].name, x, a, float(v)) for (i, x, a), v in zip(prog.triples, vals)]
    elif family == "fr":
        for rep, ok in zip(reps, realizable_mask(instance, reps, opts.realizable_tol)):
            if not ok:
                raise NotFullyRealizable(f"representation {rep.name!r} is misspecified")
        entries = [(k[0], k[1], k[2], v) for k, v in fr_slacks(instance, reps, alloc, opts).items()]
    else:
        raise ValueError(f"unknown family {family!r}")
    return FeasibilityReport(entries, opts.eps_feas)


def with_cap(opts: SolverOptions, M: float) -> SolverOptions:
    return replace(opts, M=M)
