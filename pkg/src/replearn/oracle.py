"""Brute-force complexity for tiny instances, used as an independent test oracle.

Nothing here touches the closed-form half-space solution: the inner problem
is solved by enumerating its KKT cases with ``numpy.linalg.lstsq`` and an exact
one-dimensional minimization along the constraint boundary, and the outer
problem by a direction grid, bisection on scale and pattern search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import OracleTooLarge, Unrealizable
from .model import BanditInstance, as_rep_set, compute_gaps

MAX_PAIRS = 6
MAX_DIM = 2
MAX_REPS = 3


@dataclass(frozen=True)
class GridSpec:
    levels: int | None = None  # per-coordinate grid size; chosen from the pair count if None
    low: float = 1e-3
    M: float = 1e8
    bisect_iters: int = 40
    refine_tol: float = 1e-3
    max_directions: int = 3000


def inner_min(f: np.ndarray, F: np.ndarray, eta: np.ndarray, z: np.ndarray) -> float:
    """``min 1/2 sum eta (f - F theta)^2`` subject to ``z^T theta >= 0``, for ``d <= 2``."""
    d = F.shape[1]
    sq = np.sqrt(eta)
    W = sq[:, None] * F
    y = sq * f
    theta, *_ = np.linalg.lstsq(W, y, rcond=None)
    r = y - W @ theta
    free = 0.5 * float(r @ r)
    if float(z @ theta) >= 0:
        return free
    # a null direction of W with a component along z reaches the half-space for free
    s = np.linalg.svd(W, compute_uv=False) if W.size else np.zeros(0)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > 1e-10 * smax)) if smax > 0 else 0
    if rank < d:
        _, _, vt = np.linalg.svd(W, full_matrices=True)
        null = vt[rank:]
        if np.linalg.norm(null @ z) > 1e-10 * np.linalg.norm(z):
            return free
    # otherwise the minimum lies on the boundary z^T theta = 0
    if d == 1:
        return 0.5 * float(y @ y)
    w = np.array([-z[1], z[0]])
    g = W @ w
    gg = float(g @ g)
    t = float(g @ y) / gg if gg > 0 else 0.0
    r = y - t * g
    return 0.5 * float(r @ r)


def _check_size(instance, reps):
    X, A = instance.shape
    if X * A > MAX_PAIRS or any(r.dim > MAX_DIM for r in reps) or len(reps) > MAX_REPS:
        raise OracleTooLarge(
            f"brute force needs X*A <= {MAX_PAIRS}, d <= {MAX_DIM}, |Phi| <= {MAX_REPS}; "
            f"got X*A = {X * A}, d = {max(r.dim for r in reps)}, |Phi| = {len(reps)}")


def brute_force_complexity(instance: BanditInstance, reps, grid: GridSpec = GridSpec()) -> float:
    """Smallest ``sum eta * gap`` found with every constraint ``I >= 1``.

    Optimal pairs get mass ``grid.M``; the constraint values are nondecreasing
    in every coordinate of ``eta``, so this never excludes a better point.
    """
    reps = as_rep_set(reps)
    reps.check_compatible(instance)
    _check_size(instance, reps)
    f = instance.f
    if not any(np.sum((f - r.matrix @ np.linalg.lstsq(r.matrix, f, rcond=None)[0]) ** 2)
               <= 1e-9 * max(float(f @ f), 1e-300) for r in reps):
        raise Unrealizable("no representation in the set realizes the rewards")
    gaps = compute_gaps(instance)
    A = instance.num_arms
    subopt = [x * A + a for x, a in gaps.suboptimal_pairs()]
    n = len(subopt)
    if n == 0:
        return 0.0
    cost = gaps.gaps.reshape(-1)[subopt]
    base = np.zeros(instance.num_contexts * A)
    base[[x * A + int(gaps.optimal_arm[x]) for x in range(instance.num_contexts)]] = grid.M
    cons = []
    for r in reps:
        F = r.matrix
        for x, a in gaps.suboptimal_pairs():
            cons.append((F, F[x * A + a] - F[x * A + int(gaps.optimal_arm[x])]))

    def feasible(u):
        eta = base.copy()
        eta[subopt] = u
        return all(inner_min(f, F, eta, z) >= 1.0 for F, z in cons)

    def scale(u):
        """Smallest ``s`` with ``s * u`` feasible, by doubling then bisection."""
        hi = 1.0
        for _ in range(80):
            if feasible(hi * u):
                break
            hi *= 2.0
        else:
            return np.inf
        lo = 0.0
        if hi > 1.0:
            lo = hi / 2.0
        elif feasible(0.0 * u):
            return 0.0
        for _ in range(grid.bisect_iters):
            mid = 0.5 * (lo + hi)
            if feasible(mid * u):
                hi = mid
            else:
                lo = mid
        return hi

    def objective(u):
        if not np.any(u):
            return 0.0 if feasible(u) else np.inf
        s = scale(u)
        return s * float(u @ cost)

    levels = grid.levels
    if levels is None:
        levels = max(2, int(np.floor(grid.max_directions ** (1.0 / n))) - 1)
    values = np.concatenate([[0.0], np.geomspace(grid.low, 1.0, levels)])
    best_u, best = None, np.inf
    for u in itertools.product(values, repeat=n):
        u = np.array(u)
        if u.max() < 1.0:  # scale-invariant: keep directions normalized
            continue
        v = objective(u)
        if v < best:
            best, best_u = v, u
    if best_u is None or not np.isfinite(best):
        return np.inf

    # pattern search in log coordinates, allowing coordinates to switch on or off
    h = 1.0
    while h > grid.refine_tol:
        improved = False
        for i in range(n):
            for cand in _moves(best_u, i, h, grid.low):
                v = objective(cand)
                if v < best * (1 - 1e-12):
                    best, best_u, improved = v, cand, True
        if not improved:
            h /= 2.0
    return float(best)


def _moves(u, i, h, low):
    out = []
    if u[i] > 0:
        for fac in (np.exp(h), np.exp(-h)):
            c = u.copy()
            c[i] *= fac
            out.append(c)
        c = u.copy()
        c[i] = 0.0
        out.append(c)
    else:
        c = u.copy()
        c[i] = low * u.max()
        out.append(c)
    return out
