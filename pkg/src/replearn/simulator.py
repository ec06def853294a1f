"""Monte-Carlo contextual bandits with unit-variance Gaussian noise.

Randomness comes from Philox streams keyed by ``(seed, stream_id)``: stream 0
draws contexts, stream 1 draws noise and stream 2 serves randomized
algorithms, each in fixed-size blocks. A run is therefore a pure function of
the instance, the configuration and the seed.

Regret is pseudo-regret: the gap-weighted play counts, evaluated from the
count table at every checkpoint.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ReplearnError
from .model import BanditInstance, RepresentationSet, as_rep_set, compute_gaps
from .solver import SolverOptions, solve_replearn

log = logging.getLogger(__name__)

BLOCK = 1 << 14
CONTEXT_STREAM, NOISE_STREAM, ALGO_STREAM = 0, 1, 2


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def kl_gaussian(f, f_prime, x: int, a: int) -> float:
    """Divergence between unit-variance Gaussians at pair ``(x, a)``."""
    diff = float(np.asarray(f)[x, a]) - float(np.asarray(f_prime)[x, a])
    return 0.5 * diff * diff


@dataclass(frozen=True)
class Environment:
    instance: BanditInstance
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    def streams(self):
        """Infinite iterators over contexts and noise draws."""
        X = self.instance.num_contexts
        rho = self.instance.rho
        ctx_rng = make_rng(self.rng_seed, CONTEXT_STREAM)
        noise_rng = make_rng(self.rng_seed, NOISE_STREAM)

        def contexts():
            while True:
                yield from ctx_rng.choice(X, size=BLOCK, p=rho).tolist()

        def noise():
            while True:
                yield from noise_rng.standard_normal(BLOCK).tolist()

        return contexts(), noise()


class Kind(str, enum.Enum):
    ORACLE = "Oracle"
    UNIFORM = "Uniform"
    TABULAR_UCB = "TabularUCB"
    LINUCB = "LinUCB"
    C_TRACKING = "CTracking"
    ELIMINATE_THEN_TRACK = "EliminateThenTrack"


@dataclass(frozen=True)
class AlgorithmConfig:
    """Algorithm choice and its knobs.

    ``rep`` names the representation used by LinUCB and by single-representation
    tracking; ``family`` selects the program that tracking re-solves.
    """

    kind: Kind = Kind.TABULAR_UCB
    reps: RepresentationSet | None = None
    rep: str | None = None
    family: str = "clb"
    ucb_width: float = 1.0
    reg: float = 1.0
    linucb_width: float = 1.0
    elim_c1: float = 2.0
    elim_delta: float = 0.01
    elim_every: int = 1
    resolve_period: int = 100
    resolve_growth: float = 2.0
    force_rate: float = 1.0
    solver: SolverOptions = SolverOptions(max_iters=300)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.reps is not None:
            object.__setattr__(self, "reps", as_rep_set(self.reps))
        for name in ("ucb_width", "reg", "linucb_width", "elim_c1", "force_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.elim_delta < 1:
            raise ValueError("elim_delta must lie in (0, 1)")
        if self.elim_every < 1 or self.resolve_period < 1 or not self.resolve_growth > 1:
            raise ValueError("elim_every, resolve_period >= 1 and resolve_growth > 1 required")
        if self.family not in ("clb", "replearn"):
            raise ValueError("family must be 'clb' or 'replearn'")
        needs_reps = self.kind in (Kind.LINUCB, Kind.C_TRACKING, Kind.ELIMINATE_THEN_TRACK)
        if needs_reps and (self.reps is None or len(self.reps) == 0):
            raise ValueError(f"{self.kind.value} needs representations")

    def single_rep(self):
        if self.rep is None:
            return self.reps[0]
        return self.reps.by_name(self.rep)


@dataclass
class RegretCurve:
    checkpoints: np.ndarray
    cumulative_regret: np.ndarray
    regret_over_logT: np.ndarray
    seed: int
    algorithm_id: str
    counts: np.ndarray
    reward_sum: float = 0.0
    elimination_times: dict = field(default_factory=dict)
    elimination_time: int | None = None  # step at which a single representation remained
    flags: list = field(default_factory=list)
    tracked_allocation: np.ndarray | None = None


class _Stats:
    def __init__(self, shape):
        self.n = np.zeros(shape, dtype=np.int64)
        self.s = np.zeros(shape)

    def add(self, x, a, r):
        self.n[x, a] += 1
        self.s[x, a] += r

    def means(self):
        return np.divide(self.s, self.n, out=np.zeros_like(self.s), where=self.n > 0)


def _weighted_fit(F, n, m):
    """Count-weighted least squares of pair means; returns (theta, residual)."""
    w = np.sqrt(n.reshape(-1).astype(np.float64))
    y = w * m.reshape(-1)
    W = w[:, None] * F
    theta, *_ = np.linalg.lstsq(W, y, rcond=None)
    r = y - W @ theta
    return theta, float(r @ r)


class _Policy:
    def select(self, t: int, x: int) -> int:
        raise NotImplementedError

    def update(self, t: int, x: int, a: int, r: float) -> None:
        pass


class _Oracle(_Policy):
    def __init__(self, opt):
        self.opt = opt

    def select(self, t, x):
        return int(self.opt[x])


class _Uniform(_Policy):
    def __init__(self, A, seed):
        rng = make_rng(seed, ALGO_STREAM)
        self.A = A

        def draws():
            while True:
                yield from rng.integers(0, A, size=BLOCK).tolist()

        self.draws = draws()

    def select(self, t, x):
        return next(self.draws)


class _TabularUCB(_Policy):
    def __init__(self, stats: _Stats, width: float):
        self.stats = stats
        self.width = width

    def select(self, t, x):
        n = self.stats.n[x]
        unplayed = np.flatnonzero(n == 0)
        if unplayed.size:
            return int(unplayed[0])
        idx = self.stats.s[x] / n + self.width * np.sqrt(2.0 * math.log(t) / n)
        return int(np.argmax(idx))


class _LinUCB(_Policy):
    """Optimistic least squares with a Sherman-Morrison inverse update."""

    def __init__(self, features: np.ndarray, reg: float, width: float):
        self.phi = features
        d = features.shape[2]
        self.d = d
        self.reg = reg
        self.width = width
        self.Vinv = np.eye(d) / reg
        self.b = np.zeros(d)

    def beta(self, t):
        d = self.d
        return self.width * math.sqrt(2.0 * math.log(max(t, 2)) + d * math.log(1.0 + t / (self.reg * d))) \
            + math.sqrt(self.reg)

    def select(self, t, x):
        P = self.phi[x]
        theta = self.Vinv @ self.b
        width = np.sqrt(np.maximum(np.einsum("ad,de,ae->a", P, self.Vinv, P), 0.0))
        return int(np.argmax(P @ theta + self.beta(t) * width))

    def update(self, t, x, a, r):
        p = self.phi[x, a]
        u = self.Vinv @ p
        self.Vinv -= np.outer(u, u) / (1.0 + p @ u)
        self.b += r * p


class _Tracker(_Policy):
    """Plug-in tracking of the allocation solved on estimated rewards."""

    def __init__(self, stats: _Stats, instance: BanditInstance, reps: RepresentationSet,
                 cfg: AlgorithmConfig, start: int = 1):
        self.stats = stats
        self.rho = instance.rho
        self.X, self.A = instance.shape
        self.reps = reps
        self.cfg = cfg
        self.eta = None
        self.f_hat = None
        self.greedy = np.zeros(self.X, dtype=np.int64)
        self.subopt = np.ones((self.X, self.A), dtype=bool)
        self.next_resolve = start
        self.next_refit = start
        self.solves = 0

    def _refit(self):
        n, m = self.stats.n, self.stats.means()
        best = None
        for rep in self.reps:
            theta, res = _weighted_fit(rep.matrix, n, m)
            if best is None or res < best[0]:
                best = (res, rep.matrix @ theta)
        f_hat = best[1].reshape(self.X, self.A)
        self.f_hat = f_hat
        self.greedy = f_hat.argmax(axis=1)
        self.subopt = np.ones((self.X, self.A), dtype=bool)
        self.subopt[np.arange(self.X), self.greedy] = False

    def _resolve(self):
        f_hat = self.f_hat
        top = f_hat.max(axis=1, keepdims=True)
        if np.any(np.sum(f_hat == top, axis=1) > 1):
            return
        try:
            sol = solve_replearn(BanditInstance(self.rho, f_hat), self.reps, self.cfg.solver)
        except (ReplearnError, RuntimeError) as exc:
            log.debug("plug-in solve skipped: %s", exc)
            return
        eta = np.array(sol.allocation.eta)
        eta[~self.subopt] = 0.0
        self.eta = eta
        self.solves += 1

    def select(self, t, x):
        if t >= self.next_refit:
            self._refit()
            self.next_refit = t + self.cfg.resolve_period
        if t >= self.next_resolve:
            self._resolve()
            self.next_resolve = max(t + self.cfg.resolve_period,
                                    int(math.ceil(t * self.cfg.resolve_growth)))
        n = self.stats.n[x]
        threshold = self.cfg.force_rate * math.sqrt(t) / (self.X * self.A)
        low = np.flatnonzero(n < threshold)
        if low.size:
            return int(low[np.argmin(n[low])])
        if self.eta is not None:
            deficit = np.where(self.subopt[x], self.eta[x] * math.log(t) - n, -np.inf)
            a = int(np.argmax(deficit))
            if deficit[a] > 0:
                return a
        return int(self.greedy[x])


class _EliminateThenTrack(_Policy):
    """Optimistic play on the best-fitting active representation, elimination
    of representations with excess residual, then tracking once one is left."""

    def __init__(self, stats: _Stats, instance: BanditInstance, cfg: AlgorithmConfig):
        self.stats = stats
        self.instance = instance
        self.cfg = cfg
        self.reps = list(cfg.reps)
        self.active = list(range(len(self.reps)))
        self.linucb = [_LinUCB(r.features, cfg.reg, cfg.linucb_width) for r in self.reps]
        self.residuals = np.zeros(len(self.reps))
        self.leader = 0
        self.elimination_times: dict = {}
        self.tracker = None
        self.isolated_at = None
        self.fallback = None
        self.flags: list = []

    def _eliminate(self, t):
        n, m = self.stats.n, self.stats.means()
        for i in self.active:
            self.residuals[i] = _weighted_fit(self.reps[i].matrix, n, m)[1]
        floor = min(self.residuals[i] for i in self.active)
        K = len(self.reps)
        keep = []
        for i in self.active:
            beta = self.cfg.elim_c1 * (self.reps[i].dim + math.log(K * t * t / self.cfg.elim_delta))
            if self.residuals[i] - floor > beta:
                self.elimination_times[self.reps[i].name] = t
            else:
                keep.append(i)
        self.active = keep
        if not self.active:
            self.flags.append("all representations eliminated; fell back to TabularUCB")
            self.fallback = _TabularUCB(self.stats, self.cfg.ucb_width)
            return
        self.leader = min(self.active, key=lambda i: (self.residuals[i], i))
        if len(self.active) == 1 and self.tracker is None:
            self.isolated_at = t
            rep = self.reps[self.active[0]]
            self.tracker = _Tracker(self.stats, self.instance, as_rep_set([rep]), self.cfg, t)

    def select(self, t, x):
        if self.fallback is not None:
            return self.fallback.select(t, x)
        if self.tracker is not None:
            return self.tracker.select(t, x)
        if len(self.active) > 1 and t % self.cfg.elim_every == 0 and t > 1:
            self._eliminate(t)
            if self.fallback is not None or self.tracker is not None:
                return self.select(t, x)
        n = self.stats.n[x]
        low = np.flatnonzero(n < self.cfg.force_rate * math.sqrt(t) / self.stats.n.size)
        if low.size:
            return int(low[np.argmin(n[low])])
        return self.linucb[self.leader].select(t, x)

    def update(self, t, x, a, r):
        if self.tracker is None and self.fallback is None:
            for i in self.active:
                self.linucb[i].update(t, x, a, r)


def default_checkpoints(T: int, num: int = 20) -> np.ndarray:
    pts = np.unique(np.geomspace(1, T, num).round().astype(np.int64))
    return pts


def _policy(env: Environment, cfg: AlgorithmConfig, stats: _Stats) -> _Policy:
    inst = env.instance
    if cfg.kind is Kind.ORACLE:
        return _Oracle(compute_gaps(inst).optimal_arm)
    if cfg.kind is Kind.UNIFORM:
        return _Uniform(inst.num_arms, env.rng_seed)
    if cfg.kind is Kind.TABULAR_UCB:
        return _TabularUCB(stats, cfg.ucb_width)
    if cfg.kind is Kind.LINUCB:
        return _LinUCB(cfg.single_rep().features, cfg.reg, cfg.linucb_width)
    if cfg.kind is Kind.C_TRACKING:
        reps = as_rep_set([cfg.single_rep()]) if cfg.family == "clb" else cfg.reps
        return _Tracker(stats, inst, reps, cfg)
    return _EliminateThenTrack(stats, inst, cfg)


def run(env: Environment, algo: AlgorithmConfig, T: int, checkpoints=None) -> RegretCurve:
    """Play ``T`` rounds and record pseudo-regret at each checkpoint."""
    if T < 1:
        raise ValueError("T must be at least 1")
    inst = env.instance
    if algo.reps is not None:
        algo.reps.check_compatible(inst)
    cps = default_checkpoints(T) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    cps = np.unique(cps[(cps >= 1) & (cps <= T)])
    gaps = compute_gaps(inst).gaps
    f = inst.rewards
    stats = _Stats(inst.shape)
    policy = _policy(env, algo, stats)
    contexts, noise = env.streams()
    regret = np.zeros(len(cps))
    reward_sum = 0.0
    k = 0
    for t in range(1, T + 1):
        x = next(contexts)
        a = policy.select(t, x)
        r = f[x, a] + next(noise)
        stats.add(x, a, r)
        policy.update(t, x, a, r)
        reward_sum += r
        if k < len(cps) and t == cps[k]:
            regret[k] = float(np.sum(stats.n * gaps))
            k += 1
    logs = np.log(cps.astype(np.float64))
    over = np.divide(regret, logs, out=np.full(len(cps), np.nan), where=cps > 1)
    curve = RegretCurve(cps, regret, over, int(env.rng_seed), algo.kind.value, stats.n.copy(),
                        reward_sum)
    if isinstance(policy, _EliminateThenTrack):
        curve.elimination_times = dict(policy.elimination_times)
        curve.elimination_time = policy.isolated_at
        curve.flags = list(policy.flags)
        if policy.tracker is not None and policy.tracker.eta is not None:
            curve.tracked_allocation = policy.tracker.eta
    elif isinstance(policy, _Tracker):
        curve.tracked_allocation = policy.eta
    return curve


def regret_from_counts(instance: BanditInstance, counts) -> float:
    return float(np.sum(np.asarray(counts) * compute_gaps(instance).gaps))


def with_reps(cfg: AlgorithmConfig, reps) -> AlgorithmConfig:
    return replace(cfg, reps=as_rep_set(reps))
