"""Bandit instances, representations and allocations.

Context-arm pairs are enumerated lexicographically, ``index = x * A + a``.
Every table stored here is a read-only float64 array, so values can be
shared freely between solvers, checks and simulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidInstance, NonUniqueOptimum


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidInstance(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BanditInstance:
    """Finite contextual bandit: context distribution ``rho`` and mean rewards.

    ``rho`` only matters for simulation; the complexity programs do not
    depend on it.
    """

    rho: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _frozen(self.rho, 1, "rho"))
        object.__setattr__(self, "rewards", _frozen(self.rewards, 2, "rewards"))
        if self.rho.shape[0] != self.rewards.shape[0]:
            raise InvalidInstance(
                f"rho has {self.rho.shape[0]} entries but rewards has {self.rewards.shape[0]} rows"
            )

    @property
    def num_contexts(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_arms(self) -> int:
        return self.rewards.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rewards.shape

    @property
    def f(self) -> np.ndarray:
        """Vectorized reward table of length X*A."""
        return self.rewards.reshape(-1)

    @classmethod
    def uniform(cls, rewards) -> "BanditInstance":
        rewards = np.asarray(rewards, dtype=np.float64)
        return cls(np.full(rewards.shape[0], 1.0 / rewards.shape[0]), rewards)


@dataclass(frozen=True)
class Representation:
    """Feature map stored as an ``(X, A, d)`` tensor."""

    features: np.ndarray
    name: str = "phi"

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features, 3, "features"))
        if not np.all(np.isfinite(self.features)):
            raise InvalidInstance(f"representation {self.name!r} has non-finite features")

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def matrix(self) -> np.ndarray:
        """The ``(X*A, d)`` feature matrix, rows in lexicographic pair order."""
        return self.features.reshape(-1, self.dim)

    def compatible_with(self, instance: BanditInstance) -> bool:
        return self.features.shape[:2] == instance.shape

    def __call__(self, x: int, a: int) -> np.ndarray:
        return self.features[x, a]


@dataclass(frozen=True)
class RepresentationSet:
    """Ordered finite collection of representations."""

    reps: tuple[Representation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reps", tuple(self.reps))

    def __iter__(self) -> Iterator[Representation]:
        return iter(self.reps)

    def __len__(self) -> int:
        return len(self.reps)

    def __getitem__(self, i) -> Representation:
        return self.reps[i]

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.reps]

    def by_name(self, name: str) -> Representation:
        for r in self.reps:
            if r.name == name:
                return r
        raise KeyError(name)

    def check_compatible(self, instance: BanditInstance) -> None:
        if len(self.reps) == 0:
            raise InvalidInstance("representation set is empty")
        for r in self.reps:
            if not r.compatible_with(instance):
                raise InvalidInstance(
                    f"representation {r.name!r} has shape {r.features.shape[:2]}, "
                    f"instance has {instance.shape}"
                )


def as_rep_set(reps) -> RepresentationSet:
    if isinstance(reps, RepresentationSet):
        return reps
    if isinstance(reps, Representation):
        return RepresentationSet((reps,))
    return RepresentationSet(tuple(reps))


@dataclass(frozen=True)
class Allocation:
    """Nonnegative sample counts ``eta`` over context-arm pairs.

    ``optimal_cap`` is the finite stand-in for the unbounded mass that the
    programs may put on optimal arms at zero cost.
    """

    eta: np.ndarray
    optimal_cap: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eta", _frozen(self.eta, 2, "eta"))
        if not np.all(np.isfinite(self.eta)) or np.any(self.eta < 0):
            raise InvalidInstance("allocation entries must be finite and nonnegative")
        if not self.optimal_cap > 0:
            raise InvalidInstance("optimal_cap must be positive")

    @property
    def flat(self) -> np.ndarray:
        return self.eta.reshape(-1)

    def scaled(self, c: float) -> "Allocation":
        return Allocation(self.eta * c, self.optimal_cap * c)

    def respects_cap(self, gaps: "GapTable", rtol: float = 1e-9) -> bool:
        opt = self.eta[np.arange(self.eta.shape[0]), gaps.optimal_arm]
        return bool(np.all(opt <= self.optimal_cap * (1 + rtol)))


@dataclass(frozen=True)
class GapTable:
    gaps: np.ndarray
    optimal_arm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gaps", _frozen(self.gaps, 2, "gaps"))
        opt = np.array(self.optimal_arm, dtype=np.int64)
        opt.flags.writeable = False
        object.__setattr__(self, "optimal_arm", opt)

    def suboptimal_pairs(self) -> list[tuple[int, int]]:
        """Suboptimal ``(x, a)`` pairs in lexicographic order."""
        X, A = self.gaps.shape
        return [(x, a) for x in range(X) for a in range(A) if a != self.optimal_arm[x]]

    def optimal_mask(self) -> np.ndarray:
        mask = np.zeros(self.gaps.shape, dtype=bool)
        mask[np.arange(mask.shape[0]), self.optimal_arm] = True
        return mask

    @property
    def min_gap(self) -> float:
        pos = self.gaps[~self.optimal_mask()]
        return float(pos.min()) if pos.size else 0.0

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(instance: BanditInstance) -> ValidationReport:
    report = ValidationReport()
    rho, r = instance.rho, instance.rewards
    if r.size == 0:
        report.violations.append("empty reward table")
        return report
    if not np.all(np.isfinite(r)):
        report.violations.append("rewards contain non-finite entries")
    if not np.all(np.isfinite(rho)):
        report.violations.append("rho contains non-finite entries")
    elif np.any(rho <= 0):
        report.violations.append("rho not full-support")
    if np.all(np.isfinite(rho)) and abs(rho.sum() - 1.0) > 1e-12:
        report.violations.append(f"rho does not sum to 1 (sum = {rho.sum()!r})")
    if np.all(np.isfinite(r)):
        for x, row in enumerate(r):
            top = row.max()
            if np.count_nonzero(row == top) > 1:
                report.violations.append(f"optimal arm not unique in context {x}")
    return report


def compute_gaps(instance: BanditInstance) -> GapTable:
    r = instance.rewards
    best = r.max(axis=1)
    for x, row in enumerate(r):
        if np.count_nonzero(row == best[x]) > 1:
            raise NonUniqueOptimum(f"context {x} has tied optimal arms")
    opt = r.argmax(axis=1)
    gaps = best[:, None] - r
    return GapTable(gaps, opt)


def feature_gap(rep: Representation, gaps: GapTable, x: int, a: int) -> np.ndarray:
    """``phi(x, pi*(x)) - phi(x, a)``."""
    return rep.features[x, gaps.optimal_arm[x]] - rep.features[x, a]


def optimal_policy_allocation(instance: BanditInstance) -> Allocation:
    gaps = compute_gaps(instance)
    eta = gaps.optimal_mask().astype(np.float64)
    return Allocation(eta, 1.0)


def pairs(shape: Sequence[int]) -> list[tuple[int, int]]:
    X, A = shape
    return [(x, a) for x in range(X) for a in range(A)]
