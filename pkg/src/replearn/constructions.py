"""Instance and representation families with known complexity values.

Every builder is deterministic: suboptimal pairs are enumerated
lexicographically, policies in base-A counting order, and binary arm codes
least-significant digit first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import InvalidInstance, TooFewPolicies
from .model import BanditInstance, Representation, RepresentationSet, as_rep_set, compute_gaps


@dataclass(frozen=True)
class Claim:
    """An analytic statement about a constructed problem.

    ``relation`` is one of ``"=="``, ``"<="``, ``">="``.
    """

    name: str
    relation: str
    value: float
    provenance: str

    def check(self, observed: float, rtol: float = 0.0) -> bool:
        slack = rtol * abs(self.value)
        if self.relation == "==":
            return abs(observed - self.value) <= slack
        if self.relation == "<=":
            return observed <= self.value + slack
        if self.relation == ">=":
            return observed >= self.value - slack
        raise ValueError(f"unknown relation {self.relation!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "relation": self.relation, "value": self.value,
                "provenance": self.provenance}


@dataclass(frozen=True)
class ConstructedProblem:
    instance: BanditInstance
    reps: RepresentationSet
    analytic_claims: tuple[Claim, ...] = ()
    kind: str = ""
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def claim(self, name: str) -> Claim:
        for c in self.analytic_claims:
            if c.name == name:
                return c
        raise KeyError(name)


def build_trivial_rep(X: int, A: int, name: str = "trivial") -> Representation:
    """Canonical basis over context-arm pairs; its feature matrix is the identity."""
    if X < 1 or A < 1:
        raise InvalidInstance("X and A must be at least 1")
    return Representation(np.eye(X * A).reshape(X, A, X * A), name)


def augment_with_trivial(reps, X: int, A: int) -> RepresentationSet:
    reps = tuple(as_rep_set(reps)) if reps is not None else ()
    names = {r.name for r in reps}
    name = "trivial"
    while name in names:
        name += "_"
    return RepresentationSet(reps + (build_trivial_rep(X, A, name),))


def _unstructured_value(instance: BanditInstance) -> float:
    gaps = compute_gaps(instance)
    return float(sum(2.0 / gaps.gaps[x, a] for x, a in gaps.suboptimal_pairs()))


def build_hard_set(instance: BanditInstance, d: int) -> ConstructedProblem:
    """Realizable d-dimensional representations that together are as hard as
    no structure at all.

    Representation ``i`` has ``f*`` as its first column and gap-scaled
    indicators of the ``i``-th block of ``d - 1`` suboptimal pairs as the rest.
    """
    X, A = instance.shape
    if not 2 <= d <= X * A:
        raise InvalidInstance(f"d must lie in [2, {X * A}], got {d}")
    gaps = compute_gaps(instance)
    subopt = gaps.suboptimal_pairs()
    block = d - 1
    n = max(1, math.ceil(len(subopt) / block))
    reps = []
    for i in range(n):
        feats = np.zeros((X, A, d))
        feats[:, :, 0] = instance.rewards
        for j, (x, a) in enumerate(subopt[i * block:(i + 1) * block]):
            feats[x, a, j + 1] = gaps.gaps[x, a]
        reps.append(Representation(feats, f"hard{i + 1}"))
    claims = (
        Claim("C(Phi)", "==", _unstructured_value(instance),
              "every suboptimal pair has an alternative realizable in the representation "
              "that covers it, so the set is as hard as the unstructured problem"),
        Claim("C(phi) each", "<=", 2.0 * (d - 1) / gaps.min_gap,
              "each representation only needs its own block of d-1 pairs sampled"),
    )
    return ConstructedProblem(instance, RepresentationSet(tuple(reps)), claims, "hard-set",
                              {"d": d})


def build_nested_family(X: int, A: int, gap: float, dims) -> ConstructedProblem:
    """Nested representations over an instance where every suboptimal pair has
    the same gap; each representation is a column prefix of the next."""
    dims = [int(v) for v in dims]
    if X < 1 or A < 2:
        raise InvalidInstance("need X >= 1 and A >= 2")
    if not gap > 0:
        raise InvalidInstance("gap must be positive")
    top = X * (A - 1) + 1
    if not dims or dims[0] < 2 or dims[-1] > top or any(b <= a for a, b in zip(dims, dims[1:])):
        raise InvalidInstance(f"dims must be strictly increasing within [2, {top}]")
    rewards = np.zeros((X, A))
    rewards[:, 0] = gap
    instance = BanditInstance.uniform(rewards)
    subopt = compute_gaps(instance).suboptimal_pairs()
    dmax = dims[-1]
    full = np.zeros((X, A, dmax))
    full[:, :, 0] = rewards
    for j, (x, a) in enumerate(subopt[:dmax - 1]):
        full[x, a, j + 1] = gap
    reps = tuple(Representation(full[:, :, :d], f"phi{i + 1}") for i, d in enumerate(dims))
    claims = tuple(
        Claim(f"C(phi{i + 1})", "==", 2.0 * (d - 1) / gap,
              "only the d-1 indicator pairs need samples, each 2/gap^2 of them")
        for i, d in enumerate(dims)
    ) + (Claim("C(Phi)", "==", 2.0 * (dmax - 1) / gap,
               "the largest nested representation dominates the set"),)
    return ConstructedProblem(instance, RepresentationSet(reps), claims, "nested",
                              {"X": X, "A": A, "gap": gap, "dims": dims})


def _max_contexts(A: int, budget: int) -> int:
    X, p = 0, A
    while p <= budget:
        X += 1
        p *= A
    return X


@dataclass(frozen=True)
class PolicyClassScaffold:
    """Indicator features over a set of deterministic policies.

    ``policies[k, x]`` is the arm chosen by policy ``k`` in context ``x``;
    policy ``k`` lives in representation ``k // d`` as column ``k % d``.
    """

    reps: RepresentationSet
    policies: np.ndarray
    d: int

    @property
    def num_contexts(self) -> int:
        return self.policies.shape[1]

    @property
    def num_arms(self) -> int:
        return self.reps[0].features.shape[1]

    def rewards(self, k: int, eps: float) -> np.ndarray:
        r = np.zeros((self.num_contexts, self.num_arms))
        r[np.arange(self.num_contexts), self.policies[k]] = eps
        return r

    def host(self, k: int) -> tuple[int, np.ndarray]:
        """Index of the representation realizing policy ``k`` and its parameter."""
        theta = np.zeros(self.d)
        theta[k % self.d] = 1.0
        return k // self.d, theta

    def member(self, k: int, eps: float) -> ConstructedProblem:
        if not eps > 0:
            raise InvalidInstance("eps must be positive")
        instance = BanditInstance.uniform(self.rewards(k, eps))
        i, theta = self.host(k)
        return ConstructedProblem(
            instance, self.reps, (), "policy-class",
            {"d": self.d, "policy": k, "eps": eps},
            {"host_rep": self.reps[i].name, "host_theta": (eps * theta).tolist()})

    def family(self, eps: float) -> Iterator[ConstructedProblem]:
        for k in range(self.policies.shape[0]):
            yield self.member(k, eps)


def build_policy_class_features(d: int, N: int, A: int) -> PolicyClassScaffold:
    """``X`` is the largest count of contexts with ``A**X <= d * N``, so the
    ``ceil(A**X / d)`` representations cover every deterministic policy."""
    if A < 2 or d < 1 or N < 1:
        raise InvalidInstance("need A >= 2, d >= 1, N >= 1")
    X = _max_contexts(A, d * N)
    if X == 0:
        raise TooFewPolicies(f"d*N = {d * N} < A = {A}: not even one context fits")
    P = A ** X
    # base-A digits, context 0 least significant
    policies = np.array([[(k // A ** x) % A for x in range(X)] for k in range(P)], dtype=np.int64)
    reps = []
    for j in range(math.ceil(P / d)):
        feats = np.zeros((X, A, d))
        for c, k in enumerate(range(j * d, min((j + 1) * d, P))):
            feats[np.arange(X), policies[k], c] = 1.0
        reps.append(Representation(feats, f"pol{j + 1}"))
    policies.flags.writeable = False
    return PolicyClassScaffold(RepresentationSet(tuple(reps)), policies, d)


@dataclass(frozen=True)
class BinarizedArmsScaffold:
    """``copies`` stacked two-armed indicator problems with arms routed by
    their binary code. Arms ``>= 2**copies`` carry zero features."""

    rep: Representation
    copies: int
    block_dim: int

    @property
    def num_contexts(self) -> int:
        return self.rep.features.shape[0]

    @property
    def num_arms(self) -> int:
        return self.rep.features.shape[1]

    @property
    def zero_feature_arms(self) -> list[int]:
        return list(range(2 ** self.copies, self.num_arms))

    def bits(self, a: int) -> list[int]:
        return [(a >> i) & 1 for i in range(self.copies)]

    def split(self, theta) -> list[np.ndarray]:
        theta = np.asarray(theta, dtype=np.float64)
        b = self.block_dim
        return [theta[i * b:(i + 1) * b] for i in range(self.copies)]

    def base_features(self) -> np.ndarray:
        """The two-armed indicator map, shape ``(X, 2, block_dim)``."""
        X, b = self.num_contexts, self.block_dim
        out = np.zeros((X, 2, b))
        for x in range(X):
            out[x, 0, 2 * x] = 1.0
            out[x, 1, 2 * x + 1] = 1.0
        return out

    def gaps(self, theta) -> np.ndarray:
        """Gaps among the binary-coded arms under ``phi^T theta``."""
        r = self.rep.features[:, :2 ** self.copies] @ np.asarray(theta, dtype=np.float64)
        return r.max(axis=1, keepdims=True) - r

    def summed_copy_gaps(self, theta) -> np.ndarray:
        """Sum over copies of each binary digit's gap in its two-armed problem."""
        base = self.base_features()
        out = np.zeros((self.num_contexts, 2 ** self.copies))
        for i, th in enumerate(self.split(theta)):
            r = base @ th
            g = r.max(axis=1, keepdims=True) - r
            for a in range(2 ** self.copies):
                out[:, a] += g[:, (a >> i) & 1]
        return out

    def instance(self, theta) -> BanditInstance:
        return BanditInstance.uniform(self.rep.features @ np.asarray(theta, dtype=np.float64))


def build_binarized_arms(d: int, A: int) -> BinarizedArmsScaffold:
    if A < 2:
        raise InvalidInstance("need A >= 2")
    L = A.bit_length() - 1
    if A < 4 or d < 12 * math.log2(A):
        warnings.warn(f"d = {d}, A = {A} is outside the regime A >= 4, d >= 12 log2(A)",
                      stacklevel=2)
    block = d // L
    X = block // 2
    if X < 1:
        raise InvalidInstance(f"d = {d} is too small for {L} copies of a two-armed problem")
    feats = np.zeros((X, A, d))
    for x in range(X):
        for a in range(2 ** L):
            for i in range(L):
                feats[x, a, i * block + 2 * x + ((a >> i) & 1)] = 1.0
    return BinarizedArmsScaffold(Representation(feats, "binarized"), L, block)


def fr_features(eps: float) -> tuple[np.ndarray, np.ndarray]:
    """The two 4-arm, 3-dimensional feature tables (rows are arms)."""
    e = float(eps)
    phi1 = np.array([[1.0, 0.0, 0.0],
                     [1.0 - e, e, 0.0],
                     [0.0, 0.0, 1.0 - e],
                     [0.0, 1.0, 0.0]])
    phi2 = np.array([[0.0, 0.0, 1.0],
                     [1.0 - e, 0.0, 0.0],
                     [0.0, e, 1.0 - e],
                     [0.0, 1.0, 0.0]])
    return phi1, phi2


def build_fr_example(eps: float) -> ConstructedProblem:
    """Single-context 4-arm problem where two realizable 3-dimensional
    representations each cost at least ``2/eps`` but jointly cost at most 2."""
    if not 0 < eps < 1:
        raise InvalidInstance("eps must lie in (0, 1)")
    rewards = np.array([[1.0, 1.0 - eps, 1.0 - eps, 0.0]])
    instance = BanditInstance(np.array([1.0]), rewards)
    phi1, phi2 = fr_features(eps)
    reps = RepresentationSet((Representation(phi1[None], "phi1"),
                              Representation(phi2[None], "phi2")))
    claims = (
        Claim("C_FR(Phi)", "<=", 2.0,
              "eta = (M, 0, 0, 2) satisfies every pair with a2, a4 certified by phi1 and "
              "a3 by phi2, as M grows"),
        Claim("C(phi1)", ">=", 2.0 / eps,
              "phi1 can only cover the third coordinate by sampling a3, which needs 2/eps^2 pulls"),
        Claim("C(phi2)", ">=", 2.0 / eps, "phi2 can only cover the first coordinate by sampling a2"),
        Claim("C_unstructured", "==", _unstructured_value(instance), "sum of 2/gap"),
    )
    return ConstructedProblem(instance, reps, claims, "fr-example", {"eps": eps},
                              {"theta": [1.0, 0.0, 1.0]})
