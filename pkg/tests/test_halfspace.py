import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import null_space
from scipy.optimize import lsq_linear

from replearn.constructions import build_fr_example
from replearn.errors import NotFullyRealizable, OptimalArmConstraint
from replearn.halfspace import Case, constraint_I, fr_constraint, halfspace_min
from replearn.model import Allocation, BanditInstance, Representation

M = 1e6


def numeric_halfspace(f, F, eta, z):
    """Bounded least squares in a basis whose first axis is ``z``."""
    sq = np.sqrt(eta)
    W, y = sq[:, None] * F, sq * f
    d = F.shape[1]
    if not np.any(z):
        Q = np.eye(d)
        lb = np.full(d, -np.inf)
    else:
        Q = np.column_stack([z / np.linalg.norm(z), null_space(z[None, :])])
        lb = np.r_[0.0, np.full(d - 1, -np.inf)]
    # a vanishing ridge keeps bvls bounded when W is rank-deficient
    lam = 1e-14 * max(float(np.sum(W * W)), 1.0)
    G = np.vstack([W @ Q, np.sqrt(lam) * np.eye(d)])
    res = lsq_linear(G, np.r_[y, np.zeros(d)], bounds=(lb, np.full(d, np.inf)), method="bvls",
                     tol=1e-14)
    return 0.5 * float(np.sum((y - W @ Q @ res.x) ** 2))


def fr_alloc(eta4=2.0):
    return Allocation(np.array([[M, 0.0, 0.0, eta4]]), M)


def test_realizable_positive_side():
    rep = Representation(np.eye(2)[None])
    r = halfspace_min(np.array([[1.0, 0.0]]), rep, Allocation(np.ones((1, 2))), np.array([1.0, -1.0]))
    assert r.case_tag is Case.UNCONSTRAINED_OPTIMUM
    assert r.value == pytest.approx(0.0, abs=1e-15)


def test_fr_example_boundary_value():
    prob = build_fr_example(0.1)
    phi1 = prob.reps[0]
    z = np.array([-1.0, 1.0, 0.0])
    r = halfspace_min(prob.instance.rewards, phi1, fr_alloc(), z)
    assert r.case_tag is Case.BOUNDARY_PROJECTION
    assert r.value == pytest.approx(0.5 / (1 / M + 1 / 2), rel=1e-10)
    assert float(z @ r.minimizer) >= -1e-10


def test_fr_example_a2_constraint():
    prob = build_fr_example(0.1)
    r = constraint_I(prob.instance, prob.reps[0], fr_alloc(), 0, 1)
    e = 0.1
    assert r.value == pytest.approx(0.5 * e * e / (e * e / M + e * e / 2), rel=1e-8)


def test_vacuous_direction():
    rep = Representation(np.ones((1, 2, 1)))
    f = np.array([[0.0, 1.0]])
    r = halfspace_min(f, rep, Allocation(np.ones((1, 2))), np.zeros(1))
    assert r.case_tag is Case.VACUOUS_Z_ZERO
    assert r.value == pytest.approx(0.25)


def test_kernel_direction_margin():
    rep = Representation(np.eye(2)[None])
    f = np.array([[1.0, 0.0]])
    alloc = Allocation(np.array([[1.0, 0.0]]))
    z = np.array([-1.0, 1.0])
    r = halfspace_min(f, rep, alloc, z)
    assert r.case_tag is Case.KERNEL_DIRECTION
    assert r.value == pytest.approx(0.0)
    assert float(z @ r.minimizer) >= 1e-6 * (1 - 1e-9)


def test_zero_allocation_gives_zero():
    prob = build_fr_example(0.1)
    r = constraint_I(prob.instance, prob.reps[0], Allocation(np.zeros((1, 4))), 0, 3)
    assert r.value == 0.0


def test_optimal_arm_constraint_rejected():
    prob = build_fr_example(0.1)
    with pytest.raises(OptimalArmConstraint):
        constraint_I(prob.instance, prob.reps[0], fr_alloc(), 0, 0)


def test_invertible_case_matches_gap_ratio():
    rng = np.random.default_rng(0)
    phi = rng.normal(size=(1, 3, 3))
    theta = np.array([1.0, 0.2, -0.5])
    f = phi @ theta
    inst = BanditInstance([1.0], f)
    eta = rng.uniform(0.5, 2, size=(1, 3))
    rep = Representation(phi)
    V = phi[0].T @ (eta[0, :, None] * phi[0])
    opt = int(np.argmax(f[0]))
    for a in range(3):
        if a == opt:
            continue
        z = phi[0, opt] - phi[0, a]
        gap = f[0, opt] - f[0, a]
        want = gap ** 2 / (2 * z @ np.linalg.solve(V, z))
        assert constraint_I(inst, rep, Allocation(eta), 0, a).value == pytest.approx(want, rel=1e-9)


def test_fr_constraint_example():
    prob = build_fr_example(0.1)
    e = 0.1
    v = fr_constraint(prob.instance, prob.reps, fr_alloc(), 0, 2)
    assert v == pytest.approx(e * e / (2 * (e * e / 2 + e * e / M)), rel=1e-8)
    assert fr_constraint(prob.instance, prob.reps, Allocation(np.zeros((1, 4))), 0, 2) == 0.0


def test_fr_constraint_singleton_matches_constraint_I():
    prob = build_fr_example(0.1)
    eta = Allocation(np.array([[M, 3.0, 1.0, 2.0]]), M)
    for a in (1, 2, 3):
        assert fr_constraint(prob.instance, prob.reps[:1], eta, 0, a) == pytest.approx(
            constraint_I(prob.instance, prob.reps[0], eta, 0, a).value, rel=1e-9)


def test_fr_constraint_rejects_misspecified():
    inst = BanditInstance([1.0], [[0.0, 1.0]])
    with pytest.raises(NotFullyRealizable):
        fr_constraint(inst, [Representation(np.ones((1, 2, 1)))], Allocation(np.ones((1, 2))), 0, 0)


cases = st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4),
                  st.integers(0, 2 ** 32 - 1), st.booleans())


def _random_case(X, A, d, seed, sparse):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(X * A, d))
    if rng.uniform() < 0.3 and d > 1:
        F[:, -1] = F[:, 0]  # rank-deficient features
    f = rng.normal(size=X * A)
    eta = rng.uniform(0.0, 3.0, size=X * A)
    if sparse:
        eta *= rng.uniform(size=X * A) < 0.5
    z = rng.normal(size=d) if rng.uniform() > 0.1 else np.zeros(d)
    return F, f, eta, z


@settings(max_examples=150, deadline=None)
@given(cases)
def test_closed_form_matches_numeric_minimization(case):
    X, A, d, seed, sparse = case
    F, f, eta, z = _random_case(X, A, d, seed, sparse)
    rep = Representation(F.reshape(X, A, d))
    r = halfspace_min(f.reshape(X, A), rep, Allocation(eta.reshape(X, A)), z)
    ref = numeric_halfspace(f, F, eta, z)
    assert abs(r.value - ref) <= 1e-6
    loss = 0.5 * float(np.sum(eta * (f - F @ r.minimizer) ** 2))
    assert abs(loss - r.value) <= 1e-8 * max(1.0, r.value)
    if np.any(z):
        assert float(z @ r.minimizer) >= -1e-10 * max(1.0, np.linalg.norm(r.minimizer))
    assert r.value == pytest.approx(0.5 * r.misspecification + 0.5 * r.sub_optimality_term)


@settings(max_examples=150, deadline=None)
@given(cases, st.floats(0.05, 0.95), st.floats(0.01, 100.0))
def test_concave_and_homogeneous_in_eta(case, t, c):
    X, A, d, seed, sparse = case
    F, f, eta1, z = _random_case(X, A, d, seed, sparse)
    eta2 = np.random.default_rng(seed + 1).uniform(0, 3, size=X * A)
    rep = Representation(F.reshape(X, A, d))
    fr = f.reshape(X, A)

    def val(eta):
        return halfspace_min(fr, rep, Allocation(eta.reshape(X, A)), z).value

    v1, v2 = val(eta1), val(eta2)
    vm = val((1 - t) * eta1 + t * eta2)
    assert vm >= (1 - t) * v1 + t * v2 - 1e-8 * max(1.0, v1, v2)
    assert val(c * eta1) == pytest.approx(c * v1, rel=1e-9, abs=1e-12)


def test_normalization_bridge():
    """Twice the constraint value is misspecification plus the gap term."""
    F, f, eta, z = _random_case(2, 3, 2, 11, False)
    rep = Representation(F.reshape(2, 3, 2))
    r = halfspace_min(f.reshape(2, 3), rep, Allocation(eta.reshape(2, 3)), z)
    assert 2 * r.value == pytest.approx(r.misspecification + r.sub_optimality_term)
