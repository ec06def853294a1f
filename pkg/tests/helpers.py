"""Shared instances for the test suite."""

import numpy as np

from replearn.constructions import build_fr_example, build_trivial_rep
from replearn.model import BanditInstance, Representation, RepresentationSet


def hls_singleton():
    """Two contexts, optimal features spanning the plane: zero complexity."""
    phi = np.array([[[1.0, 0.0], [0.5, 0.0]],
                    [[0.0, 0.3], [0.0, 1.0]]])
    f = phi @ np.array([1.0, 1.0])
    inst = BanditInstance(np.array([0.5, 0.5]), f)
    return inst, Representation(phi, "hls")


def hls_plus_trivial():
    inst, rep = hls_singleton()
    return inst, RepresentationSet((rep, build_trivial_rep(2, 2)))


def detectable_problem():
    """A unique realizable rep ``star`` (not HLS) and two reps that misfit the
    optimal pairs by 0.32 in squared error."""
    phi = np.array([[[1.0, 0.0], [0.5, 0.4], [0.0, 1.0]],
                    [[0.2, 0.0], [0.0, 0.3], [0.1, -0.5]]])
    f = phi @ np.array([1.0, 0.5])
    inst = BanditInstance(np.array([0.5, 0.5]), f)
    const = np.ones((2, 3, 1))
    bad = np.array([[[1.0, 0.0], [0.3, 0.7], [-0.4, 0.2]],
                    [[1.0, 0.0], [0.6, -0.2], [0.9, 0.5]]])
    reps = RepresentationSet((Representation(phi, "star"), Representation(const, "const"),
                              Representation(bad, "bad")))
    return inst, reps


def fr_restricted():
    """The 4-arm example kept on its first and last arm, with the all-zero
    feature column of each representation dropped."""
    prob = build_fr_example(0.1)
    keep = [0, 3]
    inst = BanditInstance(np.array([1.0]), prob.instance.rewards[:, keep])
    p1 = prob.reps[0].features[:, keep][:, :, [0, 1]]
    p2 = prob.reps[1].features[:, keep][:, :, [1, 2]]
    return inst, RepresentationSet((Representation(p1, "phi1"), Representation(p2, "phi2")))


def random_realizable(rng, X, A, d, n_extra=1, extra_dim=None):
    """A realizable rep plus ``n_extra`` random (generally misspecified) ones."""
    while True:
        phi = rng.normal(size=(X, A, d))
        theta = rng.normal(size=d)
        f = phi @ theta
        srt = np.sort(f, axis=1)
        if A == 1 or np.all(srt[:, -1] - srt[:, -2] > 0.05):
            break
    rho = rng.dirichlet(np.ones(X))
    inst = BanditInstance(rho / rho.sum(), f)
    reps = [Representation(phi, "real")]
    for k in range(n_extra):
        reps.append(Representation(rng.normal(size=(X, A, extra_dim or d)), f"rand{k}"))
    return inst, RepresentationSet(tuple(reps))


def random_instance(rng, X, A, min_gap=0.05):
    while True:
        r = rng.uniform(-1, 1, size=(X, A))
        srt = np.sort(r, axis=1)
        if np.all(srt[:, -1] - srt[:, -2] > min_gap):
            return BanditInstance.uniform(r)
