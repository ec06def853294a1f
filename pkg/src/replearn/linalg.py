"""Dense linear algebra: SVD, pseudo-inverse, image membership, weighted fits.

Weighted quantities (design matrix rank, pseudo-inverse, best fit) are
computed from the SVD of the square-root factor ``W = D_eta^{1/2} F`` rather
than from ``V = W^T W``. Forming ``V`` squares the condition number, which
matters once optimal arms carry mass around 1e8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Allocation, Representation

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class SvdFactors:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        n, m = self.left_vectors.shape[0], self.right_vectors.shape[0]
        S = np.zeros((n, m))
        k = len(self.singular_values)
        S[:k, :k] = np.diag(self.singular_values)
        return self.left_vectors @ S @ self.right_vectors.T


def _check_finite(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def svd(matrix) -> SvdFactors:
    """Full SVD ``A = U diag(s) V^T`` with ``s`` non-increasing."""
    a = _check_finite(matrix)
    n, m = a.shape
    if a.size == 0:
        return SvdFactors(np.eye(n), np.zeros(0), np.eye(m))
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    return SvdFactors(u, s, vt.T)


def _cutoff(s: np.ndarray, rank_tol: float) -> float:
    return rank_tol * s[0] if s.size else 0.0


def pinv(matrix, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, dropping singular values <= rank_tol * s_max."""
    if not 0 < rank_tol < 1:
        raise ValueError("rank_tol must lie in (0, 1)")
    f = svd(matrix)
    s = f.singular_values
    keep = s > _cutoff(s, rank_tol)
    k = len(s)
    U = f.left_vectors[:, :k][:, keep]
    V = f.right_vectors[:, :k][:, keep]
    return (V / s[keep]) @ U.T


def in_image(matrix, vector, tol: float = DEFAULT_RANK_TOL) -> bool:
    """Whether ``vector`` lies in the column space of the PSD ``matrix``."""
    v = np.asarray(vector, dtype=np.float64)
    nv = np.linalg.norm(v)
    if nv == 0:
        return True
    M = np.asarray(matrix, dtype=np.float64)
    residual = v - M @ (pinv(M, tol) @ v)
    return bool(np.linalg.norm(residual) <= tol * nv)


class WeightedFit:
    """Least-squares fit of ``f`` on ``F`` under weights ``eta``.

    Holds the truncated SVD of ``W = sqrt(eta) F``; everything about
    ``V = W^T W`` (rank, image, pseudo-inverse, best fit) derives from it.
    """

    def __init__(self, F: np.ndarray, eta: np.ndarray, f: np.ndarray,
                 rank_tol: float = DEFAULT_RANK_TOL):
        self.F = F
        self.eta = eta
        self.f = f
        self.rank_tol = rank_tol
        sq = np.sqrt(eta)
        W = sq[:, None] * F
        d = F.shape[1]
        if W.size and np.any(W):
            u, s, vt = np.linalg.svd(W, full_matrices=False)
        else:
            u, s, vt = np.zeros((F.shape[0], 0)), np.zeros(0), np.zeros((0, d))
        keep = s > _cutoff(s, rank_tol)
        self.singular_values = s
        self.rank = int(keep.sum())
        self._U = u[:, keep]
        self._s = s[keep]
        self._B = vt[keep].T  # orthonormal basis of im(V), shape (d, rank)
        self.theta = self._B @ ((self._U.T @ (sq * f)) / self._s) if self.rank else np.zeros(d)
        resid = f - F @ self.theta
        self.misspec = float(np.sum(eta * resid ** 2))

    def vdag(self, z: np.ndarray) -> np.ndarray:
        """``V^dagger z``."""
        if not self.rank:
            return np.zeros_like(z)
        return self._B @ ((self._B.T @ z) / self._s ** 2)

    def vdag_norm2(self, z: np.ndarray) -> float:
        """``||z||^2`` in the ``V^dagger`` metric."""
        if not self.rank:
            return 0.0
        c = (self._B.T @ z) / self._s
        return float(c @ c)

    def kernel_component(self, z: np.ndarray) -> np.ndarray:
        """``(I - V^dagger V) z``, the part of ``z`` outside ``im(V)``."""
        return z - self._B @ (self._B.T @ z)

    def contains(self, z: np.ndarray, tol: float | None = None) -> bool:
        tol = self.rank_tol if tol is None else tol
        nz = np.linalg.norm(z)
        if nz == 0:
            return True
        return bool(np.linalg.norm(self.kernel_component(z)) <= tol * nz)

    def matrix(self) -> np.ndarray:
        return self.F.T @ (self.eta[:, None] * self.F)

    def loss(self, theta: np.ndarray) -> float:
        """Weighted squared error ``||f - F theta||^2_{D_eta}``."""
        r = self.f - self.F @ theta
        return float(np.sum(self.eta * r ** 2))


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray
    numerical_rank: int
    rank_tolerance: float


def _flat_inputs(rep: Representation, alloc: Allocation, rewards=None):
    F = rep.matrix
    eta = alloc.flat
    if F.shape[0] != eta.shape[0]:
        raise ValueError(f"representation has {F.shape[0]} pairs, allocation {eta.shape[0]}")
    if rewards is None:
        return F, eta, np.zeros(F.shape[0])
    f = np.asarray(rewards, dtype=np.float64).reshape(-1)
    if f.shape[0] != F.shape[0]:
        raise ValueError("reward table does not match representation shape")
    return F, eta, f


def weighted_fit(rep: Representation, alloc: Allocation, rewards,
                 rank_tol: float = DEFAULT_RANK_TOL) -> WeightedFit:
    F, eta, f = _flat_inputs(rep, alloc, rewards)
    return WeightedFit(F, eta, f, rank_tol)


def design_matrix(rep: Representation, alloc: Allocation,
                  rank_tol: float = DEFAULT_RANK_TOL) -> DesignMatrix:
    """``V_eta(phi) = sum eta(x,a) phi(x,a) phi(x,a)^T`` and its numerical rank."""
    F, eta, _ = _flat_inputs(rep, alloc)
    fit = WeightedFit(F, eta, np.zeros(F.shape[0]), rank_tol)
    V = F.T @ (eta[:, None] * F)
    V = 0.5 * (V + V.T)
    return DesignMatrix(V, fit.rank, rank_tol)


def best_fit(rep: Representation, alloc: Allocation, rewards,
             rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Minimum-norm minimizer of ``||f - F theta||^2_{D_eta}``."""
    return weighted_fit(rep, alloc, rewards, rank_tol).theta


def misspec_mse(rep: Representation, alloc: Allocation, rewards,
                rank_tol: float = DEFAULT_RANK_TOL) -> float:
    return weighted_fit(rep, alloc, rewards, rank_tol).misspec
