"""Shared numeric kernels: distances, eigen/SVD decompositions, MST.

Everything here is deterministic and operates on plain ndarrays. The
minimum spanning tree doubles as the zero-dimensional persistence pairing
of a Vietoris-Rips filtration, which is what the topological autoencoder
loss consumes.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from mapperbench.errors import ConvergenceError, InvalidArgumentError

# Relative off-diagonal threshold at which the Jacobi sweep stops. Chosen
# so eigenpair residuals land well below the 1e-7 contract.
_JACOBI_TOL = 1e-11
_JACOBI_MAX_SWEEPS = 60


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance matrix of the rows of ``X``.

    Returns an n x n symmetric matrix with a zero diagonal. Non-finite
    input is rejected rather than propagated.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError("expected a nonempty 2-d point matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("point matrix contains non-finite values")
    # cdist evaluates sqrt(sum((a-b)^2)) pairwise, which keeps full float64
    # accuracy (no ||a||^2+||b||^2-2ab cancellation) and an exactly zero
    # diagonal.
    return cdist(X, X)


def _jacobi_eig(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps."""
    A = S.copy()
    d = A.shape[0]
    V = np.eye(d)
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return np.zeros(d), V
    tol = _JACOBI_TOL * norm
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
        if off <= tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= tol / d:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Rotate rows/columns p and q of A, and columns of V.
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge in {_JACOBI_MAX_SWEEPS} sweeps"
        )
    return np.diag(A).copy(), V


def sym_eig_topk(S: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix, eigenvalues descending.

    Eigenvectors come back orthonormal in the columns of a d x k matrix
    with a deterministic sign (largest-magnitude component positive).
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError("matrix must be square")
    d = S.shape[0]
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"k={k} out of range for d={d}")
    scale = max(1.0, float(np.abs(S).max()))
    if np.abs(S - S.T).max() > 1e-9 * scale:
        raise InvalidArgumentError("matrix is not symmetric within 1e-9")
    # Work on the exact symmetrization so rotations stay orthogonal.
    evals, vecs = _jacobi_eig((S + S.T) / 2.0)
    order = np.argsort(-evals, kind="stable")[:k]
    evals = evals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        pivot = np.argmax(np.abs(vecs[:, j]))
        if vecs[pivot, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return evals, vecs


def svd_topk(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` singular values and right singular vectors of ``X``.

    Computed through the eigendecomposition of X^T X, so sigma_i^2 equals
    the i-th eigenvalue of the Gram matrix by construction.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("expected a 2-d matrix")
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise InvalidArgumentError(f"k={k} out of range for {n}x{d}")
    gram = X.T @ X
    evals, vecs = sym_eig_topk(gram, k)
    sigma = np.sqrt(np.clip(evals, 0.0, None))
    return sigma, vecs


def minimum_spanning_tree(D: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of a dense symmetric distance matrix.

    Prim's algorithm under the total edge order
    ``(weight, min(i, j), max(i, j))``, which makes the tree unique even
    with tied weights (any correct MST algorithm using the same order
    returns the same edge set). Edges come back as ``(i, j, weight)``
    with ``i < j``, sorted by that order.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidArgumentError("distance matrix must be square")
    n = D.shape[0]
    if n < 2:
        raise InvalidArgumentError("minimum spanning tree needs n >= 2")

    in_tree = np.zeros(n, dtype=bool)
    best_w = np.full(n, np.inf)
    best_from = np.full(n, -1, dtype=int)
    in_tree[0] = True
    best_w[1:] = D[0, 1:]
    best_from[1:] = 0

    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        w = np.where(in_tree, np.inf, best_w)
        wmin = w.min()
        # Resolve weight ties by the (min index, max index) of the edge.
        candidates = np.flatnonzero(w == wmin)
        best = None
        for u in candidates:
            f = best_from[u]
            key = (min(f, u), max(f, u))
            if best is None or key < best[0]:
                best = (key, u)
        u = best[1]
        f = best_from[u]
        edges.append((min(f, u), max(f, u), float(best_w[u])))
        in_tree[u] = True
        # Relax: adopt edge (u, v) when it beats the incumbent under the
        # total order, not merely on weight.
        du = D[u]
        for v in np.flatnonzero(~in_tree):
            new = (du[v], min(u, v), max(u, v))
            old = (best_w[v], min(best_from[v], v), max(best_from[v], v))
            if new < old:
                best_w[v] = du[v]
                best_from[v] = u
    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return edges
