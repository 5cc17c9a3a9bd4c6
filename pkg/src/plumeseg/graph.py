"""Pixel similarity graphs, the symmetric normalized Laplacian and its eigenpairs.

Three distances are supported:

``cosine``
    ``1 - <x, y> / (|x| |y|)`` (spectral angle form), in [0, 2].
``euclidean``
    ``|x - y|``.
``mcos``
    Modified cosine for 3x3 feature vectors: the 2-norm over the nine
    neighbourhood blocks of the per-block cosine distance, in [0, 3].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .dimred import fix_signs

METRICS = ("cosine", "euclidean", "mcos")
_ALIASES = {"cos": "cosine", "euc": "euclidean", "modified-cosine": "mcos",
            "modified_cosine": "mcos"}

# neighbourhood order NW, N, NE, W, C, E, SW, S, SE
NEIGHBOUR_OFFSETS = tuple((dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1))


def canonical_metric(metric):
    m = _ALIASES.get(metric, metric)
    if m not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    return m


# ---------------------------------------------------------------------------
# single-pair distances

def cosine_distance(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(np.clip(1.0 - np.dot(x, y) / (nx * ny), 0.0, 2.0))


def euclidean_distance(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    d = x - y
    return float(np.sqrt(np.dot(d, d)))


def modified_cosine_distance(x, y, n_blocks=9):
    x = np.asarray(x, dtype=np.float64).reshape(n_blocks, -1)
    y = np.asarray(y, dtype=np.float64).reshape(n_blocks, -1)
    return float(np.sqrt(sum(cosine_distance(a, b) ** 2 for a, b in zip(x, y))))


# ---------------------------------------------------------------------------
# features

def build_features(frame):
    """Concatenate each pixel's 3x3 neighbourhood spectra (replicate padding).

    ``(H, W, B)`` -> ``(H, W, 9B)``; block 4 (0-based) is the pixel itself.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        frame = frame[:, :, None]
    H, W, _ = frame.shape
    padded = np.pad(frame, ((1, 1), (1, 1), (0, 0)), mode="edge")
    blocks = [padded[1 + dy:1 + dy + H, 1 + dx:1 + dx + W] for dy, dx in NEIGHBOUR_OFFSETS]
    return np.concatenate(blocks, axis=2)


# ---------------------------------------------------------------------------
# pairwise distances

def _unit_blocks(X, n_blocks, rows=None):
    n, m = X.shape
    if m % n_blocks:
        raise ValueError(f"feature dimension {m} is not divisible into {n_blocks} blocks")
    Xb = X.reshape(n, n_blocks, m // n_blocks)
    norms = np.linalg.norm(Xb, axis=2)
    if np.any(norms == 0):
        i, j = np.argwhere(norms == 0)[0]
        pix = i if rows is None else rows[i]
        raise ValueError(f"zero spectrum in block {j} of pixel {pix}: cosine undefined")
    return Xb / norms[:, :, None]


def _check_nonzero(X, rows=None):
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        i = int(np.flatnonzero(norms == 0)[0])
        raise ValueError(f"zero spectrum at pixel {i if rows is None else rows[i]}: cosine undefined")


def pairwise_distances(X, Y=None, metric="cosine"):
    """Distance matrix between the rows of ``X`` and ``Y`` (``Y=None``: X with itself).

    With ``Y=None`` every unordered pair is computed once, so the result is
    exactly symmetric with a zero diagonal.
    """
    metric = canonical_metric(metric)
    X = np.asarray(X, dtype=np.float64)
    if metric == "mcos":
        Xu = _unit_blocks(X, 9)
        Yu = Xu if Y is None else _unit_blocks(np.asarray(Y, dtype=np.float64), 9)
        d2 = np.zeros((Xu.shape[0], Yu.shape[0]))
        for b in range(9):
            dc = np.clip(1.0 - Xu[:, b] @ Yu[:, b].T, 0.0, 2.0)
            d2 += dc * dc
        D = np.sqrt(d2)
        if Y is None:
            D = np.triu(D, 1)
            D = D + D.T
        return D
    if metric == "cosine":
        _check_nonzero(X)
        if Y is not None:
            _check_nonzero(np.asarray(Y, dtype=np.float64))
    if Y is None:
        return squareform(np.clip(pdist(X, metric), 0.0, None))
    return np.clip(cdist(X, np.asarray(Y, dtype=np.float64), metric), 0.0, None)


def resolve_sigma(sigma, X, metric, max_samples=300, seed=0):
    """Turn ``sigma`` into a positive bandwidth.

    A number is returned as is. ``"auto"`` or ``"auto:q"`` picks the
    ``q``-quantile (default 0.05) of the pairwise distances among up to
    ``max_samples`` rows of ``X``.
    """
    if not isinstance(sigma, str):
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return sigma
    name, _, q = sigma.partition(":")
    if name != "auto":
        raise ValueError(f"bad sigma {sigma!r}")
    q = float(q) if q else AUTO_SIGMA_QUANTILE
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] > max_samples:
        X = X[np.random.default_rng(seed).choice(X.shape[0], max_samples, replace=False)]
    d = pdist(X, "euclidean") if canonical_metric(metric) == "euclidean" else \
        squareform(pairwise_distances(X, metric=metric), checks=False)
    d = d[d > 0]
    if d.size == 0:
        return 1.0
    return float(np.quantile(d, q))


AUTO_SIGMA_QUANTILE = 0.05


def gaussian_similarity(D, sigma=1.0):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return np.exp(-(np.asarray(D) ** 2) / (sigma * sigma))


# ---------------------------------------------------------------------------
# graphs

@dataclass(frozen=True, eq=False)
class WeightedGraph:
    weights: np.ndarray   # (n, n) symmetric, unit diagonal
    degree: np.ndarray    # (n,) row sums including the diagonal

    @property
    def n_nodes(self):
        return self.weights.shape[0]


def graph_from_weights(S):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("similarity matrix must be square")
    if not np.array_equal(S, S.T):
        raise ValueError("similarity matrix must be exactly symmetric")
    d = S.sum(axis=1)
    if np.any(d <= 0):
        raise ValueError(f"node {int(np.flatnonzero(d <= 0)[0])} has non-positive degree")
    return WeightedGraph(S, d)


def _as_feature_matrix(f):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 3:
        f = f.reshape(-1, f.shape[2])
    if f.ndim != 2:
        raise ValueError("features must be (n, m) or (H, W, m)")
    if not np.all(np.isfinite(f)):
        raise ValueError("features contain NaN or infinity")
    return f


def build_graph(f, metric="cosine", sigma=1.0):
    """Dense Gaussian similarity graph ``S_ij = exp(-d(x_i, x_j)^2 / sigma^2)``."""
    X = _as_feature_matrix(f)
    sigma = resolve_sigma(sigma, X, metric)
    S = gaussian_similarity(pairwise_distances(X, metric=metric), sigma)
    np.fill_diagonal(S, 1.0)
    return graph_from_weights(S)


def normalized_similarity(g: WeightedGraph):
    """``d^{-1/2} S d^{-1/2}``, exactly symmetric."""
    dinv = 1.0 / np.sqrt(g.degree)
    return g.weights * np.outer(dinv, dinv)


def symmetric_laplacian(g: WeightedGraph):
    """``L_s = I - d^{-1/2} S d^{-1/2}``."""
    if np.any(g.degree <= 0):
        raise ValueError("all degrees must be positive")
    return np.eye(g.n_nodes) - normalized_similarity(g)


# ---------------------------------------------------------------------------
# eigenpairs

@dataclass(frozen=True, eq=False)
class LaplacianEigs:
    """Smallest eigenpairs of ``L_s``: ascending ``values`` in [0, 2], orthonormal ``vectors``."""

    values: np.ndarray    # (m,)
    vectors: np.ndarray   # (n, m)
    method: str = "exact"

    @property
    def n_nodes(self):
        return self.vectors.shape[0]

    def __len__(self):
        return self.values.shape[0]

    def truncate(self, m):
        return LaplacianEigs(self.values[:m], self.vectors[:, :m], self.method)


def exact_eigs(L, m):
    """``m`` smallest eigenpairs of a dense symmetric Laplacian (LAPACK ``syevd``)."""
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    if L.shape != (n, n):
        raise ValueError("Laplacian must be square")
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-10:
        raise ValueError("Laplacian is not symmetric")
    if not 1 <= m <= n:
        raise ValueError(f"m={m} must be in [1, {n}]")
    w, V = np.linalg.eigh(L)
    return LaplacianEigs(w[:m].copy(), fix_signs(V[:, :m]), "exact")


def graph_eigs(f, metric="cosine", sigma=1.0, m=10, nystrom=None, seed=0):
    """Eigenpairs of the graph on features ``f``, dense or via Nystrom landmarks."""
    if nystrom:
        return nystrom_eigs(f, metric, sigma, nystrom, m, seed)
    return exact_eigs(symmetric_laplacian(build_graph(f, metric, sigma)), m)


def _inv_sqrt_psd(A, what):
    w, U = np.linalg.eigh(A)
    if w[0] <= 0 or w[-1] / w[0] > 1e12:
        cond = np.inf if w[0] <= 0 else w[-1] / w[0]
        raise np.linalg.LinAlgError(
            f"{what} is singular (condition {cond:.3g}); use more or different landmarks")
    return (U / np.sqrt(w)) @ U.T


def nystrom_eigs(f, metric="cosine", sigma=1.0, landmarks=200, m=10, seed=0):
    """Approximate smallest ``L_s`` eigenpairs from a landmark subset.

    Landmarks are drawn uniformly without replacement. With ``A`` the
    landmark similarities and ``C`` the landmark-to-rest similarities, the
    degrees are estimated as ``[A1 + C1 ; C^T 1 + C^T A^-1 C 1]``; after
    normalization the eigenvectors come out orthonormal through the
    one-shot ``A^{-1/2} (A + A^{-1/2} C C^T A^{-1/2}) A^{-1/2}`` construction.
    """
    X = _as_feature_matrix(f)
    n = X.shape[0]
    nl = int(landmarks)
    if not 1 <= m <= nl <= n:
        raise ValueError(f"need m <= landmarks <= n, got m={m}, landmarks={nl}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    land, rest = np.sort(perm[:nl]), np.sort(perm[nl:])
    sigma = resolve_sigma(sigma, X[land], metric)

    A = gaussian_similarity(pairwise_distances(X[land], metric=metric), sigma)
    np.fill_diagonal(A, 1.0)
    C = gaussian_similarity(pairwise_distances(X[land], X[rest], metric=metric), sigma)

    Ainv_sqrt = _inv_sqrt_psd(A, "landmark similarity matrix")
    Ainv = Ainv_sqrt @ Ainv_sqrt
    d1 = A.sum(axis=1) + C.sum(axis=1)
    d2 = C.sum(axis=0) + C.T @ (Ainv @ C.sum(axis=1))
    if np.any(d1 <= 0) or np.any(d2 <= 0):
        raise ValueError("negative approximate degree: graph too sparse for Nystrom")
    s1, s2 = 1.0 / np.sqrt(d1), 1.0 / np.sqrt(d2)
    An = A * np.outer(s1, s1)
    Cn = C * np.outer(s1, s2)

    Asi = _inv_sqrt_psd(An, "normalized landmark matrix")
    R = An + Asi @ (Cn @ Cn.T) @ Asi
    R = 0.5 * (R + R.T)
    lam, U = np.linalg.eigh(R)
    order = np.argsort(-lam, kind="stable")[:m]
    lam, U = lam[order], U[:, order]
    if np.any(lam <= 0):
        raise np.linalg.LinAlgError("non-positive Nystrom eigenvalue; use more landmarks")
    top = np.vstack([An, Cn.T]) @ Asi @ (U / np.sqrt(lam))
    V = np.empty((n, m))
    V[land] = top[:nl]
    V[rest] = top[nl:]
    V /= np.linalg.norm(V, axis=0)
    vals = np.clip(1.0 - lam, 0.0, 2.0)
    return LaplacianEigs(vals, fix_signs(V), "nystrom")
