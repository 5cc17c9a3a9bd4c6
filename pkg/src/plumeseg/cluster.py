"""K-means under the graph metrics, and Jordan-Weiss spectral clustering."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .dimred import minmax
from .graph import (LaplacianEigs, canonical_metric, exact_eigs, graph_from_weights,
                    nystrom_eigs, pairwise_distances, build_graph, symmetric_laplacian)


def _as_samples(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    elif X.ndim == 3:
        X = X.reshape(-1, X.shape[2])
    if X.ndim != 2:
        raise ValueError(f"expected (n, m) samples or an (H, W, m) image, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinity")
    return X


def _on_sphere(X, n_blocks):
    n, m = X.shape
    if m % n_blocks:
        raise ValueError(f"feature dimension {m} is not divisible into {n_blocks} blocks")
    Xb = X.reshape(n, n_blocks, m // n_blocks)
    norms = np.linalg.norm(Xb, axis=2, keepdims=True)
    if np.any(norms == 0):
        i = int(np.argwhere(norms[..., 0] == 0)[0, 0])
        raise ValueError(f"zero spectrum at pixel {i}: cosine undefined")
    return (Xb / norms).reshape(n, m)


def clustering_cost(X, labels, centroids, metric):
    """Sum of squared distances (euclidean) or of distances (cosine variants)."""
    D = pairwise_distances(X, centroids, metric)[np.arange(len(X)), labels]
    return float(np.sum(D ** 2) if canonical_metric(metric) == "euclidean" else np.sum(D))


def _lloyd(X, init_idx, metric, max_iter):
    k = len(init_idx)
    centroids = X[init_idx].copy()
    labels = np.argmin(pairwise_distances(X, centroids, metric), axis=1)
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
        D = pairwise_distances(X, centroids, metric)
        for j in range(k):
            if not np.any(labels == j):
                # empty cluster: re-seed at the sample farthest from its own centroid
                own = D[np.arange(len(X)), labels]
                far = int(np.argmax(own))
                centroids[j] = X[far]
                labels[far] = j
                D = pairwise_distances(X, centroids, metric)
        new = np.argmin(D, axis=1)
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new
    return labels, centroids, iterations, converged


def kmeans(X, k, metric="euclidean", max_iter=300, seed=0, init=None, n_init=1):
    """Lloyd's algorithm with the chosen distance and arithmetic-mean centroids.

    For the cosine metrics the samples are first scaled to unit length (per
    block for ``mcos``) and centroids live in that space.
    Returns ``(labels, centroids, iterations)``. Initial centroids are
    distinct samples picked at random (or ``init`` indices); with
    ``n_init > 1`` the lowest-cost run wins.
    """
    X = _as_samples(X)
    metric = canonical_metric(metric)
    if metric != "euclidean":
        # cosine distances ignore length, so work on the unit sphere (per block
        # for mcos); means of unit vectors keep the whole run scale invariant
        X = _on_sphere(X, 9 if metric == "mcos" else 1)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    best = None
    for run in range(max(1, int(n_init))):
        if init is not None and run == 0:
            idx = np.asarray(init, dtype=int)
            if idx.shape != (k,) or len(set(idx.tolist())) != k:
                raise ValueError("init must list k distinct sample indices")
        else:
            idx = rng.choice(n, size=k, replace=False)
        labels, cents, it, _ = _lloyd(X, idx, metric, max_iter)
        cost = clustering_cost(X, labels, cents, metric)
        if best is None or cost < best[0]:
            best = (cost, labels, cents, it)
    return best[1], best[2], best[3]


class MetricKMeans(BaseEstimator, ClusterMixin):
    """K-means over pixels or feature vectors with a cosine/euclidean/mcos distance.

    Attributes
    ----------
    labels_, cluster_centers_, n_iter_, inertia_
    """

    def __init__(self, n_clusters=4, metric="euclidean", max_iter=300, n_init=1,
                 init=None, random_state=0):
        self.n_clusters = n_clusters
        self.metric = metric
        self.max_iter = max_iter
        self.n_init = n_init
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _as_samples(X)
        labels, cents, it = kmeans(X, self.n_clusters, self.metric, self.max_iter,
                                   self.random_state, self.init, self.n_init)
        self.labels_ = labels
        self.cluster_centers_ = cents
        self.n_iter_ = it
        self.inertia_ = clustering_cost(X, labels, cents, self.metric)
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(pairwise_distances(_as_samples(X), self.cluster_centers_, self.metric),
                         axis=1)


def spectral_embedding(eigs: LaplacianEigs, m):
    """Rows of eigenvectors 2..m, scaled to unit length (zero rows stay zero)."""
    if m < 2:
        raise ValueError("need at least two eigenvectors to drop the trivial one")
    E = eigs.vectors[:, 1:m].copy()
    norms = np.linalg.norm(E, axis=1)
    ok = norms > 1e-12
    E[ok] /= norms[ok, None]
    E[~ok] = 0.0
    return E


def spectral_cluster(X, k, metric="cosine", sigma=1.0, n_eigs=None, nystrom=None,
                     seed=0, n_init=10, affinity=None):
    """Jordan-Weiss spectral clustering.

    Eigenvectors for the largest eigenvalues of ``d^{-1/2} S d^{-1/2}`` (the
    smallest of ``L_s``) are computed, the first one (the trivial mean mode)
    is dropped, rows are normalized and K-means runs in that space.

    ``affinity`` may be a precomputed similarity matrix; then ``X`` is ignored.
    Returns ``(labels, eigs)``.
    """
    m = k if n_eigs is None else int(n_eigs)
    if not m >= k >= 1:
        raise ValueError("need n_eigs >= k >= 1")
    m_solve = max(m, 2)
    if affinity is not None:
        eigs = exact_eigs(symmetric_laplacian(graph_from_weights(affinity)), m_solve)
    elif nystrom:
        eigs = nystrom_eigs(_as_samples(X), metric, sigma, nystrom, m_solve, seed)
    else:
        eigs = exact_eigs(symmetric_laplacian(build_graph(_as_samples(X), metric, sigma)), m_solve)
    if k == 1:
        return np.zeros(eigs.n_nodes, dtype=int), eigs
    emb = spectral_embedding(eigs, max(m, 2))
    labels, _, _ = kmeans(emb, k, "euclidean", seed=seed, n_init=n_init)
    return labels, eigs


class SpectralClusterer(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`spectral_cluster`.

    ``affinity='precomputed'`` makes ``fit`` take a similarity matrix.
    """

    def __init__(self, n_clusters=4, metric="cosine", sigma=1.0, n_eigs=None,
                 nystrom=None, n_init=10, affinity="features", random_state=0):
        self.n_clusters = n_clusters
        self.metric = metric
        self.sigma = sigma
        self.n_eigs = n_eigs
        self.nystrom = nystrom
        self.n_init = n_init
        self.affinity = affinity
        self.random_state = random_state

    def fit(self, X, y=None):
        aff = X if self.affinity == "precomputed" else None
        self.labels_, self.eigs_ = spectral_cluster(
            X, self.n_clusters, self.metric, self.sigma, self.n_eigs, self.nystrom,
            self.random_state, self.n_init, affinity=aff)
        return self


def eigenvector_images(eigs: LaplacianEigs, H, W, count=None):
    """Each eigenvector reshaped row-major to ``H x W`` and min-max scaled to [0, 1]."""
    if eigs.n_nodes != H * W:
        raise ValueError(f"{eigs.n_nodes} nodes cannot be shown as {H}x{W}")
    count = len(eigs) if count is None else min(count, len(eigs))
    return [minmax(eigs.vectors[:, j].reshape(H, W)) for j in range(count)]


def match_labels(pred, truth):
    """Agreement of ``pred`` with ``truth`` under the best label permutation (Hungarian)."""
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    kp, kt = pred.max() + 1, truth.max() + 1
    counts = np.zeros((kp, kt), dtype=np.int64)
    np.add.at(counts, (pred, truth), 1)
    r, c = linear_sum_assignment(-counts)
    return counts[r, c].sum() / pred.size
