"""Whole-video PCA over pixel spectra and false-colour assembly."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_pixel_matrix, restore_pixel_shape


def jacobi_eigh(A, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of a small dense symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``A V = V diag(w)``; no particular ordering.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("jacobi_eigh needs a square matrix")
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(A), initial=0.0)):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    # already at rounding level; rotating would only add noise
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        warnings.warn("Jacobi eigensolver hit the sweep limit", RuntimeWarning)
    return np.diag(A).copy(), V


def fix_signs(vectors):
    """Flip columns so each one's largest-magnitude entry is positive (first on ties)."""
    vectors = np.array(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


class SpectralPCA(BaseEstimator, TransformerMixin):
    """PCA treating every pixel of every frame as one sample in band space.

    Parameters
    ----------
    n_components : int
        Number of components kept.
    centered : bool
        Subtract the mean spectrum before forming the scatter matrix. With
        ``centered=False`` the raw second-moment matrix ``X X^T / n`` is used.

    Attributes
    ----------
    mean_ : ndarray (B,)
        Zero when ``centered=False``.
    components_ : ndarray (B, n_components)
        Orthonormal columns in descending eigenvalue order.
    eigenvalues_ : ndarray (n_components,)
    all_eigenvalues_ : ndarray (B,)
    degenerate_ : bool
        Data had zero variance; components are an arbitrary fixed basis.
    """

    def __init__(self, n_components=5, centered=True):
        self.n_components = n_components
        self.centered = centered

    def fit(self, X, y=None):
        P, _ = as_pixel_matrix(X)
        n, B = P.shape
        k = int(self.n_components)
        if not 1 <= k <= B:
            raise ValueError(f"n_components={k} must be in [1, {B}]")
        if n < k:
            raise ValueError(f"need at least {k} pixels, got {n}")
        if self.centered:
            mean = P.mean(axis=0)
            Xc = P - mean
            cov = Xc.T @ Xc / max(n - 1, 1)
        else:
            mean = np.zeros(B)
            cov = P.T @ P / n
        w, V = jacobi_eigh(cov)
        order = np.argsort(-w, kind="stable")
        w = np.maximum(w[order], 0.0)
        V = fix_signs(V[:, order])
        self.mean_ = mean
        self.all_eigenvalues_ = w
        self.all_components_ = V
        self.eigenvalues_ = w[:k]
        self.components_ = V[:, :k]
        self.n_features_in_ = B
        self.degenerate_ = bool(w[0] == 0.0)
        if self.degenerate_:
            warnings.warn("zero-variance data: PCA components are arbitrary", RuntimeWarning)
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        P, shape = as_pixel_matrix(X)
        if P.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} bands, got {P.shape[1]}")
        return restore_pixel_shape((P - self.mean_) @ self.components_, shape)

    def inverse_transform(self, scores):
        check_is_fitted(self, "components_")
        S, shape = as_pixel_matrix(scores)
        return restore_pixel_shape(S @ self.components_.T + self.mean_, shape)


def fit_pca(cube, k, centered=True):
    return SpectralPCA(k, centered=centered).fit(cube)


def project(cube, model):
    return model.transform(cube)


def false_color(scores, selection=(1, 3, 5)):
    """Stack three score channels (1-based ``selection``) into an RGB video in [0, 1].

    Each channel is min-max scaled over the whole video; a constant channel
    maps to 0.5.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 4:
        raise ValueError("scores must be (T, H, W, k)")
    sel = tuple(int(i) for i in selection)
    k = scores.shape[-1]
    if len(sel) != 3 or len(set(sel)) != 3:
        raise ValueError("selection must name three distinct components")
    if min(sel) < 1 or max(sel) > k:
        raise ValueError(f"selection {sel} out of range for {k} components")
    return np.stack([minmax(scores[..., i - 1]) for i in sel], axis=-1)


def minmax(a):
    """Scale to [0, 1] globally; constant input becomes 0.5."""
    a = np.asarray(a, dtype=np.float64)
    lo, hi = a.min(), a.max()
    if hi == lo:
        return np.full(a.shape, 0.5)
    return np.clip((a - lo) / (hi - lo), 0.0, 1.0)
