"""Adaptive matched subspace detector (AMSD).

For a pixel ``x``, a background basis ``S_b`` and a target basis ``S_t``
with ``S = [S_t | S_b]``::

    T(x) = x^T (P_b_perp - P_S_perp) x / x^T P_S_perp x

Large values mean the target subspace explains energy the background
cannot. The statistic is a ratio of quadratic forms, hence invariant to
scaling ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_pixel_matrix
from .core import DetectionMap
from .dimred import SpectralPCA


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector ``P = Q Q^T`` onto the span of a basis."""

    basis: np.ndarray   # orthonormal Q, (B, r)

    @property
    def matrix(self):
        return self.basis @ self.basis.T

    @property
    def complement(self):
        return np.eye(self.basis.shape[0]) - self.matrix

    def energy(self, X):
        """``x^T P x`` for every row of ``X``."""
        return np.sum((X @ self.basis) ** 2, axis=1)


def build_projector(M, rtol=1e-10) -> Projector:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    B, r = M.shape
    if r > B:
        raise ValueError(f"{r} columns cannot be independent in {B} dimensions")
    Q, R = np.linalg.qr(M)
    diag = np.abs(np.diag(R))
    scale = diag.max(initial=0.0)
    if scale == 0.0:
        raise ValueError("rank-deficient basis: column 0 is zero")
    bad = np.flatnonzero(diag <= rtol * scale)
    if bad.size:
        raise ValueError(f"rank-deficient basis: column {int(bad[0])} depends on earlier columns")
    return Projector(Q)


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    target: np.ndarray       # S_t (B, p_t)
    background: np.ndarray   # S_b (B, p_b)
    threshold: float = 0.0   # l0

    def __post_init__(self):
        St = np.atleast_2d(np.asarray(self.target, dtype=np.float64).T).T
        Sb = np.atleast_2d(np.asarray(self.background, dtype=np.float64).T).T
        if St.shape[0] != Sb.shape[0]:
            raise ValueError("target and background bases have different band counts")
        B = St.shape[0]
        if St.shape[1] < 1 or Sb.shape[1] < 1:
            raise ValueError("need at least one target and one background signature")
        if St.shape[1] + Sb.shape[1] >= B:
            raise ValueError("p_t + p_b must be smaller than the number of bands")
        S = np.hstack([St, Sb])
        sv = np.linalg.svd(S, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise ValueError("columns of [S_t | S_b] are not linearly independent")
        object.__setattr__(self, "target", St)
        object.__setattr__(self, "background", Sb)
        object.__setattr__(self, "_pb", build_projector(Sb))
        object.__setattr__(self, "_ps", build_projector(S))

    @property
    def n_bands(self):
        return self.target.shape[0]

    @property
    def background_projector(self):
        return self._pb

    @property
    def full_projector(self):
        return self._ps


def amsd_scores(X, model: SubspaceModel):
    """Vectorized statistic for the rows of ``X`` (zero rows give NaN)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.n_bands:
        raise ValueError(f"pixels have {X.shape[-1]} bands, model has {model.n_bands}")
    norm2 = np.sum(X * X, axis=1)
    e_b = model.background_projector.energy(X)
    e_s = model.full_projector.energy(X)
    # x^T P_b_perp x - x^T P_S_perp x = x^T (P_S - P_b) x
    num = e_s - e_b
    den = norm2 - e_s
    if np.any(num < -1e-12 * norm2):
        raise ArithmeticError("negative AMSD numerator: background span not inside full span")
    num = np.maximum(num, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    # explained by S: +inf if the target part carries energy, 0 if x lies in span(S_b)
    explained = den < 1e-30 * norm2
    out[explained] = np.where(num[explained] > 1e-12 * norm2[explained], np.inf, 0.0)
    out[norm2 == 0] = np.nan
    return out


def amsd_statistic(x, model: SubspaceModel) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("pixel must be finite")
    if not np.any(x):
        raise ValueError("pixel is identically zero")
    return float(amsd_scores(x[None, :], model)[0])


def detect(frame, model: SubspaceModel) -> DetectionMap:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3:
        raise ValueError("frame must be H x W x B")
    H, W, B = frame.shape
    X = frame.reshape(-1, B)
    if np.any(~X.any(axis=1)):
        raise ValueError(f"pixel {int(np.flatnonzero(~X.any(axis=1))[0])} is identically zero")
    return DetectionMap(amsd_scores(X, model).reshape(H, W), model.threshold)


def estimate_background(frames, p_b):
    """Orthonormal ``(B, p_b)`` basis: top uncentered principal directions of
    the pooled pre-release pixel spectra."""
    P, _ = as_pixel_matrix(frames)
    B = P.shape[1]
    if not 1 <= p_b < B:
        raise ValueError(f"p_b={p_b} must be in [1, {B})")
    if P.shape[0] < 1:
        raise ValueError("need at least one pre-release frame")
    return SpectralPCA(p_b, centered=False).fit(P).components_


class AdaptiveMatchedSubspaceDetector(BaseEstimator):
    """AMSD with a background basis learned from target-free pixels.

    Parameters
    ----------
    target : array (B,) or (B, p_t)
        Target signature(s).
    n_background : int
        Background subspace dimension ``p_b``.
    threshold : float, optional
        Fixed ``l0``. When ``None``, ``threshold_quantile`` of the statistic
        over the training pixels is used.
    threshold_quantile : float
    """

    def __init__(self, target=None, n_background=3, threshold=None, threshold_quantile=0.999):
        self.target = target
        self.n_background = n_background
        self.threshold = threshold
        self.threshold_quantile = threshold_quantile

    def fit(self, X, y=None):
        if self.target is None:
            raise ValueError("a target signature is required")
        P, _ = as_pixel_matrix(X)
        Sb = estimate_background(P, self.n_background)
        model = SubspaceModel(np.asarray(self.target, dtype=np.float64), Sb)
        if self.threshold is None:
            l0 = float(np.quantile(amsd_scores(P, model), self.threshold_quantile))
        else:
            l0 = float(self.threshold)
        self.model_ = SubspaceModel(model.target, model.background, l0)
        self.threshold_ = l0
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        P, shape = as_pixel_matrix(X)
        return amsd_scores(P, self.model_).reshape(shape)

    def predict(self, X):
        return self.decision_function(X) >= self.threshold_

