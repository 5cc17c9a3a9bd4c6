"""Midway histogram equalization across the frames of a video.

Every frame of a channel is remapped onto the average of the per-frame
quantile functions, so all frames end up sharing one value distribution
while each frame keeps its own pixel ordering.
"""
import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted


def quantile_grid(Q):
    return (np.arange(Q) + 0.5) / Q


def frame_quantile_function(values, Q=1024):
    """Empirical inverse CDF of ``values`` sampled at ``(i + 0.5) / Q``.

    Order statistic ``x_(j)`` (0-based) sits at probability ``(j + 0.5) / n``;
    in between the function is linear and it is flat beyond the extremes.
    """
    if Q < 2:
        raise ValueError("Q must be at least 2")
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("empty frame")
    return np.interp(quantile_grid(Q), (np.arange(v.size) + 0.5) / v.size, v)


def pixel_quantiles(values):
    """Probability level of each pixel in its own frame; ties share the average rank."""
    v = np.asarray(values, dtype=np.float64).ravel()
    return (rankdata(v, method="average") - 0.5) / v.size


def _as_video(video):
    video = np.asarray(video, dtype=np.float64)
    if video.ndim == 3:
        video = video[..., None]
    if video.ndim != 4:
        raise ValueError(f"video must be (T, H, W) or (T, H, W, C), got {video.shape}")
    if video.shape[0] < 1:
        raise ValueError("video needs at least one frame")
    return video


class MidwayEqualizer(BaseEstimator, TransformerMixin):
    """Learn the midway quantile table of a video, then remap frames onto it.

    Parameters
    ----------
    n_quantiles : int
        Size of the shared quantile grid ``Q``.
    clip : bool
        Clamp the output to [0, 1] (false-colour input).

    Attributes
    ----------
    quantiles_ : ndarray (C, Q)
        Per channel, the mean over frames of the frame quantile functions.
    """

    def __init__(self, n_quantiles=1024, clip=True):
        self.n_quantiles = n_quantiles
        self.clip = clip

    def fit(self, video, y=None):
        video = _as_video(video)
        T, H, W, C = video.shape
        Q = int(self.n_quantiles)
        table = np.zeros((C, Q))
        for c in range(C):
            for t in range(T):
                table[c] += frame_quantile_function(video[t, ..., c], Q)
        self.quantiles_ = table / T
        self.n_channels_ = C
        return self

    def transform(self, video):
        check_is_fitted(self, "quantiles_")
        video = _as_video(video)
        T, H, W, C = video.shape
        if C != self.n_channels_:
            raise ValueError(f"fitted on {self.n_channels_} channels, got {C}")
        grid = quantile_grid(self.quantiles_.shape[1])
        out = np.empty_like(video)
        for c in range(C):
            for t in range(T):
                q = pixel_quantiles(video[t, ..., c])
                out[t, ..., c] = np.interp(q, grid, self.quantiles_[c]).reshape(H, W)
        if self.clip:
            np.clip(out, 0.0, 1.0, out=out)
        return out


def midway_equalize(video, n_quantiles=1024):
    """Equalize a ``(T, H, W, C)`` video in [0, 1] onto its own midway distribution."""
    video = np.asarray(video, dtype=np.float64)
    squeeze = video.ndim == 3
    out = MidwayEqualizer(n_quantiles).fit_transform(video)
    return out[..., 0] if squeeze else out
