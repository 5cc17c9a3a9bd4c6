"""Input coercion shared by the estimators."""
import numpy as np

from .core import HyperCube


def as_pixel_matrix(X):
    """Flatten a cube, video or image into ``(n_pixels, n_bands)``.

    Returns the matrix and the leading shape needed to undo the flattening.
    """
    if isinstance(X, HyperCube):
        X = X.data
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2:
        raise ValueError(f"expected at least 2-D input, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains NaN or infinity")
    return X.reshape(-1, X.shape[-1]), X.shape[:-1]


def restore_pixel_shape(P, lead_shape):
    return P.reshape(*lead_shape, P.shape[-1])


def as_image(frame, name="frame"):
    if isinstance(frame, HyperCube):
        raise TypeError(f"{name}: pass a single frame, not a cube")
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        frame = frame[:, :, None]
    if frame.ndim != 3:
        raise ValueError(f"{name} must be H x W or H x W x C, got {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise ValueError(f"{name} contains NaN or infinity")
    return frame

