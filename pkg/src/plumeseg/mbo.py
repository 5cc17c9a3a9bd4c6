"""Semi-supervised plume segmentation with the graph MBO scheme.

Each outer iteration diffuses the current phase field ``u`` under

    du/dt = -L_s u - C1 * lam(x) * (u - u0)

for a time ``dt``, working in the span of the smallest Laplacian
eigenvectors, and then thresholds back to +-1. The heat part is treated
implicitly per eigenmode and the fidelity part explicitly:

    a_k <- (a_k - h * <phi_k, C1 * lam * (u - u0)>) / (1 + h * lambda_k)

with ``h = dt / inner_steps`` sub-steps per outer iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .graph import LaplacianEigs, graph_eigs
from .radiometry import median_filter_9x9

log = logging.getLogger(__name__)


class NoChangeDetected(ValueError):
    """Background subtraction left no pixels after cleaning."""


@dataclass(frozen=True)
class MboConfig:
    c1: float = 30.0
    dt: float = 0.1
    inner_steps: int = 3
    max_outer_iters: int = 100
    stop_tol: float = 1e-6
    n_eigs: int = 100
    nystrom: int | None = 300
    metric: str = "euclidean"
    sigma: float | str = "auto:0.1"
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.c1 < 0:
            raise ValueError("c1 must be non-negative")
        if self.inner_steps < 1 or self.max_outer_iters < 1:
            raise ValueError("inner_steps and max_outer_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class FidelityMask:
    weight: np.ndarray   # lam(x) in {0, 1}, (H, W)
    u0: np.ndarray       # +-1, (H, W)

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        u0 = np.asarray(self.u0, dtype=np.float64)
        if w.shape != u0.shape:
            raise ValueError("fidelity weight and u0 differ in shape")
        if not np.all(np.isin(u0, (-1.0, 1.0))):
            raise ValueError("u0 must be +-1")
        if not np.any(w):
            raise ValueError("fidelity weight is zero everywhere")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "u0", u0)

    @property
    def seed_mask(self):
        return self.u0 > 0


@dataclass(frozen=True, eq=False)
class MboResult:
    u: np.ndarray          # +-1 phase field, same shape as the fidelity mask
    iterations: int
    gl_trace: np.ndarray   # energy after each outer iteration
    converged: bool
    collapsed: bool        # single phase although fidelity asks for both


def threshold(u):
    """+1 where ``u >= 0``, else -1."""
    return np.where(np.asarray(u) >= 0, 1.0, -1.0)


def relative_change(u_new, u_old):
    """``|u_new - u_old|^2 / |u_new|^2``; for +-1 fields this is 4 * flips / n."""
    d = u_new - u_old
    return float(np.dot(d, d) / np.dot(u_new, u_new))


def ginzburg_landau_energy(u, eigs: LaplacianEigs, fid: FidelityMask, c1, eps=1.0):
    """Diagnostic energy split into ``(dirichlet, potential, fidelity)``.

    The Dirichlet term ``u . L_s u`` is evaluated in the retained eigenspace.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    a = eigs.vectors.T @ u
    dirichlet = eps * float(np.sum(np.maximum(eigs.values, 0.0) * a * a))
    potential = float(np.sum((u * u - 1.0) ** 2)) / eps
    lam = fid.weight.ravel()
    fidelity = float(np.sum(0.5 * c1 * lam * (u - fid.u0.ravel()) ** 2))
    return dirichlet, potential, fidelity


def diffuse(u, eigs: LaplacianEigs, lam, u0, c1, dt, inner_steps):
    """One MBO diffusion step of length ``dt`` in the eigenbasis."""
    Phi, vals = eigs.vectors, eigs.values
    a = Phi.T @ u
    h = dt / inner_steps
    for _ in range(inner_steps):
        v = Phi @ a
        a = (a - h * (Phi.T @ (c1 * lam * (v - u0)))) / (1.0 + h * vals)
    return Phi @ a


def mbo_segment(eigs: LaplacianEigs, fid: FidelityMask, cfg: MboConfig = MboConfig(),
                u_init=None) -> MboResult:
    """Run diffusion + threshold until no pixel flips (or the iteration cap)."""
    if len(eigs) < 2:
        raise ValueError("MBO needs at least two eigenpairs")
    if np.any(np.diff(eigs.values) < 0):
        raise ValueError("eigenvalues must be ascending")
    n = eigs.n_nodes
    if fid.u0.size != n:
        raise ValueError(f"fidelity has {fid.u0.size} pixels, graph has {n}")
    lam = fid.weight.ravel()
    u0 = fid.u0.ravel()
    u = u0.copy() if u_init is None else threshold(np.ravel(u_init))
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        u_new = threshold(diffuse(u, eigs, lam, u0, cfg.c1, cfg.dt, cfg.inner_steps))
        trace.append(sum(ginzburg_landau_energy(u_new, eigs, fid, cfg.c1)))
        change = relative_change(u_new, u)
        u = u_new
        if change < cfg.stop_tol:
            converged = True
            break
    trusted = lam > 0
    wants_both = np.any(u0[trusted] > 0) and np.any(u0[trusted] < 0)
    collapsed = bool(wants_both and (np.all(u > 0) or np.all(u < 0)))
    if collapsed:
        log.warning("MBO collapsed to a single phase")
    return MboResult(u.reshape(fid.u0.shape), it, np.array(trace), converged, collapsed)


def initialize_from_background_subtraction(frame_t, frame_prev, quantile=0.9, ring=3):
    """Seed mask from the change between consecutive frames.

    Pixels whose change magnitude exceeds the given quantile of all changes
    are marked, cleaned with a 9x9 median filter, and become ``u0 = +1``.
    Fidelity is trusted on the seed and on everything farther than ``ring``
    pixels (Chebyshev) from it, where ``u0 = -1``.
    """
    a = np.asarray(frame_t, dtype=np.float64)
    b = np.asarray(frame_prev, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("frames differ in shape")
    diff = np.abs(a - b)
    if diff.ndim == 3:
        diff = np.sqrt(np.sum(diff * diff, axis=2))
    elif diff.ndim != 2:
        raise ValueError("frames must be H x W or H x W x C")
    cut = np.quantile(diff, quantile)
    raw = diff > cut
    seed = median_filter_9x9(raw.astype(np.float64)) >= 0.5
    if not seed.any():
        raise NoChangeDetected("no change detected between frames")
    grown = ndimage.binary_dilation(seed, structure=np.ones((3, 3), bool), iterations=ring)
    weight = (seed | ~grown).astype(np.float64)
    u0 = np.where(seed, 1.0, -1.0)
    return FidelityMask(weight, u0)


def frame_features(frame):
    frame = np.asarray(frame, dtype=np.float64)
    return frame.reshape(-1, frame.shape[-1]) if frame.ndim == 3 else frame.reshape(-1, 1)


def segment_video(video, cfg: MboConfig = MboConfig(), quantile=0.9, frames=None, ring=3):
    """Segment frames ``t`` of a ``(T, H, W, C)`` video, each seeded from ``(t, t-1)``.

    The graph of frame ``t`` uses only that frame's per-pixel values. Frames
    without a detectable change (and frame 0) come back all -1.
    Returns a list of :class:`MboResult` (``None``-free; unseeded frames get
    a zero-iteration result).
    """
    video = np.asarray(video, dtype=np.float64)
    if video.ndim == 3:
        video = video[..., None]
    T, H, W, _ = video.shape
    if T < 2:
        raise ValueError("need at least two frames")
    frames = range(T) if frames is None else frames
    out = []
    for t in frames:
        empty = MboResult(-np.ones((H, W)), 0, np.zeros(0), True, False)
        if t == 0:
            out.append(empty)
            continue
        try:
            fid = initialize_from_background_subtraction(video[t], video[t - 1], quantile, ring)
        except NoChangeDetected:
            out.append(empty)
            continue
        eigs = graph_eigs(frame_features(video[t]), cfg.metric, cfg.sigma, cfg.n_eigs,
                          cfg.nystrom, cfg.seed + t)
        out.append(mbo_segment(eigs, fid, cfg))
    return out


class GinzburgLandauMBO(BaseEstimator):
    """Graph MBO segmentation of a single frame given a fidelity mask.

    ``fit(X, fidelity)`` takes the pixel values ``(H, W, C)`` and a
    :class:`FidelityMask`; ``labels_`` holds the resulting +-1 field.
    """

    def __init__(self, c1=30.0, dt=0.1, inner_steps=3, max_outer_iters=100, stop_tol=1e-6,
                 n_eigs=100, nystrom=300, metric="euclidean", sigma="auto:0.1", random_state=0):
        self.c1 = c1
        self.dt = dt
        self.inner_steps = inner_steps
        self.max_outer_iters = max_outer_iters
        self.stop_tol = stop_tol
        self.n_eigs = n_eigs
        self.nystrom = nystrom
        self.metric = metric
        self.sigma = sigma
        self.random_state = random_state

    def _config(self):
        return MboConfig(self.c1, self.dt, self.inner_steps, self.max_outer_iters, self.stop_tol,
                         self.n_eigs, self.nystrom, self.metric, self.sigma, self.random_state)

    def fit(self, X, fidelity: FidelityMask):
        cfg = self._config()
        self.eigs_ = graph_eigs(frame_features(X), cfg.metric, cfg.sigma, cfg.n_eigs,
                                cfg.nystrom, cfg.seed)
        res = mbo_segment(self.eigs_, fidelity, cfg)
        self.labels_ = res.u
        self.n_iter_ = res.iterations
        self.gl_trace_ = res.gl_trace
        return self

    def predict_mask(self):
        check_is_fitted(self, "labels_")
        return self.labels_ > 0
