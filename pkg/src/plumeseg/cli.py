"""Command line front end: one subcommand per stage plus ``pipeline``.

Thread pools (BLAS/OpenMP) are capped by ``PLUMESEG_NUM_THREADS`` when set.
Frame ranges are written ``a..b`` (half open) or a single index.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .amsd import AdaptiveMatchedSubspaceDetector
from .cluster import eigenvector_images, kmeans, spectral_cluster
from .core import (CubeKind, HyperCube, emit_image, emit_labeling_csv, read_cube,
                   read_image, write_cube)
from .dimred import SpectralPCA, false_color, minmax
from .graph import build_features, graph_eigs
from .mbo import MboConfig, segment_video
from .midway import MidwayEqualizer
from .radiometry import EmissivityConverter
from .synth import SceneSpec, generate, parse_key_values

log = logging.getLogger("plumeseg")

THREADS_ENV = "PLUMESEG_NUM_THREADS"
STAGES = ("synth", "convert", "pca", "midway", "kmeans", "spectral", "mbo", "amsd")

# 8 well separated colours for label overlays
PALETTE = np.array([
    [0.90, 0.10, 0.10], [0.10, 0.60, 0.90], [0.20, 0.80, 0.20], [0.95, 0.75, 0.10],
    [0.60, 0.20, 0.80], [0.10, 0.85, 0.80], [0.95, 0.45, 0.70], [0.55, 0.40, 0.20],
])


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


# ---------------------------------------------------------------------------
# small helpers

def parse_frames(text, n_frames):
    """``"a..b"`` -> range(a, b); ``"t"`` -> [t]; ``None`` -> all frames."""
    if text is None:
        return list(range(n_frames))
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo = int(a) if a else 0
        hi = min(int(b), n_frames) if b else n_frames
        frames = list(range(lo, hi))
    else:
        frames = [int(text)]
    if not frames or frames[0] < 0 or frames[-1] >= n_frames:
        raise ValueError(f"frame range {text!r} outside [0, {n_frames})")
    return frames


def parse_selection(text):
    return tuple(int(v) for v in str(text).split(","))


def sigma_arg(text):
    try:
        return float(text)
    except ValueError:
        return str(text)


def frame_path(pattern, i):
    pattern = str(pattern)
    return pattern % i if "%" in pattern else pattern


def read_signature(path, n_bands):
    """Target signature(s) from CSV: one signature per row, or one value per row."""
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    if arr.shape[1] == n_bands:
        return arr.T if arr.shape[0] > 1 else arr[0]
    if arr.shape[0] == n_bands:
        return arr if arr.shape[1] > 1 else arr[:, 0]
    raise ValueError(f"{path}: signature length does not match {n_bands} bands")


def write_signature(sig, path):
    Path(path).write_text(",".join(repr(float(v)) for v in np.ravel(sig)) + "\n")


def read_frames(pattern, start=0):
    """Read ``pattern % i`` for i = start, start+1, ... until a file is missing."""
    frames = []
    i = start
    while Path(frame_path(pattern, i)).exists():
        frames.append(read_image(frame_path(pattern, i)))
        if "%" not in str(pattern):
            break
        i += 1
    if not frames:
        raise FileNotFoundError(f"no frames match {pattern!r}")
    return np.stack(frames)


def label_overlay(labels, background):
    """Half-and-half blend of a grey background with the label palette."""
    grey = minmax(background)[..., None]
    colors = PALETTE[np.asarray(labels) % len(PALETTE)]
    return np.clip(0.5 * grey + 0.5 * colors, 0.0, 1.0)


def frame_features(frame, kind):
    if kind == "pixel":
        return frame
    if kind == "3x3":
        return build_features(frame)
    raise ValueError(f"unknown feature kind {kind!r} (pixel or 3x3)")


def report_timings(stage_durations, path=None) -> str:
    """CSV ``stage,wall_seconds``, one row per stage in execution order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stage", "wall_seconds"])
    for stage, secs in stage_durations:
        if not secs >= 0:
            raise ValueError(f"negative duration for stage {stage!r}")
        w.writerow([stage, f"{secs:.6f}"])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def scores_cube(scores, kind=CubeKind.EMISSIVITY):
    # PCA scores carry no physical wavelengths; components are numbered 1..k
    k = scores.shape[-1]
    return HyperCube(scores, np.arange(1, k + 1, dtype=np.float64), kind)


# ---------------------------------------------------------------------------
# stages (shared by subcommands and the pipeline)

def stage_synth(spec: SceneSpec, cube_path, mask_pattern=None, target_path=None):
    cube, gt = generate(spec)
    write_cube(cube, cube_path)
    if mask_pattern:
        for t in range(spec.frames):
            emit_image(gt.masks[t].astype(np.float64), frame_path(mask_pattern, t))
    if target_path:
        write_signature(gt.signature, target_path)
    return cube, gt


def stage_convert(cube, temperature, clean, out_path=None, outlier_pattern=None):
    conv = EmissivityConverter(temperature, clean).fit(cube)
    em = conv.transform(cube)
    if out_path:
        write_cube(em, out_path)
    if outlier_pattern:
        for t in range(em.n_frames):
            emit_image(conv.outlier_mask_[t].astype(np.float64), frame_path(outlier_pattern, t))
    n = int(conv.outlier_mask_.sum())
    log.info("convert: %d pixel spectra outside [0, 1] before cleaning", n)
    return em


def stage_pca(cube, k, selection, centered, scores_path=None, rgb_pattern=None):
    pca = SpectralPCA(k, centered=centered).fit(cube)
    scores = pca.transform(cube)
    if scores_path:
        write_cube(scores_cube(scores), scores_path)
    rgb = None
    if rgb_pattern:
        rgb = false_color(scores, selection)
        for t in range(rgb.shape[0]):
            emit_image(rgb[t], frame_path(rgb_pattern, t))
    return scores, rgb


def stage_midway(video, n_quantiles, out_pattern=None):
    out = MidwayEqualizer(n_quantiles).fit_transform(video)
    if out.shape[-1] == 1:
        out = out[..., 0]
    if out_pattern:
        for t in range(out.shape[0]):
            emit_image(out[t], frame_path(out_pattern, t))
    return out


def stage_kmeans(frame, k, metric, features, max_iter, n_init, seed,
                 labels_path=None, overlay_path=None):
    H, W = frame.shape[:2]
    X = frame_features(frame, features)
    labels, _, iters = kmeans(X, k, metric, max_iter=max_iter, seed=seed, n_init=n_init)
    labels = labels.reshape(H, W)
    if labels_path:
        emit_labeling_csv(labels, labels_path)
    if overlay_path:
        emit_image(label_overlay(labels, frame[..., 0]), overlay_path)
    log.info("kmeans: %d iterations", iters)
    return labels


def stage_spectral(frame, k, metric, sigma, n_eigs, nystrom, features, n_init, seed,
                   labels_path=None, overlay_path=None, eig_pattern=None):
    H, W = frame.shape[:2]
    X = frame_features(frame, features).reshape(H * W, -1)
    labels, eigs = spectral_cluster(X, k, metric, sigma, n_eigs, nystrom or None, seed, n_init)
    labels = labels.reshape(H, W)
    if labels_path:
        emit_labeling_csv(labels, labels_path)
    if overlay_path:
        emit_image(label_overlay(labels, frame[..., 0]), overlay_path)
    if eig_pattern:
        for j, img in enumerate(eigenvector_images(eigs, H, W)):
            emit_image(img, frame_path(eig_pattern, j))
    return labels, eigs


def stage_mbo(video, cfg: MboConfig, frames, quantile, ring, mask_pattern=None, trace_path=None):
    results = segment_video(video, cfg, quantile=quantile, frames=frames, ring=ring)
    masks = np.stack([r.u > 0 for r in results])
    if mask_pattern:
        for t, m in zip(frames, masks):
            emit_image(m.astype(np.float64), frame_path(mask_pattern, t))
    if trace_path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "iteration", "gl_energy"])
        for t, r in zip(frames, results):
            for i, e in enumerate(r.gl_trace, 1):
                w.writerow([t, i, repr(float(e))])
        Path(trace_path).write_text(buf.getvalue())
    for t, r in zip(frames, results):
        if r.collapsed:
            log.warning("mbo: frame %d collapsed to one phase", t)
    return masks, results


def stage_amsd(cube, target, pre_frames, n_background, threshold, threshold_quantile,
               frames, out_pattern=None):
    det = AdaptiveMatchedSubspaceDetector(target, n_background, threshold, threshold_quantile)
    det.fit(cube.data[pre_frames])
    masks = []
    for t in frames:
        m = det.predict(cube.data[t])
        masks.append(m)
        if out_pattern:
            emit_image(m.astype(np.float64), frame_path(out_pattern, t))
    return np.stack(masks), det


# ---------------------------------------------------------------------------
# pipeline config

PIPELINE_DEFAULTS = {
    "stages": ",".join(STAGES),
    "output": "out",
    "seed": "0",
    "input": "",
    "convert.temp_k": "300",
    "convert.clean": "true",
    "pca.k": "5",
    "pca.select": "1,3,5",
    "pca.centered": "true",
    "midway.quantiles": "1024",
    "kmeans.k": "4",
    "kmeans.metric": "euclidean",
    "kmeans.features": "pixel",
    "kmeans.frame": "",
    "kmeans.max_iter": "300",
    "kmeans.n_init": "1",
    "spectral.k": "4",
    "spectral.metric": "euclidean",
    "spectral.sigma": "auto",
    "spectral.eigs": "15",
    "spectral.nystrom": "300",
    "spectral.features": "pixel",
    "spectral.frame": "",
    "spectral.n_init": "10",
    "mbo.frames": "",
    "mbo.c1": "30",
    "mbo.dt": "0.1",
    "mbo.inner_steps": "3",
    "mbo.max_iters": "100",
    "mbo.stop_tol": "1e-6",
    "mbo.eigs": "100",
    "mbo.nystrom": "300",
    "mbo.metric": "euclidean",
    "mbo.sigma": "auto:0.1",
    "mbo.quantile": "0.9",
    "mbo.ring": "3",
    "amsd.target": "",
    "amsd.pre_frames": "",
    "amsd.background": "3",
    "amsd.threshold": "",
    "amsd.threshold_quantile": "0.999",
    "amsd.frames": "",
}


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_pipeline_config(text="", overrides=()):
    """Merge defaults, the config text and ``key=value`` overrides.

    Keys starting with ``synth.`` go to the scene description; anything else
    must be a known pipeline key.
    """
    kv = parse_key_values(text)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        kv[key.strip()] = value.strip()
    cfg = dict(PIPELINE_DEFAULTS)
    scene = {}
    unknown = []
    for k, v in kv.items():
        if k.startswith("synth."):
            scene[k[len("synth."):]] = v
        elif k in cfg:
            cfg[k] = v
        else:
            unknown.append(k)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    stages = [s.strip() for s in cfg["stages"].split(",") if s.strip()]
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ValueError(f"unknown stages: {bad}")
    if "synth" not in stages and not cfg["input"]:
        raise ValueError("without the synth stage, 'input' must name a cube")
    if "amsd" in stages and "synth" not in stages and not cfg["amsd.target"]:
        raise ValueError("amsd needs 'amsd.target' unless the synth stage supplies it")
    return cfg, scene, stages


def run_pipeline(cfg, scene, stages, seed=None, output=None):
    """Run the selected stages in their fixed order; returns the timing rows."""
    out = Path(output or cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"] if seed is None else seed)
    timings = []
    state = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - reported with the stage name
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        finally:
            timings.append((name, time.perf_counter() - t0))
            report_timings(timings, out / "timings.csv")

    def do_synth():
        spec = SceneSpec.from_mapping({"seed": str(seed), **scene})
        (out / "scene.cfg").write_text(spec.to_config())
        (out / "gt").mkdir(exist_ok=True)
        cube, gt = stage_synth(spec, out / "radiance.hsc", out / "gt" / "mask_%04d.pgm",
                               out / "target.csv")
        state["cube"] = cube
        state["target"] = gt.signature
        if spec.plume is not None:
            state["release"] = spec.plume.t0

    def do_convert():
        state["cube"] = stage_convert(state["cube"], float(cfg["convert.temp_k"]),
                                      _bool(cfg["convert.clean"]), out / "emissivity.hsc")

    def do_pca():
        (out / "rgb").mkdir(exist_ok=True)
        scores, rgb = stage_pca(state["cube"], int(cfg["pca.k"]),
                                parse_selection(cfg["pca.select"]), _bool(cfg["pca.centered"]),
                                out / "scores.hsc", out / "rgb" / "rgb_%04d.ppm")
        state["scores"] = scores
        state["rgb"] = rgb

    def do_midway():
        video = state.get("rgb")
        if video is None:
            raise ValueError("midway needs the false-colour video from the pca stage")
        (out / "midway").mkdir(exist_ok=True)
        state["midway"] = stage_midway(video, int(cfg["midway.quantiles"]),
                                       out / "midway" / "rgb_%04d.ppm")

    def features_video():
        return state["scores"] if "scores" in state else state["cube"].data

    def pick_frame(key, video):
        text = cfg[key]
        return parse_frames(text, len(video))[0] if text else len(video) - 1

    def do_kmeans():
        video = features_video()
        t = pick_frame("kmeans.frame", video)
        stage_kmeans(video[t], int(cfg["kmeans.k"]), cfg["kmeans.metric"],
                     cfg["kmeans.features"], int(cfg["kmeans.max_iter"]),
                     int(cfg["kmeans.n_init"]), seed,
                     out / "kmeans_labels.csv", out / "kmeans_overlay.ppm")

    def do_spectral():
        video = features_video()
        t = pick_frame("spectral.frame", video)
        (out / "spectral_eigs").mkdir(exist_ok=True)
        stage_spectral(video[t], int(cfg["spectral.k"]), cfg["spectral.metric"],
                       sigma_arg(cfg["spectral.sigma"]), int(cfg["spectral.eigs"]),
                       int(cfg["spectral.nystrom"]), cfg["spectral.features"],
                       int(cfg["spectral.n_init"]), seed,
                       out / "spectral_labels.csv", out / "spectral_overlay.ppm",
                       out / "spectral_eigs" / "eig_%02d.pgm")

    def do_mbo():
        video = features_video()
        mcfg = MboConfig(float(cfg["mbo.c1"]), float(cfg["mbo.dt"]), int(cfg["mbo.inner_steps"]),
                         int(cfg["mbo.max_iters"]), float(cfg["mbo.stop_tol"]),
                         int(cfg["mbo.eigs"]), int(cfg["mbo.nystrom"]) or None,
                         cfg["mbo.metric"], sigma_arg(cfg["mbo.sigma"]), seed)
        (out / "mbo").mkdir(exist_ok=True)
        stage_mbo(video, mcfg, parse_frames(cfg["mbo.frames"] or None, len(video)),
                  float(cfg["mbo.quantile"]), int(cfg["mbo.ring"]),
                  out / "mbo" / "mask_%04d.pgm", out / "mbo_trace.csv")

    def do_amsd():
        cube = state["cube"]
        if cfg["amsd.target"]:
            target = read_signature(cfg["amsd.target"], cube.n_bands)
        else:
            target = state["target"]
        if cfg["amsd.pre_frames"]:
            pre = parse_frames(cfg["amsd.pre_frames"], cube.n_frames)
        elif "release" in state and state["release"] > 0:
            pre = list(range(state["release"]))
        else:
            raise ValueError("amsd needs 'amsd.pre_frames'")
        thr = float(cfg["amsd.threshold"]) if cfg["amsd.threshold"] else None
        (out / "amsd").mkdir(exist_ok=True)
        stage_amsd(cube, target, pre, int(cfg["amsd.background"]), thr,
                   float(cfg["amsd.threshold_quantile"]),
                   parse_frames(cfg["amsd.frames"] or None, cube.n_frames),
                   out / "amsd" / "mask_%04d.pgm")

    actions = {"synth": do_synth, "convert": do_convert, "pca": do_pca, "midway": do_midway,
               "kmeans": do_kmeans, "spectral": do_spectral, "mbo": do_mbo, "amsd": do_amsd}
    if "synth" not in stages:
        try:
            state["cube"] = read_cube(cfg["input"])
        except Exception as exc:  # noqa: BLE001
            raise StageError("input", f"{type(exc).__name__}: {exc}") from exc
    report_timings(timings, out / "timings.csv")
    for name in STAGES:
        if name in stages:
            timed(name, actions[name])
    return timings


# ---------------------------------------------------------------------------
# argparse

def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser():
    ap = argparse.ArgumentParser(prog="plumeseg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic plume video")
    p.add_argument("--config", help="scene key=value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--target", help="write the plume signature CSV here")
    _add_seed(p)
    p.add_argument("out", help="output HSC1 radiance cube")
    p.add_argument("masks", nargs="?", help="ground-truth mask pattern, e.g. gt_%%04d.pgm")

    p = sub.add_parser("convert", help="radiance -> emissivity")
    p.add_argument("--temp-k", type=float, default=300.0)
    p.add_argument("--no-clean", action="store_true", help="skip the 3x3 spectral median")
    p.add_argument("--outliers", help="flagged-pixel mask pattern")
    p.add_argument("input")
    p.add_argument("out")

    p = sub.add_parser("amsd", help="adaptive matched subspace detector")
    p.add_argument("--target", required=True, help="signature CSV")
    p.add_argument("--pre-frames", required=True, help="target-free frames, e.g. 0..10")
    p.add_argument("--background", type=int, default=3, help="background dimension p_b")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--threshold", type=float)
    g.add_argument("--threshold-quantile", type=float, default=0.999)
    p.add_argument("--frames", help="frames to score (default all)")
    p.add_argument("input")
    p.add_argument("out", help="mask PGM or pattern")

    p = sub.add_parser("pca", help="PCA scores and false-colour frames")
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--select", default="1,3,5")
    p.add_argument("--uncentered", action="store_true")
    p.add_argument("input")
    p.add_argument("scores")
    p.add_argument("rgb", nargs="?", help="false-colour PPM pattern")

    p = sub.add_parser("midway", help="midway equalization of a PPM/PGM sequence")
    p.add_argument("--quantiles", type=int, default=1024)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("input", help="input pattern, e.g. in_%%04d.ppm")
    p.add_argument("out")

    for name in ("kmeans", "spectral"):
        p = sub.add_parser(name, help=f"{name} clustering of one frame")
        p.add_argument("-k", type=int, required=True)
        p.add_argument("--metric", default="euclidean", help="cosine, euclidean or mcos")
        p.add_argument("--features", default="pixel", help="pixel or 3x3")
        p.add_argument("--frame", type=int, default=0)
        _add_seed(p)
        if name == "kmeans":
            p.add_argument("--max-iter", type=int, default=300)
            p.add_argument("--n-init", type=int, default=1)
        else:
            p.add_argument("--sigma", type=sigma_arg, default="auto")
            p.add_argument("--eigs", type=int, default=None)
            p.add_argument("--nystrom", type=int, default=0, help="landmarks (0 = exact)")
            p.add_argument("--n-init", type=int, default=10)
            p.add_argument("--eig-images", help="eigenvector PGM pattern")
        p.add_argument("input")
        p.add_argument("labels", help="label CSV")
        p.add_argument("overlay", nargs="?", help="overlay PPM")

    p = sub.add_parser("mbo", help="graph MBO plume segmentation")
    p.add_argument("--frames", help="frames to segment, e.g. 0..40")
    p.add_argument("--c1", type=float, default=30.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--inner-steps", type=int, default=3)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--stop-tol", type=float, default=1e-6)
    p.add_argument("--eigs", type=int, default=100)
    p.add_argument("--nystrom", type=int, default=300, help="landmarks (0 = exact)")
    p.add_argument("--metric", default="euclidean")
    p.add_argument("--sigma", type=sigma_arg, default="auto:0.1")
    p.add_argument("--quantile", type=float, default=0.9, help="change quantile for the seed")
    p.add_argument("--ring", type=int, default=3, help="untrusted ring width (pixels)")
    p.add_argument("--trace", help="GL energy CSV")
    _add_seed(p)
    p.add_argument("input", help="scores or false-colour cube")
    p.add_argument("masks", help="mask PGM pattern")

    p = sub.add_parser("graph-eigs", help="Laplacian eigenpairs of one frame (diagnostic)")
    p.add_argument("--metric", default="euclidean")
    p.add_argument("--sigma", type=sigma_arg, default=1.0)
    p.add_argument("--nystrom", type=int, default=0)
    p.add_argument("--eigs", type=int, default=10)
    p.add_argument("--features", default="pixel")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--vectors", help="also write eigenvectors as CSV columns")
    _add_seed(p)
    p.add_argument("input")
    p.add_argument("out", help="eigenvalue CSV")

    p = sub.add_parser("pipeline", help="run the chained stages from a config")
    p.add_argument("--config", help="pipeline key=value file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--stages", help="comma list overriding the config")
    p.add_argument("--output", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    return ap


def _read_text(path):
    return Path(path).read_text() if path else ""


def _run(args):
    cmd = args.command
    if cmd == "synth":
        overrides = dict(item.split("=", 1) for item in args.set)
        overrides.setdefault("seed", str(args.seed))
        spec = SceneSpec.from_mapping({**parse_key_values(_read_text(args.config)),
                                       **{k.strip(): v.strip() for k, v in overrides.items()}})
        stage_synth(spec, args.out, args.masks, args.target)
    elif cmd == "convert":
        stage_convert(read_cube(args.input), args.temp_k, not args.no_clean, args.out,
                      args.outliers)
    elif cmd == "amsd":
        cube = read_cube(args.input)
        target = read_signature(args.target, cube.n_bands)
        frames = parse_frames(args.frames, cube.n_frames)
        if args.frames is None and "%" not in args.out:
            frames = frames[-1:]
        stage_amsd(cube, target, parse_frames(args.pre_frames, cube.n_frames), args.background,
                   args.threshold, args.threshold_quantile, frames, args.out)
    elif cmd == "pca":
        stage_pca(read_cube(args.input), args.k, parse_selection(args.select),
                  not args.uncentered, args.scores, args.rgb)
    elif cmd == "midway":
        stage_midway(read_frames(args.input, args.start), args.quantiles, args.out)
    elif cmd in ("kmeans", "spectral", "graph-eigs"):
        cube = read_cube(args.input)
        parse_frames(str(args.frame), cube.n_frames)
        frame = np.asarray(cube.frame(args.frame))
        if cmd == "kmeans":
            stage_kmeans(frame, args.k, args.metric, args.features, args.max_iter, args.n_init,
                         args.seed, args.labels, args.overlay)
        elif cmd == "spectral":
            stage_spectral(frame, args.k, args.metric, args.sigma, args.eigs, args.nystrom,
                           args.features, args.n_init, args.seed, args.labels, args.overlay,
                           args.eig_images)
        else:
            H, W = frame.shape[:2]
            X = frame_features(frame, args.features).reshape(H * W, -1)
            eigs = graph_eigs(X, args.metric, args.sigma, args.eigs, args.nystrom or None,
                              args.seed)
            rows = ["index,eigenvalue"] + [f"{j},{float(v)!r}" for j, v in enumerate(eigs.values)]
            Path(args.out).write_text("\n".join(rows) + "\n")
            if args.vectors:
                np.savetxt(args.vectors, eigs.vectors, delimiter=",", fmt="%.17g")
    elif cmd == "mbo":
        cube = read_cube(args.input)
        cfg = MboConfig(args.c1, args.dt, args.inner_steps, args.max_iters, args.stop_tol,
                        args.eigs, args.nystrom or None, args.metric, args.sigma, args.seed)
        stage_mbo(cube.data, cfg, parse_frames(args.frames, cube.n_frames), args.quantile,
                  args.ring, args.masks, args.trace)
    elif cmd == "pipeline":
        overrides = list(args.set)
        if args.stages:
            overrides.append(f"stages={args.stages}")
        cfg, scene, stages = load_pipeline_config(_read_text(args.config), overrides)
        run_pipeline(cfg, scene, stages, seed=args.seed, output=args.output)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get(THREADS_ENV)
    limits = int(threads) if threads else None
    try:
        with threadpool_limits(limits=limits):
            _run(args)
    except StageError as exc:
        print(f"plumeseg: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"plumeseg {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
