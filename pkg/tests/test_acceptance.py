"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines are printed even
under output capture) or directly with ``python3 tests/test_acceptance.py``.
"""
import itertools
import sys
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

from plumeseg.amsd import AdaptiveMatchedSubspaceDetector, SubspaceModel, amsd_scores
from plumeseg.cli import report_timings
from plumeseg.cluster import clustering_cost, kmeans, match_labels, spectral_cluster
from plumeseg.dimred import SpectralPCA, false_color
from plumeseg.graph import (build_graph, cosine_distance, euclidean_distance, exact_eigs,
                            graph_eigs, graph_from_weights, modified_cosine_distance,
                            nystrom_eigs, symmetric_laplacian)
from plumeseg.mbo import (FidelityMask, MboConfig, mbo_segment, relative_change, segment_video,
                          threshold)
from plumeseg.midway import midway_equalize
from plumeseg.radiometry import (EmissivityConverter, outlier_pixels, radiance_to_emissivity,
                                 spectral_median_filter_3x3)
from plumeseg.synth import SceneSpec, generate


def report(n, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}" + (f": {detail}" if detail else "")
    print(line, flush=True)
    return ok


_cache = {}


def scene():
    if "scene" not in _cache:
        spec = SceneSpec()
        cube, gt = generate(spec)
        _cache["scene"] = (spec, cube, gt, EmissivityConverter(300.0).fit_transform(cube))
    return _cache["scene"]


def scores():
    if "scores" not in _cache:
        _cache["scores"] = SpectralPCA(5).fit_transform(scene()[3])
    return _cache["scores"]


# -- oracles ---------------------------------------------------------------------

def best_two_partition(x):
    n = len(x)
    best = np.inf
    for mask in range(1, 2 ** (n - 1)):
        a = np.array([(mask >> i) & 1 for i in range(n)], bool)
        best = min(best, np.sum((x[a] - x[a].mean()) ** 2) + np.sum((x[~a] - x[~a].mean()) ** 2))
    return best


def ncut(S, labels, k):
    d = S.sum(axis=1)
    total = 0.0
    for c in range(k):
        m = labels == c
        if not m.any():
            return np.inf
        total += S[m][:, ~m].sum() / d[m].sum()
    return total


def roc_auc(pos, neg):
    allv = np.concatenate([pos, neg])
    order = np.argsort(allv, kind="mergesort")
    ranks = np.empty(len(allv))
    ranks[order] = np.arange(1, len(allv) + 1)
    for v in np.unique(allv):
        tie = allv == v
        ranks[tie] = ranks[tie].mean()
    return (ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg))


def jaccard(a, b):
    union = np.logical_or(a, b).sum()
    return np.logical_and(a, b).sum() / union if union else 1.0


# -- criteria ------------------------------------------------------------------

def check_radiometry():
    t0 = time.perf_counter()
    spec = SceneSpec(plume=None, noise_std=0.0)
    spec = replace(spec, regions=tuple(replace(r, temperature=295.0) for r in spec.regions))
    cube, gt = generate(spec)
    emis = radiance_to_emissivity(cube, 295.0).cube.data
    truth = gt.background_emissivity[gt.region_map][None]
    rel = float(np.max(np.abs(emis - truth) / np.abs(truth)))
    _, raw, _, _ = scene()
    res = radiance_to_emissivity(raw, 300.0)
    cleaned = spectral_median_filter_3x3(res).data
    rate = float(np.mean(~outlier_pixels(cleaned)[res.outlier_mask]))
    secs = time.perf_counter() - t0
    ok = rel < 1e-12 and rate >= 0.99 and secs < 5.0
    return report(1, "radiometry round trip", ok,
                  f"max rel err {rel:.2e}, cleaned {rate:.2%} of {res.outlier_mask.sum()} flagged, "
                  f"{secs:.2f} s")


def check_pca():
    rng = np.random.default_rng(12345)
    X = rng.normal(size=(200, 8)) @ rng.normal(size=(8, 8))
    pca = SpectralPCA(8).fit(X)
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    w = s ** 2 / (len(X) - 1)
    val_err = float(np.max(np.abs(pca.eigenvalues_ - w)) / w[0])
    vec_err = max(min(np.max(np.abs(a - b)), np.max(np.abs(a + b)))
                  for a, b in zip(pca.components_.T, Vt))
    rec = 0.0
    for k in range(1, 9):
        p = SpectralPCA(k).fit(X)
        err = np.sum((X - p.inverse_transform(p.transform(X))) ** 2)
        expect = np.sum(p.all_eigenvalues_[k:]) * (len(X) - 1)
        rec = max(rec, abs(err - expect) / max(expect, 1e-300) if expect > 1e-9 else err)
    ok = val_err < 1e-8 and vec_err < 1e-8 and rec < 1e-6
    return report(2, "PCA vs SVD oracle", ok,
                  f"eigenvalue {val_err:.1e}, eigenvector {vec_err:.1e}, reconstruction {rec:.1e}")


def check_midway():
    Q = 1024
    out = midway_equalize(false_color(scores()), Q)
    worst = 0.0
    for c in range(3):
        prof = np.sort(out[..., c].reshape(out.shape[0], -1), axis=1)
        worst = max(worst, float(np.max(prof.max(axis=0) - prof.min(axis=0))))
    return report(3, "midway flicker removal", worst <= 2.0 / Q,
                  f"max profile spread {worst * Q:.3f}/Q (limit 2/Q)")


def check_metrics(n=10_000):
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(n):
        d = int(rng.integers(1, 12))
        x, y, z = rng.normal(size=(3, d)) * rng.uniform(0.01, 100, size=(3, 1))
        for f in (cosine_distance, euclidean_distance):
            bad += abs(f(x, y) - f(y, x)) > 0 or abs(f(x, x)) > 1e-7
        bad += euclidean_distance(x, z) > euclidean_distance(x, y) + euclidean_distance(y, z) + 1e-12
        B = int(rng.integers(1, 10))
        u, v = rng.normal(size=(2, B * d))
        mc = modified_cosine_distance(u, v, B)
        oracle = 0.0
        for a, b in zip(u.reshape(B, d), v.reshape(B, d)):
            oracle += (1.0 - float(a @ b) / np.sqrt(float(a @ a) * float(b @ b))) ** 2
        bad += abs(mc - np.sqrt(oracle)) > 1e-12
        bad += abs(mc - modified_cosine_distance(v, u, B)) > 0 or modified_cosine_distance(u, u, B) > 1e-7
    return report(4, "metric axioms", bad == 0, f"{n} cases per metric, {bad} violations")


def two_blobs(seed=0, H=10, W=20, dim=8, noise=0.3, sep=2.0):
    rng = np.random.default_rng(seed)
    img = rng.normal(scale=noise, size=(H, W, dim))
    img[:, W // 2:, 0] += sep
    truth = np.tile(np.arange(W) >= W // 2, H).astype(int)
    return img.reshape(H * W, dim), truth


def check_laplacian():
    rng = np.random.default_rng(6)
    lo, hi, resid = np.inf, -np.inf, 0.0
    for metric in ("euclidean", "cosine"):
        for _ in range(20):
            X = rng.uniform(0.1, 1.0, size=(40, 4))
            g = build_graph(X, metric, 0.5)
            L = symmetric_laplacian(g)
            vals = np.linalg.eigvalsh(L)
            lo, hi = min(lo, vals.min()), max(hi, vals.max())
            v = np.sqrt(g.degree)
            resid = max(resid, np.linalg.norm(L @ v) / np.linalg.norm(v))
    X, truth = two_blobs()
    ex = graph_eigs(X, "euclidean", 1.0, 6)
    full = nystrom_eigs(X, "euclidean", 1.0, len(X), 6, seed=1)
    full_err = float(np.max(np.abs(full.values - ex.values)))
    ny = nystrom_eigs(X, "euclidean", 1.0, len(X) // 5, 6, seed=0)
    a = ny.vectors[:, 1] > 0
    agree = max(np.mean(a == truth), np.mean(a != truth))
    ok = lo >= -1e-10 and hi <= 2 + 1e-10 and resid < 1e-10 and full_err < 1e-6 and agree == 1.0
    return report(5, "Laplacian and eigensolvers", ok,
                  f"spectrum [{lo:.1e}, {hi:.6f}], null residual {resid:.1e}, "
                  f"full Nystrom {full_err:.1e}, 20% Nystrom agreement {agree:.0%}")


def check_kmeans():
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(500):
        n = int(rng.integers(2, 9))
        x = rng.normal(size=n) * rng.uniform(0.5, 5)
        labels, cents, _ = kmeans(x, 2, seed=int(rng.integers(1 << 31)), n_init=20)
        cost = clustering_cost(x[:, None], labels, cents, "euclidean")
        hits += cost <= best_two_partition(x) * (1 + 1e-9) + 1e-12
    inv = True
    for s in range(50):
        r = np.random.default_rng(s)
        X = r.uniform(0.1, 1.0, size=(15, 3))
        scale = r.uniform(0.1, 10.0, size=(15, 1))
        for metric in ("cosine", "mcos"):
            a, _, _ = kmeans(X if metric == "cosine" else np.tile(X, 3), 3, metric=metric,
                             init=[0, 1, 2])
            b, _, _ = kmeans((X * scale) if metric == "cosine" else np.tile(X * scale, 3), 3,
                             metric=metric, init=[0, 1, 2])
            inv &= np.array_equal(a, b)
    return report(6, "k-means oracle equivalence", hits / 500 >= 0.95 and inv,
                  f"{hits}/500 optimal, cosine scale invariance {'exact' if inv else 'broken'}")


def check_spectral():
    exact = True
    for sizes in ((5, 5), (4, 6, 3), (3, 3, 3, 3)):
        n = sum(sizes)
        S = np.zeros((n, n))
        truth = np.repeat(np.arange(len(sizes)), sizes)
        S[truth[:, None] == truth[None]] = 0.7
        np.fill_diagonal(S, 1.0)
        labels, _ = spectral_cluster(None, len(sizes), affinity=S)
        exact &= match_labels(labels, truth) == 1.0
    rng = np.random.default_rng(5)
    centers = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    X = np.concatenate([c + 0.4 * rng.normal(size=(4, 2)) for c in centers])
    S = build_graph(X, "euclidean", 1.0).weights
    # exhaustive over 3-labelings with node 0 pinned; vectorised normalized cut
    labs = np.array(list(itertools.product(range(3), repeat=11)), dtype=np.int8)
    labs = np.concatenate([np.zeros((len(labs), 1), np.int8), labs], axis=1)
    d = S.sum(axis=1)
    onehot = labs[..., None] == np.arange(3)
    vol = onehot.astype(float).transpose(0, 2, 1) @ d
    within = np.einsum("nic,ij,njc->nc", onehot, S, onehot, optimize=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = np.where(vol > 0, (vol - within) / vol, np.inf).sum(axis=1)
    best = labs[int(np.argmin(cut))]
    labels, _ = spectral_cluster(X, 3, "euclidean", 1.0)
    oracle = match_labels(labels, best) == 1.0 and np.isclose(ncut(S, best, 3), cut.min())
    return report(7, "spectral clustering", exact and oracle,
                  f"block toys {'exact' if exact else 'wrong'}, "
                  f"12-node oracle {'matched' if oracle else 'mismatch'}")


def check_mbo():
    rng = np.random.default_rng(0)
    X = 0.5 * rng.normal(size=(200, 3))
    X[100:, 0] += 5.0
    truth = np.repeat([1.0, -1.0], 100)
    eigs = exact_eigs(symmetric_laplacian(build_graph(X, "euclidean", 1.0)), 5)
    blob_ok = True
    for draw in range(10):
        seeds = np.random.default_rng(draw).choice(100, 10, replace=False)
        lam = np.zeros(200)
        lam[seeds] = 1.0
        u0 = -np.ones(200)
        u0[seeds] = 1.0
        res = mbo_segment(eigs, FidelityMask(lam, u0), MboConfig(c1=30.0, dt=1.0, inner_steps=30))
        blob_ok &= np.array_equal(res.u, truth)
    stop_ok = True
    for n in (7, 100, 4096):
        a = threshold(rng.normal(size=n))
        for flips in (0, 1, n // 3):
            b = a.copy()
            b[rng.choice(n, flips, replace=False)] *= -1
            stop_ok &= relative_change(b, a) == pytest.approx(4 * flips / n, rel=1e-15, abs=0)
    spec, _, gt, _ = scene()
    t0 = time.perf_counter()
    res = segment_video(scores(), MboConfig())
    secs = time.perf_counter() - t0
    js = [jaccard(r.u.reshape(gt.masks.shape[1:]) > 0, gt.masks[t])
          for t, r in enumerate(res) if gt.masks[t].sum() >= 50]
    ok = blob_ok and stop_ok and min(js) >= 0.8 and secs < 60
    return report(8, "graph MBO", ok,
                  f"two-blob {'100%' if blob_ok else 'wrong'}, 4*flips/n "
                  f"{'holds' if stop_ok else 'broken'}, synth Jaccard min {min(js):.3f} "
                  f"median {np.median(js):.3f} over {len(js)} frames (need min >= 0.8), "
                  f"{secs:.1f} s")


def check_amsd():
    spec, _, gt, emis = scene()
    det = AdaptiveMatchedSubspaceDetector(gt.signature, n_background=3).fit(
        emis.data[:spec.plume.t0])
    stat = det.decision_function(emis.data)[spec.plume.t0:]
    m = gt.masks[spec.plume.t0:]
    auc = roc_auc(stat[m], stat[~m])
    rng = np.random.default_rng(9)
    model = SubspaceModel(det.model_.background, det.model_.target)
    X = rng.normal(size=(500, emis.n_bands))
    base = amsd_scores(X, model)
    worst = 0.0
    for alpha in (1e-3, 0.5, 7.0, 1e4, -2.0):
        worst = max(worst, float(np.max(np.abs(amsd_scores(alpha * X, model) - base) / base)))
    return report(9, "AMSD benchmark", auc >= 0.95 and worst < 1e-10,
                  f"AUC {auc:.4f}, scale invariance {worst:.1e}")


def check_soft_timings():
    spec, _, _, _ = scene()
    sc = scores()
    rows = []
    t0 = time.perf_counter()
    kmeans(sc[25], 4, metric="euclidean")
    rows.append(("kmeans", time.perf_counter() - t0))
    big = np.random.default_rng(0).uniform(size=(128, 320, 3))
    t0 = time.perf_counter()
    spectral_cluster(big, 4, "euclidean", "auto", n_eigs=15, nystrom=300)
    rows.append(("spectral", time.perf_counter() - t0))
    t0 = time.perf_counter()
    segment_video(sc, MboConfig(), frames=[24, 25, 26])
    rows.append(("mbo", (time.perf_counter() - t0) / 3))
    limits = {"kmeans": 1.0, "spectral": 180.0, "mbo": 7.0}
    text = report_timings(rows)
    slow = [s for s, secs in rows if secs >= limits[s]]
    for s in slow:
        warnings.warn(f"{s} slower than its soft target", RuntimeWarning)
    # soft: always reported, never an error
    report(10, "soft performance", not slow,
           ", ".join(f"{s} {secs:.2f} s (< {limits[s]:g} s)" for s, secs in rows))
    return text


CHECKS = [check_radiometry, check_pca, check_midway, check_metrics, check_laplacian,
          check_kmeans, check_spectral, check_mbo, check_amsd]


@pytest.mark.parametrize("check", CHECKS, ids=lambda f: f.__name__[len("check_"):])
def test_acceptance(check, capsys):
    with capsys.disabled():
        print()
        ok = check()
    assert ok


def test_soft_performance(capsys):
    with capsys.disabled():
        print()
        text = check_soft_timings()
    assert text.startswith("stage,wall_seconds\n")


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    check_soft_timings()
    sys.exit(0 if all(results) else 1)
