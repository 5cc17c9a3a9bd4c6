"""Synthetic LWIR hyperspectral videos with a dispersing plume and ground truth.

The generative model per pixel, band and frame is::

    eps = (1 - c) * eps_region + c * s_t
    radiance = eps * B(nu_b, T_region) + n,   n ~ N(0, sigma_n[b]^2)

where ``c`` is a Gaussian concentration field released at frame ``t0`` that
drifts, spreads and decays over time. Noise for frame ``t`` comes from its
own Philox stream keyed by ``(seed, t)`` so frames can be produced in any
order with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import CubeKind, HyperCube
from .radiometry import planck_excitance, wavelength_to_wavenumber


def spectrum_from_spec(spec: str, wavelengths):
    """Evaluate an emissivity generator string on ``wavelengths`` (nm).

    Forms: ``const:v``, ``linear:first,last``,
    ``band:base,depth,center_nm,width_nm`` (Gaussian dip below ``base``) and
    ``values:v1,v2,...``.
    """
    wl = np.asarray(wavelengths, dtype=np.float64)
    name, _, args = spec.partition(":")
    vals = [float(a) for a in args.split(",") if a.strip()]
    name = name.strip()
    if name == "const" and len(vals) == 1:
        return np.full(wl.shape, vals[0])
    if name == "linear" and len(vals) == 2:
        if wl.size == 1:
            return np.full(wl.shape, vals[0])
        return np.linspace(vals[0], vals[1], wl.size)
    if name == "band" and len(vals) == 4:
        base, depth, center, width = vals
        return base - depth * np.exp(-0.5 * ((wl - center) / width) ** 2)
    if name == "values" and len(vals) == wl.size:
        return np.array(vals)
    raise ValueError(f"bad emissivity generator {spec!r}")


def points_in_polygon(x, y, polygon):
    """Even-odd test of points ``(x, y)`` against a closed polygon."""
    poly = np.asarray(polygon, dtype=np.float64)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for x0, y0, x1, y1 in zip(px, py, qx, qy):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xc)
    return inside


@dataclass(frozen=True)
class Region:
    polygon: tuple          # ((x, y), ...) in pixel units, x = column
    temperature: float      # kelvin
    emissivity: str         # generator string, see spectrum_from_spec


@dataclass(frozen=True)
class Plume:
    t0: int = 10
    x0: float = 18.0
    y0: float = 21.0
    vx: float = 0.8
    vy: float = -0.12
    spread0: float = 3.5
    spread_rate: float = 0.03
    peak: float = 0.9
    decay: float = 0.015
    signature: str = "band:0.80,0.45,8450,110"
    cutoff: float = 0.1

    def amplitude(self, t):
        return self.peak * np.exp(-self.decay * (t - self.t0)) if t >= self.t0 else 0.0

    def center(self, t):
        dt = t - self.t0
        return self.x0 + self.vx * dt, self.y0 + self.vy * dt

    def spread(self, t):
        return self.spread0 + self.spread_rate * (t - self.t0)

    def concentration(self, t, H, W):
        if t < self.t0:
            return np.zeros((H, W))
        cx, cy = self.center(t)
        s = self.spread(t)
        yy, xx = np.mgrid[0:H, 0:W] + 0.5
        r2 = (xx - cx) ** 2 + (yy - cy) ** 2
        return self.amplitude(t) * np.exp(-0.5 * r2 / (s * s))


def default_regions(H=32, W=64):
    # sky above a ridge line, mountains down to the horizon, desert below
    ridge = [(0, 0.30), (0.18, 0.22), (0.33, 0.34), (0.52, 0.18), (0.7, 0.28), (1.0, 0.24)]
    horizon = 0.5
    sky = [(0.0, 0.0), (1.0, 0.0)] + [(x, y) for x, y in reversed(ridge)]
    mountains = ridge + [(1.0, horizon), (0.0, horizon)]
    everything = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]

    def scale(poly):
        return tuple((x * W, y * H) for x, y in poly)

    return (
        Region(scale(sky), 262.0, "linear:0.62,0.74"),
        Region(scale(mountains), 291.0, "band:0.94,0.05,8300,250"),
        Region(scale(everything), 304.0, "band:0.91,0.08,8050,200"),
    )


@dataclass(frozen=True)
class SceneSpec:
    frames: int = 40
    height: int = 32
    width: int = 64
    bands: int = 32
    wavelength_start: float = 7830.0
    wavelength_step: float = 30.0
    regions: tuple = None
    plume: Plume | None = field(default_factory=Plume)
    noise_std: float = 5e-6
    seed: int = 0

    def __post_init__(self):
        if self.regions is None:
            object.__setattr__(self, "regions", default_regions(self.height, self.width))
        for name in ("frames", "height", "width", "bands"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.regions:
            raise ValueError("at least one region required")
        if np.any(np.asarray(self.noise_std) < 0):
            raise ValueError("noise_std must be non-negative")
        if self.plume is not None:
            if not 0 <= self.plume.t0 < self.frames:
                raise ValueError("plume release frame t0 must lie in [0, frames)")
            if self.plume.peak < 0 or self.plume.decay < 0:
                raise ValueError("plume concentrations must be non-negative")
            if self.plume.spread0 <= 0:
                raise ValueError("plume spread must be positive")

    @property
    def wavelengths(self):
        return self.wavelength_start + self.wavelength_step * np.arange(self.bands)

    def region_map(self):
        """``(H, W)`` index of the first region containing each pixel centre.

        Raises if some pixel is not covered, so the regions partition the frame.
        """
        H, W = self.height, self.width
        yy, xx = np.mgrid[0:H, 0:W] + 0.5
        idx = np.full((H, W), -1)
        for i, reg in enumerate(self.regions):
            hit = points_in_polygon(xx, yy, reg.polygon) & (idx < 0)
            idx[hit] = i
        if np.any(idx < 0):
            raise ValueError("regions do not cover the whole frame")
        return idx

    # -- flat key/value config -------------------------------------------------

    def to_config(self) -> str:
        lines = [
            f"frames = {self.frames}", f"height = {self.height}", f"width = {self.width}",
            f"bands = {self.bands}", f"wavelength_start = {self.wavelength_start!r}",
            f"wavelength_step = {self.wavelength_step!r}", f"noise_std = {self.noise_std!r}",
            f"seed = {self.seed}",
        ]
        for i, reg in enumerate(self.regions):
            pts = " ".join(f"{x!r},{y!r}" for x, y in reg.polygon)
            lines += [f"region.{i}.polygon = {pts}",
                      f"region.{i}.temperature = {reg.temperature!r}",
                      f"region.{i}.emissivity = {reg.emissivity}"]
        if self.plume is None:
            lines.append("plume = none")
        else:
            for k, v in self.plume.__dict__.items():
                lines.append(f"plume.{k} = {v!r}" if not isinstance(v, str) else f"plume.{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str, **overrides):
        kv = parse_key_values(text)
        kv.update({k: str(v) for k, v in overrides.items()})
        return cls.from_mapping(kv)

    @classmethod
    def from_mapping(cls, kv: dict):
        kv = dict(kv)
        ints = {"frames", "height", "width", "bands", "seed"}
        floats = {"wavelength_start", "wavelength_step", "noise_std"}
        args = {}
        for k in ints:
            if k in kv:
                args[k] = int(kv.pop(k))
        for k in floats:
            if k in kv:
                args[k] = float(kv.pop(k))

        regions = {}
        for k in [k for k in kv if k.startswith("region.")]:
            _, idx, attr = k.split(".", 2)
            regions.setdefault(int(idx), {})[attr] = kv.pop(k)
        if regions:
            regs = []
            for i in sorted(regions):
                r = regions[i]
                missing = {"polygon", "temperature", "emissivity"} - set(r)
                extra = set(r) - {"polygon", "temperature", "emissivity"}
                if missing or extra:
                    raise ValueError(f"region.{i}: missing {sorted(missing)} unknown {sorted(extra)}")
                poly = tuple(tuple(float(c) for c in p.split(",")) for p in r["polygon"].split())
                regs.append(Region(poly, float(r["temperature"]), r["emissivity"].strip()))
            args["regions"] = tuple(regs)

        if kv.get("plume", "").strip().lower() == "none":
            kv.pop("plume")
            args["plume"] = None
        else:
            pk = {k.split(".", 1)[1]: kv.pop(k) for k in [k for k in kv if k.startswith("plume.")]}
            base = Plume()
            fields_ = {}
            for k, v in pk.items():
                if not hasattr(base, k):
                    raise ValueError(f"unknown plume key {k!r}")
                cur = getattr(base, k)
                fields_[k] = v.strip() if isinstance(cur, str) else type(cur)(float(v))
            args["plume"] = replace(base, **fields_)
        if kv:
            raise ValueError(f"unknown scene keys: {sorted(kv)}")
        return cls(**args)


def parse_key_values(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; duplicate keys rejected."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {n}: expected 'key = value'")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {n}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


@dataclass(frozen=True, eq=False)
class GroundTruth:
    masks: np.ndarray           # (T, H, W) bool, concentration >= cutoff * frame peak
    concentration: np.ndarray   # (T, H, W)
    signature: np.ndarray       # (B,) target emissivity s_t
    region_map: np.ndarray      # (H, W)
    background_emissivity: np.ndarray  # (n_regions, B)
    temperatures: np.ndarray    # (n_regions,)


def frame_rng(seed, t):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(t,))))


def generate(spec: SceneSpec):
    """Render ``spec`` into a radiance cube and its ground truth."""
    T, H, W, B = spec.frames, spec.height, spec.width, spec.bands
    wl = spec.wavelengths
    nu = wavelength_to_wavenumber(wl)
    rmap = spec.region_map()
    bg = np.stack([spectrum_from_spec(r.emissivity, wl) for r in spec.regions])
    temps = np.array([r.temperature for r in spec.regions])
    bb_region = planck_excitance(nu[None, :], temps[:, None])     # (R, B)
    eps_bg = bg[rmap]                                              # (H, W, B)
    bb = bb_region[rmap]
    sigma = np.broadcast_to(np.asarray(spec.noise_std, dtype=np.float64), (B,))

    if spec.plume is not None:
        sig = spectrum_from_spec(spec.plume.signature, wl)
    else:
        sig = np.zeros(B)

    data = np.empty((T, H, W, B))
    conc = np.zeros((T, H, W))
    masks = np.zeros((T, H, W), dtype=bool)
    for t in range(T):
        if spec.plume is not None and t >= spec.plume.t0:
            c = spec.plume.concentration(t, H, W)
            conc[t] = c
            amp = spec.plume.amplitude(t)
            if amp > 0:
                masks[t] = c >= spec.plume.cutoff * amp
            eps = eps_bg + c[:, :, None] * (sig - eps_bg)
            # exact endpoint: full concentration gives the signature itself
            full = c == 1.0
            eps[full] = sig
        else:
            eps = eps_bg
        frame = eps * bb
        if np.any(sigma > 0):
            frame = frame + frame_rng(spec.seed, t).standard_normal((H, W, B)) * sigma
        data[t] = frame

    cube = HyperCube(data, wl, CubeKind.RADIANCE)
    gt = GroundTruth(masks, conc, sig, rmap, bg, temps)
    return cube, gt
