"""Data model and file I/O shared by every stage.

Cubes are stored as ``(T, H, W, B)`` float64 arrays. On disk they use the
HSC1 layout::

    "HSC1" | u32 T | u32 H | u32 W | u32 B | B x f64 wavelengths (nm)
           | u8 kind (0=radiance, 1=emissivity) | T*H*W*B x f64 data

All integers and floats are little-endian; data is (t, h, w, b) row-major.
Images are written as binary Netpbm (P5 gray, P6 RGB) with maxval 255.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"HSC1"
_HEADER = struct.Struct("<4sIIII")


class CubeKind(enum.IntEnum):
    RADIANCE = 0
    EMISSIVITY = 1


class CubeFormatError(ValueError):
    """Malformed HSC1 file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class HyperCube:
    """A hyperspectral video: ``data[t, h, w, b]`` with per-band wavelengths in nm."""

    data: np.ndarray
    wavelengths: np.ndarray
    kind: CubeKind = CubeKind.RADIANCE

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        wl = np.array(self.wavelengths, dtype=np.float64).ravel()
        if data.ndim != 4:
            raise ValueError(f"cube data must be 4-D (T, H, W, B), got shape {data.shape}")
        if wl.shape[0] != data.shape[3]:
            raise ValueError(
                f"{wl.shape[0]} wavelengths given for {data.shape[3]} bands")
        if wl.size > 1 and np.any(np.diff(wl) <= 0):
            i = int(np.flatnonzero(np.diff(wl) <= 0)[0]) + 1
            raise ValueError(f"wavelengths must be strictly ascending (band {i})")
        if not np.all(np.isfinite(data)):
            idx = np.unravel_index(int(np.flatnonzero(~np.isfinite(data))[0]), data.shape)
            raise ValueError(f"cube contains a non-finite value at index {tuple(map(int, idx))}")
        data.setflags(write=False)
        wl.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "kind", CubeKind(self.kind))

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def n_bands(self):
        return self.data.shape[3]

    def frame(self, t):
        return self.data[t]

    def pixels(self):
        """All pixel spectra as an ``(T*H*W, B)`` matrix."""
        return self.data.reshape(-1, self.n_bands)

    def with_data(self, data, kind=None, wavelengths=None):
        return HyperCube(data,
                         self.wavelengths if wavelengths is None else wavelengths,
                         self.kind if kind is None else kind)

    def equals(self, other):
        """Bit-for-bit equality of payload, wavelengths and kind."""
        return (self.kind == other.kind
                and self.data.shape == other.data.shape
                and self.data.tobytes() == other.data.tobytes()
                and self.wavelengths.tobytes() == other.wavelengths.tobytes())


@dataclass(frozen=True)
class DetectionMap:
    statistic: np.ndarray
    threshold: float
    mask: np.ndarray = field(init=False)

    def __post_init__(self):
        stat = np.asarray(self.statistic, dtype=np.float64)
        if stat.ndim != 2:
            raise ValueError("detection statistic must be an H x W image")
        object.__setattr__(self, "statistic", stat)
        object.__setattr__(self, "mask", stat >= self.threshold)


def check_labeling(labels, k=None):
    """Validate an ``(H, W)`` integer labeling with labels in ``[0, k)``."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"labeling must be 2-D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labeling must hold integers")
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative")
    if k is not None:
        if k < 1:
            raise ValueError("k must be >= 1")
        if labels.size and labels.max() >= k:
            raise ValueError(f"label {labels.max()} out of range for k={k}")
    return labels


def check_false_color(video):
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4 or video.shape[3] != 3:
        raise ValueError(f"false-color video must be (T, H, W, 3), got {video.shape}")
    if np.any(video < 0) or np.any(video > 1) or not np.all(np.isfinite(video)):
        raise ValueError("false-color values must lie in [0, 1]")
    return video


# ---------------------------------------------------------------------------
# HSC1 cubes

def encode_cube(cube: HyperCube) -> bytes:
    T, H, W, B = cube.shape
    parts = [
        _HEADER.pack(MAGIC, T, H, W, B),
        cube.wavelengths.astype("<f8").tobytes(),
        struct.pack("<B", int(cube.kind)),
        np.ascontiguousarray(cube.data).astype("<f8").tobytes(),
    ]
    return b"".join(parts)


def decode_cube(buf: bytes) -> HyperCube:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise CubeFormatError(f"bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}", 0)
    if len(buf) < _HEADER.size:
        raise CubeFormatError("truncated header", len(buf))
    _, T, H, W, B = _HEADER.unpack_from(buf, 0)
    off = _HEADER.size
    wl_end = off + 8 * B
    if len(buf) < wl_end + 1:
        raise CubeFormatError("truncated wavelength table", len(buf))
    wl = np.frombuffer(buf, dtype="<f8", count=B, offset=off).astype(np.float64)
    for b in range(1, B):
        if not wl[b] > wl[b - 1]:
            raise CubeFormatError("wavelengths not strictly ascending", off + 8 * b)
    kind = buf[wl_end]
    if kind not in (0, 1):
        raise CubeFormatError(f"unknown cube kind {kind}", wl_end)
    data_off = wl_end + 1
    count = T * H * W * B
    expected = data_off + 8 * count
    if len(buf) < expected:
        raise CubeFormatError(
            f"truncated payload: expected {expected} bytes, file has {len(buf)}", len(buf))
    if len(buf) > expected:
        raise CubeFormatError("trailing bytes after payload", expected)
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=data_off)
    if not np.all(np.isfinite(data)):
        i = int(np.flatnonzero(~np.isfinite(data))[0])
        raise CubeFormatError("non-finite sample", data_off + 8 * i)
    return HyperCube(data.reshape(T, H, W, B).astype(np.float64), wl, CubeKind(kind))


def write_cube(cube: HyperCube, path) -> None:
    Path(path).write_bytes(encode_cube(cube))


def read_cube(path) -> HyperCube:
    return decode_cube(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Netpbm images

def quantize(frame):
    """Map values in [0, 1] to bytes with round-half-away-from-zero."""
    frame = np.asarray(frame, dtype=np.float64)
    bad = ~((frame >= 0.0) & (frame <= 1.0))
    if np.any(bad):
        idx = tuple(int(i) for i in np.unravel_index(int(np.flatnonzero(bad)[0]), frame.shape))
        raise ValueError(f"pixel value {frame[idx]!r} at index {idx} outside [0, 1]")
    return np.floor(frame * 255.0 + 0.5).astype(np.uint8)


def encode_image(frame) -> bytes:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3 and frame.shape[2] == 1:
        frame = frame[:, :, 0]
    if frame.ndim == 2:
        magic = b"P5"
    elif frame.ndim == 3 and frame.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"image must be H x W, H x W x 1 or H x W x 3, got {frame.shape}")
    H, W = frame.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (W, H)
    return header + quantize(frame).tobytes()


def emit_image(frame, path) -> None:
    Path(path).write_bytes(encode_image(frame))


def read_image(path):
    """Read a binary P5/P6 file back into floats in [0, 1]."""
    buf = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated Netpbm header")
        tokens.append(buf[start:pos])
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise ValueError(f"{path}: only 8-bit binary P5/P6 supported")
    ch = 1 if magic == b"P5" else 3
    raw = np.frombuffer(buf, dtype=np.uint8, count=w * h * ch, offset=pos)
    img = raw.reshape(h, w, ch).astype(np.float64) / 255.0
    return img[:, :, 0] if ch == 1 else img


# ---------------------------------------------------------------------------
# label CSV

def emit_labeling_csv(labels, path) -> None:
    labels = check_labeling(labels)
    lines = [",".join(str(int(v)) for v in row) for row in labels]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labeling_csv(path):
    rows = [line for line in Path(path).read_text().splitlines() if line.strip()]
    return np.array([[int(v) for v in row.split(",")] for row in rows], dtype=np.int64)
