"""Radiance to emissivity conversion and outlier cleaning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .core import CubeKind, HyperCube


@dataclass(frozen=True)
class PlanckParams:
    """CODATA 2018 exact values."""

    h: float = 6.62607015e-34   # J s
    c: float = 299792458.0      # m / s
    k: float = 1.380649e-23     # J / K

    def __post_init__(self):
        if not (self.h > 0 and self.c > 0 and self.k > 0):
            raise ValueError("Planck constants must be positive")


CODATA2018 = PlanckParams()

# exp(x) - 1 overflows well past this; the excitance is 0 to double precision
_EXP_CUTOFF = 700.0


def planck_excitance(wavenumber, temperature, params: PlanckParams = CODATA2018):
    """Blackbody spectral excitance ``2 h c^2 nu^3 / (exp(h c nu / k T) - 1)``.

    Parameters
    ----------
    wavenumber : float or array
        Wavenumber in m^-1.
    temperature : float or array
        Temperature in kelvin. Broadcast against ``wavenumber``.
    """
    nu = np.asarray(wavenumber, dtype=np.float64)
    T = np.asarray(temperature, dtype=np.float64)
    if np.any(nu <= 0) or np.any(~np.isfinite(nu)):
        raise ValueError("wavenumber must be positive and finite")
    if np.any(T <= 0) or np.any(~np.isfinite(T)):
        raise ValueError("temperature must be positive and finite")
    h, c, k = params.h, params.c, params.k
    x = (h * c / k) * nu / T
    nu, x = np.broadcast_arrays(nu, x)
    out = np.zeros(x.shape)
    ok = x <= _EXP_CUTOFF
    out[ok] = 2.0 * h * c * c * nu[ok] ** 3 / np.expm1(x[ok])
    return out[()] if out.ndim == 0 else out


def wavelength_to_wavenumber(wavelength_nm):
    return 1.0 / (np.asarray(wavelength_nm, dtype=np.float64) * 1e-9)


@dataclass(frozen=True, eq=False)
class EmissivityResult:
    cube: HyperCube
    outlier_mask: np.ndarray  # (T, H, W): any band outside [0, 1]


def outlier_pixels(data):
    return np.any((data < 0.0) | (data > 1.0), axis=-1)


def radiance_to_emissivity(cube: HyperCube, temperature=300.0,
                           params: PlanckParams = CODATA2018) -> EmissivityResult:
    """Divide every spectrum by the blackbody curve at one assumed scene temperature."""
    if cube.kind != CubeKind.RADIANCE:
        raise ValueError("expected a radiance cube")
    bb = planck_excitance(wavelength_to_wavenumber(cube.wavelengths), temperature, params)
    eps = cube.data / bb
    return EmissivityResult(cube.with_data(eps, kind=CubeKind.EMISSIVITY),
                            outlier_pixels(eps))


def spectral_median_filter_3x3(res: EmissivityResult) -> HyperCube:
    """Replace each flagged pixel by the per-band median of its 3x3 neighbourhood.

    Borders use replicate padding, so the window always holds 9 samples.
    Unflagged pixels are returned untouched.
    """
    data = res.cube.data
    mask = np.asarray(res.outlier_mask, dtype=bool)
    if mask.shape != data.shape[:3]:
        raise ValueError("outlier mask does not match cube")
    if not mask.any():
        return res.cube
    out = data.copy()
    for t in np.flatnonzero(mask.any(axis=(1, 2))):
        med = ndimage.median_filter(data[t], size=(3, 3, 1), mode="nearest")
        out[t][mask[t]] = med[mask[t]]
    return res.cube.with_data(out)


def median_filter_9x9(image):
    """2-D 9x9 median with replicate padding."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("median_filter_9x9 expects an H x W image")
    return ndimage.median_filter(image, size=9, mode="nearest")


def lower_median(values):
    """Median that takes the lower middle element for even counts."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValueError("median of empty set")
    return v[(v.size - 1) // 2]


class EmissivityConverter(BaseEstimator, TransformerMixin):
    """Radiance cube -> cleaned emissivity cube.

    Stateless; ``fit`` only validates. ``outlier_mask_`` holds the pixels
    flagged during the last ``transform``.
    """

    def __init__(self, temperature=300.0, clean=True):
        self.temperature = temperature
        self.clean = clean

    def fit(self, cube, y=None):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        return self

    def transform(self, cube):
        res = radiance_to_emissivity(cube, self.temperature)
        self.outlier_mask_ = res.outlier_mask
        return spectral_median_filter_3x3(res) if self.clean else res.cube
