"""Spectral pulse shaping and time-domain field synthesis.

The field is built in the frequency domain as A(w) M(w, tau) exp(i phi(w)),
then brought to the time domain with one FFT. Every synthesized table is
divided by the peak |E| of the unmodulated pulse of the same spectrum, so a
shaped pulse carries less energy than the reference instead of being
renormalized.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy import fft
from scipy.interpolate import CubicSpline

from ..core.exceptions import ConfigurationError, ValidationError
from ..core.types import PulseSpec

SPEED_OF_LIGHT_CM_PER_FS = 2.99792458e-5
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
MAX_FIELD_DT = 0.05  # fs, resolves the 2*w0 oscillation of Re{E^2}

_log = logger.bind(component="field_shaper")


def to_angular_frequency(wavenumber):
    """Convert cm^-1 to rad/fs. Works on scalars and arrays."""
    return 2.0 * np.pi * SPEED_OF_LIGHT_CM_PER_FS * wavenumber


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angular-frequency grid starting at zero.

    The FFT pairs it with a time grid of step 2*pi/(n*d_omega) centred on t=0.
    """
    n: int = 2 ** 17
    d_omega: float = 2.0 * np.pi / (2 ** 17 * 0.04)

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ConfigurationError("frequency grid size must be a power of two", {"n": self.n})
        if not self.d_omega > 0:
            raise ConfigurationError("frequency spacing must be positive", {"d_omega": self.d_omega})

    @classmethod
    def for_time_step(cls, dt: float = 0.04, n: int = 2 ** 17) -> "FrequencyGrid":
        """Grid whose transform has time step ``dt`` fs and span ``n * dt``."""
        return cls(n=n, d_omega=2.0 * np.pi / (n * dt))

    @property
    def omegas(self) -> np.ndarray:
        return np.arange(self.n) * self.d_omega

    @property
    def dt(self) -> float:
        return 2.0 * np.pi / (self.n * self.d_omega)

    @property
    def t0(self) -> float:
        return -(self.n // 2) * self.dt

    def check_resolves(self, spec: PulseSpec) -> None:
        """Raise ConfigurationError unless the grid can carry this pulse."""
        w0 = to_angular_frequency(spec.center_wavenumber)
        sigma = amplitude_fwhm(spec) * FWHM_TO_SIGMA
        omega_max = (self.n - 1) * self.d_omega
        if self.dt > MAX_FIELD_DT:
            raise ConfigurationError(
                f"grid too coarse: time step {self.dt:.4g} fs exceeds {MAX_FIELD_DT} fs "
                f"and cannot resolve the 2*w0 oscillation",
                {"dt": self.dt},
            )
        if w0 - 10.0 * sigma < 0.0 or w0 + 10.0 * sigma > omega_max:
            raise ConfigurationError(
                "frequency grid does not cover w0 +/- 10 sigma",
                {"omega_max": omega_max, "w0": w0, "sigma": sigma},
            )
        if self.d_omega > sigma / 4.0:
            raise ConfigurationError(
                "frequency spacing too coarse to sample the spectrum",
                {"d_omega": self.d_omega, "sigma": sigma},
            )


@dataclass(frozen=True, eq=False)
class FieldTable:
    """Sampled complex field E(t) on a uniform time grid.

    ``carrier`` (rad/fs) is divided out before interpolation and multiplied
    back afterwards, so the spline only sees the slowly varying envelope.
    """
    t0: float
    dt: float
    samples: np.ndarray
    carrier: float = 0.0
    normalization: float = 1.0

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size < 4:
            raise ValidationError("field table needs a 1-D array of at least 4 samples",
                                  {"shape": samples.shape})
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    @cached_property
    def _spline(self) -> CubicSpline:
        envelope = self.samples * np.exp(1j * self.carrier * self.times)
        stacked = np.stack([envelope.real, envelope.imag], axis=-1)
        return CubicSpline(self.times, stacked, axis=0)

    def envelope_at(self, t) -> np.ndarray:
        """E(t) * exp(i carrier t); zero outside the table span."""
        t = np.asarray(t, dtype=float)
        inside = (t >= self.t0) & (t <= self.t_end)
        values = self._spline(np.where(inside, t, self.t0))
        out = values[..., 0] + 1j * values[..., 1]
        return np.where(inside, out, 0.0 + 0.0j)

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.envelope_at(t) * np.exp(-1j * self.carrier * t)

    def window(self, t_lo: float, t_hi: float, pad: int = 8) -> "FieldTable":
        """Sub-table covering [t_lo, t_hi] plus ``pad`` samples on each side."""
        i_lo = max(int(np.floor((t_lo - self.t0) / self.dt)) - pad, 0)
        i_hi = min(int(np.ceil((t_hi - self.t0) / self.dt)) + pad, self.samples.size - 1)
        if i_hi - i_lo < 4:
            raise ValidationError("requested window lies outside the field table",
                                  {"t_lo": t_lo, "t_hi": t_hi})
        return FieldTable(
            t0=self.t0 + i_lo * self.dt,
            dt=self.dt,
            samples=self.samples[i_lo:i_hi + 1],
            carrier=self.carrier,
            normalization=self.normalization,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t_fs": self.times,
            "re_E": self.samples.real,
            "im_E": self.samples.imag,
            "intensity": np.abs(self.samples) ** 2,
        })


def field_at(table: FieldTable, t) -> np.ndarray:
    """Cubic interpolation of the table at ``t``; exactly 0 outside the span."""
    return table.at(t)


def amplitude_fwhm(spec: PulseSpec) -> float:
    """FWHM (rad/fs) of A(w); ``fwhm_wavenumber`` is quoted for |A|^2."""
    return float(np.sqrt(2.0) * to_angular_frequency(spec.fwhm_wavenumber))


def gaussian_spectrum(grid: FrequencyGrid, spec: PulseSpec) -> np.ndarray:
    w0 = to_angular_frequency(spec.center_wavenumber)
    fwhm = amplitude_fwhm(spec)
    return np.exp(-4.0 * np.log(2.0) * (grid.omegas - w0) ** 2 / fwhm ** 2)


def chirp_phase(grid: FrequencyGrid, spec: PulseSpec) -> np.ndarray:
    """phi(w) = beta/2 (w - w0)^2; (rad/fs)^2 * fs^2 is already radians."""
    w0 = to_angular_frequency(spec.center_wavenumber)
    return 0.5 * spec.beta * (grid.omegas - w0) ** 2


def cosine_masks(grid: FrequencyGrid, spec: PulseSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Amplitude |cos((w-w0) tau/2)| and phase pi/2 sgn(cos(...)), sgn(0) = +1."""
    w0 = to_angular_frequency(spec.center_wavenumber)
    cosine = np.cos(0.5 * (grid.omegas - w0) * spec.tau)
    amplitude = np.abs(cosine)
    phase = 0.5 * np.pi * np.where(cosine >= 0.0, 1.0, -1.0)
    return amplitude, phase


def shaped_spectrum(grid: FrequencyGrid, spec: PulseSpec) -> np.ndarray:
    """Complex spectral field A M exp(i phi) before normalization."""
    amplitude = gaussian_spectrum(grid, spec)
    phase = chirp_phase(grid, spec)
    if spec.tau != 0.0:
        mask, mask_phase = cosine_masks(grid, spec)
        amplitude = amplitude * mask
        phase = phase + mask_phase
    return amplitude * np.exp(1j * phase)


def _to_time_domain(spectrum: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    # sum_k S_k exp(-i w_k t_n) dw/2pi with t_n = t0 + n dt; exp(-i w_k t0) = (-1)^k
    alternating = np.where(np.arange(grid.n) % 2 == 0, 1.0, -1.0)
    return fft.fft(spectrum * alternating) * (grid.d_omega / (2.0 * np.pi))


@lru_cache(maxsize=16)
def _reference_peak(center_wavenumber: float, fwhm_wavenumber: float, grid: FrequencyGrid) -> float:
    reference = PulseSpec(center_wavenumber, fwhm_wavenumber)
    raw = _to_time_domain(shaped_spectrum(grid, reference), grid)
    return float(np.max(np.abs(raw)))


def synthesize_field(spec: PulseSpec, grid: FrequencyGrid) -> FieldTable:
    """Time-domain field of a shaped pulse, normalized to the unshaped peak."""
    grid.check_resolves(spec)
    raw = _to_time_domain(shaped_spectrum(grid, spec), grid)
    norm = _reference_peak(spec.center_wavenumber, spec.fwhm_wavenumber, grid)
    _log.debug(f"Synthesized pulse beta={spec.beta} fs^2 tau={spec.tau} fs (norm={norm:.6g})")
    return FieldTable(
        t0=grid.t0,
        dt=grid.dt,
        samples=raw / norm,
        carrier=float(to_angular_frequency(spec.center_wavenumber)),
        normalization=norm,
    )


@lru_cache(maxsize=128)
def cached_field(spec: PulseSpec, grid: FrequencyGrid) -> FieldTable:
    """synthesize_field memoized per process; tables are immutable."""
    return synthesize_field(spec, grid)


def spectral_energy(spec: PulseSpec, grid: FrequencyGrid) -> float:
    """sum |A M|^2 dw/2pi in the normalized units of synthesize_field."""
    norm = _reference_peak(spec.center_wavenumber, spec.fwhm_wavenumber, grid)
    return float(np.sum(np.abs(shaped_spectrum(grid, spec)) ** 2) * grid.d_omega / (2.0 * np.pi)) / norm ** 2


def temporal_energy(table: FieldTable) -> float:
    return float(np.sum(np.abs(table.samples) ** 2) * table.dt)


def intensity_fwhm(table: FieldTable) -> float:
    """Full width at half maximum of |E(t)|^2, edges linearly interpolated."""
    intensity = np.abs(table.samples) ** 2
    peak = int(np.argmax(intensity))
    half = 0.5 * intensity[peak]
    above = np.flatnonzero(intensity >= half)
    first, last = above[0], above[-1]
    times = table.times

    def crossing(i_out: int, i_in: int) -> float:
        y0, y1 = intensity[i_out], intensity[i_in]
        return times[i_out] + (half - y0) / (y1 - y0) * (times[i_in] - times[i_out])

    left = crossing(first - 1, first) if first > 0 else times[first]
    right = crossing(last + 1, last) if last < intensity.size - 1 else times[last]
    return float(right - left)


def pulse_end_time(table: FieldTable, threshold: float = 1e-6, minimum: float = 300.0) -> float:
    """Last time |E| is at least ``threshold`` of its peak, never before ``minimum``."""
    magnitude = np.abs(table.samples)
    significant = np.flatnonzero(magnitude >= threshold * magnitude.max())
    t_last = table.t0 + table.dt * significant[-1]
    return float(max(t_last, minimum))
