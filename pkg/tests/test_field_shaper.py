import numpy as np
import pytest

from src.core.exceptions import ConfigurationError, ValidationError
from src.core.types import PulseSpec
from src.services.field_shaper import (
    FieldTable,
    FrequencyGrid,
    amplitude_fwhm,
    chirp_phase,
    cosine_masks,
    field_at,
    gaussian_spectrum,
    intensity_fwhm,
    pulse_end_time,
    spectral_energy,
    synthesize_field,
    temporal_energy,
    to_angular_frequency,
)


def test_unshaped_pulse_peaks_at_one(small_freq_grid):
    table = synthesize_field(PulseSpec(), small_freq_grid)
    assert np.max(np.abs(table.samples)) == pytest.approx(1.0, rel=1e-12)
    assert table.normalization > 0


def test_transform_limited_duration(small_freq_grid):
    # |A|^2 of FWHM F gives an intensity FWHM of 4 ln2 / F in time
    table = synthesize_field(PulseSpec(), small_freq_grid)
    expected = 4.0 * np.log(2.0) / to_angular_frequency(400.0)
    assert expected == pytest.approx(36.80, abs=0.01)
    assert intensity_fwhm(table) == pytest.approx(expected, rel=1e-2)
    assert intensity_fwhm(table) == pytest.approx(40.0, rel=0.1)


def test_strong_chirp_duration(small_freq_grid):
    table = synthesize_field(PulseSpec(beta=2500.0), small_freq_grid)
    assert intensity_fwhm(table) == pytest.approx(191.9, rel=1e-2)
    assert intensity_fwhm(table) == pytest.approx(178.0, rel=0.1)


def test_delay_mask_splits_pulse_into_half_amplitude_copies(small_freq_grid):
    table = synthesize_field(PulseSpec(tau=100.0), small_freq_grid)
    times = table.times
    magnitude = np.abs(table.samples)
    left = times < 0.0
    assert times[left][np.argmax(magnitude[left])] == pytest.approx(-50.0, abs=1.0)
    assert times[~left][np.argmax(magnitude[~left])] == pytest.approx(50.0, abs=1.0)
    assert magnitude[left].max() == pytest.approx(0.5, rel=0.05)
    assert magnitude[~left].max() == pytest.approx(0.5, rel=0.05)
    assert abs(complex(field_at(table, 0.0))) < 0.125


def test_chirp_stretches_pulse_and_keeps_energy(small_freq_grid):
    flat = synthesize_field(PulseSpec(), small_freq_grid)
    chirped = synthesize_field(PulseSpec(beta=1000.0), small_freq_grid)

    tau0 = intensity_fwhm(flat)
    expected = tau0 * np.sqrt(1.0 + (4.0 * np.log(2.0) * 1000.0 / tau0 ** 2) ** 2)
    assert intensity_fwhm(chirped) == pytest.approx(expected, rel=2e-2)
    assert np.max(np.abs(chirped.samples)) < 1.0
    assert temporal_energy(chirped) == pytest.approx(temporal_energy(flat), rel=1e-9)


def test_opposite_chirps_are_time_mirrors(small_freq_grid):
    up = synthesize_field(PulseSpec(beta=2000.0), small_freq_grid)
    down = synthesize_field(PulseSpec(beta=-2000.0), small_freq_grid)
    assert np.max(np.abs(up.samples)) == pytest.approx(np.max(np.abs(down.samples)), rel=1e-9)
    assert intensity_fwhm(up) == pytest.approx(intensity_fwhm(down), rel=1e-6)


def test_opposite_chirp_is_conjugate_time_reversal(small_freq_grid):
    # t_n = -t_{N-n} on the FFT grid, so E_-beta(t) = conj(E_beta(-t)) sample by sample
    up = synthesize_field(PulseSpec(beta=1500.0), small_freq_grid).samples
    down = synthesize_field(PulseSpec(beta=-1500.0), small_freq_grid).samples
    n = up.size
    np.testing.assert_allclose(down[1:], np.conj(up[n - np.arange(1, n)]), atol=1e-9)


@pytest.mark.parametrize("spec", [PulseSpec(), PulseSpec(beta=-1500.0), PulseSpec(tau=120.0)])
def test_parseval(spec, small_freq_grid):
    table = synthesize_field(spec, small_freq_grid)
    assert temporal_energy(table) == pytest.approx(spectral_energy(spec, small_freq_grid), rel=1e-8)


def test_mask_removes_about_half_the_energy(small_freq_grid):
    full = spectral_energy(PulseSpec(), small_freq_grid)
    masked = spectral_energy(PulseSpec(tau=300.0), small_freq_grid)
    assert masked < full
    assert masked / full == pytest.approx(0.5, abs=0.05)


def test_cosine_mask_phase_sign_at_zero(small_freq_grid):
    amplitude, phase = cosine_masks(small_freq_grid, PulseSpec(tau=0.0))
    np.testing.assert_allclose(amplitude, 1.0)
    np.testing.assert_allclose(phase, np.pi / 2)


def test_field_is_zero_outside_table(small_freq_grid):
    table = synthesize_field(PulseSpec(), small_freq_grid)
    outside = np.array([table.t0 - 10.0, table.t_end + 10.0])
    np.testing.assert_array_equal(field_at(table, outside), 0.0)


def test_interpolation_matches_samples(small_freq_grid):
    table = synthesize_field(PulseSpec(beta=500.0), small_freq_grid)
    i = table.samples.size // 2 + 37
    assert abs(complex(field_at(table, table.times[i])) - table.samples[i]) < 1e-9


def test_window_keeps_time_axis(small_freq_grid):
    table = synthesize_field(PulseSpec(), small_freq_grid)
    window = table.window(-50.0, 50.0)
    assert window.t0 <= -50.0 and window.t_end >= 50.0
    np.testing.assert_allclose(field_at(window, [0.0, 12.3]), field_at(table, [0.0, 12.3]), atol=1e-12)


def test_pulse_end_time_respects_minimum(small_freq_grid):
    table = synthesize_field(PulseSpec(), small_freq_grid)
    assert pulse_end_time(table) == 300.0
    assert pulse_end_time(table, minimum=0.0) < 300.0


def test_grid_must_be_power_of_two():
    with pytest.raises(ConfigurationError):
        FrequencyGrid(n=1000, d_omega=0.01)


def test_coarse_time_step_is_rejected():
    with pytest.raises(ConfigurationError, match="too coarse"):
        synthesize_field(PulseSpec(), FrequencyGrid.for_time_step(0.1, 2 ** 14))


def test_sparse_spectrum_sampling_is_rejected():
    with pytest.raises(ConfigurationError):
        synthesize_field(PulseSpec(), FrequencyGrid.for_time_step(0.04, 2 ** 10))


def test_field_table_needs_samples():
    with pytest.raises(ValidationError):
        FieldTable(t0=0.0, dt=0.1, samples=np.zeros(2))


def test_invalid_pulse_spec():
    with pytest.raises(ValidationError):
        PulseSpec(fwhm_wavenumber=0.0)


@pytest.fixture
def aligned_grid():
    """Grid with w0 sitting exactly on sample 1000."""
    return FrequencyGrid(n=4096, d_omega=to_angular_frequency(12987.0) / 1000)


def test_gaussian_spectrum_peak_width_and_tail(aligned_grid):
    spec = PulseSpec()
    amplitude = gaussian_spectrum(aligned_grid, spec)
    fwhm = amplitude_fwhm(spec)
    assert fwhm == pytest.approx(np.sqrt(2.0) * to_angular_frequency(400.0))
    assert amplitude[1000] == pytest.approx(1.0, rel=1e-12)
    width = (np.count_nonzero(amplitude >= 0.5) - 1) * aligned_grid.d_omega
    assert abs(width - fwhm) <= 2 * aligned_grid.d_omega
    intensity_width = (np.count_nonzero(amplitude ** 2 >= 0.5) - 1) * aligned_grid.d_omega
    assert abs(intensity_width - to_angular_frequency(400.0)) <= 2 * aligned_grid.d_omega
    far = aligned_grid.omegas >= to_angular_frequency(spec.center_wavenumber) + 5 * fwhm
    assert np.all(amplitude[far] < 1e-20)


def test_chirp_phase_is_quadratic_about_center(aligned_grid):
    phase = chirp_phase(aligned_grid, PulseSpec(beta=2500.0))
    assert abs(phase[1000]) < 1e-12
    np.testing.assert_allclose(phase[1010], phase[990], rtol=1e-9)
    assert phase[1010] == pytest.approx(0.5 * 2500.0 * (10 * aligned_grid.d_omega) ** 2, rel=1e-9)
    assert np.all(chirp_phase(aligned_grid, PulseSpec()) == 0.0)
