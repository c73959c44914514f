"""FIR bandpass filtering and anti-aliased decimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvenTaps, InvalidBand, NonIntegerFactor, SignalTooShort
from .signal import EcgRecording


@dataclass(frozen=True)
class FirFilter:
    coefficients: np.ndarray
    cutoff_low: float
    cutoff_high: float
    sample_rate: float

    @property
    def taps(self) -> int:
        return len(self.coefficients)

    @property
    def delay(self) -> int:
        """Group delay in samples."""
        return (self.taps - 1) // 2

    def response(self, freqs) -> np.ndarray:
        """Magnitude response at ``freqs`` (Hz) by direct DFT of the taps."""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
        n = np.arange(self.taps)
        phase = np.exp(-2j * np.pi * np.outer(freqs, n) / self.sample_rate)
        return np.abs(phase @ self.coefficients)


def _lowpass_kernel(taps: int, cutoff: float, fs: float) -> np.ndarray:
    """Hamming-windowed sinc lowpass normalised to unit DC gain."""
    m = np.arange(taps) - (taps - 1) / 2
    h = np.sinc(2 * cutoff / fs * m) * np.hamming(taps)
    return h / h.sum()


def design_fir_bandpass(taps: int = 77, lo: float = 3.0, hi: float = 45.0,
                        fs: float = 256.0) -> FirFilter:
    """Design a linear-phase windowed-sinc bandpass.

    The band is built as the difference of two unit-DC-gain lowpass kernels
    (cutoffs ``hi`` and ``lo``), which pins the DC gain to exactly zero even
    when ``lo`` is below the frequency resolution of ``taps`` samples.

    Raises
    ------
    InvalidBand
        Unless ``0 < lo < hi < fs / 2``.
    EvenTaps
        If ``taps`` is even or smaller than 3.
    """
    if not 0 < lo < hi < fs / 2:
        raise InvalidBand(f"need 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={fs}")
    if taps % 2 == 0 or taps < 3:
        raise EvenTaps(f"tap count must be odd and >= 3, got {taps}")
    h = _lowpass_kernel(taps, hi, fs) - _lowpass_kernel(taps, lo, fs)
    h = 0.5 * (h + h[::-1])
    return FirFilter(h, float(lo), float(hi), float(fs))


def design_fir_lowpass(taps: int, cutoff: float, fs: float) -> FirFilter:
    if not 0 < cutoff < fs / 2:
        raise InvalidBand(f"need 0 < cutoff < fs/2, got {cutoff} at fs={fs}")
    if taps % 2 == 0 or taps < 3:
        raise EvenTaps(f"tap count must be odd and >= 3, got {taps}")
    h = _lowpass_kernel(taps, cutoff, fs)
    return FirFilter(0.5 * (h + h[::-1]), 0.0, float(cutoff), float(fs))


def apply_fir(signal, fir: FirFilter) -> np.ndarray:
    """Zero-padded convolution, shifted by the group delay so peaks stay put."""
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < fir.taps:
        raise SignalTooShort(f"signal of {len(x)} samples shorter than {fir.taps} taps")
    return np.convolve(x, fir.coefficients, mode="same")


def _antialias(factor: int, target_fs: int) -> FirFilter:
    fs = factor * target_fs
    return design_fir_lowpass(64 * factor - 1, 0.45 * target_fs, fs)


def downsample(recording: EcgRecording, target_fs: int = 256) -> EcgRecording:
    """Lowpass at 0.45 x ``target_fs`` then keep every ``fs // target_fs`` sample.

    The validity mask is reduced with a logical AND over each group of
    ``factor`` samples.
    """
    fs = recording.sample_rate
    if target_fs <= 0 or fs % target_fs:
        raise NonIntegerFactor(f"{fs} Hz is not an integer multiple of {target_fs} Hz")
    factor = fs // target_fs
    if factor == 1:
        return recording
    n_out = len(recording) // factor
    x = recording.samples
    fir = _antialias(factor, target_fs)
    if len(x) >= fir.taps:
        x = apply_fir(x, fir)
    else:
        x = np.convolve(x, fir.coefficients)[fir.delay:fir.delay + len(x)]
    valid = recording.validity[:n_out * factor].reshape(n_out, factor).all(axis=1)
    return EcgRecording(samples=x[:n_out * factor:factor].copy(), sample_rate=target_fs,
                        subject_id=recording.subject_id, day_index=recording.day_index,
                        start_offset=recording.start_offset, validity=valid)


def upsample(recording: EcgRecording, target_fs: int) -> EcgRecording:
    """Zero-insertion interpolation; the inverse of :func:`downsample`."""
    fs = recording.sample_rate
    if target_fs % fs:
        raise NonIntegerFactor(f"{target_fs} Hz is not an integer multiple of {fs} Hz")
    factor = target_fs // fs
    if factor == 1:
        return recording
    x = np.zeros(len(recording) * factor)
    x[::factor] = recording.samples * factor
    x = np.convolve(x, _antialias(factor, fs).coefficients, mode="same")
    return EcgRecording(samples=x, sample_rate=target_fs, subject_id=recording.subject_id,
                        day_index=recording.day_index, start_offset=recording.start_offset,
                        validity=np.repeat(recording.validity, factor))
