"""Butterworth bandpass design, zero-phase filtering and epoch segmentation.

The filter is designed from the analog Butterworth prototype: prototype
poles are shifted into a bandpass by the lowpass-to-bandpass substitution
at prewarped band edges, then mapped to the z-plane with the bilinear
transform. The result is kept as a cascade of biquads, which stays
well conditioned where a single order-10 polynomial would not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import sosfilt


@dataclass(frozen=True)
class FilterSpec:
    fs_hz: float
    low_hz: float = 8.0
    high_hz: float = 30.0
    order: int = 5

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"filter order must be a positive integer, got {self.order}")
        nyquist = self.fs_hz / 2.0
        if not 0.0 < self.low_hz < self.high_hz:
            raise ValueError(
                f"band edges must satisfy 0 < low_hz < high_hz, got low={self.low_hz}, high={self.high_hz}"
            )
        if self.high_hz >= nyquist:
            raise ValueError(f"high_hz={self.high_hz} must lie below the Nyquist frequency {nyquist}")


@dataclass(frozen=True)
class IIRCoefficients:
    """Biquad cascade. ``sections`` rows are ``[b0, b1, b2, a1, a2]`` with a0 = 1."""

    sections: np.ndarray
    overall_gain: float
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, complex), repr=False)

    @property
    def n_sections(self) -> int:
        return self.sections.shape[0]

    def is_stable(self) -> bool:
        a1 = self.sections[:, 3]
        a2 = self.sections[:, 4]
        return bool(np.all(np.abs(a2) < 1.0) and np.all(np.abs(a1) < 1.0 + a2))

    def as_sos(self) -> np.ndarray:
        """Rows ``[b0, b1, b2, 1, a1, a2]``, gain not folded in."""
        s = self.sections
        return np.column_stack([s[:, 0], s[:, 1], s[:, 2], np.ones(len(s)), s[:, 3], s[:, 4]])


@dataclass
class ContinuousRecording:
    data: np.ndarray
    fs_hz: float
    channel_names: list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channel_names):
            raise ValueError(
                f"data has shape {self.data.shape} but {len(self.channel_names)} channel names were given"
            )


def _analog_bandpass_poles(order: int, w_low: float, w_high: float) -> np.ndarray:
    k = np.arange(order)
    proto = np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))
    bw = w_high - w_low
    w0 = np.sqrt(w_low * w_high)
    half = proto * bw / 2.0
    root = np.sqrt(half**2 - w0**2 + 0j)
    return np.concatenate([half + root, half - root])


def _pair_poles(poles: np.ndarray, tol: float = 1e-12) -> list[tuple[complex, complex]]:
    upper = [p for p in poles if p.imag > tol]
    real = sorted(p.real for p in poles if abs(p.imag) <= tol)
    n_lower = sum(1 for p in poles if p.imag < -tol)
    if n_lower != len(upper) or len(real) % 2:
        raise ArithmeticError("pole set is not closed under conjugation")
    pairs = [(p, np.conj(p)) for p in upper]
    pairs += [(complex(real[i]), complex(real[i + 1])) for i in range(0, len(real), 2)]
    # least resonant section first
    pairs.sort(key=lambda pr: max(abs(pr[0]), abs(pr[1])))
    return pairs


def design_butterworth_bandpass(spec: FilterSpec) -> IIRCoefficients:
    """Design a Butterworth bandpass of ``2 * spec.order`` poles.

    Band edges are prewarped, so the single-pass gain at ``low_hz`` and
    ``high_hz`` is exactly 1/sqrt(2) (-3.01 dB) up to rounding.
    """
    fs2 = 2.0 * spec.fs_hz
    w_low = fs2 * np.tan(np.pi * spec.low_hz / spec.fs_hz)
    w_high = fs2 * np.tan(np.pi * spec.high_hz / spec.fs_hz)

    s_poles = _analog_bandpass_poles(spec.order, w_low, w_high)
    # order zeros at s=0 (-> z=+1) and order zeros at infinity (-> z=-1)
    k_analog = (w_high - w_low) ** spec.order
    gain = k_analog * np.real(fs2**spec.order / np.prod(fs2 - s_poles))
    z_poles = (fs2 + s_poles) / (fs2 - s_poles)

    rows = []
    for p, q in _pair_poles(z_poles):
        a1 = -np.real(p + q)
        a2 = np.real(p * q)
        rows.append([1.0, 0.0, -1.0, a1, a2])
    return IIRCoefficients(np.array(rows), float(gain), poles=z_poles)


def frequency_response(coeffs: IIRCoefficients, f_hz: float, fs_hz: float) -> complex:
    if not 0.0 <= f_hz <= fs_hz / 2.0:
        raise ValueError(f"frequency {f_hz} Hz outside [0, {fs_hz / 2.0}] Hz")
    zinv = np.exp(-2j * np.pi * f_hz / fs_hz)
    h = complex(coeffs.overall_gain)
    for b0, b1, b2, a1, a2 in coeffs.sections:
        h *= (b0 + b1 * zinv + b2 * zinv**2) / (1.0 + a1 * zinv + a2 * zinv**2)
    return h


def _cascade_zi(coeffs: IIRCoefficients) -> np.ndarray:
    """Transposed-DF2 states that make the cascade start at steady state for a unit step."""
    zi = np.zeros((coeffs.n_sections, 2))
    level = 1.0
    for s, (b0, b1, b2, a1, a2) in enumerate(coeffs.sections):
        y = level * (b0 + b1 + b2) / (1.0 + a1 + a2)
        zi[s] = [y - level * b0, level * b2 - a2 * y]
        level = y
    return zi


def padlen_for(coeffs: IIRCoefficients) -> int:
    return 3 * coeffs.n_sections * 2


def _odd_extend(x: np.ndarray, n: int) -> np.ndarray:
    left = 2.0 * x[..., :1] - x[..., n:0:-1]
    right = 2.0 * x[..., -1:] - x[..., -2 : -n - 2 : -1]
    return np.concatenate([left, x, right], axis=-1)


def _filter_once(x: np.ndarray, coeffs: IIRCoefficients, zi: np.ndarray) -> np.ndarray:
    # zi: (n_sections, 2) -> (n_sections, *batch, 2) scaled by each row's first sample
    x0 = x[..., 0] * coeffs.overall_gain
    init = zi.reshape((zi.shape[0],) + (1,) * (x.ndim - 1) + (2,)) * x0[None, ..., None]
    y, _ = sosfilt(coeffs.as_sos(), coeffs.overall_gain * x, axis=-1, zi=init)
    return y


def filter_zero_phase(signal: np.ndarray, coeffs: IIRCoefficients) -> np.ndarray:
    """Forward-backward filtering along the last axis.

    Works on any leading shape (``channels x samples`` or
    ``trials x channels x samples``). The effective magnitude response is
    ``|H|**2`` with zero phase.
    """
    x = np.asarray(signal, dtype=float)
    n_pad = padlen_for(coeffs)
    if x.shape[-1] <= n_pad:
        raise ValueError(
            f"signal has {x.shape[-1]} samples; zero-phase filtering needs at least {n_pad + 1}"
        )
    if x.size == 0:
        return x.copy()
    zi = _cascade_zi(coeffs)
    ext = _odd_extend(x, n_pad)
    y = _filter_once(ext, coeffs, zi)
    y = _filter_once(y[..., ::-1], coeffs, zi)[..., ::-1]
    return np.ascontiguousarray(y[..., n_pad:-n_pad])


def segment_epoch(rec: ContinuousRecording, onset_sample: int, duration_s: float) -> np.ndarray:
    n_t = int(round(duration_s * rec.fs_hz))
    total = rec.data.shape[1]
    stop = onset_sample + n_t
    if onset_sample < 0 or n_t <= 0 or stop > total:
        raise IndexError(f"epoch window [{onset_sample}, {stop}) outside recording of {total} samples")
    return rec.data[:, onset_sample:stop].copy()
