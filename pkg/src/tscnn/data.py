"""Trials, datasets, channel montages, splitting, synthetic EEG and the EEGD file format."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dsp import FilterSpec, design_butterworth_bandpass, filter_zero_phase


class Mode(enum.IntEnum):
    MI = 0
    SSVEP = 1
    HYBRID = 2


LEFT, RIGHT = 0, 1

# 62-electrode 10-20 layout of the public MI/SSVEP recordings
DEFAULT_CHANNELS = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz",
    "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10", "P7", "P3", "Pz", "P4", "P8", "PO9",
    "O1", "Oz", "O2", "PO10", "FC3", "FC4", "C5", "C1", "C2", "C6", "CP3", "CPz", "CP4", "P1",
    "P2", "POz", "FT9", "FTT9h", "TTP7h", "TP7", "TPP9h", "FT10", "FTT10h", "TPP8h", "TP8",
    "TPP10h", "F9", "F10", "AF7", "AF3", "AF4", "AF8", "PO3", "PO4",
]

MOTOR_CHANNELS = [
    "FC5", "FC3", "FC1", "FC2", "FC4", "FC6",
    "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
]
OCCIPITAL_CHANNELS = ["P7", "P3", "Pz", "P4", "P8", "PO9", "PO10", "O1", "Oz", "O2"]

# ERD lands on the hemisphere opposite the imagined hand
LEFT_MOTOR = ["FC5", "FC3", "FC1", "C5", "C3", "C1", "CP5", "CP3", "CP1"]
RIGHT_MOTOR = ["FC2", "FC4", "FC6", "C2", "C4", "C6", "CP2", "CP4", "CP6"]


@dataclass(frozen=True)
class ChannelMontage:
    motor: tuple[str, ...] = tuple(MOTOR_CHANNELS)
    occipital: tuple[str, ...] = tuple(OCCIPITAL_CHANNELS)

    def __post_init__(self):
        if len(self.motor) != 20 or len(self.occipital) != 10:
            raise ValueError(
                f"montage needs 20 motor and 10 occipital labels, got {len(self.motor)} and {len(self.occipital)}"
            )
        common = set(self.motor) & set(self.occipital)
        if common:
            raise ValueError(f"motor and occipital sets overlap: {sorted(common)}")

    def indices(self, channel_names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        lookup = {name: i for i, name in enumerate(channel_names)}
        missing = [c for c in (*self.motor, *self.occipital) if c not in lookup]
        if missing:
            raise KeyError(f"montage channel(s) not in recording: {', '.join(missing)}")
        return (
            np.array([lookup[c] for c in self.motor]),
            np.array([lookup[c] for c in self.occipital]),
        )


@dataclass
class Trial:
    data: np.ndarray
    label: int
    subject_id: int
    mode: Mode

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("trial data contains non-finite values")
        self.mode = Mode(self.mode)


@dataclass
class Dataset:
    trials: list[Trial]
    fs_hz: float
    channel_names: list[str]

    def __post_init__(self):
        n_ch = len(self.channel_names)
        shapes = {t.data.shape for t in self.trials}
        if len(shapes) > 1:
            raise ValueError(f"trials disagree on shape: {sorted(shapes)}")
        if shapes and next(iter(shapes))[0] != n_ch:
            raise ValueError(f"trial channel count {next(iter(shapes))[0]} != {n_ch} channel names")

    def __len__(self):
        return len(self.trials)

    @property
    def n_t(self) -> int:
        return self.trials[0].data.shape[1] if self.trials else 0

    @property
    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trials], dtype=int)

    @property
    def subjects(self) -> np.ndarray:
        return np.array([t.subject_id for t in self.trials], dtype=int)

    @property
    def modes(self) -> np.ndarray:
        return np.array([int(t.mode) for t in self.trials], dtype=int)

    def subset(self, idx) -> "Dataset":
        return Dataset([self.trials[i] for i in idx], self.fs_hz, list(self.channel_names))


@dataclass
class StreamPair:
    x_m: np.ndarray
    x_s: np.ndarray
    label: int

    def __post_init__(self):
        if self.x_m.shape[-1] != self.x_s.shape[-1]:
            raise ValueError(f"stream lengths differ: {self.x_m.shape[-1]} vs {self.x_s.shape[-1]}")


def select_streams(trial: Trial, montage: ChannelMontage, channel_names: Sequence[str]) -> StreamPair:
    mi_idx, ss_idx = montage.indices(channel_names)
    return StreamPair(trial.data[mi_idx], trial.data[ss_idx], trial.label)


@dataclass
class StreamTable:
    """Preprocessed per-trial streams of a whole dataset, kept as stacked arrays."""

    x_m: np.ndarray  # (n, 20, n_t)
    x_s: np.ndarray  # (n, 10, n_t)
    labels: np.ndarray
    subjects: np.ndarray
    modes: np.ndarray
    fs_hz: float

    def __len__(self):
        return len(self.labels)

    @property
    def n_t(self) -> int:
        return self.x_m.shape[-1]


def extract_streams(
    ds: Dataset,
    montage: ChannelMontage | None = None,
    filter_spec: FilterSpec | None = None,
    filter_mi: bool = True,
    filter_ssvep: bool = False,
) -> StreamTable:
    """Select the MI/SSVEP channels of every trial and bandpass the requested streams."""
    montage = montage or ChannelMontage()
    mi_idx, ss_idx = montage.indices(ds.channel_names)
    n = len(ds)
    n_t = ds.n_t
    x_m = np.empty((n, len(mi_idx), n_t))
    x_s = np.empty((n, len(ss_idx), n_t))
    for k, t in enumerate(ds.trials):
        x_m[k] = t.data[mi_idx]
        x_s[k] = t.data[ss_idx]
    if filter_spec is not None and n:
        coeffs = design_butterworth_bandpass(filter_spec)
        if filter_mi:
            x_m = filter_zero_phase(x_m, coeffs)
        if filter_ssvep:
            x_s = filter_zero_phase(x_s, coeffs)
    return StreamTable(x_m, x_s, ds.labels, ds.subjects, ds.modes, ds.fs_hz)


def split_by_subject(ds: Dataset, train_subjects: int = 40, seed: int = 0) -> tuple[Dataset, Dataset]:
    ids = np.unique(ds.subjects)
    if train_subjects < 1 or len(ids) < train_subjects:
        raise ValueError(f"need at least {train_subjects} subjects, dataset has {len(ids)}")
    order = np.random.default_rng(seed).permutation(ids)
    chosen = set(order[:train_subjects].tolist())
    train_idx = [i for i, t in enumerate(ds.trials) if t.subject_id in chosen]
    test_idx = [i for i, t in enumerate(ds.trials) if t.subject_id not in chosen]
    return ds.subset(train_idx), ds.subset(test_idx)


def kfold(labels, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold split; returns ``(train_idx, val_idx)`` per fold.

    Each class is shuffled and dealt round-robin across folds, continuing
    the deal from one class to the next, so fold sizes differ by at most
    one and every fold carries each class to within one trial.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    n = len(labels)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} folds requested for only {n} trials")
    rng = np.random.default_rng(seed)
    dealt = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    fold_of = np.empty(n, dtype=int)
    fold_of[dealt] = np.arange(n) % k
    folds = []
    for f in range(k):
        folds.append((np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return folds


# --- synthetic EEG -----------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    fs_hz: float = 250.0
    duration_s: float = 4.0
    ssvep_freq_left: float = 8.57
    ssvep_freq_right: float = 6.67
    ssvep_amplitude: float = 4.0
    ssvep_phase_jitter: float = 0.3  # radians, uniform +-
    erd_depth: float = 0.8
    mu_amplitude: float = 10.0
    mu_freq: float = 10.5
    mu_jitter: float = 0.5  # log-normal sigma of the per-trial mu amplitude
    noise_scale: float = 10.0
    seed: int = 0
    channel_names: tuple[str, ...] = field(default=tuple(DEFAULT_CHANNELS), repr=False)

    def __post_init__(self):
        nyquist = self.fs_hz / 2.0
        for name in ("ssvep_freq_left", "ssvep_freq_right"):
            f = getattr(self, name)
            if not 0.0 < 2.0 * f < nyquist:
                raise ValueError(f"{name}={f} Hz: its second harmonic must stay below Nyquist {nyquist}")
        if not 0.0 <= self.erd_depth <= 1.0:
            raise ValueError(f"erd_depth must lie in [0, 1], got {self.erd_depth}")
        if min(self.noise_scale, self.ssvep_amplitude, self.mu_amplitude) < 0:
            raise ValueError("noise_scale, ssvep_amplitude and mu_amplitude must be non-negative")
        if not 8.0 <= self.mu_freq <= 13.0:
            raise ValueError(f"mu_freq must lie in the 8-13 Hz mu band, got {self.mu_freq}")

    @property
    def n_t(self) -> int:
        return int(round(self.fs_hz * self.duration_s))


def pink_noise(n_ch: int, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance 1/f noise per row."""
    spec = np.fft.rfft(rng.standard_normal((n_ch, n_t)), axis=1)
    f = np.arange(spec.shape[1], dtype=float)
    shape = np.zeros_like(f)
    shape[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spec * shape, n=n_t, axis=1)
    x /= x.std(axis=1, keepdims=True)
    return x


def synth_trial(cfg: SynthConfig, mode: Mode, label: int, rng: np.random.Generator, subject_id: int = 0) -> Trial:
    mode = Mode(mode)
    names = list(cfg.channel_names)
    index = {c: i for i, c in enumerate(names)}
    n_t = cfg.n_t
    t = np.arange(n_t) / cfg.fs_hz
    x = cfg.noise_scale * pink_noise(len(names), n_t, rng)
    phase = rng.uniform(-cfg.ssvep_phase_jitter, cfg.ssvep_phase_jitter)

    # idle sensorimotor (mu) rhythm on every motor channel, random phase per channel
    motor_rows = [index[c] for c in MOTOR_CHANNELS if c in index]
    if cfg.mu_amplitude > 0 and motor_rows:
        mu_phase = rng.uniform(0.0, 2 * np.pi, size=(len(motor_rows), 1))
        amp = cfg.mu_amplitude * np.exp(cfg.mu_jitter * rng.standard_normal())
        x[motor_rows] += amp * np.sin(2 * np.pi * cfg.mu_freq * t + mu_phase)

    if mode in (Mode.MI, Mode.HYBRID) and cfg.erd_depth > 0:
        side = LEFT_MOTOR if label == RIGHT else RIGHT_MOTOR
        rows = [index[c] for c in side if c in index]
        spec = np.fft.rfft(x[rows], axis=1)
        freqs = np.fft.rfftfreq(n_t, 1.0 / cfg.fs_hz)
        spec[:, (freqs >= 8.0) & (freqs <= 13.0)] *= 1.0 - cfg.erd_depth
        x[rows] = np.fft.irfft(spec, n=n_t, axis=1)

    if mode in (Mode.SSVEP, Mode.HYBRID) and cfg.ssvep_amplitude > 0:
        f0 = cfg.ssvep_freq_right if label == RIGHT else cfg.ssvep_freq_left
        wave = np.sin(2 * np.pi * f0 * t + phase) + 0.5 * np.sin(2 * np.pi * 2 * f0 * t + 2 * phase)
        rows = [index[c] for c in OCCIPITAL_CHANNELS if c in index]
        x[rows] += cfg.ssvep_amplitude * wave

    return Trial(x.astype(np.float32), int(label), subject_id, mode)


def synth_dataset(
    cfg: SynthConfig,
    n_subjects: int,
    mi_per_class: int = 50,
    ssvep_per_class: int = 25,
    hybrid_per_class: int = 0,
) -> Dataset:
    """Per subject: MI trials, then SSVEP trials, then recorded-hybrid trials, labels alternating.

    Trial ``k`` of subject ``s`` draws from its own stream seeded by
    ``(cfg.seed, s, k)``, so any trial can be regenerated on its own.
    """
    trials = []
    for s in range(n_subjects):
        k = 0
        for mode, per_class in ((Mode.MI, mi_per_class), (Mode.SSVEP, ssvep_per_class), (Mode.HYBRID, hybrid_per_class)):
            for i in range(2 * per_class):
                rng = np.random.default_rng([cfg.seed, s, k])
                trials.append(synth_trial(cfg, mode, i % 2, rng, subject_id=s))
                k += 1
    return Dataset(trials, cfg.fs_hz, list(cfg.channel_names))


# --- EEGD binary format -----------------------------------------------------

MAGIC = b"EEGD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIfIHI")
_TRIAL_HEAD = struct.Struct("<BBH")


class DatasetFormatError(Exception):
    """Base class for EEGD read/write failures."""


class BadMagicError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class DimensionOverflowError(DatasetFormatError):
    pass


def _check_fits(name: str, value: int, bits: int):
    if not 0 <= value < 2**bits:
        raise DimensionOverflowError(f"{name}={value} does not fit in u{bits}")


def save_dataset(ds: Dataset, path) -> None:
    n_ch = len(ds.channel_names)
    n_t = ds.n_t
    _check_fits("n_trials", len(ds), 32)
    _check_fits("n_ch", n_ch, 16)
    _check_fits("n_t", n_t, 32)
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, ds.fs_hz, len(ds), n_ch, n_t)]
    for name in ds.channel_names:
        raw = name.encode("utf-8")
        _check_fits(f"length of channel name {name!r}", len(raw), 8)
        parts.append(bytes([len(raw)]) + raw)
    for t in ds.trials:
        _check_fits("subject_id", t.subject_id, 16)
        parts.append(_TRIAL_HEAD.pack(t.label, int(t.mode), t.subject_id))
        parts.append(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_dataset(path) -> Dataset:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an EEGD file (magic {buf[:4]!r})")
    if len(buf) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated at {len(buf)} bytes")
    _, version, fs, n_trials, n_ch, n_t = _HEADER.unpack_from(buf, 0)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    payload = n_trials * (_TRIAL_HEAD.size + 4 * n_ch * n_t)
    if payload > 2**40:
        raise DimensionOverflowError(f"{path}: declared {n_trials} x {n_ch} x {n_t} exceeds supported size")
    pos = _HEADER.size
    names = []
    for _ in range(n_ch):
        if pos >= len(buf):
            raise TruncatedFileError(f"{path}: channel table truncated")
        ln = buf[pos]
        if pos + 1 + ln > len(buf):
            raise TruncatedFileError(f"{path}: channel table truncated")
        names.append(buf[pos + 1 : pos + 1 + ln].decode("utf-8"))
        pos += 1 + ln
    if len(buf) - pos < payload:
        raise TruncatedFileError(f"{path}: expected {payload} bytes of trials, found {len(buf) - pos}")
    trials = []
    count = n_ch * n_t
    for _ in range(n_trials):
        label, mode, subject = _TRIAL_HEAD.unpack_from(buf, pos)
        pos += _TRIAL_HEAD.size
        data = np.frombuffer(buf, dtype="<f4", count=count, offset=pos).reshape(n_ch, n_t).astype(np.float32)
        pos += 4 * count
        trials.append(Trial(data, label, subject, Mode(mode)))
    return Dataset(trials, float(fs), names)
