import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tscnn.data import (
    DEFAULT_CHANNELS,
    LEFT,
    LEFT_MOTOR,
    MOTOR_CHANNELS,
    OCCIPITAL_CHANNELS,
    RIGHT,
    RIGHT_MOTOR,
    BadMagicError,
    ChannelMontage,
    Dataset,
    DimensionOverflowError,
    Mode,
    SynthConfig,
    Trial,
    TruncatedFileError,
    VersionMismatchError,
    extract_streams,
    kfold,
    load_dataset,
    pink_noise,
    save_dataset,
    select_streams,
    split_by_subject,
    synth_dataset,
    synth_trial,
)
from tscnn.dsp import FilterSpec, design_butterworth_bandpass, filter_zero_phase


def _band_power(x, fs, lo, hi):
    spec = np.abs(np.fft.rfft(x, axis=-1)) ** 2
    f = np.fft.rfftfreq(x.shape[-1], 1.0 / fs)
    return spec[..., (f >= lo) & (f <= hi)].sum(axis=-1)


@pytest.fixture(scope="module")
def small_ds():
    return synth_dataset(SynthConfig(seed=3), 3, mi_per_class=4, ssvep_per_class=2)


def test_channel_lists():
    assert len(DEFAULT_CHANNELS) == 62
    assert len(set(DEFAULT_CHANNELS)) == 62
    assert len(MOTOR_CHANNELS) == 20 and len(OCCIPITAL_CHANNELS) == 10
    assert set(MOTOR_CHANNELS) <= set(DEFAULT_CHANNELS)
    assert set(OCCIPITAL_CHANNELS) <= set(DEFAULT_CHANNELS)
    assert set(LEFT_MOTOR) | set(RIGHT_MOTOR) <= set(MOTOR_CHANNELS)
    assert not set(LEFT_MOTOR) & set(RIGHT_MOTOR)
    assert "C3" in LEFT_MOTOR and "C4" in RIGHT_MOTOR


def test_montage_validation():
    with pytest.raises(ValueError, match="20 motor"):
        ChannelMontage(motor=tuple(MOTOR_CHANNELS[:19]))
    with pytest.raises(ValueError, match="overlap"):
        ChannelMontage(occipital=(*OCCIPITAL_CHANNELS[:9], "C3"))
    names = [c for c in DEFAULT_CHANNELS if c != "Oz"]
    with pytest.raises(KeyError, match="Oz"):
        ChannelMontage().indices(names)


def test_trial_validation():
    with pytest.raises(ValueError, match="label"):
        Trial(np.zeros((2, 3)), 2, 0, Mode.MI)
    with pytest.raises(ValueError, match="non-finite"):
        Trial(np.full((2, 3), np.nan), 0, 0, Mode.MI)
    with pytest.raises(ValueError, match="disagree"):
        Dataset([Trial(np.zeros((2, 3)), 0, 0, 0), Trial(np.zeros((2, 4)), 0, 0, 0)], 250.0, ["a", "b"])


def test_select_streams_picks_named_rows():
    cfg = SynthConfig()
    tr = synth_trial(cfg, Mode.HYBRID, RIGHT, np.random.default_rng(0))
    pair = select_streams(tr, ChannelMontage(), DEFAULT_CHANNELS)
    assert pair.x_m.shape == (20, 1000) and pair.x_s.shape == (10, 1000)
    np.testing.assert_array_equal(pair.x_m[0], tr.data[DEFAULT_CHANNELS.index(MOTOR_CHANNELS[0])])
    np.testing.assert_array_equal(pair.x_s[-1], tr.data[DEFAULT_CHANNELS.index(OCCIPITAL_CHANNELS[-1])])


def test_extract_streams_filters_mi_only_by_default(small_ds):
    spec = FilterSpec(250.0)
    table = extract_streams(small_ds, filter_spec=spec)
    coeffs = design_butterworth_bandpass(spec)
    raw = select_streams(small_ds.trials[5], ChannelMontage(), small_ds.channel_names)
    np.testing.assert_allclose(table.x_m[5], filter_zero_phase(raw.x_m.astype(float), coeffs), atol=1e-12)
    np.testing.assert_array_equal(table.x_s[5], raw.x_s)
    both = extract_streams(small_ds, filter_spec=spec, filter_ssvep=True)
    np.testing.assert_allclose(both.x_s[5], filter_zero_phase(raw.x_s.astype(float), coeffs), atol=1e-12)
    assert table.n_t == 1000 and len(table) == len(small_ds)
    np.testing.assert_array_equal(table.subjects, small_ds.subjects)


def test_split_by_subject_is_disjoint_and_seeded():
    ds = synth_dataset(SynthConfig(duration_s=0.5), 5, mi_per_class=1, ssvep_per_class=1)
    tr, te = split_by_subject(ds, 3, seed=1)
    assert len(np.unique(tr.subjects)) == 3 and len(np.unique(te.subjects)) == 2
    assert not set(tr.subjects) & set(te.subjects)
    assert len(tr) + len(te) == len(ds)
    tr2, _ = split_by_subject(ds, 3, seed=1)
    np.testing.assert_array_equal(tr.subjects, tr2.subjects)
    with pytest.raises(ValueError, match="at least 6"):
        split_by_subject(ds, 6)


@settings(max_examples=60, deadline=None)
@given(
    labels=st.lists(st.integers(0, 1), min_size=2, max_size=120),
    k=st.integers(2, 10),
    seed=st.integers(0, 1000),
)
def test_kfold_partitions_and_stratifies(labels, k, seed):
    labels = np.array(labels)
    if k > len(labels):
        with pytest.raises(ValueError):
            kfold(labels, k, seed)
        return
    folds = kfold(labels, k, seed)
    assert len(folds) == k
    val = np.concatenate([v for _, v in folds])
    assert sorted(val.tolist()) == list(range(len(labels)))
    sizes = [len(v) for _, v in folds]
    assert max(sizes) - min(sizes) <= 1
    for c in (0, 1):
        per = [int(np.sum(labels[v] == c)) for _, v in folds]
        assert max(per) - min(per) <= 1
    for tr, va in folds:
        assert not set(tr) & set(va) and len(tr) + len(va) == len(labels)
    again = kfold(labels, k, seed)
    for (a, b), (c, d) in zip(folds, again):
        np.testing.assert_array_equal(a, c)
        np.testing.assert_array_equal(b, d)


def test_kfold_rejects_single_fold():
    with pytest.raises(ValueError, match="at least 2"):
        kfold([0, 1, 0, 1], 1)


def test_synth_config_validation():
    with pytest.raises(ValueError, match="Nyquist"):
        SynthConfig(fs_hz=30.0)
    with pytest.raises(ValueError, match="erd_depth"):
        SynthConfig(erd_depth=1.5)
    with pytest.raises(ValueError, match="non-negative"):
        SynthConfig(noise_scale=-1.0)
    assert SynthConfig().n_t == 1000


def test_synth_trial_is_deterministic():
    cfg = SynthConfig()
    a = synth_trial(cfg, Mode.HYBRID, LEFT, np.random.default_rng([7, 0, 3]))
    b = synth_trial(cfg, Mode.HYBRID, LEFT, np.random.default_rng([7, 0, 3]))
    assert a.data.tobytes() == b.data.tobytes()
    assert a.data.dtype == np.float32 and a.data.shape == (62, 1000)


def test_synth_dataset_counts_and_regeneration():
    cfg = SynthConfig(seed=5, duration_s=1.0)
    ds = synth_dataset(cfg, 4)
    assert len(ds) == 4 * (100 + 50)
    for s in range(4):
        sub = ds.modes[ds.subjects == s]
        lab = ds.labels[ds.subjects == s]
        assert np.sum(sub == Mode.MI) == 100 and np.sum(sub == Mode.SSVEP) == 50
        assert np.sum(lab[sub == Mode.MI] == 0) == 50
        assert np.sum(lab[sub == Mode.SSVEP] == 1) == 25
    k = 120  # subject 2, 21st SSVEP trial
    trial = ds.trials[2 * 150 + k]
    again = synth_trial(cfg, trial.mode, trial.label, np.random.default_rng([5, 2, k]), subject_id=2)
    assert again.data.tobytes() == trial.data.tobytes()
    assert len(synth_dataset(cfg, 0)) == 0


@pytest.mark.parametrize("label, freq", [(LEFT, 8.57), (RIGHT, 6.67)])
def test_ssvep_trial_peaks_at_class_frequency(label, freq):
    cfg = SynthConfig()
    tr = synth_trial(cfg, Mode.SSVEP, label, np.random.default_rng(11))
    occ = tr.data[[DEFAULT_CHANNELS.index(c) for c in OCCIPITAL_CHANNELS]].astype(float)
    spec = np.mean(np.abs(np.fft.rfft(occ, axis=1)) ** 2, axis=0)
    f = np.fft.rfftfreq(cfg.n_t, 1 / cfg.fs_hz)
    band = (f > 5) & (f < 10)
    assert f[band][np.argmax(spec[band])] == pytest.approx(freq, abs=0.25)


def test_mi_trial_is_not_entrained():
    cfg = SynthConfig()
    mi = synth_trial(cfg, Mode.MI, LEFT, np.random.default_rng(11))
    ss = synth_trial(cfg, Mode.SSVEP, LEFT, np.random.default_rng(11))
    occ = [DEFAULT_CHANNELS.index(c) for c in OCCIPITAL_CHANNELS]
    p_mi = _band_power(mi.data[occ].astype(float), 250, 8.3, 8.8).mean()
    p_ss = _band_power(ss.data[occ].astype(float), 250, 8.3, 8.8).mean()
    assert p_ss > 5 * p_mi


def test_erd_lowers_contralateral_mu_power():
    cfg = SynthConfig(erd_depth=0.8)
    left = [DEFAULT_CHANNELS.index(c) for c in LEFT_MOTOR]
    right = [DEFAULT_CHANNELS.index(c) for c in RIGHT_MOTOR]
    for k in range(10):
        tr = synth_trial(cfg, Mode.MI, RIGHT, np.random.default_rng([1, k]))
        x = tr.data.astype(float)
        assert _band_power(x[left], 250, 8, 13).mean() < _band_power(x[right], 250, 8, 13).mean()
        tr = synth_trial(cfg, Mode.MI, LEFT, np.random.default_rng([2, k]))
        x = tr.data.astype(float)
        assert _band_power(x[right], 250, 8, 13).mean() < _band_power(x[left], 250, 8, 13).mean()


def test_null_config_carries_no_class_signal():
    cfg = SynthConfig(erd_depth=0.0, ssvep_amplitude=0.0)
    left = [DEFAULT_CHANNELS.index(c) for c in LEFT_MOTOR]
    right = [DEFAULT_CHANNELS.index(c) for c in RIGHT_MOTOR]
    lat = {0: [], 1: []}
    for k in range(60):
        label = k % 2
        x = synth_trial(cfg, Mode.HYBRID, label, np.random.default_rng([9, k])).data.astype(float)
        lat[label].append(np.log(_band_power(x[left], 250, 8, 13).mean() / _band_power(x[right], 250, 8, 13).mean()))
    a, b = np.array(lat[0]), np.array(lat[1])
    se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(a.mean() - b.mean()) < 3 * se


def test_pink_noise_spectrum_falls_as_one_over_f():
    x = pink_noise(16, 4096, np.random.default_rng(0))
    np.testing.assert_allclose(x.std(axis=1), 1.0, rtol=1e-12)
    spec = np.mean(np.abs(np.fft.rfft(x, axis=1)) ** 2, axis=0)
    f = np.arange(len(spec))
    sel = (f >= 4) & (f <= 1000)
    slope = np.polyfit(np.log(f[sel]), np.log(spec[sel]), 1)[0]
    assert -1.15 < slope < -0.85


# --- EEGD files -------------------------------------------------------------


def test_round_trip_is_exact(tmp_path, small_ds):
    path = tmp_path / "d.eegd"
    save_dataset(small_ds, path)
    back = load_dataset(path)
    assert back.channel_names == small_ds.channel_names and back.fs_hz == small_ds.fs_hz
    for a, b in zip(small_ds.trials, back.trials):
        assert a.data.tobytes() == b.data.tobytes()
        assert (a.label, a.subject_id, a.mode) == (b.label, b.subject_id, b.mode)
    save_dataset(back, tmp_path / "e.eegd")
    assert path.read_bytes() == (tmp_path / "e.eegd").read_bytes()


@settings(max_examples=25, deadline=None)
@given(
    names=st.lists(st.text(min_size=1, max_size=8), min_size=1, max_size=4, unique=True),
    n_trials=st.integers(0, 4),
    n_t=st.integers(1, 7),
    seed=st.integers(0, 99),
)
def test_round_trip_property(tmp_path_factory, names, n_trials, n_t, seed):
    rng = np.random.default_rng(seed)
    trials = [
        Trial(rng.standard_normal((len(names), n_t)).astype(np.float32), int(rng.integers(2)), int(rng.integers(65536)), int(rng.integers(3)))
        for _ in range(n_trials)
    ]
    ds = Dataset(trials, 123.5, names)
    path = tmp_path_factory.mktemp("rt") / "x.eegd"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.channel_names == names and len(back) == n_trials
    for a, b in zip(trials, back.trials):
        np.testing.assert_array_equal(a.data, b.data)
        assert (a.label, a.subject_id, a.mode) == (b.label, b.subject_id, b.mode)


def test_format_errors(tmp_path, small_ds):
    good = tmp_path / "g.eegd"
    save_dataset(small_ds.subset(range(2)), good)
    raw = good.read_bytes()

    (tmp_path / "m").write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(BadMagicError):
        load_dataset(tmp_path / "m")

    (tmp_path / "v").write_bytes(raw[:4] + struct.pack("<I", 2) + raw[8:])
    with pytest.raises(VersionMismatchError, match="version 2"):
        load_dataset(tmp_path / "v")

    for cut in (10, 30, len(raw) - 1):
        (tmp_path / "t").write_bytes(raw[:cut])
        with pytest.raises(TruncatedFileError):
            load_dataset(tmp_path / "t")

    huge = struct.pack("<4sIfIHI", b"EEGD", 1, 250.0, 2**32 - 1, 65535, 2**32 - 1)
    (tmp_path / "o").write_bytes(huge)
    with pytest.raises(DimensionOverflowError):
        load_dataset(tmp_path / "o")


def test_save_rejects_values_that_do_not_fit(tmp_path):
    ds = Dataset([Trial(np.zeros((1, 2), np.float32), 0, 70000, Mode.MI)], 250.0, ["a"])
    with pytest.raises(DimensionOverflowError, match="subject_id"):
        save_dataset(ds, tmp_path / "x")
    ds = Dataset([], 250.0, ["x" * 300])
    with pytest.raises(DimensionOverflowError, match="channel name"):
        save_dataset(ds, tmp_path / "y")


def test_empty_dataset_round_trip(tmp_path):
    ds = synth_dataset(SynthConfig(), 0)
    save_dataset(ds, tmp_path / "e")
    back = load_dataset(tmp_path / "e")
    assert len(back) == 0 and back.channel_names == list(DEFAULT_CHANNELS)
