import json

import pytest

from tscnn.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, compare_cells, main
from tscnn.data import load_dataset, save_dataset, synth_dataset, SynthConfig
from tscnn.evaluation import DegenerateInputError
from tscnn.nn import ModelConfig, load_checkpoint, save_checkpoint, zeros_like_params

SMALL = ["--subjects", "3", "--duration", "0.5", "--mi-per-class", "10", "--ssvep-per-class", "5"]
FAST = ["--epochs", "2", "--folds", "2", "--batch-size", "8", "--train-subjects", "2"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "d.eegd"
    assert main(["synth", "--out", str(path), "--seed", "4", *SMALL]) == 0
    return path


@pytest.fixture(scope="module")
def run_dir(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", "--data", str(dataset), "--out", str(out), "--seed", "1", *FAST]) == 0
    return out


def test_synth_default_counts(tmp_path, capsys):
    path = tmp_path / "d.eegd"
    assert main(["synth", "--out", str(path), "--subjects", "4", "--duration", "0.2"]) == 0
    ds = load_dataset(path)
    assert len(ds) == 4 * (100 + 50)
    assert "600 trials" in capsys.readouterr().out


def test_synth_zero_subjects_and_determinism(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "e"), "--subjects", "0"]) == 0
    assert len(load_dataset(tmp_path / "e")) == 0
    for name, seed in (("a", "3"), ("b", "3"), ("c", "4")):
        main(["synth", "--out", str(tmp_path / name), "--seed", seed, *SMALL])
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a").read_bytes() != (tmp_path / "c").read_bytes()


def test_synth_unwritable_path(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "missing" / "d"), *SMALL]) == EXIT_DATA


def test_train_writes_artifacts(run_dir):
    for name in ("checkpoint.json", "history.jsonl", "metrics.txt", "metrics.json"):
        assert (run_dir / name).exists()
    params, extra = load_checkpoint(run_dir / "checkpoint.json")
    assert params.config.streams == ("mi", "ssvep")
    assert extra["preprocessing"]["filter_ssvep"] is False
    assert len(extra["train_subjects"]) == 2 and len(extra["test_subjects"]) == 1
    history = [json.loads(line) for line in (run_dir / "history.jsonl").read_text().splitlines()]
    assert [h["epoch"] for h in history] == list(range(len(history)))
    report = json.loads((run_dir / "metrics.json").read_text())
    assert set(report["test"]) == {"MI", "SSVEP", "Hybrid"}
    assert report["cv"]["folds"] == 2


def test_train_is_deterministic(dataset, run_dir, tmp_path):
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--seed", "1", *FAST]) == 0
    for name in ("checkpoint.json", "metrics.json", "metrics.txt", "history.jsonl"):
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes()


def test_scnn_strategy_routes_to_single_stream(dataset, tmp_path):
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--strategy", "scnn-mi", *FAST]) == 0
    params, _ = load_checkpoint(tmp_path / "checkpoint.json")
    assert params.config.streams == ("mi",)


def test_config_file_and_flag_precedence(dataset, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fc_dim": 4, "kernels": [2, 1], "activation": "elu", "max_epochs": 1, "folds": 1, "train_subjects": 2, "batch_size": 8}))
    out = tmp_path / "o"
    assert main(["train", "--data", str(dataset), "--out", str(out), "--config", str(cfg), "--fc-dim", "3", "--no-conv-bias", "--filter-ssvep", "on"]) == 0
    params, extra = load_checkpoint(out / "checkpoint.json")
    assert params.config.fc_dim == 3 and params.config.kernels == (2, 1)
    assert params.config.activation == "elu" and params.config.conv_bias is False
    assert extra["preprocessing"]["filter_ssvep"] is True
    assert json.loads((out / "metrics.json").read_text())["cv"] is None


def test_config_errors(dataset, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"learning_rate": 0.1}))
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--config", str(bad)]) == EXIT_CONFIG
    assert "learning_rate" in capsys.readouterr().err
    bad.write_text('{"lr": 0.1,\n "fc_dim": }')
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--config", str(bad)]) == EXIT_CONFIG
    assert "bad.json:2:" in capsys.readouterr().err
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--dropout", "1.5"]) == EXIT_CONFIG
    assert main(["train", "--data", str(dataset), "--out", str(tmp_path), "--train-subjects", "3"]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", str(dataset), "--out", str(tmp_path), "--kernels", "3"])
    assert exc.value.code == EXIT_CONFIG


def test_data_errors(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "none.eegd"), "--out", str(tmp_path)]) == EXIT_DATA
    (tmp_path / "junk").write_bytes(b"JUNKJUNKJUNK")
    assert main(["train", "--data", str(tmp_path / "junk"), "--out", str(tmp_path)]) == EXIT_DATA
    assert "not an EEGD file" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_code(dataset, tmp_path):
    args = ["train", "--data", str(dataset), "--out", str(tmp_path), "--lr", "1e300", "--epochs", "3", "--folds", "1", "--train-subjects", "2", "--batch-size", "8"]
    assert main(args) == EXIT_NUMERIC


def test_eval_table(dataset, run_dir, tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(run_dir / "checkpoint.json"), "--data", str(dataset), "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["mode", "accuracy", "sensitivity", "specificity", "mse"]
    assert [line.split()[0] for line in lines[2:]] == ["MI", "SSVEP", "Hybrid"]
    record = json.loads((tmp_path / "eval.json").read_text())
    assert set(record) == {"MI", "SSVEP", "Hybrid"}
    # the same numbers as the training report's best-fold test rows
    train_report = json.loads((run_dir / "metrics.json").read_text())
    for m in record:
        assert record[m]["accuracy"] == train_report["test"][m]["accuracy"]


def test_eval_of_zero_model_gives_class_prior(dataset, tmp_path, capsys):
    ckpt = tmp_path / "zero.json"
    save_checkpoint(zeros_like_params(ModelConfig(n_t=125)), ckpt)
    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(dataset), "--subjects", "all"]) == 0
    rows = capsys.readouterr().out.splitlines()[2:]
    # every probability is exactly 0.5, which the tie rule maps to class 0
    for row in rows:
        assert float(row.split()[1]) == pytest.approx(0.5)


def test_eval_errors(dataset, run_dir, tmp_path, capsys):
    ckpt = str(run_dir / "checkpoint.json")
    empty = tmp_path / "empty.eegd"
    save_dataset(synth_dataset(SynthConfig(duration_s=0.5), 0), empty)
    assert main(["eval", "--checkpoint", ckpt, "--data", str(empty)]) == EXIT_DATA
    other = tmp_path / "long.eegd"
    save_dataset(synth_dataset(SynthConfig(duration_s=0.6), 1, mi_per_class=1, ssvep_per_class=1), other)
    assert main(["eval", "--checkpoint", ckpt, "--data", str(other), "--subjects", "all"]) == EXIT_DATA
    assert "n_t=150" in capsys.readouterr().err
    assert main(["eval", "--checkpoint", str(tmp_path / "nope.json"), "--data", str(dataset)]) == EXIT_DATA


def test_interpret_report(run_dir, tmp_path, capsys):
    assert main(["interpret", "--checkpoint", str(run_dir / "checkpoint.json"), "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["threshold", "N_M", "N_S", "N_M/N_S"]
    assert [float(line.split()[0]) for line in lines[1:6]] == [0.0025, 0.005, 0.0075, 0.01, 0.0125]
    record = json.loads((tmp_path / "weight_ratio.json").read_text())
    assert len(record["rows"]) == 5
    assert main(["interpret", "--checkpoint", str(run_dir / "checkpoint.json"), "--thresholds", "0.001,0.1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_dump_features(dataset, run_dir, tmp_path, capsys):
    ckpt = str(run_dir / "checkpoint.json")
    args = ["dump-features", "--checkpoint", ckpt, "--data", str(dataset), "--layer", "mi_temporal"]
    assert main([*args, "--out", str(tmp_path / "a.feat")]) == 0
    assert main([*args, "--out", str(tmp_path / "b.feat")]) == 0
    assert (tmp_path / "a.feat").read_bytes() == (tmp_path / "b.feat").read_bytes()
    capsys.readouterr()
    bad = ["dump-features", "--checkpoint", ckpt, "--data", str(dataset), "--layer", "conv9", "--out", str(tmp_path / "c")]
    assert main(bad) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "mi_input" in err and "fusion_fc" in err


def test_sweep_rows_and_tests(dataset, tmp_path, capsys):
    args = ["sweep", "--data", str(dataset), "--out", str(tmp_path), "--grid-kernels", "1,1;8,8", "--compare", "c0:c0", *FAST]
    assert main(args) == 0
    record = json.loads((tmp_path / "sweep.json").read_text())
    assert [c["cell"] for c in record["cells"]] == ["c0", "c1"]
    assert record["cells"][1]["params"]["kernels"] == [8, 8]
    assert all("error" in t for t in record["tests"])
    out = capsys.readouterr().out
    assert "MI acc" in out and "SSVEP acc" in out and "Hybrid acc" in out


def test_sweep_needs_a_grid(dataset, tmp_path):
    assert main(["sweep", "--data", str(dataset), "--out", str(tmp_path), *FAST]) == EXIT_CONFIG


def test_self_comparison_is_degenerate():
    accs = [0.5, 0.6, 0.7]
    with pytest.raises(DegenerateInputError):
        compare_cells(accs, accs)


def test_filter_check_table(capsys):
    assert main(["filter-check", "--fs", "1000"]) == 0
    rows = {line.split()[0]: line.split() for line in capsys.readouterr().out.splitlines()[3:]}
    assert float(rows["8"][1]) == pytest.approx(-3.0103, abs=1e-4)
    assert float(rows["30"][1]) == pytest.approx(-3.0103, abs=1e-4)
    assert main(["filter-check", "--fs", "50"]) == EXIT_CONFIG
