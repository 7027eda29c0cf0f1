"""``tscnn`` command line: synth, train, eval, sweep, interpret, dump-features, filter-check."""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import data, dsp, evaluation, interpret, nn, train

log = logging.getLogger("tscnn")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MODES = ("MI", "SSVEP", "Hybrid")
METRIC_COLS = ("accuracy", "sensitivity", "specificity", "mse")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# --- run configuration ----------------------------------------------------------

_TRAIN_KEYS = {f.name for f in dataclasses.fields(train.TrainConfig)}
_SYNTH_KEYS = {f.name for f in dataclasses.fields(data.SynthConfig)} - {"channel_names", "fs_hz", "seed"}
_FILTER_KEYS = {"low_hz", "high_hz", "order"}
_RUN_KEYS = {
    "filter_ssvep",
    "filter_mi",
    "train_subjects",
    "folds",
    "subjects",
    "mi_per_class",
    "ssvep_per_class",
    "hybrid_per_class",
    "fs_hz",
    "montage",
    "workers",
}
CONFIG_KEYS = _TRAIN_KEYS | _SYNTH_KEYS | _FILTER_KEYS | _RUN_KEYS

RUN_DEFAULTS = {
    "filter_ssvep": False,
    "filter_mi": True,
    "train_subjects": None,
    "folds": 10,
    "subjects": 8,
    "mi_per_class": 50,
    "ssvep_per_class": 25,
    "hybrid_per_class": 0,
    "fs_hz": 250.0,
    "montage": None,
    "workers": None,
}


def load_config(path) -> dict:
    """Flat JSON object; keys are the long flag names with underscores."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return doc


def resolve(args) -> dict:
    """Defaults < config file < command-line flags."""
    cfg = dict(RUN_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config(args.config))
    for key, val in vars(args).items():
        if key in CONFIG_KEYS and val is not None:
            cfg[key] = val
    return cfg


def train_config(cfg: dict) -> train.TrainConfig:
    kw = {k: cfg[k] for k in _TRAIN_KEYS if k in cfg}
    try:
        return train.TrainConfig(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"training configuration: {exc}") from None


def synth_config(cfg: dict) -> data.SynthConfig:
    kw = {k: cfg[k] for k in _SYNTH_KEYS if k in cfg}
    try:
        return data.SynthConfig(fs_hz=float(cfg["fs_hz"]), seed=int(cfg.get("seed", 0)), **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"synthetic data configuration: {exc}") from None


def preprocessing(cfg: dict, fs_hz: float) -> dict:
    spec = {"fs_hz": fs_hz, **{k: cfg[k] for k in _FILTER_KEYS if k in cfg}}
    try:
        dsp.FilterSpec(**spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"filter configuration: {exc}") from None
    montage = cfg.get("montage") or {}
    return {
        "filter": spec,
        "filter_mi": bool(cfg["filter_mi"]),
        "filter_ssvep": bool(cfg["filter_ssvep"]),
        "montage": {
            "motor": list(montage.get("motor", data.MOTOR_CHANNELS)),
            "occipital": list(montage.get("occipital", data.OCCIPITAL_CHANNELS)),
        },
    }


def apply_preprocessing(ds: data.Dataset, prep: dict) -> data.StreamTable:
    if not math.isclose(ds.fs_hz, prep["filter"]["fs_hz"]):
        raise DataError(f"dataset sampled at {ds.fs_hz} Hz, model expects {prep['filter']['fs_hz']} Hz")
    try:
        montage = data.ChannelMontage(tuple(prep["montage"]["motor"]), tuple(prep["montage"]["occipital"]))
    except ValueError as exc:
        raise ConfigError(f"montage: {exc}") from None
    try:
        return data.extract_streams(
            ds,
            montage=montage,
            filter_spec=dsp.FilterSpec(**prep["filter"]),
            filter_mi=prep["filter_mi"],
            filter_ssvep=prep["filter_ssvep"],
        )
    except KeyError as exc:
        raise DataError(str(exc.args[0])) from None


def read_dataset(path) -> data.Dataset:
    try:
        return data.load_dataset(path)
    except FileNotFoundError:
        raise DataError(f"dataset {path} not found") from None
    except data.DatasetFormatError as exc:
        raise DataError(str(exc)) from None


def read_checkpoint(path):
    try:
        return nn.load_checkpoint(path)
    except FileNotFoundError:
        raise DataError(f"checkpoint {path} not found") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


# --- reports ----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    if isinstance(v, tuple):
        return f"{_fmt(v[0])} +- {_fmt(v[1])}"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def table(header, rows) -> str:
    cells = [[str(h) for h in header]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def write_report(out_dir: Path, stem: str, text: str, record: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.txt").write_text(text)
    (out_dir / f"{stem}.json").write_text(json.dumps(_jsonable(record), indent=1, sort_keys=True) + "\n")


def mode_rows(metrics: dict[str, evaluation.Metrics]):
    return [[m, *(getattr(metrics[m], c) for c in METRIC_COLS)] for m in MODES if m in metrics]


# --- commands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = resolve(args)
    sc = synth_config(cfg)
    if cfg["subjects"] < 0:
        raise ConfigError("--subjects must be non-negative")
    ds = data.synth_dataset(
        sc,
        int(cfg["subjects"]),
        mi_per_class=int(cfg["mi_per_class"]),
        ssvep_per_class=int(cfg["ssvep_per_class"]),
        hybrid_per_class=int(cfg["hybrid_per_class"]),
    )
    out = Path(args.out)
    try:
        data.save_dataset(ds, out)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc.strerror}") from None
    print(f"wrote {len(ds)} trials ({cfg['subjects']} subjects, {len(ds.channel_names)} channels) to {out}")
    return EXIT_OK


def _split(ds: data.Dataset, cfg: dict):
    ids = np.unique(ds.subjects)
    n_train = cfg["train_subjects"]
    if n_train is None:
        # the source protocol's 40 when the cohort allows it, else three quarters
        n_train = 40 if len(ids) > 40 else max(1, round(0.75 * len(ids)))
    n_train = int(n_train)
    if n_train >= len(ids):
        raise ConfigError(
            f"--train-subjects {n_train} leaves no test subject; dataset has {len(ids)} subject(s)"
        )
    try:
        return data.split_by_subject(ds, n_train, seed=int(cfg.get("seed", 0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_train(args) -> int:
    cfg = resolve(args)
    tc = train_config(cfg)
    ds = read_dataset(args.data)
    prep = preprocessing(cfg, ds.fs_hz)
    train_ds, test_ds = _split(ds, cfg)
    table_tr = apply_preprocessing(train_ds, prep)
    table_te = apply_preprocessing(test_ds, prep)
    samples = train.build_training_set(tc.strategy, table_tr)
    tests = train.build_eval_sets(table_te)
    folds = int(cfg["folds"])
    workers = int(cfg["workers"] or train.default_workers())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if folds >= 2:
        cv = train.cross_validate(tc, samples, k=folds, test_sets=tests, workers=workers)
        best = cv.best_fold()
        params, history = best.params, best.history
        test_metrics = best.test_metrics
        cv_record = {
            "folds": folds,
            "best_fold": best.fold,
            "val_summary": cv.summary(),
            "test_summary": cv.test_summary(),
            "per_fold": [
                {"fold": f.fold, "val": f.val_metrics.to_dict(), "test": {m: v.to_dict() for m, v in f.test_metrics.items()}}
                for f in cv.folds
            ],
        }
    else:
        fit, stop = data.kfold(samples.y, 10, seed=tc.seed)[0]
        params, history = train.train(tc, samples.subset(fit), samples.subset(stop))
        test_metrics = {m: train.evaluate(params, s) for m, s in tests.items()}
        cv_record = None

    extra = {
        "preprocessing": prep,
        "train_config": _jsonable(dataclasses.asdict(tc)),
        "train_subjects": sorted(int(s) for s in np.unique(train_ds.subjects)),
        "test_subjects": sorted(int(s) for s in np.unique(test_ds.subjects)),
    }
    nn.save_checkpoint(params, out / "checkpoint.json", extra)
    with open(out / "history.jsonl", "w") as fh:
        for rec in history.records():
            fh.write(json.dumps(_jsonable(rec)) + "\n")

    text = f"strategy {tc.strategy.value}, seed {tc.seed}, best epoch {history.best_epoch}\n\n"
    text += table(("mode", *METRIC_COLS), mode_rows(test_metrics))
    if cv_record:
        text += f"\n{folds}-fold cross-validation on test subjects (mean +- std over folds)\n"
        summ = cv_record["test_summary"]
        text += table(("mode", *METRIC_COLS), [[m, *(summ[m][c] for c in METRIC_COLS)] for m in MODES])
    record = {
        "strategy": tc.strategy.value,
        "seed": tc.seed,
        "best_epoch": history.best_epoch,
        "test": {m: v.to_dict() for m, v in test_metrics.items()},
        "cv": cv_record,
    }
    write_report(out, "metrics", text, record)
    print(text, end="")
    return EXIT_OK


def checkpoint_streams(params: nn.ModelParams, extra: dict, ds: data.Dataset, subjects: str = "auto"):
    """Evaluation sets of ``ds`` preprocessed the way the checkpoint was trained.

    ``subjects="auto"`` keeps the checkpoint's held-out subjects when the
    dataset contains any of them and everything otherwise.
    """
    prep = extra.get("preprocessing") or preprocessing(RUN_DEFAULTS, ds.fs_hz)
    held_out = extra.get("test_subjects")
    if subjects == "test" or (subjects == "auto" and held_out):
        if not held_out:
            raise ConfigError("checkpoint records no test subjects; use --subjects all")
        keep = [i for i, t in enumerate(ds.trials) if t.subject_id in set(held_out)]
        if keep:
            ds = ds.subset(keep)
        elif subjects == "test":
            raise DataError("none of the checkpoint's test subjects are in this dataset")
    if len(ds) == 0:
        raise DataError("dataset has no trials to evaluate")
    if ds.n_t != params.config.n_t:
        raise DataError(f"trial length n_t={ds.n_t} but the checkpoint was trained with n_t={params.config.n_t}")
    return train.build_eval_sets(apply_preprocessing(ds, prep))


def evaluate_checkpoint(params: nn.ModelParams, extra: dict, ds: data.Dataset, subjects: str = "auto"):
    sets = checkpoint_streams(params, extra, ds, subjects)
    results = {}
    for mode in MODES:
        if len(sets[mode]):
            results[mode] = train.evaluate(params, sets[mode])
    if not results:
        raise DataError("dataset yields no MI, SSVEP or hybrid samples")
    return results


def cmd_eval(args) -> int:
    params, extra = read_checkpoint(args.checkpoint)
    ds = read_dataset(args.data)
    results = evaluate_checkpoint(params, extra, ds, args.subjects)
    text = table(("mode", *METRIC_COLS), mode_rows(results))
    if args.out:
        write_report(Path(args.out), "eval", text, {m: v.to_dict() for m, v in results.items()})
    print(text, end="")
    return EXIT_OK


def _parse_list(text: str, conv):
    return [conv(v) for v in text.split(",") if v.strip()]


def _parse_kernels(text: str) -> tuple[int, int]:
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"kernels must look like I,J, got {text!r}") from None
    return (i, j)


def grid_cells(args) -> list[dict]:
    axes = {}
    if args.grid_dropout:
        axes["dropout_rate"] = _parse_list(args.grid_dropout, float)
    if args.grid_activation:
        axes["activation"] = _parse_list(args.grid_activation, str)
    if args.grid_fc_dim:
        axes["fc_dim"] = _parse_list(args.grid_fc_dim, int)
    if args.grid_kernels:
        axes["kernels"] = [_parse_kernels(k) for k in args.grid_kernels.split(";") if k.strip()]
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ConfigError("sweep grid is empty; give at least one --grid-* axis")
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]


def cell_label(cell: dict) -> str:
    parts = []
    for k, v in cell.items():
        parts.append(f"{k}={v[0]},{v[1]}" if k == "kernels" else f"{k}={v}")
    return " ".join(parts)


def compare_cells(a: list[float], b: list[float]) -> evaluation.TTestResult:
    """Paired t-test of two cells' per-fold accuracies (same folds, same seeds)."""
    return evaluation.paired_t_test(a, b)


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    base = train_config(cfg)
    cells = grid_cells(args)
    ds = read_dataset(args.data)
    prep = preprocessing(cfg, ds.fs_hz)
    train_ds, test_ds = _split(ds, cfg)
    table_tr = apply_preprocessing(train_ds, prep)
    tests = train.build_eval_sets(apply_preprocessing(test_ds, prep))
    samples = train.build_training_set(base.strategy, table_tr)
    folds = int(cfg["folds"])
    if folds < 2:
        raise ConfigError("sweep needs --folds of at least 2 for per-fold statistics")
    workers = int(cfg["workers"] or train.default_workers())

    per_fold, rows, records = {}, [], []
    for idx, cell in enumerate(cells):
        try:
            tc = dataclasses.replace(base, **cell)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"grid cell {cell_label(cell)}: {exc}") from None
        cv = train.cross_validate(tc, samples, k=folds, test_sets=tests, workers=workers)
        summ = cv.test_summary()
        per_fold[idx] = {m: [f.test_metrics[m].accuracy for f in cv.folds] for m in MODES}
        rows.append([f"c{idx}", cell_label(cell), *(summ[m]["accuracy"] for m in MODES)])
        records.append({"cell": f"c{idx}", "params": cell, "test_summary": summ})
        log.info("cell c%d done: %s", idx, cell_label(cell))

    pairs = [_parse_pair(p, len(cells)) for p in args.compare] if args.compare else [(0, k) for k in range(1, len(cells))]
    tests_out, trow = [], []
    for a, b in pairs:
        for m in MODES:
            try:
                r = compare_cells(per_fold[a][m], per_fold[b][m])
                rec = {"a": f"c{a}", "b": f"c{b}", "mode": m, "t": r.t_statistic, "dof": r.dof, "p": r.p_value}
                trow.append([f"c{a} vs c{b}", m, r.t_statistic, r.dof, r.p_value, ""])
            except evaluation.DegenerateInputError as exc:
                rec = {"a": f"c{a}", "b": f"c{b}", "mode": m, "error": str(exc)}
                trow.append([f"c{a} vs c{b}", m, None, folds - 1, None, "degenerate: identical differences"])
            tests_out.append(rec)

    text = table(("cell", "settings", *(f"{m} acc" for m in MODES)), rows)
    if trow:
        text += "\npaired t-tests on per-fold test accuracy\n"
        text += table(("pair", "mode", "t", "dof", "p", "note"), trow)
    write_report(Path(args.out), "sweep", text, {"cells": records, "tests": tests_out})
    print(text, end="")
    return EXIT_OK


def _parse_pair(text: str, n: int) -> tuple[int, int]:
    try:
        a, b = (int(v.strip().lstrip("c")) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--compare expects cA:cB, got {text!r}") from None
    if not (0 <= a < n and 0 <= b < n):
        raise ConfigError(f"--compare {text}: cells are c0..c{n - 1}")
    return a, b


def cmd_interpret(args) -> int:
    params, _ = read_checkpoint(args.checkpoint)
    thresholds = _parse_list(args.thresholds, float) if args.thresholds else list(interpret.DEFAULT_THRESHOLDS)
    try:
        report = interpret.weight_ratio(params, thresholds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    text = report.to_table()
    if args.out:
        write_report(Path(args.out), "weight_ratio", text, report.to_dict())
    print(text, end="")
    return EXIT_OK


def cmd_dump_features(args) -> int:
    params, extra = read_checkpoint(args.checkpoint)
    if args.layer not in interpret.valid_tags(params):
        raise ConfigError(
            f"unknown layer tag {args.layer!r}; valid tags: {', '.join(interpret.valid_tags(params))}"
        )
    sets = checkpoint_streams(params, extra, read_dataset(args.data), args.subjects)
    samples = sets.get(args.mode)
    if samples is None or len(samples) == 0:
        raise DataError(f"dataset yields no {args.mode} samples")
    dump = interpret.dump_features(params, samples, args.layer, args.out)
    print(f"wrote {len(dump.labels)} x {dump.dim} {args.layer} features to {args.out}")
    return EXIT_OK


FILTER_CHECK_FREQS = (0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 60.0)


def cmd_filter_check(args) -> int:
    cfg = resolve(args)
    try:
        spec = dsp.FilterSpec(float(cfg["fs_hz"]), **{k: cfg[k] for k in _FILTER_KEYS if k in cfg})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"filter configuration: {exc}") from None
    coeffs = dsp.design_butterworth_bandpass(spec)
    rows = []
    for f in FILTER_CHECK_FREQS:
        if f > spec.fs_hz / 2:
            continue
        mag = abs(dsp.frequency_response(coeffs, f, spec.fs_hz))
        db = 20 * math.log10(mag) if mag > 0 else -math.inf
        rows.append([f"{f:g}", db, mag * mag])
    text = (
        f"Butterworth bandpass {spec.low_hz:g}-{spec.high_hz:g} Hz, order {spec.order}, "
        f"fs {spec.fs_hz:g} Hz, {coeffs.n_sections} sections, stable={coeffs.is_stable()}\n\n"
    )
    text += table(("freq_hz", "single_pass_db", "zero_phase_gain"), rows)
    print(text, end="")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _add_train_flags(p):
    p.add_argument("--strategy", choices=[s.value for s in train.Strategy])
    p.add_argument("--epochs", dest="max_epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", dest="dropout_rate", type=float)
    p.add_argument("--kernels", type=_parse_kernels, metavar="I,J")
    p.add_argument("--fc-dim", type=int)
    p.add_argument("--activation", choices=nn.ACTIVATIONS)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--init-std", type=float)
    p.add_argument("--patience", dest="early_stop_patience", type=int)
    p.add_argument("--no-conv-bias", dest="conv_bias", action="store_const", const=False)
    p.add_argument("--folds", type=int)
    p.add_argument("--filter-ssvep", type=_on_off, metavar="{on,off}")
    p.add_argument("--train-subjects", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tscnn", description="Two-stream CNN decoder for hybrid MI/SSVEP EEG.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic EEGD dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int)
    p.add_argument("--fs", dest="fs_hz", type=float)
    p.add_argument("--duration", dest="duration_s", type=float)
    p.add_argument("--mi-per-class", type=int)
    p.add_argument("--ssvep-per-class", type=int)
    p.add_argument("--hybrid-per-class", type=int)
    p.add_argument("--ssvep-amplitude", type=float)
    p.add_argument("--erd-depth", type=float)
    p.add_argument("--noise-scale", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a model and write checkpoint and reports")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint in MI, SSVEP and hybrid mode")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--subjects", choices=("auto", "test", "all"), default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="cross-validate a grid of settings")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.add_argument("--grid-dropout", metavar="R,R,...")
    p.add_argument("--grid-activation", metavar="A,A,...")
    p.add_argument("--grid-fc-dim", metavar="D,D,...")
    p.add_argument("--grid-kernels", metavar="I,J;I,J;...")
    p.add_argument("--compare", action="append", metavar="cA:cB")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("interpret", help="count fusion-layer weights above thresholds")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--thresholds", metavar="T,T,...")
    p.add_argument("--out")
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("dump-features", help="write one layer's activations to a FEAT file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--mode", choices=MODES, default="Hybrid")
    p.add_argument("--subjects", choices=("auto", "test", "all"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_features)

    p = sub.add_parser("filter-check", parents=[common], help="print the bandpass response table")
    p.add_argument("--fs", dest="fs_hz", type=float)
    p.add_argument("--low", dest="low_hz", type=float)
    p.add_argument("--high", dest="high_hz", type=float)
    p.add_argument("--order", type=int)
    p.set_defaults(func=cmd_filter_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tscnn: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"tscnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (train.TrainingDivergedError, ArithmeticError, FloatingPointError) as exc:
        print(f"tscnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
