"""Loss, Adam, initialization, training-set construction, the training loop and cross-validation."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import LEFT, RIGHT, Mode, StreamPair, StreamTable, kfold
from .evaluation import Metrics, classify, compute_metrics, summarize
from .nn import (
    ModelConfig,
    ModelParams,
    commit_running_stats,
    forward_pass,
    is_bias,
    model_backward,
    param_shapes,
)

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12


class Strategy(str, enum.Enum):
    TSCNN1 = "tscnn1"
    TSCNN2 = "tscnn2"
    SCNN_MI = "scnn-mi"
    SCNN_SSVEP = "scnn-ssvep"

    @property
    def streams(self) -> tuple[str, ...]:
        if self is Strategy.SCNN_MI:
            return ("mi",)
        if self is Strategy.SCNN_SSVEP:
            return ("ssvep",)
        return ("mi", "ssvep")


class TrainingDivergedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    strategy: Strategy = Strategy.TSCNN2
    lr: float = 2.5e-4
    batch_size: int = 64
    dropout_rate: float = 0.5
    init_std: float = 0.1  # N(0, 0.01) read as variance 0.01
    max_epochs: int = 100
    early_stop_patience: int = 10
    seed: int = 0
    kernels: tuple[int, int] = (1, 1)
    fc_dim: int = 16
    activation: str = "relu"
    conv_bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2 (batchnorm needs batch statistics)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.init_std < 0:
            raise ValueError("init_std must be non-negative")

    def model_config(self, n_t: int) -> ModelConfig:
        return ModelConfig(
            n_t=n_t,
            kernels=self.kernels,
            fc_dim=self.fc_dim,
            activation=self.activation,
            streams=self.strategy.streams,
            conv_bias=self.conv_bias,
            dropout_rate=self.dropout_rate,
        )


# --- samples ------------------------------------------------------------------


@dataclass
class StreamSet:
    """A stack of stream pairs, ``x_m (n, 20, T)``, ``x_s (n, 10, T)``, labels ``y``."""

    x_m: np.ndarray
    x_s: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def __getitem__(self, k) -> StreamPair:
        return StreamPair(self.x_m[k], self.x_s[k], int(self.y[k]))

    def subset(self, idx) -> "StreamSet":
        idx = np.asarray(idx, dtype=int)
        return StreamSet(self.x_m[idx], self.x_s[idx], self.y[idx])

    @classmethod
    def from_pairs(cls, pairs) -> "StreamSet":
        pairs = list(pairs)
        return cls(
            np.stack([p.x_m for p in pairs]).astype(float),
            np.stack([p.x_s for p in pairs]).astype(float),
            np.array([p.label for p in pairs], dtype=int),
        )


def _hybrid_pairing(table: StreamTable):
    """Per subject and class, the i-th MI trial pairs with the i-th SSVEP trial.

    Returns ``(mi_idx, ssvep_idx, leftover_mi_idx)``; trials recorded in
    hybrid mode pair with themselves.
    """
    mi_idx, ss_idx, rest = [], [], []
    for subj in np.unique(table.subjects):
        for cls in (LEFT, RIGHT):
            sel = (table.subjects == subj) & (table.labels == cls)
            mi = np.flatnonzero(sel & (table.modes == Mode.MI))
            ss = np.flatnonzero(sel & (table.modes == Mode.SSVEP))
            hy = np.flatnonzero(sel & (table.modes == Mode.HYBRID))
            n = min(len(mi), len(ss))
            mi_idx += [*mi[:n], *hy]
            ss_idx += [*ss[:n], *hy]
            rest += list(mi[n:])
    return np.array(mi_idx, dtype=int), np.array(ss_idx, dtype=int), np.array(rest, dtype=int)


def _stack(table: StreamTable, mi_idx, ss_idx, labels_from) -> StreamSet:
    n_t = table.n_t
    x_m = table.x_m[mi_idx] if mi_idx is not None else np.zeros((len(ss_idx), table.x_m.shape[1], n_t))
    x_s = table.x_s[ss_idx] if ss_idx is not None else np.zeros((len(mi_idx), table.x_s.shape[1], n_t))
    return StreamSet(x_m, x_s, table.labels[labels_from])


def build_training_set(strategy: Strategy, table: StreamTable) -> StreamSet:
    """Assemble training samples for a strategy from preprocessed trials.

    TSCNN1: hybrid pairs only. TSCNN2: hybrid pairs followed by one sample
    per leftover MI trial whose SSVEP stream is all zeros. SCNN variants:
    every trial of the matching single mode.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.SCNN_MI:
        idx = np.flatnonzero(table.modes == Mode.MI)
        if not len(idx):
            raise ValueError("scnn-mi needs MI trials; dataset has none")
        return _stack(table, idx, None, idx)
    if strategy is Strategy.SCNN_SSVEP:
        idx = np.flatnonzero(table.modes == Mode.SSVEP)
        if not len(idx):
            raise ValueError("scnn-ssvep needs SSVEP trials; dataset has none")
        return _stack(table, None, idx, idx)

    mi_idx, ss_idx, rest = _hybrid_pairing(table)
    if not len(mi_idx):
        raise ValueError(f"{strategy.value} needs MI and SSVEP trials (or hybrid recordings); none could be paired")
    pairs = _stack(table, mi_idx, ss_idx, mi_idx)
    if strategy is Strategy.TSCNN1:
        return pairs
    solo = _stack(table, rest, None, rest)
    return StreamSet(
        np.concatenate([pairs.x_m, solo.x_m]),
        np.concatenate([pairs.x_s, solo.x_s]),
        np.concatenate([pairs.y, solo.y]),
    )


def build_eval_sets(table: StreamTable) -> dict[str, StreamSet]:
    """Test samples per evaluation mode: MI (zero SSVEP), SSVEP (zero MI) and hybrid pairs."""
    out = {}
    mi = np.flatnonzero(table.modes == Mode.MI)
    ss = np.flatnonzero(table.modes == Mode.SSVEP)
    if len(mi):
        out["MI"] = _stack(table, mi, None, mi)
    if len(ss):
        out["SSVEP"] = _stack(table, None, ss, ss)
    mi_idx, ss_idx, _ = _hybrid_pairing(table)
    if len(mi_idx):
        out["Hybrid"] = _stack(table, mi_idx, ss_idx, mi_idx)
    return out


# --- loss and optimizer -------------------------------------------------------


def bce_loss(y, yhat) -> float:
    """Mean binary cross-entropy; probabilities are clamped to [1e-12, 1 - 1e-12]."""
    y = np.asarray(y, dtype=float)
    p = np.clip(np.asarray(yhat, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def init_params(cfg: ModelConfig, rng: np.random.Generator, init_std: float = 0.1) -> ModelParams:
    """Gaussian weights, zero biases, unit BN scale; draws follow ``param_shapes`` order."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name == "bn.gamma":
            params[name] = np.ones(shape)
        elif is_bias(name):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, init_std, size=shape)
    buffers = {}
    if cfg.fc_dim > 0:
        buffers = {"bn.running_mean": np.zeros(cfg.fc_dim), "bn.running_var": np.ones(cfg.fc_dim)}
    return ModelParams(cfg, params, buffers)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ModelParams) -> "AdamState":
        return cls(
            {k: np.zeros_like(v) for k, v in params.params.items()},
            {k: np.zeros_like(v) for k, v in params.params.items()},
        )


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState, lr: float):
    """One bias-corrected Adam update, applied in place; returns ``(params, state)``."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {k} at step {state.t + 1}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for k, g in grads.items():
        m = state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        v = state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        params.params[k] = params.params[k] - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.version += 1
    return params, state


# --- training loop ------------------------------------------------------------


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def records(self) -> list[dict]:
        return [
            {"epoch": e, "train_loss": tl, "val_loss": vl, "val_acc": va}
            for e, (tl, vl, va) in enumerate(zip(self.train_loss, self.val_loss, self.val_acc))
        ]


def predict_proba(params: ModelParams, samples: StreamSet, batch: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(samples), batch):
        sl = slice(start, start + batch)
        p, _ = forward_pass(samples.x_m[sl], samples.x_s[sl], params, training=False)
        out.append(p)
    return np.concatenate(out) if out else np.zeros(0)


def evaluate(params: ModelParams, samples: StreamSet) -> Metrics:
    probs = predict_proba(params, samples)
    return compute_metrics(classify(probs), samples.y, probs)


def _batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, size):
        idx = order[start : start + size]
        if len(idx) >= 2:
            yield idx


def train(config: TrainConfig, train_set: StreamSet, val_set: StreamSet | None = None, params: ModelParams | None = None):
    """Mini-batch Adam on mean BCE with early stopping on validation loss.

    Returns the parameters of the epoch with the lowest validation loss
    (the last epoch when no validation set is given) and the history.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if config.batch_size > len(train_set):
        raise ValueError(f"batch_size {config.batch_size} exceeds training set size {len(train_set)}")
    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(3)
    mcfg = config.model_config(train_set.x_m.shape[-1])
    if params is None:
        params = init_params(mcfg, np.random.default_rng(init_ss), config.init_std)
    state = AdamState.fresh(params)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)

    history = TrainHistory()
    best = params.copy()
    best_loss = np.inf
    wait = 0
    for epoch in range(config.max_epochs):
        losses = []
        for b, idx in enumerate(_batches(len(train_set), config.batch_size, shuffle_rng)):
            y = train_set.y[idx]
            yhat, cache = forward_pass(train_set.x_m[idx], train_set.x_s[idx], params, True, drop_rng)
            loss = bce_loss(y, yhat)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}, batch {b}")
            grads = model_backward(cache, yhat, y, params)
            try:
                adam_step(params, grads, state, config.lr)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"epoch {epoch}, batch {b}: {exc}") from None
            commit_running_stats(params, cache)
            losses.append(loss)
        history.train_loss.append(float(np.mean(losses)))

        if val_set is not None and len(val_set):
            probs = predict_proba(params, val_set)
            vloss = bce_loss(val_set.y, probs)
            vacc = float(np.mean(classify(probs) == val_set.y))
        else:
            vloss, vacc = history.train_loss[-1], float("nan")
        history.val_loss.append(vloss)
        history.val_acc.append(vacc)
        log.debug("epoch %d train %.4f val %.4f acc %.3f", epoch, history.train_loss[-1], vloss, vacc)

        if val_set is None or not len(val_set):
            best, history.best_epoch = params, epoch
            continue
        if vloss < best_loss:
            best_loss, best, history.best_epoch, wait = vloss, params.copy(), epoch, 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                break
    return best, history


# --- cross-validation -----------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    val_metrics: Metrics
    test_metrics: dict[str, Metrics]
    params: ModelParams
    history: TrainHistory


@dataclass
class CVResult:
    folds: list[FoldResult]

    @property
    def fold_metrics(self) -> list[Metrics]:
        return [f.val_metrics for f in self.folds]

    def summary(self) -> dict[str, tuple[float, float]]:
        return summarize(self.fold_metrics)

    def test_summary(self) -> dict[str, dict[str, tuple[float, float]]]:
        modes = self.folds[0].test_metrics.keys() if self.folds else []
        return {m: summarize([f.test_metrics[m] for f in self.folds]) for m in modes}

    def best_fold(self) -> FoldResult:
        return min(self.folds, key=lambda f: min(f.history.val_loss))


def default_workers() -> int:
    cap = os.environ.get("TSCNN_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def _run_fold(args):
    fold, config, samples, train_idx, val_idx, test_sets = args
    # early stopping uses an inner split of the training part; the fold stays unseen
    inner = kfold(samples.y[train_idx], 10, seed=config.seed + fold) if len(train_idx) >= 20 else None
    if inner is not None:
        fit_idx, stop_idx = train_idx[inner[0][0]], train_idx[inner[0][1]]
    else:
        fit_idx, stop_idx = train_idx, val_idx
    fold_cfg = TrainConfig(**{**config.__dict__, "seed": config.seed * 1000 + fold})
    params, history = train(fold_cfg, samples.subset(fit_idx), samples.subset(stop_idx))
    val = evaluate(params, samples.subset(val_idx))
    tests = {mode: evaluate(params, s) for mode, s in (test_sets or {}).items()}
    return FoldResult(fold, val, tests, params, history)


def cross_validate(
    config: TrainConfig,
    samples: StreamSet,
    k: int = 10,
    test_sets: dict[str, StreamSet] | None = None,
    workers: int = 1,
) -> CVResult:
    """Train one model per stratified fold and evaluate it on that fold.

    When ``test_sets`` is given every fold model is also scored on each of
    them, which is how per-mode mean and std over folds are obtained.
    """
    folds = kfold(samples.y, k, seed=config.seed)
    jobs = [(f, config, samples, tr, va, test_sets) for f, (tr, va) in enumerate(folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    return CVResult(sorted(results, key=lambda r: r.fold))
