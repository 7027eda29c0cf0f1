"""Two-stream convolutional network with hand-written forward and backward passes.

Each stream is ``spatial conv -> act -> temporal conv -> act``. The flattened
stream outputs are concatenated (MI first, SSVEP second) and fed to the
fusion head ``FC -> act -> batchnorm -> dropout -> output FC -> sigmoid``.
With ``fc_dim == 0`` the concatenation feeds the output unit directly.

All arrays are float64. Batches are shaped ``(B, channels, samples)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

TEMPORAL_WIDTH = 10
ACTIVATIONS = ("relu", "elu", "softplus", "leakyrelu")
STREAMS = ("mi", "ssvep")
LEAKY_SLOPE = 0.01
CHECKPOINT_VERSION = 1


class StaleCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_t: int
    kernels: tuple[int, int] = (1, 1)
    fc_dim: int = 16
    activation: str = "relu"
    streams: tuple[str, ...] = STREAMS
    conv_bias: bool = True
    dropout_rate: float = 0.5
    n_mi_ch: int = 20
    n_ssvep_ch: int = 10
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        object.__setattr__(self, "streams", tuple(self.streams))
        if self.n_t < TEMPORAL_WIDTH:
            raise ValueError(f"n_t={self.n_t} is shorter than the temporal kernel width {TEMPORAL_WIDTH}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {ACTIVATIONS}")
        if not self.streams or any(s not in STREAMS for s in self.streams):
            raise ValueError(f"streams must be a non-empty subset of {STREAMS}, got {self.streams}")
        if min(self.kernels) < 1 or self.fc_dim < 0:
            raise ValueError("kernel counts must be >= 1 and fc_dim >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")

    @property
    def n_out_t(self) -> int:
        return self.n_t - TEMPORAL_WIDTH + 1

    @property
    def stream_width(self) -> int:
        """Flattened feature count contributed by one stream."""
        return self.kernels[1] * self.n_out_t

    @property
    def fusion_width(self) -> int:
        return self.stream_width * len(self.streams)

    def channels(self, stream: str) -> int:
        return self.n_mi_ch if stream == "mi" else self.n_ssvep_ch

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernels"] = list(self.kernels)
        d["streams"] = list(self.streams)
        return d


@dataclass
class ModelParams:
    config: ModelConfig
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = 0

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            {k: v.copy() for k, v in self.buffers.items()},
            self.version,
        )

    def fc_rows(self, stream: str) -> slice:
        """Rows of the first fusion-side weight matrix fed by ``stream``."""
        k = self.config.streams.index(stream)
        w = self.config.stream_width
        return slice(k * w, (k + 1) * w)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    i, j = cfg.kernels
    shapes: dict[str, tuple[int, ...]] = {}
    for s in cfg.streams:
        shapes[f"{s}.spatial.w"] = (i, cfg.channels(s))
        shapes[f"{s}.spatial.b"] = (i,)
        shapes[f"{s}.temporal.w"] = (j, i, TEMPORAL_WIDTH)
        shapes[f"{s}.temporal.b"] = (j,)
    d = cfg.fc_dim
    if d > 0:
        shapes["fc.w"] = (cfg.fusion_width, d)
        shapes["fc.b"] = (d,)
        shapes["bn.gamma"] = (d,)
        shapes["bn.beta"] = (d,)
        shapes["out.w"] = (d,)
    else:
        shapes["out.w"] = (cfg.fusion_width,)
    shapes["out.b"] = (1,)
    return shapes


def is_bias(name: str) -> bool:
    return name.endswith(".b") or name == "bn.beta"


def zeros_like_params(cfg: ModelConfig) -> ModelParams:
    params = {k: np.zeros(s) for k, s in param_shapes(cfg).items()}
    if cfg.fc_dim > 0:
        params["bn.gamma"][:] = 1.0
    buffers = {}
    if cfg.fc_dim > 0:
        buffers = {"bn.running_mean": np.zeros(cfg.fc_dim), "bn.running_var": np.ones(cfg.fc_dim)}
    return ModelParams(cfg, params, buffers)


# --- layers -----------------------------------------------------------------


def spatial_conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[..., k, t] = sum_c w[k, c] * x[..., c, t] + b[k]``."""
    if x.shape[-2] != w.shape[1]:
        raise ValueError(f"spatial kernel spans {w.shape[1]} channels but input has {x.shape[-2]}")
    return w @ x + b[:, None]


def spatial_conv_backward(g, x, w):
    dw = np.einsum("bkt,bct->kc", g, x)
    db = g.sum(axis=(0, 2))
    return dw, db


def temporal_conv_forward(maps: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid cross-correlation over time; kernels span every input map.

    ``maps`` is ``(..., i, T)``, ``w`` is ``(j, i, width)``; output is
    ``(..., j, T - width + 1)``.
    """
    width = w.shape[-1]
    if maps.shape[-1] < width:
        raise ValueError(f"need at least {width} samples for temporal convolution, got {maps.shape[-1]}")
    if maps.shape[-2] != w.shape[1]:
        raise ValueError(f"temporal kernel spans {w.shape[1]} maps but input has {maps.shape[-2]}")
    win = sliding_window_view(maps, width, axis=-1)  # (..., i, T', width)
    out = np.tensordot(win, w, axes=([-3, -1], [1, 2]))  # (..., T', j)
    return np.moveaxis(out, -1, -2) + b[:, None]


def temporal_conv_backward(g, maps, w):
    width = w.shape[-1]
    n_out = g.shape[-1]
    win = sliding_window_view(maps, width, axis=-1)
    dw = np.tensordot(g, win, axes=([0, 2], [0, 2]))  # (j, i, width)
    db = g.sum(axis=(0, 2))
    dmaps = np.zeros_like(maps)
    for tau in range(width):
        dmaps[:, :, tau : tau + n_out] += w[:, :, tau].T @ g
    return dmaps, dw, db


def activation_forward(x, kind: str):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "elu":
        return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    if kind == "softplus":
        return np.logaddexp(0.0, x)
    if kind == "leakyrelu":
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(x, kind: str):
    if kind == "relu":
        return (x > 0).astype(float)
    if kind == "elu":
        return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))
    if kind == "softplus":
        return expit(x)
    if kind == "leakyrelu":
        return np.where(x > 0, 1.0, LEAKY_SLOPE)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1


def batchnorm_forward(batch: np.ndarray, bn: BatchNormParams, training: bool):
    """Returns ``(out, aux)``.

    In training mode ``aux`` holds the normalized batch, inverse std and the
    updated running statistics (the caller decides whether to commit them;
    ``bn`` is not modified). In inference mode ``aux`` is None.
    """
    if not training:
        xhat = (batch - bn.running_mean) / np.sqrt(bn.running_var + bn.eps)
        return bn.gamma * xhat + bn.beta, None
    n = batch.shape[0]
    if n < 2:
        raise ValueError(f"batchnorm in training mode needs a batch of at least 2, got {n}")
    mean = batch.mean(axis=0)
    var = batch.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + bn.eps)
    xhat = (batch - mean) * inv_std
    m = bn.momentum
    new_mean = (1.0 - m) * bn.running_mean + m * mean
    new_var = (1.0 - m) * bn.running_var + m * var * n / (n - 1)
    return bn.gamma * xhat + bn.beta, {"xhat": xhat, "inv_std": inv_std, "running": (new_mean, new_var)}


def batchnorm_backward(g, aux, gamma):
    xhat, inv_std = aux["xhat"], aux["inv_std"]
    n = g.shape[0]
    dgamma = (g * xhat).sum(axis=0)
    dbeta = g.sum(axis=0)
    dxhat = g * gamma
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def dropout_forward(x, rate: float, training: bool, rng: np.random.Generator | None):
    """Inverted dropout. The returned mask already carries the 1/(1-rate) scale."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, np.ones_like(x)
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def _bn_of(params: ModelParams) -> BatchNormParams:
    c = params.config
    return BatchNormParams(
        params.params["bn.gamma"],
        params.params["bn.beta"],
        params.buffers["bn.running_mean"],
        params.buffers["bn.running_var"],
        c.bn_eps,
        c.bn_momentum,
    )


# --- full model -------------------------------------------------------------


def _stream_forward(x, params: ModelParams, s: str, act: str):
    p = params.params
    pre1 = spatial_conv_forward(x, p[f"{s}.spatial.w"], p[f"{s}.spatial.b"])
    a1 = activation_forward(pre1, act)
    pre2 = temporal_conv_forward(a1, p[f"{s}.temporal.w"], p[f"{s}.temporal.b"])
    a2 = activation_forward(pre2, act)
    return {"x": x, "pre1": pre1, "a1": a1, "pre2": pre2, "a2": a2}


def _fused_matmul(feats: dict[str, np.ndarray], w: np.ndarray, params: ModelParams):
    # one partial product per stream, summed in stream order, so a zero block
    # of weights removes a stream exactly
    total = None
    for s in params.config.streams:
        part = feats[s] @ w[params.fc_rows(s)]
        total = part if total is None else total + part
    return total


def _check_input(x, cfg: ModelConfig, stream: str):
    want = (cfg.channels(stream), cfg.n_t)
    if x is None or x.ndim != 3 or x.shape[1:] != want:
        got = None if x is None else x.shape
        raise ValueError(f"{stream} input must be (batch, {want[0]}, {want[1]}), got {got}")


def forward_pass(x_m, x_s, params: ModelParams, training: bool = False, rng=None):
    """Run the network on a batch; returns ``(probabilities, cache)``.

    ``x_m``/``x_s`` are ``(B, 20, n_t)`` and ``(B, 10, n_t)``; an input
    whose stream the model lacks is ignored and may be None.
    """
    cfg = params.config
    p = params.params
    inputs = {"mi": x_m, "ssvep": x_s}
    cache = {"params_id": id(params), "version": params.version, "training": training, "streams": {}}
    feats = {}
    for s in cfg.streams:
        x = np.asarray(inputs[s], dtype=float) if inputs[s] is not None else None
        _check_input(x, cfg, s)
        sc = _stream_forward(x, params, s, cfg.activation)
        cache["streams"][s] = sc
        feats[s] = sc["a2"].reshape(x.shape[0], -1)
    cache["feats"] = feats

    if cfg.fc_dim > 0:
        z = _fused_matmul(feats, p["fc.w"], params) + p["fc.b"]
        h = activation_forward(z, cfg.activation)
        hb, bn_aux = batchnorm_forward(h, _bn_of(params), training)
        hd, mask = dropout_forward(hb, cfg.dropout_rate, training, rng)
        logit = hd @ p["out.w"] + p["out.b"][0]
        cache.update(z=z, h=h, bn=bn_aux, hd=hd, mask=mask)
    else:
        logit = _fused_matmul(feats, p["out.w"], params) + p["out.b"][0]
    cache["logit"] = logit
    return expit(logit), cache


def model_forward(x_m, x_s, params: ModelParams, training: bool = False, rng=None):
    """Probabilities and, in training mode, the cache for :func:`model_backward`."""
    yhat, cache = forward_pass(x_m, x_s, params, training, rng)
    return yhat, (cache if training else None)


def predict_pair(pair, params: ModelParams) -> float:
    yhat, _ = forward_pass(pair.x_m[None], pair.x_s[None], params)
    return float(yhat[0])


def commit_running_stats(params: ModelParams, cache) -> None:
    if cache.get("bn"):
        mean, var = cache["bn"]["running"]
        params.buffers["bn.running_mean"] = mean
        params.buffers["bn.running_var"] = var


def model_backward(cache, yhat, y, params: ModelParams) -> dict[str, np.ndarray]:
    """Gradients of the mean batch BCE with respect to every learnable array."""
    if cache is None or not cache.get("training"):
        raise StaleCacheError("backward needs the cache of a training-mode forward pass")
    if cache["params_id"] != id(params) or cache["version"] != params.version:
        raise StaleCacheError("cache was produced by different or since-updated parameters")
    cfg = params.config
    p = params.params
    y = np.asarray(y, dtype=float)
    n = len(y)
    grads: dict[str, np.ndarray] = {}

    dlogit = (yhat - y) / n
    grads["out.b"] = np.array([dlogit.sum()])
    if cfg.fc_dim > 0:
        grads["out.w"] = cache["hd"].T @ dlogit
        dhd = np.outer(dlogit, p["out.w"])
        dhb = dhd * cache["mask"]
        dh, grads["bn.gamma"], grads["bn.beta"] = batchnorm_backward(dhb, cache["bn"], p["bn.gamma"])
        dz = dh * activation_grad(cache["z"], cfg.activation)
        w_in = p["fc.w"]
        grads["fc.w"] = np.concatenate([cache["feats"][s].T @ dz for s in cfg.streams], axis=0)
        grads["fc.b"] = dz.sum(axis=0)
        dfeat = dz @ w_in.T
    else:
        grads["out.w"] = np.concatenate([cache["feats"][s].T @ dlogit for s in cfg.streams])
        dfeat = np.outer(dlogit, p["out.w"])

    j = cfg.kernels[1]
    for s in cfg.streams:
        sc = cache["streams"][s]
        da2 = dfeat[:, params.fc_rows(s)].reshape(n, j, cfg.n_out_t)
        dpre2 = da2 * activation_grad(sc["pre2"], cfg.activation)
        da1, grads[f"{s}.temporal.w"], grads[f"{s}.temporal.b"] = temporal_conv_backward(
            dpre2, sc["a1"], p[f"{s}.temporal.w"]
        )
        dpre1 = da1 * activation_grad(sc["pre1"], cfg.activation)
        grads[f"{s}.spatial.w"], grads[f"{s}.spatial.b"] = spatial_conv_backward(dpre1, sc["x"], p[f"{s}.spatial.w"])
        if not cfg.conv_bias:
            grads[f"{s}.spatial.b"] = np.zeros_like(grads[f"{s}.spatial.b"])
            grads[f"{s}.temporal.b"] = np.zeros_like(grads[f"{s}.temporal.b"])
    return grads


# --- checkpoints --------------------------------------------------------------


def _encode(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _decode(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=float).reshape(d["shape"])


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    """JSON document; Python's shortest-repr floats make float64 round trips exact."""
    doc = {
        "format": "tscnn-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "params": {k: _encode(v) for k, v in params.params.items()},
        "buffers": {k: _encode(v) for k, v in params.buffers.items()},
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "tscnn-checkpoint":
        raise ValueError(f"{path}: not a checkpoint file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {doc.get('version')}, expected {CHECKPOINT_VERSION}")
    cfg = ModelConfig(**doc["config"])
    params = {k: _decode(v) for k, v in doc["params"].items()}
    expected = param_shapes(cfg)
    for k, shape in expected.items():
        if k not in params or params[k].shape != shape:
            raise ValueError(f"{path}: parameter {k} missing or not shaped {shape}")
    buffers = {k: _decode(v) for k, v in doc["buffers"].items()}
    return ModelParams(cfg, params, buffers), doc.get("extra", {})
