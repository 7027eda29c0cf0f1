"""Central-difference gradient checking shared by the nn and acceptance tests."""

import numpy as np

from tscnn.nn import ModelConfig, forward_pass, model_backward
from tscnn.train import bce_loss, init_params

H = 1e-5
# central differences of an O(1) loss carry about eps/h ~ 1e-11 absolute
# round-off, so relative error is measured against at least this scale
REL_FLOOR = 1e-5


def relative_error(num, ana):
    return np.abs(num - ana) / np.maximum(np.maximum(np.abs(num), np.abs(ana)), REL_FLOOR)


def random_problem(cfg: ModelConfig, seed: int, batch: int = 6, std: float = 0.3):
    rng = np.random.default_rng(seed)
    params = init_params(cfg, rng, std)
    for name in params.params:
        # perturb away from the init so biases and BN affine terms are non-trivial
        params.params[name] = params.params[name] + rng.normal(0.0, std, params.params[name].shape)
    x_m = rng.normal(size=(batch, cfg.n_mi_ch, cfg.n_t)) if "mi" in cfg.streams else None
    x_s = rng.normal(size=(batch, cfg.n_ssvep_ch, cfg.n_t)) if "ssvep" in cfg.streams else None
    y = np.arange(batch) % 2
    # rescale the output layer so logits are O(1): a saturated sigmoid hits
    # the probability clamp, where the loss is flat but backprop is not
    _, cache = forward_pass(x_m, x_s, params, True, np.random.default_rng(seed + 1))
    logit = cache["logit"]
    scale = max(float(np.std(logit)), 1e-3)
    params.params["out.w"] = params.params["out.w"] / scale
    params.params["out.b"] = (params.params["out.b"] - float(np.mean(logit))) / scale
    return params, x_m, x_s, y


def check_gradients(cfg: ModelConfig, seed: int = 0) -> float:
    """Largest elementwise relative error over every parameter entry."""
    params, x_m, x_s, y = random_problem(cfg, seed)

    def loss():
        yhat, _ = forward_pass(x_m, x_s, params, True, np.random.default_rng(seed + 1))
        return bce_loss(y, yhat)

    yhat, cache = forward_pass(x_m, x_s, params, True, np.random.default_rng(seed + 1))
    grads = model_backward(cache, yhat, y, params)
    worst = 0.0
    for name, a in params.params.items():
        num = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + H
            plus = loss()
            a[idx] = orig - H
            minus = loss()
            a[idx] = orig
            num[idx] = (plus - minus) / (2 * H)
        worst = max(worst, float(relative_error(num, grads[name]).max()))
    return worst
