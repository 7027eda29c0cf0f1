"""Classification metrics and the paired-sample t-test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class Metrics:
    """Binary decoding metrics; label 1 ("right") is the positive class.

    ``sensitivity``/``specificity`` are NaN when the corresponding class is
    absent from the labels, and ``flags`` records why.
    """

    accuracy: float
    sensitivity: float
    specificity: float
    mse: float
    confusion: Confusion
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sensitivity", "specificity"):
            if math.isnan(d[k]):
                d[k] = None
        return d


def classify(probs, threshold: float = 0.5) -> np.ndarray:
    """1 where ``prob > threshold``; a tie goes to class 0."""
    return (np.asarray(probs, dtype=float) > threshold).astype(int)


def compute_metrics(preds, labels, probs) -> Metrics:
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    probs = np.asarray(probs, dtype=float)
    if not (len(preds) == len(labels) == len(probs)) or len(labels) == 0:
        raise ValueError(
            f"need equal, non-zero lengths; got preds={len(preds)} labels={len(labels)} probs={len(probs)}"
        )
    tp = int(np.sum((preds == 1) & (labels == 1)))
    tn = int(np.sum((preds == 0) & (labels == 0)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    flags = []
    if tp + fn:
        sens = tp / (tp + fn)
    else:
        sens = math.nan
        flags.append("sensitivity undefined: no positive labels")
    if tn + fp:
        spec = tn / (tn + fp)
    else:
        spec = math.nan
        flags.append("specificity undefined: no negative labels")
    return Metrics(
        accuracy=(tp + tn) / len(labels),
        sensitivity=sens,
        specificity=spec,
        mse=float(np.mean((probs - labels) ** 2)),
        confusion=Confusion(tp, fp, tn, fn),
        flags=flags,
    )


def summarize(metrics: list[Metrics]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of each metric across folds."""
    out = {}
    for name in ("accuracy", "sensitivity", "specificity", "mse"):
        vals = np.array([getattr(m, name) for m in metrics], dtype=float)
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out[name] = (float(np.mean(vals)), std)
    return out


# --- Student t ----------------------------------------------------------------

_FPMIN = 1e-300


def _beta_cf(a: float, b: float, x: float, tol: float, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float, tol: float = 1e-10) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x, tol) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x, tol) / b


def student_t_two_tailed(t: float, dof: int) -> float:
    if dof < 1:
        raise ValueError("dof must be at least 1")
    if math.isinf(t):
        return 0.0
    return betainc_regularized(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    dof: int
    p_value: float


def paired_t_test(a, b) -> TTestResult:
    """Two-tailed paired-sample t-test of ``mean(a - b) == 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be 1-D and equally long, got {a.shape} and {b.shape}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateInputError("all paired differences are identical; t is undefined")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, student_t_two_tailed(t, n - 1))
