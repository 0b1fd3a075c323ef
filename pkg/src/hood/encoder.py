"""MLP feature encoder, softmax head, training objectives with hand-written gradients, and SGD."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .data import DatasetBundle, EpochBatches, LabeledBatch, fixed_outlier_epochs
from .kernels import KernelSpec, center, cross_kernel, cross_kernel_vjp, kernel_matrix, self_kernel_vjp
from .independence import hsic_from_centered
from .numerics import ContractError, Rng, as_matrix, derive_seed, make_rng

OBJECTIVES = ("hood", "oe_uniform", "mmd", "ce_only")
ACTIVATIONS = ("relu", "tanh")


@dataclass
class EncoderParams:
    """Layer weights (in x out), biases, and the C x d classifier. Also used for gradients."""

    weights: list
    biases: list
    classifier: np.ndarray
    activation: str = "relu"
    feature_activation: bool = False

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def feature_dim(self) -> int:
        return self.classifier.shape[1]

    @property
    def n_classes(self) -> int:
        return self.classifier.shape[0]

    def arrays(self) -> list:
        return [*self.weights, *self.biases, self.classifier]

    def zeros_like(self) -> "EncoderParams":
        return EncoderParams(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
            np.zeros_like(self.classifier),
            self.activation,
            self.feature_activation,
        )

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.classifier.copy(),
            self.activation,
            self.feature_activation,
        )

    def validate(self):
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ContractError("need one bias per weight matrix and at least one layer")
        prev = self.weights[0].shape[0]
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != prev or b.shape != (w.shape[1],):
                raise ContractError("layer shapes do not chain")
            prev = w.shape[1]
        if self.classifier.shape[1] != prev or self.classifier.shape[0] < 2:
            raise ContractError(f"classifier must be C x {prev} with C >= 2")
        if not all(np.all(np.isfinite(a)) for a in self.arrays()):
            raise ContractError("non-finite parameters")


def init_params(input_dim: int, hidden: tuple, feature_dim: int, n_classes: int, rng: Rng,
                activation: str = "relu", feature_activation: bool = False) -> EncoderParams:
    dims = [input_dim, *hidden, feature_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    classifier = rng.standard_normal((n_classes, feature_dim)) / math.sqrt(feature_dim)
    p = EncoderParams(weights, biases, classifier, activation, feature_activation)
    p.validate()
    return p


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    objective: str = "hood"
    epochs: int = 50
    base_lr: float = 0.02
    final_lr: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_in: int = 64
    ratio_out_in: int = 2
    seed: int = 0
    hidden: tuple = (64, 64)
    feature_dim: int = 16
    activation: str = "relu"
    feature_activation: bool = True

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise ContractError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.lam < 0:
            raise ContractError(f"lambda must be >= 0, got {self.lam}")
        if self.batch_in < 2:
            raise ContractError(f"batch_in must be >= 2, got {self.batch_in}")
        if self.ratio_out_in < 0 or int(self.ratio_out_in) != self.ratio_out_in:
            raise ContractError(f"ratio_out_in must be a non-negative integer, got {self.ratio_out_in}")
        if not self.base_lr > self.final_lr >= 0:
            raise ContractError("need base_lr > final_lr >= 0")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise ContractError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ContractError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.feature_dim < 1 or any(h < 1 for h in self.hidden):
            raise ContractError("layer widths must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "kernel" in d and isinstance(d["kernel"], dict):
            d["kernel"] = KernelSpec(**d["kernel"])
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown train config key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class LossBreakdown:
    total: float
    cls: float
    dep: float


# --- forward ------------------------------------------------------------------

def _act(a: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(a, 0.0) if kind == "relu" else np.tanh(a)


def _act_grad(a: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    return (a > 0).astype(np.float64) if kind == "relu" else 1.0 - h * h


def _forward_trace(params: EncoderParams, x: np.ndarray):
    hs, pre = [x], []
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = hs[-1] @ w + b
        pre.append(a)
        last = i == n_layers - 1
        hs.append(_act(a, params.activation) if (not last or params.feature_activation) else a)
    return hs, pre


def forward(params: EncoderParams, x) -> np.ndarray:
    """Features z = f(x) as an N x d matrix."""
    x = as_matrix(x, "x")
    if x.shape[1] != params.input_dim:
        raise ContractError(f"x has {x.shape[1]} columns, encoder expects {params.input_dim}")
    return _forward_trace(params, x)[0][-1]


def _backward(params: EncoderParams, hs, pre, dfeat: np.ndarray, grads: EncoderParams) -> None:
    """Accumulate parameter gradients for dL/dfeatures = dfeat into ``grads``."""
    delta = dfeat
    n_layers = len(params.weights)
    for i in reversed(range(n_layers)):
        if i < n_layers - 1 or params.feature_activation:
            delta = delta * _act_grad(pre[i], hs[i + 1], params.activation)
        grads.weights[i] += hs[i].T @ delta
        grads.biases[i] += delta.sum(axis=0)
        if i:
            delta = delta @ params.weights[i].T


# --- losses -------------------------------------------------------------------

def logits(params: EncoderParams, z: np.ndarray) -> np.ndarray:
    return z @ params.classifier.T


def log_softmax(s: np.ndarray) -> np.ndarray:
    m = s.max(axis=1, keepdims=True)
    shifted = s - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(labels, n: int, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(y) != n:
        raise ContractError(f"{len(y)} labels for {n} rows")
    if len(y) and (y.min() < 0 or y.max() >= n_classes):
        raise ContractError(f"labels must lie in [0, {n_classes})")
    return y


def cross_entropy_loss(params: EncoderParams, z, labels) -> float:
    z = as_matrix(z, "z")
    y = _check_labels(labels, z.shape[0], params.n_classes)
    lp = log_softmax(logits(params, z))
    return float(-lp[np.arange(len(y)), y].mean())


def uniform_kl(params: EncoderParams, g: np.ndarray) -> float:
    """Mean KL(uniform || softmax(W g_i)) over outlier rows."""
    c = params.n_classes
    lp = log_softmax(logits(params, g))
    return float(np.mean(-math.log(c) - lp.mean(axis=1)))


def _groups(n_in: int, x_out: np.ndarray) -> int:
    if len(x_out) % n_in:
        raise ContractError(f"{len(x_out)} outliers is not a multiple of {n_in} inliers")
    return len(x_out) // n_in


def _dep_value(objective: str, params: EncoderParams, z: np.ndarray, g: np.ndarray, spec: KernelSpec) -> float:
    n = len(z)
    if objective == "ce_only" or len(g) == 0:
        return 0.0
    if objective == "oe_uniform":
        return uniform_kl(params, g)
    k = _groups(n, g)
    vals = []
    kh_z = center(kernel_matrix(z, spec)) if objective == "hood" else None
    for j in range(k):
        gj = g[j * n : (j + 1) * n]
        if objective == "hood":
            vals.append(hsic_from_centered(kh_z, center(kernel_matrix(gj, spec))))
        else:
            vals.append(-_mmd(z, gj, spec))
    return float(sum(vals) / k)


def _mmd(z, g, spec):
    return cross_kernel(z, z, spec).mean() - 2.0 * cross_kernel(z, g, spec).mean() + cross_kernel(g, g, spec).mean()


def _breakdown(cfg: TrainConfig, params, z, y, g) -> LossBreakdown:
    cls = cross_entropy_loss(params, z, y)
    dep = _dep_value(cfg.objective, params, z, g, cfg.kernel)
    return LossBreakdown(cls + cfg.lam * dep, cls, dep)


def hood_loss(params: EncoderParams, x_in, labels, x_out, cfg: TrainConfig) -> LossBreakdown:
    """Cross-entropy plus lambda times HSIC averaged over the outlier sub-batches."""
    return objective_loss(params, LabeledBatch(x_in, labels, x_out), replace(cfg, objective="hood"))


def oe_uniform_loss(params: EncoderParams, x_in, labels, x_out, lam: float = 1.0) -> LossBreakdown:
    return objective_loss(params, LabeledBatch(x_in, labels, x_out), TrainConfig(lam=lam, objective="oe_uniform"))


def objective_loss(params: EncoderParams, batch: LabeledBatch, cfg: TrainConfig) -> LossBreakdown:
    x_in = as_matrix(batch.x_in, "x_in")
    z = forward(params, x_in)
    x_out = np.asarray(batch.x_out, dtype=np.float64).reshape(-1, x_in.shape[1])
    if cfg.objective in ("hood", "mmd") and len(x_out):
        _groups(len(x_in), x_out)
    g = forward(params, x_out) if len(x_out) else np.empty((0, z.shape[1]))
    return _breakdown(cfg, params, z, batch.y_in, g)


# --- gradients ----------------------------------------------------------------

def _dep_feature_grads(objective, params, z, g, spec, scale, grads):
    """dL/dz, dL/dg of scale * dep; classifier gradient (OE) goes straight into grads."""
    n = len(z)
    dz = np.zeros_like(z)
    dg = np.zeros_like(g)
    if objective == "oe_uniform":
        c = params.n_classes
        p = np.exp(log_softmax(logits(params, g)))
        dlog = scale * (p - 1.0 / c) / len(g)
        grads.classifier += dlog.T @ g
        dg += dlog @ params.classifier
        return dz, dg
    k = _groups(n, g)
    w = scale / k
    if objective == "hood":
        norm = w / (n - 1) ** 2
        hkh_z = center(center(kernel_matrix(z, spec)).T)
        for j in range(k):
            gj = g[j * n : (j + 1) * n]
            hkh_g = center(center(kernel_matrix(gj, spec)).T)
            dz += self_kernel_vjp(z, spec, norm * hkh_g)
            dg[j * n : (j + 1) * n] += self_kernel_vjp(gj, spec, norm * hkh_z)
    else:  # mmd, dep = -MMD^2
        for j in range(k):
            gj = g[j * n : (j + 1) * n]
            m = len(gj)
            dz -= self_kernel_vjp(z, spec, np.full((n, n), w / n**2))
            dgj = -self_kernel_vjp(gj, spec, np.full((m, m), w / m**2))
            gx, gy = cross_kernel_vjp(z, gj, spec, np.full((n, m), -2.0 * w / (n * m)))
            dz -= gx
            dgj -= gy
            dg[j * n : (j + 1) * n] += dgj
    return dz, dg


def loss_and_gradient(params: EncoderParams, batch: LabeledBatch, cfg: TrainConfig):
    """(LossBreakdown, gradient as an EncoderParams) for the configured objective."""
    if cfg.kernel.standardize and cfg.objective in ("hood", "mmd"):
        raise ContractError("gradients through feature standardization are not implemented")
    x_in = as_matrix(batch.x_in, "x_in")
    if x_in.shape[1] != params.input_dim:
        raise ContractError(f"x_in has {x_in.shape[1]} columns, encoder expects {params.input_dim}")
    y = _check_labels(batch.y_in, len(x_in), params.n_classes)
    x_out = np.asarray(batch.x_out, dtype=np.float64).reshape(-1, x_in.shape[1])
    grads = params.zeros_like()

    hs, pre = _forward_trace(params, x_in)
    z = hs[-1]
    lp = log_softmax(logits(params, z))
    probs = np.exp(lp)
    probs[np.arange(len(y)), y] -= 1.0
    dlog = probs / len(y)
    grads.classifier += dlog.T @ z
    dz = dlog @ params.classifier

    active = cfg.objective != "ce_only" and cfg.lam != 0 and len(x_out) > 0
    if len(x_out) and cfg.objective in ("hood", "mmd"):
        _groups(len(x_in), x_out)
    g = None
    if len(x_out) and cfg.objective != "ce_only":
        hs_o, pre_o = _forward_trace(params, x_out)
        g = hs_o[-1]
    if active:
        dz_dep, dg = _dep_feature_grads(cfg.objective, params, z, g, cfg.kernel, cfg.lam, grads)
        dz = dz + dz_dep
        _backward(params, hs_o, pre_o, dg, grads)
    _backward(params, hs, pre, dz, grads)

    cls = float(-lp[np.arange(len(y)), y].mean())
    dep = _dep_value(cfg.objective, params, z, g, cfg.kernel) if g is not None else 0.0
    return LossBreakdown(cls + cfg.lam * dep, cls, dep), grads


def loss_gradient(params: EncoderParams, batch: LabeledBatch, cfg: TrainConfig) -> EncoderParams:
    return loss_and_gradient(params, batch, cfg)[1]


# --- training -----------------------------------------------------------------

def cosine_lr(step: int, total: int, base_lr: float, final_lr: float) -> float:
    if total <= 1:
        return final_lr
    return final_lr + 0.5 * (base_lr - final_lr) * (1.0 + math.cos(math.pi * step / (total - 1)))


class NesterovSGD:
    """SGD with Nesterov momentum; weight decay on weight matrices only."""

    def __init__(self, params: EncoderParams, momentum: float, weight_decay: float):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buf = None
        n_w = len(params.weights)
        # arrays() order: weights, biases, classifier
        self.decay_mask = [True] * n_w + [False] * n_w + [True]

    def step(self, params: EncoderParams, grads: EncoderParams, lr: float) -> None:
        ps, gs = params.arrays(), grads.arrays()
        if self.buf is None:
            self.buf = [None] * len(ps)
        for i, (p, g, decay) in enumerate(zip(ps, gs, self.decay_mask)):
            if decay and self.weight_decay:
                g = g + self.weight_decay * p
            b = g.copy() if self.buf[i] is None else self.momentum * self.buf[i] + g
            self.buf[i] = b
            p -= lr * (g + self.momentum * b)


@dataclass
class TrainResult:
    params: EncoderParams
    history: list
    init: EncoderParams


def outlier_groups(bundle: DatasetBundle, cfg: TrainConfig, steps: int) -> list:
    """Fixed per-epoch outlier groups; cycles through as many disjoint groups as the pool allows."""
    per_epoch = steps * cfg.ratio_out_in * cfg.batch_in
    if per_epoch == 0:
        return [np.empty(0, dtype=np.int64)]
    n_groups = min(max(cfg.epochs, 1), len(bundle.train_out) // per_epoch)
    if n_groups == 0:
        raise ContractError(
            f"training OOD pool of {len(bundle.train_out)} rows is smaller than one epoch's {per_epoch}"
        )
    return fixed_outlier_epochs(bundle.train_out, n_groups, per_epoch, derive_seed(cfg.seed, 2))


def train(cfg: TrainConfig, bundle: DatasetBundle, params: EncoderParams | None = None) -> TrainResult:
    """Run cosine-decayed Nesterov SGD; returns final params and per-epoch mean LossBreakdowns."""
    cfg.validate()
    if len(bundle.train_in) == 0:
        raise ContractError("empty training set")
    steps = len(bundle.train_in) // cfg.batch_in
    if steps == 0:
        raise ContractError(f"{len(bundle.train_in)} training inliers is less than one batch")
    if params is None:
        params = init_params(
            bundle.dim, cfg.hidden, cfg.feature_dim, bundle.n_classes,
            make_rng(derive_seed(cfg.seed, 1)), cfg.activation, cfg.feature_activation,
        )
    init = params.copy()
    params = params.copy()
    groups = outlier_groups(bundle, cfg, steps)
    rng = make_rng(derive_seed(cfg.seed, 3))
    opt = NesterovSGD(params, cfg.momentum, cfg.weight_decay)
    total = cfg.epochs * steps
    history = []
    t = 0
    for epoch in range(cfg.epochs):
        sums = np.zeros(3)
        for batch in EpochBatches(bundle, groups[epoch % len(groups)], cfg, rng):
            lb, grads = loss_and_gradient(params, batch, cfg)
            if not np.isfinite(lb.total):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, step {t}")
            opt.step(params, grads, cosine_lr(t, total, cfg.base_lr, cfg.final_lr))
            sums += (lb.total, lb.cls, lb.dep)
            t += 1
        history.append(LossBreakdown(*(sums / steps)))
    return TrainResult(params, history, init)


# --- checkpoints ----------------------------------------------------------------

def params_to_dict(params: EncoderParams) -> dict:
    return {
        "activation": params.activation,
        "feature_activation": params.feature_activation,
        "layer_shapes": [list(w.shape) for w in params.weights],
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "classifier": params.classifier.tolist(),
    }


def params_from_dict(d: dict) -> EncoderParams:
    p = EncoderParams(
        [np.array(w, dtype=np.float64).reshape(s) for w, s in zip(d["weights"], d["layer_shapes"])],
        [np.array(b, dtype=np.float64) for b in d["biases"]],
        np.array(d["classifier"], dtype=np.float64),
        d["activation"],
        d["feature_activation"],
    )
    p.validate()
    return p


def save_checkpoint(path, params: EncoderParams, cfg: TrainConfig, extra: dict | None = None) -> None:
    doc = {"format": "hood-checkpoint v1", "config": cfg.to_dict(), "seed": cfg.seed, **(extra or {})}
    doc["params"] = params_to_dict(params)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "hood-checkpoint v1":
        raise ContractError(f"{path} is not a hood checkpoint")
    return params_from_dict(doc["params"]), TrainConfig.from_dict(doc["config"]), doc
