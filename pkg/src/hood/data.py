"""Synthetic Gaussian bundles, fake-OOD distortion, outlier grouping and batch assembly."""
from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .numerics import ContractError, Rng, derive_seed, make_rng


@dataclass(frozen=True)
class BundleConfig:
    n_classes: int = 4
    dim: int = 8
    n_per_class: int = 500
    n_test_per_class: int = 250
    radius: float = 2.0
    std: float = 0.5
    n_train_ood_clusters: int = 3
    n_test_ood_clusters: int = 3
    ood_radius: float = 2.0
    ood_std: float = 1.0
    n_train_out: int = 20000
    test_ratio: int = 5
    separation_floor: float = 2.5
    seed: int = 7

    def validate(self):
        for name in ("n_classes", "dim", "n_per_class", "n_test_per_class", "test_ratio"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_classes < 2:
            raise ContractError(f"n_classes must be >= 2, got {self.n_classes}")
        for name in ("n_train_ood_clusters", "n_test_ood_clusters", "n_train_out", "seed"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("radius", "std", "ood_radius", "ood_std"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive, got {getattr(self, name)}")
        if self.separation_floor < 0:
            raise ContractError(f"separation_floor must be >= 0, got {self.separation_floor}")
        if self.n_test_ood_clusters < 1:
            raise ContractError("n_test_ood_clusters must be >= 1")
        if (self.n_per_class * self.n_classes) < 1:
            raise ContractError("empty training set")


@dataclass(frozen=True)
class DistortConfig:
    noise_scale: float = 3.0
    permute: bool = True
    scale_jitter: float = 0.5
    strength_n: int = 5

    def validate(self):
        if self.noise_scale < 0:
            raise ContractError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.strength_n < 0:
            raise ContractError(f"strength_n must be >= 0, got {self.strength_n}")
        if not 0 <= self.scale_jitter < 1:
            raise ContractError(f"scale_jitter must be in [0, 1), got {self.scale_jitter}")


@dataclass
class DatasetBundle:
    train_in: np.ndarray
    train_labels: np.ndarray
    train_out: np.ndarray
    test_in: np.ndarray
    test_labels: np.ndarray
    test_out: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return int(self.meta.get("n_classes", int(self.train_labels.max()) + 1))

    @property
    def dim(self) -> int:
        return self.train_in.shape[1]


@dataclass
class LabeledBatch:
    x_in: np.ndarray
    y_in: np.ndarray
    x_out: np.ndarray


def _sphere_points(rng: Rng, k: int, d: int, radius: float) -> np.ndarray:
    v = rng.standard_normal((k, d))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def _spread_points(rng: Rng, k: int, d: int, radius: float, avoid: np.ndarray, floor: float, tries: int = 2000):
    """Rejection-sample k sphere points at least ``floor`` apart from each other and ``avoid``."""
    pts = []
    for _ in range(tries):
        if len(pts) == k:
            break
        p = _sphere_points(rng, 1, d, radius)[0]
        others = np.vstack([avoid, *pts]) if (len(avoid) or pts) else np.empty((0, d))
        if len(others) == 0 or np.min(np.linalg.norm(others - p, axis=1)) >= floor:
            pts.append(p)
    if len(pts) < k:
        raise ContractError(
            f"could not place {k} cluster means with separation_floor={floor} at radius {radius}"
        )
    return np.array(pts).reshape(k, d)


def _draw_clusters(rng: Rng, means: np.ndarray, n: int, std: float):
    """n points spread evenly (round robin) over the given cluster means."""
    which = np.arange(n) % len(means)
    return means[which] + std * rng.standard_normal((n, means.shape[1]))


def make_gaussian_bundle(cfg: BundleConfig) -> DatasetBundle:
    """Inlier classes on a radius sphere; train and test OOD from distinct cluster sets."""
    cfg.validate()
    rng = make_rng(cfg.seed)
    d, c = cfg.dim, cfg.n_classes
    mu_in = _spread_points(rng, c, d, cfg.radius, np.empty((0, d)), cfg.separation_floor)
    mu_tr_ood = _spread_points(rng, cfg.n_train_ood_clusters, d, cfg.ood_radius, mu_in, cfg.separation_floor)
    mu_te_ood = _spread_points(
        rng, cfg.n_test_ood_clusters, d, cfg.ood_radius, np.vstack([mu_in, mu_tr_ood]), cfg.separation_floor
    )

    train_labels = np.repeat(np.arange(c), cfg.n_per_class)
    train_in = mu_in[train_labels] + cfg.std * rng.standard_normal((len(train_labels), d))
    test_labels = np.repeat(np.arange(c), cfg.n_test_per_class)
    test_in = mu_in[test_labels] + cfg.std * rng.standard_normal((len(test_labels), d))
    if cfg.n_train_ood_clusters and cfg.n_train_out:
        train_out = _draw_clusters(rng, mu_tr_ood, cfg.n_train_out, cfg.ood_std)
    else:
        train_out = np.empty((0, d))
    n_test_out = max(1, len(test_labels) // cfg.test_ratio)
    test_out = _draw_clusters(rng, mu_te_ood, n_test_out, cfg.ood_std)

    meta = {
        "generator": "gaussian",
        "config": asdict(cfg),
        "n_classes": c,
        "inlier_means": mu_in.tolist(),
        "train_ood_means": mu_tr_ood.tolist(),
        "test_ood_means": mu_te_ood.tolist(),
    }
    return DatasetBundle(train_in, train_labels, train_out, test_in, test_labels, test_out, meta)


def distort(x, cfg: DistortConfig, rng: Rng) -> np.ndarray:
    """Apply ``strength_n`` rounds of noise, per-row coordinate shuffle and scale jitter."""
    cfg.validate()
    out = np.array(x, dtype=np.float64, copy=True)
    n, d = out.shape
    for _ in range(cfg.strength_n):
        if cfg.noise_scale > 0:
            out += cfg.noise_scale * rng.standard_normal((n, d))
        if cfg.permute:
            perm = np.argsort(rng.random((n, d)), axis=1)
            out = np.take_along_axis(out, perm, axis=1)
        if cfg.scale_jitter > 0:
            out *= rng.uniform(1 - cfg.scale_jitter, 1 + cfg.scale_jitter, size=(n, 1))
    return out


def with_fake_outliers(bundle: DatasetBundle, cfg: DistortConfig, n_out: int, seed: int) -> DatasetBundle:
    """Replace the training OOD pool by ``n_out`` distorted copies of training inliers."""
    rng = make_rng(seed)
    src = bundle.train_in[rng.integers(0, len(bundle.train_in), size=n_out)]
    fake = distort(src, cfg, rng)
    meta = dict(bundle.meta, fake_ood={"distort": asdict(cfg), "n_out": n_out, "seed": seed})
    return DatasetBundle(
        bundle.train_in, bundle.train_labels, fake, bundle.test_in, bundle.test_labels, bundle.test_out, meta
    )


def fixed_outlier_epochs(pool, epochs: int, per_epoch: int, seed: int) -> list[np.ndarray]:
    """``epochs`` disjoint, uniformly sampled index groups of size ``per_epoch``."""
    n_pool = len(pool)
    if epochs * per_epoch > n_pool:
        raise ContractError(f"pool of {n_pool} rows cannot supply {epochs} groups of {per_epoch}")
    idx = make_rng(seed).permutation(n_pool)[: epochs * per_epoch]
    return [idx[e * per_epoch : (e + 1) * per_epoch] for e in range(epochs)]


class EpochBatches:
    """Batches for one epoch: inliers reshuffled, outliers taken in order from the epoch's group."""

    def __init__(self, bundle: DatasetBundle, epoch_group, cfg, rng: Rng):
        self.bundle = bundle
        self.group = np.asarray(epoch_group, dtype=np.int64)
        self.batch_in = cfg.batch_in
        self.n_out = cfg.ratio_out_in * cfg.batch_in
        self.order = rng.permutation(len(bundle.train_in))
        self.steps = len(self.order) // self.batch_in
        self._step = 0

    def next_batch(self) -> LabeledBatch:
        s = self._step
        if s >= self.steps:
            raise ContractError("inlier data exhausted for this epoch")
        if (s + 1) * self.n_out > len(self.group):
            raise ContractError(f"outlier group of {len(self.group)} exhausted at step {s}")
        take = self.order[s * self.batch_in : (s + 1) * self.batch_in]
        out_idx = self.group[s * self.n_out : (s + 1) * self.n_out]
        self._step += 1
        return LabeledBatch(
            self.bundle.train_in[take], self.bundle.train_labels[take], self.bundle.train_out[out_idx]
        )

    def __iter__(self):
        while self._step < self.steps:
            yield self.next_batch()


def next_batch(bundle: DatasetBundle, epoch_group, cfg, rng: Rng) -> LabeledBatch:
    """First batch of a fresh epoch; use :class:`EpochBatches` to walk a whole epoch."""
    return EpochBatches(bundle, epoch_group, cfg, rng).next_batch()


# --- serialization -----------------------------------------------------------

_SPLITS = ("train_in", "train_out", "test_in", "test_out")
MAGIC = "# hood-bundle v1"


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_bundle(bundle: DatasetBundle, extra_header: dict | None = None) -> str:
    shapes = {s: list(getattr(bundle, s).shape) for s in _SPLITS}
    header = {"meta": bundle.meta, "shapes": shapes}
    if extra_header:
        header.update(extra_header)
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    labels = {"train_in": bundle.train_labels, "test_in": bundle.test_labels}
    for split in _SPLITS:
        x = getattr(bundle, split)
        buf.write(f"[{split}]\n")
        cols = [f"x{j}" for j in range(x.shape[1])]
        if split in labels:
            cols.append("label")
        buf.write(",".join(cols) + "\n")
        lab = labels.get(split)
        for i, row in enumerate(x):
            fields = [_fmt(v) for v in row]
            if lab is not None:
                fields.append(str(int(lab[i])))
            buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def save_bundle(bundle: DatasetBundle, path, extra_header: dict | None = None) -> None:
    Path(path).write_text(dumps_bundle(bundle, extra_header))


def loads_bundle(text: str) -> DatasetBundle:
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC or not lines[1].startswith("# "):
        raise ContractError("not a hood bundle file")
    header = json.loads(lines[1][2:])
    shapes = header["shapes"]
    blocks: dict[str, list[str]] = {}
    current = None
    for line in lines[2:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            blocks[current] = []
        elif current is not None:
            blocks[current].append(line)
    arrays = {}
    for split in _SPLITS:
        if split not in blocks:
            raise ContractError(f"bundle file missing [{split}] block")
        rows = blocks[split][1:]
        n, d = shapes[split]
        if len(rows) != n:
            raise ContractError(f"[{split}] has {len(rows)} rows, header says {n}")
        vals = [r.split(",") for r in rows]
        if split in ("train_in", "test_in"):
            x = np.array([[float(v) for v in r[:-1]] for r in vals], dtype=np.float64).reshape(n, d)
            y = np.array([int(r[-1]) for r in vals], dtype=np.int64)
            arrays[split] = (x, y)
        else:
            arrays[split] = np.array([[float(v) for v in r] for r in vals], dtype=np.float64).reshape(n, d)
    return DatasetBundle(
        arrays["train_in"][0], arrays["train_in"][1], arrays["train_out"],
        arrays["test_in"][0], arrays["test_in"][1], arrays["test_out"], header["meta"],
    )


def load_bundle(path) -> DatasetBundle:
    return loads_bundle(Path(path).read_text())


def bundle_seed(plan_seed: int, seed: int) -> int:
    return derive_seed(plan_seed, seed, 0)
