"""One JSON config file covering data, training, distortion and experiment plan."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data import BundleConfig, DistortConfig
from .encoder import TrainConfig
from .experiment import ExperimentPlan, Method, Sweep
from .kernels import KernelSpec
from .numerics import ContractError


class ConfigError(ContractError):
    pass


def _names(cls) -> set:
    return {f.name for f in fields(cls)}


DEFAULTS = {
    "data": asdict(BundleConfig()),
    "train": {**{k: v for k, v in TrainConfig().to_dict().items() if k != "lam"}, "lambda": TrainConfig().lam},
    "distort": asdict(DistortConfig()),
    "fake_ood": {"enabled": False, "n_out": 20000, "seed": 0},
    "plan": {
        "methods": [{"objective": "hood", "score": "cor"}, {"objective": "ce_only", "score": "msp"}],
        "seeds": [0, 1, 2, 3, 4],
        "seed": 0,
        "sweep": None,
        "hsic_rows": 200,
    },
}
SECTIONS = tuple(DEFAULTS)
METHOD_KEYS = {"objective", "score", "name", "kernel", "fake_ood", "lam"}


def _merge(base: dict, over: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        key = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, key)
        else:
            out[k] = v
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: dict, assignment: str) -> None:
    """Apply ``section.key=value`` (value parsed as JSON when possible) to the raw config dict."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set '{key}': '{p}' is not a section")
    node[parts[-1]] = _parse_value(value)


@dataclass
class CliConfig:
    bundle: BundleConfig
    train: TrainConfig
    distort: DistortConfig
    fake_ood: dict
    plan: ExperimentPlan
    resolved: dict = field(repr=False)

    @property
    def sha256(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(json.dumps(resolved, sort_keys=True).encode()).hexdigest()


def _build(cls, values: dict, section: str):
    try:
        obj = cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc
    except ContractError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc
    return obj


def _validate(obj, section: str):
    try:
        obj.validate()
    except ContractError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def _check_types(values: dict, defaults: dict, section: str):
    for k, v in values.items():
        d = defaults.get(k)
        if isinstance(d, bool) and not isinstance(v, bool):
            raise ConfigError(f"'{section}.{k}' must be a boolean, got {v!r}")
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"'{section}.{k}' must be a number, got {v!r}")
            if isinstance(d, int) and not isinstance(v, int):
                raise ConfigError(f"'{section}.{k}' must be an integer, got {v!r}")


def resolve(raw: dict) -> CliConfig:
    """Merge ``raw`` over defaults and validate every section; raises ConfigError naming the bad key."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    merged = _merge(DEFAULTS, raw, "")

    _check_types(merged["data"], DEFAULTS["data"], "data")
    bundle = _build(BundleConfig, merged["data"], "data")
    _validate(bundle, "data")

    t = dict(merged["train"])
    _check_types({k: v for k, v in t.items() if k != "kernel"}, DEFAULTS["train"], "train")
    t["lam"] = t.pop("lambda")
    t["kernel"] = _build(KernelSpec, t["kernel"], "train.kernel")
    t["hidden"] = tuple(t["hidden"])
    train = _build(TrainConfig, t, "train")
    _validate(train, "train")

    _check_types(merged["distort"], DEFAULTS["distort"], "distort")
    distort = _build(DistortConfig, merged["distort"], "distort")
    _validate(distort, "distort")
    _check_types(merged["fake_ood"], DEFAULTS["fake_ood"], "fake_ood")
    if merged["fake_ood"]["n_out"] < 1:
        raise ConfigError("'fake_ood.n_out' must be >= 1")

    p = merged["plan"]
    methods = []
    for i, m in enumerate(p["methods"]):
        bad = set(m) - METHOD_KEYS
        if bad:
            raise ConfigError(f"unknown config key 'plan.methods[{i}].{sorted(bad)[0]}'")
        method = _build(Method, m, f"plan.methods[{i}]")
        if method.objective not in ("hood", "oe_uniform", "mmd", "ce_only"):
            raise ConfigError(f"'plan.methods[{i}].objective' is invalid: {method.objective!r}")
        methods.append(method)
    sweep = None
    if p["sweep"] is not None:
        if set(p["sweep"]) - {"param", "values"}:
            raise ConfigError(f"unknown config key 'plan.sweep.{sorted(set(p['sweep']) - {'param', 'values'})[0]}'")
        sweep = _build(Sweep, p["sweep"], "plan.sweep")
    plan = ExperimentPlan(
        bundle=bundle, train=train, methods=tuple(methods), seeds=tuple(p["seeds"]), seed=p["seed"],
        sweep=sweep, distort=distort, n_fake_out=merged["fake_ood"]["n_out"], hsic_rows=p["hsic_rows"],
    )
    _validate(plan, "plan")
    return CliConfig(bundle, train, distort, merged["fake_ood"], plan, merged)


def load_config(path, overrides=()) -> CliConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for o in overrides:
        apply_override(raw, o)
    return resolve(raw)
