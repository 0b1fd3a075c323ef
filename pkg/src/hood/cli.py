"""Command line: ``hood gen-data | train | eval | sweep``.

Exit codes: 0 success, 2 config error, 3 data error, 4 non-finite loss.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import data, encoder, experiment
from .config import ConfigError, config_hash, load_config
from .experiment import SCORES
from .metrics import evaluate
from .numerics import ContractError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class DataError(Exception):
    pass


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _writable(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise ConfigError(f"output directory {parent} does not exist")


def _load_bundle(path) -> data.DatasetBundle:
    try:
        return data.load_bundle(path)
    except (OSError, ValueError, KeyError, ContractError) as exc:
        raise DataError(f"cannot load bundle {path}: {exc}") from exc


def _build_bundle(cfg) -> data.DatasetBundle:
    bundle = data.make_gaussian_bundle(cfg.bundle)
    if cfg.fake_ood["enabled"]:
        bundle = data.with_fake_outliers(bundle, cfg.distort, cfg.fake_ood["n_out"], cfg.fake_ood["seed"])
    return bundle


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, args.set)
    out = Path(args.out)
    _writable(out)
    bundle = _build_bundle(cfg)
    data.save_bundle(bundle, out, {"config_sha256": cfg.sha256})
    for split in ("train_in", "train_out", "test_in", "test_out"):
        print(f"{split:10s} {getattr(bundle, split).shape}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set)
    out = Path(args.out)
    log = Path(args.log) if args.log else out.with_suffix(".log.csv")
    _writable(out)
    _writable(log)
    bundle = _load_bundle(args.bundle)
    if bundle.dim != cfg.bundle.dim or bundle.n_classes != cfg.bundle.n_classes:
        raise DataError(
            f"bundle has dim={bundle.dim}, classes={bundle.n_classes}; "
            f"config expects dim={cfg.bundle.dim}, classes={cfg.bundle.n_classes}"
        )
    try:
        result = encoder.train(cfg.train, bundle)
    except ContractError as exc:
        raise DataError(str(exc)) from exc
    encoder.save_checkpoint(out, result.params, cfg.train, {"config_sha256": cfg.sha256})
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.sha256}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "total", "cls", "dep"])
    for e, lb in enumerate(result.history):
        w.writerow([e, repr(lb.total), repr(lb.cls), repr(lb.dep)])
    log.write_text(buf.getvalue())
    last = result.history[-1] if result.history else None
    print(f"trained {cfg.train.objective} for {cfg.train.epochs} epochs" + (f", final loss {last.total:.6g}" if last else ""))
    return EXIT_OK


def cmd_eval(args) -> int:
    out = Path(args.out)
    scores_out = Path(args.scores_out) if args.scores_out else out.with_suffix(".scores.csv")
    _writable(out)
    try:
        params, train_cfg, doc = encoder.load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError, ContractError) as exc:
        raise DataError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    bundle = _load_bundle(args.bundle)
    if len(bundle.test_in) == 0 or len(bundle.test_out) == 0:
        raise DataError("bundle has an empty test split")
    if bundle.dim != params.input_dim:
        raise DataError(f"bundle dim {bundle.dim} does not match checkpoint input dim {params.input_dim}")
    scores, is_in = experiment.score_features(params, bundle, args.score)
    rep = evaluate((scores, is_in), args.tpr)
    header = {"checkpoint_config_sha256": doc.get("config_sha256", config_hash(train_cfg.to_dict())), "score": args.score}
    stamp = f"# config_sha256={header['checkpoint_config_sha256']} score={args.score}\n"
    out.write_text(
        stamp + "score,fpr95,auroc,aupr,n_in,n_out\n"
        + f"{args.score},{rep.fpr95!r},{rep.auroc!r},{rep.aupr!r},{rep.n_in},{rep.n_out}\n"
    )
    lines = [stamp, "index,score,is_inlier\n"]
    lines += [f"{i},{s!r},{int(b)}\n" for i, (s, b) in enumerate(zip(scores.tolist(), is_in))]
    scores_out.write_text("".join(lines))
    print(f"{args.score}: fpr95={rep.fpr95:.4f} auroc={rep.auroc:.4f} aupr={rep.aupr:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = experiment.run_plan(cfg.plan)
    stamp = f"config_sha256={cfg.sha256}"
    (out_dir / "results.csv").write_text(experiment.table_to_csv(table, stamp))
    summary = experiment.sweep_summary(table)
    (out_dir / "summary.json").write_text(
        experiment.summary_to_json(summary, {"config_sha256": cfg.sha256, "config": cfg.resolved})
    )
    for s in summary:
        value = "" if s.sweep_value is None else f" {s.sweep_param}={s.sweep_value:g}"
        print(f"{s.method}{value}: auroc {s.auroc_mean:.4f}±{s.auroc_std:.4f} fpr95 {s.fpr95_mean:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hood", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="JSON config file (defaults used when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override, e.g. train.lambda=0.5")

    p = sub.add_parser("gen-data", help="generate and save a synthetic bundle")
    with_config(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train an encoder on a bundle")
    with_config(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="per-epoch loss CSV (default: <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a bundle's test split with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--score", required=True, choices=SCORES)
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--out", required=True, help="metrics CSV")
    p.add_argument("--scores-out", help="per-sample scores CSV (default: <out>.scores.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an experiment plan and write results + summary")
    with_config(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except DataError as exc:
        return _fail(EXIT_DATA, str(exc))
    except FloatingPointError as exc:
        return _fail(EXIT_NUMERIC, str(exc))
    except ContractError as exc:
        return _fail(EXIT_DATA, str(exc))


if __name__ == "__main__":
    sys.exit(main())
