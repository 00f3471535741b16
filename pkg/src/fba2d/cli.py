"""Command-line harness: dataset generation, surrogate training, attack, bench.

Subcommands:
  gen-dataset       write a synthetic real/fake PNG dataset + manifest
  train-surrogate   fit the logistic DCT surrogate and persist it (FBAS file)
  attack            run the boundary search over a manifest, write traces
  bench             aggregate a run's report into CSV/JSON summaries

Configuration comes from an optional JSON file (--config) with individual
flags taking precedence.  The FBA2D_LOG environment variable sets the log
level (DEBUG, INFO, WARNING, ...).  Exit codes: 0 on completion (per-sample
attack failures are recorded in the report, not signalled), 2 on unusable
configuration or input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .attack import AttackConfig, AttackTrace, run_attack
from .dataset import generate_dataset, load_manifest, read_image
from .metrics import (
    DEFAULT_THRESHOLDS,
    BenchmarkSummary,
    SampleMetrics,
    ThresholdRow,
    aggregate,
    compute_sample_metrics,
)
from .oracles import make_oracle
from .pngio import write_png
from .soup import (
    DEFAULT_POOL_SIZE,
    InitializationError,
    SoupConfig,
    build_soup_init,
    select_init,
)
from .spectral import build_mask
from .surrogate import DctLogisticDetector, load_surrogate

log = logging.getLogger("fba2d")

#: Class-conditional mask policy: (low_fraction, high_fraction) per class.
#: Real images respond best to a mixed low+high band, generated ones to a
#: wider low band.
DEFAULT_MASK_POLICY = {"real": [0.10, 0.10], "fake": [0.20, 0.0]}


def default_config():
    return {
        "oracle": "freq-energy",
        "dataset": None,
        "out": None,
        "seed": 0,
        "queries": 500,
        "subspace_iterations": 2,
        "alpha_step": 0.01,
        "alpha_shrink": 0.05,
        "alpha_bound": 0.1,
        "beta_floor": math.pi / 16,
        "mask_policy": {key: list(value) for key, value in DEFAULT_MASK_POLICY.items()},
        "init": None,
        "surrogate": None,
        "surrogate_mask": [0.0, 0.01],
        "soup": {},
        "pool_size": DEFAULT_POOL_SIZE,
        "workers": 1,
        "rmse_thresholds": list(DEFAULT_THRESHOLDS),
    }


class ConfigError(ValueError):
    pass


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    config = default_config()
    for key, value in data.items():
        if key not in config:
            raise ConfigError(f"unknown config key {key!r}")
        config[key] = value
    return config


def _parse_thresholds(text):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad rmse thresholds {text!r}: {exc}") from exc
    if not values or any(not 0 < v <= 1 for v in values):
        raise ConfigError(f"rmse thresholds must lie in (0, 1], got {text!r}")
    return values


def _parse_fraction_pair(text, name):
    parts = [p for p in str(text).split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigError(f"{name} expects 'low,high', got {text!r}")
    return [float(parts[0]), float(parts[1])]


def _parse_size(text):
    parts = str(text).lower().split("x")
    if len(parts) not in (2, 3):
        raise ConfigError(f"size must look like HxW or HxWxC, got {text!r}")
    dims = [int(p) for p in parts]
    if len(dims) == 2:
        dims.append(1)
    if any(d < 1 for d in dims):
        raise ConfigError(f"size dimensions must be positive, got {text!r}")
    return tuple(dims)


# --------------------------------------------------------------------- attack


def _mask_fractions_for_label(config, label):
    policy = config["mask_policy"]
    key = "real" if label == 0 else "fake"
    if key not in policy:
        raise ConfigError(f"mask_policy is missing the {key!r} entry")
    pair = policy[key]
    if len(pair) != 2:
        raise ConfigError(f"mask_policy[{key!r}] must be [low, high], got {pair!r}")
    return float(pair[0]), float(pair[1])


def _initialize_sample(x, label, pool_entries, oracle, surrogate, init_mode, soup_cfg):
    """Pick the starting image; returns (init, mode, queries_spent)."""
    start = oracle.ledger.total_queries
    pool = (read_image(entry["path"]) for entry in pool_entries)
    try:
        if init_mode == "soup":
            soup = build_soup_init(surrogate, x, label, soup_cfg)
            init, mode = select_init(x, label, soup, pool, oracle)
        else:
            init, mode = None, "targeted"
            for image in pool:
                if oracle.query(image) != label:
                    init = image
                    break
            if init is None:
                raise InitializationError(
                    f"initialization failed: none of the {len(pool_entries)} pool "
                    "images is adversarial",
                    queries_spent=oracle.ledger.total_queries - start,
                )
    except InitializationError as exc:
        exc.queries_spent = oracle.ledger.total_queries - start
        raise
    return init, mode, oracle.ledger.total_queries - start


def _failed_entry(sample_id, entry, thresholds, queries, message, init_mode=None):
    return {
        "id": sample_id,
        "path": os.path.basename(entry["path"]),
        "label": entry["label"],
        "status": "failed",
        "error": message,
        "init_mode": init_mode,
        "init_queries": queries,
        "attack_queries": 0,
        "queries": queries,
        "rmse": None,
        "l2": None,
        "psnr": None,
        "ssim": None,
        "success_at": {str(t): False for t in thresholds},
        "queries_to": {str(t): None for t in thresholds},
        "adv_path": None,
        "trace_path": None,
    }


def _attack_sample(index, entry, manifest, config, out_dir, surrogate, init_mode, soup_cfg):
    sample_id = f"{index:04d}"
    thresholds = config["rmse_thresholds"]
    x = read_image(entry["path"])
    label = entry["label"]
    oracle = make_oracle(config["oracle"], image_shape=x.shape)
    pool_entries = [e for e in manifest if e["label"] != label][: int(config["pool_size"])]

    try:
        init, mode, init_queries = _initialize_sample(
            x, label, pool_entries, oracle, surrogate, init_mode, soup_cfg
        )
    except InitializationError as exc:
        log.info("sample %s: initialization failed (%s)", sample_id, exc)
        return _failed_entry(sample_id, entry, thresholds, exc.queries_spent, str(exc))

    remaining = int(config["queries"]) - init_queries
    if remaining < 1:
        return _failed_entry(
            sample_id,
            entry,
            thresholds,
            init_queries,
            "query budget exhausted during initialization",
            init_mode=mode,
        )

    low, high = _mask_fractions_for_label(config, label)
    attack_cfg = AttackConfig(
        max_queries=remaining,
        subspace_iterations=int(config["subspace_iterations"]),
        alpha_step=float(config["alpha_step"]),
        alpha_shrink=float(config["alpha_shrink"]),
        alpha_bound=float(config["alpha_bound"]),
        beta_floor=float(config["beta_floor"]),
        mask=build_mask(x.shape, low, high),
    )
    rng = np.random.default_rng([int(config["seed"]), index])
    adversarial, trace = run_attack(x, label, init, oracle, attack_cfg, rng=rng)
    total_queries = init_queries + trace.total_queries

    adv_name = os.path.join("adv", f"{sample_id}.png")
    trace_name = os.path.join("traces", f"{sample_id}.jsonl")
    write_png(os.path.join(out_dir, adv_name), adversarial)
    trace.write_jsonl(os.path.join(out_dir, trace_name))

    sample_metrics = compute_sample_metrics(
        sample_id,
        x,
        adversarial,
        total_queries,
        adversarial=True,
        thresholds=thresholds,
        trace=trace,
        query_offset=init_queries,
    )
    log.info(
        "sample %s: label=%d init=%s queries=%d rmse=%.5f",
        sample_id,
        label,
        mode,
        total_queries,
        sample_metrics.rmse,
    )
    result = {
        "id": sample_id,
        "path": os.path.basename(entry["path"]),
        "label": label,
        "status": "ok",
        "error": None,
        "init_mode": mode,
        "init_queries": init_queries,
        "attack_queries": trace.total_queries,
        "adv_path": adv_name,
        "trace_path": trace_name,
    }
    result.update(sample_metrics.to_json_dict())
    del result["sample_id"]
    result["queries"] = total_queries
    return result


def cmd_attack(args):
    if args.config:
        config = load_config_file(args.config)
    else:
        config = default_config()
    for key in ("dataset", "out", "oracle", "surrogate", "init"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            config[key] = value
    if args.seed is not None:
        config["seed"] = args.seed
    if args.queries is not None:
        config["queries"] = args.queries
    if args.workers is not None:
        config["workers"] = args.workers
    if args.pool_size is not None:
        config["pool_size"] = args.pool_size
    if args.rmse_thresholds is not None:
        config["rmse_thresholds"] = _parse_thresholds(args.rmse_thresholds)
    if args.mask_real is not None:
        config["mask_policy"]["real"] = _parse_fraction_pair(args.mask_real, "--mask-real")
    if args.mask_fake is not None:
        config["mask_policy"]["fake"] = _parse_fraction_pair(args.mask_fake, "--mask-fake")

    if not config["dataset"]:
        raise ConfigError("no dataset manifest configured (use --dataset or the config file)")
    if not config["out"]:
        raise ConfigError("no output directory configured (use --out or the config file)")
    if int(config["queries"]) < 1:
        raise ConfigError(f"queries must be >= 1, got {config['queries']}")
    thresholds = [float(t) for t in config["rmse_thresholds"]]
    config["rmse_thresholds"] = thresholds

    surrogate = None
    if config["surrogate"]:
        low, high = (float(v) for v in config["surrogate_mask"])
        try:
            surrogate = load_surrogate(config["surrogate"], low_fraction=low, high_fraction=high)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load surrogate {config['surrogate']}: {exc}") from exc
    init_mode = config["init"] or ("soup" if surrogate is not None else "targeted")
    if init_mode not in ("soup", "targeted"):
        raise ConfigError(f"init must be 'soup' or 'targeted', got {init_mode!r}")
    if init_mode == "soup" and surrogate is None:
        raise ConfigError("init mode 'soup' needs a surrogate weights file")
    soup_cfg = SoupConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in config["soup"].items()})

    manifest = load_manifest(config["dataset"])
    out_dir = config["out"]
    os.makedirs(os.path.join(out_dir, "adv"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)

    workers = max(1, int(config["workers"]))
    jobs = list(enumerate(manifest))
    results = []
    if jobs:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(
                    _attack_sample,
                    index,
                    entry,
                    manifest,
                    config,
                    out_dir,
                    surrogate,
                    init_mode,
                    soup_cfg,
                )
                for index, entry in jobs
            ]
            results = [future.result() for future in futures]
    results.sort(key=lambda item: item["id"])

    report = {
        "config": {key: config[key] for key in sorted(config)},
        "samples": results,
    }
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    ok = sum(1 for r in results if r["status"] == "ok")
    print(f"attacked {len(results)} samples ({ok} ok, {len(results) - ok} failed)")
    print(f"report: {report_path}")
    return 0


# ---------------------------------------------------------------------- bench


def _metrics_from_entry(entry, thresholds):
    success_at = {}
    queries_to = {}
    raw_success = entry.get("success_at", {})
    raw_queries = entry.get("queries_to", {})
    for threshold in thresholds:
        key = str(threshold)
        success_at[threshold] = bool(raw_success.get(key, False))
        value = raw_queries.get(key)
        queries_to[threshold] = None if value is None else int(value)
    return SampleMetrics(
        sample_id=entry["id"],
        rmse=math.nan if entry.get("rmse") is None else float(entry["rmse"]),
        l2=math.nan if entry.get("l2") is None else float(entry["l2"]),
        psnr=math.inf if entry.get("psnr") is None else float(entry["psnr"]),
        ssim=math.nan if entry.get("ssim") is None else float(entry["ssim"]),
        queries=int(entry.get("queries", 0)),
        success_at=success_at,
        queries_to=queries_to,
    )


def cmd_bench(args):
    report_path = args.report
    if os.path.isdir(report_path):
        run_dir = report_path
        report_path = os.path.join(report_path, "report.json")
    else:
        run_dir = os.path.dirname(os.path.abspath(report_path))
    try:
        with open(report_path, "r", encoding="utf-8") as handle:
            report = json.load(handle)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {report_path}: {exc}") from exc
    if not isinstance(report, dict) or "samples" not in report:
        raise ConfigError(f"{report_path} does not look like an attack report")

    if args.rmse_thresholds is not None:
        thresholds = _parse_thresholds(args.rmse_thresholds)
    else:
        thresholds = [float(t) for t in report.get("config", {}).get(
            "rmse_thresholds", DEFAULT_THRESHOLDS
        )]
    samples = [_metrics_from_entry(entry, thresholds) for entry in report["samples"]]
    if samples:
        summary = aggregate(samples, thresholds)
    else:
        # A run over an empty dataset still gets a well-formed summary.
        summary = BenchmarkSummary(
            n_samples=0,
            rows=[
                ThresholdRow(
                    threshold=float(t),
                    asr=0.0,
                    mean_queries=None,
                    median_queries=None,
                    mean_l2=None,
                )
                for t in thresholds
            ],
        )

    out_dir = args.out or run_dir
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "summary.csv")
    json_path = os.path.join(out_dir, "summary.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        handle.write(summary.to_csv_text())
    with open(json_path, "w", encoding="utf-8") as handle:
        handle.write(summary.to_json_text())

    if args.curves:
        curves_path = os.path.join(out_dir, "curves.csv")
        with open(curves_path, "w", encoding="utf-8", newline="") as handle:
            handle.write("sample_id,step,queries,delta_l2,rmse,alpha\n")
            for entry in report["samples"]:
                trace_rel = entry.get("trace_path")
                if not trace_rel:
                    continue
                trace_file = os.path.join(run_dir, trace_rel)
                with open(trace_file, "r", encoding="utf-8") as trace_handle:
                    trace = AttackTrace.parse_jsonl(trace_handle.read())
                for record in trace.records:
                    handle.write(
                        f"{entry['id']},{record.step},{record.queries},"
                        f"{record.delta_l2!r},{record.rmse!r},{record.alpha!r}\n"
                    )
        print(f"curves: {curves_path}")

    print(summary.to_csv_text(), end="")
    print(f"summary: {csv_path} {json_path}")
    return 0


# ------------------------------------------------------------------- datasets


def cmd_gen_dataset(args):
    size = _parse_size(args.size)
    manifest = generate_dataset(args.out, args.n_per_class, size=size, seed=args.seed)
    print(f"wrote {len(manifest)} images to {args.out}")
    print(f"manifest: {os.path.join(args.out, 'manifest.json')}")
    return 0


def cmd_train_surrogate(args):
    entries = load_manifest(args.dataset)
    if not entries:
        raise ConfigError("cannot train on an empty dataset")
    images = np.stack([read_image(entry["path"]) for entry in entries])
    labels = np.array([entry["label"] for entry in entries])
    model = DctLogisticDetector(
        low_fraction=args.low_fraction, high_fraction=args.high_fraction
    )
    model.fit(images, labels)
    accuracy = model.train_accuracy_
    print(f"train accuracy: {accuracy:.4f} ({len(entries)} samples)")
    if accuracy < 0.60:
        print("surrogate unusable: train accuracy below 0.60", file=sys.stderr)
        return 2
    model.save(args.out)
    print(f"surrogate: {args.out}")
    return 0


# ----------------------------------------------------------------------- main


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fba2d",
        description="Frequency-domain boundary attack harness for real-vs-fake detectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-dataset", help="generate a synthetic PNG dataset")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--n-per-class", type=int, required=True)
    gen.add_argument("--size", default="32x32x1", help="image size HxWxC (default 32x32x1)")
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_gen_dataset)

    train = sub.add_parser("train-surrogate", help="fit and persist the logistic DCT surrogate")
    train.add_argument("--dataset", required=True, help="manifest.json of the training set")
    train.add_argument("--out", required=True, help="output weights file (.fbas)")
    train.add_argument("--low-fraction", type=float, default=0.0)
    train.add_argument("--high-fraction", type=float, default=0.01)
    train.set_defaults(func=cmd_train_surrogate)

    attack = sub.add_parser("attack", help="attack every sample in a manifest")
    attack.add_argument("--config", help="JSON run configuration")
    attack.add_argument("--dataset", help="manifest.json of the samples to attack")
    attack.add_argument("--out", help="output directory for the run")
    attack.add_argument("--oracle", help="oracle spec (freq-energy[:k=v], halfspace[:k=v], or URL)")
    attack.add_argument("--seed", type=int, default=None)
    attack.add_argument("--queries", type=int, default=None, help="query budget per sample")
    attack.add_argument("--rmse-thresholds", default=None, help="comma list, e.g. 0.1,0.05,0.01")
    attack.add_argument("--init", choices=("soup", "targeted"), default=None)
    attack.add_argument("--surrogate", default=None, help="surrogate weights file for soup init")
    attack.add_argument("--pool-size", type=int, default=None)
    attack.add_argument("--workers", type=int, default=None)
    attack.add_argument("--mask-real", default=None, help="low,high fractions for real samples")
    attack.add_argument("--mask-fake", default=None, help="low,high fractions for fake samples")
    attack.set_defaults(func=cmd_attack)

    bench = sub.add_parser("bench", help="aggregate an attack run into summaries")
    bench.add_argument("report", help="run directory or report.json path")
    bench.add_argument("--out", default=None, help="directory for summary files")
    bench.add_argument("--rmse-thresholds", default=None, help="comma list, e.g. 0.1,0.05,0.01")
    bench.add_argument("--curves", action="store_true", help="also write per-step curves.csv")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    level_name = os.environ.get("FBA2D_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
