"""Command-line entry point.

Exit codes: 0 success, 1 check/metric failure, 2 usage error (argparse).
Every command is deterministic given --seed; the verify report contains no
timings so two runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import backend, bench, verify
from .detection import DetectionModel, evaluate, generate_synthetic, train
from .io import (
    RunConfig,
    load_config,
    load_model_state,
    load_weights,
    model_state,
    save_weights,
    write_pgm,
)
from .tensor import ModalityPair, Tensor, no_grad

STAGES = ("backbone", "lfem", "cgmm", "mfda", "fused")

ABLATION_VARIANTS = (
    "baseline_add",
    "fdfam",
    "lfem_fdfam",
    "cgmm_fdfam",
    "full",
    "msda_full",
    "mlp_full",
)


def _load_run_config(path: str | None) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _apply_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is not None:
        cfg.train.seed = seed
    return cfg


def cmd_verify(args) -> int:
    results = verify.run_suite(args.suite)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(r.line())
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def _eval_dataset(cfg: RunConfig):
    # held-out split: eval seeds are offset from the training seed
    return generate_synthetic(
        cfg.data.eval_count,
        cfg.train.seed + 500_009,
        cfg.data.mix,
        cfg.data.image_size,
        cfg.data.num_classes,
        cfg.data.noise_sigma,
    )


def cmd_train(args) -> int:
    cfg = _apply_seed(_load_run_config(args.config), args.seed)
    out = Path(args.out)
    log_path = out.with_suffix(out.suffix + ".log")
    result = train(
        args.variant,
        cfg.train,
        cfg.data,
        cfg.model,
        max_steps=args.max_steps,
        log_path=log_path,
    )
    save_weights(out, model_state(result.model))
    ma = result.moving_average(100)
    print(f"trained variant={args.variant} steps={len(result.history)} "
          f"loss_ma100={ma:.6f}")
    print(f"weights -> {out}")
    print(f"log -> {log_path}")
    return 0


def _rebuild_model(cfg: RunConfig, variant: str, weights_path) -> DetectionModel:
    model = DetectionModel(
        variant, cfg.data.num_classes, cfg.model,
        rng=np.random.default_rng((cfg.train.seed, 101)),
    )
    load_model_state(model, load_weights(weights_path))
    return model


def cmd_eval(args) -> int:
    cfg = _apply_seed(_load_run_config(args.config), args.seed)
    model = _rebuild_model(cfg, args.variant, args.weights)
    res = evaluate(model, _eval_dataset(cfg))
    print(f"recall@0.5 {res.recall:.4f}")
    print(f"mean_iou {res.mean_iou:.4f}")
    for vis, rec in res.per_visibility.items():
        print(f"recall[{vis}] {rec:.4f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _apply_seed(_load_run_config(args.config), args.seed)
    eval_set = _eval_dataset(cfg)
    print("variant recall@0.5 loss_ma100")
    for variant in ABLATION_VARIANTS:
        result = train(variant, cfg.train, cfg.data, cfg.model, max_steps=args.max_steps)
        res = evaluate(result.model, eval_set)
        print(f"{variant} {res.recall:.4f} {result.moving_average(100):.6f}")
    return 0


def cmd_bench_attention(args) -> int:
    cfg = _apply_seed(_load_run_config(args.config), args.seed)
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else cfg.bench.sizes
    rows, slopes = bench.bench_attention(
        sizes, cfg.bench.channels, cfg.bench.repeats, cfg.train.seed
    )
    csv = bench.attention_csv(rows)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"csv -> {args.out}")
    else:
        sys.stdout.write(csv)
    for name, slope in sorted(slopes.items()):
        print(f"slope[{name}] {slope:.4f}")
    print(f"slope_gap {slopes['msda'] - slopes['mfda']:.4f}")
    return 0


def cmd_bench_kernels(args) -> int:
    rows = bench.bench_kernels(args.repeats, args.seed or 0)
    csv = bench.kernels_csv(rows)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"csv -> {args.out}")
    else:
        sys.stdout.write(csv)
    return 0


def cmd_dump_features(args) -> int:
    cfg = _apply_seed(_load_run_config(args.config), args.seed)
    model = _rebuild_model(cfg, args.variant, args.weights)
    model.eval()
    samples = _eval_dataset(cfg)
    if not 0 <= args.index < len(samples):
        raise SystemExit(f"sample index {args.index} out of range")
    sample = samples[args.index]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with no_grad():
        rgb = Tensor(sample.rgb[None])
        ir = Tensor(sample.ir[None])
        _, stages = model.fuse_features(rgb, ir, return_stages=True)
    if args.stage not in stages:
        raise SystemExit(
            f"stage {args.stage!r} not produced by variant {args.variant!r}"
        )
    value = stages[args.stage]
    written = []
    if isinstance(value, ModalityPair):
        maps = {"rgb": value.rgb.data, "ir": value.ir.data}
    else:
        maps = {"rgbir": value.data}
    for modality, arr in maps.items():
        path = out_dir / f"{args.stage}_{modality}_{args.index}.pgm"
        write_pgm(path, arr[0].mean(axis=0))
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fredft", description=__doc__)
    p.add_argument("--config", help="RunConfig JSON path")
    p.add_argument("--seed", type=int, help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", choices=(*verify.SUITES, "all"), default="all")
    v.set_defaults(fn=cmd_verify)

    t = sub.add_parser("train", help="train a model variant")
    t.add_argument("--variant", default="full")
    t.add_argument("--out", required=True, help="weight file path")
    t.add_argument("--max-steps", type=int, default=None)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate saved weights")
    e.add_argument("--weights", required=True)
    e.add_argument("--variant", default="full")
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("ablate", help="train/evaluate the ablation table")
    a.add_argument("--max-steps", type=int, default=None)
    a.set_defaults(fn=cmd_ablate)

    ba = sub.add_parser("bench-attention", help="attention scaling benchmark")
    ba.add_argument("--sizes", help="comma-separated H=W values")
    ba.add_argument("--out", help="CSV output path")
    ba.set_defaults(fn=cmd_bench_attention)

    bk = sub.add_parser("bench-kernels", help="numba vs numpy kernel benchmark")
    bk.add_argument("--repeats", type=int, default=5)
    bk.add_argument("--out", help="CSV output path")
    bk.set_defaults(fn=cmd_bench_kernels)

    d = sub.add_parser("dump-features", help="write PGM feature-map dumps")
    d.add_argument("--weights", required=True)
    d.add_argument("--variant", default="full")
    d.add_argument("--index", type=int, default=0)
    d.add_argument("--stage", choices=STAGES, required=True)
    d.add_argument("--out", required=True, help="output directory")
    d.set_defaults(fn=cmd_dump_features)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
