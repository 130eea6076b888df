"""Command line interface.

Subcommands:
    idbench run       --config PATH
    idbench simulate  --spec PATH --out DIR
    idbench metrics   --results CSV --baseline CSV
    idbench degrade   --op OP --in DIR --out DIR [--sigma F] [--side N]
                      [--seed U] [--manifest LANDMARKS_CSV]
    idbench diff      RUN_A RUN_B [--tolerance F]

Exit codes: 0 success, 1 diff above tolerance, 2 validation error,
3 cell failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .degrade import (
    BlurSpec,
    DEGRADE_OPS,
    LowResSpec,
    SunglassesSpec,
    apply_op,
    load_landmarks,
    read_image,
    write_image,
)
from .embedstore import write_embeddings
from .errors import CellError, ConfigError, IdbenchError
from .experiment import diff_runs, load_config, run_experiment
from .manifest import save_manifest
from .metrics import build_report
from .search import read_results_csv
from .simulate import CohortSpec, generate_cohort


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    output = run_experiment(cfg)
    print(f"wrote {len(output.reports)} cells under {output.output_dir}")
    return 0


def _cmd_simulate(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise ConfigError(f"spec file not found: {spec_path}")
    spec = CohortSpec.from_json(spec_path.read_text(encoding="utf-8"))
    manifest, embeddings = generate_cohort(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, out / "manifest.csv")
    write_embeddings(embeddings.ids, embeddings.matrix, out / "embeddings.bin")
    print(
        f"wrote {len(manifest)} records / {len(embeddings)} embeddings "
        f"(dim {embeddings.dim}) under {out}"
    )
    return 0


def _cmd_metrics(args) -> int:
    baseline = read_results_csv(args.baseline)
    results = read_results_csv(args.results)
    report = build_report(baseline, results)
    print(report.to_json())
    return 0


def _style_seed(base_seed: int, image_id: str) -> int:
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    return (base_seed ^ int.from_bytes(digest[:8], "little")) & (2**64 - 1)


def _cmd_degrade(args) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    needs_landmarks = "sunglasses" in args.op
    landmarks = {}
    if args.manifest:
        landmarks = load_landmarks(args.manifest)
    elif needs_landmarks:
        raise ConfigError(f"op {args.op!r} needs --manifest with landmarks")
    blur = BlurSpec(args.sigma) if args.sigma is not None else None
    lowres = LowResSpec(args.side) if args.side is not None else None
    if "blur" in args.op and blur is None:
        raise ConfigError(f"op {args.op!r} needs --sigma")
    if "lowres" in args.op and lowres is None:
        raise ConfigError(f"op {args.op!r} needs --side")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.png"))
    if not paths:
        raise ConfigError(f"no .png files under {in_dir}")
    for path in paths:
        image_id = path.stem
        if needs_landmarks and image_id not in landmarks:
            raise ConfigError(f"no landmarks for image {image_id!r}")
        face = read_image(path, landmarks.get(image_id))
        sunglasses = SunglassesSpec(
            style_seed=_style_seed(args.seed, image_id)
        )
        result = apply_op(
            face, args.op, blur=blur, lowres=lowres, sunglasses=sunglasses
        )
        write_image(result, out_dir / path.name)
    print(f"degraded {len(paths)} images -> {out_dir}")
    return 0


def _cmd_diff(args) -> int:
    deltas = diff_runs(args.run_a, args.run_b)
    worst = 0.0
    for key in sorted(deltas):
        cell = "/".join(key)
        for metric, delta in deltas[key].items():
            if abs(delta) > args.tolerance:
                print(f"{cell}: {metric} delta {delta:+.6g}")
            worst = max(worst, abs(delta))
    if worst > args.tolerance:
        print(f"max |delta| {worst:.6g} exceeds tolerance {args.tolerance}")
        return 1
    print(f"runs match within tolerance {args.tolerance}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idbench",
        description="One-to-many identification benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--spec", required=True, help="CohortSpec JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("metrics", help="metrics of a results CSV vs baseline")
    p.add_argument("--results", required=True)
    p.add_argument("--baseline", required=True)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("degrade", help="apply image degradations to a directory")
    p.add_argument("--op", required=True, choices=DEGRADE_OPS)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None, help="landmark sidecar CSV")
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("diff", help="compare two finished runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--tolerance", type=float, default=0.0)
    p.set_defaults(func=_cmd_diff)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (IdbenchError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
