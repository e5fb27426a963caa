"""``leafextract`` command line.

Exit codes: 0 success, 1 I/O or usage problem, 2 no leaf candidate,
3 any other pipeline failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import LeafExtractError, NoLeafCandidateError
from .evaluation import evaluate_corpus, pair_directory, precision_recall, synthetic_items
from .io import read_image, read_mask, write_gray, write_mask, write_overlay, write_polar_csv
from .pipeline import METHODS, REFINE_MODES, PipelineConfig, extract_leaf
from .synthetic import DIFFICULTIES

EXIT_OK = 0
EXIT_IO = 1
EXIT_NO_LEAF = 2
EXIT_STAGE = 3


def _err(msg: str) -> None:
    print(f"leafextract: {msg}", file=sys.stderr)


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = PipelineConfig.parse(Path(args.config).read_text(), cfg)
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k] = v
    if getattr(args, "method", None):
        overrides["method"] = args.method
    if getattr(args, "refine", None):
        overrides["refine"] = args.refine
    return cfg.with_overrides(overrides)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, help="segmenter (default watershed)")
    p.add_argument("--refine", choices=REFINE_MODES, help="refinement mode (default full)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def _dump(directory: Path, res) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    bg = res.background
    for name, mask in [("bg_index", bg.index_background), ("bg_color", bg.color_background),
                       ("bg_entropy", bg.entropy_background), ("bg_marker", bg.marker),
                       ("leaf_maxima", res.leaf.maxima), ("leaf_selected", res.leaf.selected),
                       ("leaf_marker", res.leaf.marker), ("initial", res.initial),
                       ("after_veins", res.after_veins), ("final", res.mask)]:
        write_mask(directory / f"{name}.png", mask)
    write_gray(directory / "leaf_filtered.png", res.leaf.filtered)
    regions = res.leaf.regions
    write_gray(directory / "leaf_regions.png", np.where(regions > 0, 40 + (regions * 37) % 215, 0))
    lines = []
    if res.veins is not None:
        d = res.veins
        lines.append(f"case={d.case}")
        lines.append(f"symmetry={d.symmetry:.4f}")
        if d.primary is not None:
            lines.append(f"primary rho={d.primary.rho:.2f} theta_deg={np.degrees(d.primary.theta):.2f} "
                         f"strength={d.primary.strength}")
        for ln in d.secondaries:
            lines.append(f"secondary rho={ln.rho:.2f} theta_deg={np.degrees(ln.theta):.2f} strength={ln.strength}")
        if d.additions is not None:
            write_mask(directory / "vein_additions.png", d.additions)
    (directory / "veins.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    if res.polar is not None:
        write_polar_csv(directory / "polar.csv", res.polar.rows())


def cmd_extract(args) -> int:
    try:
        cfg = _load_config(args)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    try:
        img = read_image(args.image)
    except OSError as exc:
        _err(f"cannot read {args.image}: {exc}")
        return EXIT_IO
    try:
        res = extract_leaf(img, cfg)
    except NoLeafCandidateError as exc:
        _err(str(exc))
        return EXIT_NO_LEAF
    except (LeafExtractError, ValueError) as exc:
        _err(f"extraction failed: {exc}")
        return EXIT_STAGE
    out_mask = args.out_mask or str(Path(args.image).with_suffix("")) + "_mask.png"
    try:
        write_mask(out_mask, res.mask)
        if args.out_overlay:
            write_overlay(args.out_overlay, res.image, res.mask)
        if args.dump_intermediate:
            _dump(Path(args.dump_intermediate), res)
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_IO
    print(f"mask={out_mask} leaf_px={int(res.mask.sum())}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        mask = read_mask(args.mask)
        truth = read_mask(args.truth)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    if mask.shape != truth.shape:
        _err(f"dimension mismatch: {mask.shape} vs {truth.shape}")
        return EXIT_IO
    p, r = precision_recall(mask, truth)
    print(f"precision={p:.4f} recall={r:.4f}")
    return EXIT_OK


def cmd_batch(args) -> int:
    try:
        cfg = _load_config(args)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    if args.synthetic is not None:
        items = synthetic_items(args.synthetic, args.seed, args.difficulty)
    else:
        if args.input is None or args.gt is None:
            _err("batch needs <dir> --gt <dir> or --synthetic N")
            return EXIT_IO
        try:
            items = pair_directory(args.input, args.gt)
        except OSError as exc:
            _err(str(exc))
            return EXIT_IO
    if not items:
        _err("no image/ground-truth pairs found")
        return EXIT_IO
    report = evaluate_corpus(items, cfg, args.workers)
    try:
        Path(args.report).write_text(report.to_text(timing=args.timing))
        if args.table:
            Path(args.table).write_text(report.to_table())
    except OSError as exc:
        _err(f"cannot write report: {exc}")
        return EXIT_IO
    print(report.aggregate_line())
    return EXIT_OK


def cmd_config(args) -> int:
    try:
        cfg = _load_config(args)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_IO
    sys.stdout.write(cfg.serialize())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leafextract", description="Extract the front-most leaf from a photo.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract the leaf mask of one image")
    p.add_argument("image")
    _add_config_args(p)
    p.add_argument("--out-mask", help="mask PNG (default <image>_mask.png)")
    p.add_argument("--out-overlay", help="boundary overlay PNG")
    p.add_argument("--dump-intermediate", metavar="DIR", help="write every intermediate mask here")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="precision and recall of a mask against ground truth")
    p.add_argument("mask")
    p.add_argument("truth")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("batch", help="score a corpus")
    p.add_argument("input", nargs="?", help="image directory")
    p.add_argument("--gt", help="ground-truth directory (paired by filename stem)")
    p.add_argument("--synthetic", type=int, metavar="N", help="use N generated scenes instead")
    p.add_argument("--seed", type=int, default=0, help="first synthetic seed")
    p.add_argument("--difficulty", choices=DIFFICULTIES, default="easy")
    p.add_argument("--report", required=True, help="key/value report path")
    p.add_argument("--table", help="also write a readable table here")
    p.add_argument("--timing", action="store_true", help="include wall time per image in the report")
    p.add_argument("--workers", type=int, help="worker processes (default $LEAFEXTRACT_WORKERS or 1)")
    _add_config_args(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("config", help="print the effective configuration")
    _add_config_args(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which would read as "no leaf"
        return EXIT_OK if exc.code in (0, None) else EXIT_IO
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
