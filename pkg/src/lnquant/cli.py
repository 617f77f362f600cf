"""Command-line interface.

Subcommands: phantom, preprocess, strategy, measure, postprocess, stats,
eval, compare. Reports are written as delimited tables (or JSON lines with
--format json-lines) with matplotlib figures rendered alongside. Exit codes:
0 success, 2 input error, 1 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import partial
from pathlib import Path

from .config import PipelineConfig
from .fileio import VolumeFormatError, read_volume, write_volume
from .measure import (
    bin_diameters,
    classify_enlarged,
    measure_components,
    postprocess_filter,
)
from .metrics import cohort_report, pool_overlap_curves, wilcoxon_signed_rank
from .morphology import connected_components
from .phantom import PhantomSpec, generate_phantom
from .pipeline import (
    CASE_ANATOMY,
    CASE_GT,
    CASE_IMAGE,
    CASE_WEAK,
    STRATEGIES,
    InputError,
    StageError,
    collect_case_volumes,
    evaluate_case,
    preprocess_case,
    run_strategy,
)
from .report import (
    FORMAT_TABLE,
    REPORT_FORMATS,
    read_rows,
    render_histogram_figure,
    render_overlap_figure,
    write_rows,
)

_CASE_COLUMNS = ["case_id", "dice", "assd_mm", "assd_fallback"]
_CATALOG_COLUMNS = [
    "case_id", "component_id", "voxel_count", "volume_mm3",
    "shortest_diameter_mm", "slice_index", "long_axis_mm", "enlarged",
    "bbox_lo_z", "bbox_lo_y", "bbox_lo_x", "bbox_hi_z", "bbox_hi_y", "bbox_hi_x",
]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, default=None, help="JSON config file")
    g.add_argument("--target-spacing", nargs=3, type=float, metavar=("SZ", "SY", "SX"),
                   dest="target_spacing")
    g.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"), dest="intensity_window")
    g.add_argument("--coating-margin", type=int, dest="coating_margin_voxels")
    g.add_argument("--connectivity", type=int, choices=(6, 18, 26))
    g.add_argument("--filter-threshold", type=float, dest="filter_min_diameter_mm")
    g.add_argument("--bin-width", type=float, dest="bin_width_mm")
    g.add_argument("--enlargement-threshold", type=float, dest="enlargement_threshold_mm")
    g.add_argument("--lung-labels", nargs="+", type=int, dest="lung_labels")
    g.add_argument("--crop-margin", type=float, dest="crop_margin_mm")


_CONFIG_KEYS = (
    "target_spacing", "intensity_window", "coating_margin_voxels", "connectivity",
    "filter_min_diameter_mm", "bin_width_mm", "enlargement_threshold_mm",
    "lung_labels", "crop_margin_mm",
)


def _config_from_args(args) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    try:
        return PipelineConfig.load(getattr(args, "config", None), overrides)
    except (json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"bad configuration: {exc}") from exc


def _add_common(p: argparse.ArgumentParser, workers: bool = False) -> None:
    p.add_argument("--format", choices=REPORT_FORMATS, default=FORMAT_TABLE)
    if workers:
        p.add_argument("--workers", type=int, default=1)


def _case_dirs(args) -> list[Path]:
    if args.case is not None:
        if not args.case.is_dir():
            raise InputError(f"not a case directory: {args.case}")
        return [args.case]
    root = args.dataset
    if not root.is_dir():
        raise InputError(f"not a dataset directory: {root}")
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise InputError(f"no case directories under {root}")
    return dirs


def _map_cases(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- subcommand handlers ---------------------------------------------------------


def _phantom_one(index: int, spec: PhantomSpec, out: Path):
    case_spec = spec.with_seed(spec.seed + index)
    case_dir = out / f"case_{index:03d}"
    case_dir.mkdir(exist_ok=True)
    case = generate_phantom(case_spec)
    write_volume(case.image, case_dir / CASE_IMAGE)
    write_volume(case.gt, case_dir / CASE_GT)
    write_volume(case.weak, case_dir / CASE_WEAK)
    write_volume(case.anatomy, case_dir / CASE_ANATOMY)
    case_spec.to_json_file(case_dir / "phantom_spec.json")


def cmd_phantom(args) -> int:
    _config_from_args(args)  # validates --config even though phantom has no knobs
    if not args.spec.exists():
        raise InputError(f"phantom spec not found: {args.spec}")
    try:
        spec = PhantomSpec.from_json_file(args.spec)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"bad phantom spec: {exc}") from exc
    if args.cases < 1:
        raise InputError("--cases must be >= 1")
    args.out.mkdir(parents=True, exist_ok=True)
    _map_cases(partial(_phantom_one, spec=spec, out=args.out), range(args.cases), args.workers)
    print(f"wrote {args.cases} phantom case(s) under {args.out}")
    return 0


def _preprocess_one(case_dir: Path, cfg: PipelineConfig, fmt: str):
    rows = preprocess_case(case_dir, cfg)
    table = write_rows(
        case_dir / "derived" / "preprocess_stats",
        ["stage", "total_voxels", "labeled_voxels", "ratio_percent"],
        [(r.stage, r.total_voxels, r.labeled_voxels, r.ratio_percent) for r in rows],
        fmt,
    )
    return case_dir.name, rows, table


def cmd_preprocess(args) -> int:
    cfg = _config_from_args(args)
    dirs = _case_dirs(args)
    results = _map_cases(partial(_preprocess_one, cfg=cfg, fmt=args.format), dirs, args.workers)
    for case_id, rows, _ in sorted(results):
        for r in rows:
            print(f"{case_id}\t{r.stage}\tlabeled {r.labeled_voxels}/{r.total_voxels}"
                  f"\t{r.ratio_percent:.4f}%")
    return 0


def _strategy_one(case_dir: Path, strategy: str, cfg: PipelineConfig):
    out_dir, row = run_strategy(case_dir, strategy, cfg)
    return case_dir.name, out_dir, row


def cmd_strategy(args) -> int:
    cfg = _config_from_args(args)
    dirs = _case_dirs(args)
    results = _map_cases(partial(_strategy_one, strategy=args.strategy, cfg=cfg), dirs, args.workers)
    for case_id, out_dir, row in sorted(results):
        print(f"{case_id}\t{args.strategy}\tlabeled {row.labeled_voxels}/{row.total_voxels}"
              f"\t{row.ratio_percent:.4f}%\t{out_dir}")
    return 0


def _catalog_rows(case_id: str, grid, cfg: PipelineConfig) -> list[tuple]:
    cs = connected_components(grid, cfg.structuring_element())
    measurements = measure_components(cs)
    rule = cfg.enlargement_rule()
    rows = []
    for comp, m in zip(cs, measurements):
        lo = comp.voxels.min(axis=0)
        hi = comp.voxels.max(axis=0)
        rows.append((
            case_id, comp.id, len(comp.voxels), comp.volume_mm3,
            m.shortest_diameter_mm, m.slice_index, m.long_axis_mm,
            classify_enlarged(m, rule),
            int(lo[0]), int(lo[1]), int(lo[2]), int(hi[0]), int(hi[1]), int(hi[2]),
        ))
    return rows


def cmd_measure(args) -> int:
    cfg = _config_from_args(args)
    if not args.volume.exists():
        raise InputError(f"volume not found: {args.volume}")
    grid = read_volume(args.volume)
    stem = args.volume.name.split(".")[0]
    rows = _catalog_rows(stem, grid, cfg)
    out_base = args.out if args.out else args.volume.parent / f"{stem}_components"
    path = write_rows(out_base, _CATALOG_COLUMNS, rows, args.format)
    print(f"wrote {path} ({len(rows)} component(s))")
    return 0


def cmd_postprocess(args) -> int:
    cfg = _config_from_args(args)
    if not args.input.exists():
        raise InputError(f"volume not found: {args.input}")
    grid = read_volume(args.input)
    filtered = postprocess_filter(grid, cfg.filter_min_diameter_mm, cfg.structuring_element())
    write_volume(filtered, args.output)
    removed = int(grid.data.sum()) - int(filtered.data.sum())
    print(f"wrote {args.output} (erased {removed} voxel(s) below "
          f"{cfg.filter_min_diameter_mm} mm)")
    return 0


def _stats_one(item, cfg: PipelineConfig):
    case_id, path = item
    return case_id, _catalog_rows(case_id, read_volume(path), cfg)


def cmd_stats(args) -> int:
    cfg = _config_from_args(args)
    cases = collect_case_volumes(args.dataset, args.gt_name)
    args.out.mkdir(parents=True, exist_ok=True)
    results = _map_cases(partial(_stats_one, cfg=cfg), sorted(cases.items()), args.workers)
    catalog: list[tuple] = []
    for _, rows in sorted(results):
        catalog.extend(rows)
    n_enlarged = sum(1 for row in catalog if row[7])
    diameters = [row[4] for row in catalog]

    summary = write_rows(
        args.out / "dataset_stats",
        ["n_volumes", "n_components", "n_enlarged"],
        [(len(cases), len(catalog), n_enlarged)],
        args.format,
    )
    write_rows(args.out / "component_catalog", _CATALOG_COLUMNS, catalog, args.format)
    hist = bin_diameters(diameters, cfg.bin_width_mm)
    write_rows(
        args.out / "diameter_histogram",
        ["bin_lo_mm", "bin_hi_mm", "count"],
        [(lo, lo + cfg.bin_width_mm, c) for lo, c in hist],
        args.format,
    )
    render_histogram_figure(hist, cfg.bin_width_mm, args.out / "diameter_histogram.png")
    print(f"wrote {summary}: {len(cases)} volume(s), {len(catalog)} component(s), "
          f"{n_enlarged} enlarged")
    return 0


def _eval_one(item, cfg: PipelineConfig, postprocess_first: bool):
    case_id, pred_path, gt_path = item
    return evaluate_case(case_id, pred_path, gt_path, cfg, postprocess_first)


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    preds = collect_case_volumes(args.pred, args.pred_name)
    gts = collect_case_volumes(args.gt, args.gt_name)
    missing = sorted(set(preds) - set(gts))
    if missing:
        raise InputError(f"no ground truth for case(s): {', '.join(missing)}")
    items = [(cid, preds[cid], gts[cid]) for cid in sorted(preds)]
    if not items:
        raise InputError("no prediction volumes found")
    args.out.mkdir(parents=True, exist_ok=True)

    results = _map_cases(
        partial(_eval_one, cfg=cfg, postprocess_first=args.postprocess_first),
        items, args.workers,
    )
    metrics = [m for m, _, _ in results]
    case_path = write_rows(
        args.out / "case_metrics", _CASE_COLUMNS,
        [(m.case_id, m.dice, m.assd_mm, m.assd_fallback_used) for m in metrics],
        args.format,
    )
    report = cohort_report(metrics)
    write_rows(
        args.out / "cohort_summary",
        ["tag", "metric", "mean", "std", "n_cases", "assd_fallbacks", "postprocessed"],
        [
            (args.tag, "dice", report.dice_mean, report.dice_std, report.n_cases,
             report.fallback_count, args.postprocess_first),
            (args.tag, "assd_mm", report.assd_mean, report.assd_std, report.n_cases,
             report.fallback_count, args.postprocess_first),
        ],
        args.format,
    )
    gt_curve = pool_overlap_curves([g for _, g, _ in results])
    pred_curve = pool_overlap_curves([p for _, _, p in results])
    curve_rows = [
        (c.direction, b.lo_mm, b.lo_mm + c.bin_width_mm, b.mean_overlap, b.n)
        for c in (gt_curve, pred_curve)
        for b in c.bins
    ]
    write_rows(args.out / "overlap_curves",
               ["direction", "bin_lo_mm", "bin_hi_mm", "mean_overlap", "n"],
               curve_rows, args.format)
    render_overlap_figure((gt_curve, pred_curve), args.out / "overlap_curves.png")
    print(f"wrote {case_path}: dice {report.dice_mean:.3f} ± {report.dice_std:.3f}, "
          f"assd {report.assd_mean:.2f} ± {report.assd_std:.2f} mm over {report.n_cases} case(s)")
    return 0


def _load_case_metrics(path: Path) -> dict[str, tuple[float, float]]:
    if not path.exists():
        raise InputError(f"report not found: {path}")
    _, rows = read_rows(path)
    out = {}
    for row in rows:
        try:
            out[str(row["case_id"])] = (float(row["dice"]), float(row["assd_mm"]))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path} is not a case metrics table: {exc}") from exc
    if not out:
        raise InputError(f"{path} holds no cases")
    return out


def cmd_compare(args) -> int:
    _config_from_args(args)  # validates --config; the test itself has no knobs
    a = _load_case_metrics(args.report_a)
    b = _load_case_metrics(args.report_b)
    if set(a) != set(b):
        raise InputError("reports cover different case sets; cannot pair")
    ids = sorted(a)
    rows = []
    for metric, idx in (("dice", 0), ("assd_mm", 1)):
        res = wilcoxon_signed_rank([a[i][idx] for i in ids], [b[i][idx] for i in ids])
        rows.append((metric, res.n_effective, res.w_statistic, res.p_two_sided, res.method))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    path = write_rows(args.out, ["metric", "n_effective", "w_statistic", "p_two_sided", "method"],
                      rows, args.format)
    for metric, n_eff, w, p, method in rows:
        print(f"{metric}\tn={n_eff}\tW={w}\tp={p:.6g}\t({method})")
    print(f"wrote {path}")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnquant",
        description="Weakly annotated lymph node CT toolkit: preprocessing, "
                    "annotation strategies, measurement, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate synthetic phantom case(s)")
    p.add_argument("--spec", type=Path, required=True, help="phantom spec JSON")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--cases", type=int, default=1)
    _add_config_args(p)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("preprocess", help="resample, ROI-crop, and standardise cases")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--case", type=Path)
    grp.add_argument("--dataset", type=Path)
    _add_config_args(p)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("strategy", help="export a weak-annotation training pair")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--case", type=Path)
    grp.add_argument("--dataset", type=Path)
    p.add_argument("--strategy", choices=STRATEGIES, required=True)
    _add_config_args(p)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_strategy)

    p = sub.add_parser("measure", help="component catalog of one label volume")
    p.add_argument("--volume", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="output base path (no extension)")
    _add_config_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("postprocess", help="erase small components from a prediction")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("stats", help="dataset component statistics and histogram")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--gt-name", default=CASE_GT)
    _add_config_args(p)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="Dice/ASSD and overlap curves over a cohort")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pred-name", default="pred.nii.gz")
    p.add_argument("--gt-name", default=CASE_GT)
    p.add_argument("--postprocess-first", action="store_true",
                   help="apply the small-component filter before scoring")
    p.add_argument("--tag", default="model")
    _add_config_args(p)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired Wilcoxon test between two eval reports")
    p.add_argument("--report-a", type=Path, required=True, help="case metrics table")
    p.add_argument("--report-b", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output base path (no extension)")
    _add_config_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        if isinstance(exc.cause, (FileNotFoundError, VolumeFormatError, ValueError)):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, VolumeFormatError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
