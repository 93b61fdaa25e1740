"""Batch command line: ``toporad <command> [options]``.

Every command writes into ``--out`` and echoes its resolved options to
``<out>/config.txt``; passing that file back with ``--config`` reproduces the
run.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import growth, learn, render
from .ingest import NoPatchesError, load_grayscale, load_point_cloud, save_grayscale
from .pipeline import (
    FEATURE_SETS,
    PROGRESSION_HEADER,
    manifest_patches,
    progression_report,
    read_manifest,
    run_classification,
    table_from_patches,
)
from .tables import FEATURES, FeatureTable, fmt, write_rows
from .tda import ComplexTooLarge, compute_persistence, lower_star_filtration, read_barcode_csv, rips_filtration, write_barcode_csv

log = logging.getLogger("toporad")

CONFIG_NAME = "config.txt"
_SKIP_ECHO = {"config", "func", "command", "verbose"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


_REQUIRED: dict[str, list[str]] = {}


def _required(p, command: str, name: str, **kw) -> None:
    """A mandatory option that a config file may also supply."""
    p.add_argument(name, default=None, **kw)
    dest = name.lstrip("-").replace("-", "_")
    if dest not in _REQUIRED.setdefault(command, []):
        _REQUIRED[command].append(dest)


def _flag(p, name: str, help: str) -> None:
    p.add_argument(name, type=_bool, nargs="?", const=True, default=False, help=help)


def read_config(path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment, dashes in keys are allowed."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _echo(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_echo(x) for x in v)
    if isinstance(v, float):
        return fmt(v)
    return "" if v is None else str(v)


def write_config(args: argparse.Namespace, out: Path) -> None:
    items = sorted((k, v) for k, v in vars(args).items() if k not in _SKIP_ECHO)
    text = f"command={args.command}\n" + "".join(f"{k}={_echo(v)}\n" for k, v in items)
    (out / CONFIG_NAME).write_text(text)


def _csv_list(values) -> str:
    return ",".join(str(v) for v in values)


# --------------------------------------------------------------------------
# commands


def _simulate_one(alpha: float, base: growth.GrowthParams, args, out: Path):
    """One alpha run; returns (sweep row, onsets, failure count)."""
    params = replace(base, alpha=alpha)
    run = out / f"alpha_{fmt(alpha)}"
    if run.exists():
        shutil.rmtree(run)
    (run / "clouds").mkdir(parents=True)
    try:
        frames = growth.simulate(params, args.sample_every)
    except growth.GrowthDiverged as exc:
        log.error("alpha=%s diverged at step %d", fmt(alpha), exc.step)
        return None, {}, 1

    traj = []
    for fr in frames:
        for t in growth.CELL_TYPES:
            traj.extend([fr.step, t, x, u] for x, u in zip(fr.x.tolist(), fr.density(t).tolist()))
    write_rows(run / "trajectory.csv", ["step", "type", "x", "density"], traj)

    failures = 0
    series = []
    for i, fr in enumerate(frames):
        clouds = growth.sample_clouds(fr, args.kappa)
        if i % args.cloud_every == 0:
            rows = [[t, x, y] for t in growth.CELL_TYPES for x, y in clouds.of(t).tolist()]
            write_rows(run / "clouds" / f"frame_{i:05d}.csv", ["type", "x", "y"], rows)
        if i % args.tda_every != 0:
            continue
        for t in growth.CELL_TYPES:
            pts = clouds.of(t)
            try:
                stats = growth.cloud_statistics(pts, args.rips_t_max, args.max_points)
            except ComplexTooLarge as exc:
                log.error("alpha=%s frame %d %s: %s", fmt(alpha), i, t, exc)
                failures += 1
                stats = (math.nan, math.nan, math.nan)
            series.append([i, t, len(pts), *stats])
    header = ["frame", "type", "points", "pe_h0", "pe_h1", "hgen"]
    write_rows(run / "timeseries.csv", header, series)

    onsets = {t: growth.onset_analysis(frames, t, args.kappa) for t in ("quiescent", "necrotic")}
    if args.svg:
        for col, stat in enumerate(header[3:], start=3):
            lines = {
                t: [(r[0], r[col]) for r in series if r[1] == t and not math.isnan(r[col])] for t in growth.CELL_TYPES
            }
            (run / f"timeseries_{stat}.svg").write_text(render.timeseries_svg(lines, f"alpha={fmt(alpha)} {stat}", stat))
    row = [alpha, *("none" if onsets[t] is None else onsets[t] for t in ("quiescent", "necrotic"))]
    return row, onsets, failures


def cmd_simulate(args) -> int:
    out = Path(args.out)
    base = growth.GrowthParams(
        alpha=0.0,
        gamma=args.gamma,
        beta=args.beta,
        c0=args.c0,
        dx=args.dx,
        dt=args.dt,
        n_nodes=args.n_nodes,
        t_end=args.t_end,
        epsilon=args.epsilon,
    )
    for a in args.alpha:  # validate every alpha before any run starts
        replace(base, alpha=a)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(lambda a: _simulate_one(a, base, args, out), args.alpha))

    summary = [row for row, _, _ in results if row is not None]
    write_rows(out / "sweep.csv", ["alpha", "onset_quiescent", "onset_necrotic"], summary)
    if args.svg:
        pts = {
            t: [(a, float(on[t])) for a, (_, on, _) in zip(args.alpha, results) if on.get(t) is not None]
            for t in ("quiescent", "necrotic")
        }
        (out / "onset_vs_alpha.svg").write_text(render.timeseries_svg(pts, "onset frame vs alpha", "frame"))
    return 1 if sum(f for _, _, f in results) else 0


def _features_for(item, args):
    patches = manifest_patches(item, args.patch_size, args.stride, args.min_coverage)
    return patches, table_from_patches(patches, args.levels)


def cmd_features(args) -> int:
    out = Path(args.out)
    items = read_manifest(args.manifest)

    def work(item):
        try:
            return _features_for(item, args), None
        except (OSError, ValueError) as exc:  # NoPatchesError is a ValueError
            return None, exc

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(work, items))

    tables, failures = [], 0
    dump = Path(args.dump_patches) if args.dump_patches else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)
    for item, (res, exc) in zip(items, results):
        if exc is not None:
            kind = "no patches" if isinstance(exc, NoPatchesError) else "failed"
            log.error("%s (%s, %s): %s", kind, item.image_path, item.mask_path, exc)
            failures += 1
            continue
        patches, table = res
        tables.append(table)
        if dump:
            for p in patches:
                name = f"{p.source_id}_{p.label}_{p.origin[0]:04d}_{p.origin[1]:04d}.pgm"
                save_grayscale(p.pixels, dump / name, "P5")
    if tables:
        merged = FeatureTable(
            np.concatenate([t.X for t in tables]),
            np.concatenate([t.y for t in tables]),
            [s for t in tables for s in t.source_ids],
            [o for t in tables for o in t.origins],
        )
    else:
        merged = FeatureTable(np.zeros((0, len(FEATURES))), [], [])
    merged.write_csv(out / "features.csv")
    return 1 if failures else 0


def cmd_progression(args) -> int:
    pre = FeatureTable.read_csv(args.pre)
    post = FeatureTable.read_csv(args.post)
    rows = progression_report(pre, post, by_source=args.aggregate == "source")
    write_rows(Path(args.out) / "progression.csv", PROGRESSION_HEADER, rows)
    return 0


def _hyper(args) -> learn.Hyper:
    return learn.Hyper(
        lam=args.lam,
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        tolerance=args.tolerance,
        seed=args.seed,
        alpha_sig=args.alpha_sig,
        redundancy_rho=args.redundancy_rho,
        select=not args.no_select,
    )


def _metric_doc(m: learn.Metrics) -> dict:
    return {k: float(v) for k, v in m.summary().items()}


def cmd_classify(args) -> int:
    out = Path(args.out)
    table = FeatureTable.read_csv(args.table)
    sets = list(FEATURE_SETS) if args.feature_sets == ["all"] else args.feature_sets
    unknown = [s for s in sets if s not in FEATURE_SETS]
    if unknown:
        raise ValueError(f"unknown feature sets {unknown}; choose from {list(FEATURE_SETS)} or all")
    summary = []
    for name in sets:
        run = run_classification(
            table, name, args.seed, _hyper(args), args.k, args.train_fraction, args.group_by_source
        )
        (out / f"model_{name}.json").write_text(run.model.to_json())
        doc = {
            "feature_set": name,
            "features": list(run.model.names),
            "selected": [n for n, s in zip(run.model.names, run.model.selected) if s],
            "train": _metric_doc(run.train),
            "test": _metric_doc(run.test),
            "cv_mean": run.cv.mean(),
            "cv_std": run.cv.std(),
            "cv_folds": [_metric_doc(m) for m in run.cv.folds],
            "n_train": int(len(run.train_idx)),
            "n_test": int(len(run.test_idx)),
        }
        (out / f"metrics_{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        write_rows(out / f"roc_{name}.csv", ["threshold", "fpr", "tpr"], run.test.roc)
        if run.selection is not None:
            write_rows(
                out / f"selection_{name}.csv",
                ["feature", "rho", "p", "kept", "reason"],
                [[f.name, f.rho, f.p, f.kept, f.reason] for f in run.selection.features],
            )
        if args.svg:
            (out / f"roc_{name}.svg").write_text(render.roc_svg(run.test.roc, f"ROC ({name})"))
        for split_name, m in (("train", run.train), ("test", run.test)):
            s = m.summary()
            summary.append([name, split_name, *(s[k] for k in s)])
    write_rows(
        out / "summary.csv",
        ["feature_set", "split", "accuracy", "precision", "recall", "misclassification_rate", "f1", "auc"],
        summary,
    )
    return 0


def cmd_explain(args) -> int:
    out = Path(args.out)
    model = learn.ClassifierModel.from_json(Path(args.model).read_text())
    table = FeatureTable.read_csv(args.table).columns(model.names)
    rows = list(range(len(table))) if args.rows == ["all"] else [int(r) for r in args.rows]
    bad = [r for r in rows if not 0 <= r < len(table)]
    if bad:
        raise ValueError(f"unknown row ids {bad} (table has {len(table)} rows)")
    imp = learn.permutation_importance(model, table.X, table.y, args.repeats, args.seed)
    write_rows(out / "importance.csv", ["feature", "importance"], zip(model.names, imp.tolist()))
    contrib_rows = []
    for r in rows:
        c = learn.local_contributions(model, table.X[r])
        logit = float(learn.logits(model, table.X[r : r + 1])[0])
        contrib_rows.append([r, table.source_ids[r], *c.tolist(), model.bias, logit])
    write_rows(out / "contributions.csv", ["row", "source_id", *model.names, "bias", "logit"], contrib_rows)
    return 0


def cmd_render(args) -> int:
    src = Path(args.input)
    target = Path(args.output) if args.output else Path(args.out) / f"{src.stem}_{args.kind}.svg"
    if args.kind in ("barcode", "diagram"):
        bc = read_barcode_csv(src)
        svg = render.barcode_svg(bc, src.stem) if args.kind == "barcode" else render.diagram_svg(bc, src.stem)
    elif args.kind == "roc":
        import csv

        with open(src, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["threshold", "fpr", "tpr"]:
                raise ValueError(f"{src}: not a ROC CSV")
            roc = [(float(r["threshold"]), float(r["fpr"]), float(r["tpr"])) for r in reader]
        svg = render.roc_svg(roc, src.stem)
    else:
        import csv

        with open(src, newline="") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"frame", "type", args.stat} <= set(reader.fieldnames):
                raise ValueError(f"{src}: not a time-series CSV with column {args.stat}")
            lines: dict[str, list[tuple[float, float]]] = {}
            for r in reader:
                v = float(r[args.stat])
                if not math.isnan(v):
                    lines.setdefault(r["type"], []).append((float(r["frame"]), v))
        svg = render.timeseries_svg(lines, f"{src.stem} {args.stat}", args.stat)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(svg)
    return 0


def cmd_tda(args) -> int:
    out = Path(args.out)
    if args.kind == "image":
        cx = lower_star_filtration(load_grayscale(args.input))
    else:
        cx = rips_filtration(load_point_cloud(args.input), args.rips_t_max, args.max_points)
    bc = compute_persistence(cx)
    write_barcode_csv(bc, out / "barcode.csv", out / "generators.txt" if args.generators else None)
    if args.svg:
        (out / "barcode.svg").write_text(render.barcode_svg(bc))
        (out / "diagram.svg").write_text(render.diagram_svg(bc))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--config", help="flat key=value file supplying option defaults")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="toporad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="tumour growth model, alpha sweep and TDA time series")
    p.add_argument("--alpha", type=_floats, default=[0.0, 0.5, 1.0])
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--n-nodes", type=int, default=201)
    p.add_argument("--t-end", type=float, default=20.0)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--sample-every", type=int, default=100, help="steps between recorded frames")
    p.add_argument("--kappa", type=float, default=8.0, help="points per unit density")
    p.add_argument("--rips-t-max", type=float, default=2.0)
    p.add_argument("--max-points", type=int, default=2500, help="Rips complexity guard")
    p.add_argument("--tda-every", type=int, default=20, help="frames between TDA evaluations")
    p.add_argument("--cloud-every", type=int, default=20, help="frames between cloud dumps")
    _flag(p, "--svg", "also draw time series and onset curves")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("features", parents=[common], help="per-patch feature table from a manifest")
    _required(p, "features", "--manifest")
    p.add_argument("--patch-size", type=int, default=30)
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--min-coverage", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=32)
    p.add_argument("--dump-patches", default="", help="directory for PGM copies of every patch")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("progression", parents=[common], help="Welch tests of topological features, pre vs post")
    _required(p, "progression", "--pre")
    _required(p, "progression", "--post")
    p.add_argument("--aggregate", choices=("slice", "source"), default="slice")
    p.set_defaults(func=cmd_progression)

    p = sub.add_parser("classify", parents=[common], help="selection, split, CV, training and test metrics")
    _required(p, "classify", "--table")
    p.add_argument("--feature-sets", type=_names, default=["all"], help="topo,texture,both or all")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--lam", type=float, default=1e-3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--max-epochs", type=int, default=5000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--alpha-sig", type=float, default=0.05)
    p.add_argument("--redundancy-rho", type=float, default=0.95)
    _flag(p, "--no-select", "skip feature selection")
    _flag(p, "--group-by-source", "keep all patches of a source on one side of the split")
    _flag(p, "--svg", "also draw test ROC curves")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("explain", parents=[common], help="permutation importance and local contributions")
    _required(p, "explain", "--model")
    _required(p, "explain", "--table")
    p.add_argument("--rows", type=_names, default=["all"], help="comma-separated row indices or all")
    p.add_argument("--repeats", type=int, default=10)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("render", parents=[common], help="SVG of a barcode, diagram, ROC or time series file")
    _required(p, "render", "--kind", choices=("barcode", "diagram", "roc", "timeseries"))
    _required(p, "render", "--input")
    p.add_argument("--output", default="")
    p.add_argument("--stat", default="pe_h0", help="time-series column to plot")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("tda", parents=[common], help="barcode of an image or a point cloud")
    p.add_argument("kind", choices=("image", "cloud"))
    _required(p, "tda", "--input")
    p.add_argument("--rips-t-max", type=float, default=2.0)
    p.add_argument("--max-points", type=int, default=2500)
    _flag(p, "--generators", "write generator vertex ids to generators.txt")
    _flag(p, "--svg", "also draw barcode and diagram")
    p.set_defaults(func=cmd_tda)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        cmd = values.pop("command", args.command)
        if cmd != args.command:
            parser.error(f"config is for {cmd!r}, not {args.command!r}")
        sub = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(values) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        positional = {a.dest for a in sub._actions if not a.option_strings}
        for dest in sorted(positional & set(values)):
            if getattr(args, dest) != values[dest]:
                parser.error(f"config {dest}={values[dest]} does not match the command line")
        # string defaults go through each option's type converter
        sub.set_defaults(**{k: v for k, v in values.items() if k not in positional})
        args = parser.parse_args(argv)
    missing = [d for d in _REQUIRED.get(args.command, []) if getattr(args, d) is None]
    if missing:
        parser.error(f"{args.command}: missing required options: {', '.join('--' + d.replace('_', '-') for d in missing)}")
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(args, out)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
