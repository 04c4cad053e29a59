"""Batch command-line front end.

Subcommands: ``score``, ``heatmap``, ``degrade``, ``bt``, ``correlate``,
``cluster`` and ``shift-diag``.  Machine-readable results go only to the
declared output files; progress goes to stderr.  Exit status is 0 on
success, 1 on input or validation errors, 2 on internal errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .degrade import (
    NoiseParams,
    add_noise,
    bd_downsample,
    bicubic_resize,
    prepare_pair,
)
from .erqa import default_jobs, erqa_score, map_ordered, render_heatmap
from .frame_io import FrameError, list_frame_files, load_frame, save_frame, to_luma
from .stats import (
    BradleyTerryError,
    ComparisonRecord,
    FeatureMatrix,
    bt_fit,
    global_shift_psnr,
    kmedoids,
    plcc,
    psnr,
    srcc,
    ssim,
)

log = logging.getLogger("srdetail")

METRICS = ("erqa", "psnr", "ssim")


class InputError(Exception):
    """Bad user input; reported with exit status 1."""


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def json_value(x):
    if isinstance(x, dict):
        return {str(k): json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_value(v) for v in x]
    if isinstance(x, np.ndarray):
        return json_value(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return x


def format_float(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


class Outputs:
    """Tracks written files so a failed command can remove its partial output."""

    def __init__(self):
        self.paths: list[Path] = []

    def _track(self, path) -> Path:
        path = Path(path)
        self.paths.append(path)
        return path

    def json(self, path, payload) -> None:
        path = self._track(path)
        text = json.dumps(json_value(payload), indent=2, allow_nan=False) + "\n"
        path.write_text(text, encoding="utf-8")

    def csv(self, path, header, rows) -> None:
        path = self._track(path)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        path.write_text(buf.getvalue(), encoding="utf-8")

    def png(self, path, frame) -> None:
        save_frame(frame, self._track(path))

    def mkdir(self, path) -> Path:
        path = Path(path)
        if not path.exists():
            path.mkdir(parents=True)
            self.paths.append(path)
        return path

    def rollback(self) -> None:
        for p in reversed(self.paths):
            try:
                if p.is_dir():
                    p.rmdir()
                elif p.exists():
                    p.unlink()
            except OSError:
                pass


def _config(args) -> RunConfig:
    return load_config(getattr(args, "config", None))


def _parent_exists(path) -> None:
    if path is not None and not Path(path).resolve().parent.is_dir():
        raise InputError(f"output directory for {path} does not exist")


# --------------------------------------------------------------------------
# score
# --------------------------------------------------------------------------


def _frame_metric(task):
    metric, gt_path, dist_path, cfg = task
    t0 = time.perf_counter()
    gt, dist = load_frame(gt_path), load_frame(dist_path)
    if gt.shape[:2] != dist.shape[:2]:
        raise FrameError(f"{dist_path}: size {dist.shape[:2]} differs from ground truth {gt.shape[:2]}")
    if metric == "erqa":
        value = erqa_score(gt, dist, cfg.erqa).value
    elif metric == "psnr":
        if gt.channels != dist.channels:
            gt, dist = to_luma(gt), to_luma(dist)
        value = psnr(gt, dist)
    else:
        value = ssim(gt, dist)
    return value, gt.shape, time.perf_counter() - t0


def _matched_files(gt_dir, dist_dir):
    gt_files = list_frame_files(gt_dir)
    dist_files = list_frame_files(dist_dir)
    if len(gt_files) != len(dist_files):
        raise InputError(
            f"frame count mismatch: {len(gt_files)} in {gt_dir} vs {len(dist_files)} in {dist_dir}"
        )
    return gt_files, dist_files


def cmd_score(args, out: Outputs) -> int:
    cfg = _config(args)
    _parent_exists(args.out)
    _parent_exists(args.csv)
    gt_files, dist_files = _matched_files(args.gt_dir, args.dist_dir)
    tasks = [(args.metric, g, d, cfg) for g, d in zip(gt_files, dist_files)]
    t0 = time.perf_counter()
    results = map_ordered(_frame_metric, tasks, args.jobs)
    total = time.perf_counter() - t0
    shapes = {r[1][:2] for r in results}
    if len(shapes) > 1:
        raise FrameError(f"frames in a sequence differ in size: {sorted(shapes)}")

    values = [r[0] for r in results]
    aggregate = math.inf if any(math.isinf(v) for v in values) else math.fsum(values) / len(values)
    for i, v in enumerate(values):
        log.info("frame %d/%d %s: %s", i + 1, len(values), gt_files[i].name, format_float(v))
    log.info("%s mean over %d frames: %s (%.2f s)", args.metric, len(values), format_float(aggregate), total)

    per_frame = [
        {"index": i, "name": gt_files[i].name, "value": v} for i, v in enumerate(values)
    ]
    report = {
        "tool_version": __version__,
        "command": "score",
        "metric": args.metric,
        "gt_dir": str(args.gt_dir),
        "dist_dir": str(args.dist_dir),
        "config": cfg.as_dict(),
        "per_frame": per_frame,
        "aggregate": aggregate,
        "timing": (
            {"total_seconds": total, "per_frame_seconds": [r[2] for r in results], "jobs": args.jobs}
            if args.timing
            else None
        ),
    }
    if args.out:
        out.json(args.out, report)
    if args.csv:
        out.csv(
            args.csv,
            ["index", "name", args.metric],
            [[i, gt_files[i].name, format_float(v)] for i, v in enumerate(values)],
        )
    if not args.out and not args.csv:
        print(format_float(aggregate))
    return 0


# --------------------------------------------------------------------------
# heatmap
# --------------------------------------------------------------------------


def cmd_heatmap(args, out: Outputs) -> int:
    cfg = _config(args)
    prefix = Path(args.out)
    _parent_exists(prefix)
    gt, dist = load_frame(args.gt), load_frame(args.dist)
    if gt.shape[:2] != dist.shape[:2]:
        raise FrameError(f"size mismatch: {gt.shape[:2]} vs {dist.shape[:2]}")
    score = erqa_score(gt, dist, cfg.erqa)
    gt_png = prefix.parent / f"{prefix.name}_gt_overlay.png"
    dist_png = prefix.parent / f"{prefix.name}_dist_overlay.png"
    out.png(gt_png, render_heatmap(score.masks, gt, "gt"))
    out.png(dist_png, render_heatmap(score.masks, dist, "dist"))
    out.json(
        prefix.parent / f"{prefix.name}.json",
        {
            "tool_version": __version__,
            "command": "heatmap",
            "gt": str(args.gt),
            "dist": str(args.dist),
            "config": cfg.as_dict(),
            "value": score.value,
            "counts": score.masks.counts(),
            "trace": [
                {"dx": c.dx, "dy": c.dy, "similarity": c.similarity, "matches_added": n}
                for c, n in score.per_shift_trace
            ],
            "gt_overlay": gt_png.name,
            "dist_overlay": dist_png.name,
        },
    )
    log.info("ERQA %.6f; tp=%d fp=%d fn=%d", score.value, *score.masks.counts().values())
    return 0


# --------------------------------------------------------------------------
# degrade
# --------------------------------------------------------------------------


def frame_seed(seed: int, index: int) -> int:
    """Independent per-frame noise seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _out_name(path: Path) -> str:
    return path.name if path.suffix.lower() == ".png" else path.stem + ".png"


def cmd_degrade(args, out: Outputs) -> int:
    cfg = _config(args).with_overrides(scale=args.scale, bd_sigma=args.sigma, seed=args.seed)
    files = list_frame_files(args.in_dir)
    out_dir = Path(args.out)
    if out_dir.exists() and not out_dir.is_dir():
        raise InputError(f"{out_dir} exists and is not a directory")
    out.mkdir(out_dir)
    manifest_files = []
    if args.mode == "pair":
        hr_dir, lr_dir = out.mkdir(out_dir / "hr"), out.mkdir(out_dir / "lr")

    for i, path in enumerate(files):
        frame = load_frame(path)
        name = _out_name(path)
        entry = {"input": path.name, "output": name}
        if args.mode == "pair":
            hr, lr = prepare_pair(frame)
            out.png(hr_dir / name, hr)
            out.png(lr_dir / name, lr)
            entry["hr_size"] = [hr.width, hr.height]
            entry["lr_size"] = [lr.width, lr.height]
        else:
            if args.mode == "bi":
                s = cfg.degrade.scale
                if frame.width < s or frame.height < s:
                    raise FrameError(f"{path.name} is smaller than scale {s}")
                result = bicubic_resize(frame, frame.width // s, frame.height // s)
            elif args.mode == "bd":
                result = bd_downsample(frame, cfg.degrade)
            else:
                fseed = frame_seed(cfg.noise.seed, i)
                params = NoiseParams(cfg.noise.sigma_s, cfg.noise.sigma_c, fseed)
                result = add_noise(frame, params)
                entry["frame_seed"] = fseed
            out.png(out_dir / name, result)
            entry["size"] = [result.width, result.height]
        manifest_files.append(entry)
        log.info("degraded %d/%d %s", i + 1, len(files), path.name)

    params = {
        "bi": {"scale": cfg.degrade.scale, "kernel": "bicubic", "a": -0.5},
        "bd": {
            "scale": cfg.degrade.scale,
            "bd_sigma": cfg.degrade.bd_sigma,
            "bd_offset": cfg.degrade.bd_offset,
        },
        "noise": {
            "sigma_s": cfg.noise.sigma_s,
            "sigma_c": cfg.noise.sigma_c,
            "variance": "sigma_s * L + sigma_c**2",
            "frame_seed": "SeedSequence([seed, frame_index]) -> PCG64",
        },
        "pair": {"hr_size": [1920, 1080], "lr_size": [480, 270], "kernel": "bicubic", "a": -0.5},
    }[args.mode]
    out.json(
        out_dir / "manifest.json",
        {
            "tool_version": __version__,
            "command": "degrade",
            "mode": args.mode,
            "params": params,
            "seed": cfg.noise.seed,
            "config": cfg.as_dict(),
            "files": manifest_files,
        },
    )
    return 0


# --------------------------------------------------------------------------
# bt / correlate / cluster
# --------------------------------------------------------------------------


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path} is empty")
    return [c.strip() for c in rows[0]], [[c.strip() for c in r] for r in rows[1:]]


def read_votes(path) -> list[ComparisonRecord]:
    header, rows = _read_csv(path)
    expected = ["item_a", "item_b", "wins_a", "wins_b"]
    if header != expected:
        raise InputError(f"{path}: header must be {','.join(expected)}")
    records = []
    for n, row in enumerate(rows, 2):
        if len(row) != 4:
            raise InputError(f"{path}:{n}: expected 4 fields")
        try:
            records.append(ComparisonRecord(row[0], row[1], float(row[2]), float(row[3])))
        except ValueError as exc:
            raise InputError(f"{path}:{n}: {exc}") from exc
    return records


def cmd_bt(args, out: Outputs) -> int:
    _parent_exists(args.out)
    records = read_votes(args.votes)
    fit = bt_fit(records, max_iter=args.max_iter, tol=args.tol, alpha=args.alpha)
    display = fit.display_scores()
    out.json(
        args.out,
        {
            "tool_version": __version__,
            "command": "bt",
            "alpha": args.alpha,
            "max_iter": args.max_iter,
            "tol": args.tol,
            "iterations_used": fit.iterations_used,
            "converged": fit.converged,
            "log_likelihood": fit.loglik_trace[-1],
            "abilities": [
                {"item": k, "ability": fit.abilities[k], "display_score": display[k]}
                for k in fit.ranking()
            ],
        },
    )
    return 0


def read_feature_matrix(path) -> FeatureMatrix:
    header, rows = _read_csv(path)
    if len(header) < 2:
        raise InputError(f"{path}: need an id column and at least one feature column")
    ids, values = [], []
    for n, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise InputError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise InputError(f"{path}:{n}: {exc}") from exc
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate model ids")
    try:
        return FeatureMatrix(ids, header[1:], np.array(values).reshape(len(ids), len(header) - 1))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_correlate(args, out: Outputs) -> int:
    _parent_exists(args.out)
    feats = read_feature_matrix(args.features)
    subj = read_feature_matrix(args.subjective)
    subj_col = subj.cols[0]
    subj_by_id = dict(zip(subj.rows, subj.values[:, 0]))
    missing = [r for r in feats.rows if r not in subj_by_id]
    if missing:
        raise InputError(f"no subjective score for: {', '.join(missing)}")
    y = np.array([subj_by_id[r] for r in feats.rows])
    table = []
    for j, col in enumerate(feats.cols):
        x = feats.values[:, j]
        table.append({"feature": col, "plcc": plcc(x, y), "srcc": srcc(x, y)})
    table.sort(key=lambda r: -r["plcc"])
    out.json(
        args.out,
        {
            "tool_version": __version__,
            "command": "correlate",
            "subjective_column": subj_col,
            "n_models": len(feats.rows),
            "correlations": table,
        },
    )
    return 0


def cmd_cluster(args, out: Outputs) -> int:
    _parent_exists(args.out)
    feats = read_feature_matrix(args.features)
    res = kmedoids(feats, k=args.k, seed=args.seed)
    clusters = {m: [r for r in feats.rows if res.assignment[r] == m] for m in res.medoids}
    out.json(
        args.out,
        {
            "tool_version": __version__,
            "command": "cluster",
            "k": args.k,
            "seed": args.seed,
            "standardized": True,
            "medoids": res.medoids,
            "assignment": res.assignment,
            "clusters": clusters,
            "cost": res.cost,
            "build_cost": res.build_cost,
            "dropped_columns": res.dropped_columns,
        },
    )
    return 0


# --------------------------------------------------------------------------
# shift-diag
# --------------------------------------------------------------------------


def _frame_shift(task):
    gt_path, dist_path, radius = task
    gt, dist = load_frame(gt_path), load_frame(dist_path)
    if gt.shape != dist.shape:
        raise FrameError(f"{dist_path}: shape {dist.shape} differs from ground truth {gt.shape}")
    return global_shift_psnr(gt, dist, radius)


def cmd_shift_diag(args, out: Outputs) -> int:
    _parent_exists(args.out)
    if args.radius < 0:
        raise InputError("radius must be >= 0")
    gt_files, dist_files = _matched_files(args.gt_dir, args.dist_dir)
    tasks = [(g, d, args.radius) for g, d in zip(gt_files, dist_files)]
    results = map_ordered(_frame_shift, tasks, args.jobs)
    r = args.radius
    grid = np.zeros((2 * r + 1, 2 * r + 1), dtype=np.int64)
    for dx, dy, _ in results:
        grid[dy + r, dx + r] += 1
    bins = [
        {"dx": dx, "dy": dy, "count": int(grid[dy + r, dx + r])}
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if grid[dy + r, dx + r]
    ]
    out.json(
        args.out,
        {
            "tool_version": __version__,
            "command": "shift-diag",
            "radius": r,
            "n_frames": len(results),
            "grid_index": "grid[dy + radius][dx + radius]",
            "grid": grid,
            "bins": bins,
            "per_frame": [
                {"index": i, "name": gt_files[i].name, "dx": dx, "dy": dy, "psnr": v}
                for i, (dx, dy, v) in enumerate(results)
            ],
        },
    )
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srdetail", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("score", help="score a distorted frame directory against ground truth")
    s.add_argument("gt_dir")
    s.add_argument("dist_dir")
    s.add_argument("--metric", choices=METRICS, default="erqa")
    s.add_argument("--config", help="key = value settings file")
    s.add_argument("--out", help="JSON report path")
    s.add_argument("--csv", help="per-frame CSV path")
    s.add_argument("--jobs", type=int, default=default_jobs())
    s.add_argument("--timing", action="store_true", help="record wall-clock timings in the report")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("heatmap", help="render TP/FN and FP overlays for one frame pair")
    s.add_argument("gt")
    s.add_argument("dist")
    s.add_argument("--out", required=True, help="output prefix")
    s.add_argument("--config")
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("degrade", help="generate degraded inputs")
    s.add_argument("in_dir")
    s.add_argument("--mode", choices=("bi", "bd", "noise", "pair"), required=True)
    s.add_argument("--scale", type=int)
    s.add_argument("--sigma", type=float, help="Gaussian std for bd mode")
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("bt", help="fit Bradley-Terry abilities from pairwise votes")
    s.add_argument("votes")
    s.add_argument("--out", required=True)
    s.add_argument("--alpha", type=float, default=0.0, help="pseudo-wins added to both sides")
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_bt)

    s = sub.add_parser("correlate", help="PLCC/SRCC of metric features against subjective scores")
    s.add_argument("features")
    s.add_argument("subjective")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("cluster", help="k-medoids representative selection")
    s.add_argument("features")
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("shift-diag", help="histogram of PSNR-optimal global shifts")
    s.add_argument("gt_dir")
    s.add_argument("dist_dir")
    s.add_argument("--radius", type=int, default=5)
    s.add_argument("--jobs", type=int, default=default_jobs())
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shift_diag)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("srdetail: --jobs must be >= 1", file=sys.stderr)
        return 1
    out = Outputs()
    try:
        return args.func(args, out)
    except (InputError, FrameError, BradleyTerryError, ValueError, OSError) as exc:
        out.rollback()
        print(f"srdetail {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        out.rollback()
        print(f"srdetail {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
