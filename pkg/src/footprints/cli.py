"""Command-line interface: ingestion -> propagation -> evaluation.

Subcommands:
  synth           scene spec JSON -> sequence + ground-truth masks
  propagate       sequence -> per-frame footprint PGMs + diagnostics
  directions      sequence -> per-frame direction-map PFMs + diagnostics
  eval-expansion  pred/gt maps -> expansion-ratio report
  eval-map        (scores, gt) pairs -> report with mean average precision
  eval-kl         pred/ref maps + semantic map -> report with KL divergence
  render          PGM heatmap -> PNG, optionally overlaid on a background
  losses-check    finite-difference self-test of the gradient kernels

Exit codes: 0 success, 1 input/usage error, 2 internal error. The
FOOTPRINT_LOG environment variable (DEBUG/INFO/WARNING/ERROR) controls
log verbosity. Fixed inputs + seed produce byte-identical outputs at
any --jobs value.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation, gradcheck, propagation, sequence_io, synth
from .errors import FootprintsError

log = logging.getLogger("footprints")

DEFAULT_DOWNSAMPLE = 4


def _add_propagation_flags(p: argparse.ArgumentParser):
    p.add_argument("--sigma", type=float, default=2.0, help="splat std dev, grid cells")
    p.add_argument(
        "--downsample", type=int, default=DEFAULT_DOWNSAMPLE,
        help="image pixels per label-grid cell",
    )
    p.add_argument(
        "--support-radius", type=float, default=None,
        help="kernel cutoff radius, grid cells (default 3*sigma)",
    )
    p.add_argument("--zmin", type=float, default=0.1, help="near-plane cutoff, meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="footprints",
        description="Propagate 3D pedestrian annotations into dense walkability maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sequence + masks")
    p.add_argument("spec", nargs="?", help="scene spec JSON (omit with --default)")
    p.add_argument("--default", action="store_true", help="use the built-in default scene")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")

    p = sub.add_parser("propagate", help="footprint maps for every reference frame")
    p.add_argument("sequence", help="sequence .jsonl file")
    p.add_argument("-o", "--out", required=True)
    _add_propagation_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel reference frames")
    p.add_argument("--format", choices=["pgm", "png"], default="pgm")

    p = sub.add_parser("directions", help="direction maps for every reference frame")
    p.add_argument("sequence")
    p.add_argument("-o", "--out", required=True)
    _add_propagation_flags(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("eval-expansion", help="expansion ratios of pred vs gt")
    p.add_argument("--pred", required=True, help="prediction heatmap PGM")
    p.add_argument("--gt", required=True, help="ground-truth map PGM")
    p.add_argument("--threshold", type=float, default=0.5, help="score > t is positive")
    p.add_argument("-o", "--out", default=None, help="report file (default stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("eval-map", help="mean average precision over (scores, gt) pairs")
    p.add_argument(
        "--pair", nargs=2, action="append", metavar=("SCORES", "GT"),
        required=True, help="scores PGM and ground-truth PGM (repeatable)",
    )
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("eval-kl", help="semantic-histogram KL of pred vs reference")
    p.add_argument("--pred", required=True, help="predicted score map PGM")
    p.add_argument("--ref", required=True, help="reference (ground-truth) map PGM")
    p.add_argument("--semantic", required=True, help="semantic class-id PGM")
    p.add_argument("--samples", type=int, default=1000, help="locations per map")
    p.add_argument("--window", type=int, default=5, help="mode window, pixels (odd)")
    p.add_argument("--epsilon", type=float, default=1e-6, help="histogram smoothing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument(
        "--downsample", type=int, default=DEFAULT_DOWNSAMPLE,
        help="map cell size in semantic-image pixels",
    )
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("render", help="PGM heatmap to PNG")
    p.add_argument("map", help="heatmap PGM")
    p.add_argument("-o", "--out", required=True, help="output PNG")
    p.add_argument("--background", default=None, help="image to overlay onto")

    p = sub.add_parser("losses-check", help="finite-difference gradient self-test")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _params_from(args) -> propagation.PropagationParams:
    return propagation.PropagationParams(
        sigma=args.sigma,
        downsample=args.downsample,
        support_radius=args.support_radius,
        z_min=args.zmin,
    )


def _map_name(seq_id: str, frame_index: int, ext: str) -> str:
    return f"{seq_id}_{frame_index:06d}.{ext}"


def _write_report(report, out, fmt):
    if out is None:
        payload = dict(zip(sequence_io.METRIC_FIELDS,
                           [getattr(report, f) for f in sequence_io.METRIC_FIELDS]))
        print(json.dumps(payload, indent=2))
    else:
        sequence_io.write_metrics(report, out, format=fmt)
        log.info("wrote %s", out)


def _cmd_synth(args) -> int:
    if args.default:
        spec = synth.SceneSpec.default()
    elif args.spec:
        spec = synth.SceneSpec.from_json(args.spec)
    else:
        print("error: give a spec file or --default", file=sys.stderr)
        return 1
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    seq, masks = synth.generate_scene(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seq_path = out / f"{seq.sequence_id}.jsonl"
    sequence_io.write_sequence(seq, seq_path)
    for frame, mask in zip(seq.frames, masks):
        sequence_io.write_heatmap(
            mask.astype(np.float64),
            out / f"{seq.sequence_id}_mask_{frame.frame_index:06d}.pgm",
        )
    print(f"wrote {seq_path} ({len(seq.frames)} frames, "
          f"{len(seq.observations)} observations) and {len(masks)} masks")
    return 0


def _run_per_frame(args, worker, ext: str) -> int:
    """Shared driver for propagate/directions: one output per frame."""
    seq = sequence_io.parse_sequence(args.sequence)
    params = _params_from(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(frame_index: int):
        return frame_index, worker(seq, frame_index, params, out)

    indices = [f.frame_index for f in seq.frames]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = dict(pool.map(one, indices))
    else:
        results = dict(map(one, indices))

    diagnostics = {
        "sequence_id": seq.sequence_id,
        "params": {
            "sigma": params.sigma,
            "downsample": params.downsample,
            "support_radius": params.support,
            "z_min": params.z_min,
        },
        "frames": {
            str(i): dataclasses.asdict(results[i]) for i in sorted(results)
        },
    }
    diag_path = out / f"{seq.sequence_id}_diagnostics.json"
    diag_path.write_text(json.dumps(diagnostics, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(results)} {ext} maps and {diag_path}")
    return 0


def _cmd_propagate(args) -> int:
    fmt = "png8" if args.format == "png" else "pgm16"
    ext = args.format

    def worker(seq, frame_index, params, out: Path):
        fmap = propagation.propagate_footprints(seq, frame_index, params)
        sequence_io.write_heatmap(
            fmap.grid, out / _map_name(seq.sequence_id, frame_index, ext), format=fmt
        )
        return fmap.diagnostics

    return _run_per_frame(args, worker, ext)


def _cmd_directions(args) -> int:
    def worker(seq, frame_index, params, out: Path):
        dmap = propagation.propagate_directions(seq, frame_index, params)
        sequence_io.write_direction_map(
            dmap, out / _map_name(seq.sequence_id, frame_index, "pfm")
        )
        return dmap.diagnostics

    return _run_per_frame(args, worker, "pfm")


def _cmd_eval_expansion(args) -> int:
    pred = sequence_io.read_heatmap(args.pred)
    gt = sequence_io.read_heatmap(args.gt)
    report = evaluation.expansion_metrics(pred > args.threshold, gt > 0)
    _write_report(report, args.out, args.format)
    return 0


def _cmd_eval_map(args) -> int:
    pairs = [
        (sequence_io.read_heatmap(s), sequence_io.read_heatmap(g) > 0)
        for s, g in args.pair
    ]
    reports = [
        evaluation.expansion_metrics(scores > args.threshold, gt)
        for scores, gt in pairs
    ]
    mean = lambda name: float(np.mean([getattr(r, name) for r in reports]))
    report = evaluation.MetricsReport(
        pred_total=mean("pred_total"),
        pred_valid_tp=mean("pred_valid_tp"),
        missing_fn=mean("missing_fn"),
        expansion=mean("expansion"),
        map=evaluation.mean_ap(pairs),
    )
    _write_report(report, args.out, args.format)
    return 0


def _cmd_eval_kl(args) -> int:
    pred = sequence_io.read_heatmap(args.pred)
    ref = sequence_io.read_heatmap(args.ref)
    sem = sequence_io.read_heatmap(args.semantic, raw=True)
    n_classes = int(sem.max()) + 1
    pred_locs = evaluation.sample_locations(
        pred, args.samples, seed=args.seed, downsample=args.downsample
    )
    ref_locs = evaluation.sample_locations(
        ref, args.samples, seed=args.seed + 1, downsample=args.downsample
    )
    hist_pred = evaluation.semantic_histogram(
        pred_locs, sem, window=args.window, n_classes=n_classes
    )
    hist_ref = evaluation.semantic_histogram(
        ref_locs, sem, window=args.window, n_classes=n_classes
    )
    kl = evaluation.kl_divergence(hist_pred, hist_ref, epsilon=args.epsilon)
    base = evaluation.expansion_metrics(pred > args.threshold, ref > 0)
    report = dataclasses.replace(base, kl=kl)
    _write_report(report, args.out, args.format)
    return 0


def _cmd_render(args) -> int:
    from PIL import Image

    grid = sequence_io.read_heatmap(args.map)
    vmax = grid.max()
    q8 = np.zeros(grid.shape, np.uint8) if vmax == 0 else \
        np.round(grid * (255.0 / vmax)).astype(np.uint8)
    if args.background is None:
        Image.fromarray(q8, mode="L").save(args.out)
    else:
        bg = Image.open(args.background).convert("RGB")
        heat = Image.fromarray(q8, mode="L").resize(bg.size, Image.NEAREST)
        heat_np = np.asarray(heat, dtype=np.float64) / 255.0
        bg_np = np.asarray(bg, dtype=np.float64)
        out_np = bg_np.copy()
        # blend toward green proportionally to the heat value
        out_np[:, :, 1] = np.minimum(
            255.0, bg_np[:, :, 1] * (1 - 0.6 * heat_np) + 255.0 * 0.6 * heat_np
        )
        Image.fromarray(out_np.astype(np.uint8)).save(args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_losses_check(args) -> int:
    results = gradcheck.run_all_checks(trials=args.trials, seed=args.seed)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  trials={r.trials:<4d} "
              f"max_rel_err={r.max_error:.3e}  [{status}]")
        ok = ok and r.passed
    print(f"tolerance {gradcheck.TOLERANCE:g}: "
          + ("all gradients verified" if ok else "GRADIENT CHECK FAILED"))
    return 0 if ok else 1


_COMMANDS = {
    "synth": _cmd_synth,
    "propagate": _cmd_propagate,
    "directions": _cmd_directions,
    "eval-expansion": _cmd_eval_expansion,
    "eval-map": _cmd_eval_map,
    "eval-kl": _cmd_eval_kl,
    "render": _cmd_render,
    "losses-check": _cmd_losses_check,
}


def run(argv=None) -> int:
    level = os.environ.get("FOOTPRINT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (FootprintsError, OSError, ValueError, KeyError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception:  # pragma: no cover - defensive
        import traceback

        traceback.print_exc()
        return 2


def main() -> None:
    sys.exit(run())
