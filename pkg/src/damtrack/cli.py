"""Command-line interface.

Subcommands: ``track`` (trace replay, closed-loop scenario, or external
bridge), ``eval`` (quality/accuracy/robustness, AUC, AO), ``ablate`` (the
policy-variant grid), ``sweep`` (threshold sensitivity curves), ``rt``
(real-time replay) and ``distill`` (distractor-presence flags).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
All outputs are line-delimited JSON with a self-describing header; given
the same inputs, configuration and seed, outputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from .config import ABLATION_VARIANTS, RunConfig, config_from_dict, load_config, make_header
from .distill import frame_has_distractor, pixel_scores, rasterize_box, read_features, sequence_selected
from .masks import BinaryMask, rle_decode
from .metrics import aggregate, evaluate_sequence, failed_frames
from .protocol import ProcessPredictor, ProtocolError
from .replay import RecordingPredictor, ReplayPredictor, TraceError, read_trace, write_trace
from .results import read_result, write_jsonl, write_result
from .simulate import BlobPredictor, BlobScenario, canonical_crossing_scenario, read_scenario, scenario_suite
from .tracker import TrackerError, rt_replay, run_sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_METRIC_ALIASES = {
    "q": "quality",
    "a": "accuracy",
    "r": "robustness",
    "quality": "quality",
    "accuracy": "accuracy",
    "robustness": "robustness",
    "auc": "auc",
    "ao": "ao",
}

_SWEEP_PARAMS = ("theta_anc", "theta_iou", "theta_area")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--variant", choices=ABLATION_VARIANTS)
    p.add_argument("--delta", type=int)
    p.add_argument("--theta-anc", dest="theta_anc", type=float)
    p.add_argument("--theta-iou", dest="theta_iou", type=float)
    p.add_argument("--theta-area", dest="theta_area", type=float)
    p.add_argument("--theta-m", dest="theta_m", type=int)
    p.add_argument("--n-dam", dest="n_dam", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--success-threshold", dest="success_threshold", type=float)
    p.add_argument("--auc-thresholds", dest="auc_thresholds", type=int)
    p.add_argument("--ratio-threshold", dest="ratio_threshold", type=float)
    p.add_argument("--frame-fraction", dest="frame_fraction", type=float)


_CONFIG_FIELDS = (
    "variant",
    "delta",
    "theta_anc",
    "theta_iou",
    "theta_area",
    "theta_m",
    "n_dam",
    "seed",
    "workers",
    "success_threshold",
    "auc_thresholds",
    "ratio_threshold",
    "frame_fraction",
    "use_distance",
)


def _effective_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {
        name: getattr(args, name)
        for name in _CONFIG_FIELDS
        if getattr(args, name, None) is not None
    }
    return config_from_dict(overrides, cfg)


def _scenario_by_name(name_or_path: str) -> list[BlobScenario]:
    if name_or_path == "crossing":
        return [canonical_crossing_scenario()]
    if name_or_path == "suite":
        return scenario_suite()
    return [read_scenario(name_or_path)]


class _Input:
    """One evaluable sequence: a predictor factory plus ground truth."""

    def __init__(self, name: str, kind: str, payload) -> None:
        self.name = name
        self.kind = kind
        self.payload = payload

    def predictor(self):
        if self.kind == "scenario":
            return BlobPredictor(self.payload)
        return ReplayPredictor(self.payload)

    def init_mask(self) -> BinaryMask:
        if self.kind == "scenario":
            return self.payload.init_mask()
        return self.payload.init_mask

    def gt_masks(self) -> list[Optional[BinaryMask]]:
        if self.kind == "scenario":
            return self.payload.gt_masks()
        return self.payload.gt_masks()

    def gt_boxes(self):
        if self.kind == "scenario":
            return None
        boxes = self.payload.gt_boxes()
        return boxes if any(b is not None for b in boxes) else None


def _gather_inputs(args) -> list[_Input]:
    inputs: list[_Input] = []
    for spec in getattr(args, "scenario", None) or []:
        for sc in _scenario_by_name(spec):
            inputs.append(_Input(sc.name, "scenario", sc))
    for path in getattr(args, "trace", None) or []:
        inputs.append(_Input(path, "trace", read_trace(path)))
    if not inputs:
        raise UsageError("provide at least one --scenario or --trace input")
    return inputs


def _require_gt(inp: _Input) -> list[BinaryMask]:
    gts = inp.gt_masks()
    missing = [i + 1 for i, g in enumerate(gts) if g is None]
    if missing:
        raise ValueError(f"{inp.name}: ground truth missing at frames {missing[:5]}")
    return gts  # type: ignore[return-value]


def _run_input(inp: _Input, cfg: RunConfig, variant: str):
    predictor = inp.predictor()
    return run_sequence(
        predictor, inp.init_mask(), cfg.policy_config(variant), cfg.bank_config(variant)
    )


def _pool_map(workers: int, fn, jobs: Sequence):
    """Run jobs (possibly in parallel) but keep the input order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_track(args) -> int:
    cfg = _effective_config(args)
    sources = [bool(args.trace), bool(args.scenario), bool(args.bridge_cmd)]
    if sum(sources) != 1:
        raise UsageError("choose exactly one of --trace, --scenario, --bridge-cmd")

    export_gt_masks = None
    bridge = None
    try:
        if args.trace:
            trace = read_trace(args.trace)
            predictor = ReplayPredictor(trace)
            init_mask = trace.init_mask
            source = {"kind": "trace", "path": args.trace}
            export_gt_masks = trace.gt_masks()
        elif args.scenario:
            scenarios = _scenario_by_name(args.scenario)
            if len(scenarios) != 1:
                raise UsageError("track runs a single scenario; use ablate for the suite")
            sc = scenarios[0]
            predictor = BlobPredictor(sc)
            init_mask = sc.init_mask()
            source = {"kind": "scenario", "name": sc.name}
            export_gt_masks = sc.gt_masks()
        else:
            if args.frames is None or args.init_mask is None:
                raise UsageError("--bridge-cmd requires --frames and --init-mask")
            with open(args.init_mask, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
            init_mask = rle_decode(int(obj["width"]), int(obj["height"]), obj["runs"])
            bridge = ProcessPredictor(
                shlex.split(args.bridge_cmd),
                init_mask.width,
                init_mask.height,
                args.frames,
                init_mask,
                config=cfg.to_json(),
            )
            predictor = bridge
            source = {"kind": "bridge", "command": args.bridge_cmd, "frames": args.frames}

        recorder = None
        if args.export_trace:
            recorder = RecordingPredictor(predictor)
            predictor = recorder

        result = run_sequence(predictor, init_mask, cfg.policy_config(), cfg.bank_config())
        header = make_header("track", cfg, source=source)
        write_result(args.out, header, result)
        if recorder is not None:
            write_trace(args.export_trace, recorder.to_trace(init_mask, export_gt_masks))
    finally:
        if bridge is not None:
            bridge.close()
    return EXIT_OK


def _load_gt_source(spec: str):
    """A gt argument is a builtin scenario name, a scenario file, or a trace."""
    if spec in ("crossing", "suite"):
        scenarios = _scenario_by_name(spec)
        if len(scenarios) != 1:
            raise UsageError("the suite cannot serve as a single gt source")
        return _Input(scenarios[0].name, "scenario", scenarios[0])
    with open(spec, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict) and obj.get("type") == "scenario":
            from .simulate import scenario_from_json

            return _Input(spec, "scenario", scenario_from_json(obj))
    except json.JSONDecodeError:
        pass
    import io

    return _Input(spec, "trace", read_trace(io.StringIO(text)))


def _parse_metrics(spec: str) -> list[str]:
    names = [s.strip().lower() for s in spec.split(",") if s.strip()]
    if not names:
        raise UsageError("metric set must not be empty")
    out = []
    for n in names:
        if n not in _METRIC_ALIASES:
            raise UsageError(f"unknown metric {n!r}")
        canonical = _METRIC_ALIASES[n]
        if canonical not in out:
            out.append(canonical)
    return out


def cmd_eval(args) -> int:
    cfg = _effective_config(args)
    metrics = _parse_metrics(args.metrics)
    if len(args.results) != len(args.gt):
        raise UsageError("--results and --gt must be given the same number of times")

    def one(pair):
        res_path, gt_spec = pair
        res = read_result(res_path)
        preds = res.masks()[1:]
        gt_inp = _load_gt_source(gt_spec)
        gts = _require_gt(gt_inp)
        if len(preds) != len(gts):
            raise ValueError(
                f"{res_path}: {len(preds)} predicted frames vs {len(gts)} gt frames"
            )
        summary = evaluate_sequence(
            preds,
            gts,
            gt_boxes=gt_inp.gt_boxes(),
            success_threshold=cfg.success_threshold,
            num_thresholds=cfg.auc_thresholds,
        )
        return res_path, summary

    evaluated = _pool_map(cfg.workers, one, list(zip(args.results, args.gt)))

    rows = []
    summaries = []
    for name, summary in evaluated:
        summaries.append(summary)
        row = {"type": "sequence", "name": name, "frames": summary.frames_evaluated}
        for m in metrics:
            row[m] = getattr(summary, m)
        rows.append(row)
    agg = aggregate(summaries)
    agg_row = {"type": "aggregate", "sequences": len(summaries), "frames": agg.frames_evaluated}
    for m in metrics:
        agg_row[m] = getattr(agg, m)
    rows.append(agg_row)
    if args.ar_table:
        for name, summary in evaluated:
            rows.append(
                {
                    "type": "ar",
                    "name": name,
                    "accuracy": summary.accuracy,
                    "robustness": summary.robustness,
                    "quality": summary.quality,
                }
            )
    write_jsonl(args.out, make_header("eval", cfg, metrics=metrics), rows)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _effective_config(args)
    inputs = _gather_inputs(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    if not variants:
        raise UsageError("variant list must not be empty")
    for v in variants:
        if v not in ABLATION_VARIANTS:
            raise UsageError(f"unknown variant {v!r}")

    jobs = [(v, inp) for v in variants for inp in inputs]

    def one(job):
        variant, inp = job
        gts = _require_gt(inp)
        result = _run_input(inp, cfg, variant)
        preds = result.masks()[1:]
        summary = evaluate_sequence(
            preds,
            gts,
            gt_boxes=inp.gt_boxes(),
            success_threshold=cfg.success_threshold,
            num_thresholds=cfg.auc_thresholds,
        )
        return summary, failed_frames(preds, gts, cfg.success_threshold)

    outcomes = _pool_map(cfg.workers, one, jobs)

    rows = []
    per_variant = {v: [] for v in variants}
    for (variant, _), outcome in zip(jobs, outcomes):
        per_variant[variant].append(outcome)
    for variant in variants:
        summaries = [s for s, _ in per_variant[variant]]
        fails = sum(f for _, f in per_variant[variant])
        agg = aggregate(summaries)
        rows.append(
            {
                "type": "row",
                "variant": variant,
                "quality": agg.quality,
                "accuracy": agg.accuracy,
                "robustness": agg.robustness,
                "failed_frames": fails,
                "sequences": len(summaries),
            }
        )
    write_jsonl(args.out, make_header("ablate", cfg, inputs=[i.name for i in inputs]), rows)
    return EXIT_OK


def _parse_range(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError("range must be start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad range {spec!r}: {exc}") from exc
    if step <= 0:
        raise UsageError("range step must be positive")
    if stop < start:
        raise UsageError("range stop must be >= start")
    count = int((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 10) for i in range(count)]


def cmd_sweep(args) -> int:
    cfg = _effective_config(args)
    if args.param not in _SWEEP_PARAMS:
        raise UsageError(f"sweep param must be one of {', '.join(_SWEEP_PARAMS)}")
    values = _parse_range(args.range)
    inputs = _gather_inputs(args)

    def one(value):
        swept = cfg.replace(**{args.param: value})
        summaries = []
        for inp in inputs:
            gts = _require_gt(inp)
            result = _run_input(inp, swept, swept.variant)
            preds = result.masks()[1:]
            summaries.append(
                evaluate_sequence(
                    preds,
                    gts,
                    gt_boxes=inp.gt_boxes(),
                    success_threshold=swept.success_threshold,
                    num_thresholds=swept.auc_thresholds,
                )
            )
        agg = aggregate(summaries)
        return {
            "type": "row",
            "param": args.param,
            "value": value,
            "quality": agg.quality,
            "ao": agg.ao,
        }

    rows = _pool_map(cfg.workers, one, values)
    write_jsonl(
        args.out,
        make_header("sweep", cfg, param=args.param, range=args.range, inputs=[i.name for i in inputs]),
        rows,
    )
    return EXIT_OK


def _parse_latencies(spec: str, count: int, seed: int) -> list[float]:
    kind, _, rest = spec.partition(":")
    if kind == "constant":
        try:
            value = float(rest)
        except ValueError as exc:
            raise UsageError(f"bad constant latency {rest!r}") from exc
        return [value] * count
    if kind == "list":
        with open(rest, "r", encoding="utf-8") as fh:
            values = [float(ln) for ln in fh if ln.strip()]
        if len(values) != count:
            raise ValueError(f"latency list has {len(values)} entries, expected {count}")
        return values
    if kind == "normal":
        try:
            mean, std = (float(v) for v in rest.split(","))
        except ValueError as exc:
            raise UsageError("normal latency model needs mean,std") from exc
        rng = np.random.default_rng(seed)
        return [max(0.0, float(v)) for v in rng.normal(mean, std, size=count)]
    raise UsageError("latency model must be constant:<ms>, list:<path>, or normal:<mean>,<std>")


def cmd_rt(args) -> int:
    cfg = _effective_config(args)
    trace = read_trace(args.trace)
    predictor = ReplayPredictor(trace)
    latencies = _parse_latencies(args.latency, predictor.num_frames - 1, cfg.seed)
    if args.fps < 0:
        raise UsageError("--fps must be non-negative (0 disables deadlines)")
    result = rt_replay(
        predictor, trace.init_mask, cfg.policy_config(), cfg.bank_config(), latencies, args.fps
    )
    header = make_header("rt", cfg, fps=args.fps, latency=args.latency, source=args.trace)
    write_result(args.out, header, result)
    return EXIT_OK


def cmd_distill(args) -> int:
    cfg = _effective_config(args)
    dcfg = cfg.distill_config()
    with open(args.manifest, "r", encoding="utf-8") as fh:
        entries = [json.loads(ln) for ln in fh if ln.strip()]
    if not entries:
        raise ValueError("empty distill manifest")

    def one(entry):
        features = read_features(entry["features"])
        if entry.get("gt_mask") is not None:
            gm = entry["gt_mask"]
            gt = rle_decode(int(gm["width"]), int(gm["height"]), gm["runs"])
        elif entry.get("gt_box") is not None:
            gt = rasterize_box(features.width, features.height, entry["gt_box"])
        else:
            raise ValueError(f"manifest entry for frame {entry.get('frame_index')} has no ground truth")
        scores = pixel_scores(features, gt, dcfg.use_distance)
        return frame_has_distractor(scores, gt, dcfg)

    flags = _pool_map(cfg.workers, one, entries)

    rows = []
    order: list[str] = []
    by_sequence: dict[str, list[bool]] = {}
    for entry, flag in zip(entries, flags):
        seq = str(entry.get("sequence", "default"))
        if seq not in by_sequence:
            by_sequence[seq] = []
            order.append(seq)
        by_sequence[seq].append(flag)
        rows.append(
            {
                "type": "frame",
                "sequence": seq,
                "frame_index": entry.get("frame_index"),
                "flag": flag,
            }
        )
    for seq in order:
        seq_flags = by_sequence[seq]
        rows.append(
            {
                "type": "sequence",
                "sequence": seq,
                "fraction": sum(seq_flags) / len(seq_flags),
                "selected": sequence_selected(seq_flags, dcfg),
            }
        )
    write_jsonl(args.out, make_header("distill", cfg), rows)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="damtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run one sequence and write a result file")
    p_track.add_argument("--trace")
    p_track.add_argument("--scenario", help="'crossing' or a scenario file")
    p_track.add_argument("--bridge-cmd", dest="bridge_cmd", help="external predictor command line")
    p_track.add_argument("--frames", type=int, help="frame count for bridge runs")
    p_track.add_argument("--init-mask", dest="init_mask", help="init mask JSON for bridge runs")
    p_track.add_argument("--export-trace", dest="export_trace")
    p_track.add_argument("--out", required=True)
    _add_config_flags(p_track)
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", help="evaluate result files against ground truth")
    p_eval.add_argument("--results", action="append", required=True)
    p_eval.add_argument("--gt", action="append", required=True, help="trace/scenario file or 'crossing'")
    p_eval.add_argument("--metrics", default="quality,accuracy,robustness,auc,ao")
    p_eval.add_argument("--ar-table", dest="ar_table", action="store_true")
    p_eval.add_argument("--out", required=True)
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="run the policy-variant grid")
    p_ablate.add_argument("--scenario", action="append", help="'crossing', 'suite', or a file")
    p_ablate.add_argument("--trace", action="append")
    p_ablate.add_argument("--variants", default=",".join(ABLATION_VARIANTS))
    p_ablate.add_argument("--out", required=True)
    _add_config_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_sweep = sub.add_parser("sweep", help="threshold sensitivity curve")
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--range", required=True, help="start:stop:step")
    p_sweep.add_argument("--scenario", action="append")
    p_sweep.add_argument("--trace", action="append")
    p_sweep.add_argument("--out", required=True)
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_rt = sub.add_parser("rt", help="real-time replay with frame skipping")
    p_rt.add_argument("--trace", required=True)
    p_rt.add_argument("--fps", type=float, required=True)
    p_rt.add_argument("--latency", required=True, help="constant:<ms> | list:<path> | normal:<mean>,<std>")
    p_rt.add_argument("--out", required=True)
    _add_config_flags(p_rt)
    p_rt.set_defaults(func=cmd_rt)

    p_dist = sub.add_parser("distill", help="distractor-presence criterion over feature maps")
    p_dist.add_argument("--manifest", required=True)
    p_dist.add_argument("--out", required=True)
    p_dist.add_argument("--use-distance", dest="use_distance", action="store_true", default=None)
    _add_config_flags(p_dist)
    p_dist.set_defaults(func=cmd_distill)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"damtrack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"damtrack: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TraceError, TrackerError, ProtocolError, OSError) as exc:
        print(f"damtrack: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
