"""Command-line entry point wiring every module into reproducible runs.

Commands: synth, construct, weights-dump, train, eval, ablate, sweep,
gradcheck, inspect. Every run prints its resolved configuration (seed
included) as key=value lines before any output, and all reports are plain
delimited text. Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from tmac.autodiff import NumericError
from tmac.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from tmac.data import (DataError, SyntheticSpec, generate_synthetic,
                       load_dataset, load_split, read_manifest, read_record)
from tmac.gradcheck import run_gradcheck
from tmac.graph import build_graph, validate_graph
from tmac.model import ModelConfig, count_params
from tmac.training import (AdamState, TrainConfig, evaluate, init_params,
                           prepare_events, run_ablation, run_sweep, train)
from tmac.validation import check_records
from tmac.weighting import VARIANTS, neighborhood_weights


class UsageError(Exception):
    """Bad invocation; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(key, value):
    print(f"{key}={value}")


def _print_config(args, skip=("func", "command")):
    _emit("command", args.command)
    for key in sorted(vars(args)):
        if key not in skip:
            _emit(key, getattr(args, key))


def _parse_ints(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as err:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from err


def _audio_base(text: str):
    # "" derives the spread; one value broadcasts to every class
    times = _parse_ints(text)
    if not times:
        return None
    return times[0] if len(times) == 1 else tuple(times)


def _train_config(args) -> TrainConfig:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    try:
        return TrainConfig(**{k: v for k, v in vars(args).items() if k in fields})
    except ValueError as err:
        raise UsageError(str(err)) from err


def _add_train_flags(sub):
    d = TrainConfig()
    sub.add_argument("--m_audio", type=int, default=d.m_audio,
                     help="intra-modal audio neighbors per node")
    sub.add_argument("--m_video", type=int, default=d.m_video,
                     help="intra-modal video neighbors per node")
    sub.add_argument("--m_cross", type=int, default=d.m_cross,
                     help="video neighbors per audio node")
    sub.add_argument("--layers", type=int, default=d.layers,
                     help="stacked graph layers")
    sub.add_argument("--hidden", type=int, default=d.hidden,
                     help="hidden embedding width")
    sub.add_argument("--gamma", type=float, default=d.gamma,
                     help="focal loss focusing exponent")
    sub.add_argument("--base_lr", "--lr", dest="base_lr", type=float,
                     default=d.base_lr, help="peak learning rate")
    sub.add_argument("--decay_factor", type=float, default=d.decay_factor,
                     help="lr multiplier per decay interval")
    sub.add_argument("--decay_interval", type=int, default=d.decay_interval,
                     help="iterations between lr decays")
    sub.add_argument("--warmup_iters", type=int, default=d.warmup_iters,
                     help="linear lr ramp length")
    sub.add_argument("--batch_size", type=int, default=d.batch_size,
                     help="event graphs per step")
    sub.add_argument("--max_iters", type=int, default=d.max_iters,
                     help="training iteration budget")
    sub.add_argument("--eval_interval", type=int, default=d.eval_interval,
                     help="iterations between evaluations")
    sub.add_argument("--patience", type=int, default=d.patience,
                     help="evaluations without improvement before stopping")
    sub.add_argument("--workers", type=int, default=d.workers,
                     help="parallel graph passes per batch (same results)")
    sub.add_argument("--seed", type=int, default=d.seed,
                     help="seed for init and batch order")
    sub.add_argument("--variant", choices=VARIANTS, default=d.variant,
                     help="temporal-weight ablation variant")


def _add_node_count_flags(sub):
    sub.add_argument("--n_audio", type=int, default=None,
                     help="padded audio node count (default: manifest value)")
    sub.add_argument("--n_video", type=int, default=None,
                     help="padded video node count (default: manifest value)")


def _model_config(manifest, records, args) -> ModelConfig:
    n_classes, audio_dim, video_dim = check_records(records)
    if n_classes != manifest.n_classes:
        raise DataError(f"records carry {n_classes} classes, manifest says "
                        f"{manifest.n_classes}")
    return ModelConfig(
        n_classes=n_classes, audio_dim=audio_dim, video_dim=video_dim,
        hidden=args.hidden, layers=args.layers,
        n_audio=args.n_audio if args.n_audio is not None else manifest.n_audio,
        n_video=args.n_video if args.n_video is not None else manifest.n_video)


def _splits_arg(sub, default="train"):
    sub.add_argument("--split", choices=("train", "eval", "test", "all"),
                     default=default, help="which manifest split to load")


def _load_records(manifest, split: str) -> list:
    if split == "all":
        dataset = load_dataset(manifest)
        return dataset["train"] + dataset["eval"] + dataset["test"]
    return load_split(manifest, split)


# ---- command handlers ------------------------------------------------------

def _cmd_synth(args) -> int:
    _print_config(args)
    try:
        spec = SyntheticSpec(
            n_classes=args.n_classes, events_per_class=args.events_per_class,
            duration_ms=args.duration_ms, audio_stride_ms=args.audio_stride_ms,
            video_stride_ms=args.video_stride_ms,
            class_lags_ms=tuple(_parse_ints(args.class_lags_ms)),
            class_audio_ms=_audio_base(args.class_audio_ms),
            audio_jitter_ms=args.audio_jitter_ms,
            burst_width_ms=args.burst_width_ms, burst_scale=args.burst_scale,
            noise_sigma=args.noise_sigma, seed=args.seed)
    except ValueError as err:
        raise UsageError(str(err)) from err
    manifest_path = generate_synthetic(spec, args.out)
    _emit("manifest", manifest_path)
    return 0


def _cmd_construct(args) -> int:
    _print_config(args)
    manifest = read_manifest(args.manifest)
    records = _load_records(manifest, args.split)
    degrees = {"audio": [], "video": [], "cross": []}
    truncated = False
    violations = []
    for rec in records:
        graph = build_graph(rec.audio_times, rec.audio_feat,
                            rec.video_times, rec.video_feat,
                            args.m_audio, args.m_video, args.m_cross)
        for problem in validate_graph(graph):
            violations.append(f"{rec.event_id}: {problem}")
        truncated = truncated or any(graph.m_truncated)
        degrees["audio"].extend(len(n.indices) for n in graph.audio_nbrs)
        degrees["video"].extend(len(n.indices) for n in graph.video_nbrs)
        degrees["cross"].extend(len(n.indices) for n in graph.cross_nbrs)
    if violations:
        raise DataError("; ".join(violations[:10]))
    _emit("events", len(records))
    for kind, values in degrees.items():
        arr = np.array(values)
        _emit(f"{kind}_degree_min", int(arr.min()))
        _emit(f"{kind}_degree_mean", float(arr.mean()))
        _emit(f"{kind}_degree_max", int(arr.max()))
    all_audio = np.concatenate([r.audio_times for r in records])
    all_video = np.concatenate([r.video_times for r in records])
    _emit("audio_time_min", int(all_audio.min()))
    _emit("audio_time_max", int(all_audio.max()))
    _emit("video_time_min", int(all_video.min()))
    _emit("video_time_max", int(all_video.max()))
    _emit("neighbor_count_truncated", str(truncated).lower())
    _emit("graphs_valid", len(records))
    return 0


def _cmd_weights_dump(args) -> int:
    _print_config(args)
    manifest = read_manifest(args.manifest)
    records = _load_records(manifest, args.split)
    if args.event is not None:
        records = [r for r in records if r.event_id == args.event]
        if not records:
            raise DataError(f"event {args.event!r} not in split {args.split!r}")
    print("# event\tkind\tdst\tsrc\tedge_time\tweight")
    for rec in records:
        graph = build_graph(rec.audio_times, rec.audio_feat,
                            rec.video_times, rec.video_feat,
                            args.m_audio, args.m_video, args.m_cross)
        blocks = (("audio", "intra", graph.audio_nbrs),
                  ("video", "intra", graph.video_nbrs),
                  ("cross", "cross", graph.cross_nbrs))
        for kind, weight_kind, nbrs in blocks:
            for dst, nbr in enumerate(nbrs):
                weights = neighborhood_weights(nbr.edge_times, weight_kind,
                                               args.variant)
                for src, t, w in zip(nbr.indices, nbr.edge_times, weights):
                    print(f"{rec.event_id}\t{kind}\t{dst}\t{src}\t{t}\t{float(w)!r}")
    return 0


def _history_lines(history) -> list:
    lines = ["# iteration\tloss\tmap\tauc"]
    for row in history:
        lines.append(f"{row['iteration']}\t{row['loss']!r}\t"
                     f"{row['map']!r}\t{row['auc']!r}")
    return lines


def _cmd_train(args) -> int:
    _print_config(args)
    config = _train_config(args)
    manifest = read_manifest(args.manifest)
    dataset = load_dataset(manifest)
    model_config = _model_config(manifest, dataset["train"] + dataset["eval"],
                                 args)
    result = train(dataset, model_config, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    history_path = out / "history.txt"
    history_path.write_text("\n".join(_history_lines(result.history)) + "\n",
                            encoding="utf-8")
    best_path = out / "best.ckpt"
    final_path = out / "final.ckpt"
    last_iteration = result.history[-1]["iteration"] if result.history else 0
    save_checkpoint(best_path, result.params, result.opt, config,
                    iteration=result.best_iteration, best_map=result.best_map,
                    rng_state=result.rng_state)
    save_checkpoint(final_path, result.final_params, result.opt, config,
                    iteration=last_iteration, best_map=result.best_map,
                    rng_state=result.rng_state)
    _emit("parameter_count", count_params(result.params))
    _emit("evaluations", len(result.history))
    _emit("best_iteration", result.best_iteration)
    _emit("best_map", repr(result.best_map))
    _emit("history_file", history_path)
    _emit("checkpoint_best", best_path)
    _emit("checkpoint_final", final_path)
    return 0


def _cmd_eval(args) -> int:
    _print_config(args)
    loaded = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args.manifest)
    records = _load_records(manifest, args.split)
    n_classes, audio_dim, video_dim = check_records(records)
    mc = loaded.model_config
    if (n_classes, audio_dim, video_dim) != (mc.n_classes, mc.audio_dim,
                                             mc.video_dim):
        raise DataError(
            f"records ({n_classes} classes, dims {audio_dim}/{video_dim}) do "
            f"not match checkpoint ({mc.n_classes} classes, dims "
            f"{mc.audio_dim}/{mc.video_dim})")
    events = prepare_events(records, mc, loaded.train_config)
    report = evaluate(loaded.params, events)
    _emit("events", len(records))
    _emit("map", repr(report.map))
    _emit("auc", repr(report.auc))
    for c in sorted(report.per_class_ap):
        _emit(f"class_{c}_ap", repr(report.per_class_ap[c]))
        _emit(f"class_{c}_auc", repr(report.per_class_auc[c]))
    _emit("excluded_classes", ",".join(str(c) for c in report.excluded))
    return 0


def _cmd_ablate(args) -> int:
    _print_config(args)
    config = _train_config(args)
    manifest = read_manifest(args.manifest)
    dataset = load_dataset(manifest)
    model_config = _model_config(
        manifest, dataset["train"] + dataset["eval"] + dataset["test"], args)
    seeds = _parse_ints(args.seeds)
    if not seeds:
        raise UsageError("--seeds must list at least one seed")
    rows = run_ablation(dataset, model_config, config, seeds)
    lines = ["# variant\tmap_mean\tmap_std\tauc_mean\tauc_std\tmaps"]
    for row in rows:
        maps = ",".join(repr(m) for m in row["maps"])
        lines.append(f"{row['variant']}\t{row['map_mean']!r}\t"
                     f"{row['map_std']!r}\t{row['auc_mean']!r}\t"
                     f"{row['auc_std']!r}\t{maps}")
    report = "\n".join(lines)
    print(report)
    if args.out:
        Path(args.out).write_text(report + "\n", encoding="utf-8")
        _emit("report_file", args.out)
    return 0


def _cmd_sweep(args) -> int:
    _print_config(args)
    config = _train_config(args)
    manifest = read_manifest(args.manifest)
    dataset = load_dataset(manifest)
    model_config = _model_config(
        manifest, dataset["train"] + dataset["eval"] + dataset["test"], args)
    seeds = _parse_ints(args.seeds)
    values = _parse_ints(args.values)
    if not seeds:
        raise UsageError("--seeds must list at least one seed")
    try:
        rows = run_sweep(dataset, model_config, config, args.param, values, seeds)
    except ValueError as err:
        raise UsageError(str(err)) from err
    lines = ["# parameter\tvalue\ttruncated\tmap_mean\tmap_std\tauc_mean\tauc_std"]
    for row in rows:
        lines.append(f"{row['parameter']}\t{row['value']}\t"
                     f"{str(row['truncated']).lower()}\t{row['map_mean']!r}\t"
                     f"{row['map_std']!r}\t{row['auc_mean']!r}\t"
                     f"{row['auc_std']!r}")
    report = "\n".join(lines)
    print(report)
    if args.out:
        Path(args.out).write_text(report + "\n", encoding="utf-8")
        _emit("report_file", args.out)
    return 0


def _cmd_gradcheck(args) -> int:
    _print_config(args)
    worst, checked = run_gradcheck(seed=args.seed, n_graphs=args.graphs,
                                   hidden=args.hidden, layers=args.layers)
    _emit("scalars_checked", checked)
    _emit("max_rel_err", repr(worst))
    _emit("tolerance", repr(args.tol))
    if worst > args.tol:
        _emit("status", "fail")
        raise NumericError(f"max relative error {worst} exceeds {args.tol}")
    _emit("status", "ok")
    return 0


def _cmd_inspect(args) -> int:
    _print_config(args)
    path = Path(args.path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    head = path.open("rb").read(4)
    if head == b"TMEV":
        rec = read_record(path)
        _emit("type", "record")
        _emit("event_id", rec.event_id)
        _emit("n_classes", rec.label.shape[0])
        _emit("positives", ",".join(str(i) for i in np.flatnonzero(rec.label)))
        _emit("audio_segments", rec.audio_times.shape[0])
        _emit("audio_dim", rec.audio_feat.shape[1])
        _emit("audio_time_range", f"{rec.audio_times[0]}..{rec.audio_times[-1]}")
        _emit("video_segments", rec.video_times.shape[0])
        _emit("video_dim", rec.video_feat.shape[1])
        _emit("video_time_range", f"{rec.video_times[0]}..{rec.video_times[-1]}")
        return 0
    if head == b"TMAC":
        loaded = load_checkpoint(path)
        _emit("type", "checkpoint")
        _emit("iteration", loaded.iteration)
        _emit("best_map", repr(loaded.best_map))
        _emit("adam_t", loaded.opt.t)
        _emit("parameter_count", count_params(loaded.params))
        for field in dataclasses.fields(ModelConfig):
            _emit(f"model.{field.name}", getattr(loaded.model_config, field.name))
        for field in dataclasses.fields(TrainConfig):
            _emit(f"train.{field.name}", getattr(loaded.train_config, field.name))
        return 0
    manifest = read_manifest(path)
    _emit("type", "manifest")
    _emit("n_classes", manifest.n_classes)
    _emit("n_audio", manifest.n_audio)
    _emit("n_video", manifest.n_video)
    for split in ("train", "eval", "test"):
        _emit(f"events_{split}", sum(1 for e in manifest.events if e[1] == split))
    return 0


# ---- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmac",
                     description=__doc__,
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name, func, help_text):
        p = subs.add_parser(name, help=help_text,
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = sub("synth", _cmd_synth, "generate the synthetic temporal dataset")
    d = SyntheticSpec()
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n_classes", type=int, default=d.n_classes,
                   help="number of event classes")
    p.add_argument("--events_per_class", type=int, default=d.events_per_class,
                   help="events generated per class")
    p.add_argument("--duration_ms", type=int, default=d.duration_ms,
                   help="clip length")
    p.add_argument("--audio_stride_ms", type=int, default=d.audio_stride_ms,
                   help="audio segment stride")
    p.add_argument("--video_stride_ms", type=int, default=d.video_stride_ms,
                   help="video segment stride")
    p.add_argument("--class_lags_ms", default=",".join(str(l) for l in d.class_lags_ms),
                   help="comma list, one video-burst lag per class; "
                        "pass as --class_lags_ms=-500,... for negatives")
    if d.class_audio_ms is None:
        base_default = ""
    elif len(set(d.class_audio_ms)) == 1:
        base_default = str(d.class_audio_ms[0])
    else:
        base_default = ",".join(str(t) for t in d.class_audio_ms)
    p.add_argument("--class_audio_ms", default=base_default,
                   help="comma list of audio-burst times, one per class; "
                        "a single value applies to every class; "
                        "empty = spread across the clip")
    p.add_argument("--audio_jitter_ms", type=int, default=d.audio_jitter_ms,
                   help="uniform grid-aligned offset added to both bursts")
    p.add_argument("--burst_width_ms", type=int, default=d.burst_width_ms,
                   help="burst half-support diameter")
    p.add_argument("--burst_scale", type=float, default=d.burst_scale,
                   help="burst vector norm")
    p.add_argument("--noise_sigma", type=float, default=d.noise_sigma,
                   help="background noise level")
    p.add_argument("--seed", type=int, default=d.seed, help="generator seed")

    p = sub("construct", _cmd_construct,
            "build and validate graphs, print degree/timestamp statistics")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    _splits_arg(p, default="all")
    dt = TrainConfig()
    p.add_argument("--m_audio", type=int, default=dt.m_audio,
                   help="intra-modal audio neighbors per node")
    p.add_argument("--m_video", type=int, default=dt.m_video,
                   help="intra-modal video neighbors per node")
    p.add_argument("--m_cross", type=int, default=dt.m_cross,
                   help="video neighbors per audio node")

    p = sub("weights-dump", _cmd_weights_dump,
            "emit per-edge temporal weights")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    _splits_arg(p, default="all")
    p.add_argument("--event", default=None, help="restrict to one event id")
    p.add_argument("--m_audio", type=int, default=dt.m_audio,
                   help="intra-modal audio neighbors per node")
    p.add_argument("--m_video", type=int, default=dt.m_video,
                   help="intra-modal video neighbors per node")
    p.add_argument("--m_cross", type=int, default=dt.m_cross,
                   help="video neighbors per audio node")
    p.add_argument("--variant", choices=VARIANTS, default="full",
                   help="temporal-weight ablation variant")

    p = sub("train", _cmd_train, "train on a manifest's train/eval splits")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--out", required=True, help="checkpoint/history directory")
    _add_train_flags(p)
    _add_node_count_flags(p)

    p = sub("eval", _cmd_eval, "evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True, help="checkpoint path")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    _splits_arg(p, default="test")

    p = sub("ablate", _cmd_ablate, "train all 4 temporal-weight variants")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--seeds", default="0,1,2,3,4",
                   help="comma list of training seeds")
    p.add_argument("--out", default=None, help="report file")
    _add_train_flags(p)
    _add_node_count_flags(p)

    p = sub("sweep", _cmd_sweep, "sweep a neighbor-count parameter")
    p.add_argument("--manifest", required=True, help="dataset manifest path")
    p.add_argument("--param", choices=("m_audio", "m_video", "m_cross"),
                   required=True, help="neighbor count to sweep")
    p.add_argument("--values", default="2,3,5,8,10",
                   help="comma list of neighbor counts")
    p.add_argument("--seeds", default="0", help="comma list of training seeds")
    p.add_argument("--out", default=None, help="report file")
    _add_train_flags(p)
    _add_node_count_flags(p)

    p = sub("gradcheck", _cmd_gradcheck,
            "finite-difference check of all analytic gradients")
    p.add_argument("--seed", type=int, default=7, help="graph generator seed")
    p.add_argument("--graphs", type=int, default=20,
                   help="random graphs to verify")
    p.add_argument("--hidden", type=int, default=8,
                   help="hidden width of the probe model")
    p.add_argument("--layers", type=int, default=2,
                   help="layer count of the probe model")
    p.add_argument("--tol", type=float, default=1e-4,
                   help="max relative error accepted")

    p = sub("inspect", _cmd_inspect,
            "summarize a record, checkpoint, or manifest file")
    p.add_argument("--path", required=True, help="file to summarize")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (DataError, CheckpointError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
