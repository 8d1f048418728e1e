"""The ``skillsight`` command line.

Subcommands: synth, train-teacher, train-student, eval, analyze, power.
Every run writes ``run.json`` (resolved config, seed, library versions,
wall time) beside its outputs so results can be reproduced bit-identically
in single-worker mode. Exit codes: 0 success, 1 runtime failure, 2 invalid
configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path

from .errors import ConfigError, SkillSightError


def _versions() -> dict:
    import numpy
    import torch

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "torch": torch.__version__,
        "skillsight": __version__,
    }


def _write_run_json(out_dir: Path, subcommand: str, argv: list[str], config: dict, seed: int | None, t0: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "subcommand": subcommand,
        "argv": argv,
        "config": config,
        "seed": seed,
        "versions": _versions(),
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    with open(out_dir / "run.json", "w") as f:
        json.dump(payload, f, indent=1, default=str)
        f.write("\n")


def _cmd_synth(args, argv) -> int:
    from .synthdata import SynthTaskSpec, generate_dataset

    t0 = time.monotonic()
    spec = SynthTaskSpec(
        kind=args.task,
        n_recordings=args.n,
        k_classes=args.k_classes,
        seed=args.seed,
        duration_s=args.duration,
        with_frames=not args.no_frames,
    )
    out = Path(args.out)
    manifest = generate_dataset(spec, out)
    _write_run_json(out, "synth", argv, dataclasses.asdict(spec), args.seed, t0)
    print(f"wrote {len(manifest['recordings'])} recordings to {out}")
    return 0


def _resolved_teacher_config(raw: dict, recordings) -> "TeacherConfig":
    from .config import build_dataclass
    from .teacher import TeacherConfig

    section = dict(raw.get("teacher", {}))
    if "k_classes" not in section:
        section["k_classes"] = max(r.k_classes for r in recordings)
    cfg = build_dataclass(TeacherConfig, section)
    if "seed" in raw and "seed" not in section:
        cfg.seed = raw["seed"]
    return cfg


def _cmd_train_teacher(args, argv) -> int:
    from .config import load_config_file
    from .gaze_core import load_dataset
    from .training import train_teacher

    t0 = time.monotonic()
    raw = load_config_file(args.config)
    recordings = load_dataset(args.data)
    cfg = _resolved_teacher_config(raw, recordings)
    if args.seed is not None:
        cfg.seed = args.seed
    result = train_teacher(
        recordings, cfg, args.out, n_clips=raw.get("n_clips", args.n_clips)
    )
    _write_run_json(Path(args.out), "train-teacher", argv, dataclasses.asdict(cfg), cfg.seed, t0)
    print(
        f"best val acc {result.best_val_acc:.3f} at epoch {result.best_epoch}; "
        f"checkpoint: {result.checkpoint_path}"
    )
    return 0


def _cmd_train_student(args, argv) -> int:
    from .config import build_dataclass, load_config_file
    from .gaze_core import load_dataset
    from .student import StudentConfig
    from .training import train_student

    t0 = time.monotonic()
    raw = load_config_file(args.config)
    recordings = load_dataset(args.data)
    section = dict(raw.get("student", {}))
    if "k_classes" not in section:
        section["k_classes"] = max(r.k_classes for r in recordings)
    if "n_subtasks" not in section:
        section["n_subtasks"] = len({r.subtask for r in recordings})
    cfg = build_dataclass(StudentConfig, section)
    if "seed" in raw and "seed" not in section:
        cfg.seed = raw["seed"]
    if args.seed is not None:
        cfg.seed = args.seed
    if args.no_distill:
        cfg.lambda_dis = 0.0
    if args.no_action:
        cfg.lambda_act = 0.0
    result = train_student(
        recordings,
        cfg,
        args.out,
        teacher_ckpt=args.teacher,
        cache_dir=args.cache,
        n_clips=raw.get("n_clips", args.n_clips),
    )
    _write_run_json(Path(args.out), "train-student", argv, dataclasses.asdict(cfg), cfg.seed, t0)
    print(
        f"best val acc {result.best_val_acc:.3f} at epoch {result.best_epoch}; "
        f"checkpoint: {result.checkpoint_path}"
    )
    return 0


def _load_model(checkpoint: str):
    from .training import (
        build_student_from_checkpoint,
        build_teacher_from_checkpoint,
        load_checkpoint,
    )

    ckpt = load_checkpoint(checkpoint)
    if ckpt.get("kind") == "teacher":
        return build_teacher_from_checkpoint(ckpt)
    return build_student_from_checkpoint(ckpt)


def _cmd_eval(args, argv) -> int:
    from .gaze_core import load_dataset
    from .training import evaluate

    t0 = time.monotonic()
    recordings = load_dataset(args.data, split=args.split)
    model = _load_model(args.checkpoint)
    report = evaluate(model, recordings, n_clips=args.n_clips)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval.json", "w") as f:
        json.dump(report.to_dict(), f, indent=1)
        f.write("\n")
    _write_run_json(out, "eval", argv, {"checkpoint": args.checkpoint, "split": args.split}, None, t0)
    print(json.dumps({"overall_acc": report.overall_acc, "majority": report.majority["overall"]}))
    return 0


def _cmd_analyze(args, argv) -> int:
    from .analysis import group_report, write_report
    from .gaze_core import load_dataset

    t0 = time.monotonic()
    recordings = load_dataset(args.data, split=args.split)
    roi_spec = None
    if args.roi_spec:
        with open(args.roi_spec) as f:
            roi_spec = json.load(f)

    if args.group_by == "gt":
        labels = [r.skill for r in recordings]
    else:
        if not args.checkpoint:
            raise ConfigError("--group-by pred requires --checkpoint")
        from .training import evaluate

        model = _load_model(args.checkpoint)
        report = evaluate(model, recordings, n_clips=args.n_clips)
        labels = [report.predictions[r.id] for r in recordings]

    stats = group_report(
        recordings,
        labels,
        roi_spec=roi_spec,
        dispersion_deg=args.dispersion,
        min_fixation_s=args.min_fixation,
    )
    out = Path(args.out)
    write_report(stats, out)
    _write_run_json(
        out,
        "analyze",
        argv,
        {"group_by": args.group_by, "roi_spec": roi_spec or {}},
        None,
        t0,
    )
    print(f"wrote report.json and plots to {out}")
    return 0


def _cmd_power(args, argv) -> int:
    from .config import build_dataclass, load_config_file
    from .power import (
        PowerConstants,
        PowerProfile,
        count_macs,
        estimate_bytes,
        power_report,
        read_arch_file,
        student_arch,
        timesformer_arch,
        write_power_report,
    )

    t0 = time.monotonic()
    raw = load_config_file(args.config)
    consts = build_dataclass(PowerConstants, raw.get("power")) if raw.get("power") else PowerConstants()

    if args.arch:
        arch = read_arch_file(args.arch)
        name = Path(args.arch).stem
    elif args.preset == "student-full":
        arch = student_arch()
        name = "student-full"
    elif args.preset == "timesformer":
        arch = timesformer_arch()
        name = "timesformer"
    else:
        raise ConfigError("give --arch FILE or --preset {student-full,timesformer}")

    sensors = {}
    if args.sensors:
        for item in args.sensors.split(","):
            name_duty = item.split("=")
            duty = float(name_duty[1]) if len(name_duty) > 1 else 1.0
            sensors[name_duty[0]] = duty
    profile = PowerProfile(
        macs_n=count_macs(arch),
        bytes_b=estimate_bytes(arch),
        interval_t_s=args.interval,
        sensors=sensors,
    )
    report = power_report([(name, profile, args.accuracy)], consts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_power_report(report, out, out.with_suffix(".csv"))
    _write_run_json(
        out.parent,
        "power",
        argv,
        {"sensors": sensors, "interval": args.interval},
        None,
        t0,
    )
    print(json.dumps(report["rows"][0], indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skillsight")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--task", choices=["gaze-separable", "visually-separable", "distillation"], required=True)
    p.add_argument("--n", type=int, default=50, help="recordings per class")
    p.add_argument("--k-classes", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=40.0)
    p.add_argument("--no-frames", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-teacher", help="train the video+gaze teacher")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-clips", type=int, default=10)
    p.set_defaults(func=_cmd_train_teacher)

    p = sub.add_parser("train-student", help="distill the gaze-only student")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--teacher", default=None, help="teacher checkpoint path")
    p.add_argument("--config", default=None)
    p.add_argument("--cache", default=None, help="teacher-embedding cache dir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-clips", type=int, default=10)
    p.add_argument("--no-distill", action="store_true")
    p.add_argument("--no-action", action="store_true")
    p.set_defaults(func=_cmd_train_student)

    p = sub.add_parser("eval", help="recording-level evaluation")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--n-clips", type=int, default=10)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("analyze", help="gaze-behavior statistics report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--roi-spec", default=None, help="JSON file of named g2d rects")
    p.add_argument("--group-by", choices=["gt", "pred"], default="gt")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--n-clips", type=int, default=10)
    p.add_argument("--dispersion", type=float, default=1.5)
    p.add_argument("--min-fixation", type=float, default=0.1)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("power", help="analytic power estimate")
    p.add_argument("--arch", default=None, help="architecture JSON file")
    p.add_argument("--preset", choices=["student-full", "timesformer"], default=None)
    p.add_argument("--sensors", default="", help="e.g. 'eye' or 'rgb,imu=0.5'")
    p.add_argument("--interval", type=float, default=8.0)
    p.add_argument("--accuracy", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_power)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except SkillSightError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # console_scripts target
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
