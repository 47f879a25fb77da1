"""Command-line front end.

Every subcommand reads one JSON pipeline config (``--config``, else the file
named by ``$INFOSCENE_CONFIG``, else built-in defaults) and honours
``--seed``, which overrides the config seed. Outputs are written atomically.

Exit codes: 0 success, 1 validation error (bad config, bad input, bad
arguments), 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .config import Thresholds, WindowConfig, from_mapping
from .errors import InvalidConfig, IoFailure, MissingFile, ValidationError
from .handselect import (
    SelectorHyperparams,
    SelectorModel,
    SelectorState,
    dumps_dataset,
    from_wire,
    loads_dataset,
    train,
)
from .infotheory import entropy_series, mi_series
from .interactions import interaction_timeline
from .metrics import evaluate_suite
from .plangen import emit_plan, serialize_plan
from .scenegraph import graph_sequence
from .segmentation import segment, segments_to_json
from .synth import (
    ScenarioConfig,
    gen_canonical_move,
    gen_letter_task,
    gen_pick_place,
    gen_selector_dataset,
    gen_suite,
    load_ground_truth,
    save_ground_truth,
)
from .trajectory import load_demonstration, save_demonstration

ENV_CONFIG = "INFOSCENE_CONFIG"
EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SuiteSettings:
    n_demos: int = 100
    n_frames: int = 10000
    n_objects: int = 5
    noise_sigma: float = 0.001

    def __post_init__(self):
        for name in ("n_demos", "n_frames", "n_objects"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvalidConfig(f"suite.{name} must be a positive integer")
        if not (isinstance(self.noise_sigma, (int, float)) and self.noise_sigma >= 0):
            raise InvalidConfig("suite.noise_sigma must be >= 0")


@dataclass(frozen=True)
class TrainingSettings:
    n_samples: int = 2000
    flip_rate: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_samples, bool) or not isinstance(self.n_samples, int) or self.n_samples < 1:
            raise InvalidConfig("training.n_samples must be a positive integer")
        if not (isinstance(self.flip_rate, (int, float)) and 0 <= self.flip_rate < 0.5):
            raise InvalidConfig("training.flip_rate must lie in [0, 0.5)")


@dataclass(frozen=True)
class PlanSettings:
    move_arm_after: int | None = 20
    pose_tolerance: float = 0.02

    def __post_init__(self):
        m = self.move_arm_after
        if m is not None and (isinstance(m, bool) or not isinstance(m, int) or m < 0):
            raise InvalidConfig("plan.move_arm_after must be null or an integer >= 0")
        if not (isinstance(self.pose_tolerance, (int, float)) and self.pose_tolerance > 0):
            raise InvalidConfig("plan.pose_tolerance must be positive")


@dataclass(frozen=True)
class Paths:
    input: str | None = None
    output: str | None = None

    def __post_init__(self):
        for name in ("input", "output"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, str):
                raise InvalidConfig(f"paths.{name} must be a string or null")


_SECTIONS = {
    "window": WindowConfig,
    "thresholds": Thresholds,
    "selector": SelectorHyperparams,
    "suite": SuiteSettings,
    "training": TrainingSettings,
    "plan": PlanSettings,
    "paths": Paths,
}


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    window: WindowConfig = field(default_factory=WindowConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    selector: SelectorHyperparams = field(default_factory=SelectorHyperparams)
    suite: SuiteSettings = field(default_factory=SuiteSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    plan: PlanSettings = field(default_factory=PlanSettings)
    paths: Paths = field(default_factory=Paths)

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfig("seed must be a non-negative integer")

    def to_dict(self):
        out = {"seed": self.seed}
        out.update({name: asdict(getattr(self, name)) for name in _SECTIONS})
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfig("config: expected a JSON object")
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        if unknown:
            raise InvalidConfig(f"config: unknown key(s) {', '.join(unknown)}")
        kw = {name: from_mapping(kind, data[name], name) for name, kind in _SECTIONS.items() if name in data}
        if "seed" in data:
            kw["seed"] = data["seed"]
        return cls(**kw)

    def with_seed(self, seed):
        return self if seed is None else replace(self, seed=seed)


def load_config(path=None) -> PipelineConfig:
    """Config from ``path``, else ``$INFOSCENE_CONFIG``, else the defaults."""
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return PipelineConfig()
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{p}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    return PipelineConfig.from_dict(data)


def stream_seed(seed, name) -> int:
    """Sub-seed of the named stream ``name``; stable across runs and platforms."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode("ascii"))])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# helpers


def _dump(obj):
    return json.dumps(obj, indent=1, ensure_ascii=True, allow_nan=False) + "\n"


def _read_json(path):
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"no such file: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def _load_selector(path, cfg):
    if path is None:
        return None
    return SelectorModel.from_dict(_read_json(path)), cfg.selector.kappa


def _truth_path(demo_path):
    p = Path(demo_path)
    return p.with_name(p.name[: -len(".jsonl")] + ".truth.json") if p.name.endswith(".jsonl") else None


def _demo_files(directory):
    d = Path(directory)
    if not d.is_dir():
        raise MissingFile(f"no such directory: {d}")
    return sorted(d.glob("*.jsonl"))


def _pipeline(demo, cfg, selector=None, task_name="demo"):
    timeline = interaction_timeline(demo, cfg.window, cfg.thresholds)
    segs = segment(timeline, demo, lead=cfg.window.phi)
    plan = emit_plan(segs, demo, selector=selector, task_name=task_name,
                     move_arm_after=cfg.plan.move_arm_after, pose_tolerance=cfg.plan.pose_tolerance)
    return timeline, segs, plan


def _out(args, cfg, default):
    out = args.out or cfg.paths.output or default
    return Path(out)


def _input(args, cfg, what):
    src = getattr(args, "input", None) or cfg.paths.input
    if not src:
        raise ValidationError(f"missing input {what} (positional argument or paths.input)")
    return src


# ---------------------------------------------------------------------------
# subcommands


def _generate(kind, cfg, letter="R"):
    """``[(demo_id, demo, truth), ...]`` for one scenario kind."""
    seed = stream_seed(cfg.seed, "synth")
    s = cfg.suite
    if kind == "suite":
        return gen_suite(s.n_demos, s.n_frames, s.n_objects, seed, s.noise_sigma, cfg.window, cfg.thresholds)
    out = []
    for i in range(s.n_demos):
        sc = ScenarioConfig(seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]),
                            n_objects=max(s.n_objects, 3 if kind == "fly-by" else 2), noise_sigma=s.noise_sigma)
        if kind == "canonical":
            demo, gt = gen_canonical_move(sc, cfg.window, cfg.thresholds)
        elif kind == "pick-place":
            demo, gt = gen_pick_place(sc, cfg.window, cfg.thresholds)
        elif kind == "fly-by":
            demo, gt = gen_pick_place(sc, cfg.window, cfg.thresholds, fly_by=True)
        else:
            demo, gt = gen_letter_task(sc, letter, cfg.window, cfg.thresholds)
        out.append((f"{kind}_{i:03d}", demo, gt))
    return out


def cmd_synth(args, cfg):
    out = _out(args, cfg, "synth")
    if args.kind == "selector":
        t = cfg.training
        data = gen_selector_dataset(t.n_samples, t.flip_rate, stream_seed(cfg.seed, "selector-data"))
        atomic_write_text(out / "selector_dataset.jsonl", dumps_dataset(data))
        print(f"wrote {len(data)} selector samples to {out}")
        return
    suite = _generate(args.kind, cfg, args.letter)
    for ident, demo, gt in suite:
        save_demonstration(demo, out / f"{ident}.jsonl")
        save_ground_truth(gt, out / f"{ident}.truth.json")
    print(f"wrote {len(suite)} demonstrations to {out}")


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([x if isinstance(x, (int, str)) else repr(float(x)) for x in r])
    return buf.getvalue()


def cmd_analyze(args, cfg):
    demo = load_demonstration(_input(args, cfg, "demonstration"))
    out = _out(args, cfg, "analysis")
    w = cfg.window
    centers = w.centers(demo.frame_count)
    tracks = list(demo.tracks)
    for t in tracks:
        cols = [entropy_series(t.positions[:, a], w).values for a in range(3)]
        atomic_write_text(out / f"entropy_{t.id}.csv",
                          _csv(("center_frame", "h_x", "h_y", "h_z"), zip(centers.tolist(), *cols)))
    n = 0
    for i, a in enumerate(tracks):
        for b in tracks[i + 1:]:
            if a.is_hand and b.is_hand:
                continue
            cols = [mi_series(a.positions[:, k], b.positions[:, k], w).values for k in range(3)]
            total = cols[0] + cols[1] + cols[2]
            atomic_write_text(out / f"mi_{a.id}__{b.id}.csv",
                              _csv(("center_frame", "mi_x", "mi_y", "mi_z", "mi"),
                                   zip(centers.tolist(), *cols, total)))
            n += 1
    print(f"wrote {len(tracks)} entropy and {n} mutual-information tables to {out}")


def cmd_graph(args, cfg):
    demo = load_demonstration(_input(args, cfg, "demonstration"))
    timeline = interaction_timeline(demo, cfg.window, cfg.thresholds)
    out = _out(args, cfg, "graph.json")
    atomic_write_text(out, graph_sequence(demo, timeline, cfg.window).to_json())
    print(f"wrote {out}")


def cmd_segment(args, cfg):
    demo = load_demonstration(_input(args, cfg, "demonstration"))
    _, segs, _ = _pipeline(demo, cfg)
    out = _out(args, cfg, "segments.json")
    atomic_write_text(out, segments_to_json(segs))
    print(f"wrote {out}")


def _labels_from(path):
    """Selector labels from a JSONL dataset, a ground-truth sidecar or a directory of sidecars."""
    p = Path(path)
    if p.suffix == ".jsonl":
        if not p.is_file():
            raise MissingFile(f"no such file: {p}")
        try:
            return loads_dataset(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(f"cannot read {p}: {exc}") from exc
    files = sorted(p.glob("*.truth.json")) if p.is_dir() else [p]
    labels = []
    for f in files:
        d = _read_json(f)
        try:
            rows = d["selector_labels"]
            labels += [(SelectorState(*(float(v) for v in r["state"])), from_wire(r["expert"])) for r in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{f}: malformed selector_labels ({exc})") from None
    return labels


def cmd_train_selector(args, cfg):
    hp = cfg.selector
    hp = SelectorHyperparams(**{**hp.to_dict(), "seed": stream_seed(cfg.seed, "selector-init")})
    if args.labels:
        data = _labels_from(args.labels)
    else:
        t = cfg.training
        data = gen_selector_dataset(t.n_samples, t.flip_rate, stream_seed(cfg.seed, "selector-data"))
    model = train(data, hp)
    out = _out(args, cfg, "selector.json")
    atomic_write_text(out, model.to_json(hp))
    print(f"trained on {len(data)} samples; wrote {out}")


def cmd_plan(args, cfg):
    demo = load_demonstration(_input(args, cfg, "demonstration"))
    _, _, plan = _pipeline(demo, cfg, _load_selector(args.model, cfg), task_name=args.task_name)
    out = _out(args, cfg, "plan.json")
    atomic_write_text(out, serialize_plan(plan))
    print(f"wrote {out}")


def cmd_run(args, cfg):
    src = _input(args, cfg, "demonstration")
    demo = load_demonstration(src)
    timeline, segs, plan = _pipeline(demo, cfg, _load_selector(args.model, cfg), task_name=args.task_name)
    out = _out(args, cfg, "run")
    atomic_write_text(out / "timeline.json", timeline.to_json())
    atomic_write_text(out / "graph.json", graph_sequence(demo, timeline, cfg.window).to_json())
    atomic_write_text(out / "segments.json", segments_to_json(segs))
    atomic_write_text(out / "plan.json", serialize_plan(plan))
    print(f"{len(plan.nodes)} plan nodes: " + ", ".join(f"{n.action}({n.hand})" for n in plan.nodes))


def cmd_eval(args, cfg):
    src = getattr(args, "input", None) or cfg.paths.input
    if src:
        suite = []
        for f in _demo_files(src):
            truth = _truth_path(f)
            if truth is None or not truth.is_file():
                raise MissingFile(f"no ground-truth sidecar for {f}")
            demo = load_demonstration(f)
            suite.append((f.name[: -len(".jsonl")], demo, load_ground_truth(truth, demo, cfg.window)))
    else:
        suite = _generate("suite", cfg)
    report = evaluate_suite(suite, cfg.window, cfg.thresholds, _load_selector(args.model, cfg))
    out = _out(args, cfg, "report.json")
    atomic_write_text(out, report.to_json())
    if args.csv:
        atomic_write_text(args.csv, report.to_csv())
    agg = report.aggregates
    print(" ".join(f"{k}={v['mean']:.4f}" for k, v in agg.items()))


def cmd_config(args, cfg):
    shown = PipelineConfig() if args.print_defaults else cfg
    sys.stdout.write(_dump(shown.to_dict()))


# ---------------------------------------------------------------------------
# argument parsing


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"pipeline config JSON (default: ${ENV_CONFIG} or built-ins)")
    common.add_argument("--seed", type=int, help="override the config seed")

    p = _Parser(prog="infoscene", description="Demonstration analysis: interactions, scene graphs, "
                                                "segments and behavior-tree plans.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", parents=[common], help="generate synthetic demonstrations + ground truth")
    s.add_argument("--kind", choices=("suite", "canonical", "pick-place", "fly-by", "letter", "selector"), default="suite")
    s.add_argument("--letter", default="R")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_synth)

    for name, fn, what, helptext in (
        ("analyze", cmd_analyze, "output directory", "entropy / mutual-information CSV tables"),
        ("graph", cmd_graph, "output JSON", "keyframe scene graphs"),
        ("segment", cmd_segment, "output JSON", "task-primitive segments"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("input", nargs="?", help="demonstration JSONL")
        s.add_argument("--out", help=what)
        s.set_defaults(func=fn)

    s = sub.add_parser("train-selector", parents=[common], help="train the hand selector")
    s.add_argument("--labels", help="JSONL dataset, ground-truth sidecar or directory of sidecars "
                                       "(default: generated data)")
    s.add_argument("--out", help="model JSON")
    s.set_defaults(func=cmd_train_selector)

    for name, fn, what, helptext in (
        ("plan", cmd_plan, "output JSON", "behavior-tree plan"),
        ("run", cmd_run, "output directory", "end to end: timeline, graphs, segments, plan"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("input", nargs="?", help="demonstration JSONL")
        s.add_argument("--model", help="selector model JSON (default: contralateral prior only)")
        s.add_argument("--task-name", default="demo")
        s.add_argument("--out", help=what)
        s.set_defaults(func=fn)

    s = sub.add_parser("eval", parents=[common], help="evaluate a suite against its ground truth")
    s.add_argument("input", nargs="?", help="directory written by `synth` (default: generate the suite)")
    s.add_argument("--model", help="selector model JSON")
    s.add_argument("--out", help="report JSON")
    s.add_argument("--csv", help="also write the per-demo records as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("config", parents=[common], help="show the effective or default config")
    s.add_argument("--print-defaults", action="store_true")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config).with_seed(args.seed)
        args.func(args, cfg)
    except _UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_VALIDATION
    except IoFailure as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
