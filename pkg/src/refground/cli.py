"""Command-line interface: one-shot grounding, benchmarks, dialog
simulation, and the HTTP service.

Exit codes: 0 on success, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional, Sequence

from .errors import ConfigError, GroundingError
from .evaluation import (BenchConfig, EXHAUSTIVE_BASELINE, OBJECT_SPECIFIC,
                         run_benchmark, simulate_dialog)
from .jsonutil import stable_json
from .pipeline import EngineConfig, ground
from .scene import CorpusConfig, load_scene
from .scoring import MeteorConfig


def _parse_seeds(spec: str) -> range:
    """Parse an inclusive seed range "A..B" (or a single seed "A")."""
    try:
        if ".." in spec:
            lo_text, hi_text = spec.split("..", 1)
            lo, hi = int(lo_text), int(hi_text)
        else:
            lo = hi = int(spec)
    except ValueError:
        raise ConfigError(f"bad seed range '{spec}', expected A..B")
    if hi < lo:
        raise ConfigError(f"empty seed range '{spec}'")
    return range(lo, hi + 1)


def _dataclass_from(cls, data: dict, where: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    lists_to_tuples = {k: tuple(v) if isinstance(v, list) else v
                       for k, v in data.items()}
    try:
        return cls(**lists_to_tuples)
    except (TypeError, GroundingError) as exc:
        raise ConfigError(f"{where}: {exc}")


def load_bench_config(path: Optional[str]) -> BenchConfig:
    if path is None:
        return BenchConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")

    known = {"corpus", "engine", "duplicate_choices", "paraphrase_prob",
             "paraphrase_seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")

    corpus = _dataclass_from(CorpusConfig, data.get("corpus", {}), "config.corpus")
    engine_data = dict(data.get("engine", {}))
    meteor_data = engine_data.pop("meteor", None)
    engine = _dataclass_from(EngineConfig, engine_data, "config.engine")
    if meteor_data is not None:
        meteor = _dataclass_from(MeteorConfig, meteor_data, "config.engine.meteor")
        engine = dataclasses.replace(engine, meteor=meteor)
    choices = data.get("duplicate_choices")
    return BenchConfig(
        corpus=corpus,
        engine=engine,
        duplicate_choices=tuple(choices) if choices is not None else None,
        paraphrase_prob=float(data.get("paraphrase_prob", 0.0)),
        paraphrase_seed=int(data.get("paraphrase_seed", 0)),
    )


def _write_report(report, out_path: Optional[str]) -> None:
    text = report.to_json()
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_ground(args) -> int:
    try:
        with open(args.scene, "rb") as fh:
            scene = load_scene(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read scene file: {exc}")
    engine = EngineConfig(sharpness=args.sharpness,
                          perspective_mode=args.perspective)
    outcome = ground(scene, args.say, engine)
    view = {
        "kind": outcome.kind,
        "selected": outcome.selected,
        "stage": outcome.stage,
        "candidates": outcome.candidates.ids(),
        "relevant_ids": list(outcome.relevant_ids),
        "scores": [
            {"region": c.region_id, "cel": c.scores.cel, "meteor": c.scores.meteor,
             "decoded": c.decoded.text()}
            for c in outcome.self_trace
        ],
    }
    if outcome.kind == "unique":
        box = scene.region(outcome.selected).box
        view["box"] = box.as_list()
    sys.stdout.write(stable_json(view))
    return 0


def cmd_bench(args) -> int:
    config = load_bench_config(args.config)
    report = run_benchmark(config, _parse_seeds(args.seeds))
    _write_report(report, args.out)
    agg = report.aggregates
    print(f"bench: {agg['trials']} scenes, accuracy {agg['accuracy']:.4f} "
          f"[{agg['ci_low']:.4f}, {agg['ci_high']:.4f}]", file=sys.stderr)
    return 0


def cmd_dialog_sim(args) -> int:
    config = load_bench_config(args.config)
    report = simulate_dialog(config, _parse_seeds(args.seeds), args.protocol,
                             user_model=args.user)
    _write_report(report, args.out)
    agg = report.aggregates
    print(f"dialog-sim[{args.protocol}/{args.user}]: "
          f"{agg['ambiguous_trials']} ambiguous scenes, "
          f"mean questions {agg['mean_questions']:.3f}", file=sys.stderr)
    return 0


def cmd_make_scene(args) -> int:
    from .scene import generate_scene, save_scene

    corpus = CorpusConfig(duplicate_count=args.duplicates)
    scene, truth = generate_scene(corpus, args.seed)
    data = save_scene(scene)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote {args.out} (target {truth.target_id}, "
              f"relation needed: {truth.requires_relation})", file=sys.stderr)
    else:
        sys.stdout.buffer.write(data)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(journal_dir=args.journal)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refground",
        description="Interactive grounding of referring expressions")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ground = sub.add_parser("ground", help="ground one utterance against a scene file")
    p_ground.add_argument("--scene", required=True, help="scene JSON file")
    p_ground.add_argument("--say", required=True, help="referring expression")
    p_ground.add_argument("--perspective", choices=("auto", "off"), default="auto")
    p_ground.add_argument("--sharpness", type=float, default=1.0)
    p_ground.set_defaults(func=cmd_ground)

    p_bench = sub.add_parser("bench", help="grounding-accuracy benchmark")
    p_bench.add_argument("--config", help="benchmark config JSON file")
    p_bench.add_argument("--seeds", required=True, help="inclusive range A..B")
    p_bench.add_argument("--out", help="write the report JSON here")
    p_bench.set_defaults(func=cmd_bench)

    p_sim = sub.add_parser("dialog-sim", help="dialog-efficiency simulation")
    p_sim.add_argument("--protocol", required=True,
                       choices=(OBJECT_SPECIFIC, EXHAUSTIVE_BASELINE))
    p_sim.add_argument("--user", choices=("yesno", "correcting"), default="yesno")
    p_sim.add_argument("--config", help="benchmark config JSON file")
    p_sim.add_argument("--seeds", required=True, help="inclusive range A..B")
    p_sim.add_argument("--out", help="write the report JSON here")
    p_sim.set_defaults(func=cmd_dialog_sim)

    p_make = sub.add_parser("make-scene", help="write a generated scene file")
    p_make.add_argument("--seed", type=int, default=0)
    p_make.add_argument("--duplicates", type=int, default=0,
                        help="identical-object group size (0 or 2..3)")
    p_make.add_argument("--out", help="output path (stdout when omitted)")
    p_make.set_defaults(func=cmd_make_scene)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8008)
    p_serve.add_argument("--journal", help="append-only session journal directory")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GroundingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
