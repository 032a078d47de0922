"""Corpus-level evaluation: IoU grounding accuracy and dialog-efficiency
simulation against an exhaustive question baseline.

Everything is seeded; reports for the same config and seeds are
bit-identical across runs.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .dialog import AWAITING, dialog_step, start_dialog, transcript_entry
from .errors import ConfigError
from .expressions import relation_template_tokens, self_template_tokens
from .jsonutil import stable_json
from .pipeline import EngineConfig, GroundingOutcome, ground
from .scene import BoundingBox, CorpusConfig, GroundTruth, Scene, generate_scene
from .scoring import MeteorConfig, default_synonym_lexicon

OBJECT_SPECIFIC = "object-specific"
EXHAUSTIVE_BASELINE = "exhaustive-baseline"

GENERIC_QUESTION = "Do you mean this object?"


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    inter = a.intersection_area(b)
    if inter <= 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark setup: corpus, engine, and utterance-noise parameters.

    ``duplicate_choices`` picks a per-seed duplicate-group size, so one
    corpus can mix attribute-unique scenes with duplicate-heavy ones.
    """

    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    duplicate_choices: Optional[Tuple[int, ...]] = None
    paraphrase_prob: float = 0.0
    paraphrase_seed: int = 0

    def corpus_for_seed(self, seed: int) -> CorpusConfig:
        if self.duplicate_choices is None:
            return self.corpus
        dup = random.Random(f"dup:{seed}").choice(self.duplicate_choices)
        if dup == self.corpus.duplicate_count:
            return self.corpus
        return dataclasses.replace(self.corpus, duplicate_count=dup)


def _synonym_partners(token: str) -> List[str]:
    partners = []
    for pair in default_synonym_lexicon():
        if token in pair:
            partners.extend(t for t in pair if t != token)
    return sorted(partners)


def make_utterance(scene: Scene, truth: GroundTruth, config: BenchConfig,
                   seed: int) -> str:
    """Ground-truth utterance: the target's template, optionally paraphrased.

    Paraphrase noise swaps template tokens for lexicon synonyms with
    probability ``paraphrase_prob`` per token (seeded).
    """
    target = scene.region(truth.target_id)
    if truth.requires_relation:
        tokens = relation_template_tokens(scene, target, scene.whole_image)
    else:
        tokens = self_template_tokens(scene, target)
    if config.paraphrase_prob > 0.0:
        rng = random.Random(f"para:{config.paraphrase_seed}:{seed}")
        swapped = []
        for tok in tokens:
            partners = _synonym_partners(tok)
            if partners and rng.random() < config.paraphrase_prob:
                swapped.append(rng.choice(partners))
            else:
                swapped.append(tok)
        tokens = swapped
    return " ".join(tokens)


def _outcome_record(outcome: GroundingOutcome) -> dict:
    return {
        "kind": outcome.kind,
        "selected": outcome.selected,
        "stage": outcome.stage,
        "relevant_ids": list(outcome.relevant_ids),
        "candidates": outcome.candidates.ids(),
    }


def _score_trace(outcome: GroundingOutcome) -> dict:
    return {
        "self": [
            {"region": c.region_id, "cel": c.scores.cel, "meteor": c.scores.meteor,
             "decoded": c.decoded.text()}
            for c in outcome.self_trace
        ],
        "pairs": [
            {"referred": p.referred_id, "context": p.context_id,
             "cel": p.scores.cel, "meteor": p.scores.meteor,
             "decoded": p.decoded.text()}
            for p in outcome.pair_trace
        ],
    }


def _config_fingerprint(config) -> str:
    def sanitize(value):
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {f.name: sanitize(getattr(value, f.name))
                    for f in dataclasses.fields(value)}
        if isinstance(value, frozenset):
            return sorted(sorted(item) if isinstance(item, frozenset) else item
                          for item in value)
        if isinstance(value, dict):
            return {k: sanitize(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [sanitize(v) for v in value]
        return value

    blob = stable_json(sanitize(config))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class BenchmarkReport:
    kind: str
    config_fingerprint: str
    per_scene: List[dict]
    aggregates: Dict[str, float]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config_fingerprint": self.config_fingerprint,
                "aggregates": self.aggregates, "per_scene": self.per_scene}

    def to_json(self) -> str:
        return stable_json(self.to_dict())


def _binomial_ci(successes: int, trials: int) -> Tuple[float, float]:
    p = successes / trials
    half = 1.96 * math.sqrt(p * (1 - p) / trials)
    return max(0.0, p - half), min(1.0, p + half)


def run_benchmark(config: BenchConfig, seeds: Sequence[int]) -> BenchmarkReport:
    """Grounding accuracy at IoU > 0.5 over seeded synthetic scenes."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("seed range is empty")
    per_scene = []
    successes = 0
    for seed in seeds:
        scene, truth = generate_scene(config.corpus_for_seed(seed), seed)
        utterance = make_utterance(scene, truth, config, seed)
        outcome = ground(scene, utterance, config.engine)
        overlap = 0.0
        if outcome.kind == "unique":
            overlap = iou(scene.region(outcome.selected).box,
                          scene.region(truth.target_id).box)
        success = outcome.kind == "unique" and overlap > 0.5
        successes += success
        record = {
            "seed": seed,
            "utterance": utterance,
            "target": truth.target_id,
            "requires_relation": truth.requires_relation,
            "outcome": _outcome_record(outcome),
            "iou": overlap,
            "success": success,
            "region_count": len(scene.regions),
            "relevant_count": len(outcome.relevant_ids),
            "pair_count": len(outcome.pair_trace),
        }
        if not success:
            record["trace"] = _score_trace(outcome)
        per_scene.append(record)
    lo, hi = _binomial_ci(successes, len(seeds))
    aggregates = {
        "trials": len(seeds),
        "successes": successes,
        "accuracy": successes / len(seeds),
        "ci_low": lo,
        "ci_high": hi,
        "mean_regions": sum(r["region_count"] for r in per_scene) / len(seeds),
        "mean_relevant": sum(r["relevant_count"] for r in per_scene) / len(seeds),
    }
    return BenchmarkReport(kind="grounding", config_fingerprint=_config_fingerprint(config),
                           per_scene=per_scene, aggregates=aggregates)


# --- Dialog-efficiency simulation -------------------------------------------

def _correction_text(scene: Scene, truth: GroundTruth) -> str:
    target = scene.region(truth.target_id)
    return "no, " + " ".join(relation_template_tokens(scene, target, scene.whole_image))


def _simulate_object_specific(scene: Scene, truth: GroundTruth, utterance: str,
                              outcome: GroundingOutcome, engine: EngineConfig,
                              user_model: str) -> Tuple[int, Optional[str], List[dict]]:
    state = start_dialog(scene, outcome, utterance, engine)
    questions = 0
    transcript = []
    corrected = False
    while state.status == AWAITING:
        questions += 1
        question = state.current
        if question.target_id == truth.target_id:
            response = "yes"
        elif user_model == "correcting" and not corrected:
            corrected = True
            response = _correction_text(scene, truth)
        else:
            response = "no"
        # Logical step index as the timestamp keeps transcripts replayable.
        transcript.append(transcript_entry(state, question, response, questions))
        state = dialog_step(state, response)
    return questions, state.resolved_id, transcript


def _simulate_baseline(truth: GroundTruth,
                       outcome: GroundingOutcome) -> Tuple[int, Optional[str], List[dict]]:
    # Fixed arbitrary order, generic question, yes/no answers only.
    questions = 0
    transcript = []
    resolved = None
    remaining = sorted(outcome.candidates.ids())
    for step, cid in enumerate(remaining, start=1):
        questions += 1
        response = "yes" if cid == truth.target_id else "no"
        digest = hashlib.sha256(
            stable_json({"remaining": remaining[step - 1:]}).encode("utf-8")
        ).hexdigest()[:16]
        transcript.append({"state_hash": digest, "question": GENERIC_QUESTION,
                           "target": cid, "response": response, "timestamp": step})
        if response == "yes":
            resolved = cid
            break
    return questions, resolved, transcript


def simulate_dialog(config: BenchConfig, seeds: Sequence[int], protocol: str,
                    user_model: str = "yesno") -> BenchmarkReport:
    """Question counts for one disambiguation protocol over ambiguous scenes."""
    if protocol not in (OBJECT_SPECIFIC, EXHAUSTIVE_BASELINE):
        raise ConfigError(f"unknown protocol '{protocol}'")
    if user_model not in ("yesno", "correcting"):
        raise ConfigError(f"unknown user model '{user_model}'")
    max_dup = (max(config.duplicate_choices) if config.duplicate_choices
               else config.corpus.duplicate_count)
    if max_dup < 2:
        raise ConfigError("dialog simulation needs an ambiguous corpus "
                          "(duplicate_count >= 2)")
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("seed range is empty")

    per_scene = []
    total_questions = 0
    resolved_correct = 0
    ambiguous_trials = 0
    for seed in seeds:
        scene, truth = generate_scene(config.corpus_for_seed(seed), seed)
        target = scene.region(truth.target_id)
        # The target's own description: exactly as ambiguous as its
        # duplicate group, mirroring an under-specified "the red cup".
        utterance = " ".join(self_template_tokens(scene, target))
        outcome = ground(scene, utterance, config.engine)
        if outcome.kind != "ambiguous":
            per_scene.append({"seed": seed, "utterance": utterance,
                              "ambiguous": False, "questions": 0,
                              "resolved": outcome.selected,
                              "correct": outcome.selected == truth.target_id,
                              "transcript": []})
            continue
        ambiguous_trials += 1
        if protocol == OBJECT_SPECIFIC:
            questions, resolved, transcript = _simulate_object_specific(
                scene, truth, utterance, outcome, config.engine, user_model)
        else:
            questions, resolved, transcript = _simulate_baseline(truth, outcome)
        total_questions += questions
        correct = resolved == truth.target_id
        resolved_correct += correct
        per_scene.append({"seed": seed, "utterance": utterance, "ambiguous": True,
                          "candidates": outcome.candidates.ids(),
                          "questions": questions, "resolved": resolved,
                          "correct": correct, "transcript": transcript})

    aggregates = {
        "trials": len(seeds),
        "ambiguous_trials": ambiguous_trials,
        "protocol": protocol,
        "user_model": user_model,
        "mean_questions": (total_questions / ambiguous_trials) if ambiguous_trials else 0.0,
        "resolved_correct": resolved_correct,
    }
    return BenchmarkReport(kind="dialog-sim", config_fingerprint=_config_fingerprint(config),
                           per_scene=per_scene, aggregates=aggregates)
