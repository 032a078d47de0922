"""Interactive disambiguation: question generation and the dialog loop.

Questions prefer a candidate's own attributes when they distinguish it
(mean METEOR against the other candidates' descriptions under the
informativeness threshold); otherwise the question falls back to the
candidate's relation to the whole image. Responses are handled as exact
"yes"/"no" keywords; anything else re-grounds over the remaining
candidates as a correcting expression.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .errors import DialogStateError, EmptyExpressionError, GroundingError
from .expressions import Expression, decode, describe_region, describe_relation
from .pipeline import (CandidateSet, EngineConfig, GroundingOutcome, ScoredCandidate,
                       ground_expression)
from .scene import Scene
from .scoring import MeteorConfig, meteor, tokenize

AWAITING = "awaiting-response"
RESOLVED = "resolved"
EXHAUSTED = "exhausted"

SELF_REFERENTIAL = "self-referential"
RELATIONAL = "relational"


@dataclass(frozen=True)
class Question:
    text: str
    target_id: str
    kind: str  # SELF_REFERENTIAL | RELATIONAL


@dataclass(frozen=True)
class DialogState:
    """Immutable dialog snapshot; ``dialog_step`` returns a new state."""

    scene: Scene
    config: EngineConfig
    original_utterance: str
    candidates: CandidateSet
    asked: Tuple[Tuple[Question, str], ...]
    current: Optional[Question]
    status: str
    resolved_id: Optional[str] = None

    def __post_init__(self):
        if self.status == RESOLVED and self.resolved_id is None:
            raise GroundingError("resolved dialog must carry a resolved id")
        if self.status == AWAITING and self.current is None:
            raise GroundingError("awaiting dialog must carry a question")


def state_hash(state: DialogState) -> str:
    """Stable digest of the dialog's observable state, for transcript logs."""
    payload = {
        "status": state.status,
        "candidates": sorted(state.candidates.ids()),
        "question": None if state.current is None
                    else [state.current.text, state.current.target_id],
        "resolved": state.resolved_id,
        "utterance": state.original_utterance,
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def transcript_entry(state: DialogState, question: Question, response: str,
                     timestamp: float) -> dict:
    """One append-only transcript line: state hash, question, response."""
    return {"state_hash": state_hash(state), "question": question.text,
            "target": question.target_id, "response": response,
            "timestamp": timestamp}


def informativeness(candidate_expr: Expression, others: Sequence[Expression],
                    cfg: MeteorConfig | None = None) -> float:
    """Mean METEOR of a description against the other candidates' ones.

    Low values mean the description singles its object out.
    """
    if not others:
        raise GroundingError("informativeness needs at least one other expression")
    if cfg is None:
        cfg = MeteorConfig()
    return sum(meteor(candidate_expr, other, cfg) for other in others) / len(others)


def _question_text(expr: Expression) -> str:
    from .expressions import TEMPLATES

    return TEMPLATES["question_template"].format(expression=expr.text())


def _candidate_order(scene: Scene, candidates: CandidateSet,
                     cfg: EngineConfig) -> List[Tuple[float, str, Expression]]:
    """Candidates as (informativeness, id, decoded), most informative first."""
    decoded = {
        c.region_id: decode(describe_region(scene, scene.region(c.region_id), cfg.sharpness))
        for c in candidates.members
    }
    order = []
    for rid, expr in decoded.items():
        others = [e for other, e in decoded.items() if other != rid]
        score = informativeness(expr, others, cfg.meteor) if others else 0.0
        order.append((score, rid, expr))
    order.sort(key=lambda item: (item[0], item[1]))
    return order


def generate_question(scene: Scene, candidates: CandidateSet,
                      cfg: EngineConfig | None = None) -> Question:
    """Question about the most distinctive candidate.

    Self-referential when its informativeness score is under the threshold,
    relational against the whole image otherwise.
    """
    if cfg is None:
        cfg = EngineConfig()
    if len(candidates) < 2:
        raise GroundingError("question generation needs at least 2 candidates")
    order = _candidate_order(scene, candidates, cfg)
    score, rid, expr = order[0]
    if score < cfg.informativeness_threshold:
        return Question(text=_question_text(expr), target_id=rid, kind=SELF_REFERENTIAL)
    rel = decode(describe_relation(scene, scene.region(rid), scene.whole_image,
                                   cfg.sharpness))
    return Question(text=_question_text(rel), target_id=rid, kind=RELATIONAL)


def _single_candidate_question(scene: Scene, candidate: ScoredCandidate,
                               cfg: EngineConfig) -> Question:
    expr = decode(describe_region(scene, scene.region(candidate.region_id), cfg.sharpness))
    return Question(text=_question_text(expr), target_id=candidate.region_id,
                    kind=SELF_REFERENTIAL)


def _next_question(scene: Scene, candidates: CandidateSet, cfg: EngineConfig) -> Question:
    if len(candidates) == 1:
        return _single_candidate_question(scene, candidates.members[0], cfg)
    return generate_question(scene, candidates, cfg)


def start_dialog(scene: Scene, outcome: GroundingOutcome, utterance: str,
                 cfg: EngineConfig | None = None) -> DialogState:
    """Open a dialog over an ambiguous grounding outcome."""
    if cfg is None:
        cfg = EngineConfig()
    if outcome.kind != "ambiguous":
        raise DialogStateError("dialog starts from an ambiguous outcome")
    question = _next_question(scene, outcome.candidates, cfg)
    return DialogState(scene=scene, config=cfg, original_utterance=utterance,
                       candidates=outcome.candidates, asked=(), current=question,
                       status=AWAITING)


def _without(candidates: CandidateSet, region_id: str) -> Optional[CandidateSet]:
    rest = tuple(c for c in candidates.members if c.region_id != region_id)
    return CandidateSet(rest) if rest else None


def dialog_step(state: DialogState, response: str) -> DialogState:
    """Consume one user response and return the successor state."""
    if state.status != AWAITING:
        raise DialogStateError(f"dialog is {state.status}; no response expected")
    assert state.current is not None
    asked = state.asked + ((state.current, response),)

    try:
        tokens = tokenize(response).tokens
    except EmptyExpressionError:
        raise DialogStateError("empty response")

    if tokens == ("yes",):
        return replace(state, asked=asked, current=None, status=RESOLVED,
                       resolved_id=state.current.target_id)

    if tokens == ("no",):
        remaining = _without(state.candidates, state.current.target_id)
        if remaining is None:
            return replace(state, asked=asked, current=None, status=EXHAUSTED)
        question = _next_question(state.scene, remaining, state.config)
        return replace(state, asked=asked, candidates=remaining, current=question)

    # Correcting response: re-ground the correction over the identified
    # candidates. A leading "no" additionally rejects the asked candidate
    # when the correction alone does not settle the referent.
    rejected = None
    if tokens[0] == "no":
        rejected = state.current.target_id
        tokens = tokens[1:]

    sub_scene = state.scene.restricted_to(state.candidates.ids())
    outcome = ground_expression(sub_scene, Expression(tuple(tokens)), state.config)
    if outcome.kind == "unique":
        return replace(state, asked=asked, current=None,
                       status=RESOLVED, resolved_id=outcome.selected)

    narrowed = CandidateSet(tuple(
        c for c in state.candidates.members if c.region_id in outcome.candidates.ids()))
    if rejected is not None:
        smaller = _without(narrowed, rejected)
        if smaller is not None:
            narrowed = smaller
    if len(narrowed) == 1:
        return replace(state, asked=asked, candidates=narrowed, current=None,
                       status=RESOLVED, resolved_id=narrowed.members[0].region_id)
    question = _next_question(state.scene, narrowed, state.config)
    return replace(state, asked=asked, candidates=narrowed, current=question)
