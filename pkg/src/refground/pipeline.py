"""Two-stage grounding: per-region scoring, relevancy clustering, and
pairwise relational grounding.

Stage 1 scores every object region against the input expression and keeps
the relevant cluster. If more than one candidate survives, stage 2 scores
all ordered candidate pairs (context may be the whole image), clusters the
pairs, and reads the referred object off the relevant pair cluster.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyExpressionError, GroundingError
from .expressions import (Expression, decode, default_vocabulary, describe_region,
                          describe_relation, with_decode_noise)
from .perspective import PerspectiveConfig, detect_perspective, transform_scene
from .scene import Scene, WHOLE_IMAGE_ID
from .scoring import MeteorConfig, ScorePair, cross_entropy_loss, meteor, tokenize

logger = logging.getLogger(__name__)

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class EngineConfig:
    """Knobs of the grounding engine; defaults give the noiseless engine."""

    sharpness: float = 1.0
    noise_epsilon: float = 0.0
    noise_seed: int = 0
    meteor: MeteorConfig = field(default_factory=MeteorConfig)
    kmeans_restarts: int = 20
    kmeans_seed: int = 0
    informativeness_threshold: float = 0.25
    perspective: PerspectiveConfig = field(default_factory=PerspectiveConfig)
    perspective_mode: str = "auto"  # "auto" | "off"


@dataclass(frozen=True)
class ScoredCandidate:
    region_id: str
    scores: ScorePair
    decoded: Expression


@dataclass(frozen=True)
class CandidateSet:
    members: Tuple[ScoredCandidate, ...]

    def __post_init__(self):
        if not self.members:
            raise GroundingError("candidate set must be non-empty")
        ids = [m.region_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise GroundingError("candidate region ids must be unique")

    def ids(self) -> List[str]:
        return [m.region_id for m in self.members]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ScoredPair:
    referred_id: str
    context_id: str
    scores: ScorePair
    decoded: Expression

    def __post_init__(self):
        if self.referred_id == self.context_id:
            raise GroundingError("referred and context ids must differ")


@dataclass(frozen=True)
class GroundingOutcome:
    """Result of grounding: a unique region or an ambiguous candidate set.

    ``relevant_ids`` is the stage-1 relevant set (the filter output);
    ``relevant_pairs`` lists the (referred, context) keys of the relevant
    pair cluster when stage 2 ran.
    """

    kind: str  # "unique" | "ambiguous"
    selected: Optional[str]
    candidates: CandidateSet
    pair_trace: Tuple[ScoredPair, ...]
    stage: str  # "self-referential" | "relational"
    self_trace: Tuple[ScoredCandidate, ...]
    relevant_ids: Tuple[str, ...]
    relevant_pairs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.kind == "unique":
            if self.selected is None or self.selected not in self.candidates.ids():
                raise GroundingError("unique outcome must select one of its candidates")


# --- Relevancy clustering ---------------------------------------------------

def _minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi - lo <= _TIE_TOL:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _lloyd(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, float]:
    """Run 2-means to convergence; returns (labels, sse)."""
    labels = np.zeros(len(points), dtype=int)
    for _ in range(100):
        dists = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        for k in range(2):
            sel = points[new_labels == k]
            if len(sel):
                centroids[k] = sel.mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from the other.
                far = ((points - centroids[1 - k]) ** 2).sum(axis=1).argmax()
                centroids[k] = points[far]
                new_labels[far] = k
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    sse = float(((points - centroids[labels]) ** 2).sum())
    return labels, sse


def two_means(points: np.ndarray, seed: int = 0, restarts: int = 20) -> np.ndarray:
    """Deterministic 2-means labels: seeded restarts, best SSE wins.

    The first run seeds centroids at the points with minimal and maximal
    first coordinate; the remaining runs use seeded random point pairs.
    """
    n = len(points)
    inits = [(int(points[:, 0].argmin()), int(points[:, 0].argmax()))]
    rng = random.Random(f"kmeans:{seed}")
    for _ in range(restarts):
        inits.append(tuple(rng.sample(range(n), 2)))
    best_labels, best_sse = None, float("inf")
    for i, j in inits:
        if i == j:
            continue
        labels, sse = _lloyd(points.copy(), points[[i, j]].astype(float).copy())
        if sse < best_sse - 1e-15:
            best_labels, best_sse = labels, sse
    assert best_labels is not None
    return best_labels


def cluster_relevant(scored: Sequence, seed: int = 0,
                     restarts: int = 20) -> Tuple[list, list]:
    """Split scored items into (relevant, irrelevant) by 2-means.

    Features are the min-max normalized (CEL, METEOR) values over the input
    list. The relevant cluster is the one holding the top-scoring item
    (lowest CEL, ties broken by higher METEOR). Size-1 inputs are relevant;
    so is everything when all feature vectors agree within 1e-9.
    """
    items = list(scored)
    if not items:
        raise GroundingError("cannot cluster an empty candidate list")
    if len(items) == 1:
        return items, []
    cels = np.array([it.scores.cel for it in items], dtype=float)
    mets = np.array([it.scores.meteor for it in items], dtype=float)
    feats = np.column_stack([_minmax_normalize(cels), _minmax_normalize(mets)])
    spread = feats.max(axis=0) - feats.min(axis=0)
    if np.all(spread <= _TIE_TOL):
        return items, []
    labels = two_means(feats, seed=seed, restarts=restarts)
    best_idx = min(range(len(items)),
                   key=lambda i: (items[i].scores.cel, -items[i].scores.meteor, i))
    relevant_label = labels[best_idx]
    relevant = [it for it, l in zip(items, labels) if l == relevant_label]
    irrelevant = [it for it, l in zip(items, labels) if l != relevant_label]
    return relevant, irrelevant


# --- Stage 1: self-referential scoring --------------------------------------

def _noise_rng(cfg: EngineConfig, kind: str, *ids: str) -> random.Random:
    return random.Random(f"noise:{cfg.noise_seed}:{kind}:{':'.join(ids)}")


def score_self_referential(scene: Scene, expr: Expression,
                           cfg: EngineConfig | None = None) -> List[ScoredCandidate]:
    """Score every object region by how well it generates ``expr``."""
    if cfg is None:
        cfg = EngineConfig()
    if not scene.regions:
        raise GroundingError("scene has no object regions")
    vocab = default_vocabulary()
    out = []
    for region in sorted(scene.regions, key=lambda r: r.id):
        dist = describe_region(scene, region, cfg.sharpness)
        if cfg.noise_epsilon > 0:
            dist = with_decode_noise(dist, cfg.noise_epsilon,
                                     _noise_rng(cfg, "self", region.id))
        decoded = decode(dist)
        scores = ScorePair(cel=cross_entropy_loss(expr, dist, vocab),
                           meteor=meteor(decoded, expr, cfg.meteor))
        out.append(ScoredCandidate(region_id=region.id, scores=scores, decoded=decoded))
    return out


# --- Stage 2: relational grounding ------------------------------------------

def _score_pairs(scene: Scene, candidates: CandidateSet, expr: Expression,
                 cfg: EngineConfig) -> List[ScoredPair]:
    vocab = default_vocabulary()
    ids = sorted(candidates.ids())
    pairs = []
    for rid in ids:
        referred = scene.region(rid)
        for cid in ids + [WHOLE_IMAGE_ID]:
            if cid == rid:
                continue
            context = scene.region(cid)
            dist = describe_relation(scene, referred, context, cfg.sharpness)
            if cfg.noise_epsilon > 0:
                dist = with_decode_noise(dist, cfg.noise_epsilon,
                                         _noise_rng(cfg, "rel", rid, cid))
            decoded = decode(dist)
            scores = ScorePair(cel=cross_entropy_loss(expr, dist, vocab),
                               meteor=meteor(decoded, expr, cfg.meteor))
            pairs.append(ScoredPair(referred_id=rid, context_id=cid,
                                    scores=scores, decoded=decoded))
    return pairs


def _pair_key(pair: ScoredPair) -> Tuple[float, float, str, str]:
    return (pair.scores.cel, -pair.scores.meteor, pair.referred_id, pair.context_id)


def ground_relational(scene: Scene, candidates: CandidateSet, expr: Expression,
                      cfg: EngineConfig | None = None,
                      self_trace: Tuple[ScoredCandidate, ...] = (),
                      relevant_ids: Optional[Tuple[str, ...]] = None) -> GroundingOutcome:
    """Resolve among candidates by scoring all ordered region pairs.

    The relevant pair cluster decides: if all its pairs name one referred
    object, that object wins. Otherwise the best relevant pair (lowest CEL,
    then highest METEOR) wins, unless pairs naming other referred objects
    tie it exactly, in which case the outcome is ambiguous over the tied
    referred objects.
    """
    if cfg is None:
        cfg = EngineConfig()
    if len(candidates) < 2:
        raise GroundingError("relational grounding needs at least 2 candidates")
    if relevant_ids is None:
        relevant_ids = tuple(sorted(candidates.ids()))
    pairs = _score_pairs(scene, candidates, expr, cfg)
    relevant, _ = cluster_relevant(pairs, seed=cfg.kmeans_seed, restarts=cfg.kmeans_restarts)
    relevant_pairs = tuple((p.referred_id, p.context_id) for p in relevant)
    referred_ids = sorted({p.referred_id for p in relevant})
    by_id = {c.region_id: c for c in candidates.members}

    if len(referred_ids) > 1:
        best = min(relevant, key=_pair_key)
        tied_ids = sorted({
            p.referred_id for p in relevant
            if abs(p.scores.cel - best.scores.cel) <= _TIE_TOL
            and abs(p.scores.meteor - best.scores.meteor) <= _TIE_TOL
        })
        if len(tied_ids) > 1:
            # The pair objective cannot separate these referred objects;
            # exactly they go on to disambiguation.
            surviving = CandidateSet(tuple(by_id[rid] for rid in tied_ids))
            return GroundingOutcome(
                kind="ambiguous", selected=None, candidates=surviving,
                pair_trace=tuple(pairs), stage="relational",
                self_trace=self_trace, relevant_ids=relevant_ids,
                relevant_pairs=relevant_pairs)
        winner = best.referred_id
    else:
        winner = referred_ids[0]

    return GroundingOutcome(
        kind="unique", selected=winner, candidates=candidates,
        pair_trace=tuple(pairs), stage="relational",
        self_trace=self_trace, relevant_ids=relevant_ids,
        relevant_pairs=relevant_pairs)


# --- Full pipeline -----------------------------------------------------------

def ground_expression(scene: Scene, expr: Expression,
                      cfg: EngineConfig | None = None) -> GroundingOutcome:
    """Ground a tokenized expression (perspective handling included)."""
    if cfg is None:
        cfg = EngineConfig()
    scoring_scene = scene
    if cfg.perspective_mode == "auto":
        viewpoint = detect_perspective(expr, cfg.perspective)
        if viewpoint is not None:
            scoring_scene = transform_scene(scene, viewpoint)
    scored = score_self_referential(scoring_scene, expr, cfg)
    relevant, _ = cluster_relevant(scored, seed=cfg.kmeans_seed, restarts=cfg.kmeans_restarts)
    relevant_ids = tuple(c.region_id for c in relevant)
    if len(relevant) == 1:
        only = relevant[0]
        return GroundingOutcome(
            kind="unique", selected=only.region_id,
            candidates=CandidateSet((only,)), pair_trace=(),
            stage="self-referential", self_trace=tuple(scored),
            relevant_ids=relevant_ids)
    candidates = CandidateSet(tuple(relevant))
    return ground_relational(scoring_scene, candidates, expr, cfg,
                             self_trace=tuple(scored), relevant_ids=relevant_ids)


def ground(scene: Scene, utterance: str, cfg: EngineConfig | None = None) -> GroundingOutcome:
    """Ground a raw utterance against a scene."""
    expr = tokenize(utterance)
    return ground_expression(scene, expr, cfg)
