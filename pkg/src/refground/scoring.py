"""Expression scoring: tokenization, average cross-entropy, and METEOR.

METEOR here is the classic unigram-alignment form: an injective token
matching of maximal cardinality, minimal chunk count among those, a
recall-weighted harmonic mean, and a fragmentation penalty. Matchers are
applied as one pair predicate (exact always; synonym when enabled); since
the score depends only on (matches, chunks), matcher priority does not
change it.
"""
from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np

from .errors import EmptyExpressionError, GroundingError
from .expressions import Expression, ExpressionDistribution, Vocabulary

PROBABILITY_FLOOR = 1e-12

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> Expression:
    """Lowercase, strip ASCII punctuation, split on whitespace."""
    tokens = tuple(t for t in text.lower().translate(_PUNCT_TABLE).split() if t)
    if not tokens:
        raise EmptyExpressionError(f"no tokens after normalization: {text!r}")
    return Expression(tokens)


def cross_entropy_loss(expr: Expression, dist: ExpressionDistribution,
                       vocab: Vocabulary) -> float:
    """Average cross-entropy (nats) of ``expr`` under ``dist``.

    The expression is padded with EOS (or truncated) to the distribution
    length; out-of-vocabulary tokens use the UNK index; probabilities are
    floored at 1e-12 so the loss stays finite.
    """
    steps = len(dist)
    indices = [vocab.index(t) for t in expr.tokens[:steps]]
    indices.extend([vocab.eos_index] * (steps - len(indices)))
    probs = dist.steps[np.arange(steps), indices]
    return float(-np.log(np.maximum(probs, PROBABILITY_FLOOR)).mean()) + 0.0


def load_synonym_lexicon(path=None) -> FrozenSet[FrozenSet[str]]:
    """Read a synonym lexicon: one unordered "token_a token_b" pair per line."""
    if path is None:
        text = resources.files("refground.data").joinpath("synonyms.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    pairs = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GroundingError(f"bad synonym line: {line!r}")
        pairs.add(frozenset(parts))
    return frozenset(pairs)


@lru_cache(maxsize=1)
def default_synonym_lexicon() -> FrozenSet[FrozenSet[str]]:
    return load_synonym_lexicon()


@dataclass(frozen=True)
class MeteorConfig:
    """METEOR parameters: alpha (P/R balance), beta, gamma (penalty)."""

    alpha: float = 0.9
    beta: float = 3.0
    gamma: float = 0.5
    matchers: Tuple[str, ...] = ("exact", "synonym")
    synonyms: FrozenSet[FrozenSet[str]] = field(default_factory=default_synonym_lexicon)

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise GroundingError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beta <= 0:
            raise GroundingError(f"beta must be positive, got {self.beta}")
        if not (0.0 <= self.gamma <= 1.0):
            raise GroundingError(f"gamma must be in [0, 1], got {self.gamma}")
        unknown = set(self.matchers) - {"exact", "synonym"}
        if unknown:
            raise GroundingError(f"unknown matchers: {sorted(unknown)}")

    def tokens_match(self, a: str, b: str) -> bool:
        if "exact" in self.matchers and a == b:
            return True
        if "synonym" in self.matchers and frozenset((a, b)) in self.synonyms:
            return True
        return False


EXACT_METEOR = MeteorConfig(matchers=("exact",), synonyms=frozenset())


@dataclass(frozen=True)
class ScorePair:
    """CEL (nats, lower is better) and METEOR (higher is better)."""

    cel: float
    meteor: float

    def __post_init__(self):
        if self.cel < 0:
            raise GroundingError(f"cel must be >= 0, got {self.cel}")
        if not (0.0 <= self.meteor <= 1.0):
            raise GroundingError(f"meteor must be in [0, 1], got {self.meteor}")


def _align(long_side: Sequence[str], short_side: Sequence[str],
           cfg: MeteorConfig) -> Tuple[int, int]:
    """Exact (matches, chunks) via DP over (position, used-mask, last match).

    A chunk is a maximal run of matched pairs consecutive in both
    sequences; that notion and the pair predicate are both symmetric, so
    the operands may be given in either order.
    """
    n = len(long_side)
    allowed: List[Tuple[int, ...]] = []
    for a in long_side:
        allowed.append(tuple(j for j, b in enumerate(short_side) if cfg.tokens_match(a, b)))

    memo: Dict[Tuple[int, int, int], Tuple[int, int]] = {}

    def best(i: int, mask: int, prev_j: int) -> Tuple[int, int]:
        """Max (matches, -chunks) for positions i.. given used mask.

        ``prev_j`` is the short-side index matched at position i-1, or -1.
        """
        if i == n:
            return (0, 0)
        key = (i, mask, prev_j)
        if key in memo:
            return memo[key]
        # Skip this position.
        score = best(i + 1, mask, -1)
        for j in allowed[i]:
            if mask & (1 << j):
                continue
            extends = prev_j >= 0 and j == prev_j + 1
            m, neg_chunks = best(i + 1, mask | (1 << j), j)
            cand = (m + 1, neg_chunks if extends else neg_chunks - 1)
            if cand > score:
                score = cand
        memo[key] = score
        return score

    m, neg_chunks = best(0, 0, -1)
    return m, -neg_chunks


def meteor_alignment(candidate: Sequence[str], reference: Sequence[str],
                     cfg: MeteorConfig) -> Tuple[int, int]:
    """Maximal-cardinality, minimal-chunk alignment; returns (m, chunks)."""
    if not candidate or not reference:
        raise EmptyExpressionError("meteor inputs must be non-empty")
    # Both (m, chunks) are symmetric; keep the bitmask on the shorter side.
    if len(reference) <= len(candidate):
        return _align(candidate, reference, cfg)
    return _align(reference, candidate, cfg)


def meteor(candidate: Expression, reference: Expression,
           cfg: MeteorConfig | None = None) -> float:
    """METEOR similarity of ``candidate`` against ``reference`` in [0, 1]."""
    if cfg is None:
        cfg = MeteorConfig()
    m, chunks = meteor_alignment(candidate.tokens, reference.tokens, cfg)
    if m == 0:
        return 0.0
    precision = m / len(candidate.tokens)
    recall = m / len(reference.tokens)
    f_mean = (precision * recall) / (cfg.alpha * precision + (1.0 - cfg.alpha) * recall)
    penalty = cfg.gamma * (chunks / m) ** cfg.beta
    return f_mean * (1.0 - penalty)


def score_pair(expr: Expression, dist: ExpressionDistribution, decoded: Expression,
               vocab: Vocabulary, cfg: MeteorConfig) -> ScorePair:
    """CEL of the input under the distribution plus METEOR of the decode."""
    return ScorePair(
        cel=cross_entropy_loss(expr, dist, vocab),
        meteor=meteor(decoded, expr, cfg),
    )
