"""Deterministic expression generators and decoding.

These stand in for the learned caption generators: given a region (or an
ordered region pair) they emit a sequence of word-probability vectors whose
argmax decoding is an attribute/relation template. A ``sharpness`` in
(0, 1] is the probability mass placed on the template token at each step;
the remainder spreads uniformly over the rest of the vocabulary.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import EmptyExpressionError, GroundingError, UnknownRegionError
from .scene import Region, Scene

EOS = "<eos>"
UNK = "<unk>"
MAX_SEQUENCE_LENGTH = 15

_ROW_SUM_TOL = 1e-9


class Vocabulary:
    """Ordered token list with dense indices and reserved EOS/UNK entries."""

    def __init__(self, tokens: Sequence[str]):
        if len(set(tokens)) != len(tokens):
            raise GroundingError("vocabulary tokens must be unique")
        if tokens.count(EOS) != 1 or tokens.count(UNK) != 1:
            raise GroundingError("vocabulary must contain EOS and UNK exactly once")
        self.tokens: Tuple[str, ...] = tuple(tokens)
        self._index: Dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        self.eos_index = self._index[EOS]
        self.unk_index = self._index[UNK]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        """Index of ``token``, falling back to the UNK index."""
        return self._index.get(token, self.unk_index)

    def strict_index(self, token: str) -> int:
        if token not in self._index:
            raise GroundingError(f"token '{token}' not in vocabulary")
        return self._index[token]

    @classmethod
    def from_file(cls, path=None) -> "Vocabulary":
        if path is None:
            text = resources.files("refground.data").joinpath("vocabulary.txt").read_text("utf-8")
        else:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        return cls([line.strip() for line in text.splitlines() if line.strip()])


_DEFAULT_VOCAB: Vocabulary | None = None


def default_vocabulary() -> Vocabulary:
    global _DEFAULT_VOCAB
    if _DEFAULT_VOCAB is None:
        _DEFAULT_VOCAB = Vocabulary.from_file()
    return _DEFAULT_VOCAB


def _load_templates() -> dict:
    with resources.files("refground.data").joinpath("templates.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


TEMPLATES = _load_templates()


@dataclass(frozen=True)
class Expression:
    """A tokenized (lowercase) expression."""

    tokens: Tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise EmptyExpressionError("expression must be non-empty")
        if EOS in self.tokens:
            raise GroundingError("expression may not contain EOS")

    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


class ExpressionDistribution:
    """A sequence of row-stochastic word-probability vectors."""

    def __init__(self, steps: Sequence[np.ndarray], vocab: Vocabulary):
        if not steps:
            raise GroundingError("distribution must have at least one step")
        if len(steps) > MAX_SEQUENCE_LENGTH:
            raise GroundingError(
                f"distribution length {len(steps)} exceeds {MAX_SEQUENCE_LENGTH}")
        mat = np.asarray(steps, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != len(vocab):
            raise GroundingError("each step must be a vector over the vocabulary")
        if np.any(mat < 0):
            raise GroundingError("probabilities must be non-negative")
        sums = mat.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
            raise GroundingError("each step must sum to 1 within 1e-9")
        self.steps = mat
        self.vocab = vocab

    def __len__(self) -> int:
        return len(self.steps)


def _sharp_steps(token_indices: Sequence[int], sharpness: float,
                 vocab: Vocabulary) -> ExpressionDistribution:
    if not (0.0 < sharpness <= 1.0):
        raise GroundingError(f"sharpness must be in (0, 1], got {sharpness}")
    size = len(vocab)
    spread = (1.0 - sharpness) / (size - 1)
    steps = []
    for idx in token_indices:
        row = np.full(size, spread)
        row[idx] = sharpness
        steps.append(row)
    return ExpressionDistribution(steps, vocab)


def decode(dist: ExpressionDistribution) -> Expression:
    """Most-likely expression: per-step argmax, truncated at the first EOS.

    Ties break toward the lowest vocabulary index (numpy argmax order).
    """
    tokens = []
    for row in dist.steps:
        idx = int(np.argmax(row))
        if idx == dist.vocab.eos_index:
            break
        tokens.append(dist.vocab.tokens[idx])
    if not tokens:
        raise EmptyExpressionError("distribution decodes to an empty expression")
    return Expression(tuple(tokens))


def _require_member(scene: Scene, region: Region) -> None:
    if not scene.has_region(region.id):
        raise UnknownRegionError(region.id)


def _size_matters(scene: Scene, region: Region) -> bool:
    return any(
        r.id != region.id
        and r.attrs.category == region.attrs.category
        and r.attrs.size_class != region.attrs.size_class
        for r in scene.regions
    )


def _mention_tokens(scene: Scene, region: Region) -> List[str]:
    tokens = [TEMPLATES["article"]]
    if _size_matters(scene, region):
        tokens.append(region.attrs.size_class)
    tokens.extend([region.attrs.color, region.attrs.category])
    return tokens


def self_template_tokens(scene: Scene, region: Region) -> List[str]:
    """Template for a region's own attributes: "the [size] color category".

    The size-class token appears only when the scene holds another
    same-category object of a different size class.
    """
    return _mention_tokens(scene, region)


def _relation_key_object(referred: Region, context: Region) -> str:
    """Relation of ``referred`` to an object context by dominant center offset."""
    rx, ry = referred.box.center
    cx, cy = context.box.center
    dx, dy = rx - cx, ry - cy
    lo, hi = sorted((abs(dx), abs(dy)))
    close = ((dx * dx + dy * dy) ** 0.5
             < TEMPLATES["next_to_distance_ratio"] * max(referred.box.w, referred.box.h))
    if close and hi < TEMPLATES["axis_dominance_ratio"] * lo:
        return "next_to"
    if abs(dx) > abs(dy):
        return "left" if dx < 0 else "right"
    return "above" if dy < 0 else "below"


def _relation_key_image(scene: Scene, referred: Region) -> str:
    """Relation to the whole image by box-center position in image thirds."""
    cx, cy = referred.box.center
    if cx < scene.image_w / 3.0:
        return "left"
    if cx > 2.0 * scene.image_w / 3.0:
        return "right"
    if cy < scene.image_h / 3.0:
        return "top"
    if cy > 2.0 * scene.image_h / 3.0:
        return "bottom"
    return "middle"


def relation_template_tokens(scene: Scene, referred: Region, context: Region) -> List[str]:
    """Template for a region pair: "the [size] color category <relation phrase>".

    Region mentions use the same wording as the self-referential template
    (including the size-class rule) so the two generators never disagree
    about how an object is named.
    """
    tokens = _mention_tokens(scene, referred)
    if context.is_whole_image:
        tokens.extend(TEMPLATES["relation_image"][_relation_key_image(scene, referred)])
    else:
        tokens.extend(TEMPLATES["relation_object"][_relation_key_object(referred, context)])
        tokens.extend(_mention_tokens(scene, context))
    return tokens


def describe_region(scene: Scene, region: Region, sharpness: float = 1.0) -> ExpressionDistribution:
    """Word-probability sequence describing a region by its own attributes."""
    _require_member(scene, region)
    if region.is_whole_image:
        raise GroundingError("cannot describe the whole-image region")
    vocab = default_vocabulary()
    tokens = self_template_tokens(scene, region)
    indices = [vocab.strict_index(t) for t in tokens] + [vocab.eos_index]
    return _sharp_steps(indices, sharpness, vocab)


def describe_relation(scene: Scene, referred: Region, context: Region,
                      sharpness: float = 1.0) -> ExpressionDistribution:
    """Word-probability sequence describing ``referred`` relative to ``context``.

    ``context`` may be the whole-image region; ``referred`` may not.
    """
    if referred.id == context.id:
        raise GroundingError("referred and context regions must differ")
    if referred.is_whole_image:
        raise GroundingError("the whole-image region cannot be the referred object")
    _require_member(scene, referred)
    _require_member(scene, context)
    vocab = default_vocabulary()
    tokens = relation_template_tokens(scene, referred, context)
    indices = [vocab.strict_index(t) for t in tokens] + [vocab.eos_index]
    return _sharp_steps(indices, sharpness, vocab)


def with_decode_noise(dist: ExpressionDistribution, epsilon: float,
                      rng: random.Random) -> ExpressionDistribution:
    """Swap each step's argmax mass with a random other token w.p. ``epsilon``.

    EOS-argmax steps are left alone so the sequence keeps its terminator.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise GroundingError(f"epsilon must be in [0, 1], got {epsilon}")
    if epsilon == 0.0:
        return dist
    steps = dist.steps.copy()
    size = len(dist.vocab)
    for t in range(steps.shape[0]):
        top = int(np.argmax(steps[t]))
        if top == dist.vocab.eos_index:
            continue
        if rng.random() < epsilon:
            while True:
                other = rng.randrange(size)
                if other != top and other != dist.vocab.eos_index:
                    break
            steps[t, top], steps[t, other] = steps[t, other], steps[t, top]
    return ExpressionDistribution(list(steps), dist.vocab)
