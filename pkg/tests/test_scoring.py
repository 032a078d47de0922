import math
import random

import numpy as np
import pytest

from refground.errors import EmptyExpressionError
from refground.expressions import (EOS, Expression, ExpressionDistribution,
                                   Vocabulary, default_vocabulary)
from refground.scoring import (EXACT_METEOR, MeteorConfig, cross_entropy_loss,
                               load_synonym_lexicon, meteor, meteor_alignment,
                               tokenize)


def expr(text):
    return Expression(tuple(text.split()))


# --- Independent oracle: exhaustive injective matching ---------------------

def oracle_alignment(candidate, reference, cfg):
    """Enumerate every injective matching; maximize m, then minimize chunks."""

    def chunks_of(pairs):
        if not pairs:
            return 0
        count = 1
        for (i1, j1), (i2, j2) in zip(pairs, pairs[1:]):
            if not (i2 == i1 + 1 and j2 == j1 + 1):
                count += 1
        return count

    best = (0, 0)

    def rec(i, used, pairs):
        nonlocal best
        if i == len(candidate):
            key = (len(pairs), -chunks_of(pairs))
            if key > best:
                best = key
            return
        rec(i + 1, used, pairs)
        for j in range(len(reference)):
            if not used & (1 << j) and cfg.tokens_match(candidate[i], reference[j]):
                rec(i + 1, used | (1 << j), pairs + [(i, j)])

    rec(0, 0, [])
    return best[0], -best[1]


def oracle_meteor(candidate, reference, cfg):
    m, chunks = oracle_alignment(candidate.tokens, reference.tokens, cfg)
    if m == 0:
        return 0.0
    p = m / len(candidate.tokens)
    r = m / len(reference.tokens)
    f = p * r / (cfg.alpha * p + (1 - cfg.alpha) * r)
    return f * (1 - cfg.gamma * (chunks / m) ** cfg.beta)


class TestTokenize:
    def test_lowercase_and_punctuation(self):
        assert tokenize("The red Cup!").tokens == ("the", "red", "cup")

    def test_commas_removed(self):
        assert tokenize("cup, on the left").tokens == ("cup", "on", "the", "left")

    def test_whitespace_only_raises(self):
        with pytest.raises(EmptyExpressionError):
            tokenize("  ")

    def test_punctuation_only_raises(self):
        with pytest.raises(EmptyExpressionError):
            tokenize("?!...")


class TestCrossEntropy:
    def one_hot_dist(self, tokens, vocab=None):
        vocab = vocab or default_vocabulary()
        rows = []
        for tok in tokens:
            row = np.zeros(len(vocab))
            row[vocab.strict_index(tok)] = 1.0
            rows.append(row)
        return ExpressionDistribution(rows, vocab)

    def test_exact_match_is_zero(self):
        dist = self.one_hot_dist(["the", "red", "cup", EOS])
        assert cross_entropy_loss(expr("the red cup"), dist, default_vocabulary()) == 0.0

    def test_uniform_distribution_ln_v(self):
        vocab = Vocabulary([EOS, "<unk>", "a", "b", "c", "d", "e", "f", "g", "h"])
        assert len(vocab) == 10
        dist = ExpressionDistribution([np.full(10, 0.1)] * 3, vocab)
        loss = cross_entropy_loss(expr("a b c"), dist, vocab)
        assert loss == pytest.approx(math.log(10), abs=1e-9)

    def test_two_step_hand_computed(self):
        # p1(red) = 0.8, p2(cup) = 0.5, expression "red cup", no EOS step:
        # (-ln 0.8 - ln 0.5) / 2
        vocab = default_vocabulary()
        size = len(vocab)
        row1 = np.full(size, 0.2 / (size - 1))
        row1[vocab.strict_index("red")] = 0.8
        row2 = np.full(size, 0.5 / (size - 1))
        row2[vocab.strict_index("cup")] = 0.5
        dist = ExpressionDistribution([row1, row2], vocab)
        loss = cross_entropy_loss(expr("red cup"), dist, vocab)
        assert loss == pytest.approx(0.458145365937077, abs=1e-9)
        assert loss == pytest.approx((-math.log(0.8) - math.log(0.5)) / 2, abs=1e-12)

    def test_padding_with_eos(self):
        # Shorter expression: remaining steps are scored against EOS.
        dist = self.one_hot_dist(["the", "red", "cup", EOS, EOS])
        assert cross_entropy_loss(expr("the red cup"), dist, default_vocabulary()) == 0.0

    def test_truncation_to_distribution_length(self):
        dist = self.one_hot_dist(["the", "red"])
        long_expr = expr("the red cup on the left beyond anything")
        assert cross_entropy_loss(long_expr, dist, default_vocabulary()) == 0.0

    def test_floor_keeps_loss_finite(self):
        dist = self.one_hot_dist(["the"])
        loss = cross_entropy_loss(expr("cup"), dist, default_vocabulary())
        assert loss == pytest.approx(-math.log(1e-12), abs=1e-9)

    def test_unknown_token_uses_unk_index(self):
        vocab = default_vocabulary()
        size = len(vocab)
        row = np.full(size, 0.1 / (size - 1))
        row[vocab.unk_index] = 0.9
        dist = ExpressionDistribution([row], vocab)
        loss = cross_entropy_loss(expr("zzzunknown"), dist, vocab)
        assert loss == pytest.approx(-math.log(0.9), abs=1e-12)

    def test_nonnegative_and_zero_iff_one_hot_match(self):
        vocab = default_vocabulary()
        dist = self.one_hot_dist(["the", "red", "cup", EOS])
        assert cross_entropy_loss(expr("the red cup"), dist, vocab) == 0.0
        assert cross_entropy_loss(expr("the red ball"), dist, vocab) > 0.0
        # Any mass off the matched token makes the loss positive.
        size = len(vocab)
        row = np.full(size, 0.02 / (size - 1))
        row[vocab.strict_index("the")] = 0.98
        soft = ExpressionDistribution([row], vocab)
        assert cross_entropy_loss(expr("the"), soft, vocab) > 0.0

    def test_uniform_mixture_increases_loss_monotonically(self):
        vocab = default_vocabulary()
        size = len(vocab)
        the_idx = vocab.strict_index("the")
        losses = []
        for eps in (0.0, 0.1, 0.3, 0.5, 0.9):
            row = np.zeros(size)
            row[the_idx] = 1.0
            mixed = (1 - eps) * row + eps / size
            dist = ExpressionDistribution([mixed], vocab)
            losses.append(cross_entropy_loss(expr("the"), dist, vocab))
        assert all(b > a for a, b in zip(losses, losses[1:]))


class TestMeteor:
    def test_zero_overlap_is_zero(self):
        assert meteor(expr("red ball"), expr("green cup"), EXACT_METEOR) == 0.0

    def test_identical_three_tokens_default_params(self):
        # 1 - 0.5 * (1/3)^3
        score = meteor(expr("the red cup"), expr("the red cup"), EXACT_METEOR)
        assert score == pytest.approx(0.9814814814814815, abs=1e-9)

    def test_green_glass_vs_green_cup_exact_only(self):
        # m=2, P=R=2/3, F=2/3, chunks=1, penalty=0.0625 -> 0.625
        score = meteor(expr("the green glass"), expr("the green cup"), EXACT_METEOR)
        assert score == pytest.approx(0.625, abs=1e-9)

    def test_green_glass_vs_green_cup_with_synonyms(self):
        # (cup, glass) is in the bundled lexicon: full alignment, one chunk.
        score = meteor(expr("the green glass"), expr("the green cup"), MeteorConfig())
        assert score == pytest.approx(1 - 0.5 * (1 / 3) ** 3, abs=1e-9)

    def test_identity_formula(self):
        for text in ("cup", "the red cup", "the large blue ball on the left"):
            e = expr(text)
            m = len(e.tokens)
            assert meteor(e, e, EXACT_METEOR) == pytest.approx(
                1 - 0.5 * (1 / m) ** 3, abs=1e-12)

    def test_score_in_unit_interval(self):
        rng = random.Random(0)
        alphabet = ["a", "b", "c", "d", "the", "cup", "red"]
        for _ in range(300):
            c = expr(" ".join(rng.choices(alphabet, k=rng.randint(1, 6))))
            r = expr(" ".join(rng.choices(alphabet, k=rng.randint(1, 6))))
            assert 0.0 <= meteor(c, r, MeteorConfig()) <= 1.0

    def test_empty_input_rejected(self):
        with pytest.raises(EmptyExpressionError):
            meteor_alignment((), ("a",), EXACT_METEOR)

    def test_symmetry_of_alignment(self):
        rng = random.Random(1)
        alphabet = ["a", "b", "c", "the", "cup"]
        for _ in range(200):
            c = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            r = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            assert meteor_alignment(c, r, EXACT_METEOR) == meteor_alignment(r, c, EXACT_METEOR)


class TestMeteorOracle:
    def test_alignment_matches_bruteforce_exact(self):
        rng = random.Random(7)
        alphabet = ["a", "b", "c", "d", "the", "cup", "red", "left"]
        for _ in range(500):
            c = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            r = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            assert meteor_alignment(c, r, EXACT_METEOR) == oracle_alignment(c, r, EXACT_METEOR)

    def test_alignment_matches_bruteforce_with_synonyms(self):
        rng = random.Random(8)
        cfg = MeteorConfig()
        alphabet = ["cup", "mug", "glass", "ball", "sphere", "red", "crimson", "the"]
        for _ in range(500):
            c = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            r = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            assert meteor_alignment(c, r, cfg) == oracle_alignment(c, r, cfg)

    def test_score_matches_oracle(self):
        rng = random.Random(9)
        cfg = MeteorConfig()
        alphabet = ["cup", "mug", "ball", "red", "blue", "the", "left", "on"]
        for _ in range(300):
            c = expr(" ".join(rng.choices(alphabet, k=rng.randint(1, 6))))
            r = expr(" ".join(rng.choices(alphabet, k=rng.randint(1, 6))))
            assert meteor(c, r, cfg) == pytest.approx(oracle_meteor(c, r, cfg), abs=1e-12)


class TestSynonymMonotonicity:
    def test_matches_never_decrease_with_synonyms(self):
        rng = random.Random(10)
        cfg = MeteorConfig()
        alphabet = ["cup", "mug", "glass", "ball", "sphere", "red", "crimson", "the"]
        for _ in range(300):
            c = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            r = tuple(rng.choices(alphabet, k=rng.randint(1, 6)))
            m_exact, _ = meteor_alignment(c, r, EXACT_METEOR)
            m_syn, _ = meteor_alignment(c, r, cfg)
            assert m_syn >= m_exact

    def test_score_never_decreases_on_template_sentences(self):
        rng = random.Random(11)
        cfg = MeteorConfig()
        colors = ["red", "blue", "green", "crimson", "azure"]
        cats = ["cup", "ball", "mug", "sphere", "box"]
        tails = ["", " on the left", " on the right", " in the middle"]
        for _ in range(300):
            c = expr(("the " + rng.choice(colors) + " " + rng.choice(cats)
                      + rng.choice(tails)).strip())
            r = expr(("the " + rng.choice(colors) + " " + rng.choice(cats)
                      + rng.choice(tails)).strip())
            assert meteor(c, r, cfg) >= meteor(c, r, EXACT_METEOR) - 1e-12


class TestLexicon:
    def test_bundled_lexicon_pairs(self):
        lex = load_synonym_lexicon()
        assert frozenset(("cup", "mug")) in lex
        assert frozenset(("cup", "glass")) in lex
        assert frozenset(("grey", "gray")) in lex

    def test_meteor_config_validation(self):
        with pytest.raises(Exception):
            MeteorConfig(alpha=1.5)
        with pytest.raises(Exception):
            MeteorConfig(beta=0)
        with pytest.raises(Exception):
            MeteorConfig(matchers=("exact", "stem"))


class TestLexiconFile:
    def test_custom_lexicon_file(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("alpha beta\n# comment\n\ngamma delta\n")
        lex = load_synonym_lexicon(str(path))
        assert frozenset(("alpha", "beta")) in lex
        assert frozenset(("gamma", "delta")) in lex
        assert len(lex) == 2

    def test_bad_lexicon_line_rejected(self, tmp_path):
        path = tmp_path / "syn.txt"
        path.write_text("only_one_token\n")
        with pytest.raises(Exception, match="bad synonym line"):
            load_synonym_lexicon(str(path))
