import math

import numpy as np
import pytest

from mriexplain.textmetrics import (
    ClassificationReport,
    ConfusionMatrix,
    TermFrequencyEmbedder,
    classification_metrics,
    coherence,
    count_syllables,
    fres,
    maas,
    split_sentences,
    text_report,
    tokenize,
    ttr,
)


class TestTokenize:
    def test_simple(self):
        assert tokenize("The tumor, the tumor.") == ["the", "tumor", "the", "tumor"]

    def test_empty(self):
        assert tokenize("") == []

    def test_apostrophes_and_hyphens(self):
        assert tokenize("patient's MRI-scan") == ["patient's", "mri", "scan"]

    def test_digits_separate(self):
        assert tokenize("64.10% overlap2see") == ["overlap", "see"]

    def test_typographic_apostrophe(self):
        assert tokenize("patient’s") == ["patient's"]


class TestSentences:
    def test_split_on_terminators(self):
        assert split_sentences("One here. Two there! Three?") == [
            "One here",
            "Two there",
            "Three",
        ]

    def test_decimal_points_do_not_split(self):
        assert len(split_sentences("Coverage was 64.10% overall.")) == 1

    def test_tokenless_segments_dropped(self):
        assert split_sentences("!!! ...") == []


class TestSyllables:
    @pytest.mark.parametrize(
        "word,expected",
        [
            ("cat", 1),
            ("the", 1),
            ("make", 1),
            ("free", 1),
            ("table", 2),
            ("apple", 2),
            ("whale", 1),
            ("style", 1),
            ("window", 2),
            ("tumor", 2),
            ("meningioma", 4),  # 'io' is one vowel run under the heuristic
            ("x", 1),
        ],
    )
    def test_cases(self, word, expected):
        assert count_syllables(word) == expected


class TestTtr:
    def test_half(self):
        assert ttr("the tumor the tumor") == 0.5

    def test_all_distinct(self):
        assert ttr("alpha beta gamma delta") == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ttr("1234 ...")

    def test_exact_rational(self):
        words = [f"w{chr(97 + i % 7)}" for i in range(21)]
        text = " ".join(words)
        tokens = tokenize(text)
        assert ttr(text) == len(set(tokens)) / len(tokens)


class TestMaas:
    def test_all_distinct_is_zero(self):
        assert maas("one two three four five six seven eight nine ten") == 0.0

    def test_hundred_tokens_fifty_types(self):
        vocab = [f"{a}{b}" for a in "bcdfghjklm" for b in "aeiou"]
        assert len(vocab) == 50
        text = " ".join(vocab * 2)
        expected = (math.log(100) - math.log(50)) / math.log(100) ** 2
        assert maas(text) == pytest.approx(expected, abs=1e-15)
        assert maas(text) == pytest.approx(0.03274, abs=1e-4)

    def test_needs_two_tokens(self):
        with pytest.raises(ValueError):
            maas("single")

    def test_nonnegative_zero_iff_distinct(self):
        assert maas("aa bb aa") > 0.0


class TestFres:
    def test_ten_monosyllables(self):
        text = "the cat sat on the big red mat at dawn."
        assert fres(text) == pytest.approx(206.835 - 1.015 * 10 - 84.6 * 1, abs=1e-12)
        assert fres(text) == pytest.approx(112.085, abs=1e-9)

    def test_asl20_asw2(self):
        text = " ".join(["window"] * 20) + "."
        assert fres(text) == pytest.approx(206.835 - 1.015 * 20 - 84.6 * 2, abs=1e-12)
        assert fres(text) == pytest.approx(17.335, abs=1e-9)

    def test_linear_in_asl(self):
        ten = "the cat sat on the big red mat at dawn."
        eleven = "the cat sat on the big red mat at dawn now."
        assert fres(ten) - fres(eleven) == pytest.approx(1.015, abs=1e-12)

    def test_no_sentence_rejected(self):
        with pytest.raises(ValueError):
            fres("")


class FixedEmbedder:
    def __init__(self, vectors):
        self.vectors = [np.asarray(v, dtype=float) for v in vectors]

    def embed(self, sentences):
        return self.vectors[: len(sentences)]


class TestCoherence:
    def test_identical_sentences(self):
        assert coherence("The tumor is here. The tumor is here.") == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_sentences(self):
        # disjoint vocabularies give orthogonal term-frequency vectors
        assert coherence("alpha beta. gamma delta.") == pytest.approx(0.0)

    def test_mean_of_adjacent_pairs(self):
        text = "One two. Three four. Five six."
        emb = FixedEmbedder([(1.0, 0.0), (0.8, 0.6), (0.0, 1.0)])
        assert coherence(text, emb) == pytest.approx(0.7, abs=1e-12)

    def test_needs_two_sentences(self):
        with pytest.raises(ValueError):
            coherence("Only one sentence here.")

    def test_zero_vector_contributes_zero(self):
        text = "One two. Three four."
        emb = FixedEmbedder([(0.0, 0.0), (1.0, 0.0)])
        assert coherence(text, emb) == 0.0

    def test_scale_invariance(self):
        text = "The tumor displaces tissue. The tissue shows compression. Compression affects function."

        class Scaled:
            def __init__(self, k):
                self.k = k

            def embed(self, sentences):
                return [self.k * v for v in TermFrequencyEmbedder().embed(sentences)]

        base = coherence(text)
        assert coherence(text, Scaled(3.7)) == pytest.approx(base, abs=1e-12)
        assert coherence(text, Scaled(0.01)) == pytest.approx(base, abs=1e-12)


class TestTextReport:
    def test_fields_consistent(self):
        text = "The tumor is large. The tumor is near the cortex."
        rep = text_report(text)
        assert rep.ttr * rep.n_tokens == pytest.approx(rep.n_types)
        assert rep.n_tokens == len(tokenize(text))
        assert math.isfinite(rep.maas) and math.isfinite(rep.fres) and math.isfinite(rep.cohs)


REFERENCE_COUNTS = np.array(
    [
        [113, 0, 8],
        [6, 158, 6],
        [1, 2, 189],
    ]
)
CLASSES = ("Glioma", "Meningioma", "PituitaryTumor")


class TestClassificationMetrics:
    def test_reference_confusion_matrix(self):
        report = classification_metrics(ConfusionMatrix(CLASSES, REFERENCE_COUNTS))
        assert report.accuracy == pytest.approx(460 / 483, abs=1e-12)
        assert report.per_class["Glioma"].recall == pytest.approx(113 / 121)
        assert report.per_class["Meningioma"].recall == pytest.approx(158 / 170)
        assert report.per_class["PituitaryTumor"].recall == pytest.approx(189 / 192)
        assert report.per_class["Glioma"].precision == pytest.approx(113 / 120)

    def test_identity_matrix(self):
        report = classification_metrics(ConfusionMatrix(("a", "b"), np.eye(2, dtype=int) * 5))
        assert report.accuracy == 1.0
        assert report.macro.precision == report.macro.recall == report.macro.f1 == 1.0

    def test_never_predicted_class_precision_zero(self):
        counts = np.array([[5, 0], [3, 0]])
        with pytest.warns(UserWarning, match="never predicted"):
            report = classification_metrics(ConfusionMatrix(("a", "b"), counts))
        assert report.per_class["b"].precision == 0.0
        assert report.per_class["b"].f1 == 0.0

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            classification_metrics(ConfusionMatrix(("a",), np.zeros((1, 1), dtype=int)))

    def test_macro_invariant_under_reordering(self):
        perm = [2, 0, 1]
        permuted = REFERENCE_COUNTS[np.ix_(perm, perm)]
        r1 = classification_metrics(ConfusionMatrix(CLASSES, REFERENCE_COUNTS))
        r2 = classification_metrics(
            ConfusionMatrix(tuple(CLASSES[i] for i in perm), permuted)
        )
        assert r1.macro.f1 == pytest.approx(r2.macro.f1, abs=1e-15)
        assert r1.macro.precision == pytest.approx(r2.macro.precision, abs=1e-15)
        assert r1.accuracy == pytest.approx(r2.accuracy)

    def test_matrix_validation(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(("a", "b"), np.zeros((2, 3), dtype=int))
        with pytest.raises(ValueError):
            ConfusionMatrix(("a",), np.array([[-1]]))
        with pytest.raises(ValueError):
            ConfusionMatrix(("a",), np.array([[0.5]]))
