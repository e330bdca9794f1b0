import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from costkit.complexity import (
    BASE_TWO,
    DENOM_PER_GROUP,
    DENOM_WHOLE_DOCUMENT,
    Corpus,
    UndefinedMetric,
    analyze,
    corpus_from_token_sentences,
    count_syllables,
    entropy_of_counts,
    format_table,
    kincaid_grade,
    pos_entropy,
    segment_and_tokenize,
    segment_sentences,
    tag_corpus_builtin,
    tree_depths,
    type_count,
)
from costkit.conllu import MalformedTree, ParsedSentence, parse_conllu, tree_depth

# Words whose dictionary syllable count the heuristic reproduces; checked by
# hand against a standard dictionary. The heuristic is known to miss some
# -ed past tenses and rare clusters, so none of those appear here.
SYLLABLE_FIXTURE = {
    # one syllable
    "cat": 1, "dog": 1, "mat": 1, "sat": 1, "the": 1, "egg": 1, "cup": 1,
    "bowl": 1, "tray": 1, "block": 1, "plate": 1, "knife": 1, "spoon": 1,
    "fork": 1, "bread": 1, "cheese": 1, "milk": 1, "juice": 1, "sink": 1,
    "pan": 1, "pot": 1, "jar": 1, "whisk": 1, "red": 1, "blue": 1,
    "green": 1, "hand": 1, "branch": 1, "strength": 1, "through": 1,
    "piece": 1, "house": 1, "clean": 1, "fresh": 1, "a": 1, "egg's": 1,
    "stack": 1, "sort": 1, "move": 1, "place": 1, "ern": 1, "whale": 1,
    # two syllables
    "table": 2, "apple": 2, "bottle": 2, "little": 2, "simple": 2,
    "purple": 2, "kitchen": 2, "robot": 2, "yellow": 2, "water": 2,
    "lettuce": 2, "basket": 2, "carrot": 2, "pepper": 2, "butter": 2,
    "towel": 2, "salad": 2, "sandwich": 2, "cooking": 2, "slicing": 2,
    "gripper": 2, "tidy": 2, "pickle": 2, "noodle": 2, "marble": 2,
    "circle": 2, "candle": 2, "orange": 2, "garden": 2, "window": 2,
    "paper": 2, "picking": 2, "placing": 2, "washing": 2, "gently": 2,
    "syllable": 3,
    # three syllables
    "banana": 3, "tomato": 3, "cucumber": 3, "potato": 3, "container": 3,
    "camera": 3, "family": 3, "animal": 3, "elephant": 3, "umbrella": 3,
    "vanilla": 3, "spaghetti": 3, "broccoli": 3, "celery": 3, "buffalo": 3,
    "hospital": 3, "countertop": 3, "strawberry": 3,
    "tomorrow": 3, "remember": 3, "important": 3, "neatly": 2,
    # four or more syllables
    "semicircle": 4, "avocado": 4, "macaroni": 4, "television": 4,
    "watermelon": 4, "caterpillar": 4, "calculator": 4, "refrigerator": 5,
}


class TestTokenizer:
    def test_two_simple_sentences(self):
        corpus = segment_and_tokenize("Pick the egg. Place it.")
        assert corpus.sentences == (("Pick", "the", "egg"), ("Place", "it"))

    def test_empty_input_gives_empty_corpus(self):
        assert segment_and_tokenize("").sentences == ()

    def test_abbreviation_guard(self):
        assert segment_sentences("Dr. Smith cooks.") == ["Dr. Smith cooks."]
        assert segment_sentences("Wash it, e.g. the bowl.") == ["Wash it, e.g. the bowl."]

    def test_initials_do_not_split(self):
        assert segment_sentences("J. Smith stirs. K. Lee bakes.") == [
            "J. Smith stirs.",
            "K. Lee bakes.",
        ]

    def test_newlines_end_sentences(self):
        corpus = segment_and_tokenize("pick the egg\nplace the egg\n")
        assert len(corpus.sentences) == 2

    def test_case_preserved_in_tokens(self):
        corpus = segment_and_tokenize("PICK up the Egg.")
        assert corpus.sentences[0] == ("PICK", "up", "the", "Egg")


class TestSyllables:
    def test_fixture_agreement(self):
        mismatches = {
            word: (count_syllables(word), expected)
            for word, expected in SYLLABLE_FIXTURE.items()
            if count_syllables(word) != expected
        }
        assert mismatches == {}

    def test_minimum_one(self):
        assert count_syllables("a") == 1
        assert count_syllables("bcd") == 1
        assert count_syllables("42") == 1


class TestKincaid:
    def test_hand_computed_sentence(self):
        corpus = segment_and_tokenize("The cat sat on the mat.")
        assert kincaid_grade(corpus) == pytest.approx(-1.45, abs=1e-9)

    def test_invariant_under_duplication(self):
        text = "Put the red block in the blue bowl. Wash the apple."
        once = kincaid_grade(segment_and_tokenize(text))
        twice = kincaid_grade(segment_and_tokenize(text + " " + text))
        assert twice == pytest.approx(once, abs=1e-12)

    def test_monotone_in_syllables(self):
        corpus = segment_and_tokenize("The cat sat on the mat.")
        inflated = kincaid_grade(corpus, syllables=lambda w: count_syllables(w) + 1)
        assert inflated > kincaid_grade(corpus)

    def test_empty_corpus_undefined(self):
        with pytest.raises(UndefinedMetric):
            kincaid_grade(Corpus(sentences=()))


class TestTypes:
    def test_distinct_case_folded(self):
        corpus = segment_and_tokenize("pick the block pick the bowl")
        assert type_count(corpus) == 4

    def test_case_fold_merges(self):
        assert type_count(segment_and_tokenize("Pick pick")) == 1

    def test_empty(self):
        assert type_count(Corpus(sentences=())) == 0


def _chain(n):
    # token i hangs off token i-1; token 1 is the root
    return ParsedSentence(
        tokens=tuple(f"w{i}" for i in range(1, n + 1)),
        upos=("X",) * n,
        xpos=("X",) * n,
        heads=tuple(range(n)),
    )


def _star(n):
    # a root with n-1 direct children: depth 2
    return ParsedSentence(
        tokens=tuple(f"w{i}" for i in range(1, n + 1)),
        upos=("X",) * n,
        xpos=("X",) * n,
        heads=(0,) + (1,) * (n - 1),
    )


class TestTreeDepth:
    def test_single_token_depth_one(self):
        assert tree_depth(_chain(1)) == 1

    def test_chain_of_three_depth_three(self):
        assert tree_depth(_chain(3)) == 3

    def test_mean_and_population_variance(self):
        mean, variance = tree_depths([_star(4), _chain(4)])
        assert mean == pytest.approx(3.0)
        assert variance == pytest.approx(1.0)

    def test_variance_zero_iff_all_equal(self):
        _, variance = tree_depths([_chain(3), _chain(3)])
        assert variance == 0.0

    def test_multi_root_rejected(self):
        bad = ParsedSentence(("a", "b"), ("X", "X"), ("X", "X"), (0, 0))
        with pytest.raises(MalformedTree):
            tree_depth(bad)

    def test_cycle_rejected(self):
        bad = ParsedSentence(("a", "b", "c"), ("X",) * 3, ("X",) * 3, (0, 3, 2))
        with pytest.raises(MalformedTree):
            tree_depth(bad)

    def test_out_of_range_head_rejected(self):
        bad = ParsedSentence(("a", "b"), ("X", "X"), ("X", "X"), (0, 9))
        with pytest.raises(MalformedTree):
            tree_depth(bad)

    def test_conllu_round_trip(self):
        text = (
            "# sent_id = 1\n"
            "1\tPick\tpick\tVERB\tVB\t_\t0\troot\t_\t_\n"
            "2\tthe\tthe\tDET\tDT\t_\t3\tdet\t_\t_\n"
            "3\tegg\tegg\tNOUN\tNN\t_\t1\tobj\t_\t_\n"
            "\n"
            "1\tGo\tgo\tVERB\tVB\t_\t0\troot\t_\t_\n"
        )
        sentences = parse_conllu(text)
        assert [s.tokens for s in sentences] == [("Pick", "the", "egg"), ("Go",)]
        assert [tree_depth(s) for s in sentences] == [3, 1]

    def test_multiword_ranges_skipped(self):
        text = (
            "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tdo\tdo\tAUX\tVBP\t_\t0\troot\t_\t_\n"
            "2\tnot\tnot\tPART\tRB\t_\t1\tadvmod\t_\t_\n"
        )
        sentences = parse_conllu(text)
        assert sentences[0].tokens == ("do", "not")


def _brute_force_entropy(counts, total, base="natural"):
    log = math.log if base == "natural" else math.log2
    acc = 0.0
    for c in counts.values():
        p = c / total
        acc += p * log(p)
    return -acc


class TestEntropy:
    def test_degenerate_distribution_is_zero(self):
        assert entropy_of_counts({"egg": 5}, 5) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_distribution_is_log_k(self):
        for k in (2, 3, 4, 7, 20):
            counts = {f"w{i}": 1 for i in range(k)}
            assert entropy_of_counts(counts, k) == pytest.approx(math.log(k), abs=1e-12)

    def test_base_two(self):
        counts = {f"w{i}": 1 for i in range(4)}
        assert entropy_of_counts(counts, 4, base=BASE_TWO) == pytest.approx(2.0, abs=1e-12)

    def test_matches_brute_force_on_random_count_maps(self):
        rng = random.Random(0)
        for _ in range(50):
            n_words = rng.randint(1, 12)
            counts = {f"w{i}": rng.randint(1, 30) for i in range(n_words)}
            total = sum(counts.values())
            assert entropy_of_counts(counts, total) == pytest.approx(
                _brute_force_entropy(counts, total), abs=1e-12
            )
            doc_total = total + rng.randint(1, 50)
            assert entropy_of_counts(counts, doc_total) == pytest.approx(
                _brute_force_entropy(counts, doc_total), abs=1e-12
            )

    @given(
        st.dictionaries(
            st.text(alphabet="abcdefg", min_size=1, max_size=4),
            st.integers(min_value=1, max_value=100),
            min_size=1,
            max_size=20,
        )
    )
    def test_bounds_property(self, counts):
        total = sum(counts.values())
        h = entropy_of_counts(counts, total)
        assert -1e-12 <= h <= math.log(len(counts)) + 1e-12
        if len(counts) == 1:
            assert h == pytest.approx(0.0, abs=1e-12)
        if len(set(counts.values())) == 1:
            assert h == pytest.approx(math.log(len(counts)), abs=1e-12)


class TestPosEntropy:
    def _corpus_and_tags(self):
        corpus = corpus_from_token_sentences(
            [["Pick", "the", "egg"], ["Wash", "the", "red", "apple", "carefully"]]
        )
        tags = [["VB", "OTHER", "NN"], ["VB", "OTHER", "AD", "NN", "AD"]]
        return corpus, tags

    def test_per_group_values(self):
        corpus, tags = self._corpus_and_tags()
        result = pos_entropy(corpus, tags)
        # NN: egg, apple once each -> ln 2; VB: pick, wash -> ln 2
        assert result["NN"] == pytest.approx(math.log(2), abs=1e-12)
        assert result["VB"] == pytest.approx(math.log(2), abs=1e-12)
        assert result["AD"] == pytest.approx(math.log(2), abs=1e-12)

    def test_whole_document_denominator_matches_brute_force(self):
        corpus, tags = self._corpus_and_tags()
        result = pos_entropy(corpus, tags, denominator=DENOM_WHOLE_DOCUMENT)
        # 8 tokens in the document; NN group has egg=1, apple=1
        expected = _brute_force_entropy({"egg": 1, "apple": 1}, 8)
        assert result["NN"] == pytest.approx(expected, abs=1e-12)

    def test_group_with_zero_tokens_is_undefined(self):
        corpus = corpus_from_token_sentences([["the", "of"]])
        result = pos_entropy(corpus, [["OTHER", "OTHER"]])
        assert result == {"NN": None, "VB": None, "AD": None}

    def test_treebank_tags_accepted(self):
        corpus = corpus_from_token_sentences([["Pick", "eggs", "quickly"]])
        result = pos_entropy(corpus, [["VBP", "NNS", "RB"]])
        assert result["NN"] == pytest.approx(0.0, abs=1e-12)
        assert result["VB"] == pytest.approx(0.0, abs=1e-12)
        assert result["AD"] == pytest.approx(0.0, abs=1e-12)


class TestBuiltinTagger:
    def test_command_register(self):
        corpus = corpus_from_token_sentences([["Pick", "the", "red", "block"]])
        assert tag_corpus_builtin(corpus) == [["VB", "OTHER", "AD", "NN"]]

    def test_adverb_suffix(self):
        corpus = corpus_from_token_sentences([["Wash", "it", "thoroughly"]])
        assert tag_corpus_builtin(corpus)[0][2] == "AD"

    def test_sentence_initial_imperative(self):
        corpus = corpus_from_token_sentences([["Clean", "the", "clean", "bowl"]])
        tags = tag_corpus_builtin(corpus)[0]
        assert tags[0] == "VB" and tags[2] == "AD"


class TestAnalyze:
    def test_full_report_from_text(self):
        corpus = segment_and_tokenize("Pick the egg. Place the egg in the bowl.", label="steps")
        report = analyze(corpus)
        assert report.label == "steps"
        assert report.kincaid is not None
        assert report.tree_depth_mean is None  # no parses supplied
        assert report.type_count == 6
        assert report.entropy_dict()["VB"] is not None

    def test_empty_corpus_all_undefined(self):
        report = analyze(Corpus(sentences=(), label="empty"))
        assert report.kincaid is None
        assert report.tree_depth_mean is None
        assert report.type_count == 0
        assert set(report.entropy_dict().values()) == {None}

    def test_report_bytes_deterministic(self):
        corpus = segment_and_tokenize("Pick the egg. Wash the apple.")
        assert analyze(corpus).to_json() == analyze(corpus).to_json()

    def test_report_from_conllu_only(self):
        text = (
            "1\tPick\tpick\tVERB\tVB\t_\t0\troot\t_\t_\n"
            "2\tthe\tthe\tDET\tDT\t_\t3\tdet\t_\t_\n"
            "3\tegg\tegg\tNOUN\tNN\t_\t1\tobj\t_\t_\n"
        )
        report = analyze(conllu_sentences=parse_conllu(text), label="parsed")
        assert report.tree_depth_mean == pytest.approx(3.0)
        assert report.type_count == 3

    def test_table_formatting(self):
        corpus = segment_and_tokenize("Pick the egg.", label="steps")
        table = format_table([analyze(corpus)])
        lines = table.splitlines()
        assert lines[0].startswith("Corpus")
        assert "steps" in lines[1]
