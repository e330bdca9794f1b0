"""Corpus complexity metrics: readability grade, dependency-tree depth,
vocabulary size, and per-part-of-speech word-frequency entropy.

The entropy of one part-of-speech group is

    H(W) = -sum over w in W of p(w) * log p(w)

where W is the set of distinct words in the group and p(w) is the word's
occurrence count over a denominator. Two denominator conventions exist:
``per_group`` (tokens of that group; probabilities sum to 1) and
``whole_document`` (all tokens in the corpus). Both are supported;
``per_group`` is the default because it yields a proper distribution.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from costkit.conllu import ParsedSentence, depths
from costkit.model import CostkitError, canonical_json

BASE_NATURAL = "natural"
BASE_TWO = "two"
DENOM_PER_GROUP = "per_group"
DENOM_WHOLE_DOCUMENT = "whole_document"

POS_GROUPS = ("NN", "VB", "AD")


class UndefinedMetric(CostkitError):
    """The metric has no value on this input (typically an empty corpus)."""


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[tuple[str, ...], ...]
    label: str = ""

    def tokens(self) -> list[str]:
        return [token for sentence in self.sentences for token in sentence]

    def word_count(self) -> int:
        return sum(len(s) for s in self.sentences)


_TOKEN = re.compile(r"[A-Za-z0-9']+")
_ABBREVIATIONS = frozenset(
    {
        "dr", "mr", "mrs", "ms", "st", "no", "vs", "etc", "jr", "sr", "prof",
        "fig", "al", "inc", "dept", "approx",
    }
)


def _is_abbreviation_dot(raw: str, dot: int) -> bool:
    j = dot - 1
    while j >= 0 and (raw[j].isalnum() or raw[j] == "'"):
        j -= 1
    word = raw[j + 1 : dot]
    if not word:
        return False
    if len(word) == 1 and word.isupper():
        return True  # an initial, as in "J. Smith"
    if j >= 0 and raw[j] == "." and len(word) == 1:
        return True  # second half of "e.g." / "i.e."
    return word.lower() in _ABBREVIATIONS


def segment_sentences(raw: str) -> list[str]:
    """Split on terminal punctuation with an abbreviation guard.

    Newlines also end sentences, which makes one-sentence-per-line corpora
    and ordinary prose both behave.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch == "\n":
            chunk = raw[start:i].strip()
            if chunk:
                sentences.append(chunk)
            start = i + 1
            i += 1
            continue
        if ch in ".!?":
            j = i
            while j + 1 < n and raw[j + 1] in ".!?":
                j += 1
            if ch == "." and i == j and _is_abbreviation_dot(raw, i):
                i += 1
                continue
            k = j + 1
            while k < n and raw[k] in " \t":
                k += 1
            if k >= n or raw[k] == "\n" or raw[k].isupper() or raw[k].isdigit() or raw[k] in "\"'(":
                chunk = raw[start : j + 1].strip()
                if chunk:
                    sentences.append(chunk)
                start = j + 1
                i = j + 1
                continue
            i = j + 1
            continue
        i += 1
    tail = raw[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(sentence: str) -> tuple[str, ...]:
    return tuple(m.group(0) for m in _TOKEN.finditer(sentence))


def segment_and_tokenize(raw: str, label: str = "") -> Corpus:
    sentences = tuple(
        tokens for tokens in (tokenize(s) for s in segment_sentences(raw)) if tokens
    )
    return Corpus(sentences=sentences, label=label)


def corpus_from_token_sentences(
    sentences: Iterable[Sequence[str]], label: str = ""
) -> Corpus:
    return Corpus(tuple(tuple(s) for s in sentences if len(s)), label=label)


def count_syllables(word: str) -> int:
    """Heuristic syllable count: vowel groups, silent-e subtraction, and
    consonant+le restoration, with a floor of one."""
    w = re.sub(r"[^a-z]", "", word.lower())
    if not w:
        return 1
    count = len(re.findall(r"[aeiouy]+", w))
    if count > 1 and w.endswith("e"):
        if w.endswith("le") and len(w) > 2 and w[-3] not in "aeiouy":
            pass  # the -le forms its own syllable: table, little
        else:
            count -= 1
    return max(1, count)


def kincaid_grade(
    corpus: Corpus, syllables: Callable[[str], int] = count_syllables
) -> float:
    """0.39 * words/sentence + 11.8 * syllables/word - 15.59, unclamped."""
    n_sentences = len(corpus.sentences)
    n_words = corpus.word_count()
    if n_sentences == 0 or n_words == 0:
        raise UndefinedMetric("readability grade needs at least one sentence and word")
    n_syllables = sum(syllables(token) for token in corpus.tokens())
    return 0.39 * (n_words / n_sentences) + 11.8 * (n_syllables / n_words) - 15.59


def type_count(corpus: Corpus) -> int:
    return len({token.casefold() for token in corpus.tokens()})


def tree_depths(sentences: Sequence[ParsedSentence]) -> tuple[float, float]:
    """Mean and population variance of per-sentence dependency depth."""
    values = depths(sentences)
    if not values:
        raise UndefinedMetric("tree depth needs at least one parsed sentence")
    return statistics.fmean(values), statistics.pvariance(values)


# -- part-of-speech handling ------------------------------------------------


def tag_to_group(tag: str) -> str | None:
    """Map a treebank XPOS or universal UPOS tag onto NN / VB / AD."""
    t = tag.upper()
    if t in ("NOUN", "PROPN") or t.startswith("NN"):
        return "NN"
    if t in ("VERB", "AUX", "MD") or t.startswith("VB"):
        return "VB"
    if t in ("ADJ", "ADV") or t.startswith("JJ") or t.startswith("RB"):
        return "AD"
    return None


_FUNCTION_WORDS = frozenset(
    """the a an in on at to into onto from with and or then before after by of
    for it its them they he she him her his this that these those there here
    up down under over so as not no yes if when while until once each every
    all some any both either neither but nor out off away back please you
    your yours we our ours i me my mine one two three four five six seven
    eight nine ten who what which where why how""".split()
)

_VERB_WORDS = frozenset(
    """pick place put move take grab wash slice cut crack beat stir pour mix
    arrange clear tidy set bring carry open close keep leave make clean hold
    lift drop sort stack collect fill peel chop dice cook boil fry serve wipe
    rinse dry store fetch get go come turn press push pull use need want
    finish start begin stay remain look find see ensure avoid is are was were
    be been am do does did has have had can could should would will may might
    must""".split()
)

_ADJ_ADV_WORDS = frozenset(
    """red yellow blue green purple orange big small large little neat neatly
    carefully gently slowly quickly thoroughly fresh freshly clean dirty left
    right same matching colored remaining other new old empty full ready
    first second next last good well better best warm cold hot dry wet high
    low deep shallow soft hard heavy light early late only also very really
    quite almost always never still away alone""".split()
)


def tag_corpus_builtin(corpus: Corpus) -> list[list[str]]:
    """Lexicon + suffix tagger for the command/steps register.

    Deliberately small and lower-fidelity than a statistical tagger; use
    ingested CoNLL-U annotations when quality matters.
    """
    tagged: list[list[str]] = []
    for sentence in corpus.sentences:
        tags: list[str] = []
        for position, token in enumerate(sentence):
            w = token.casefold()
            if w in _FUNCTION_WORDS:
                tags.append("OTHER")
            elif position == 0 and w in _VERB_WORDS:
                tags.append("VB")
            elif w in _ADJ_ADV_WORDS:
                tags.append("AD")
            elif w in _VERB_WORDS:
                tags.append("VB")
            elif w.endswith("ly"):
                tags.append("AD")
            elif w.endswith(("ing", "ed")):
                tags.append("VB")
            else:
                tags.append("NN")
        tagged.append(tags)
    return tagged


def tags_from_conllu(sentences: Sequence[ParsedSentence]) -> list[list[str]]:
    tagged = []
    for sentence in sentences:
        tags = []
        for upos, xpos in zip(sentence.upos, sentence.xpos):
            group = tag_to_group(upos) or tag_to_group(xpos)
            tags.append(group or "OTHER")
        tagged.append(tags)
    return tagged


def entropy_of_counts(
    counts: Mapping[str, int], total: int, base: str = BASE_NATURAL
) -> float:
    """H = -sum of (c/total) * log(c/total) over the count map."""
    if total <= 0 or not counts:
        raise UndefinedMetric("entropy needs a nonempty count map and positive total")
    log = math.log if base == BASE_NATURAL else math.log2
    return -sum((c / total) * log(c / total) for c in counts.values() if c > 0)


def pos_entropy(
    corpus: Corpus,
    tags: Sequence[Sequence[str]],
    base: str = BASE_NATURAL,
    denominator: str = DENOM_PER_GROUP,
) -> dict[str, float | None]:
    """Word-frequency entropy for each of NN, VB, AD.

    A group with zero tokens gets None (undefined) rather than 0.0, so a
    missing group cannot be confused with a degenerate one-word group.
    """
    if base not in (BASE_NATURAL, BASE_TWO):
        raise ValueError(f"unknown base {base!r}")
    if denominator not in (DENOM_PER_GROUP, DENOM_WHOLE_DOCUMENT):
        raise ValueError(f"unknown denominator {denominator!r}")
    if len(tags) != len(corpus.sentences):
        raise ValueError("tags must align with corpus sentences")

    counts: dict[str, dict[str, int]] = {g: {} for g in POS_GROUPS}
    total_tokens = 0
    for sentence, sentence_tags in zip(corpus.sentences, tags):
        if len(sentence) != len(sentence_tags):
            raise ValueError("tags must align with sentence tokens")
        for token, tag in zip(sentence, sentence_tags):
            total_tokens += 1
            group = tag if tag in POS_GROUPS else tag_to_group(tag)
            if group:
                word = token.casefold()
                counts[group][word] = counts[group].get(word, 0) + 1

    out: dict[str, float | None] = {}
    for group in POS_GROUPS:
        group_counts = counts[group]
        if not group_counts:
            out[group] = None
            continue
        total = (
            sum(group_counts.values())
            if denominator == DENOM_PER_GROUP
            else total_tokens
        )
        out[group] = entropy_of_counts(group_counts, total, base)
    return out


# -- full report -------------------------------------------------------------


@dataclass(frozen=True)
class CorpusReport:
    label: str
    kincaid: float | None
    tree_depth_mean: float | None
    tree_depth_variance: float | None
    type_count: int
    entropy: tuple[tuple[str, float | None], ...]

    def entropy_dict(self) -> dict[str, float | None]:
        return dict(self.entropy)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kincaid": self.kincaid,
            "tree_depth_mean": self.tree_depth_mean,
            "tree_depth_variance": self.tree_depth_variance,
            "type_count": self.type_count,
            "entropy": self.entropy_dict(),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def analyze(
    corpus: Corpus | None = None,
    conllu_sentences: Sequence[ParsedSentence] | None = None,
    base: str = BASE_NATURAL,
    denominator: str = DENOM_PER_GROUP,
    label: str | None = None,
) -> CorpusReport:
    """Compute the full report; metrics without inputs become None markers.

    Tree depth needs ``conllu_sentences``. Entropy uses CoNLL-U tags when
    available and the built-in tagger otherwise.
    """
    if corpus is None:
        if conllu_sentences is None:
            raise ValueError("need a corpus, CoNLL-U sentences, or both")
        corpus = corpus_from_token_sentences(
            [s.tokens for s in conllu_sentences], label=label or ""
        )

    try:
        kincaid = kincaid_grade(corpus)
    except UndefinedMetric:
        kincaid = None

    depth_mean: float | None = None
    depth_var: float | None = None
    if conllu_sentences:
        depth_mean, depth_var = tree_depths(conllu_sentences)

    if corpus.sentences:
        if conllu_sentences and len(conllu_sentences) == len(corpus.sentences):
            tags: Sequence[Sequence[str]] = tags_from_conllu(conllu_sentences)
        else:
            tags = tag_corpus_builtin(corpus)
        entropy = pos_entropy(corpus, tags, base=base, denominator=denominator)
    else:
        entropy = {g: None for g in POS_GROUPS}

    return CorpusReport(
        label=label if label is not None else corpus.label,
        kincaid=kincaid,
        tree_depth_mean=depth_mean,
        tree_depth_variance=depth_var,
        type_count=type_count(corpus),
        entropy=tuple((g, entropy[g]) for g in POS_GROUPS),
    )


def format_table(reports: Sequence[CorpusReport]) -> str:
    """Aligned text table with one row per corpus."""

    def num(value: float | None, digits: int = 2) -> str:
        return "-" if value is None else f"{value:.{digits}f}"

    header = ["Corpus", "Kincaid", "Tree depth", "#Types", "NN", "VB", "AD"]
    rows = [header]
    for r in reports:
        depth = (
            "-"
            if r.tree_depth_mean is None
            else f"{r.tree_depth_mean:.2f} ({r.tree_depth_variance:.2f})"
        )
        e = r.entropy_dict()
        rows.append(
            [
                r.label or "-",
                num(r.kincaid),
                depth,
                str(r.type_count),
                num(e["NN"]),
                num(e["VB"]),
                num(e["AD"]),
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)
