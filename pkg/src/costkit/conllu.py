"""Minimal CoNLL-U reader and dependency-tree depth.

Only the columns this toolkit consumes are kept: FORM, UPOS, XPOS, HEAD.
Multiword-token ranges (``1-2``) and empty nodes (``1.1``) are skipped, as
they are not part of the basic dependency tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from costkit.model import CostkitError


class MalformedTree(CostkitError):
    """The sentence's head column does not encode a single rooted tree."""


@dataclass(frozen=True)
class ParsedSentence:
    tokens: tuple[str, ...]
    upos: tuple[str, ...]
    xpos: tuple[str, ...]
    heads: tuple[int, ...]  # 1-based; 0 marks the root


def parse_conllu(text: str) -> list[ParsedSentence]:
    sentences: list[ParsedSentence] = []
    tokens: list[str] = []
    upos: list[str] = []
    xpos: list[str] = []
    heads: list[int] = []

    def flush() -> None:
        nonlocal tokens, upos, xpos, heads
        if tokens:
            sentences.append(
                ParsedSentence(tuple(tokens), tuple(upos), tuple(xpos), tuple(heads))
            )
        tokens, upos, xpos, heads = [], [], [], []

    for line in text.splitlines():
        line = line.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 8:
            raise MalformedTree(f"expected >=8 tab-separated columns, got {len(cols)}: {line!r}")
        token_id = cols[0]
        if "-" in token_id or "." in token_id:
            continue
        tokens.append(cols[1])
        upos.append(cols[3])
        xpos.append(cols[4])
        try:
            heads.append(int(cols[6]))
        except ValueError as exc:
            raise MalformedTree(f"non-integer head {cols[6]!r} in line {line!r}") from exc
    flush()
    return sentences


def read_conllu(path: str | Path) -> list[ParsedSentence]:
    return parse_conllu(Path(path).read_text(encoding="utf-8"))


def tree_depth(sentence: ParsedSentence) -> int:
    """Number of nodes on the longest root-to-leaf path (single token = 1)."""
    n = len(sentence.heads)
    roots = [i for i, head in enumerate(sentence.heads) if head == 0]
    if len(roots) != 1:
        raise MalformedTree(f"expected exactly one root, found {len(roots)}")
    children: list[list[int]] = [[] for _ in range(n)]
    for i, head in enumerate(sentence.heads):
        if head == 0:
            continue
        if not 1 <= head <= n:
            raise MalformedTree(f"head {head} of token {i + 1} is out of range 1..{n}")
        children[head - 1].append(i)

    depth = 0
    visited = 0
    stack = [(roots[0], 1)]
    seen = [False] * n
    while stack:
        node, level = stack.pop()
        if seen[node]:
            raise MalformedTree("cycle detected in head column")
        seen[node] = True
        visited += 1
        depth = max(depth, level)
        for child in children[node]:
            stack.append((child, level + 1))
    if visited != n:
        raise MalformedTree("head column contains a cycle or disconnected tokens")
    return depth


def depths(sentences: Iterable[ParsedSentence]) -> list[int]:
    return [tree_depth(s) for s in sentences]
