"""Parsers for template-constrained model outputs.

Models break format rules, so every parser here recovers per line: malformed
lines become diagnostics with exact line numbers, never exceptions. Grammar
notes:

* command lines: ``N. (obj, obj, ...), instruction``
* step lines accept both annotation spellings seen in real outputs,
  ``(ACTION : Pick, TARGET: Egg)`` and ``(ACTION: Pick | TARGET: Egg)``
* target lists split on commas; a multi-word phrase like ``On the tray``
  stays one target
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from costkit.model import ActionStep, ObjectName, normalize_name

ERROR = "error"
WARNING = "warning"
INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    rule: str
    message: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "line": self.line,
            "rule": self.rule,
            "message": self.message,
        }


@dataclass(frozen=True)
class ParsedCommandLine:
    ordinal: int
    used_objects: tuple[ObjectName, ...]
    instruction: str


@dataclass(frozen=True)
class ParsedStepsBlock:
    steps: tuple[ActionStep, ...]
    required_objects: tuple[ObjectName, ...] | None = None


@dataclass(frozen=True)
class ParseOutcome:
    """Parsed payload plus everything that went wrong along the way.

    ``recovered`` is set when a payload was salvaged despite error-severity
    diagnostics. ``value is None`` implies at least one error diagnostic.
    """

    value: ParsedStepsBlock | None
    diagnostics: tuple[Diagnostic, ...] = ()
    recovered: bool = False

    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == ERROR]


_COMMAND_LINE = re.compile(r"^\s*(\d+)[.)]\s*(.*)$")
_OBJECTS_GROUP = re.compile(r"^\(([^)]*)\)\s*[,:]?\s*(.*)$")
_STEP_LINE = re.compile(r"^\s*Step\s+(\d+)\s*[.:]\s*(.*)$", re.IGNORECASE)
_ANNOTATION = re.compile(
    r"\(\s*ACTION\s*:\s*([^,|)]*?)\s*[,|]\s*TARGET\s*:\s*([^)]*)\)\s*$",
    re.IGNORECASE,
)
_REQUIRED_LINE = re.compile(r"^\s*Required\s+Objects\s*[=:]\s*(.*)$", re.IGNORECASE)
_BULLET_LINE = re.compile(r"^\s*(?:\d+[.)]|[-*])\s*(.+?)\s*$")


def _clean_name(raw: str) -> str:
    return raw.strip().strip("'\"`").strip()


def _split_names(raw: str) -> list[str]:
    return [_clean_name(part) for part in raw.split(",") if _clean_name(part)]


def parse_command_list(
    raw: str, object_pool: Iterable[ObjectName | str] = ()
) -> tuple[list[ParsedCommandLine], list[ObjectName], list[Diagnostic]]:
    """Extract numbered command lines; objects outside the pool are novel.

    Returns (parsed lines, novel objects in first-seen order, diagnostics).
    Lines that are not numbered are treated as prose and skipped.
    """
    pool = {
        normalize_name(o.raw if isinstance(o, ObjectName) else str(o)) for o in object_pool
    }
    lines: list[ParsedCommandLine] = []
    novel: list[ObjectName] = []
    novel_seen: set[str] = set()
    diagnostics: list[Diagnostic] = []

    for lineno, text in enumerate(raw.splitlines(), start=1):
        if not text.strip():
            continue
        numbered = _COMMAND_LINE.match(text)
        if not numbered:
            continue
        ordinal, rest = int(numbered.group(1)), numbered.group(2)
        grouped = _OBJECTS_GROUP.match(rest.strip())
        if not grouped:
            diagnostics.append(
                Diagnostic(
                    ERROR,
                    lineno,
                    "MissingObjectsGroup",
                    f"line {lineno}: no parenthesized object group before the instruction",
                )
            )
            continue
        names = _split_names(grouped.group(1))
        instruction = grouped.group(2).strip()
        if not names:
            diagnostics.append(
                Diagnostic(ERROR, lineno, "EmptyObjectsGroup", f"line {lineno}: () names no objects")
            )
            continue
        if not instruction:
            diagnostics.append(
                Diagnostic(ERROR, lineno, "EmptyInstruction", f"line {lineno}: no instruction text")
            )
            continue
        used = tuple(ObjectName(n) for n in names)
        lines.append(ParsedCommandLine(ordinal=ordinal, used_objects=used, instruction=instruction))
        for obj in used:
            if obj.normalized not in pool and obj.normalized not in novel_seen:
                novel_seen.add(obj.normalized)
                novel.append(obj)

    if not lines and not diagnostics:
        diagnostics.append(Diagnostic(ERROR, 1, "EmptyOutput", "no command lines found"))
    return lines, novel, diagnostics


def parse_steps_block(raw: str, expect_required_objects: bool = False) -> ParseOutcome:
    """Parse an Action Steps block, optionally with its Required Objects line."""
    steps: list[ActionStep] = []
    required: tuple[ObjectName, ...] | None = None
    diagnostics: list[Diagnostic] = []

    for lineno, text in enumerate(raw.splitlines(), start=1):
        required_match = _REQUIRED_LINE.match(text)
        if required_match:
            names = required_match.group(1).strip()
            names = names[1:-1] if names.startswith("[") and names.endswith("]") else names
            parsed = _split_names(names)
            if parsed:
                required = tuple(ObjectName(n) for n in parsed)
            else:
                diagnostics.append(
                    Diagnostic(
                        ERROR,
                        lineno,
                        "EmptyRequiredObjects",
                        f"line {lineno}: Required Objects names nothing",
                    )
                )
            continue

        step_match = _STEP_LINE.match(text)
        if not step_match:
            continue
        index, rest = int(step_match.group(1)), step_match.group(2)
        annotation = _ANNOTATION.search(rest)
        if not annotation:
            diagnostics.append(
                Diagnostic(
                    ERROR,
                    lineno,
                    "MissingAnnotation",
                    f"line {lineno}: step {index} has no (ACTION ..., TARGET ...) group",
                )
            )
            continue
        action = _clean_name(annotation.group(1))
        targets = tuple(_split_names(annotation.group(2)))
        description = rest[: annotation.start()].rstrip()
        if not action:
            diagnostics.append(
                Diagnostic(ERROR, lineno, "MissingAnnotation", f"line {lineno}: empty ACTION")
            )
            continue
        if not targets:
            diagnostics.append(
                Diagnostic(ERROR, lineno, "EmptyTargets", f"line {lineno}: step {index} names no targets")
            )
            continue
        if re.search(r"\s", action):
            diagnostics.append(
                Diagnostic(
                    WARNING,
                    lineno,
                    "MultiwordAction",
                    f"line {lineno}: action {action!r} is not a single token",
                )
            )
        if not description:
            diagnostics.append(
                Diagnostic(WARNING, lineno, "EmptyStepText", f"line {lineno}: step {index} has no text")
            )
        steps.append(ActionStep(index=index, text=description, action=action, targets=targets))

    if steps:
        indices = [s.index for s in steps]
        if indices != list(range(1, len(indices) + 1)):
            diagnostics.append(
                Diagnostic(
                    ERROR,
                    0,
                    "NonContiguousIndices",
                    f"step indices {indices} are not 1..{len(indices)}",
                )
            )
    if expect_required_objects and required is None:
        if not any(d.rule == "EmptyRequiredObjects" for d in diagnostics):
            diagnostics.append(
                Diagnostic(ERROR, 0, "MissingRequiredObjects", "no Required Objects line found")
            )

    if not steps:
        if not any(d.severity == ERROR for d in diagnostics):
            diagnostics.append(Diagnostic(ERROR, 0, "NoSteps", "no step lines found"))
        return ParseOutcome(value=None, diagnostics=tuple(diagnostics), recovered=False)

    value = ParsedStepsBlock(steps=tuple(steps), required_objects=required)
    recovered = any(d.severity == ERROR for d in diagnostics)
    return ParseOutcome(value=value, diagnostics=tuple(diagnostics), recovered=recovered)


def parse_object_list(raw: str) -> tuple[list[ObjectName], list[Diagnostic]]:
    """Parse a numbered or bulleted object listing, deduped by normalization."""
    objects: list[ObjectName] = []
    seen: dict[str, int] = {}
    diagnostics: list[Diagnostic] = []

    for lineno, text in enumerate(raw.splitlines(), start=1):
        if not text.strip():
            continue
        match = _BULLET_LINE.match(text)
        if not match:
            continue
        name = _clean_name(match.group(1))
        if not name:
            continue
        key = normalize_name(name)
        if key in seen:
            diagnostics.append(
                Diagnostic(
                    WARNING,
                    lineno,
                    "DuplicateObject",
                    f"line {lineno}: {name!r} duplicates line {seen[key]}",
                )
            )
            continue
        seen[key] = lineno
        objects.append(ObjectName(name))

    if not objects:
        diagnostics.append(Diagnostic(ERROR, 1, "EmptyOutput", "no object lines found"))
    return objects, diagnostics
