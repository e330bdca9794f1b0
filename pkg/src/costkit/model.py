"""Shared domain types, canonical JSONL serialization, and record-level checks.

Every record that leaves this toolkit is one JSON object per line with sorted
keys and a fixed escaping rule, so identical builds are byte-identical.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

TABLETOP = "tabletop"
KITCHEN = "kitchen"

_WS_RUN = re.compile(r"\s+")


class CostkitError(Exception):
    """Base class for toolkit errors."""


class SerializationError(CostkitError):
    """Record failed invariant checks and cannot be serialized."""


class MalformedLine(CostkitError):
    """A JSONL line could not be parsed; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def normalize_name(raw: str) -> str:
    """Case-fold, trim, and collapse internal whitespace runs.

    Idempotent: normalize_name(normalize_name(x)) == normalize_name(x).
    """
    return _WS_RUN.sub(" ", raw.strip()).casefold()


@dataclass(frozen=True)
class ObjectName:
    """An object label as emitted, plus its normalized form for comparison."""

    raw: str

    @property
    def normalized(self) -> str:
        return normalize_name(self.raw)

    def __str__(self) -> str:
        return self.raw


@dataclass(frozen=True)
class ActionStep:
    """One plan step: free-text description plus canonical verb and targets."""

    index: int
    text: str
    action: str
    targets: tuple[str, ...]

    def format(self) -> str:
        """Render the step in the single-line annotated form used in datasets."""
        return (
            f"Step {self.index}. {self.text} "
            f"(ACTION: {self.action} | TARGET: {', '.join(self.targets)})"
        )


@dataclass(frozen=True)
class Provenance:
    model_id: str
    template_id: str
    template_version: str
    request_fingerprint: str
    created_at: str  # RFC-3339; supplied by an injectable clock


@dataclass(frozen=True)
class DatasetRecord:
    """One command/steps sample.

    ``required_objects`` is present only for records built with the
    flexible-objects prompt, where the model names the objects it needs.
    ``extras`` holds unknown keys found while parsing, so foreign lines
    round-trip unchanged.
    """

    id: str
    domain: str
    objects: tuple[ObjectName, ...]
    command: str
    steps: tuple[ActionStep, ...]
    provenance: Provenance
    required_objects: tuple[ObjectName, ...] | None = None
    extras: tuple[tuple[str, object], ...] = ()

    def object_names(self) -> list[str]:
        return [o.raw for o in self.objects]


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    message: str


@dataclass(frozen=True)
class BuildConfig:
    """Knobs for one dataset build.

    ``commands_per_call`` commands are requested per prompt, ``n_calls``
    times; ``objects_sample_size`` objects are drawn from the pool for each
    command prompt.
    """

    domain: str
    commands_per_call: int = 20
    n_calls: int = 1
    objects_sample_size: int = 15
    distractor_count_range: tuple[int, int] = (1, 2)
    grow_object_pool: bool = True
    dedup_policy: str = "normalized_exact"  # or "off"
    random_seed: int = 0

    def __post_init__(self) -> None:
        if self.commands_per_call < 1:
            raise ValueError("commands_per_call must be >= 1")
        if self.n_calls < 1:
            raise ValueError("n_calls must be >= 1")
        if self.objects_sample_size < 1:
            raise ValueError("objects_sample_size must be >= 1")
        lo, hi = self.distractor_count_range
        if lo < 0 or hi < lo:
            raise ValueError("distractor_count_range must be 0 <= lo <= hi")
        if self.dedup_policy not in ("normalized_exact", "off"):
            raise ValueError(f"unknown dedup_policy: {self.dedup_policy!r}")


def validate_record(record: DatasetRecord) -> list[Violation]:
    """Check all record-level invariants; violations are data, not failures."""
    out: list[Violation] = []

    if not record.id:
        out.append(Violation("id", "EmptyId", "record id must be nonempty"))
    if not record.domain:
        out.append(Violation("domain", "EmptyDomain", "domain must be nonempty"))
    if not record.command.strip():
        out.append(Violation("command", "EmptyCommand", "command must be nonempty"))

    seen: dict[str, str] = {}
    for obj in record.objects:
        if not obj.normalized:
            out.append(Violation("objects", "EmptyObjectName", f"blank object name {obj.raw!r}"))
            continue
        if obj.normalized in seen:
            out.append(
                Violation(
                    "objects",
                    "DuplicateObject",
                    f"{obj.raw!r} duplicates {seen[obj.normalized]!r} after normalization",
                )
            )
        else:
            seen[obj.normalized] = obj.raw

    if not record.steps:
        out.append(Violation("steps", "EmptySteps", "steps must be nonempty"))
    else:
        for pos, step in enumerate(record.steps, start=1):
            if step.index != pos:
                out.append(
                    Violation(
                        "steps",
                        "IndexGap",
                        f"expected index {pos}, found {step.index}",
                    )
                )
            if not step.text.strip():
                out.append(Violation("steps", "EmptyStepText", f"step {step.index} has no text"))
            action = step.action.strip()
            if not action or _WS_RUN.search(action):
                out.append(
                    Violation(
                        "steps",
                        "InvalidAction",
                        f"step {step.index} action {step.action!r} is not a single token",
                    )
                )
            if not step.targets:
                out.append(Violation("steps", "EmptyTargets", f"step {step.index} has no targets"))
            elif any(not t.strip() for t in step.targets):
                out.append(
                    Violation("steps", "BlankTarget", f"step {step.index} has a blank target")
                )

    if record.required_objects is not None and not record.required_objects:
        out.append(
            Violation(
                "required_objects",
                "EmptyRequiredObjects",
                "required_objects, when present, must be nonempty",
            )
        )

    return out


def format_steps_block(
    steps: tuple[ActionStep, ...] | list[ActionStep],
    required_objects: tuple[ObjectName, ...] | list[ObjectName] | None = None,
) -> str:
    """Render a full steps block, optionally with a Required Objects line."""
    lines = [step.format() for step in steps]
    if required_objects is not None:
        lines.append("Required Objects= " + ", ".join(o.raw for o in required_objects))
    return "\n".join(lines)


def _record_to_dict(record: DatasetRecord) -> dict:
    doc: dict = {
        "id": record.id,
        "domain": record.domain,
        "objects": [o.raw for o in record.objects],
        "command": record.command,
        "steps": [
            {
                "index": s.index,
                "text": s.text,
                "action": s.action,
                "targets": list(s.targets),
            }
            for s in record.steps
        ],
        "provenance": {
            "model_id": record.provenance.model_id,
            "template_id": record.provenance.template_id,
            "template_version": record.provenance.template_version,
            "request_fingerprint": record.provenance.request_fingerprint,
            "created_at": record.provenance.created_at,
        },
    }
    if record.required_objects is not None:
        doc["required_objects"] = [o.raw for o in record.required_objects]
    for key, value in record.extras:
        doc.setdefault(key, value)
    return doc


def canonical_json(doc: object) -> str:
    """Sorted keys, minimal separators, raw unicode: one stable byte string."""
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def serialize_record(record: DatasetRecord) -> str:
    """Emit one canonical JSONL line; raises SerializationError on invalid records."""
    violations = validate_record(record)
    if violations:
        summary = "; ".join(f"{v.rule}({v.field})" for v in violations)
        raise SerializationError(f"record {record.id!r} is invalid: {summary}")
    return canonical_json(_record_to_dict(record))


_KNOWN_KEYS = frozenset(
    {"id", "domain", "objects", "command", "steps", "required_objects", "provenance"}
)


def _byte_offset(line: str, char_pos: int) -> int:
    return len(line[:char_pos].encode("utf-8"))


def parse_record(line: str) -> DatasetRecord:
    """Inverse of serialize_record; unknown keys are kept in ``extras``."""
    stripped = line.strip()
    if not stripped:
        raise MalformedLine("empty line", 0)
    try:
        doc = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc.msg}", _byte_offset(stripped, exc.pos)) from exc
    if not isinstance(doc, dict):
        raise MalformedLine("line is not a JSON object", 0)

    try:
        steps = tuple(
            ActionStep(
                index=int(s["index"]),
                text=str(s["text"]),
                action=str(s["action"]),
                targets=tuple(str(t) for t in s["targets"]),
            )
            for s in doc["steps"]
        )
        prov = doc["provenance"]
        record = DatasetRecord(
            id=str(doc["id"]),
            domain=str(doc["domain"]),
            objects=tuple(ObjectName(str(o)) for o in doc["objects"]),
            command=str(doc["command"]),
            steps=steps,
            provenance=Provenance(
                model_id=str(prov["model_id"]),
                template_id=str(prov["template_id"]),
                template_version=str(prov["template_version"]),
                request_fingerprint=str(prov["request_fingerprint"]),
                created_at=str(prov["created_at"]),
            ),
            required_objects=(
                tuple(ObjectName(str(o)) for o in doc["required_objects"])
                if "required_objects" in doc
                else None
            ),
            extras=tuple(sorted((k, v) for k, v in doc.items() if k not in _KNOWN_KEYS)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLine(f"schema mismatch: {exc}", 0) from exc
    return record


def read_records(path) -> list[DatasetRecord]:
    """Load a JSONL dataset file, failing on the first malformed line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(line))
            except MalformedLine as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}", exc.offset) from exc
    return records


def write_records(path, records) -> int:
    """Write records as canonical JSONL; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(serialize_record(record) + "\n")
            count += 1
    return count
