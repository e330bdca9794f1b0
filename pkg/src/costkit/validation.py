"""Rule checks for parsed plans: action whitelists, pick/place discipline,
and closure between step targets and the record's object list."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from costkit import presets
from costkit.model import DatasetRecord, ObjectName, normalize_name, read_records

ALTERNATION_STRICT = "pick_place_strict"
ALTERNATION_NONE = "none"

CLOSURE_OFF = "off"
CLOSURE_LENIENT = "lenient"
CLOSURE_STRICT = "strict"

# Verbs like "sliced"/"washed" show up in targets as derived object names.
_MODIFIER_TOKENS = frozenset(
    {
        "sliced", "washed", "diced", "chopped", "cooked", "cleaned", "peeled",
        "cut", "fresh", "clean", "empty", "full", "remaining", "other",
    }
)
_LOCATION_PREFIX = re.compile(
    r"^(?:on|in|at|into|onto|under|over|to|from|inside|near|beside)\s+"
)
_ARTICLE_PREFIX = re.compile(r"^(?:the|a|an)\s+")


@dataclass(frozen=True)
class DomainRules:
    """What a plan is allowed to do in one domain.

    An empty ``allowed_actions`` means open vocabulary. The strict
    alternation mode demands plans of shape (Pick, Place)* over the
    pick/place subsequence; other verbs are ignored by that walk.
    """

    allowed_actions: frozenset[str]
    alternation: str = ALTERNATION_NONE
    gripper_capacity: int = 1
    closure_level: str = CLOSURE_LENIENT

    def __post_init__(self) -> None:
        if self.alternation not in (ALTERNATION_STRICT, ALTERNATION_NONE):
            raise ValueError(f"unknown alternation mode {self.alternation!r}")
        if self.closure_level not in (CLOSURE_OFF, CLOSURE_LENIENT, CLOSURE_STRICT):
            raise ValueError(f"unknown closure level {self.closure_level!r}")
        if self.gripper_capacity < 1:
            raise ValueError("gripper_capacity must be >= 1")
        if self.alternation == ALTERNATION_STRICT and not {"pick", "place"} <= self.allowed_actions:
            raise ValueError("pick_place_strict requires Pick and Place in allowed_actions")


def rules_from_actions(
    actions: Iterable[str],
    alternation: str = ALTERNATION_NONE,
    gripper_capacity: int = 1,
    closure_level: str = CLOSURE_LENIENT,
) -> DomainRules:
    return DomainRules(
        allowed_actions=frozenset(normalize_name(a) for a in actions),
        alternation=alternation,
        gripper_capacity=gripper_capacity,
        closure_level=closure_level,
    )


def tabletop_rules() -> DomainRules:
    return rules_from_actions(
        presets.TABLETOP.allowed_actions, alternation=ALTERNATION_STRICT
    )


def kitchen_rules(extra_utilize_verbs: Iterable[str] = ()) -> DomainRules:
    return rules_from_actions(
        tuple(presets.KITCHEN.allowed_actions) + tuple(extra_utilize_verbs)
    )


def rules_for_domain(domain: str) -> DomainRules:
    if domain == "tabletop":
        return tabletop_rules()
    if domain == "kitchen":
        return kitchen_rules()
    return DomainRules(allowed_actions=frozenset())


@dataclass(frozen=True)
class PlanViolation:
    step_index: int  # 0 when the violation is plan-level
    rule: str
    message: str

    def to_dict(self) -> dict:
        return {"step": self.step_index, "rule": self.rule, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    record_id: str
    violations: tuple[PlanViolation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def resolve_target(
    phrase: str, objects: Sequence[ObjectName | str], level: str = CLOSURE_LENIENT
) -> ObjectName | None:
    """Map a target phrase onto one of the record's objects, or None.

    Strict matching is exact after normalization. Lenient matching also
    strips a leading location preposition ("on the tray") and leading
    modifier tokens ("sliced lettuce") before retrying.
    """
    names = [o if isinstance(o, ObjectName) else ObjectName(str(o)) for o in objects]
    by_norm = {o.normalized: o for o in names}

    def lookup(text: str) -> ObjectName | None:
        return by_norm.get(text)

    norm = normalize_name(phrase)
    hit = lookup(norm)
    if hit or level != CLOSURE_LENIENT:
        return hit

    candidates = [norm]
    stripped = _LOCATION_PREFIX.sub("", norm)
    stripped = _ARTICLE_PREFIX.sub("", stripped)
    if stripped != norm:
        candidates.append(stripped)
    for base in list(candidates):
        tokens = base.split()
        while len(tokens) > 1 and tokens[0] in _MODIFIER_TOKENS:
            tokens = tokens[1:]
            candidates.append(" ".join(tokens))
    for candidate in candidates[1:]:
        hit = lookup(candidate)
        if hit:
            return hit
    return None


def validate_plan(record: DatasetRecord, rules: DomainRules) -> ValidationReport:
    """Check one record's plan against the domain rules; reports only."""
    violations: list[PlanViolation] = []

    for step in record.steps:
        action = normalize_name(step.action)
        if rules.allowed_actions and action not in rules.allowed_actions:
            violations.append(
                PlanViolation(
                    step.index,
                    "DisallowedAction",
                    f"action {step.action!r} is not allowed in this domain",
                )
            )

    if rules.alternation == ALTERNATION_STRICT:
        holding = False
        held_since = 0
        hold_count = 0
        for step in record.steps:
            action = normalize_name(step.action)
            if action == "pick":
                if holding:
                    violations.append(
                        PlanViolation(
                            step.index,
                            "ConsecutivePick",
                            f"step {step.index} picks while already holding from step {held_since}",
                        )
                    )
                holding = True
                held_since = step.index
                hold_count += 1
                if hold_count > rules.gripper_capacity:
                    violations.append(
                        PlanViolation(
                            step.index,
                            "CapacityExceeded",
                            f"simulated hold count {hold_count} exceeds capacity {rules.gripper_capacity}",
                        )
                    )
            elif action == "place":
                if not holding:
                    violations.append(
                        PlanViolation(
                            step.index,
                            "OrphanPlace",
                            f"step {step.index} places but nothing is held",
                        )
                    )
                holding = False
                hold_count = max(0, hold_count - 1)
        if holding:
            violations.append(
                PlanViolation(
                    held_since,
                    "DanglingPick",
                    f"plan ends still holding the object picked at step {held_since}",
                )
            )

    if rules.closure_level != CLOSURE_OFF:
        for step in record.steps:
            for target in step.targets:
                if resolve_target(target, record.objects, rules.closure_level) is None:
                    violations.append(
                        PlanViolation(
                            step.index,
                            "ClosureMiss",
                            f"target {target!r} resolves to no listed object",
                        )
                    )

    return ValidationReport(record_id=record.id, violations=tuple(violations))


@dataclass(frozen=True)
class DatasetSummary:
    total: int
    passed: int
    rule_counts: tuple[tuple[str, int], ...]
    reports: tuple[ValidationReport, ...]

    @property
    def pass_rate(self) -> float | None:
        """Fraction of passing records; None (not 1.0) for an empty dataset."""
        if self.total == 0:
            return None
        return self.passed / self.total

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "passed": self.passed,
            "pass_rate": self.pass_rate,
            "rule_counts": dict(self.rule_counts),
            "records": [
                {
                    "id": r.record_id,
                    "passed": r.passed,
                    "violations": [v.to_dict() for v in r.violations],
                }
                for r in self.reports
            ],
        }


def validate_records(records: Iterable[DatasetRecord], rules: DomainRules) -> DatasetSummary:
    reports = tuple(validate_plan(record, rules) for record in records)
    counts: dict[str, int] = {}
    for report in reports:
        for violation in report.violations:
            counts[violation.rule] = counts.get(violation.rule, 0) + 1
    return DatasetSummary(
        total=len(reports),
        passed=sum(1 for r in reports if r.passed),
        rule_counts=tuple(sorted(counts.items())),
        reports=reports,
    )


def validate_dataset(path: str | Path, rules: DomainRules) -> DatasetSummary:
    return validate_records(read_records(path), rules)
