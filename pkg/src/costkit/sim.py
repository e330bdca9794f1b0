"""Symbolic tabletop world: pick/place execution, goal checks, and the
text post-processing step for the downstream pick-and-place model.

Locations are symbolic slots (table, container, gripper), not poses; the
point is whether a plan moves the right objects into the right places, not
how the arm gets there.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from costkit import presets
from costkit.model import (
    ActionStep,
    CostkitError,
    DatasetRecord,
    ObjectName,
    normalize_name,
    read_records,
)
from costkit.validation import CLOSURE_LENIENT, resolve_target

ON_TABLE = "on_table"
IN_CONTAINER = "in_container"
IN_GRIPPER = "in_gripper"


class SimError(CostkitError):
    """Base class for transition failures; run_plan turns these into outcomes."""


class DuplicateObject(SimError):
    pass


class GripperFull(SimError):
    pass


class GripperEmpty(SimError):
    pass


class UnknownObject(SimError):
    pass


class UnsupportedAction(SimError):
    pass


class UnpairedStep(CostkitError):
    pass


@dataclass(frozen=True)
class Location:
    kind: str
    container: str | None = None

    def describe(self) -> str:
        if self.kind == IN_CONTAINER:
            return f"in {self.container}"
        return "in gripper" if self.kind == IN_GRIPPER else "on table"


@dataclass(frozen=True)
class WorldState:
    """Immutable snapshot: every transition returns a new state."""

    objects: tuple[tuple[str, Location], ...]
    containers: frozenset[str]  # normalized names
    gripper: str | None = None

    def locations(self) -> dict[str, Location]:
        return dict(self.objects)

    def find(self, phrase: str) -> str | None:
        names = [ObjectName(name) for name, _ in self.objects]
        hit = resolve_target(phrase, names, CLOSURE_LENIENT)
        return hit.raw if hit else None

    def location_of(self, name: str) -> Location:
        return self.locations()[name]

    def object_names(self) -> list[str]:
        return [name for name, _ in self.objects]


def spawn(
    objects: Iterable[ObjectName | str],
    containers: Iterable[ObjectName | str] = (),
    seed: int = 0,
) -> WorldState:
    """Everything starts on the table; ``seed`` is reserved for future
    spatial placement and does not affect the symbolic state."""
    del seed
    names = [o.raw if isinstance(o, ObjectName) else str(o) for o in objects]
    seen: set[str] = set()
    for name in names:
        key = normalize_name(name)
        if key in seen:
            raise DuplicateObject(f"duplicate object {name!r}")
        seen.add(key)
    container_keys = frozenset(
        normalize_name(c.raw if isinstance(c, ObjectName) else str(c)) for c in containers
    )
    return WorldState(
        objects=tuple((name, Location(ON_TABLE)) for name in names),
        containers=container_keys,
        gripper=None,
    )


def _with_location(state: WorldState, name: str, location: Location) -> tuple[tuple[str, Location], ...]:
    return tuple((n, location if n == name else loc) for n, loc in state.objects)


def step_with_note(state: WorldState, action: ActionStep) -> tuple[WorldState, str]:
    """Apply one step; returns (new state, trace note). Raises SimError."""
    verb = normalize_name(action.action)
    if verb not in ("pick", "place"):
        raise UnsupportedAction(f"step {action.index}: action {action.action!r} is not pick/place")
    if not action.targets:
        raise UnknownObject(f"step {action.index}: no target")
    target = action.targets[0]

    if verb == "pick":
        if state.gripper is not None:
            raise GripperFull(
                f"step {action.index}: cannot pick {target!r} while holding {state.gripper!r}"
            )
        name = state.find(target)
        if name is None:
            raise UnknownObject(f"step {action.index}: no object matches {target!r}")
        new_state = replace(
            state,
            objects=_with_location(state, name, Location(IN_GRIPPER)),
            gripper=name,
        )
        return new_state, f"pick {name} -> gripper"

    if state.gripper is None:
        raise GripperEmpty(f"step {action.index}: place with empty gripper")
    held = state.gripper
    note = ""
    destination = state.find(target)
    if destination is not None and normalize_name(destination) in state.containers:
        location = Location(IN_CONTAINER, destination)
        description = f"place {held} -> in {destination}"
    elif destination is not None and destination != held:
        # a real object that cannot contain things: treat as the table
        location = Location(ON_TABLE)
        description = f"place {held} -> on table"
        note = f"target {target!r} is not a container; placed on table"
    else:
        location = Location(ON_TABLE)
        description = f"place {held} -> on table"
    new_state = replace(
        state,
        objects=_with_location(state, held, location),
        gripper=None,
    )
    return new_state, description if not note else f"{description} ({note})"


def step(state: WorldState, action: ActionStep) -> WorldState:
    new_state, _ = step_with_note(state, action)
    return new_state


@dataclass(frozen=True)
class GoalAssertion:
    object_name: str
    place: str  # container name, or "table"


@dataclass(frozen=True)
class GoalSpec:
    assertions: tuple[GoalAssertion, ...]

    def satisfied(self, state: WorldState) -> bool:
        locations = {normalize_name(n): loc for n, loc in state.objects}
        for assertion in self.assertions:
            location = locations.get(normalize_name(assertion.object_name))
            if location is None:
                return False
            if normalize_name(assertion.place) == "table":
                if location.kind != ON_TABLE:
                    return False
            else:
                if location.kind != IN_CONTAINER or normalize_name(
                    location.container or ""
                ) != normalize_name(assertion.place):
                    return False
        return True


@dataclass(frozen=True)
class TraceEntry:
    step_index: int
    ok: bool
    detail: str

    def __str__(self) -> str:
        status = "ok" if self.ok else "error"
        return f"step {self.step_index}: {status}: {self.detail}"


@dataclass(frozen=True)
class PlanResult:
    final_state: WorldState
    success: bool
    trace: tuple[TraceEntry, ...]


def run_plan(
    state: WorldState, steps: Sequence[ActionStep], goal: GoalSpec
) -> PlanResult:
    """Execute steps in order; the first transition error halts the plan."""
    trace: list[TraceEntry] = []
    current = state
    for action in steps:
        try:
            current, note = step_with_note(current, action)
            trace.append(TraceEntry(action.index, True, note))
        except SimError as exc:
            trace.append(TraceEntry(action.index, False, str(exc)))
            return PlanResult(final_state=current, success=False, trace=tuple(trace))
    return PlanResult(
        final_state=current, success=goal.satisfied(current), trace=tuple(trace)
    )


# -- downstream text format ---------------------------------------------------


def cliport_phrase(pick: str, place: str) -> str:
    """The one place that knows the downstream phrase template."""
    return f"put the {pick.lower()} in the {place.lower()}"


@dataclass(frozen=True)
class PickPlaceCall:
    pick: str
    place: str

    @property
    def phrase(self) -> str:
        return cliport_phrase(self.pick, self.place)

    def to_dict(self) -> dict:
        return {"pick": self.pick, "place": self.place, "phrase": self.phrase}


def export_cliport(steps: Sequence[ActionStep]) -> list[PickPlaceCall]:
    """Pair adjacent Pick/Place steps into downstream calls."""
    calls: list[PickPlaceCall] = []
    held: str | None = None
    for action in steps:
        verb = normalize_name(action.action)
        if verb == "pick":
            if held is not None:
                raise UnpairedStep(f"step {action.index}: pick follows unpaired pick")
            if not action.targets:
                raise UnpairedStep(f"step {action.index}: pick without target")
            held = action.targets[0]
        elif verb == "place":
            if held is None:
                raise UnpairedStep(f"step {action.index}: place without preceding pick")
            if not action.targets:
                raise UnpairedStep(f"step {action.index}: place without target")
            calls.append(PickPlaceCall(pick=held, place=action.targets[0]))
            held = None
        else:
            raise UnpairedStep(f"step {action.index}: non pick/place action {action.action!r}")
    if held is not None:
        raise UnpairedStep("plan ends with a dangling pick")
    return calls


# -- goal-annotated test sets --------------------------------------------------


def goal_from_record(record: DatasetRecord) -> GoalSpec | None:
    extras = dict(record.extras)
    raw = extras.get("goal")
    if not isinstance(raw, list):
        return None
    assertions = []
    for entry in raw:
        if not isinstance(entry, dict) or "object" not in entry or "in" not in entry:
            return None
        assertions.append(GoalAssertion(str(entry["object"]), str(entry["in"])))
    return GoalSpec(tuple(assertions))


def containers_for_record(
    record: DatasetRecord, container_words: Sequence[str] = presets.TABLETOP.container_words
) -> list[str]:
    """Explicit ``containers`` extra wins; otherwise infer from goal targets
    and container-ish object names (bowls, trays, ...)."""
    extras = dict(record.extras)
    explicit = extras.get("containers")
    if isinstance(explicit, list) and explicit:
        return [str(c) for c in explicit]
    inferred: list[str] = []
    goal = goal_from_record(record)
    goal_places = {
        normalize_name(a.place) for a in (goal.assertions if goal else ()) if normalize_name(a.place) != "table"
    }
    words = tuple(normalize_name(w) for w in container_words)
    for obj in record.objects:
        norm = obj.normalized
        if norm in goal_places or any(norm.endswith(w) for w in words):
            inferred.append(obj.raw)
    return inferred


def world_for_record(record: DatasetRecord) -> WorldState:
    return spawn(record.objects, containers_for_record(record))


@dataclass(frozen=True)
class CaseOutcome:
    record_id: str
    success: bool | None
    detail: str

    def to_dict(self) -> dict:
        return {"id": self.record_id, "success": self.success, "detail": self.detail}


@dataclass(frozen=True)
class EvaluateSummary:
    cases: tuple[CaseOutcome, ...]

    @property
    def total(self) -> int:
        return len(self.cases)

    @property
    def success_rate(self) -> float | None:
        """Fraction of successful plans; None (undefined) on an empty set."""
        if not self.cases:
            return None
        return sum(1 for c in self.cases if c.success) / len(self.cases)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "success_rate": self.success_rate,
            "cases": [c.to_dict() for c in self.cases],
        }


def evaluate_records(
    testset: Sequence[DatasetRecord],
    plans: Mapping[str, Sequence[ActionStep]] | None = None,
) -> EvaluateSummary:
    """Run each test record's plan (or a generated plan joined by id)
    against its goal."""
    cases: list[CaseOutcome] = []
    for record in testset:
        goal = goal_from_record(record)
        if goal is None:
            cases.append(CaseOutcome(record.id, None, "record carries no goal"))
            continue
        if plans is not None and record.id not in plans:
            cases.append(CaseOutcome(record.id, False, "no plan supplied"))
            continue
        steps = plans[record.id] if plans is not None else record.steps
        result = run_plan(world_for_record(record), steps, goal)
        detail = "goal reached" if result.success else "; ".join(
            str(t) for t in result.trace if not t.ok
        ) or "goal not reached"
        cases.append(CaseOutcome(record.id, result.success, detail))
    return EvaluateSummary(tuple(cases))


def evaluate_dataset(
    testset_path: str | Path,
    plans_path: str | Path | None = None,
) -> EvaluateSummary:
    testset = read_records(testset_path)
    plans = None
    if plans_path is not None:
        plans = {r.id: r.steps for r in read_records(plans_path)}
    return evaluate_records(testset, plans)
