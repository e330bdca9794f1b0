"""End-to-end dataset builds: object pool, commands, steps, persistence.

The build walks the four-stage loop (objects -> commands -> steps -> files)
with every random draw coming from one seeded generator in a fixed order,
so a (cassette, seed, config, clock) quadruple fully determines the output
bytes. Command generation is sequential on purpose: objects invented by one
call join the pool offered to the next.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

from costkit import presets
from costkit.client import (
    Cassette,
    CompletionRequest,
    LLMClient,
    fingerprint,
)
from costkit.model import (
    BuildConfig,
    CostkitError,
    DatasetRecord,
    ObjectName,
    Provenance,
    canonical_json,
    normalize_name,
    read_records,
    serialize_record,
    validate_record,
    write_records,
)
from costkit.parsing import (
    Diagnostic,
    ERROR,
    WARNING,
    ParsedCommandLine,
    parse_command_list,
    parse_object_list,
    parse_steps_block,
)
from costkit.prompts import (
    RenderedPrompt,
    render_command_prompt,
    render_object_list_prompt,
    render_steps_prompt_fixed,
    render_steps_prompt_flexible,
)

SOURCE_SEED = "seed"
SOURCE_OBJECT_PROMPT = "llm_object_prompt"
SOURCE_NOVEL = "novel_from_command"

VARIANT_FIXED = "fixed"
VARIANT_FLEXIBLE = "flexible"


class RatioError(CostkitError):
    pass


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class ObjectPool:
    """Ordered, normalization-deduped object set with a source log."""

    def __init__(self) -> None:
        self.history: list[tuple[str, str]] = []  # (raw name, source)
        self._index: dict[str, str] = {}

    @property
    def members(self) -> list[ObjectName]:
        return [ObjectName(raw) for raw, _ in self.history]

    def __len__(self) -> int:
        return len(self.history)

    def __contains__(self, name: ObjectName | str) -> bool:
        raw = name.raw if isinstance(name, ObjectName) else str(name)
        return normalize_name(raw) in self._index

    def add(self, name: ObjectName | str, source: str) -> bool:
        raw = name.raw if isinstance(name, ObjectName) else str(name)
        key = normalize_name(raw)
        if not key or key in self._index:
            return False
        self._index[key] = raw
        self.history.append((raw, source))
        return True

    def to_dict(self) -> dict:
        return {"members": [{"name": raw, "source": source} for raw, source in self.history]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ObjectPool":
        pool = cls()
        for entry in doc.get("members", []):
            pool.add(entry["name"], entry["source"])
        return pool


@dataclass
class BuildContext:
    """Everything a build stage needs besides the evolving state."""

    client: LLMClient
    cassette: Cassette
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.7
    max_tokens: int = 1024
    templates_dir: str | Path | None = None
    clock: Callable[[], str] = utc_now
    max_in_flight: int = 4

    def request(self, prompt: RenderedPrompt) -> CompletionRequest:
        return CompletionRequest(
            model_id=self.model_id,
            prompt_text=prompt.text,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )


class BuildState:
    """Mutable progress of one build; serializable for staged CLI runs."""

    def __init__(self, config: BuildConfig, pool: ObjectPool | None = None):
        self.config = config
        self.pool = pool or ObjectPool()
        self.pending_commands: list[ParsedCommandLine] = []
        self.records_count = 0
        self.rng = random.Random(config.random_seed)

    def to_dict(self) -> dict:
        state = self.rng.getstate()
        return {
            "config": {
                "domain": self.config.domain,
                "commands_per_call": self.config.commands_per_call,
                "n_calls": self.config.n_calls,
                "objects_sample_size": self.config.objects_sample_size,
                "distractor_count_range": list(self.config.distractor_count_range),
                "grow_object_pool": self.config.grow_object_pool,
                "dedup_policy": self.config.dedup_policy,
                "random_seed": self.config.random_seed,
            },
            "pool": self.pool.to_dict(),
            "pending_commands": [
                {
                    "ordinal": c.ordinal,
                    "used_objects": [o.raw for o in c.used_objects],
                    "instruction": c.instruction,
                }
                for c in self.pending_commands
            ],
            "records_count": self.records_count,
            "rng_state": [state[0], list(state[1]), state[2]],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BuildState":
        cfg = doc["config"]
        config = BuildConfig(
            domain=cfg["domain"],
            commands_per_call=cfg["commands_per_call"],
            n_calls=cfg["n_calls"],
            objects_sample_size=cfg["objects_sample_size"],
            distractor_count_range=tuple(cfg["distractor_count_range"]),
            grow_object_pool=cfg["grow_object_pool"],
            dedup_policy=cfg["dedup_policy"],
            random_seed=cfg["random_seed"],
        )
        state = cls(config, ObjectPool.from_dict(doc["pool"]))
        state.pending_commands = [
            ParsedCommandLine(
                ordinal=c["ordinal"],
                used_objects=tuple(ObjectName(o) for o in c["used_objects"]),
                instruction=c["instruction"],
            )
            for c in doc["pending_commands"]
        ]
        state.records_count = doc["records_count"]
        rng_state = doc["rng_state"]
        state.rng.setstate((rng_state[0], tuple(rng_state[1]), rng_state[2]))
        return state

    def save(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BuildState":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _preset_for(domain: str) -> presets.DomainPreset:
    preset = presets.get_preset(domain)
    if preset is not None:
        return preset
    # custom domains fall back to the flexible prompt with kitchen wording
    return presets.KITCHEN


def build_object_pool(
    domain: str,
    target_size: int,
    ctx: BuildContext,
    seed_objects: Iterable[str] = (),
    max_calls: int = 5,
    pool: ObjectPool | None = None,
) -> tuple[ObjectPool, list[Diagnostic]]:
    """Grow a pool to ``target_size`` by repeated prompting.

    Each call excludes what the pool already holds, so every request has a
    distinct fingerprint. Stops early with a ShortfallWarning diagnostic if
    a call yields nothing new or the call cap is reached.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    pool = pool if pool is not None else ObjectPool()
    diagnostics: list[Diagnostic] = []
    for name in seed_objects:
        pool.add(name, SOURCE_SEED)

    calls = 0
    while len(pool) < target_size and calls < max_calls:
        remaining = target_size - len(pool)
        prompt = render_object_list_prompt(
            domain,
            remaining,
            exclusions=pool.members,
            templates_dir=ctx.templates_dir,
        )
        response = ctx.client.complete(ctx.request(prompt), ctx.cassette)
        calls += 1
        objects, parse_diags = parse_object_list(response.text)
        diagnostics.extend(parse_diags)
        added = sum(pool.add(obj, SOURCE_OBJECT_PROMPT) for obj in objects)
        if added == 0:
            break

    if len(pool) < target_size:
        diagnostics.append(
            Diagnostic(
                WARNING,
                0,
                "ShortfallWarning",
                f"pool has {len(pool)} of {target_size} requested objects after {calls} calls",
            )
        )
    return pool, diagnostics


def generate_commands(
    state: BuildState,
    ctx: BuildContext,
    note: str | None = None,
    example_command: str | None = None,
    min_objects: int = 2,
) -> list[Diagnostic]:
    """Run the command loop: sample objects, prompt, parse, grow, dedup.

    Calls are sequential because novel objects harvested from one response
    are eligible for the next prompt's sample.
    """
    if not len(state.pool):
        raise CostkitError("object pool is empty; build it first")
    preset = _preset_for(state.config.domain)
    note = note if note is not None else preset.command_note
    example_command = (
        example_command if example_command is not None else preset.command_example
    )
    diagnostics: list[Diagnostic] = []
    seen = {
        normalize_name(c.instruction)
        for c in state.pending_commands
        if state.config.dedup_policy == "normalized_exact"
    }

    for _ in range(state.config.n_calls):
        members = state.pool.members
        k = min(state.config.objects_sample_size, len(members))
        sample = state.rng.sample(members, k)
        prompt = render_command_prompt(
            state.config.domain,
            state.config.commands_per_call,
            sample,
            note=note,
            example_command=example_command,
            min_objects=min_objects,
            templates_dir=ctx.templates_dir,
        )
        response = ctx.client.complete(ctx.request(prompt), ctx.cassette)
        lines, novel, parse_diags = parse_command_list(response.text, state.pool.members)
        diagnostics.extend(parse_diags)
        if state.config.grow_object_pool:
            for obj in novel:
                state.pool.add(obj, SOURCE_NOVEL)
        for line in lines:
            if state.config.dedup_policy == "normalized_exact":
                key = normalize_name(line.instruction)
                if key in seen:
                    continue
                seen.add(key)
            state.pending_commands.append(line)
    return diagnostics


@dataclass(frozen=True)
class RejectEntry:
    command_index: int
    record_id: str
    command: str
    used_objects: tuple[str, ...]
    raw_output: str
    diagnostics: tuple[Diagnostic, ...]

    def to_dict(self) -> dict:
        return {
            "command_index": self.command_index,
            "id": self.record_id,
            "command": self.command,
            "used_objects": list(self.used_objects),
            "raw_output": self.raw_output,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


@dataclass(frozen=True)
class BuildOutcome:
    command_index: int
    record: DatasetRecord | None = None
    reject: RejectEntry | None = None


def _record_id(domain: str, index: int) -> str:
    return f"{domain}-{index:05d}"


def _sample_distractors(
    state: BuildState, excluded: set[str]
) -> list[ObjectName]:
    lo, hi = state.config.distractor_count_range
    want = state.rng.randint(lo, hi)
    candidates = [m for m in state.pool.members if m.normalized not in excluded]
    want = min(want, len(candidates))
    return state.rng.sample(candidates, want) if want else []


def generate_steps(
    state: BuildState,
    ctx: BuildContext,
    variant: str | None = None,
    robot_info: str | None = None,
    note: str | None = None,
    example: str | None = None,
) -> Iterator[BuildOutcome]:
    """Turn every pending command into a record or a reject entry.

    Completions fan out through the bounded batch; outcomes are yielded in
    command order regardless of completion order. A command is rejected when
    its steps block has any error-severity diagnostic or the assembled
    record fails core validation.
    """
    if not state.pending_commands:
        raise CostkitError("no pending commands; generate commands first")
    preset = _preset_for(state.config.domain)
    variant = variant or preset.steps_variant
    if variant not in (VARIANT_FIXED, VARIANT_FLEXIBLE):
        raise ValueError(f"unknown steps variant {variant!r}")
    robot_info = robot_info if robot_info is not None else preset.robot_info
    note = note if note is not None else preset.steps_note
    example = example if example is not None else preset.steps_example

    commands = list(state.pending_commands)
    prompts: list[RenderedPrompt] = []
    fixed_objects: list[tuple[ObjectName, ...]] = []

    for command in commands:
        if variant == VARIANT_FIXED:
            used_keys = {o.normalized for o in command.used_objects}
            distractors = _sample_distractors(state, used_keys)
            objects = tuple(command.used_objects) + tuple(distractors)
            fixed_objects.append(objects)
            prompts.append(
                render_steps_prompt_fixed(
                    command.instruction,
                    objects,
                    robot_info=robot_info,
                    note=note,
                    example=example,
                    templates_dir=ctx.templates_dir,
                )
            )
        else:
            fixed_objects.append(())
            prompts.append(
                render_steps_prompt_flexible(
                    command.instruction,
                    note=note,
                    example=example,
                    templates_dir=ctx.templates_dir,
                )
            )

    requests = [ctx.request(p) for p in prompts]
    results = ctx.client.complete_batch(requests, ctx.cassette, ctx.max_in_flight)

    for (index, result), command, prompt, objects in zip(
        results, commands, prompts, fixed_objects
    ):
        command_index = index + 1
        record_id = _record_id(state.config.domain, command_index)
        if isinstance(result, Exception):
            yield BuildOutcome(
                command_index,
                reject=RejectEntry(
                    command_index,
                    record_id,
                    command.instruction,
                    tuple(o.raw for o in command.used_objects),
                    "",
                    (Diagnostic(ERROR, 0, type(result).__name__, str(result)),),
                ),
            )
            continue

        outcome = parse_steps_block(
            result.text, expect_required_objects=(variant == VARIANT_FLEXIBLE)
        )
        if outcome.value is None or outcome.errors():
            yield BuildOutcome(
                command_index,
                reject=RejectEntry(
                    command_index,
                    record_id,
                    command.instruction,
                    tuple(o.raw for o in command.used_objects),
                    result.text,
                    tuple(outcome.diagnostics),
                ),
            )
            continue

        steps = outcome.value.steps
        if variant == VARIANT_FLEXIBLE:
            required = outcome.value.required_objects or ()
            target_keys = {
                normalize_name(target) for s in steps for target in s.targets
            }
            excluded = {o.normalized for o in required} | target_keys
            distractors = _sample_distractors(state, excluded)
            objects = tuple(required) + tuple(distractors)
            required_field: tuple[ObjectName, ...] | None = tuple(required)
        else:
            required_field = None

        record = DatasetRecord(
            id=record_id,
            domain=state.config.domain,
            objects=objects,
            command=command.instruction,
            steps=steps,
            provenance=Provenance(
                model_id=ctx.model_id,
                template_id=prompt.template_id,
                template_version=prompt.version,
                request_fingerprint=fingerprint(requests[index]),
                created_at=ctx.clock(),
            ),
            required_objects=required_field,
        )
        violations = validate_record(record)
        if violations:
            yield BuildOutcome(
                command_index,
                reject=RejectEntry(
                    command_index,
                    record_id,
                    command.instruction,
                    tuple(o.raw for o in command.used_objects),
                    result.text,
                    tuple(
                        Diagnostic(ERROR, 0, v.rule, f"{v.field}: {v.message}")
                        for v in violations
                    ),
                ),
            )
            continue
        state.records_count += 1
        yield BuildOutcome(command_index, record=record)


@dataclass(frozen=True)
class BuildArtifacts:
    records: int
    rejects: int
    commands: int
    pool_size: int

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "rejects": self.rejects,
            "commands": self.commands,
            "pool_size": self.pool_size,
        }


def write_outcomes(
    outcomes: Iterable[BuildOutcome],
    records_path: str | Path,
    rejects_path: str | Path,
    state: BuildState,
) -> BuildArtifacts:
    """Persist a stream of outcomes; conservation holds by construction."""
    records = 0
    rejects = 0
    commands = 0
    with open(records_path, "w", encoding="utf-8", newline="\n") as records_fh, open(
        rejects_path, "w", encoding="utf-8", newline="\n"
    ) as rejects_fh:
        for outcome in outcomes:
            commands += 1
            if outcome.record is not None:
                records_fh.write(serialize_record(outcome.record) + "\n")
                records += 1
            else:
                rejects_fh.write(canonical_json(outcome.reject.to_dict()) + "\n")
                rejects += 1
    return BuildArtifacts(
        records=records, rejects=rejects, commands=commands, pool_size=len(state.pool)
    )


# -- train/validation/test splitting ------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    train: int
    validation: int
    test: int
    paths: tuple[str, str, str]

    def to_dict(self) -> dict:
        return {
            "train": self.train,
            "validation": self.validation,
            "test": self.test,
            "paths": list(self.paths),
        }


def split_dataset(
    records_path: str | Path,
    ratios: tuple[float, float, float],
    seed: int,
    out_prefix: str | Path | None = None,
) -> SplitResult:
    """Seed-deterministic three-way split, disjoint by normalized command.

    All records sharing a normalized command travel together, so test
    commands can never leak into train.
    """
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise RatioError(f"ratios must be >= 0 and sum to 1, got {ratios}")
    records = read_records(records_path)
    groups: dict[str, list] = {}
    order: list[str] = []
    for record in records:
        key = normalize_name(record.command)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(record)

    rng = random.Random(seed)
    rng.shuffle(order)

    total = len(records)
    target_test = int(total * ratios[2])
    target_val = int(total * ratios[1])
    test: list = []
    val: list = []
    train: list = []
    for key in order:
        bucket = groups[key]
        if len(test) < target_test:
            test.extend(bucket)
        elif len(val) < target_val:
            val.extend(bucket)
        else:
            train.extend(bucket)

    prefix = Path(out_prefix) if out_prefix else Path(records_path).with_suffix("")
    paths = (
        str(prefix) + ".train.jsonl",
        str(prefix) + ".val.jsonl",
        str(prefix) + ".test.jsonl",
    )
    write_records(paths[0], train)
    write_records(paths[1], val)
    write_records(paths[2], test)
    return SplitResult(
        train=len(train), validation=len(val), test=len(test), paths=paths
    )
