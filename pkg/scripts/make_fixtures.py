#!/usr/bin/env python3
"""Regenerate the bundled fixtures: cassettes, reference datasets, and the
goal-annotated held-out test set.

Recordings go through the real HTTP client against the scripted stub
endpoint, so the cassettes exercise the same wire path as a live build.
Everything is seeded and clocked, so regeneration is reproducible:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
FIXED_CLOCK = "2024-01-01T00:00:00Z"

from costkit.builder import (
    BuildContext,
    BuildState,
    build_object_pool,
    generate_commands,
    generate_steps,
    split_dataset,
    write_outcomes,
)
from costkit.client import Cassette, LLMClient, MODE_RECORD, RetryPolicy
from costkit.model import BuildConfig, read_records, write_records
from costkit.sim import GoalSpec, run_plan, world_for_record
from costkit.testing import ScriptedDomainModel, StubLLMServer

NOISE_RATE = 0.08
HELDOUT_SIZE = 20

# Shared with the acceptance suite: a replay build against the bundled
# cassette must use exactly these parameters to hit the recorded requests.
TABLETOP_SMALL = {
    "domain": "tabletop",
    "pool_size": 16,
    "commands_per_call": 10,
    "n_calls": 2,
    "seed": 7,
}
KITCHEN_SMALL = {
    "domain": "kitchen",
    "pool_size": 12,
    "commands_per_call": 8,
    "n_calls": 1,
    "seed": 5,
}
TABLETOP_TRAIN = {
    "domain": "tabletop",
    "pool_size": 30,
    "commands_per_call": 20,
    "n_calls": 36,
    "seed": 11,
}


def build_config(spec: dict) -> BuildConfig:
    return BuildConfig(
        domain=spec["domain"],
        commands_per_call=spec["commands_per_call"],
        n_calls=spec["n_calls"],
        objects_sample_size=15,
        distractor_count_range=(1, 2),
        random_seed=spec["seed"],
    )


def record_build(stub_url: str, spec: dict, cassette_path: Path, dataset_path: Path) -> None:
    config = build_config(spec)
    cassette_path.parent.mkdir(parents=True, exist_ok=True)
    dataset_path.parent.mkdir(parents=True, exist_ok=True)
    if cassette_path.exists():
        cassette_path.unlink()
    ctx = BuildContext(
        client=LLMClient(base_url=stub_url, retry=RetryPolicy(base_s=0.01)),
        cassette=Cassette(MODE_RECORD, path=cassette_path),
        model_id="scripted-model",
        clock=lambda: FIXED_CLOCK,
    )
    state = BuildState(config)
    _, diags = build_object_pool(config.domain, spec["pool_size"], ctx, pool=state.pool)
    diags += generate_commands(state, ctx)
    rejects_path = dataset_path.with_suffix("").with_suffix("")  # strip .jsonl
    rejects_path = Path(str(dataset_path)[: -len(".jsonl")] + ".rejects.jsonl")
    artifacts = write_outcomes(generate_steps(state, ctx), dataset_path, rejects_path, state)
    _zero_latencies(cassette_path)
    print(
        f"{dataset_path.name}: {artifacts.records} records, {artifacts.rejects} rejects, "
        f"{artifacts.commands} commands, pool {artifacts.pool_size}, "
        f"{len(diags)} diagnostics"
    )


def _zero_latencies(cassette_path: Path) -> None:
    # keep regenerated cassettes diff-friendly
    doc = json.loads(cassette_path.read_text(encoding="utf-8"))
    for entry in doc["entries"].values():
        entry["latency_s"] = 0.0
    cassette_path.write_text(
        json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8"
    )


def annotate_goals(records):
    """Goal = where each container-resident object ends up under the
    record's own plan; cross-checked by executing that plan."""
    annotated = []
    for record in records:
        result = run_plan(world_for_record(record), record.steps, GoalSpec(()))
        if not all(t.ok for t in result.trace):
            continue
        assertions = [
            {"object": name, "in": location.container}
            for name, location in result.final_state.objects
            if location.kind == "in_container"
        ]
        if not assertions:
            continue
        annotated.append(dataclasses.replace(record, extras=(("goal", assertions),)))
    return annotated


def main() -> None:
    datasets = FIXTURES / "datasets"
    cassettes = FIXTURES / "cassettes"
    with StubLLMServer(ScriptedDomainModel(noise_rate=NOISE_RATE).respond) as stub:
        record_build(
            stub.url, TABLETOP_SMALL, cassettes / "tabletop_small.json",
            datasets / "tabletop_small.jsonl",
        )
        record_build(
            stub.url, KITCHEN_SMALL, cassettes / "kitchen_small.json",
            datasets / "kitchen_small.jsonl",
        )
        record_build(
            stub.url, TABLETOP_TRAIN, cassettes / "tabletop_train.json",
            datasets / "tabletop_full.jsonl",
        )

    result = split_dataset(
        datasets / "tabletop_full.jsonl", (0.92, 0.0, 0.08), seed=11,
        out_prefix=datasets / "tabletop",
    )
    print(f"split: train {result.train}, val {result.validation}, test {result.test}")

    test_records = read_records(result.paths[2])
    heldout = annotate_goals(test_records)[:HELDOUT_SIZE]
    write_records(datasets / "tabletop_heldout.jsonl", heldout)
    print(f"heldout: {len(heldout)} goal-annotated records")

    # tidy intermediate split files we do not ship
    Path(result.paths[1]).unlink()  # empty validation split
    Path(result.paths[2]).unlink()
    (datasets / "tabletop.train.jsonl").rename(datasets / "tabletop_train.jsonl")

    train = read_records(datasets / "tabletop_train.jsonl")
    print(f"train: {len(train)} records")
    if len(train) < 500:
        print("WARNING: train set below 500 records", file=sys.stderr)


if __name__ == "__main__":
    main()
