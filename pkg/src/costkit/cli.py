"""Command-line entry point.

Exit codes: 0 success, 1 threshold failure (validate/simulate), 2 usage
error. Reports go to stdout as JSON (or files via flags); progress and
diagnostics go to stderr. Every run appends one manifest line recording the
resolved configuration, input/output paths, a cassette hash, and counts.

Configuration precedence: explicit flags > --config file > environment
(COSTKIT_MODEL) > built-in defaults.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import yaml

from costkit import builder as build_mod
from costkit import complexity, presets, sim
from costkit.builder import (
    BuildContext,
    BuildState,
    build_object_pool,
    generate_commands,
    generate_steps,
    split_dataset,
    write_outcomes,
)
from costkit.client import (
    Cassette,
    LLMClient,
    MODE_LIVE,
    MODE_RECORD,
    MODE_REPLAY_FALLTHROUGH,
    MODE_REPLAY_STRICT,
)
from costkit.conllu import read_conllu
from costkit.model import BuildConfig, CostkitError, canonical_json, read_records
from costkit.validation import (
    DomainRules,
    rules_for_domain,
    rules_from_actions,
    validate_dataset,
)

DEFAULT_MANIFEST = "manifests.jsonl"


def _echo_err(message: str) -> None:
    click.echo(message, err=True)


def _sha256_file(path: Path | None) -> str | None:
    if path is None or not Path(path).exists():
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(manifest_path: str, doc: dict) -> None:
    path = Path(manifest_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(doc) + "\n")


class RunRecorder:
    """Collects one manifest line per CLI run."""

    def __init__(self, subcommand: str, manifest_path: str, clock):
        self.subcommand = subcommand
        self.manifest_path = manifest_path
        self.clock = clock
        self.started = time.monotonic()
        self.config: dict = {}
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.counts: dict = {}
        self.cassette_hash: str | None = None

    def emit(self) -> None:
        doc = {
            "subcommand": self.subcommand,
            "config": self.config,
            "cassette_hash": self.cassette_hash,
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "counts": self.counts,
            "created_at": self.clock(),
            "wall_time_s": round(time.monotonic() - self.started, 6),
        }
        _write_manifest(self.manifest_path, doc)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise click.UsageError(f"config file {path} must hold a mapping")
    return doc


def _resolve(flag_value, config_doc: dict, key: str, env_var: str | None, default):
    if flag_value is not None:
        return flag_value
    if key in config_doc:
        return config_doc[key]
    if env_var and os.environ.get(env_var):
        return os.environ[env_var]
    return default


def _clock_from(value: str | None):
    if value:
        return lambda: value
    return build_mod.utc_now


def _cassette_from_flags(replay, fallthrough, record, live) -> Cassette:
    chosen = [flag for flag in (replay, fallthrough, record) if flag]
    if len(chosen) > 1:
        raise click.UsageError("choose one of --replay / --replay-fallthrough / --record")
    if replay:
        return Cassette(MODE_REPLAY_STRICT, path=replay)
    if fallthrough:
        return Cassette(MODE_REPLAY_FALLTHROUGH, path=fallthrough)
    if record:
        return Cassette(MODE_RECORD, path=record)
    if live:
        return Cassette(MODE_LIVE)
    raise click.UsageError(
        "no endpoint mode chosen; pass --replay CASSETTE for offline builds, "
        "or --record/--replay-fallthrough/--live"
    )


def _build_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                     help="YAML file with any of the build settings."),
        click.option("--domain", default=None, help="tabletop, kitchen, or a custom name."),
        click.option("--commands-per-call", type=int, default=None),
        click.option("--n-calls", type=int, default=None),
        click.option("--objects-sample-size", type=int, default=None),
        click.option("--distractor-min", type=int, default=None),
        click.option("--distractor-max", type=int, default=None),
        click.option("--grow-pool/--no-grow-pool", "grow_pool", default=None),
        click.option("--dedup", type=click.Choice(["normalized_exact", "off"]), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--model", default=None, help="Model id (env: COSTKIT_MODEL)."),
        click.option("--temperature", type=float, default=None),
        click.option("--max-tokens", type=int, default=None),
        click.option("--templates-dir", type=click.Path(exists=True), default=None),
        click.option("--clock", "clock_value", default=None,
                     help="Pin record timestamps to this RFC-3339 instant."),
        click.option("--max-in-flight", type=int, default=None),
        click.option("--replay", type=click.Path(exists=True), default=None,
                     help="Cassette for strict offline replay."),
        click.option("--replay-fallthrough", type=click.Path(), default=None,
                     help="Cassette replay that records misses live."),
        click.option("--record", type=click.Path(), default=None,
                     help="Cassette to record live responses into."),
        click.option("--live", is_flag=True, default=False),
        click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolved_build_config(params: dict, config_doc: dict) -> BuildConfig:
    distractor_min = _resolve(params["distractor_min"], config_doc, "distractor_min", None, 1)
    distractor_max = _resolve(params["distractor_max"], config_doc, "distractor_max", None, 2)
    return BuildConfig(
        domain=_resolve(params["domain"], config_doc, "domain", None, "tabletop"),
        commands_per_call=_resolve(
            params["commands_per_call"], config_doc, "commands_per_call", None, 20
        ),
        n_calls=_resolve(params["n_calls"], config_doc, "n_calls", None, 1),
        objects_sample_size=_resolve(
            params["objects_sample_size"], config_doc, "objects_sample_size", None, 15
        ),
        distractor_count_range=(distractor_min, distractor_max),
        grow_object_pool=_resolve(params["grow_pool"], config_doc, "grow_object_pool", None, True),
        dedup_policy=_resolve(params["dedup"], config_doc, "dedup_policy", None, "normalized_exact"),
        random_seed=_resolve(params["seed"], config_doc, "seed", None, 0),
    )


def _context_from(params: dict, config_doc: dict) -> tuple[BuildContext, Cassette]:
    cassette = _cassette_from_flags(
        params["replay"], params["replay_fallthrough"], params["record"], params["live"]
    )
    client = LLMClient()
    ctx = BuildContext(
        client=client,
        cassette=cassette,
        model_id=_resolve(params["model"], config_doc, "model", "COSTKIT_MODEL", "gpt-3.5-turbo"),
        temperature=_resolve(params["temperature"], config_doc, "temperature", None, 0.7),
        max_tokens=_resolve(params["max_tokens"], config_doc, "max_tokens", None, 1024),
        templates_dir=params["templates_dir"],
        clock=_clock_from(params["clock_value"]),
        max_in_flight=_resolve(params["max_in_flight"], config_doc, "max_in_flight", None, 4),
    )
    return ctx, cassette


def _config_snapshot(config: BuildConfig, ctx: BuildContext) -> dict:
    return {
        "domain": config.domain,
        "commands_per_call": config.commands_per_call,
        "n_calls": config.n_calls,
        "objects_sample_size": config.objects_sample_size,
        "distractor_count_range": list(config.distractor_count_range),
        "grow_object_pool": config.grow_object_pool,
        "dedup_policy": config.dedup_policy,
        "random_seed": config.random_seed,
        "model_id": ctx.model_id,
        "temperature": ctx.temperature,
        "max_tokens": ctx.max_tokens,
        "cassette_mode": ctx.cassette.mode,
    }


@click.group()
@click.version_option(package_name="costkit")
def main() -> None:
    """Build, check, measure, and execute command/step datasets."""


@main.command("gen-objects")
@_build_options
@click.option("--target-size", type=int, default=30, show_default=True)
@click.option("--seed-objects", default="", help="Comma-separated starting objects.")
@click.option("--state", "state_path", required=True, type=click.Path())
def gen_objects_cmd(config_path, target_size, seed_objects, state_path, **params):
    """Stage 1: grow the domain object pool and write a build state file."""
    config_doc = _load_config_file(config_path)
    config = _resolved_build_config(params, config_doc)
    ctx, cassette = _context_from(params, config_doc)
    recorder = RunRecorder("gen-objects", params["manifest_path"], ctx.clock)
    state = BuildState(config)
    seeds = [s.strip() for s in seed_objects.split(",") if s.strip()]
    _, diagnostics = build_object_pool(
        config.domain, target_size, ctx, seed_objects=seeds, pool=state.pool
    )
    for diag in diagnostics:
        _echo_err(f"{diag.severity}: {diag.rule}: {diag.message}")
    state.save(state_path)
    recorder.config = _config_snapshot(config, ctx)
    recorder.cassette_hash = _sha256_file(cassette.path)
    recorder.outputs = [str(state_path)]
    recorder.counts = {"pool_size": len(state.pool)}
    recorder.emit()
    _echo_err(f"pool of {len(state.pool)} objects -> {state_path}")


@main.command("gen-commands")
@_build_options
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--state-out", default=None, type=click.Path())
def gen_commands_cmd(config_path, state_path, state_out, **params):
    """Stage 2: sample objects and collect high-level commands."""
    config_doc = _load_config_file(config_path)
    state = BuildState.load(state_path)
    ctx, cassette = _context_from(params, config_doc)
    recorder = RunRecorder("gen-commands", params["manifest_path"], ctx.clock)
    diagnostics = generate_commands(state, ctx)
    for diag in diagnostics:
        _echo_err(f"{diag.severity}: {diag.rule}: {diag.message}")
    out = state_out or state_path
    state.save(out)
    recorder.config = _config_snapshot(state.config, ctx)
    recorder.cassette_hash = _sha256_file(cassette.path)
    recorder.inputs = [str(state_path)]
    recorder.outputs = [str(out)]
    recorder.counts = {
        "pending_commands": len(state.pending_commands),
        "pool_size": len(state.pool),
    }
    recorder.emit()
    _echo_err(f"{len(state.pending_commands)} commands pending -> {out}")


@main.command("gen-steps")
@_build_options
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--variant", type=click.Choice(["fixed", "flexible"]), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", default=None, type=click.Path())
def gen_steps_cmd(config_path, state_path, variant, out_path, rejects_path, **params):
    """Stage 3: expand every pending command into action steps."""
    config_doc = _load_config_file(config_path)
    state = BuildState.load(state_path)
    ctx, cassette = _context_from(params, config_doc)
    recorder = RunRecorder("gen-steps", params["manifest_path"], ctx.clock)
    rejects = rejects_path or str(Path(out_path).with_suffix("")) + ".rejects.jsonl"
    artifacts = write_outcomes(
        generate_steps(state, ctx, variant=variant), out_path, rejects, state
    )
    recorder.config = _config_snapshot(state.config, ctx)
    recorder.cassette_hash = _sha256_file(cassette.path)
    recorder.inputs = [str(state_path)]
    recorder.outputs = [str(out_path), str(rejects)]
    recorder.counts = artifacts.to_dict()
    recorder.emit()
    _echo_err(
        f"{artifacts.records} records, {artifacts.rejects} rejects "
        f"from {artifacts.commands} commands -> {out_path}"
    )


@main.command("build")
@_build_options
@click.option("--pool-size", type=int, default=30, show_default=True)
@click.option("--seed-objects", default="")
@click.option("--variant", type=click.Choice(["fixed", "flexible"]), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", default=None, type=click.Path())
@click.option("--state-out", default=None, type=click.Path())
def build_cmd(
    config_path, pool_size, seed_objects, variant, out_path, rejects_path, state_out, **params
):
    """All three stages in one run: objects, commands, steps."""
    config_doc = _load_config_file(config_path)
    config = _resolved_build_config(params, config_doc)
    ctx, cassette = _context_from(params, config_doc)
    recorder = RunRecorder("build", params["manifest_path"], ctx.clock)
    state = BuildState(config)
    seeds = [s.strip() for s in seed_objects.split(",") if s.strip()]
    _, diagnostics = build_object_pool(
        config.domain, pool_size, ctx, seed_objects=seeds, pool=state.pool
    )
    diagnostics += generate_commands(state, ctx)
    for diag in diagnostics:
        _echo_err(f"{diag.severity}: {diag.rule}: {diag.message}")
    rejects = rejects_path or str(Path(out_path).with_suffix("")) + ".rejects.jsonl"
    artifacts = write_outcomes(
        generate_steps(state, ctx, variant=variant), out_path, rejects, state
    )
    if state_out:
        state.save(state_out)
    recorder.config = _config_snapshot(config, ctx)
    recorder.cassette_hash = _sha256_file(cassette.path)
    recorder.outputs = [str(out_path), str(rejects)] + ([str(state_out)] if state_out else [])
    recorder.counts = artifacts.to_dict()
    recorder.emit()
    _echo_err(
        f"{artifacts.records} records, {artifacts.rejects} rejects "
        f"from {artifacts.commands} commands -> {out_path}"
    )


@main.command("split")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", default=None, type=click.Path())
@click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True)
def split_cmd(dataset, ratios, seed, out_prefix, manifest_path):
    """Split a dataset into train/validation/test, disjoint by command."""
    try:
        parts = tuple(float(x) for x in ratios.split(","))
        if len(parts) != 3:
            raise ValueError
    except ValueError:
        raise click.UsageError(f"--ratios must be three comma-separated numbers, got {ratios!r}")
    recorder = RunRecorder("split", manifest_path, build_mod.utc_now)
    try:
        result = split_dataset(dataset, parts, seed, out_prefix)
    except build_mod.RatioError as exc:
        raise click.UsageError(str(exc))
    recorder.config = {"ratios": list(parts), "seed": seed}
    recorder.inputs = [str(dataset)]
    recorder.outputs = list(result.paths)
    recorder.counts = {
        "train": result.train,
        "validation": result.validation,
        "test": result.test,
    }
    recorder.emit()
    click.echo(canonical_json(result.to_dict()))


def _rules_from_flag(rules_flag: str) -> DomainRules:
    if rules_flag in presets.PRESETS or rules_flag == "open":
        return rules_for_domain(rules_flag)
    path = Path(rules_flag)
    if not path.exists():
        raise click.UsageError(
            f"--rules must be a preset ({', '.join(presets.PRESETS)}) or a YAML file path"
        )
    doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    return rules_from_actions(
        doc.get("allowed_actions", []),
        alternation=doc.get("alternation", "none"),
        gripper_capacity=doc.get("gripper_capacity", 1),
        closure_level=doc.get("closure_level", "lenient"),
    )


@main.command("validate")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--rules", "rules_flag", default="tabletop", show_default=True,
              help="Preset name or YAML rules file.")
@click.option("--min-pass", type=float, default=None,
              help="Exit 1 when the pass rate falls below this threshold.")
@click.option("--report", "report_path", default=None, type=click.Path())
@click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True)
def validate_cmd(dataset, rules_flag, min_pass, report_path, manifest_path):
    """Check every record's plan against domain rules."""
    recorder = RunRecorder("validate", manifest_path, build_mod.utc_now)
    summary = validate_dataset(dataset, _rules_from_flag(rules_flag))
    doc = summary.to_dict()
    payload = canonical_json(doc)
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
        recorder.outputs = [str(report_path)]
    click.echo(payload)
    rate = "undefined" if summary.pass_rate is None else f"{summary.pass_rate:.3f}"
    _echo_err(f"{summary.passed}/{summary.total} records passed (rate {rate})")
    recorder.config = {"rules": rules_flag, "min_pass": min_pass}
    recorder.inputs = [str(dataset)]
    recorder.counts = {"total": summary.total, "passed": summary.passed}
    recorder.emit()
    if min_pass is not None and (summary.pass_rate is None or summary.pass_rate < min_pass):
        sys.exit(1)


@main.command("analyze")
@click.argument("corpora", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--conllu", "conllu_path", default=None, type=click.Path(exists=True),
              help="CoNLL-U annotations for depth and higher-fidelity tags.")
@click.option("--tagger", type=click.Choice(["builtin", "conllu"]), default="builtin",
              show_default=True)
@click.option("--base", type=click.Choice(["natural", "two"]), default="natural",
              show_default=True)
@click.option("--denominator", type=click.Choice(["per_group", "whole_document"]),
              default="per_group", show_default=True)
@click.option("--report", "report_path", default=None, type=click.Path())
@click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True)
def analyze_cmd(corpora, conllu_path, tagger, base, denominator, report_path, manifest_path):
    """Corpus complexity report: readability, tree depth, types, entropy."""
    recorder = RunRecorder("analyze", manifest_path, build_mod.utc_now)
    if tagger == "conllu" and not conllu_path:
        raise click.UsageError("--tagger conllu needs --conllu FILE")
    conllu_sentences = read_conllu(conllu_path) if conllu_path else None
    reports = []
    for path in corpora:
        corpus = complexity.segment_and_tokenize(
            Path(path).read_text(encoding="utf-8"), label=Path(path).stem
        )
        reports.append(
            complexity.analyze(
                corpus,
                conllu_sentences=conllu_sentences,
                base=base,
                denominator=denominator,
            )
        )
    click.echo(complexity.format_table(reports))
    payload = canonical_json([r.to_dict() for r in reports])
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
        recorder.outputs = [str(report_path)]
    recorder.config = {"base": base, "denominator": denominator, "tagger": tagger}
    recorder.inputs = [str(p) for p in corpora]
    recorder.counts = {"corpora": len(reports)}
    recorder.emit()


@main.command("simulate")
@click.argument("testset", type=click.Path(exists=True))
@click.option("--plans", "plans_path", default=None, type=click.Path(exists=True),
              help="Generated plans to evaluate instead of the testset's own steps.")
@click.option("--min-success", type=float, default=None)
@click.option("--report", "report_path", default=None, type=click.Path())
@click.option("--trace", "show_trace", is_flag=True, default=False)
@click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True)
def simulate_cmd(testset, plans_path, min_success, report_path, show_trace, manifest_path):
    """Execute plans in the symbolic tabletop world against goal specs."""
    recorder = RunRecorder("simulate", manifest_path, build_mod.utc_now)
    if show_trace:
        for record in read_records(testset):
            goal = sim.goal_from_record(record)
            if goal is None:
                continue
            result = sim.run_plan(sim.world_for_record(record), record.steps, goal)
            for entry in result.trace:
                _echo_err(f"{record.id}: {entry}")
    summary = sim.evaluate_dataset(testset, plans_path)
    payload = canonical_json(summary.to_dict())
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")
        recorder.outputs = [str(report_path)]
    click.echo(payload)
    rate = "undefined" if summary.success_rate is None else f"{summary.success_rate:.3f}"
    _echo_err(f"{summary.total} cases, success rate {rate}")
    recorder.config = {"min_success": min_success}
    recorder.inputs = [str(testset)] + ([str(plans_path)] if plans_path else [])
    recorder.counts = {
        "total": summary.total,
        "successes": sum(1 for c in summary.cases if c.success),
    }
    recorder.emit()
    if min_success is not None and (
        summary.success_rate is None or summary.success_rate < min_success
    ):
        sys.exit(1)


@main.command("export-cliport")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--manifest", "manifest_path", default=DEFAULT_MANIFEST, show_default=True)
def export_cliport_cmd(dataset, out_path, manifest_path):
    """Emit downstream pick/place phrases for every record's plan."""
    recorder = RunRecorder("export-cliport", manifest_path, build_mod.utc_now)
    lines = []
    skipped = 0
    for record in read_records(dataset):
        try:
            calls = sim.export_cliport(record.steps)
        except CostkitError as exc:
            _echo_err(f"{record.id}: skipped: {exc}")
            skipped += 1
            continue
        lines.append(
            canonical_json({"id": record.id, "calls": [c.to_dict() for c in calls]})
        )
    payload = "\n".join(lines) + ("\n" if lines else "")
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
        recorder.outputs = [str(out_path)]
    else:
        click.echo(payload, nl=False)
    recorder.inputs = [str(dataset)]
    recorder.counts = {"exported": len(lines), "skipped": skipped}
    recorder.emit()


if __name__ == "__main__":
    main()
