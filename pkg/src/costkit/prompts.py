"""Template loading and prompt rendering.

Templates are plain-text files with a YAML front-matter header. Placeholders
use ``{{name}}`` markers, deliberately distinct from the literal ``<MASK>``,
``<USED_OBJECTS>``, and ``<INSTRUCTION>`` strings that are prompt content and
must survive rendering.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from costkit.model import CostkitError, ObjectName

TEMPLATE_IDS = ("object_list", "command_gen", "steps_fixed", "steps_flexible")

_PLACEHOLDER = re.compile(r"\{\{([a-z_]+)\}\}")
_FRONT_MATTER = re.compile(r"\A---\n(.*?)\n---\n", re.DOTALL)


class MissingPlaceholder(CostkitError):
    """A required placeholder was not supplied, or was supplied empty."""


class EmptyObjectList(CostkitError):
    """The command prompt needs at least one object to offer."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    body: str
    required_placeholders: frozenset[str]

    def placeholders_in_body(self) -> set[str]:
        return set(_PLACEHOLDER.findall(self.body))


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    version: str
    substitutions: tuple[tuple[str, str], ...]
    text: str


def parse_template_file(raw: str, source: str = "<memory>") -> PromptTemplate:
    match = _FRONT_MATTER.match(raw)
    if not match:
        raise CostkitError(f"{source}: missing front-matter header")
    meta = yaml.safe_load(match.group(1))
    body = raw[match.end():]
    template = PromptTemplate(
        template_id=str(meta["template_id"]),
        version=str(meta["version"]),
        body=body,
        required_placeholders=frozenset(meta["required_placeholders"]),
    )
    undeclared = template.placeholders_in_body() - template.required_placeholders
    if undeclared:
        raise CostkitError(f"{source}: undeclared placeholders {sorted(undeclared)}")
    return template


def load_template(template_id: str, templates_dir: str | Path | None = None) -> PromptTemplate:
    """Load a template by id, from ``templates_dir`` or the bundled set."""
    if template_id not in TEMPLATE_IDS:
        raise CostkitError(f"unknown template id {template_id!r}")
    if templates_dir is not None:
        path = Path(templates_dir) / f"{template_id}.txt"
        return parse_template_file(path.read_text(encoding="utf-8"), str(path))
    ref = resources.files("costkit.templates").joinpath(f"{template_id}.txt")
    return parse_template_file(ref.read_text(encoding="utf-8"), template_id)


def render(template: PromptTemplate, substitutions: Mapping[str, str]) -> RenderedPrompt:
    """Substitute all placeholders; empty values count as missing."""
    unknown = set(substitutions) - template.required_placeholders
    if unknown:
        raise MissingPlaceholder(
            f"{template.template_id}: unexpected substitutions {sorted(unknown)}"
        )
    missing = [
        name
        for name in sorted(template.required_placeholders)
        if not str(substitutions.get(name, "")).strip()
    ]
    if missing:
        raise MissingPlaceholder(f"{template.template_id}: missing values for {missing}")

    def _sub(match: re.Match) -> str:
        return str(substitutions[match.group(1)])

    text = _PLACEHOLDER.sub(_sub, template.body)
    leftover = _PLACEHOLDER.findall(text)
    if leftover:
        raise MissingPlaceholder(f"{template.template_id}: unbound markers {sorted(set(leftover))}")
    return RenderedPrompt(
        template_id=template.template_id,
        version=template.version,
        substitutions=tuple(sorted((k, str(v)) for k, v in substitutions.items())),
        text=text,
    )


def format_object_list(objects: Iterable[ObjectName | str]) -> str:
    """Render an object list the way dataset records print them: ['A', 'B']."""
    names = [o.raw if isinstance(o, ObjectName) else str(o) for o in objects]
    return "[" + ", ".join(f"'{name}'" for name in names) + "]"


def render_object_list_prompt(
    domain: str,
    count: int,
    exclusions: Iterable[ObjectName | str] = (),
    templates_dir: str | Path | None = None,
) -> RenderedPrompt:
    """Prompt asking for ``count`` objects plausible for ``domain``.

    ``exclusions`` feeds the already-collected section so repeated calls can
    grow one pool without re-listing the same objects (and so each call has
    a distinct request fingerprint).
    """
    if count < 1:
        raise MissingPlaceholder("object_list: count must be >= 1")
    names = [o.raw if isinstance(o, ObjectName) else str(o) for o in exclusions]
    template = load_template("object_list", templates_dir)
    return render(
        template,
        {
            "domain": domain,
            "count": str(count),
            "exclusions": ", ".join(names) if names else "(none)",
        },
    )


def render_command_prompt(
    domain: str,
    count: int,
    object_list: Iterable[ObjectName | str],
    note: str,
    example_command: str,
    min_objects: int = 2,
    templates_dir: str | Path | None = None,
) -> RenderedPrompt:
    """Prompt asking for ``count`` commands over ``object_list``.

    How abstract the generated commands are is steered entirely by
    ``example_command``; pass an example that names its objects for explicit
    commands, or one that does not for abstract commands.
    """
    objects = list(object_list)
    if not objects:
        raise EmptyObjectList("command_gen: object_list must be nonempty")
    if count < 1 or min_objects < 1:
        raise MissingPlaceholder("command_gen: count and min_objects must be >= 1")
    template = load_template("command_gen", templates_dir)
    return render(
        template,
        {
            "domain": domain,
            "count": str(count),
            "min_objects": str(min_objects),
            "example_command": example_command,
            "note": note,
            "object_list": format_object_list(objects),
        },
    )


def render_steps_prompt_fixed(
    command: str,
    objects: Iterable[ObjectName | str],
    robot_info: str,
    note: str,
    example: str,
    templates_dir: str | Path | None = None,
) -> RenderedPrompt:
    """Steps prompt for the fixed-objects case: the plan may use only the
    listed objects, and the robot's physical capabilities are spelled out."""
    objects = list(objects)
    if not objects:
        raise EmptyObjectList("steps_fixed: objects must be nonempty")
    template = load_template("steps_fixed", templates_dir)
    return render(
        template,
        {
            "robot_info": robot_info,
            "example": example,
            "note": note,
            "command": command,
            "objects": format_object_list(objects),
        },
    )


def render_steps_prompt_flexible(
    command: str,
    note: str,
    example: str,
    templates_dir: str | Path | None = None,
) -> RenderedPrompt:
    """Steps prompt for the flexible-objects case: the model must also name
    the objects the plan requires."""
    template = load_template("steps_flexible", templates_dir)
    return render(
        template,
        {"example": example, "note": note, "command": command},
    )
