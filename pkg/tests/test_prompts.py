from pathlib import Path

import pytest

from costkit import presets
from costkit.prompts import (
    EmptyObjectList,
    MissingPlaceholder,
    TEMPLATE_IDS,
    load_template,
    parse_template_file,
    render,
    render_command_prompt,
    render_object_list_prompt,
    render_steps_prompt_fixed,
    render_steps_prompt_flexible,
)

from .samples import BLOCK_SORT_COMMAND, BLOCK_SORT_OBJECTS

GOLDEN_DIR = Path(__file__).parent / "golden"


def _fixed_render():
    return render_steps_prompt_fixed(
        BLOCK_SORT_COMMAND,
        BLOCK_SORT_OBJECTS,
        robot_info=presets.TABLETOP.robot_info,
        note=presets.TABLETOP.steps_note,
        example=presets.TABLETOP.steps_example,
    )


def _flexible_render():
    return render_steps_prompt_flexible(
        "Beat the egg in a bowl.",
        note=presets.KITCHEN.steps_note,
        example=presets.KITCHEN.steps_example,
    )


def test_all_templates_load_and_declare_their_placeholders():
    for template_id in TEMPLATE_IDS:
        template = load_template(template_id)
        assert template.template_id == template_id
        assert template.placeholders_in_body() <= template.required_placeholders


def test_object_list_prompt_mentions_domain_and_count():
    prompt = render_object_list_prompt("kitchen", 30)
    assert "kitchen" in prompt.text
    assert "30 objects" in prompt.text
    assert "1." in prompt.text


def test_object_list_prompt_rejects_empty_domain():
    with pytest.raises(MissingPlaceholder):
        render_object_list_prompt("", 10)


def test_object_list_prompt_exclusions_change_text():
    a = render_object_list_prompt("kitchen", 10)
    b = render_object_list_prompt("kitchen", 10, exclusions=["Bowl", "Whisk"])
    assert a.text != b.text
    assert "Bowl, Whisk" in b.text


def test_command_prompt_embeds_template_line_and_objects():
    prompt = render_command_prompt(
        "kitchen",
        20,
        ["Egg", "Bowl", "Whisk"],
        note=presets.KITCHEN.command_note,
        example_command="Make a sandwich.",
        min_objects=2,
    )
    assert "(<USED_OBJECTS>), <INSTRUCTION>" in prompt.text
    for name in ("Egg", "Bowl", "Whisk"):
        assert name in prompt.text
    assert "generate 20 sets of instructions" in prompt.text
    assert "Select 2 or more objects" in prompt.text
    assert "Make a sandwich." in prompt.text


def test_command_prompt_rejects_empty_object_list():
    with pytest.raises(EmptyObjectList):
        render_command_prompt(
            "kitchen", 20, [], note="n", example_command="e", min_objects=1
        )


def test_fixed_steps_prompt_contains_input_line_and_objects():
    prompt = _fixed_render()
    assert "Objects in front of the robot=" in prompt.text
    for name in BLOCK_SORT_OBJECTS:
        assert name in prompt.text
    assert "[Information about the robot]" in prompt.text
    assert "(ACTION" in prompt.text and "TARGET:" in prompt.text


def test_fixed_steps_prompt_requires_robot_info():
    with pytest.raises(MissingPlaceholder):
        render_steps_prompt_fixed(
            "Do the thing.",
            ["Block"],
            robot_info="",
            note="n",
            example="e",
        )


def test_flexible_steps_prompt_has_required_objects_mask():
    prompt = _flexible_render()
    assert "Required Objects= <MASK>" in prompt.text
    assert "[Information about the robot]" not in prompt.text
    header_lines = [l for l in prompt.text.splitlines() if l == "[Output template]"]
    assert len(header_lines) == 1
    assert prompt.text.count("Required Objects= <MASK>") == 1


def test_flexible_steps_prompt_rejects_empty_command():
    with pytest.raises(MissingPlaceholder):
        render_steps_prompt_flexible("", note="n", example="e")


def test_rendering_is_pure():
    assert _fixed_render().text == _fixed_render().text
    assert _flexible_render() == _flexible_render()


def test_no_residual_markers_in_any_render():
    for prompt in (_fixed_render(), _flexible_render()):
        assert "{{" not in prompt.text and "}}" not in prompt.text


def test_unknown_substitution_rejected():
    template = load_template("steps_flexible")
    with pytest.raises(MissingPlaceholder):
        render(template, {"example": "e", "note": "n", "command": "c", "oops": "x"})


def test_undeclared_placeholder_in_body_rejected():
    raw = "---\ntemplate_id: t\nversion: '1'\nrequired_placeholders: [a]\n---\nHi {{a}} {{b}}\n"
    with pytest.raises(Exception, match="undeclared"):
        parse_template_file(raw)


def _golden_renders():
    import importlib.util

    script = Path(__file__).parent.parent / "scripts" / "make_goldens.py"
    spec = importlib.util.spec_from_file_location("make_goldens", script)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module.renders()


def test_rendered_prompts_match_goldens():
    for name, text in _golden_renders().items():
        golden = (GOLDEN_DIR / name).read_text(encoding="utf-8")
        assert text == golden, f"render drifted from tests/golden/{name}"
