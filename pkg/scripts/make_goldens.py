#!/usr/bin/env python3
"""Regenerate the golden rendered prompts used by the regression tests.

Run after any deliberate template change, then review the diff:

    python3 scripts/make_goldens.py
"""

from pathlib import Path

from costkit import presets
from costkit.prompts import (
    render_command_prompt,
    render_object_list_prompt,
    render_steps_prompt_fixed,
    render_steps_prompt_flexible,
)

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"


def renders() -> dict[str, str]:
    tabletop = presets.TABLETOP
    kitchen = presets.KITCHEN
    return {
        "object_list_kitchen.txt": render_object_list_prompt("kitchen", 30).text,
        "command_gen_kitchen.txt": render_command_prompt(
            "kitchen",
            20,
            ["Egg", "Bowl", "Whisk"],
            note=kitchen.command_note,
            example_command=kitchen.command_example,
            min_objects=2,
        ).text,
        "steps_fixed_tabletop.txt": render_steps_prompt_fixed(
            "Arrange semicircle blocks in the same colored bowl as the picked block.",
            [
                "Yellow semicircle block",
                "Red circle block",
                "Red semicircle block",
                "Yellow bowl",
                "Red bowl",
            ],
            robot_info=tabletop.robot_info,
            note=tabletop.steps_note,
            example=tabletop.steps_example,
        ).text,
        "steps_flexible_kitchen.txt": render_steps_prompt_flexible(
            "Beat the egg in a bowl.",
            note=kitchen.steps_note,
            example=kitchen.steps_example,
        ).text,
    }


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for name, text in renders().items():
        (GOLDEN_DIR / name).write_text(text, encoding="utf-8")
        print(f"wrote tests/golden/{name}")


if __name__ == "__main__":
    main()
