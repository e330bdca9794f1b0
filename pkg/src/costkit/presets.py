"""Default prompt ingredients and rule settings per domain.

Everything here is a starting point, not a claim: override any field from
the CLI or a config file to match your own robot and environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class DomainPreset:
    name: str
    steps_variant: str  # "fixed" or "flexible"
    robot_info: str
    command_note: str
    command_example: str
    steps_note: str
    steps_example: str
    allowed_actions: tuple[str, ...]
    alternation: str  # "pick_place_strict" or "none"
    container_words: tuple[str, ...] = ("bowl", "tray", "plate", "box", "bin", "basket", "cup")


_TABLETOP_STEPS_EXAMPLE = """\
*Input:
Command= Arrange semicircle blocks in the same colored bowl as the picked block.
Objects in front of the robot= ['Yellow semicircle block', 'Red circle block', 'Red semicircle block', 'Yellow bowl', 'Red bowl']

*Output:
Action Steps=
Step 1. PICK up the red semicircle block. (ACTION: Pick | TARGET: Red semicircle block)
Step 2. PLACE the red semicircle block in the red bowl. (ACTION: Place | TARGET: Red bowl)
Step 3. PICK up the yellow semicircle block. (ACTION: Pick | TARGET: Yellow semicircle block)
Step 4. PLACE the yellow semicircle block in the yellow bowl. (ACTION: Place | TARGET: Yellow bowl)"""

_KITCHEN_STEPS_EXAMPLE = """\
*Input:
Command= Beat the egg in a bowl.

*Output:
Action Steps=
Step 1. PICK up the egg. (ACTION: Pick | TARGET: Egg)
Step 2. CRACK the egg into the bowl. (ACTION: Crack | TARGET: Bowl)
Step 3. PICK up the whisk. (ACTION: Pick | TARGET: Whisk)
Step 4. BEAT the egg in the bowl using the whisk. (ACTION: Beat | TARGET: Whisk, Egg, Bowl)
Required Objects= Egg, Bowl, Whisk"""

TABLETOP = DomainPreset(
    name="tabletop",
    steps_variant="fixed",
    robot_info=(
        "A single-arm robot works above a table. It can Pick up one object at "
        "a time and Place the held object on the table or into a container. "
        "No other actions are possible."
    ),
    command_note=(
        "Commands should describe goals a pick-and-place robot can reach by "
        "moving blocks between the table and containers. Vary the phrasing "
        "and mention why the arrangement matters when natural."
    ),
    command_example="(Red square block, Blue bowl) Put the red square block in the blue bowl.",
    steps_note=(
        "Use only Pick and Place actions. Never pick up a new object while "
        "the robot is already holding one. Every picked object must be "
        "placed before the steps end."
    ),
    steps_example=_TABLETOP_STEPS_EXAMPLE,
    allowed_actions=("Pick", "Place"),
    alternation="pick_place_strict",
)

# The kitchen "utilize" verbs are an open family; extend this list to taste.
KITCHEN_UTILIZE_VERBS = (
    "Crack",
    "Beat",
    "Wash",
    "Slice",
    "Stir",
    "Pour",
    "Cut",
    "Mix",
    "Peel",
    "Open",
)

KITCHEN = DomainPreset(
    name="kitchen",
    steps_variant="flexible",
    robot_info=(
        "A single-arm kitchen robot. It can pick up, move, place, and use "
        "one object at a time."
    ),
    command_note=(
        "Commands should be everyday kitchen tasks that one robot arm could "
        "attempt, phrased the way a person would say them."
    ),
    command_example="(Egg, Bowl) Beat the egg in a bowl.",
    steps_note=(
        "Keep each step short and concrete. The robot can hold only one "
        "object at a time. Allowed actions: pick, place, move, and verbs "
        "that use an object (wash, slice, crack, and similar)."
    ),
    steps_example=_KITCHEN_STEPS_EXAMPLE,
    allowed_actions=("Pick", "Place", "Move") + KITCHEN_UTILIZE_VERBS,
    alternation="none",
)

PRESETS = {p.name: p for p in (TABLETOP, KITCHEN)}


def get_preset(domain: str) -> DomainPreset | None:
    return PRESETS.get(domain)
