"""Small worked examples shared by several test modules."""

from ccsw.plays import Open, Position, Run, Sync, View
from ccsw.strategy import In, Out

# three players on one channel: x may input, y and z may output
RAN_POSITION = Position.of({"x": ["a"], "y": ["a"], "z": ["a"]})


def ran_plays() -> dict[str, Run]:
    base = Run(RAN_POSITION)
    return {
        "id": base,
        "I_x": base.extend(Open("x", In(1))),
        "O_y": base.extend(Open("y", Out(1))),
        "O_z": base.extend(Open("z", Out(1))),
        "S_xy": base.extend(Sync("y", 1, "x", 1)),
        "S_xz": base.extend(Sync("z", 1, "x", 1)),
    }


def ran_views() -> dict[View, int]:
    """The view restriction of the presheaf: 1 everywhere."""
    return {
        View("x", 1, ()): 1,
        View("y", 1, ()): 1,
        View("z", 1, ()): 1,
        View("x", 1, (In(1),)): 1,
        View("y", 1, (Out(1),)): 1,
        View("z", 1, (Out(1),)): 1,
    }


def ran_presheaf() -> dict[str, int]:
    """Values of the non-innocent presheaf on the tabulated plays."""
    return {"id": 1, "I_x": 1, "O_y": 1, "O_z": 1, "S_xy": 2, "S_xz": 0}
