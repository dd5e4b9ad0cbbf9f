"""Scene and event vocabularies plus the scene -> event policy table."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class SceneId(IntEnum):
    Indoor = 0
    Nature = 1
    Urban = 2


class EventClassId(IntEnum):
    Bicycle = 0
    CarHorn = 1
    Crying = 2
    Dog = 3
    DoorKnock = 4
    Siren = 5


N_SCENES = len(SceneId)
N_CLASSES = len(EventClassId)

AZIMUTH_STEP_DEG = 15
N_AZIMUTHS = 360 // AZIMUTH_STEP_DEG


def parse_scene(value) -> SceneId:
    """Accept a SceneId, its integer code or its name (case-insensitive)."""
    if isinstance(value, SceneId):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.isdigit():
            return SceneId(int(text))
        for s in SceneId:
            if s.name.lower() == text.lower():
                return s
        raise ValueError(f"unknown scene {value!r}")
    return SceneId(int(value))


def parse_class(value) -> EventClassId:
    if isinstance(value, EventClassId):
        return value
    if isinstance(value, str):
        text = value.strip().replace(" ", "")
        if text.isdigit():
            return EventClassId(int(text))
        for c in EventClassId:
            if c.name.lower() == text.lower():
                return c
        raise ValueError(f"unknown event class {value!r}")
    return EventClassId(int(value))


@dataclass(frozen=True)
class ScenePolicy:
    classes: frozenset
    snr_db: tuple[float, float]

    def permits(self, cls: EventClassId) -> bool:
        return EventClassId(cls) in self.classes


SceneEventPolicy = dict  # SceneId -> ScenePolicy

DEFAULT_POLICY: dict[SceneId, ScenePolicy] = {
    SceneId.Indoor: ScenePolicy(
        frozenset({EventClassId.Crying, EventClassId.Dog, EventClassId.DoorKnock}), (5.0, 20.0)
    ),
    SceneId.Nature: ScenePolicy(frozenset({EventClassId.Bicycle, EventClassId.Dog}), (0.0, 15.0)),
    SceneId.Urban: ScenePolicy(
        frozenset({EventClassId.Bicycle, EventClassId.CarHorn, EventClassId.Siren}), (-10.0, 5.0)
    ),
}


def policy_with_snr(overrides: dict[SceneId, tuple[float, float]], base=None) -> dict[SceneId, ScenePolicy]:
    base = DEFAULT_POLICY if base is None else base
    out = dict(base)
    for scene, rng in overrides.items():
        lo, hi = float(rng[0]), float(rng[1])
        if lo > hi:
            raise ValueError(f"SNR range for {scene.name} is inverted: {lo} > {hi}")
        out[scene] = ScenePolicy(base[scene].classes, (lo, hi))
    return out
