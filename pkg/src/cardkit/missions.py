"""Built-in example missions: notation sources, placeholder bindings, and worlds.

These are the reference programs exercised by the test suite and the demo
scripts; each bundles notation text with the value bindings its placeholders
need and one or more simulation worlds to run against.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import Catalog, Deck
from .notation import parse_notation
from .simworld import Frame, ScriptedField, ScriptedObject, SimWorldConfig

HOME = {"lat": 37.0, "lon": -122.0, "alt": 0.0}
_FRAME = Frame(HOME)


def _loc(east: float, north: float, alt: float = 0.0) -> dict:
    return _FRAME.offset(east, north, alt)


def _box(center_east: float, center_north: float, width: float, height: float) -> dict:
    return _FRAME.box_around(center_east, center_north, width, height)


@dataclass(frozen=True)
class Mission:
    name: str
    title: str
    notation: str
    bindings: dict = field(default_factory=dict)
    worlds: dict = field(default_factory=dict)

    def deck(self, catalog: Catalog) -> Deck:
        return parse_notation(self.notation, catalog, self.bindings, deck_id=self.name)

    def world(self, variant: str = "default") -> SimWorldConfig:
        return self.worlds[variant]


PACKAGE_DELIVERY = Mission(
    name="package-delivery",
    title="Pick up a package at one house and drop it at another",
    notation="""\
Hand 1: FlyTo <- Location [pickup]
Hand 2: Land ; WaitForButtonPush
Hand 3: CloseClaw
Hand 4: FlyTo <- Location [delivery]
Hand 5: HoverToAltitude <- Distance [5 ft.]
Hand 6: OpenClaw
Hand 7: PlayAudio <- Audio [success]
Hand 8: ReturnHome
""",
    bindings={
        "pickup": _loc(150.0, 100.0, 20.0),
        "delivery": _loc(-120.0, 180.0, 20.0),
    },
    worlds={
        "default": SimWorldConfig(home=HOME, button_presses=(30.0,)),
    },
)


SKI_COVERAGE = Mission(
    name="ski-coverage",
    title="Film every skier descending the slope, staying above the tree line",
    notation="""\
Hand 1: Hover ; DetectOnGround <- Image [skier]
Hand 2: Follow <- (RelativeToObject + TrackOnGround <- Image [skier]) ; \
Altitude [300 ft.] ; WaitUntilLocation <- Location [bottom of slope] ; RecordVideo
Hand 3: ReturnHome ; Altitude [300 ft.]
Hand 4: RepeatDeck
""",
    bindings={
        "bottom of slope": _loc(0.0, 330.0, 0.0),
    },
    worlds={
        "default": SimWorldConfig(
            home=HOME,
            objects=tuple(
                ScriptedObject(
                    object_id=f"skier-{i + 1}",
                    image="skier",
                    visible_from=start,
                    path=(
                        (start + 5.0, _loc(0.0, 30.0, 0.0)),
                        (start + 65.0, _loc(0.0, 330.0, 0.0)),
                    ),
                )
                for i, start in enumerate((0.0, 140.0, 280.0))
            ),
        ),
    },
)


GAS_SURVEY = Mission(
    name="gas-survey",
    title="Sweep the yard for a gas leak; raise an alarm on site or return home",
    notation="""\
Hand 1: {CoverArea <- (BoundingBox [yard] + Avoid <- BoundingBox [house]) ; Branch(A)} ; \
{WaitForGas <- Threshold [high] ; Branch(B)} ; Any
Hand 2 Branch A: ReturnHome
Hand 2 Branch B: SetATimer <- Duration [3 min.] ; PlayAudioLoop <- Audio [alarm]
Hand 3: ReturnHome
""",
    bindings={
        "yard": _box(0.0, 100.0, 40.0, 40.0),
        "house": _box(-5.0, 95.0, 10.0, 10.0),
        "high": 0.7,
    },
    worlds={
        "leak": SimWorldConfig(
            home=HOME,
            gas_fields=(ScriptedField(center=_loc(15.0, 115.0), radius=30.0, level=1.0),),
        ),
        "clean": SimWorldConfig(home=HOME),
    },
)


PHOTO_FLIGHT = Mission(
    name="photo-flight",
    title="Fly to a location and take one photo",
    notation="""\
Hand 1: FlyTo <- Location [photo site]
Hand 2: TakeAPhoto
""",
    bindings={"photo site": _loc(150.0, 0.0, 20.0)},
    worlds={"default": SimWorldConfig(home=HOME)},
)


SWEEP_PHOTOS = Mission(
    name="sweep-photos",
    title="Take photos while flying to a location",
    notation="""\
Hand 1: FlyTo <- Location [photo site] ; TakePhotos <- Duration [15 s]
""",
    bindings={"photo site": _loc(150.0, 0.0, 20.0)},
    worlds={"default": SimWorldConfig(home=HOME)},
)


HUMIDITY_WATCH = Mission(
    name="humidity-watch",
    title="Land where the air is moist enough, or give up after a minute",
    notation="""\
Hand 1: FlyTo <- Location [site]
Hand 2: {WaitForHumidity <- Threshold [moist] ; Branch(A)} ; \
{SetATimer <- Duration [60 s] ; Branch(B)} ; Any
Hand 3 Branch A: Land
Hand 3 Branch B: ReturnHome
""",
    bindings={
        "site": _loc(80.0, 60.0, 15.0),
        "moist": 0.6,
    },
    worlds={
        "humid": SimWorldConfig(
            home=HOME,
            humidity_fields=(ScriptedField(center=_loc(80.0, 60.0), radius=50.0, level=0.9),),
        ),
        "dry": SimWorldConfig(home=HOME),
    },
)


PHOTO_RETURN = Mission(
    name="photo-return",
    title="Take photos on the way out, then fly back to where the first was shot",
    notation="""\
Hand 1: FlyTo#scout <- Location [photo site] ; TakePhotos#cam <- Duration [12 s]
Hand 2: FlyTo#back <- Yield(1.cam.locations[0])
""",
    bindings={"photo site": _loc(150.0, 0.0, 20.0)},
    worlds={"default": SimWorldConfig(home=HOME)},
)


ALL_MISSIONS = (
    PACKAGE_DELIVERY,
    SKI_COVERAGE,
    GAS_SURVEY,
    PHOTO_FLIGHT,
    SWEEP_PHOTOS,
    HUMIDITY_WATCH,
    PHOTO_RETURN,
)


def by_name(name: str) -> Mission:
    for mission in ALL_MISSIONS:
        if mission.name == name:
            return mission
    raise KeyError(name)
