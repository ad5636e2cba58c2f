"""The drone card catalog: every card descriptor plus its executable behavior.

Behaviors are generator functions advanced once per tick by the runtime; a
behavior returns when its end condition is satisfied and cleans up in a
``finally`` block when terminated early (stop video, stop audio, stop
tracking). Cards without end conditions simply never return.

Camera token policy: exclusive-capture cards (photos, detection) consume the
camera token, while passive stream users (RecordVideo, TrackOnGround) share
it, so tracking a subject while recording video in one hand is legal.
"""
from __future__ import annotations

import json
import os

from .model import (
    ALTITUDE,
    AUDIO,
    BOUNDING_BOX,
    DISTANCE,
    DURATION,
    IMAGE,
    LOCATION,
    NUMBER,
    RELATIVE_POSITION,
    THRESHOLD,
    ActionSubclass,
    CardClass,
    CardDescriptor,
    Catalog,
    InputSlotSpec,
    TokenSlotSpec,
    YieldSpec,
    parse_kind,
    sequence_of,
)
from .runtime import BehaviorContext, OpHandle, TokenFault

CATALOG_ENV_VAR = "CARDKIT_CATALOG"

# Shorthand builders keep the roster below readable.
_req = lambda name, kind: InputSlotSpec(name, kind, required=True)
_opt = lambda name, kind: InputSlotSpec(name, kind, required=False)
_consumed = lambda slot, ttype: TokenSlotSpec(slot, ttype, consumed=True)
_shared = lambda slot, ttype: TokenSlotSpec(slot, ttype, consumed=False)

_MIN_ALT = _opt("minAltitude", ALTITUDE)
_MOVE = (_consumed("movement", "movement"),)


def _movement(name: str, inputs: tuple = (), ends: bool = True) -> CardDescriptor:
    return CardDescriptor(
        path=f"Action/Movement/{name}", card_class=CardClass.ACTION,
        subclass=ActionSubclass.MOVEMENT, input_slots=inputs + (_MIN_ALT,),
        token_slots=_MOVE, ends=ends)


def _input_card(name: str, kind) -> CardDescriptor:
    return CardDescriptor(path=f"Input/{name}", card_class=CardClass.INPUT, produces=kind)


def _hand_card(name: str) -> CardDescriptor:
    return CardDescriptor(path=f"Hand/{name}", card_class=CardClass.HAND)


def _token_card(name: str, token_type: str) -> CardDescriptor:
    return CardDescriptor(path=f"Token/{name}", card_class=CardClass.TOKEN, token_type=token_type)


_DESCRIPTORS = (
    # Movement: all consume the single movement token and accept an optional
    # altitude floor stacked alongside (e.g. a surveying height to hold).
    _movement("FlyTo", (_req("destination", LOCATION),)),
    _movement("Land"),
    _movement("Hover", ends=False),
    _movement("HoverToAltitude", (_req("altitude", DISTANCE),)),
    _movement("ReturnHome"),
    _movement("CoverArea", (_req("area", BOUNDING_BOX), _opt("avoid", BOUNDING_BOX))),
    _movement("Circle", (_req("center", LOCATION), _req("radius", DISTANCE)), ends=False),
    _movement("Follow", (_req("offset", RELATIVE_POSITION),), ends=False),

    CardDescriptor(path="Action/Tech/TakeAPhoto", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   token_slots=(_consumed("camera", "camera"),), ends=True),
    CardDescriptor(path="Action/Tech/TakePhotos", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   input_slots=(_req("duration", DURATION),),
                   token_slots=(_consumed("camera", "camera"),), ends=True,
                   yields=(YieldSpec("photos", sequence_of(IMAGE)),
                           YieldSpec("locations", sequence_of(LOCATION)))),
    CardDescriptor(path="Action/Tech/RecordVideo", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   token_slots=(_shared("camera", "camera"),),
                   yields=(YieldSpec("video", IMAGE),)),
    CardDescriptor(path="Action/Tech/PlayAudio", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   input_slots=(_req("audio", AUDIO),),
                   token_slots=(_consumed("speaker", "speaker"),), ends=True),
    CardDescriptor(path="Action/Tech/PlayAudioLoop", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   input_slots=(_req("audio", AUDIO),),
                   token_slots=(_consumed("speaker", "speaker"),)),
    CardDescriptor(path="Action/Tech/OpenClaw", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   token_slots=(_consumed("claw", "claw"),), ends=True),
    CardDescriptor(path="Action/Tech/CloseClaw", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   token_slots=(_consumed("claw", "claw"),), ends=True),
    CardDescriptor(path="Action/Tech/LogHumidity", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TECH,
                   token_slots=(_shared("sensor", "humidity-sensor"),),
                   yields=(YieldSpec("readings", sequence_of(NUMBER)),)),

    CardDescriptor(path="Action/Think/DetectOnGround", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.THINK,
                   input_slots=(_req("image", IMAGE),),
                   token_slots=(_consumed("camera", "camera"), _consumed("gimbal", "gimbal")),
                   ends=True, yields=(YieldSpec("detectedLocation", LOCATION),)),
    CardDescriptor(path="Action/Think/DetectInAir", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.THINK,
                   input_slots=(_req("image", IMAGE),),
                   token_slots=(_consumed("camera", "camera"), _consumed("gimbal", "gimbal")),
                   ends=True),
    CardDescriptor(path="Action/Think/TrackOnGround", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.THINK,
                   input_slots=(_req("image", IMAGE),),
                   token_slots=(_shared("camera", "camera"), _consumed("gimbal", "gimbal")),
                   yields=(YieldSpec("trackedPosition", LOCATION),)),

    CardDescriptor(path="Action/Trigger/SetATimer", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TRIGGER,
                   input_slots=(_req("duration", DURATION),), ends=True),
    CardDescriptor(path="Action/Trigger/WaitUntilLocation", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TRIGGER,
                   input_slots=(_req("location", LOCATION),), ends=True),
    CardDescriptor(path="Action/Trigger/WaitForButtonPush", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TRIGGER,
                   token_slots=(_shared("button", "button"),), ends=True),
    CardDescriptor(path="Action/Trigger/WaitForGas", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TRIGGER,
                   input_slots=(_req("threshold", THRESHOLD),),
                   token_slots=(_shared("sensor", "gas-sensor"),), ends=True),
    CardDescriptor(path="Action/Trigger/WaitForHumidity", card_class=CardClass.ACTION,
                   subclass=ActionSubclass.TRIGGER,
                   input_slots=(_req("threshold", THRESHOLD),),
                   token_slots=(_shared("sensor", "humidity-sensor"),), ends=True),

    _input_card("Location", LOCATION),
    _input_card("Distance", DISTANCE),
    _input_card("Duration", DURATION),
    _input_card("Altitude", ALTITUDE),
    _input_card("Image", IMAGE),
    _input_card("Audio", AUDIO),
    _input_card("Threshold", THRESHOLD),
    _input_card("BoundingBox", BOUNDING_BOX),
    _input_card("Avoid", BOUNDING_BOX),
    _input_card("RelativeToObject", RELATIVE_POSITION),

    _hand_card("Any"),
    _hand_card("Repeat"),
    _hand_card("Branch"),
    _hand_card("And"),
    _hand_card("Or"),
    _hand_card("Not"),
    CardDescriptor(path="Deck/RepeatDeck", card_class=CardClass.DECK),

    _token_card("Movement", "movement"),
    _token_card("Camera", "camera"),
    _token_card("Gimbal", "gimbal"),
    _token_card("Claw", "claw"),
    _token_card("Speaker", "speaker"),
    _token_card("GasSensor", "gas-sensor"),
    _token_card("HumiditySensor", "humidity-sensor"),
    _token_card("Button", "button"),
)


# ---------------------------------------------------------------------------
# Behaviors
# ---------------------------------------------------------------------------

def _await_op(slot: str, handle: OpHandle):
    while not handle.done:
        if handle.failed is not None:
            raise TokenFault(slot, handle.failed)
        yield


def _fly_to(ctx: BehaviorContext):
    handle = ctx.tokens["movement"].fly_to(ctx.inputs["destination"], ctx.inputs.get("minAltitude"))
    yield from _await_op("movement", handle)


def _land(ctx: BehaviorContext):
    yield from _await_op("movement", ctx.tokens["movement"].land())


def _hover(ctx: BehaviorContext):
    ctx.tokens["movement"].hover()
    while True:
        yield


def _hover_to_altitude(ctx: BehaviorContext):
    yield from _await_op("movement", ctx.tokens["movement"].hover_to_altitude(ctx.inputs["altitude"]))


def _return_home(ctx: BehaviorContext):
    yield from _await_op("movement", ctx.tokens["movement"].return_home(ctx.inputs.get("minAltitude")))


def _cover_area(ctx: BehaviorContext):
    handle = ctx.tokens["movement"].cover_path(
        ctx.inputs["area"], ctx.inputs.get("avoid"), ctx.inputs.get("minAltitude"))
    yield from _await_op("movement", handle)


def _circle(ctx: BehaviorContext):
    ctx.tokens["movement"].circle(ctx.inputs["center"], ctx.inputs["radius"],
                                  ctx.inputs.get("minAltitude"))
    while True:
        yield


def _follow(ctx: BehaviorContext):
    ctx.tokens["movement"].follow_target(ctx.inputs["offset"], ctx.inputs.get("minAltitude"))
    while True:
        yield


def _take_a_photo(ctx: BehaviorContext):
    ctx.tokens["camera"].take_photo()
    return
    yield  # generator form; satisfied on the first advance


def _take_photos(ctx: BehaviorContext):
    camera = ctx.tokens["camera"]
    duration = ctx.inputs["duration"]
    photos: list[str] = []
    locations: list[dict] = []
    next_shot = 0.0
    try:
        while ctx.elapsed() < duration:
            if ctx.elapsed() >= next_shot:
                shot = camera.take_photo()
                photos.append(shot.image)
                locations.append(shot.location)
                next_shot += 1.0
            yield
    finally:
        ctx.set_yield("photos", photos)
        ctx.set_yield("locations", locations)


def _record_video(ctx: BehaviorContext):
    camera = ctx.tokens["camera"]
    camera.start_video()
    try:
        while True:
            yield
    finally:
        ctx.set_yield("video", camera.stop_video())


def _play_audio(ctx: BehaviorContext):
    yield from _await_op("speaker", ctx.tokens["speaker"].play(ctx.inputs["audio"]))


def _play_audio_loop(ctx: BehaviorContext):
    speaker = ctx.tokens["speaker"]
    speaker.play_loop(ctx.inputs["audio"])
    try:
        while True:
            yield
    finally:
        speaker.stop_audio()


def _open_claw(ctx: BehaviorContext):
    yield from _await_op("claw", ctx.tokens["claw"].open())


def _close_claw(ctx: BehaviorContext):
    yield from _await_op("claw", ctx.tokens["claw"].close())


def _log_humidity(ctx: BehaviorContext):
    sensor = ctx.tokens["sensor"]
    readings: list[float] = []
    next_sample = 0.0
    try:
        while True:
            if ctx.elapsed() >= next_sample:
                readings.append(sensor.read_level())
                next_sample += 1.0
            yield
    finally:
        ctx.set_yield("readings", readings)


def _detect_on_ground(ctx: BehaviorContext):
    handle = ctx.tokens["camera"].detect(ctx.inputs["image"])
    while not handle.done:
        yield
    assert handle.location is not None
    ctx.set_yield("detectedLocation", handle.location)


def _detect_in_air(ctx: BehaviorContext):
    handle = ctx.tokens["camera"].detect(ctx.inputs["image"])
    while not handle.done:
        yield


def _track_on_ground(ctx: BehaviorContext):
    handle = ctx.tokens["camera"].track(ctx.inputs["image"])
    try:
        while True:
            position = handle.position()
            if position is not None:
                ctx.set_yield("trackedPosition", position)
            yield
    finally:
        handle.stop()


def _set_a_timer(ctx: BehaviorContext):
    duration = ctx.inputs["duration"]
    while ctx.elapsed() < duration:
        yield


def _wait_until_location(ctx: BehaviorContext):
    target = ctx.inputs["location"]
    telemetry = ctx.movement_telemetry
    while telemetry is None or not telemetry.at_location(target):
        yield


def _wait_for_button_push(ctx: BehaviorContext):
    handle = ctx.tokens["button"].watch()
    while not handle.done:
        yield


def _wait_for_level(ctx: BehaviorContext):
    sensor = ctx.tokens["sensor"]
    threshold = ctx.inputs["threshold"]
    while sensor.read_level() < threshold:
        yield


_BEHAVIORS = {
    "Action/Movement/FlyTo": _fly_to,
    "Action/Movement/Land": _land,
    "Action/Movement/Hover": _hover,
    "Action/Movement/HoverToAltitude": _hover_to_altitude,
    "Action/Movement/ReturnHome": _return_home,
    "Action/Movement/CoverArea": _cover_area,
    "Action/Movement/Circle": _circle,
    "Action/Movement/Follow": _follow,
    "Action/Tech/TakeAPhoto": _take_a_photo,
    "Action/Tech/TakePhotos": _take_photos,
    "Action/Tech/RecordVideo": _record_video,
    "Action/Tech/PlayAudio": _play_audio,
    "Action/Tech/PlayAudioLoop": _play_audio_loop,
    "Action/Tech/OpenClaw": _open_claw,
    "Action/Tech/CloseClaw": _close_claw,
    "Action/Tech/LogHumidity": _log_humidity,
    "Action/Think/DetectOnGround": _detect_on_ground,
    "Action/Think/DetectInAir": _detect_in_air,
    "Action/Think/TrackOnGround": _track_on_ground,
    "Action/Trigger/SetATimer": _set_a_timer,
    "Action/Trigger/WaitUntilLocation": _wait_until_location,
    "Action/Trigger/WaitForButtonPush": _wait_for_button_push,
    "Action/Trigger/WaitForGas": _wait_for_level,
    "Action/Trigger/WaitForHumidity": _wait_for_level,
}

_BEHAVIOR_CONTRACTS = {
    "Action/Movement/FlyTo": "movement.fly_to(destination); satisfied on arrival",
    "Action/Movement/Land": "movement.land(); satisfied on touchdown",
    "Action/Movement/Hover": "movement.hover(); holds position until the hand ends",
    "Action/Movement/HoverToAltitude": "movement.hover_to_altitude(altitude); satisfied at target height",
    "Action/Movement/ReturnHome": "movement.return_home(); satisfied over the home point",
    "Action/Movement/CoverArea": "movement.cover_path(area, avoid); boustrophedon sweep, satisfied when all cells visited",
    "Action/Movement/Circle": "movement.circle(center, radius); orbits until the hand ends",
    "Action/Movement/Follow": "movement.follow_target(offset); chases the active tracked object until the hand ends",
    "Action/Tech/TakeAPhoto": "camera.take_photo(); satisfied immediately after capture",
    "Action/Tech/TakePhotos": "camera.take_photo() once per second for the given duration; yields photos and capture locations",
    "Action/Tech/RecordVideo": "camera.start_video(); records until the hand ends, then yields the clip",
    "Action/Tech/PlayAudio": "speaker.play(audio); satisfied when the clip finishes",
    "Action/Tech/PlayAudioLoop": "speaker.play_loop(audio); loops until the hand ends",
    "Action/Tech/OpenClaw": "claw.open(); satisfied when open",
    "Action/Tech/CloseClaw": "claw.close(); satisfied when closed",
    "Action/Tech/LogHumidity": "sensor.read_level() once per second; yields the readings when the hand ends",
    "Action/Think/DetectOnGround": "camera.detect(image); satisfied on detection, yields the detected location",
    "Action/Think/DetectInAir": "camera.detect(image); satisfied on detection",
    "Action/Think/TrackOnGround": "camera.track(image); publishes the latest tracked position until the hand ends",
    "Action/Trigger/SetATimer": "satisfied once the given duration has elapsed",
    "Action/Trigger/WaitUntilLocation": "polls position telemetry; satisfied within arrival tolerance of the location",
    "Action/Trigger/WaitForButtonPush": "button.watch(); satisfied when pressed while watching",
    "Action/Trigger/WaitForGas": "polls sensor.read_level() each tick; satisfied at or above the threshold",
    "Action/Trigger/WaitForHumidity": "polls sensor.read_level() each tick; satisfied at or above the threshold",
}


def behavior_contract(catalog: Catalog, path: str) -> str:
    """Describe how an action card drives its tokens; raises NotAnAction otherwise."""
    from .model import NotAnAction

    descriptor = catalog.lookup(path)
    if descriptor.card_class is not CardClass.ACTION:
        raise NotAnAction(path)
    return _BEHAVIOR_CONTRACTS.get(path, "extension card: no built-in behavior")


# ---------------------------------------------------------------------------
# Catalog construction and JSON form
# ---------------------------------------------------------------------------

def drone_catalog() -> Catalog:
    return Catalog(_DESCRIPTORS, _BEHAVIORS)


def _kind_str(kind) -> str:
    return str(kind)


def descriptor_to_json(descriptor: CardDescriptor) -> dict:
    return {
        "path": descriptor.path,
        "class": descriptor.card_class.value,
        "subclass": descriptor.subclass.value if descriptor.subclass else None,
        "ends": descriptor.ends,
        "inputs": [
            {"name": s.name, "kind": _kind_str(s.kind), "required": s.required}
            for s in descriptor.input_slots
        ],
        "tokens": [
            {"slot": s.slot_name, "type": s.token_type, "consumed": s.consumed}
            for s in descriptor.token_slots
        ],
        "yields": [{"name": y.name, "kind": _kind_str(y.kind)} for y in descriptor.yields],
        "produces": _kind_str(descriptor.produces) if descriptor.produces else None,
        "tokenType": descriptor.token_type,
    }


def descriptor_from_json(data: dict) -> CardDescriptor:
    return CardDescriptor(
        path=data["path"],
        card_class=CardClass(data["class"]),
        subclass=ActionSubclass(data["subclass"]) if data.get("subclass") else None,
        input_slots=tuple(
            InputSlotSpec(s["name"], parse_kind(s["kind"]), bool(s["required"]))
            for s in data.get("inputs", ())
        ),
        token_slots=tuple(
            TokenSlotSpec(s["slot"], s["type"], bool(s["consumed"]))
            for s in data.get("tokens", ())
        ),
        yields=tuple(YieldSpec(y["name"], parse_kind(y["kind"])) for y in data.get("yields", ())),
        ends=bool(data.get("ends", False)),
        produces=parse_kind(data["produces"]) if data.get("produces") else None,
        token_type=data.get("tokenType"),
    )


def catalog_to_json(catalog: Catalog) -> list[dict]:
    return [descriptor_to_json(d) for d in catalog.descriptors()]


def load_catalog(extension_path: str | None = None) -> Catalog:
    """Build the drone catalog, merging the extension file named by
    CARDKIT_CATALOG (or an explicit path) if present. Extension cards have
    descriptors only; decks using them validate but cannot run."""
    catalog = drone_catalog()
    path = extension_path or os.environ.get(CATALOG_ENV_VAR)
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        catalog = catalog.extended(descriptor_from_json(e) for e in entries)
    return catalog
