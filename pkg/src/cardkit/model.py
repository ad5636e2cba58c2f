"""Core data model: card descriptors, decks, hands, bindings, and typed values.

Everything in this module is immutable after construction and safe to share
across threads. Cross-referencing rules that need a card catalog (slot kinds,
token types, end conditions) are checked by the validator, not here; this
module only enforces local structural invariants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Union


class ModelError(ValueError):
    """A structural invariant of the deck model was violated."""


# ---------------------------------------------------------------------------
# Value kinds
# ---------------------------------------------------------------------------

class ValueTag(str, Enum):
    LOCATION = "Location"
    DISTANCE = "Distance"
    DURATION = "Duration"
    ALTITUDE = "Altitude"
    IMAGE = "Image"
    AUDIO = "Audio"
    THRESHOLD = "Threshold"
    BOUNDING_BOX = "BoundingBox"
    RELATIVE_POSITION = "RelativePosition"
    BOOLEAN = "Boolean"
    NUMBER = "Number"
    TEXT = "Text"
    SEQUENCE = "SequenceOf"


@dataclass(frozen=True)
class DataKind:
    """A value kind; sequences nest exactly one level."""

    tag: ValueTag
    element: "DataKind | None" = None

    def __post_init__(self) -> None:
        if self.tag is ValueTag.SEQUENCE:
            if self.element is None:
                raise ModelError("SequenceOf requires an element kind")
            if self.element.tag is ValueTag.SEQUENCE:
                raise ModelError("sequences of sequences are not allowed")
        elif self.element is not None:
            raise ModelError(f"{self.tag.value} does not take an element kind")

    def __str__(self) -> str:
        if self.tag is ValueTag.SEQUENCE:
            return f"SequenceOf({self.element})"
        return self.tag.value


LOCATION = DataKind(ValueTag.LOCATION)
DISTANCE = DataKind(ValueTag.DISTANCE)
DURATION = DataKind(ValueTag.DURATION)
ALTITUDE = DataKind(ValueTag.ALTITUDE)
IMAGE = DataKind(ValueTag.IMAGE)
AUDIO = DataKind(ValueTag.AUDIO)
THRESHOLD = DataKind(ValueTag.THRESHOLD)
BOUNDING_BOX = DataKind(ValueTag.BOUNDING_BOX)
RELATIVE_POSITION = DataKind(ValueTag.RELATIVE_POSITION)
BOOLEAN = DataKind(ValueTag.BOOLEAN)
NUMBER = DataKind(ValueTag.NUMBER)
TEXT = DataKind(ValueTag.TEXT)


def sequence_of(element: DataKind) -> DataKind:
    return DataKind(ValueTag.SEQUENCE, element)


_SCALAR_KIND_NAMES = {k.value: DataKind(k) for k in ValueTag if k is not ValueTag.SEQUENCE}


def parse_kind(text: str) -> DataKind:
    """Parse the textual kind form used in catalog dumps, e.g. ``SequenceOf(Location)``."""
    text = text.strip()
    if text.startswith("SequenceOf(") and text.endswith(")"):
        return sequence_of(parse_kind(text[len("SequenceOf("):-1]))
    try:
        return _SCALAR_KIND_NAMES[text]
    except KeyError:
        raise ModelError(f"unknown value kind {text!r}") from None


# Canonical payload shapes, keyed by kind tag. Numbers are normalized to
# float so that structurally equal values always serialize identically.

_LOCATION_KEYS = ("alt", "lat", "lon")
_BOX_KEYS = ("latMax", "latMin", "lonMax", "lonMin")
_OFFSET_KEYS = ("east", "north", "up")
_NUMERIC_TAGS = {ValueTag.DISTANCE, ValueTag.DURATION, ValueTag.ALTITUDE,
                 ValueTag.THRESHOLD, ValueTag.NUMBER}
_STRING_TAGS = {ValueTag.IMAGE, ValueTag.AUDIO, ValueTag.TEXT}


_MAX_PAYLOAD_NESTING = 16


def normalize_value(value: object, _depth: int = 0) -> object:
    """Canonicalize a literal payload: ints become floats, containers are copied."""
    if _depth > _MAX_PAYLOAD_NESTING:
        raise ModelError("literal payload is nested too deeply")
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        out = float(value)
        if not math.isfinite(out):
            raise ModelError("literal numbers must be finite")
        return out
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return [normalize_value(v, _depth + 1) for v in value]
    if isinstance(value, dict):
        for key in value:
            if not isinstance(key, str):
                raise ModelError("literal object keys must be strings")
        return {k: normalize_value(v, _depth + 1) for k, v in value.items()}
    raise ModelError(f"unsupported literal payload of type {type(value).__name__}")


def _is_number(value: object) -> bool:
    return isinstance(value, float) or (isinstance(value, int) and not isinstance(value, bool))


def _keyed_floats(value: object, keys: tuple[str, ...]) -> bool:
    return (isinstance(value, dict)
            and tuple(sorted(value)) == keys
            and all(_is_number(v) for v in value.values()))


def value_matches_kind(value: object, kind: DataKind) -> bool:
    """Check a normalized payload against a kind's canonical shape."""
    tag = kind.tag
    if tag in _NUMERIC_TAGS:
        return _is_number(value)
    if tag in _STRING_TAGS:
        return isinstance(value, str)
    if tag is ValueTag.BOOLEAN:
        return isinstance(value, bool)
    if tag is ValueTag.LOCATION:
        return _keyed_floats(value, _LOCATION_KEYS)
    if tag is ValueTag.BOUNDING_BOX:
        return _keyed_floats(value, _BOX_KEYS)
    if tag is ValueTag.RELATIVE_POSITION:
        return _keyed_floats(value, _OFFSET_KEYS)
    if tag is ValueTag.SEQUENCE:
        assert kind.element is not None
        return isinstance(value, list) and all(value_matches_kind(v, kind.element) for v in value)
    raise AssertionError(f"unhandled kind {kind}")


def location(lat: float, lon: float, alt: float = 0.0) -> dict:
    return {"lat": float(lat), "lon": float(lon), "alt": float(alt)}


def bounding_box(lat_min: float, lat_max: float, lon_min: float, lon_max: float) -> dict:
    return {"latMin": float(lat_min), "latMax": float(lat_max),
            "lonMin": float(lon_min), "lonMax": float(lon_max)}


def relative_position(east: float = 0.0, north: float = 0.0, up: float = 0.0) -> dict:
    return {"east": float(east), "north": float(north), "up": float(up)}


# ---------------------------------------------------------------------------
# Card descriptors
# ---------------------------------------------------------------------------

class CardClass(str, Enum):
    ACTION = "Action"
    INPUT = "Input"
    HAND = "Hand"
    DECK = "Deck"
    TOKEN = "Token"


class ActionSubclass(str, Enum):
    MOVEMENT = "Movement"
    TECH = "Tech"
    THINK = "Think"
    TRIGGER = "Trigger"


@dataclass(frozen=True)
class TokenSlotSpec:
    """A hardware token requirement on an action card.

    ``consumed`` slots admit one user per hand; shared slots admit many.
    """

    slot_name: str
    token_type: str
    consumed: bool


@dataclass(frozen=True)
class InputSlotSpec:
    name: str
    kind: DataKind
    required: bool = True


@dataclass(frozen=True)
class YieldSpec:
    name: str
    kind: DataKind


@dataclass(frozen=True)
class CardDescriptor:
    """Static definition of a card: its class, slots, tokens, yields, and end flag."""

    path: str
    card_class: CardClass
    subclass: ActionSubclass | None = None
    input_slots: tuple[InputSlotSpec, ...] = ()
    token_slots: tuple[TokenSlotSpec, ...] = ()
    yields: tuple[YieldSpec, ...] = ()
    ends: bool = False
    produces: DataKind | None = None  # Input cards only: the value kind they supply
    token_type: str | None = None     # Token cards only

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_slots", tuple(self.input_slots))
        object.__setattr__(self, "token_slots", tuple(self.token_slots))
        object.__setattr__(self, "yields", tuple(self.yields))
        is_action = self.card_class is CardClass.ACTION
        if (self.subclass is not None) != is_action:
            raise ModelError(f"{self.path}: subclass present iff class is Action")
        if not is_action and (self.token_slots or self.yields or self.ends):
            raise ModelError(f"{self.path}: only Action cards have tokens, yields, or end conditions")
        if self.card_class is CardClass.INPUT:
            if self.produces is None or self.input_slots:
                raise ModelError(f"{self.path}: Input cards supply exactly one value and take no slots")
        elif self.produces is not None:
            raise ModelError(f"{self.path}: only Input cards declare a produced value")
        if (self.token_type is not None) != (self.card_class is CardClass.TOKEN):
            raise ModelError(f"{self.path}: token_type present iff class is Token")
        names = [s.name for s in self.input_slots]
        if len(names) != len(set(names)):
            raise ModelError(f"{self.path}: duplicate input slot names")
        slots = [s.slot_name for s in self.token_slots]
        if len(slots) != len(set(slots)):
            raise ModelError(f"{self.path}: duplicate token slot names")
        ynames = [y.name for y in self.yields]
        if len(ynames) != len(set(ynames)):
            raise ModelError(f"{self.path}: duplicate yield names")

    @property
    def name(self) -> str:
        return self.path.rsplit("/", 1)[-1]

    def input_slot(self, name: str) -> InputSlotSpec | None:
        for slot in self.input_slots:
            if slot.name == name:
                return slot
        return None

    def yield_spec(self, name: str) -> YieldSpec | None:
        for spec in self.yields:
            if spec.name == name:
                return spec
        return None


# ---------------------------------------------------------------------------
# Deck structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    """A literal input value; payload is normalized to the canonical JSON shape."""

    value: object

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", normalize_value(self.value))


@dataclass(frozen=True)
class YieldRef:
    """Reference to a yield produced in an earlier hand.

    ``index`` optionally picks one element out of a sequence yield; it is
    encoded as a ``name[i]`` suffix in the JSON form.
    """

    hand: int
    card: str
    name: str
    index: int | None = None

    def encoded_name(self) -> str:
        return self.name if self.index is None else f"{self.name}[{self.index}]"


Source = Union[Literal, YieldRef]


@dataclass(frozen=True)
class InputBinding:
    slot: str
    source: Source


@dataclass(frozen=True)
class CardInstance:
    """A played action card: descriptor reference plus input and token bindings."""

    instance_id: str
    descriptor_path: str
    input_bindings: tuple[InputBinding, ...] = ()
    token_bindings: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # Bindings are a slot-keyed map; keep them in canonical (sorted) order.
        object.__setattr__(self, "input_bindings",
                           tuple(sorted(self.input_bindings, key=lambda b: b.slot)))
        object.__setattr__(self, "token_bindings", dict(self.token_bindings))
        slots = [b.slot for b in self.input_bindings]
        if len(slots) != len(set(slots)):
            raise ModelError(f"card {self.instance_id}: duplicate input bindings")

    def binding(self, slot: str) -> Source | None:
        for b in self.input_bindings:
            if b.slot == slot:
                return b.source
        return None


@dataclass(frozen=True)
class CondLeaf:
    card: str


@dataclass(frozen=True)
class CondAnd:
    children: tuple["Cond", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class CondOr:
    children: tuple["Cond", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class CondNot:
    child: "Cond"


Cond = Union[CondLeaf, CondAnd, CondOr, CondNot]


def cond_leaves(cond: Cond, under_not: bool = False) -> Iterable[tuple[CondLeaf, bool]]:
    """Yield every leaf with a flag telling whether it sits under a Not."""
    if isinstance(cond, CondLeaf):
        yield cond, under_not
    elif isinstance(cond, (CondAnd, CondOr)):
        for child in cond.children:
            yield from cond_leaves(child, under_not)
    else:
        yield from cond_leaves(cond.child, True)


def eval_cond(cond: Cond, satisfied: set[str] | frozenset[str]) -> bool:
    """Evaluate a condition tree over the set of currently satisfied card ids.

    ``Not`` holds while its child does not; an empty ``And`` is vacuously true
    and an empty ``Or`` is false.
    """
    if isinstance(cond, CondLeaf):
        return cond.card in satisfied
    if isinstance(cond, CondAnd):
        return all(eval_cond(c, satisfied) for c in cond.children)
    if isinstance(cond, CondOr):
        return any(eval_cond(c, satisfied) for c in cond.children)
    return not eval_cond(cond.child, satisfied)


@dataclass(frozen=True)
class BranchSpec:
    """Routes control to ``target`` when ``condition`` holds.

    ``target`` is a hand index strictly greater than the owning hand's; a
    target equal to ``len(deck.hands)`` is the exit sentinel, ending the
    current deck pass immediately.
    """

    condition: Cond
    target: int


class SatisfactionRule(str, Enum):
    ALL = "all"
    ANY = "any"


@dataclass(frozen=True)
class Hand:
    """One program step: concurrently executed cards plus transition rules."""

    hand_index: int
    cards: tuple[CardInstance, ...]
    rule: SatisfactionRule = SatisfactionRule.ALL
    branches: tuple[BranchSpec, ...] = ()
    repeat_count: int = 0  # extra executions beyond the first

    def __post_init__(self) -> None:
        object.__setattr__(self, "cards", tuple(self.cards))
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.repeat_count < 0:
            raise ModelError(f"hand {self.hand_index}: repeat_count must be non-negative")
        ids = [c.instance_id for c in self.cards]
        if len(ids) != len(set(ids)):
            raise ModelError(f"hand {self.hand_index}: duplicate card instance ids")

    def card(self, instance_id: str) -> CardInstance | None:
        for c in self.cards:
            if c.instance_id == instance_id:
                return c
        return None


@dataclass(frozen=True)
class TokenDecl:
    token_id: str
    token_type: str


@dataclass(frozen=True)
class Deck:
    """A full program: declared hardware tokens plus an ordered list of hands."""

    deck_id: str
    declared_tokens: tuple[TokenDecl, ...]
    hands: tuple[Hand, ...]
    repeat_deck: bool = False
    implicit_land: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "declared_tokens", tuple(self.declared_tokens))
        object.__setattr__(self, "hands", tuple(self.hands))
        if not self.hands:
            raise ModelError("deck must contain at least one hand")
        for i, hand in enumerate(self.hands):
            if hand.hand_index != i:
                raise ModelError(f"hand at position {i} carries index {hand.hand_index}")
        token_ids = [t.token_id for t in self.declared_tokens]
        if len(token_ids) != len(set(token_ids)):
            raise ModelError("duplicate declared token ids")
        seen: dict[str, int] = {}
        for hand in self.hands:
            for card in hand.cards:
                if card.instance_id in seen:
                    raise ModelError(
                        f"instance id {card.instance_id!r} appears in both "
                        f"hands[{seen[card.instance_id]}] and hands[{hand.hand_index}]")
                seen[card.instance_id] = hand.hand_index

    def token_type_of(self, token_id: str) -> str | None:
        for decl in self.declared_tokens:
            if decl.token_id == token_id:
                return decl.token_type
        return None

    def find_card(self, instance_id: str) -> tuple[Hand, CardInstance] | None:
        for hand in self.hands:
            card = hand.card(instance_id)
            if card is not None:
                return hand, card
        return None


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

class DescriptorNotFound(LookupError):
    def __init__(self, path: str):
        super().__init__(f"no card descriptor at {path!r}")
        self.path = path


class Catalog:
    """An immutable set of card descriptors plus executable action behaviors."""

    def __init__(self, descriptors: Iterable[CardDescriptor], behaviors: dict | None = None):
        self._descriptors: dict[str, CardDescriptor] = {}
        for desc in descriptors:
            if desc.path in self._descriptors:
                raise ModelError(f"duplicate descriptor path {desc.path}")
            self._descriptors[desc.path] = desc
        self._by_name: dict[str, str | None] = {}
        for path, desc in self._descriptors.items():
            # A name shadowed by two paths becomes unusable for name lookup.
            self._by_name[desc.name] = None if desc.name in self._by_name else path
        self._behaviors = dict(behaviors or {})
        for path in self._behaviors:
            desc = self._descriptors.get(path)
            if desc is None or desc.card_class is not CardClass.ACTION:
                raise ModelError(f"behavior registered for non-action path {path}")

    def lookup(self, path: str) -> CardDescriptor:
        try:
            return self._descriptors[path]
        except KeyError:
            raise DescriptorNotFound(path) from None

    def get(self, path: str) -> CardDescriptor | None:
        return self._descriptors.get(path)

    def by_name(self, name: str) -> CardDescriptor | None:
        path = self._by_name.get(name)
        return self._descriptors[path] if path else None

    def descriptors(self) -> list[CardDescriptor]:
        return sorted(self._descriptors.values(), key=lambda d: d.path)

    def actions(self) -> list[CardDescriptor]:
        return [d for d in self.descriptors() if d.card_class is CardClass.ACTION]

    def behavior(self, path: str):
        desc = self.lookup(path)
        if desc.card_class is not CardClass.ACTION:
            raise NotAnAction(path)
        return self._behaviors.get(path)

    def extended(self, descriptors: Iterable[CardDescriptor]) -> "Catalog":
        return Catalog(list(self._descriptors.values()) + list(descriptors), self._behaviors)


class NotAnAction(TypeError):
    def __init__(self, path: str):
        super().__init__(f"{path} is not an Action card")
        self.path = path


def lookup_descriptor(catalog: Catalog, path: str) -> CardDescriptor:
    """Resolve a descriptor path, raising DescriptorNotFound for unknown paths."""
    return catalog.lookup(path)
