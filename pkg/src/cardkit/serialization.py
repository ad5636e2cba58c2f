"""Canonical JSON form of decks.

The wire format is strict and canonical: every field is present, keys are
emitted in lexicographic order, and all literal numbers are floats, so two
structurally equal decks always serialize to identical bytes.

Top-level shape::

    {"deckId": str,
     "tokens": [{"id": str, "type": str}, ...],
     "repeatDeck": bool,
     "implicitLand": bool,
     "hands": [{"rule": "all"|"any", "repeat": int,
                "cards": [{"id": str, "card": path,
                           "inputs": {slot: {"literal": value}
                                          | {"yield": {"hand": int, "card": str, "name": str}}},
                           "tokens": {slot: tokenId}}],
                "branches": [{"when": cond, "goto": int}]}]}

where ``cond`` is ``{"card": id} | {"and": [cond...]} | {"or": [cond...]}
| {"not": cond}``. A ``goto`` equal to the number of hands is the exit
sentinel (end the deck pass). Sequence yields may be indexed with a
``name[i]`` suffix in the yield reference's ``name``.
"""
from __future__ import annotations

import json
import re

from .model import (
    BranchSpec,
    CardInstance,
    Cond,
    CondAnd,
    CondLeaf,
    CondNot,
    CondOr,
    Deck,
    Hand,
    InputBinding,
    Literal,
    ModelError,
    SatisfactionRule,
    Source,
    TokenDecl,
    YieldRef,
    normalize_value,
)


class SchemaError(ValueError):
    """Malformed deck JSON; ``path`` points at the offending element."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _cond_to_json(cond: Cond) -> object:
    if isinstance(cond, CondLeaf):
        return {"card": cond.card}
    if isinstance(cond, CondAnd):
        return {"and": [_cond_to_json(c) for c in cond.children]}
    if isinstance(cond, CondOr):
        return {"or": [_cond_to_json(c) for c in cond.children]}
    return {"not": _cond_to_json(cond.child)}


def _source_to_json(source: Source) -> object:
    if isinstance(source, Literal):
        return {"literal": source.value}
    return {"yield": {"hand": source.hand, "card": source.card, "name": source.encoded_name()}}


def deck_to_json(deck: Deck) -> dict:
    """Plain-data form of a deck, matching the wire schema."""
    return {
        "deckId": deck.deck_id,
        "tokens": [{"id": t.token_id, "type": t.token_type} for t in deck.declared_tokens],
        "repeatDeck": deck.repeat_deck,
        "implicitLand": deck.implicit_land,
        "hands": [
            {
                "rule": hand.rule.value,
                "repeat": hand.repeat_count,
                "cards": [
                    {
                        "id": card.instance_id,
                        "card": card.descriptor_path,
                        "inputs": {b.slot: _source_to_json(b.source) for b in card.input_bindings},
                        "tokens": dict(sorted(card.token_bindings.items())),
                    }
                    for card in hand.cards
                ],
                "branches": [
                    {"when": _cond_to_json(b.condition), "goto": b.target} for b in hand.branches
                ],
            }
            for hand in deck.hands
        ],
    }


def serialize_deck(deck: Deck) -> str:
    """Serialize to the canonical byte form (sorted keys, two-space indent)."""
    return json.dumps(deck_to_json(deck), sort_keys=True, indent=2, ensure_ascii=True)


# ---------------------------------------------------------------------------
# Deserialization
# ---------------------------------------------------------------------------

_YIELD_NAME_RE = re.compile(r"^(?P<name>[^\[\]]+)(?:\[(?P<index>\d+)\])?$")

_MAX_NESTING = 64  # condition trees and literal payloads beyond this are hostile


def _require(obj: object, path: str, keys: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - keys
    if unknown:
        raise SchemaError(path, f"unknown keys: {', '.join(sorted(unknown))}")
    missing = keys - set(obj)
    if missing:
        raise SchemaError(path, f"missing keys: {', '.join(sorted(missing))}")
    return obj


def _string(obj: object, path: str) -> str:
    if not isinstance(obj, str) or not obj:
        raise SchemaError(path, "expected a non-empty string")
    return obj


def _integer(obj: object, path: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise SchemaError(path, "expected an integer")
    return obj


def _boolean(obj: object, path: str) -> bool:
    if not isinstance(obj, bool):
        raise SchemaError(path, "expected a boolean")
    return obj


def _array(obj: object, path: str) -> list:
    if not isinstance(obj, list):
        raise SchemaError(path, "expected an array")
    return obj


def _parse_cond(obj: object, path: str, depth: int = 0) -> Cond:
    if depth > _MAX_NESTING:
        raise SchemaError(path, "condition tree is nested too deeply")
    if not isinstance(obj, dict) or len(obj) != 1:
        raise SchemaError(path, "expected a single-key condition object")
    key, value = next(iter(obj.items()))
    if key == "card":
        return CondLeaf(_string(value, f"{path}.card"))
    if key in ("and", "or"):
        children = tuple(
            _parse_cond(v, f"{path}.{key}[{i}]", depth + 1)
            for i, v in enumerate(_array(value, f"{path}.{key}"))
        )
        return CondAnd(children) if key == "and" else CondOr(children)
    if key == "not":
        return CondNot(_parse_cond(value, f"{path}.not", depth + 1))
    raise SchemaError(path, f"unknown condition operator {key!r}")


def _parse_source(obj: object, path: str) -> Source:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise SchemaError(path, "expected {'literal': ...} or {'yield': ...}")
    key, value = next(iter(obj.items()))
    if key == "literal":
        try:
            return Literal(normalize_value(value))
        except ModelError as exc:
            raise SchemaError(path, str(exc)) from None
    if key == "yield":
        ref = _require(value, path, {"hand", "card", "name"})
        raw = _string(ref["name"], f"{path}.name")
        match = _YIELD_NAME_RE.match(raw)
        if match is None:
            raise SchemaError(f"{path}.name", f"malformed yield name {raw!r}")
        index = match.group("index")
        return YieldRef(
            hand=_integer(ref["hand"], f"{path}.hand"),
            card=_string(ref["card"], f"{path}.card"),
            name=match.group("name"),
            index=None if index is None else int(index),
        )
    raise SchemaError(path, f"unknown input source {key!r}")


def _parse_card(obj: object, path: str) -> CardInstance:
    data = _require(obj, path, {"id", "card", "inputs", "tokens"})
    inputs = data["inputs"]
    if not isinstance(inputs, dict):
        raise SchemaError(f"{path}.inputs", "expected an object")
    tokens = data["tokens"]
    if not isinstance(tokens, dict):
        raise SchemaError(f"{path}.tokens", "expected an object")
    bindings = tuple(
        InputBinding(slot, _parse_source(src, f"{path}.inputs.{slot}"))
        for slot, src in inputs.items()
    )
    token_bindings = {
        slot: _string(tok, f"{path}.tokens.{slot}") for slot, tok in tokens.items()
    }
    return CardInstance(
        instance_id=_string(data["id"], f"{path}.id"),
        descriptor_path=_string(data["card"], f"{path}.card"),
        input_bindings=bindings,
        token_bindings=token_bindings,
    )


def _parse_hand(obj: object, index: int, hand_count: int) -> Hand:
    path = f"hands[{index}]"
    data = _require(obj, path, {"rule", "repeat", "cards", "branches"})
    rule_text = _string(data["rule"], f"{path}.rule")
    try:
        rule = SatisfactionRule(rule_text)
    except ValueError:
        raise SchemaError(f"{path}.rule", f"expected 'all' or 'any', got {rule_text!r}") from None
    repeat = _integer(data["repeat"], f"{path}.repeat")
    if repeat < 0:
        raise SchemaError(f"{path}.repeat", "repeat must be non-negative")
    cards = tuple(
        _parse_card(c, f"{path}.cards[{i}]") for i, c in enumerate(_array(data["cards"], f"{path}.cards"))
    )
    branches = []
    for i, b in enumerate(_array(data["branches"], f"{path}.branches")):
        bpath = f"{path}.branches[{i}]"
        bdata = _require(b, bpath, {"when", "goto"})
        target = _integer(bdata["goto"], f"{bpath}.goto")
        if target <= index:
            raise SchemaError(bpath, f"branch target {target} is not forward of hand {index}")
        branches.append(BranchSpec(_parse_cond(bdata["when"], f"{bpath}.when"), target))
    return Hand(hand_index=index, cards=cards, rule=rule,
                branches=tuple(branches), repeat_count=repeat)


def deserialize_deck(text: str) -> Deck:
    """Parse deck JSON, rejecting unknown keys and structural rule violations."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    data = _require(obj, "$", {"deckId", "tokens", "repeatDeck", "implicitLand", "hands"})
    tokens = []
    for i, t in enumerate(_array(data["tokens"], "tokens")):
        tdata = _require(t, f"tokens[{i}]", {"id", "type"})
        tokens.append(TokenDecl(_string(tdata["id"], f"tokens[{i}].id"),
                                _string(tdata["type"], f"tokens[{i}].type")))
    hand_objs = _array(data["hands"], "hands")
    if not hand_objs:
        raise SchemaError("hands", "deck must contain at least one hand")
    hands = tuple(_parse_hand(h, i, len(hand_objs)) for i, h in enumerate(hand_objs))

    seen: dict[str, str] = {}
    for hand in hands:
        for pos, card in enumerate(hand.cards):
            path = f"hands[{hand.hand_index}].cards[{pos}]"
            if card.instance_id in seen:
                raise SchemaError(
                    path,
                    f"duplicate instance id {card.instance_id!r}, first used at {seen[card.instance_id]}")
            seen[card.instance_id] = path
        ids = [t.token_id for t in tokens]
        if len(ids) != len(set(ids)):
            raise SchemaError("tokens", "duplicate token ids")

    try:
        return Deck(
            deck_id=_string(data["deckId"], "deckId"),
            declared_tokens=tuple(tokens),
            hands=hands,
            repeat_deck=_boolean(data["repeatDeck"], "repeatDeck"),
            implicit_land=_boolean(data["implicitLand"], "implicitLand"),
        )
    except ModelError as exc:
        raise SchemaError("$", str(exc)) from None
