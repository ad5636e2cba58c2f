"""Static deck validation against a catalog.

A deck with zero error-severity diagnostics is executable. Output is
deterministic: identical decks produce byte-identical diagnostic lists.

Beyond the core rule set, three structural codes close gaps a catalog-free
deserializer cannot check (unknown descriptor paths, non-action cards played
in hands, binding/slot coverage), and two branch-condition codes reject
conditions that reference missing cards or can never fire.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

from .model import (
    CardClass,
    Catalog,
    Deck,
    Hand,
    Literal,
    SatisfactionRule,
    YieldRef,
    cond_leaves,
    eval_cond,
    value_matches_kind,
)

E_UNKNOWN_CARD = "E_UNKNOWN_CARD"
E_NOT_AN_ACTION = "E_NOT_AN_ACTION"
E_TOKEN_CONFLICT = "E_TOKEN_CONFLICT"
E_TOKEN_UNDECLARED = "E_TOKEN_UNDECLARED"
E_TOKEN_BINDING = "E_TOKEN_BINDING"
E_INPUT_MISSING = "E_INPUT_MISSING"
E_INPUT_UNKNOWN_SLOT = "E_INPUT_UNKNOWN_SLOT"
E_INPUT_TYPE_MISMATCH = "E_INPUT_TYPE_MISMATCH"
E_YIELD_REF_FORWARD = "E_YIELD_REF_FORWARD"
E_YIELD_REF_UNKNOWN = "E_YIELD_REF_UNKNOWN"
E_BRANCH_TARGET_UNKNOWN = "E_BRANCH_TARGET_UNKNOWN"
E_BRANCH_BACKWARD = "E_BRANCH_BACKWARD"
E_BRANCH_CONDITION_UNKNOWN = "E_BRANCH_CONDITION_UNKNOWN"
E_BRANCH_CONDITION_UNSATISFIABLE = "E_BRANCH_CONDITION_UNSATISFIABLE"
E_NO_END_CONDITION = "E_NO_END_CONDITION"
E_EMPTY_HAND = "E_EMPTY_HAND"
W_UNREACHABLE_HAND = "W_UNREACHABLE_HAND"
W_DEAD_YIELD = "W_DEAD_YIELD"

# Hands with more satisfiable end conditions than this are assumed to allow
# fallthrough rather than searched exhaustively.
_SEARCH_CAP = 10


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: Severity
    hand: int
    card: str | None = None
    slot: str | None = None
    message: str = ""

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity.value,
            "path": {"hand": self.hand, "card": self.card, "slot": self.slot},
            "message": self.message,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=True)


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


def diagnostics_to_jsonl(diagnostics: list[Diagnostic]) -> str:
    if not diagnostics:
        return ""
    return "\n".join(d.to_json_line() for d in diagnostics) + "\n"


def _sort_key(d: Diagnostic):
    return (d.hand, d.card or "", d.code, d.slot or "", d.message)


def validate_deck(deck: Deck, catalog: Catalog) -> list[Diagnostic]:
    """Run every static check; returns the full diagnostic list in stable order."""
    out: list[Diagnostic] = []
    err = lambda code, hand, card=None, slot=None, message="": out.append(
        Diagnostic(code, Severity.ERROR, hand, card, slot, message))
    warn = lambda code, hand, card=None, slot=None, message="": out.append(
        Diagnostic(code, Severity.WARNING, hand, card, slot, message))

    declared = {t.token_id: t.token_type for t in deck.declared_tokens}
    last = len(deck.hands) - 1

    for hand in deck.hands:
        known_ends: dict[str, bool] = {}
        hand_has_unknown = False

        if not hand.cards:
            err(E_EMPTY_HAND, hand.hand_index,
                message=f"hand {hand.hand_index} plays no action cards")

        # Per-card checks: descriptor resolution, inputs, token bindings.
        for card in hand.cards:
            descriptor = catalog.get(card.descriptor_path)
            if descriptor is None:
                hand_has_unknown = True
                err(E_UNKNOWN_CARD, hand.hand_index, card.instance_id,
                    message=f"no card descriptor at {card.descriptor_path!r}")
                continue
            if descriptor.card_class is not CardClass.ACTION:
                hand_has_unknown = True
                err(E_NOT_AN_ACTION, hand.hand_index, card.instance_id,
                    message=f"{card.descriptor_path} is a {descriptor.card_class.value} card; "
                            "hands hold action cards only")
                continue
            known_ends[card.instance_id] = descriptor.ends

            for slot in descriptor.input_slots:
                if slot.required and card.binding(slot.name) is None:
                    err(E_INPUT_MISSING, hand.hand_index, card.instance_id, slot.name,
                        message=f"required input {slot.name!r} ({slot.kind}) is unbound")
            for binding in card.input_bindings:
                slot = descriptor.input_slot(binding.slot)
                if slot is None:
                    err(E_INPUT_UNKNOWN_SLOT, hand.hand_index, card.instance_id, binding.slot,
                        message=f"{descriptor.path} has no input slot {binding.slot!r}")
                    continue
                source = binding.source
                if isinstance(source, Literal):
                    if not value_matches_kind(source.value, slot.kind):
                        err(E_INPUT_TYPE_MISMATCH, hand.hand_index, card.instance_id, binding.slot,
                            message=f"literal does not have kind {slot.kind}")
                    continue
                assert isinstance(source, YieldRef)
                if source.hand >= hand.hand_index:
                    err(E_YIELD_REF_FORWARD, hand.hand_index, card.instance_id, binding.slot,
                        message=f"yield reference into hand {source.hand} is not upstream "
                                f"of hand {hand.hand_index}")
                    continue
                if source.hand < 0:
                    err(E_YIELD_REF_UNKNOWN, hand.hand_index, card.instance_id, binding.slot,
                        message=f"no hand {source.hand}")
                    continue
                producer = deck.hands[source.hand].card(source.card)
                producer_desc = catalog.get(producer.descriptor_path) if producer else None
                yspec = producer_desc.yield_spec(source.name) if producer_desc else None
                if yspec is None:
                    err(E_YIELD_REF_UNKNOWN, hand.hand_index, card.instance_id, binding.slot,
                        message=f"hand {source.hand} has no card {source.card!r} "
                                f"yielding {source.name!r}")
                    continue
                kind = yspec.kind
                if source.index is not None:
                    if kind.element is None:
                        err(E_INPUT_TYPE_MISMATCH, hand.hand_index, card.instance_id, binding.slot,
                            message=f"{source.name} has kind {kind}; it cannot be indexed")
                        continue
                    kind = kind.element
                if kind != slot.kind:
                    err(E_INPUT_TYPE_MISMATCH, hand.hand_index, card.instance_id, binding.slot,
                        message=f"yield kind {kind} does not match slot kind {slot.kind}")

            expected_slots = {s.slot_name for s in descriptor.token_slots}
            bound_slots = set(card.token_bindings)
            if expected_slots != bound_slots:
                missing = ", ".join(sorted(expected_slots - bound_slots)) or "-"
                extra = ", ".join(sorted(bound_slots - expected_slots)) or "-"
                err(E_TOKEN_BINDING, hand.hand_index, card.instance_id,
                    message=f"token bindings must exactly cover the card's token slots "
                            f"(missing: {missing}; extra: {extra})")
            for spec in descriptor.token_slots:
                token_id = card.token_bindings.get(spec.slot_name)
                if token_id is None:
                    continue
                declared_type = declared.get(token_id)
                if declared_type is None:
                    err(E_TOKEN_UNDECLARED, hand.hand_index, card.instance_id, spec.slot_name,
                        message=f"token {token_id!r} is not declared by the deck")
                elif declared_type != spec.token_type:
                    err(E_TOKEN_UNDECLARED, hand.hand_index, card.instance_id, spec.slot_name,
                        message=f"token {token_id!r} has type {declared_type!r}, "
                                f"slot needs {spec.token_type!r}")

        # One card per consumed token per hand.
        consumers: dict[str, list[str]] = {}
        for card in hand.cards:
            descriptor = catalog.get(card.descriptor_path)
            if descriptor is None or descriptor.card_class is not CardClass.ACTION:
                continue
            for spec in descriptor.token_slots:
                token_id = card.token_bindings.get(spec.slot_name)
                if spec.consumed and token_id is not None and token_id in declared:
                    consumers.setdefault(token_id, []).append(card.instance_id)
        for token_id in sorted(consumers):
            users = consumers[token_id]
            if len(users) > 1:
                err(E_TOKEN_CONFLICT, hand.hand_index, users[1],
                    message=f"token {token_id!r} is consumed by {len(users)} cards in "
                            f"hand {hand.hand_index}: {', '.join(users)}")

        if (hand.hand_index != last and hand.cards and not hand_has_unknown
                and not any(known_ends.values())):
            err(E_NO_END_CONDITION, hand.hand_index,
                message=f"hand {hand.hand_index} is not the final hand and no card in it "
                        "has an end condition")

        # Branch structure and conditions.
        for b_index, spec in enumerate(hand.branches):
            if spec.target <= hand.hand_index:
                err(E_BRANCH_BACKWARD, hand.hand_index, slot=f"branches[{b_index}]",
                    message=f"branch target {spec.target} is not forward of "
                            f"hand {hand.hand_index}")
            elif spec.target > len(deck.hands):
                err(E_BRANCH_TARGET_UNKNOWN, hand.hand_index, slot=f"branches[{b_index}]",
                    message=f"branch target {spec.target} is out of range "
                            f"(deck has {len(deck.hands)} hands)")
            for leaf, under_not in cond_leaves(spec.condition):
                if leaf.card not in {c.instance_id for c in hand.cards}:
                    err(E_BRANCH_CONDITION_UNKNOWN, hand.hand_index, leaf.card,
                        slot=f"branches[{b_index}]",
                        message=f"condition references {leaf.card!r}, which is not in "
                                f"hand {hand.hand_index}")
                elif not under_not and known_ends.get(leaf.card) is False:
                    err(E_BRANCH_CONDITION_UNSATISFIABLE, hand.hand_index, leaf.card,
                        slot=f"branches[{b_index}]",
                        message=f"{leaf.card!r} has no end condition, so this branch "
                                "can never fire")

    reachable = reachability_map(deck, catalog)
    for index, ok in sorted(reachable.items()):
        if not ok:
            warn(W_UNREACHABLE_HAND, index,
                 message=f"hand {index} cannot be reached from hand 0")

    referenced = {
        (s.hand, s.card, s.name)
        for hand in deck.hands for card in hand.cards for b in card.input_bindings
        if isinstance((s := b.source), YieldRef)
    }
    for hand in deck.hands:
        for card in hand.cards:
            descriptor = catalog.get(card.descriptor_path)
            if descriptor is None:
                continue
            for yspec in descriptor.yields:
                if (hand.hand_index, card.instance_id, yspec.name) not in referenced:
                    warn(W_DEAD_YIELD, hand.hand_index, card.instance_id, yspec.name,
                         message=f"yield {yspec.name!r} is produced but never consumed")

    out.sort(key=_sort_key)
    return out


# ---------------------------------------------------------------------------
# Reachability
# ---------------------------------------------------------------------------

def _hand_race_sets(hand: Hand, catalog: Catalog):
    """Satisfiable end-condition ids for a hand; leaves on other cards never hold."""
    ends = []
    for card in hand.cards:
        descriptor = catalog.get(card.descriptor_path)
        if descriptor is not None and descriptor.ends:
            ends.append(card.instance_id)
    return ends


def _rule_met(hand: Hand, ends: list[str], satisfied: frozenset[str]) -> bool:
    present = [e for e in ends if e in satisfied]
    if hand.rule is SatisfactionRule.ALL:
        return bool(ends) and len(present) == len(ends)
    return bool(present)


def _fallthrough_possible(hand: Hand, ends: list[str]) -> bool:
    """Can this hand ever end via its satisfaction rule with no branch firing?

    Explores every monotone satisfaction history (cards may satisfy in any
    order, including simultaneously); a state where some branch condition
    holds ends the hand by branching and is a dead end.
    """
    if not hand.branches:
        return True
    if len(ends) > _SEARCH_CAP:
        return True
    start: frozenset[str] = frozenset()
    seen = {start}
    stack = [start]
    while stack:
        state = stack.pop()
        if any(eval_cond(b.condition, state) for b in hand.branches):
            continue
        if _rule_met(hand, ends, state):
            return True
        remaining = [e for e in ends if e not in state]
        for size in range(1, len(remaining) + 1):
            for extra in combinations(remaining, size):
                nxt = state | frozenset(extra)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return False


def _branch_satisfiable(hand: Hand, ends: list[str], spec) -> bool:
    if len(ends) > _SEARCH_CAP:
        return True
    ids = list(ends)
    for size in range(len(ids) + 1):
        for subset in combinations(ids, size):
            if eval_cond(spec.condition, frozenset(subset)):
                return True
    return False


def reachability_map(deck: Deck, catalog: Catalog) -> dict[int, bool]:
    """Which hands can be reached from hand 0 via fallthrough or branch edges."""
    edges: dict[int, set[int]] = {i: set() for i in range(len(deck.hands))}
    for hand in deck.hands:
        ends = _hand_race_sets(hand, catalog)
        for spec in hand.branches:
            if hand.hand_index < spec.target < len(deck.hands) and _branch_satisfiable(hand, ends, spec):
                edges[hand.hand_index].add(spec.target)
        nxt = hand.hand_index + 1
        if nxt < len(deck.hands) and _fallthrough_possible(hand, ends):
            edges[hand.hand_index].add(nxt)

    reachable = {i: False for i in range(len(deck.hands))}
    stack = [0]
    while stack:
        index = stack.pop()
        if reachable[index]:
            continue
        reachable[index] = True
        stack.extend(sorted(edges[index] - {i for i, r in reachable.items() if r}))
    return reachable
