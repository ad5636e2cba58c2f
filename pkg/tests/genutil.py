"""Seeded random deck generation and trace-checking oracles for the tests."""
from __future__ import annotations

import math
import random

from cardkit.model import (
    BranchSpec,
    CardInstance,
    Catalog,
    Cond,
    CondAnd,
    CondLeaf,
    CondNot,
    CondOr,
    DataKind,
    Deck,
    Hand,
    InputBinding,
    Literal,
    SatisfactionRule,
    TokenDecl,
    ValueTag,
    YieldRef,
    eval_cond,
)
from cardkit.runtime import (
    BRANCH_TAKEN,
    CARD_SATISFIED,
    CARD_STARTED,
    CARD_TERMINATED,
    DECK_ENDED,
    DECK_STARTED,
    HAND_ENDED,
    HAND_STARTED,
    ExecutionEvent,
)

STANDARD_TOKEN_TYPES = ("movement", "camera", "gimbal", "claw", "speaker",
                        "gas-sensor", "humidity-sensor", "button")

_WORDS = ("alpha", "bravo", "cedar", "delta", "ember", "flint", "gale", "harbor")


def random_value(rng: random.Random, kind: DataKind) -> object:
    tag = kind.tag
    if tag is ValueTag.LOCATION:
        return {"lat": round(37.0 + rng.uniform(-0.005, 0.005), 6),
                "lon": round(-122.0 + rng.uniform(-0.005, 0.005), 6),
                "alt": round(rng.uniform(0.0, 40.0), 2)}
    if tag is ValueTag.BOUNDING_BOX:
        lats = sorted(round(37.0 + rng.uniform(-0.005, 0.005), 6) for _ in range(2))
        lons = sorted(round(-122.0 + rng.uniform(-0.005, 0.005), 6) for _ in range(2))
        return {"latMin": lats[0], "latMax": lats[1], "lonMin": lons[0], "lonMax": lons[1]}
    if tag is ValueTag.RELATIVE_POSITION:
        return {"east": round(rng.uniform(-20, 20), 2),
                "north": round(rng.uniform(-20, 20), 2),
                "up": round(rng.uniform(0, 10), 2)}
    if tag is ValueTag.BOOLEAN:
        return rng.random() < 0.5
    if tag in (ValueTag.IMAGE, ValueTag.AUDIO, ValueTag.TEXT):
        return rng.choice(_WORDS)
    if tag is ValueTag.SEQUENCE:
        return [random_value(rng, kind.element) for _ in range(rng.randint(0, 3))]
    return round(rng.uniform(0.0, 20.0), 3)  # numeric kinds


def _random_cond(rng: random.Random, end_ids: list[str], all_ids: list[str],
                 depth: int = 0) -> Cond:
    roll = rng.random()
    if depth >= 2 or roll < 0.5:
        return CondLeaf(rng.choice(end_ids))
    if roll < 0.65:
        return CondNot(CondLeaf(rng.choice(all_ids)))
    children = tuple(_random_cond(rng, end_ids, all_ids, depth + 1)
                     for _ in range(rng.randint(1, 3)))
    return CondAnd(children) if roll < 0.85 else CondOr(children)


def random_valid_deck(rng: random.Random, catalog: Catalog) -> Deck:
    """A deck that passes validation: non-conflicting tokens, bound inputs,
    forward branches whose conditions sit on cards with end conditions."""
    actions = catalog.actions()
    ending = [d for d in actions if d.ends]
    tokens = tuple(TokenDecl(t, t) for t in STANDARD_TOKEN_TYPES)

    hand_count = rng.randint(1, 4)
    hands = []
    counter = 0
    produced: list[tuple[int, str, str, DataKind]] = []  # hand, card, yield, kind

    for hand_index in range(hand_count):
        used_consumed: set[str] = set()
        cards = []
        descriptors = []
        want = rng.randint(1, 3)
        pool = list(actions)
        rng.shuffle(pool)
        forced_end = hand_index < hand_count - 1
        ordered = ([d for d in pool if d.ends] + [d for d in pool if not d.ends]
                   ) if forced_end else pool
        for descriptor in ordered:
            if len(descriptors) == want:
                break
            consumed = {s.token_type for s in descriptor.token_slots if s.consumed}
            if consumed & used_consumed:
                continue
            if forced_end and not descriptors and not descriptor.ends:
                continue
            used_consumed |= consumed
            descriptors.append(descriptor)

        for descriptor in descriptors:
            counter += 1
            instance_id = f"c{counter}"
            bindings = []
            for slot in descriptor.input_slots:
                if not slot.required and rng.random() < 0.6:
                    continue
                source = None
                if rng.random() < 0.3:
                    options = [(h, c, n) for h, c, n, k in produced
                               if h < hand_index and k == slot.kind]
                    indexed = [(h, c, n) for h, c, n, k in produced
                               if h < hand_index and k.tag is ValueTag.SEQUENCE
                               and k.element == slot.kind]
                    if options and (not indexed or rng.random() < 0.5):
                        h, c, n = rng.choice(options)
                        source = YieldRef(h, c, n)
                    elif indexed:
                        h, c, n = rng.choice(indexed)
                        source = YieldRef(h, c, n, index=rng.randint(0, 2))
                if source is None:
                    source = Literal(random_value(rng, slot.kind))
                bindings.append(InputBinding(slot.name, source))
            cards.append(CardInstance(
                instance_id=instance_id,
                descriptor_path=descriptor.path,
                input_bindings=tuple(bindings),
                token_bindings={s.slot_name: s.token_type for s in descriptor.token_slots},
            ))
            for yspec in descriptor.yields:
                produced.append((hand_index, instance_id, yspec.name, yspec.kind))

        end_ids = [c.instance_id for c, d in zip(cards, descriptors) if d.ends]
        all_ids = [c.instance_id for c in cards]
        branches = []
        if end_ids and rng.random() < 0.4:
            for _ in range(rng.randint(1, 2)):
                target = rng.randint(hand_index + 1, hand_count)
                branches.append(BranchSpec(_random_cond(rng, end_ids, all_ids), target))
        hands.append(Hand(
            hand_index=hand_index,
            cards=tuple(cards),
            rule=SatisfactionRule.ANY if rng.random() < 0.3 else SatisfactionRule.ALL,
            branches=tuple(branches),
            repeat_count=rng.choice((0, 0, 0, 1, 2)),
        ))

    return Deck(
        deck_id=f"gen-{rng.randrange(1 << 30):08x}",
        declared_tokens=tokens,
        hands=tuple(hands),
        repeat_deck=rng.random() < 0.2,
        implicit_land=rng.random() < 0.9,
    )


# ---------------------------------------------------------------------------
# Trace oracles
# ---------------------------------------------------------------------------

def check_trace_shape(trace: list[ExecutionEvent]) -> None:
    assert trace[0].kind == DECK_STARTED
    assert trace[-1].kind == DECK_ENDED
    assert sum(1 for e in trace if e.kind == DECK_ENDED) == 1
    for prev, cur in zip(trace, trace[1:]):
        assert cur.seq == prev.seq + 1
        assert cur.t >= prev.t


def check_hand_barrier(trace: list[ExecutionEvent]) -> None:
    """No card of a later hand starts before the previous hand ended."""
    open_hand = False
    for event in trace:
        if event.kind == HAND_STARTED:
            assert not open_hand, "hand started while another hand was open"
            open_hand = True
        elif event.kind == HAND_ENDED:
            assert open_hand
            open_hand = False
        elif event.kind == CARD_STARTED:
            assert open_hand, "card started outside any hand"


def check_token_serialization(trace: list[ExecutionEvent], deck: Deck,
                              catalog: Catalog) -> None:
    """Cards bound to the same consumed token never run concurrently."""
    consumed_by_card: dict[str, set[str]] = {}
    for hand in deck.hands:
        for card in hand.cards:
            descriptor = catalog.lookup(card.descriptor_path)
            consumed_by_card[card.instance_id] = {
                card.token_bindings[s.slot_name]
                for s in descriptor.token_slots if s.consumed
            }
    active: dict[str, str] = {}  # token -> card holding it
    for event in trace:
        if event.kind == CARD_STARTED:
            for token in consumed_by_card.get(event.data["card"], ()):
                assert token not in active, (
                    f"{event.data['card']} started while {active[token]} held {token}")
                active[token] = event.data["card"]
        elif event.kind in (CARD_SATISFIED, CARD_TERMINATED):
            for token, holder in list(active.items()):
                if holder == event.data["card"]:
                    del active[token]


def check_branch_precedence(trace: list[ExecutionEvent], deck: Deck) -> None:
    """Every BranchTaken matches the first branch whose condition held."""
    satisfied: set[str] = set()
    current_hand: Hand | None = None
    for event in trace:
        if event.kind == HAND_STARTED:
            current_hand = deck.hands[event.data["hand"]]
            satisfied = set()
        elif event.kind == CARD_SATISFIED:
            satisfied.add(event.data["card"])
        elif event.kind == BRANCH_TAKEN:
            assert current_hand is not None
            fired = [b for b in current_hand.branches if eval_cond(b.condition, satisfied)]
            assert fired, "branch taken but no condition holds"
            assert fired[0].target == event.data["target"], (
                "a lower-indexed branch should have won the tie")


def enu_distance(frame, a: dict, b: dict) -> float:
    ea, na, _ = frame.to_enu(a)
    eb, nb, _ = frame.to_enu(b)
    return math.hypot(ea - eb, na - nb)
