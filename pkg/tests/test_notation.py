import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardkit.model import (
    CondAnd,
    CondLeaf,
    CondNot,
    CondOr,
    Literal,
    SatisfactionRule,
    YieldRef,
)
from cardkit.notation import (
    BranchLabelUnresolved,
    NotationError,
    ParseError,
    UnknownCard,
    parse_notation,
    print_notation,
)
from cardkit.validator import E_INPUT_TYPE_MISMATCH, validate_deck
from cardkit import missions

from genutil import random_valid_deck


def test_two_hand_mission(catalog):
    deck = parse_notation(
        "Hand 1: FlyTo <- Location [pickup]\nHand 2: Land ; WaitForButtonPush",
        catalog, {"pickup": {"lat": 37.0, "lon": -122.0, "alt": 20.0}})
    assert len(deck.hands) == 2
    assert [c.descriptor_path for c in deck.hands[1].cards] == [
        "Action/Movement/Land", "Action/Trigger/WaitForButtonPush"]
    fly_to = deck.hands[0].cards[0]
    assert fly_to.binding("destination") == Literal({"lat": 37.0, "lon": -122.0, "alt": 20.0})


def test_unicode_arrow_equivalent(catalog):
    ascii_deck = parse_notation("Hand 1: SetATimer <- Duration [5 s]", catalog)
    glyph_deck = parse_notation("Hand 1: SetATimer ← Duration [5 s]", catalog)
    assert ascii_deck == glyph_deck


def test_repeat_alone_makes_empty_repeated_hand(catalog):
    deck = parse_notation("Hand 1: Repeat(3)", catalog)
    assert len(deck.hands) == 1
    assert deck.hands[0].repeat_count == 2
    assert deck.hands[0].cards == ()


def test_branch_groups_build_leaf_conditions(catalog):
    deck = parse_notation(
        "{FlyTo <- Location [0, 0, 10] ; Branch(1)} ; {DetectOnGround <- Image [cat] ; Branch(2)}",
        catalog)
    hand = deck.hands[0]
    assert len(hand.cards) == 2
    assert hand.branches[0].condition == CondLeaf(hand.cards[0].instance_id)
    assert hand.branches[1].condition == CondLeaf(hand.cards[1].instance_id)


def test_positional_condition_expressions(catalog):
    deck = parse_notation(
        "Hand 1: SetATimer#a <- Duration [2 s] ; SetATimer#b <- Duration [3 s] ; "
        "SetATimer#c <- Duration [4 s] ; SetATimer#d <- Duration [5 s] ; "
        "(AND(A, B) ; Branch(2)) ; (OR(C, NOT(D)) ; Branch(3))\n"
        "Hand 2: Land\nHand 3: ReturnHome", catalog)
    first, second = deck.hands[0].branches
    assert first.condition == CondAnd((CondLeaf("a"), CondLeaf("b")))
    assert first.target == 1
    assert second.condition == CondOr((CondLeaf("c"), CondNot(CondLeaf("d"))))
    assert second.target == 2


def test_branch_letters_resolve_to_arm_hands(catalog):
    deck = missions.GAS_SURVEY.deck(catalog)
    targets = [b.target for b in deck.hands[0].branches]
    assert targets == [1, 2]
    # arm A jumps over arm B to the shared continuation
    assert deck.hands[1].branches[-1].target == 3


def test_trailing_arm_hands_exit_the_deck(catalog):
    deck = missions.HUMIDITY_WATCH.deck(catalog)
    # arm A (Land) jumps past arm B to the deck exit sentinel
    assert deck.hands[2].branches[-1].target == len(deck.hands)
    # arm B is the final hand and falls off the end naturally
    assert deck.hands[3].branches == ()


def test_scientific_notation_numbers(catalog):
    deck = parse_notation("Hand 1: SetATimer <- Duration [1.5e1]", catalog)
    assert deck.hands[0].cards[0].binding("duration") == Literal(15.0)


def test_unit_literals_convert(catalog):
    deck = missions.PACKAGE_DELIVERY.deck(catalog)
    hover = deck.hands[4].cards[0]
    assert hover.binding("altitude") == Literal(5 * 0.3048)
    ski = missions.SKI_COVERAGE.deck(catalog)
    follow = ski.hands[1].cards[0]
    assert follow.binding("minAltitude") == Literal(300 * 0.3048)
    gas = missions.GAS_SURVEY.deck(catalog)
    timer = gas.hands[2].cards[0]
    assert timer.binding("duration") == Literal(180.0)


def test_standalone_altitude_needs_unique_target(catalog):
    with pytest.raises(ParseError, match="could stack on"):
        parse_notation("Hand 1: Hover ; Hover ; Altitude [10 m]", catalog)


def test_hoisted_action_inputs_join_the_hand(catalog):
    deck = missions.SKI_COVERAGE.deck(catalog)
    hand = deck.hands[1]
    paths = [c.descriptor_path for c in hand.cards]
    assert paths[0] == "Action/Movement/Follow"
    assert "Action/Think/TrackOnGround" in paths
    follow = hand.cards[0]
    assert follow.binding("offset") == Literal({"east": 0.0, "north": 0.0, "up": 0.0})


def test_any_card_flips_rule(catalog):
    deck = parse_notation("Hand 1: FlyTo <- Location [0,0,5] ; WaitForGas <- Threshold [0.5] ; Any",
                          catalog)
    assert deck.hands[0].rule is SatisfactionRule.ANY


def test_yield_reference_syntax(catalog):
    deck = missions.PHOTO_RETURN.deck(catalog)
    back = deck.hands[1].cards[0]
    assert back.binding("destination") == YieldRef(0, "cam", "locations", 0)


def test_unknown_card(catalog):
    with pytest.raises(UnknownCard) as err:
        parse_notation("Hand 1: FlyThrough <- Location [0,0,5]", catalog)
    assert err.value.name == "FlyThrough"


def test_duplicate_explicit_ids_rejected(catalog):
    with pytest.raises(ParseError, match="already used"):
        parse_notation("Hand 1: Land#x\nHand 2: Land#x", catalog)
    with pytest.raises(ParseError, match="declared twice"):
        parse_notation("Tokens: movement, movement\nHand 1: Land", catalog)


def test_unresolved_branch_letter(catalog):
    with pytest.raises(BranchLabelUnresolved):
        parse_notation("Hand 1: {FlyTo <- Location [0,0,5] ; Branch(Q)}", catalog)


def test_parameter_on_plain_card_rejected(catalog):
    with pytest.raises(ParseError, match="does not take a parameter"):
        parse_notation("Hand 1: FlyTo(3) <- Location [0,0,5]", catalog)


def test_symbolic_placeholder_falls_back_to_text(catalog):
    deck = parse_notation("Hand 1: FlyTo <- Location [my house]", catalog)
    assert deck.hands[0].cards[0].binding("destination") == Literal("my house")
    codes = [d.code for d in validate_deck(deck, catalog)]
    assert E_INPUT_TYPE_MISMATCH in codes


def test_binding_of_wrong_kind_rejected(catalog):
    with pytest.raises(ParseError, match="does not have kind"):
        parse_notation("Hand 1: FlyTo <- Location [spot]", catalog, {"spot": 5.0})


def test_deck_and_tokens_headers(catalog):
    deck = parse_notation(
        "Deck: patrol no-implicit-land\nTokens: m1:movement, cam:camera\n"
        "Hand 1: FlyTo <- Location [0,0,5]", catalog)
    assert deck.deck_id == "patrol"
    assert deck.implicit_land is False
    assert deck.hands[0].cards[0].token_bindings == {"movement": "m1"}


def test_print_missions_round_trip(catalog):
    for mission in missions.ALL_MISSIONS:
        deck = mission.deck(catalog)
        text = print_notation(deck, catalog)
        assert parse_notation(text, catalog) == deck


def test_print_parse_round_trip_100_random(catalog):
    rng = random.Random(99)
    for _ in range(100):
        deck = random_valid_deck(rng, catalog)
        text = print_notation(deck, catalog)
        assert parse_notation(text, catalog) == deck


@settings(max_examples=120, deadline=None)
@given(st.text(max_size=120))
def test_parser_is_total(catalog, text):
    try:
        parse_notation(text, catalog)
    except NotationError:
        pass


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10**9), st.data())
def test_parser_survives_mutations_of_valid_text(catalog, seed, data):
    """Corrupting valid notation yields a deck or a NotationError, never a crash."""
    deck = random_valid_deck(random.Random(seed), catalog)
    text = print_notation(deck, catalog)
    chars = list(text)
    for _ in range(data.draw(st.integers(min_value=1, max_value=4))):
        index = data.draw(st.integers(min_value=0, max_value=len(chars) - 1))
        action = data.draw(st.sampled_from(["delete", "dup", "swap", "replace"]))
        if action == "delete":
            chars.pop(index)
        elif action == "dup":
            chars.insert(index, chars[index])
        elif action == "swap" and index + 1 < len(chars):
            chars[index], chars[index + 1] = chars[index + 1], chars[index]
        else:
            chars[index] = data.draw(st.sampled_from(list("{}()[];,+#<-123AZ ")))
    try:
        parse_notation("".join(chars), catalog)
    except NotationError:
        pass


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_print_parse_property(catalog, seed):
    deck = random_valid_deck(random.Random(seed), catalog)
    assert parse_notation(print_notation(deck, catalog), catalog) == deck
