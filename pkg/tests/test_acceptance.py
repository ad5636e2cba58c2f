"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
report; every tolerance is fixed here, not configurable.
"""
import itertools
import random
import time


from cardkit.model import CardClass
from cardkit.notation import parse_notation, print_notation
from cardkit.runtime import (
    BRANCH_TAKEN,
    CARD_SATISFIED,
    CARD_STARTED,
    CARD_TERMINATED,
    DECK_ENDED,
    EMERGENCY_STOP,
    HAND_STARTED,
    IMPLICIT_LAND,
    Execution,
    ExecutionOptions,
    trace_to_jsonl,
)
from cardkit.serialization import deserialize_deck, serialize_deck
from cardkit.simworld import Frame, SimClock, SimWorld
from cardkit.validator import E_TOKEN_CONFLICT, Severity, validate_deck
from cardkit import missions

from genutil import enu_distance, random_valid_deck

TICK = 0.1

CORPUS = (missions.PACKAGE_DELIVERY, missions.SKI_COVERAGE, missions.GAS_SURVEY,
          missions.PHOTO_FLIGHT, missions.SWEEP_PHOTOS, missions.HUMIDITY_WATCH)


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert ok, f"{name} failed{suffix}"


def _run(catalog, mission, variant="default", **options):
    deck = mission.deck(catalog)
    world = SimWorld(mission.world(variant))
    execution = Execution(deck, catalog, world.tokens_for_deck(deck), SimClock(world),
                          options=ExecutionOptions(**options))
    execution.run_to_completion()
    return deck, world, execution


def test_corpus_validates_clean(catalog):
    started = time.monotonic()
    failures = []
    for mission in CORPUS:
        deck = mission.deck(catalog)
        errors = [d for d in validate_deck(deck, catalog) if d.severity is Severity.ERROR]
        if errors:
            failures.append((mission.name, errors))
    elapsed = time.monotonic() - started
    _report("corpus-validation", not failures and elapsed < 1.0,
            f"{len(CORPUS)} decks in {elapsed:.3f}s")


def test_token_conflict_oracle(catalog):
    started = time.monotonic()

    conflict_deck = parse_notation(
        "Hand 1: FlyTo <- Location [0,0,10] ; Circle <- (Location [0,0,10] + Distance [15])\n"
        "Hand 2: Land", catalog)
    conflicts = [d for d in validate_deck(conflict_deck, catalog)
                 if d.code == E_TOKEN_CONFLICT]
    exactly_one = len(conflicts) == 1

    from cardkit.model import CardInstance, Deck, Hand, InputBinding, Literal, TokenDecl
    from genutil import STANDARD_TOKEN_TYPES, random_value

    rng = random.Random(5)
    tokens = tuple(TokenDecl(t, t) for t in STANDARD_TOKEN_TYPES)
    actions = catalog.actions()
    mismatches = []
    for first, second in itertools.combinations_with_replacement(actions, 2):
        cards = []
        for index, descriptor in enumerate((first, second)):
            bindings = tuple(
                InputBinding(slot.name, Literal(random_value(rng, slot.kind)))
                for slot in descriptor.input_slots if slot.required)
            cards.append(CardInstance(
                instance_id=f"p{index}", descriptor_path=descriptor.path,
                input_bindings=bindings,
                token_bindings={s.slot_name: s.token_type for s in descriptor.token_slots}))
        deck = Deck(deck_id="pair", declared_tokens=tokens,
                    hands=(Hand(hand_index=0, cards=tuple(cards)),))
        found = any(d.code == E_TOKEN_CONFLICT for d in validate_deck(deck, catalog))
        both_consume = {s.token_type for s in first.token_slots if s.consumed} & \
                       {s.token_type for s in second.token_slots if s.consumed}
        if found != bool(both_consume):
            mismatches.append((first.path, second.path))

    elapsed = time.monotonic() - started
    _report("token-conflict-oracle",
            exactly_one and not mismatches and elapsed < 5.0,
            f"{len(actions) * (len(actions) + 1) // 2} pairs in {elapsed:.3f}s")


def test_branch_race_oracle(catalog):
    started = time.monotonic()
    failures = []
    for ta, tb, tc, td in itertools.permutations((2.0, 3.0, 5.0, 10.0)):
        text = (
            f"Hand 1: SetATimer#a <- Duration [{ta}] ; SetATimer#b <- Duration [{tb}] ; "
            f"SetATimer#c <- Duration [{tc}] ; SetATimer#d <- Duration [{td}] ; "
            "{AND(A, B) ; Branch(A)} ; {OR(C, D) ; Branch(B)}\n"
            "Hand 2 Branch A: Land\n"
            "Hand 2 Branch B: ReturnHome")
        deck = parse_notation(text, catalog)
        world = SimWorld(missions.PHOTO_FLIGHT.world("default"))
        execution = Execution(deck, catalog, world.tokens_for_deck(deck), SimClock(world))
        execution.run_to_completion()
        taken = next(e for e in execution.trace if e.kind == BRANCH_TAKEN)
        t_and, t_or = max(ta, tb), min(tc, td)
        expected_target = 1 if t_and <= t_or else 2
        expected_time = min(t_and, t_or)
        if taken.data["target"] != expected_target or abs(taken.t - expected_time) > 1e-9:
            failures.append((ta, tb, tc, td, taken.data))
    elapsed = time.monotonic() - started
    _report("branch-race-oracle", not failures and elapsed < 10.0,
            f"24 orderings in {elapsed:.3f}s")


def test_package_delivery_end_to_end(catalog):
    started = time.monotonic()
    deck, world, execution = _run(catalog, missions.PACKAGE_DELIVERY,
                                  max_sim_time=600.0)
    trace = execution.trace
    elapsed = time.monotonic() - started

    order = []
    for event in trace:
        if event.kind == CARD_STARTED:
            hand, card = deck.find_card(event.data["card"])
            order.append(catalog.lookup(card.descriptor_path).name)
    expected = ["FlyTo", "Land", "WaitForButtonPush", "CloseClaw", "FlyTo",
                "HoverToAltitude", "OpenClaw", "PlayAudio", "ReturnHome"]
    skeleton_ok = order == expected and any(e.kind == IMPLICIT_LAND for e in trace)

    button = next(e for e in trace if e.kind == CARD_SATISFIED
                  and e.data["card"] == "waitforbuttonpush-1")
    button_ok = abs(button.t - 30.0) <= TICK + 1e-9

    open_claw = next(e for e in trace if e.kind == CARD_STARTED
                     and e.data["card"] == "openclaw-1")
    altitude = next(u for (t, _, _, u) in world.position_history if t == open_claw.t)
    descent_ok = abs(altitude - 1.524) <= 2.0

    completed = trace[-1].kind == DECK_ENDED and trace[-1].data["status"] == "completed"
    _report("package-delivery-end-to-end",
            skeleton_ok and button_ok and descent_ok and completed and elapsed < 5.0,
            f"drop altitude {altitude:.3f} m, wall {elapsed:.2f}s")


def test_gas_survey_branching(catalog):
    def run_once(variant):
        deck, world, execution = _run(catalog, missions.GAS_SURVEY, variant,
                                      max_sim_time=600.0)
        return deck, world, execution

    deck, world, execution = run_once("leak")
    taken = [e.data["target"] for e in execution.trace if e.kind == BRANCH_TAKEN]
    leak_branch_ok = taken[0] == 2  # alarm arm
    loop_start = next(e.t for e in execution.trace if e.kind == CARD_STARTED
                      and e.data["card"] == "playaudioloop-1")
    loop_stop = next(e.t for e in execution.trace if e.kind == CARD_TERMINATED
                     and e.data["card"] == "playaudioloop-1")
    alarm_ok = abs((loop_stop - loop_start) - 180.0) <= 0.1 + 1e-9
    landed_ok = not world.airborne and any(e.kind == IMPLICIT_LAND for e in execution.trace)

    deck, world2, clean_exec = run_once("clean")
    covered = any(e.kind == CARD_SATISFIED and e.data["card"] == "coverarea-1"
                  for e in clean_exec.trace)
    clean_taken = [e.data["target"] for e in clean_exec.trace if e.kind == BRANCH_TAKEN]
    clean_branch_ok = covered and clean_taken[0] == 1  # return-home arm

    deterministic = True
    for variant in ("leak", "clean"):
        blobs = {trace_to_jsonl(run_once(variant)[2].trace) for _ in range(5)}
        deterministic = deterministic and len(blobs) == 1

    _report("gas-survey-branching",
            leak_branch_ok and alarm_ok and landed_ok and clean_branch_ok and deterministic,
            f"alarm {(loop_stop - loop_start):.1f}s, 5x deterministic")


def test_repeat_deck_loops(catalog):
    deck, world, execution = _run(catalog, missions.SKI_COVERAGE,
                                  max_deck_repeats=3, max_sim_time=600.0)
    starts = [e for e in execution.trace
              if e.kind == HAND_STARTED and e.data["hand"] == 0]
    last_hand = len(deck.hands) - 1
    cycles = [e for e in execution.trace
              if e.kind == HAND_STARTED and e.data["hand"] == last_hand]
    ok = (len(starts) == 3 and [s.data["iteration"] for s in starts] == [0, 1, 2]
          and len(cycles) == 3
          and execution.trace[-1].data["status"] == "completed")
    _report("repeat-deck", ok, f"{len(starts)} deck passes")


def test_estop_latency_over_50_runs(catalog):
    rng = random.Random(77)
    worst = 0.0
    ok = True
    for _ in range(50):
        stop_at = round(rng.uniform(1.0, 80.0), 1)
        deck, world, execution = _run(catalog, missions.PACKAGE_DELIVERY,
                                      estop_at=stop_at, max_sim_time=600.0)
        trace = execution.trace
        stop_event = next(e for e in trace if e.kind == EMERGENCY_STOP)
        if not execution.estop_ack_times:
            ok = False
            break
        latency = max(t - stop_event.t for t in execution.estop_ack_times.values())
        worst = max(worst, latency)
        if latency > TICK + 1e-9 or trace[-1].data["status"] != "stopped" or world.airborne:
            ok = False
            break
    _report("estop-latency", ok, f"worst ack latency {worst:.3f}s over 50 runs")


def test_thousand_deck_round_trips(catalog):
    rng = random.Random(31337)
    json_failures = 0
    notation_failures = 0
    for _ in range(1000):
        deck = random_valid_deck(rng, catalog)
        text = serialize_deck(deck)
        if deserialize_deck(text) != deck or serialize_deck(deserialize_deck(text)) != text:
            json_failures += 1
        if parse_notation(print_notation(deck, catalog), catalog) != deck:
            notation_failures += 1
    _report("round-trips-1000", json_failures == 0 and notation_failures == 0,
            f"json failures {json_failures}, notation failures {notation_failures}")


def test_yield_dataflow_flies_to_first_photo(catalog):
    deck, world, execution = _run(catalog, missions.PHOTO_RETURN, max_sim_time=600.0)
    locations = next(e.data["value"] for e in execution.trace
                     if e.kind == "YieldProduced" and e.data["name"] == "locations")
    frame = Frame(missions.HOME)
    final = frame.to_location(*world.position)
    distance = enu_distance(frame, final, locations[0])
    ok = (execution.trace[-1].data["status"] == "completed"
          and distance <= world.config.arrival_tolerance)
    _report("yield-dataflow", ok, f"{distance:.2f} m from the first capture point")
