"""Deck execution engine.

Action cards run as cooperative tasks (Python generators) advanced once per
simulation tick by a single scheduler, which keeps execution fully
deterministic: with a fixed world, seed, and deck, two runs produce
byte-identical traces. The scheduler owns the trace and the yield store;
behaviors only touch their own context and their bound tokens. The external
stop trigger (:meth:`Execution.emergency_stop` or a ``stop_signal`` event)
may be fired from any thread at any time and is observed within one tick.
"""
from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Protocol

from .model import (
    CardInstance,
    Catalog,
    CardDescriptor,
    Deck,
    Hand,
    Literal,
    SatisfactionRule,
    YieldRef,
    eval_cond,
    normalize_value,
)

# Event kinds, in the vocabulary used by the JSON trace.
DECK_STARTED = "DeckStarted"
HAND_STARTED = "HandStarted"
CARD_STARTED = "CardStarted"
CARD_SATISFIED = "CardSatisfied"
CARD_TERMINATED = "CardTerminated"
YIELD_PRODUCED = "YieldProduced"
BRANCH_TAKEN = "BranchTaken"
HAND_ENDED = "HandEnded"
IMPLICIT_LAND = "ImplicitLand"
EMERGENCY_STOP = "EmergencyStop"
DECK_ENDED = "DeckEnded"
TELEMETRY = "Telemetry"

COMPLETED = "completed"
STOPPED = "stopped"
FAULTED = "faulted"


@dataclass(frozen=True)
class ExecutionEvent:
    """One totally ordered trace entry: (t, seq) is unique and increasing."""

    t: float
    seq: int
    kind: str
    data: dict

    def to_json(self) -> dict:
        out = {"t": self.t, "seq": self.seq, "event": self.kind}
        out.update(self.data)
        return out


def trace_to_jsonl(trace: list[ExecutionEvent]) -> str:
    import json

    return "\n".join(json.dumps(ev.to_json(), ensure_ascii=True) for ev in trace) + "\n"


class TokenFault(RuntimeError):
    """A token implementation failed; triggers the emergency-stop path."""

    def __init__(self, token_id: str, reason: str):
        super().__init__(f"token {token_id}: {reason}")
        self.token_id = token_id
        self.reason = reason


class InputResolutionFault(RuntimeError):
    """A yield reference could not be resolved at runtime."""


class InvalidDeck(ValueError):
    """Deck failed validation or token wiring preconditions."""


class EstopAck(str, Enum):
    INITIATED = "initiated"
    ALREADY_STOPPED = "already-stopped"


# ---------------------------------------------------------------------------
# Token contracts
# ---------------------------------------------------------------------------

class OpHandle:
    """Status of one token operation; polled by behaviors each tick."""

    def __init__(self) -> None:
        self.done = False
        self.failed: str | None = None


class TokenInterface(ABC):
    """Contract between action behaviors and a hardware capability.

    Implementations must apply operations at tick boundaries; every
    operation either completes, reports failure, or observes
    ``emergency_stop`` within one simulation tick. Calls on a single token
    are serialized by the runtime; implementations only need to tolerate
    concurrent calls across distinct tokens.
    """

    token_type: str

    @abstractmethod
    def emergency_stop(self, reason: str) -> None:
        """Halt and recover; must be safe to call from any thread."""


@dataclass
class PhotoResult:
    image: str
    location: dict


class MovementToken(TokenInterface):
    token_type = "movement"

    @abstractmethod
    def fly_to(self, destination: dict, min_altitude: float | None = None) -> OpHandle: ...

    @abstractmethod
    def land(self) -> OpHandle: ...

    @abstractmethod
    def hover(self) -> OpHandle: ...

    @abstractmethod
    def hover_to_altitude(self, altitude: float) -> OpHandle: ...

    @abstractmethod
    def return_home(self, min_altitude: float | None = None) -> OpHandle: ...

    @abstractmethod
    def cover_path(self, area: dict, avoid: dict | None = None,
                   min_altitude: float | None = None) -> OpHandle: ...

    @abstractmethod
    def circle(self, center: dict, radius: float,
               min_altitude: float | None = None) -> OpHandle: ...

    @abstractmethod
    def follow_target(self, offset: dict, min_altitude: float | None = None) -> OpHandle: ...

    @abstractmethod
    def current_location(self) -> dict: ...

    @abstractmethod
    def at_location(self, location: dict) -> bool:
        """True when the drone is horizontally within arrival tolerance of ``location``."""

    @abstractmethod
    def battery_fraction(self) -> float: ...

    @abstractmethod
    def forced_landing_engaged(self) -> bool:
        """True once the battery-critical safety landing has preempted motion."""

    @abstractmethod
    def grounded(self) -> bool: ...


class DetectionHandle:
    def __init__(self) -> None:
        self.done = False
        self.location: dict | None = None


class TrackHandle:
    @abstractmethod
    def position(self) -> dict | None: ...

    @abstractmethod
    def stop(self) -> None: ...


class CameraToken(TokenInterface):
    token_type = "camera"

    @abstractmethod
    def take_photo(self) -> PhotoResult: ...

    @abstractmethod
    def start_video(self) -> None: ...

    @abstractmethod
    def stop_video(self) -> str:
        """Stop recording and return the captured clip reference."""

    @abstractmethod
    def detect(self, image_ref: str) -> DetectionHandle: ...

    @abstractmethod
    def track(self, image_ref: str) -> TrackHandle: ...


class GimbalToken(TokenInterface):
    token_type = "gimbal"

    def emergency_stop(self, reason: str) -> None:  # pointing hardware just parks
        pass


class ClawToken(TokenInterface):
    token_type = "claw"

    @abstractmethod
    def open(self) -> OpHandle: ...

    @abstractmethod
    def close(self) -> OpHandle: ...


class SpeakerToken(TokenInterface):
    token_type = "speaker"

    @abstractmethod
    def play(self, audio_ref: str) -> OpHandle: ...

    @abstractmethod
    def play_loop(self, audio_ref: str) -> OpHandle: ...

    @abstractmethod
    def stop_audio(self) -> None: ...


class LevelSensorToken(TokenInterface):
    """Shared stream sensor (gas-sensor or humidity-sensor)."""

    @abstractmethod
    def read_level(self) -> float: ...


class ButtonToken(TokenInterface):
    token_type = "button"

    @abstractmethod
    def watch(self) -> OpHandle:
        """Handle completes when the button is pressed while being watched."""


class Clock(Protocol):
    """Advances simulated (or real) time by one tick when called."""

    tick_seconds: float

    def advance(self) -> None: ...


class CountingClock:
    """Pure time-keeping clock for worlds that advance themselves elsewhere."""

    def __init__(self, tick_seconds: float = 0.1):
        self.tick_seconds = tick_seconds

    def advance(self) -> None:
        pass


# ---------------------------------------------------------------------------
# Yield store and input resolution
# ---------------------------------------------------------------------------

class YieldStore:
    """Append-only map of published yields.

    Entries are written only when the producing hand ends, so a stored value
    is always readable; re-publication under deck repetition overwrites
    (latest wins).
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[int, str, str], object] = {}

    def publish(self, hand: int, card: str, name: str, value: object) -> None:
        self._entries[(hand, card, name)] = value

    def get(self, hand: int, card: str, name: str) -> object:
        return self._entries[(hand, card, name)]

    def __contains__(self, key: tuple[int, str, str]) -> bool:
        return key in self._entries

    def snapshot(self) -> dict[tuple[int, str, str], object]:
        return dict(self._entries)


def resolve_inputs(card: CardInstance, descriptor: CardDescriptor, store: YieldStore) -> dict[str, object]:
    """Resolve every bound slot to a concrete value.

    Raises InputResolutionFault when a yield reference points at a value that
    was never published or indexes past the end of a sequence; this cannot
    happen for statically validated decks unless a producing card was
    terminated before it produced.
    """
    values: dict[str, object] = {}
    for binding in card.input_bindings:
        source = binding.source
        if isinstance(source, Literal):
            values[binding.slot] = source.value
            continue
        assert isinstance(source, YieldRef)
        try:
            value = store.get(source.hand, source.card, source.name)
        except KeyError:
            raise InputResolutionFault(
                f"{card.instance_id}.{binding.slot}: yield "
                f"{source.card}.{source.name} of hand {source.hand} was never produced") from None
        if source.index is not None:
            if not isinstance(value, list) or source.index >= len(value):
                raise InputResolutionFault(
                    f"{card.instance_id}.{binding.slot}: index {source.index} out of range")
            value = value[source.index]
        values[binding.slot] = value
    return values


class BehaviorContext:
    """What a running card behavior can see: its inputs, tokens, and clock.

    ``movement_telemetry`` exposes read-only position data from the drone's
    movement token so trigger cards can sense location without seizing it.
    """

    def __init__(self, inputs: dict[str, object], tokens: dict[str, TokenInterface],
                 now: Callable[[], float], tick_seconds: float,
                 movement_telemetry: "MovementToken | None" = None):
        self.inputs = inputs
        self.tokens = tokens
        self.movement_telemetry = movement_telemetry
        self._now = now
        self.tick_seconds = tick_seconds
        self._started_at = now()
        self.yields: dict[str, object] = {}

    def now(self) -> float:
        return self._now()

    def elapsed(self) -> float:
        return round(self._now() - self._started_at, 9)

    def set_yield(self, name: str, value: object) -> None:
        self.yields[name] = normalize_value(value)


Behavior = Callable[[BehaviorContext], Iterator[None]]


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass
class ExecutionOptions:
    max_sim_time: float | None = None      # watchdog; exceeding it faults the run
    max_deck_repeats: int | None = None    # cap on full deck passes under repeatDeck
    estop_at: float | None = None          # scheduled emergency stop (testing hook)
    telemetry_every: int = 0               # emit a Telemetry event every N ticks
    shutdown_wait_cap: float = 7200.0      # sim seconds to wait for a recovery landing


class _Runner:
    __slots__ = ("card", "gen", "ctx", "running")

    def __init__(self, card: CardInstance, gen: Iterator[None], ctx: BehaviorContext):
        self.card = card
        self.gen = gen
        self.ctx = ctx
        self.running = True


class Execution:
    """A single deck run; iterate :meth:`events` to drive it to completion."""

    def __init__(self, deck: Deck, catalog: Catalog, tokens: dict[str, TokenInterface],
                 clock: Clock, stop_signal: threading.Event | None = None,
                 options: ExecutionOptions | None = None):
        missing = [t.token_id for t in deck.declared_tokens if t.token_id not in tokens]
        if missing:
            raise InvalidDeck(f"no token implementation bound for: {', '.join(missing)}")
        self.deck = deck
        self.catalog = catalog
        self.tokens = dict(tokens)
        self.clock = clock
        self.options = options or ExecutionOptions()
        self.store = YieldStore()
        self.trace: list[ExecutionEvent] = []
        self.estop_ack_times: dict[str, float] = {}
        self.status: str | None = None
        self._stop_signal = stop_signal
        self._stop_request: tuple[str, str] | None = None
        self._stop_lock = threading.Lock()
        self._tick_index = 0
        self._seq = 0
        self._hand_starts: dict[int, int] = {}
        self._estop_fired = False
        self._movement = self._find_movement()

    # -- public surface ----------------------------------------------------

    @property
    def now(self) -> float:
        return round(self._tick_index * self.clock.tick_seconds, 9)

    @property
    def finished(self) -> bool:
        return self.status is not None

    def emergency_stop(self, reason: str = "operator", origin: str = "external") -> EstopAck:
        """Request a stop; idempotent, callable from any thread."""
        with self._stop_lock:
            if self.finished or self._estop_fired:
                return EstopAck.ALREADY_STOPPED
            if self._stop_request is None:
                self._stop_request = (origin, reason)
            return EstopAck.INITIATED

    def events(self) -> Iterator[ExecutionEvent]:
        """Run the deck, yielding each trace event as it is produced."""
        for event in self._run():
            self.trace.append(event)
            yield event

    def run_to_completion(self) -> list[ExecutionEvent]:
        for _ in self.events():
            pass
        return self.trace

    # -- engine ------------------------------------------------------------

    def _find_movement(self) -> MovementToken | None:
        for decl in self.deck.declared_tokens:
            token = self.tokens.get(decl.token_id)
            if isinstance(token, MovementToken):
                return token
        return None

    def _event(self, kind: str, **data: object) -> ExecutionEvent:
        event = ExecutionEvent(t=self.now, seq=self._seq, kind=kind, data=data)
        self._seq += 1
        return event

    def _tick(self) -> None:
        self.clock.advance()
        self._tick_index += 1

    def _pending_stop(self) -> tuple[str, str] | None:
        with self._stop_lock:
            if self._stop_request is not None:
                return self._stop_request
        if self._stop_signal is not None and self._stop_signal.is_set():
            return ("external", "stop-signal")
        if self.options.estop_at is not None and self.now >= self.options.estop_at:
            return ("external", "scheduled-stop")
        return None

    def _watchdog_tripped(self) -> bool:
        return self.options.max_sim_time is not None and self.now >= self.options.max_sim_time

    def _run(self) -> Iterator[ExecutionEvent]:
        yield self._event(DECK_STARTED)
        hands = self.deck.hands
        passes = 0
        while True:
            index = 0
            while index < len(hands):
                outcome = yield from self._run_hand(hands[index])
                if outcome[0] == "halt":
                    return
                if outcome[0] == "branch":
                    index = outcome[1]
                else:
                    index += 1
            passes += 1
            if self.deck.repeat_deck and (
                    self.options.max_deck_repeats is None or passes < self.options.max_deck_repeats):
                continue
            break
        yield from self._complete(COMPLETED)

    def _run_hand(self, hand: Hand):
        for _ in range(hand.repeat_count + 1):
            outcome = yield from self._run_hand_once(hand)
            if outcome[0] != "fall":
                return outcome
        return ("fall",)

    def _behavior_for(self, card: CardInstance):
        behavior = self.catalog.behavior(card.descriptor_path)
        if behavior is None:
            raise InvalidDeck(f"{card.descriptor_path} has no executable behavior")
        return behavior

    def _start_runners(self, hand: Hand) -> list[_Runner]:
        runners = []
        for card in hand.cards:
            descriptor = self.catalog.lookup(card.descriptor_path)
            inputs = resolve_inputs(card, descriptor, self.store)
            tokens = {slot: self.tokens[tid] for slot, tid in card.token_bindings.items()}
            ctx = BehaviorContext(inputs, tokens, lambda: self.now, self.clock.tick_seconds,
                                  movement_telemetry=self._movement)
            runners.append(_Runner(card, self._behavior_for(card)(ctx), ctx))
        return runners

    def _run_hand_once(self, hand: Hand):
        iteration = self._hand_starts.get(hand.hand_index, 0)
        self._hand_starts[hand.hand_index] = iteration + 1
        yield self._event(HAND_STARTED, hand=hand.hand_index, iteration=iteration)
        try:
            runners = self._start_runners(hand)
        except InputResolutionFault as exc:
            yield from self._shutdown([], FAULTED, reason=str(exc))
            return ("halt",)
        for runner in runners:
            yield self._event(CARD_STARTED, card=runner.card.instance_id)

        is_final = hand.hand_index == len(self.deck.hands) - 1
        ends_ids = [r.card.instance_id for r in runners
                    if self.catalog.lookup(r.card.descriptor_path).ends]
        satisfied: set[str] = set()

        while True:
            stop = self._pending_stop()
            if stop is not None:
                yield from self._shutdown(runners, STOPPED, origin=stop[0], reason=stop[1])
                return ("halt",)
            if self._watchdog_tripped():
                yield from self._shutdown(runners, FAULTED, reason="watchdog: sim time limit reached")
                return ("halt",)
            if self._movement is not None and self._movement.forced_landing_engaged():
                # Battery-critical safety landing preempts the program.
                yield from self._end_hand(runners, hand)
                yield self._event(HAND_ENDED, reason="battery")
                yield from self._complete(COMPLETED if is_final else FAULTED)
                return ("halt",)

            for runner in runners:
                if not runner.running:
                    continue
                try:
                    next(runner.gen)
                except StopIteration:
                    runner.running = False
                    satisfied.add(runner.card.instance_id)
                    yield self._event(CARD_SATISFIED, card=runner.card.instance_id)
                except TokenFault as fault:
                    runner.running = False
                    yield from self._shutdown(runners, STOPPED, origin="token", reason=str(fault))
                    return ("halt",)

            fired = None
            for spec in hand.branches:
                if eval_cond(spec.condition, satisfied):
                    fired = spec
                    break
            if fired is not None:
                yield from self._end_hand(runners, hand)
                yield self._event(BRANCH_TAKEN, target=fired.target)
                yield self._event(HAND_ENDED, reason="branch")
                return ("branch", fired.target)

            if hand.rule is SatisfactionRule.ALL:
                met = bool(ends_ids) and all(i in satisfied for i in ends_ids)
            else:
                met = any(i in satisfied for i in ends_ids)
            if met:
                yield from self._end_hand(runners, hand)
                yield self._event(HAND_ENDED, reason=hand.rule.value)
                return ("fall",)

            if self.options.telemetry_every and self._tick_index % self.options.telemetry_every == 0:
                telemetry = self._telemetry()
                if telemetry is not None:
                    yield telemetry
            self._tick()

    def _telemetry(self) -> ExecutionEvent | None:
        if self._movement is None:
            return None
        loc = self._movement.current_location()
        return self._event(TELEMETRY, lat=round(loc["lat"], 9), lon=round(loc["lon"], 9),
                           alt=round(loc["alt"], 3),
                           battery=round(self._movement.battery_fraction(), 6))

    def _close_runner(self, runner: _Runner) -> None:
        runner.running = False
        try:
            runner.gen.close()
        except Exception:
            pass

    def _end_hand(self, runners: list[_Runner], hand: Hand) -> Iterator[ExecutionEvent]:
        """Terminate still-running cards and publish yields, in card order."""
        for runner in runners:
            if runner.running:
                self._close_runner(runner)
                yield self._event(CARD_TERMINATED, card=runner.card.instance_id)
        for runner in runners:
            descriptor = self.catalog.lookup(runner.card.descriptor_path)
            for spec in descriptor.yields:
                if spec.name in runner.ctx.yields:
                    value = runner.ctx.yields[spec.name]
                    self.store.publish(hand.hand_index, runner.card.instance_id, spec.name, value)
                    yield self._event(YIELD_PRODUCED, card=runner.card.instance_id,
                                      name=spec.name, value=value)

    def _wait_for_landing(self) -> None:
        if self._movement is None:
            return
        deadline = self.now + self.options.shutdown_wait_cap
        while not self._movement.grounded() and self.now < deadline:
            self._tick()

    def _complete(self, status: str) -> Iterator[ExecutionEvent]:
        """Normal end of the program: safety landing, then DeckEnded."""
        if self.deck.implicit_land and self._movement is not None:
            if not self._movement.grounded():
                handle = self._movement.land()
                deadline = self.now + self.options.shutdown_wait_cap
                while not handle.done and not self._movement.grounded() \
                        and self.now < deadline:
                    stop = self._pending_stop()
                    if stop is not None:
                        yield from self._shutdown([], STOPPED, origin=stop[0], reason=stop[1])
                        return
                    self._tick()
            yield self._event(IMPLICIT_LAND)
        self.status = status
        yield self._event(DECK_ENDED, status=status)

    def _shutdown(self, runners: list[_Runner], status: str, origin: str | None = None,
                  reason: str = "") -> Iterator[ExecutionEvent]:
        """Emergency-stop / fault path: stop tokens, cancel cards, land, end."""
        self._estop_fired = True
        if status == STOPPED:
            yield self._event(EMERGENCY_STOP, origin=origin, reason=reason)
        seen: set[int] = set()
        for decl in self.deck.declared_tokens:
            token = self.tokens[decl.token_id]
            if id(token) in seen:
                continue
            seen.add(id(token))
            token.emergency_stop(reason)
            self.estop_ack_times[decl.token_id] = self.now
        for runner in runners:
            if runner.running:
                self._close_runner(runner)
                yield self._event(CARD_TERMINATED, card=runner.card.instance_id)
        self._wait_for_landing()
        self.status = status
        yield self._event(DECK_ENDED, status=status)


def execute_deck(deck: Deck, catalog: Catalog, tokens: dict[str, TokenInterface],
                 clock: Clock, stop_signal: threading.Event | None = None,
                 options: ExecutionOptions | None = None,
                 skip_validation: bool = False) -> list[ExecutionEvent]:
    """Validate and run a deck to completion, returning the full trace."""
    if not skip_validation:
        from .validator import validate_deck, has_errors

        diagnostics = validate_deck(deck, catalog)
        if has_errors(diagnostics):
            raise InvalidDeck(
                "deck has validation errors: "
                + "; ".join(d.code for d in diagnostics if d.severity.value == "error"))
    execution = Execution(deck, catalog, tokens, clock, stop_signal, options)
    return execution.run_to_completion()
