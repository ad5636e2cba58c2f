"""HTTP mission service: deck CRUD, validation, execution control, and live
event streaming over server-sent events.

Each execution runs the engine in its own worker thread against a private
simulated world; the record store is safe for concurrent readers with
serialized writers, and an emergency stop may arrive on any request thread.
Simulated time is paced at a configurable multiple of real time (default ten
times faster) so a three-minute mission timer takes eighteen wall seconds.
"""
from __future__ import annotations

import argparse
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .catalog import catalog_to_json, load_catalog
from .model import Deck
from .runtime import DECK_ENDED, Execution, ExecutionEvent, ExecutionOptions
from .serialization import SchemaError, deck_to_json, deserialize_deck, serialize_deck
from .simworld import SimClock, SimWorld, SimWorldError, config_from_json
from .validator import has_errors, validate_deck

DEFAULT_TIME_RATIO = 10.0

PENDING = "pending"
RUNNING = "running"


@dataclass
class ExecutionRecord:
    execution_id: str
    deck_id: str
    state: str = PENDING
    started_at: float = field(default_factory=time.time)
    events: list[ExecutionEvent] = field(default_factory=list)
    execution: Execution | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    changed: threading.Condition | None = None

    def __post_init__(self) -> None:
        self.changed = threading.Condition(self.lock)

    def append(self, event: ExecutionEvent) -> None:
        with self.changed:
            self.events.append(event)
            if event.kind == DECK_ENDED:
                self.state = event.data["status"]
            self.changed.notify_all()

    def mark_running(self) -> None:
        with self.changed:
            if self.state == PENDING:
                self.state = RUNNING
            self.changed.notify_all()

    def mark_faulted(self) -> None:
        with self.changed:
            if self.state in (PENDING, RUNNING):
                self.state = "faulted"
            self.changed.notify_all()

    def summary(self) -> dict:
        with self.lock:
            return {
                "executionId": self.execution_id,
                "deckId": self.deck_id,
                "state": self.state,
                "startedAt": self.started_at,
                "eventCount": len(self.events),
                "simTime": self.events[-1].t if self.events else 0.0,
            }

    def finished(self) -> bool:
        return self.state not in (PENDING, RUNNING)


class MissionStore:
    def __init__(self, data_dir: str | None = None):
        self._decks: dict[str, Deck] = {}
        self._executions: dict[str, ExecutionRecord] = {}
        self._lock = threading.Lock()
        self._data_dir = Path(data_dir) if data_dir else None
        if self._data_dir is not None:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            for path in sorted(self._data_dir.glob("*.json")):
                self._decks_load(path)

    def _decks_load(self, path: Path) -> None:
        try:
            deck = deserialize_deck(path.read_text(encoding="utf-8"))
        except (OSError, SchemaError):
            return
        self._decks[deck.deck_id] = deck

    def _snapshot(self, deck: Deck) -> None:
        if self._data_dir is not None:
            (self._data_dir / f"{deck.deck_id}.json").write_text(
                serialize_deck(deck), encoding="utf-8")

    def put_deck(self, deck: Deck) -> None:
        with self._lock:
            self._decks[deck.deck_id] = deck
            self._snapshot(deck)

    def get_deck(self, deck_id: str) -> Deck | None:
        with self._lock:
            return self._decks.get(deck_id)

    def delete_deck(self, deck_id: str) -> bool:
        with self._lock:
            found = self._decks.pop(deck_id, None) is not None
            if found and self._data_dir is not None:
                (self._data_dir / f"{deck_id}.json").unlink(missing_ok=True)
            return found

    def deck_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._decks)

    def add_execution(self, record: ExecutionRecord) -> None:
        with self._lock:
            self._executions[record.execution_id] = record

    def get_execution(self, execution_id: str) -> ExecutionRecord | None:
        with self._lock:
            return self._executions.get(execution_id)

    def execution_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._executions)


def _run_execution(record: ExecutionRecord) -> None:
    record.mark_running()
    try:
        assert record.execution is not None
        for event in record.execution.events():
            record.append(event)
    except Exception:
        record.mark_faulted()


def create_app(data_dir: str | None = None,
               time_ratio: float = DEFAULT_TIME_RATIO) -> FastAPI:
    app = FastAPI(title="cardkit mission service")
    catalog = load_catalog()
    store = MissionStore(data_dir)
    app.state.store = store
    app.state.catalog = catalog
    app.state.time_ratio = time_ratio

    @app.get("/catalog")
    def get_catalog() -> list[dict]:
        return catalog_to_json(catalog)

    @app.get("/decks")
    def list_decks() -> dict:
        return {"decks": store.deck_ids()}

    @app.post("/decks", status_code=201)
    def post_deck(body: dict = Body(...)) -> dict:
        try:
            deck = deserialize_deck(json.dumps(body))
        except SchemaError as exc:
            raise HTTPException(status_code=422, detail=[{"path": exc.path,
                                                          "reason": exc.reason}])
        store.put_deck(deck)
        return {"deckId": deck.deck_id}

    @app.get("/decks/{deck_id}")
    def get_deck(deck_id: str) -> dict:
        deck = store.get_deck(deck_id)
        if deck is None:
            raise HTTPException(status_code=404, detail=f"no deck {deck_id!r}")
        return deck_to_json(deck)

    @app.delete("/decks/{deck_id}", status_code=204)
    def delete_deck(deck_id: str) -> None:
        if not store.delete_deck(deck_id):
            raise HTTPException(status_code=404, detail=f"no deck {deck_id!r}")

    @app.post("/decks/{deck_id}/validate")
    def validate(deck_id: str) -> list[dict]:
        deck = store.get_deck(deck_id)
        if deck is None:
            raise HTTPException(status_code=404, detail=f"no deck {deck_id!r}")
        return [d.to_json() for d in validate_deck(deck, catalog)]

    @app.post("/executions", status_code=201)
    def create_execution(body: dict = Body(...)) -> dict:
        deck_id = body.get("deckId")
        if not isinstance(deck_id, str):
            raise HTTPException(status_code=400, detail="body needs a deckId")
        deck = store.get_deck(deck_id)
        if deck is None:
            raise HTTPException(status_code=404, detail=f"no deck {deck_id!r}")
        diagnostics = validate_deck(deck, catalog)
        if has_errors(diagnostics):
            return JSONResponse(status_code=409, content={
                "error": "deck has validation errors",
                "diagnostics": [d.to_json() for d in diagnostics],
            })
        try:
            config = config_from_json(body.get("world") or {})
        except (SimWorldError, KeyError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"bad world config: {exc}")
        ratio = body.get("timeRatio", app.state.time_ratio)
        if not isinstance(ratio, (int, float)) or ratio < 0:
            raise HTTPException(status_code=400, detail="timeRatio must be non-negative")
        options = ExecutionOptions(
            max_sim_time=body.get("maxSimTime", 3600.0),
            max_deck_repeats=body.get("maxRepeats"),
            telemetry_every=int(body.get("telemetryEvery", 5)),
        )
        world = SimWorld(config)
        try:
            tokens = world.tokens_for_deck(deck)
        except SimWorldError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        execution = Execution(deck, catalog, tokens, SimClock(world, float(ratio)),
                              options=options)
        record = ExecutionRecord(execution_id=uuid.uuid4().hex[:12], deck_id=deck_id,
                                 execution=execution)
        store.add_execution(record)
        threading.Thread(target=_run_execution, args=(record,), daemon=True).start()
        return {"executionId": record.execution_id}

    @app.get("/executions")
    def list_executions() -> dict:
        return {"executions": store.execution_ids()}

    def _record_or_404(execution_id: str) -> ExecutionRecord:
        record = store.get_execution(execution_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no execution {execution_id!r}")
        return record

    @app.get("/executions/{execution_id}")
    def get_execution(execution_id: str) -> dict:
        return _record_or_404(execution_id).summary()

    @app.post("/executions/{execution_id}/estop", status_code=202)
    def estop(execution_id: str) -> dict:
        record = _record_or_404(execution_id)
        assert record.execution is not None
        ack = record.execution.emergency_stop(reason="operator request")
        return {"executionId": execution_id, "ack": ack.value}

    @app.get("/executions/{execution_id}/events")
    def events(execution_id: str, request: Request, since: int = -1) -> StreamingResponse:
        record = _record_or_404(execution_id)
        last_id = request.headers.get("Last-Event-ID")
        if last_id is not None and last_id.isdigit():
            since = int(last_id)

        def stream():
            yield "retry: 2000\n\n"
            cursor = since + 1
            while True:
                with record.changed:
                    while len(record.events) <= cursor and not record.finished():
                        record.changed.wait(timeout=5.0)
                    batch = record.events[cursor:]
                    done = record.finished() and cursor + len(batch) >= len(record.events)
                for event in batch:
                    payload = json.dumps(event.to_json(), ensure_ascii=True)
                    yield f"id: {event.seq}\nevent: execution\ndata: {payload}\n\n"
                cursor += len(batch)
                if done:
                    return

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    @app.get("/", response_class=PlainTextResponse)
    def index() -> str:
        return "cardkit mission service\n"

    return app


app = create_app()


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="cardkit-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--data-dir", default=None,
                        help="directory for deck JSON snapshots")
    parser.add_argument("--time-ratio", type=float, default=DEFAULT_TIME_RATIO,
                        help="simulated seconds per wall second (0 = unpaced)")
    args = parser.parse_args(argv)

    import uvicorn

    uvicorn.run(create_app(args.data_dir, args.time_ratio),
                host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
