import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from cardkit.serialization import deck_to_json
from cardkit.service import create_app
from cardkit.simworld import config_to_json
from cardkit import missions


@pytest.fixture
def client(tmp_path):
    app = create_app(data_dir=str(tmp_path / "data"), time_ratio=0.0)
    with TestClient(app) as client:
        yield client


def _post_deck(client, catalog, mission):
    body = deck_to_json(mission.deck(catalog))
    response = client.post("/decks", json=body)
    assert response.status_code == 201
    return response.json()["deckId"]


def _start(client, deck_id, world=None, **extra):
    body = {"deckId": deck_id, "world": world or config_to_json(
        missions.PHOTO_FLIGHT.world("default"))}
    body.update(extra)
    response = client.post("/executions", json=body)
    assert response.status_code == 201, response.text
    return response.json()["executionId"]


def _wait_done(client, execution_id, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        summary = client.get(f"/executions/{execution_id}").json()
        if summary["state"] not in ("pending", "running"):
            return summary
        time.sleep(0.02)
    raise AssertionError("execution did not finish in time")


def _sse_events(response_text):
    events = []
    for block in response_text.split("\n\n"):
        data = [line[len("data: "):] for line in block.splitlines()
                if line.startswith("data: ")]
        if data:
            events.append(json.loads(data[0]))
    return events


def test_deck_crud_cycle(client, catalog):
    deck_id = _post_deck(client, catalog, missions.PHOTO_FLIGHT)
    assert deck_id == "photo-flight"
    fetched = client.get(f"/decks/{deck_id}")
    assert fetched.status_code == 200
    assert fetched.json() == deck_to_json(missions.PHOTO_FLIGHT.deck(catalog))
    assert deck_id in client.get("/decks").json()["decks"]
    assert client.delete(f"/decks/{deck_id}").status_code == 204
    assert client.get(f"/decks/{deck_id}").status_code == 404
    assert client.delete(f"/decks/{deck_id}").status_code == 404


def test_deck_snapshots_survive_restart(tmp_path, catalog):
    data_dir = str(tmp_path / "snap")
    with TestClient(create_app(data_dir=data_dir)) as client:
        _post_deck(client, catalog, missions.GAS_SURVEY)
    with TestClient(create_app(data_dir=data_dir)) as client:
        assert client.get("/decks/gas-survey").status_code == 200


def test_post_malformed_deck_gives_422(client):
    response = client.post("/decks", json={"deckId": "x", "mystery": True})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert any("mystery" in item["reason"] for item in detail)


def test_validate_endpoint(client, catalog):
    deck_id = _post_deck(client, catalog, missions.GAS_SURVEY)
    response = client.post(f"/decks/{deck_id}/validate")
    assert response.status_code == 200
    assert response.json() == []  # the survey mission is fully clean
    assert client.post("/decks/ghost/validate").status_code == 404


def test_catalog_endpoint(client):
    catalog_dump = client.get("/catalog").json()
    assert any(d["path"] == "Action/Movement/FlyTo" for d in catalog_dump)


def test_execution_lifecycle_and_replay(client, catalog):
    deck_id = _post_deck(client, catalog, missions.PHOTO_FLIGHT)
    execution_id = _start(client, deck_id)
    summary = _wait_done(client, execution_id)
    assert summary["state"] == "completed"

    response = client.get(f"/executions/{execution_id}/events")
    events = _sse_events(response.text)
    assert events[0]["event"] == "DeckStarted"
    assert events[-1]["event"] == "DeckEnded"
    assert [e["seq"] for e in events] == list(range(len(events)))
    assert summary["eventCount"] == len(events)


def test_execution_of_invalid_deck_409(client, catalog):
    body = deck_to_json(missions.PHOTO_FLIGHT.deck(catalog))
    body["hands"][0]["cards"][0]["inputs"] = {}
    body["deckId"] = "broken"
    assert client.post("/decks", json=body).status_code == 201
    response = client.post("/executions", json={"deckId": "broken"})
    assert response.status_code == 409
    assert any(d["code"] == "E_INPUT_MISSING" for d in response.json()["diagnostics"])


def test_unknown_ids_404(client):
    assert client.get("/executions/nope").status_code == 404
    assert client.post("/executions/nope/estop").status_code == 404
    assert client.post("/executions", json={"deckId": "nope"}).status_code == 404
    assert client.post("/executions", json={}).status_code == 400


def test_estop_round_trip(client, catalog):
    deck_id = _post_deck(client, catalog, missions.PACKAGE_DELIVERY)
    execution_id = _start(client, deck_id,
                          world=config_to_json(missions.PACKAGE_DELIVERY.world("default")),
                          timeRatio=50.0)
    response = client.post(f"/executions/{execution_id}/estop")
    assert response.status_code == 202
    summary = _wait_done(client, execution_id)
    assert summary["state"] == "stopped"
    again = client.post(f"/executions/{execution_id}/estop")
    assert again.status_code == 202
    assert again.json()["ack"] == "already-stopped"
    events = _sse_events(client.get(f"/executions/{execution_id}/events").text)
    assert any(e["event"] == "EmergencyStop" for e in events)
    assert events[-1] == {"t": events[-1]["t"], "seq": events[-1]["seq"],
                          "event": "DeckEnded", "status": "stopped"}


def test_sse_resume_with_since(client, catalog):
    deck_id = _post_deck(client, catalog, missions.PHOTO_FLIGHT)
    execution_id = _start(client, deck_id)
    _wait_done(client, execution_id)
    full = _sse_events(client.get(f"/executions/{execution_id}/events").text)
    tail = _sse_events(client.get(f"/executions/{execution_id}/events?since=4").text)
    assert tail == full[5:]
    resumed = _sse_events(client.get(f"/executions/{execution_id}/events",
                                     headers={"Last-Event-ID": "4"}).text)
    assert resumed == full[5:]


def test_slow_consumer_sees_every_event_once(client, catalog):
    deck_id = _post_deck(client, catalog, missions.PACKAGE_DELIVERY)
    execution_id = _start(client, deck_id,
                          world=config_to_json(missions.PACKAGE_DELIVERY.world("default")),
                          timeRatio=400.0, telemetryEvery=3)
    seen = []
    with client.stream("GET", f"/executions/{execution_id}/events") as response:
        for line in response.iter_lines():
            if line.startswith("data: "):
                seen.append(json.loads(line[len("data: "):]))
                time.sleep(0.002)  # lag behind the producer on purpose
    assert seen[-1]["event"] == "DeckEnded"
    assert [e["seq"] for e in seen] == list(range(len(seen)))
    summary = client.get(f"/executions/{execution_id}").json()
    assert summary["eventCount"] == len(seen)


def test_parallel_executions_stay_isolated(client, catalog):
    mission_by_deck = {}
    execution_ids = {}
    for mission in (missions.PHOTO_FLIGHT, missions.SWEEP_PHOTOS):
        deck_id = _post_deck(client, catalog, mission)
        mission_by_deck[deck_id] = mission
    for i in range(8):
        deck_id = list(mission_by_deck)[i % 2]
        execution_ids[_start(client, deck_id, maxRepeats=2)] = deck_id

    def check(execution_id):
        summary = _wait_done(client, execution_id)
        assert summary["state"] == "completed"
        assert summary["deckId"] == execution_ids[execution_id]
        events = _sse_events(client.get(f"/executions/{execution_id}/events").text)
        assert events[-1]["event"] == "DeckEnded"
        assert [e["seq"] for e in events] == list(range(len(events)))

    threads = [threading.Thread(target=check, args=(eid,)) for eid in execution_ids]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
