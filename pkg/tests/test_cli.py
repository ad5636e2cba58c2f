import json

import pytest

from cardkit.cli import main
from cardkit.serialization import serialize_deck
from cardkit.simworld import config_to_json
from cardkit import missions


@pytest.fixture
def deck_file(tmp_path, catalog):
    def write(mission, name="deck.json"):
        path = tmp_path / name
        path.write_text(serialize_deck(mission.deck(catalog)), encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def world_file(tmp_path):
    def write(config, name="world.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config_to_json(config)), encoding="utf-8")
        return str(path)
    return write


def test_validate_clean_deck(deck_file, capsys):
    code = main(["validate", deck_file(missions.PACKAGE_DELIVERY)])
    out = capsys.readouterr().out
    assert code == 0
    assert out == ""


def test_validate_reports_token_conflict(tmp_path, catalog, capsys):
    notation = ("Hand 1: FlyTo <- Location [0,0,10] ; "
                "Circle <- (Location [0,0,10] + Distance [20])\nHand 2: Land")
    path = tmp_path / "conflict.cards"
    path.write_text(notation, encoding="utf-8")
    code = main(["validate", str(path), "--from-notation"])
    out = capsys.readouterr().out.strip().splitlines()
    assert code == 1
    conflicts = [json.loads(line) for line in out
                 if json.loads(line)["code"] == "E_TOKEN_CONFLICT"]
    assert len(conflicts) == 1
    assert conflicts[0]["severity"] == "error"


def test_validate_truncated_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"deckId": "x", "hands": [', encoding="utf-8")
    assert main(["validate", str(path)]) == 2


def test_run_photo_flight(deck_file, world_file, tmp_path, capsys):
    trace_path = tmp_path / "out.jsonl"
    code = main(["run", deck_file(missions.PHOTO_FLIGHT),
                 "--world", world_file(missions.PHOTO_FLIGHT.world("default")),
                 "--trace", str(trace_path), "--max-sim-time", "600"])
    assert code == 0
    lines = [json.loads(l) for l in trace_path.read_text().splitlines()]
    assert lines[-1]["event"] == "DeckEnded" and lines[-1]["status"] == "completed"
    assert lines[-2]["event"] == "ImplicitLand"


def test_run_estop_exit_code(deck_file, world_file, tmp_path):
    code = main(["run", deck_file(missions.PACKAGE_DELIVERY),
                 "--world", world_file(missions.PACKAGE_DELIVERY.world("default")),
                 "--trace", str(tmp_path / "t.jsonl"), "--estop-at", "5"])
    assert code == 3


def test_run_max_repeats(deck_file, world_file, tmp_path):
    trace_path = tmp_path / "ski.jsonl"
    code = main(["run", deck_file(missions.SKI_COVERAGE),
                 "--world", world_file(missions.SKI_COVERAGE.world("default")),
                 "--trace", str(trace_path), "--max-repeats", "2",
                 "--max-sim-time", "600"])
    assert code == 0
    starts = [json.loads(l) for l in trace_path.read_text().splitlines()
              if json.loads(l)["event"] == "HandStarted" and json.loads(l)["hand"] == 0]
    assert len(starts) == 2


def test_run_rejects_invalid_deck(tmp_path, catalog, capsys):
    notation = ("Hand 1: FlyTo <- Location [0,0,10] ; "
                "Circle <- (Location [0,0,10] + Distance [20])\nHand 2: Land")
    path = tmp_path / "bad.cards"
    path.write_text(notation, encoding="utf-8")
    code = main(["run", str(path), "--from-notation", "--trace", str(tmp_path / "t.jsonl")])
    assert code == 1


def test_run_watchdog_exit(tmp_path, catalog):
    path = tmp_path / "stuck.cards"
    path.write_text("Hand 1: WaitForGas <- Threshold [5.0]\nHand 2: Land", encoding="utf-8")
    code = main(["run", str(path), "--from-notation", "--max-sim-time", "20",
                 "--trace", str(tmp_path / "t.jsonl")])
    assert code == 4


def test_catalog_json(capsys):
    assert main(["catalog", "--json"]) == 0
    dump = json.loads(capsys.readouterr().out)
    paths = {d["path"] for d in dump}
    assert "Action/Movement/FlyTo" in paths and "Token/Button" in paths


def test_catalog_plain_listing(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "Action/Movement/FlyTo [ends, movement*]" in out


def test_fmt_notation_to_json_and_back(tmp_path, catalog, capsys):
    source = tmp_path / "mission.cards"
    source.write_text(missions.PHOTO_FLIGHT.notation, encoding="utf-8")
    bindings = tmp_path / "bindings.json"
    bindings.write_text(json.dumps(missions.PHOTO_FLIGHT.bindings), encoding="utf-8")

    assert main(["fmt", str(source), "--bindings", str(bindings)]) == 0
    deck_json = capsys.readouterr().out
    json_path = tmp_path / "deck.json"
    json_path.write_text(deck_json, encoding="utf-8")

    assert main(["fmt", str(json_path), "--from-json", "--emit", "notation"]) == 0
    notation = capsys.readouterr().out
    cards_path = tmp_path / "deck.cards"
    cards_path.write_text(notation, encoding="utf-8")

    assert main(["fmt", str(cards_path)]) == 0
    assert capsys.readouterr().out == deck_json


def test_fmt_parse_error(tmp_path, capsys):
    path = tmp_path / "oops.cards"
    path.write_text("Hand 1: FlyThrough <- Location [x]", encoding="utf-8")
    assert main(["fmt", str(path)]) == 2
