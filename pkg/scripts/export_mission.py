#!/usr/bin/env python3
"""Write a built-in mission's deck JSON, notation, and world files to disk,
ready for the cardkit CLI:

    python3 scripts/export_mission.py gas-survey -o out/
    cardkit run out/gas-survey.json --world out/gas-survey.leak.world.json
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cardkit.catalog import drone_catalog
from cardkit.notation import print_notation
from cardkit.serialization import serialize_deck
from cardkit.simworld import config_to_json
from cardkit import missions


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("mission", nargs="?", default=None,
                        help="mission name (default: export all)")
    parser.add_argument("-o", "--out", default="out")
    args = parser.parse_args()

    targets = [missions.by_name(args.mission)] if args.mission else list(missions.ALL_MISSIONS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    catalog = drone_catalog()
    for mission in targets:
        deck = mission.deck(catalog)
        (out / f"{mission.name}.json").write_text(serialize_deck(deck) + "\n", encoding="utf-8")
        (out / f"{mission.name}.cards").write_text(print_notation(deck, catalog), encoding="utf-8")
        for variant, config in mission.worlds.items():
            path = out / f"{mission.name}.{variant}.world.json"
            path.write_text(json.dumps(config_to_json(config), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
        print(f"{mission.name}: deck + {len(mission.worlds)} world(s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
