#!/usr/bin/env python3
"""Run every built-in mission against its worlds and summarize the traces."""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cardkit.catalog import drone_catalog
from cardkit.runtime import BRANCH_TAKEN, ExecutionOptions, Execution, trace_to_jsonl
from cardkit.simworld import SimClock, SimWorld
from cardkit.validator import validate_deck
from cardkit import missions


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--traces-dir", default=None,
                        help="write one trace JSONL per run into this directory")
    parser.add_argument("--max-repeats", type=int, default=3)
    parser.add_argument("--max-sim-time", type=float, default=600.0)
    args = parser.parse_args()

    catalog = drone_catalog()
    out_dir = Path(args.traces_dir) if args.traces_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    for mission in missions.ALL_MISSIONS:
        deck = mission.deck(catalog)
        diagnostics = validate_deck(deck, catalog)
        warn = sum(1 for d in diagnostics if d.severity.value == "warning")
        print(f"== {mission.name}: {mission.title}")
        print(f"   hands={len(deck.hands)} cards="
              f"{sum(len(h.cards) for h in deck.hands)} warnings={warn}")
        for variant in mission.worlds:
            world = SimWorld(mission.world(variant))
            execution = Execution(
                deck, catalog, world.tokens_for_deck(deck), SimClock(world),
                options=ExecutionOptions(max_sim_time=args.max_sim_time,
                                         max_deck_repeats=args.max_repeats))
            started = time.monotonic()
            execution.run_to_completion()
            wall = time.monotonic() - started
            trace = execution.trace
            branches = [e.data["target"] for e in trace if e.kind == BRANCH_TAKEN]
            print(f"   [{variant}] {trace[-1].data['status']} at t={trace[-1].t:.1f}s, "
                  f"{len(trace)} events, branches={branches}, wall={wall:.2f}s")
            if out_dir:
                path = out_dir / f"{mission.name}-{variant}.jsonl"
                path.write_text(trace_to_jsonl(trace), encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
