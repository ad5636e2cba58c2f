#!/usr/bin/env python3
"""Start the mission service with the built-in example decks preloaded."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cardkit.catalog import drone_catalog
from cardkit.service import DEFAULT_TIME_RATIO, create_app
from cardkit import missions


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--time-ratio", type=float, default=DEFAULT_TIME_RATIO)
    parser.add_argument("--no-samples", action="store_true",
                        help="do not preload the example decks")
    args = parser.parse_args()

    app = create_app(args.data_dir, args.time_ratio)
    if not args.no_samples:
        catalog = drone_catalog()
        for mission in missions.ALL_MISSIONS:
            app.state.store.put_deck(mission.deck(catalog))

    import uvicorn

    print(f"mission service on http://{args.host}:{args.port} "
          f"(time ratio {args.time_ratio}x)")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
