"""Command-line interface: validate, run, catalog, and fmt subcommands.

Exit codes: validate returns 0 (clean), 1 (errors), 2 (unreadable/parse
failure); run mirrors the deck's final status (0 completed, 3 stopped,
4 faulted), with 1 for validation errors and 2 for parse failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .catalog import catalog_to_json, load_catalog
from .model import Catalog, Deck
from .notation import NotationError, parse_notation, print_notation
from .runtime import ExecutionOptions, InvalidDeck, execute_deck, trace_to_jsonl
from .serialization import SchemaError, deserialize_deck, serialize_deck
from .simworld import SimClock, SimWorld, SimWorldConfig, SimWorldError, config_from_json
from .validator import diagnostics_to_jsonl, has_errors, validate_deck

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_PARSE = 2
EXIT_STOPPED = 3
EXIT_FAULTED = 4

_STATUS_EXIT = {"completed": EXIT_OK, "stopped": EXIT_STOPPED, "faulted": EXIT_FAULTED}


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_bindings(path: str | None) -> dict | None:
    if path is None:
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_deck(path: str, catalog: Catalog, from_notation: bool,
               bindings_path: str | None) -> Deck:
    text = _read_text(path)
    if from_notation or path.endswith((".cards", ".notation", ".txt")):
        return parse_notation(text, catalog, _load_bindings(bindings_path))
    return deserialize_deck(text)


def cmd_validate(args: argparse.Namespace) -> int:
    catalog = load_catalog()
    try:
        deck = _load_deck(args.deck, catalog, args.from_notation, args.bindings)
    except (SchemaError, NotationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    diagnostics = validate_deck(deck, catalog)
    sys.stdout.write(diagnostics_to_jsonl(diagnostics))
    return EXIT_DIAGNOSTICS if has_errors(diagnostics) else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    catalog = load_catalog()
    try:
        deck = _load_deck(args.deck, catalog, args.from_notation, args.bindings)
        if args.world:
            config = config_from_json(json.loads(_read_text(args.world)))
        else:
            config = SimWorldConfig()
    except (SchemaError, NotationError, SimWorldError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    diagnostics = validate_deck(deck, catalog)
    if has_errors(diagnostics):
        sys.stdout.write(diagnostics_to_jsonl(diagnostics))
        return EXIT_DIAGNOSTICS

    if args.seed is not None:
        config = replace(config, seed=args.seed)
    world = SimWorld(config)
    options = ExecutionOptions(
        max_sim_time=args.max_sim_time,
        max_deck_repeats=args.max_repeats,
        estop_at=args.estop_at,
        telemetry_every=args.telemetry_every,
    )
    try:
        trace = execute_deck(deck, catalog, world.tokens_for_deck(deck),
                             SimClock(world), options=options, skip_validation=True)
    except (InvalidDeck, SimWorldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    with open(args.trace, "w", encoding="utf-8") as fh:
        fh.write(trace_to_jsonl(trace))
    status = trace[-1].data["status"]
    print(f"{deck.deck_id}: {status} at t={trace[-1].t}s "
          f"({len(trace)} events -> {args.trace})")
    return _STATUS_EXIT[status]


def cmd_catalog(args: argparse.Namespace) -> int:
    catalog = load_catalog()
    if args.json:
        json.dump(catalog_to_json(catalog), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK
    for descriptor in catalog.descriptors():
        marks = []
        if descriptor.ends:
            marks.append("ends")
        for slot in descriptor.token_slots:
            marks.append(f"{slot.token_type}{'*' if slot.consumed else ''}")
        suffix = f" [{', '.join(marks)}]" if marks else ""
        print(f"{descriptor.path}{suffix}")
    return EXIT_OK


def cmd_fmt(args: argparse.Namespace) -> int:
    catalog = load_catalog()
    try:
        text = _read_text(args.path)
        if args.from_json:
            deck = deserialize_deck(text)
        else:
            deck = parse_notation(text, catalog, _load_bindings(args.bindings))
        if args.emit == "notation":
            sys.stdout.write(print_notation(deck, catalog))
        else:
            sys.stdout.write(serialize_deck(deck) + "\n")
    except (SchemaError, NotationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cardkit",
                                     description="Validate and run card mission decks.")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="check a deck against the card rules")
    validate.add_argument("deck", help="deck JSON file, or notation with --from-notation")
    validate.add_argument("--from-notation", action="store_true")
    validate.add_argument("--bindings", help="JSON file of placeholder values for notation")
    validate.set_defaults(func=cmd_validate)

    run = sub.add_parser("run", help="execute a deck against the simulator")
    run.add_argument("deck")
    run.add_argument("--world", help="world config JSON file")
    run.add_argument("--trace", default="trace.jsonl", help="trace output path")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--max-sim-time", type=float, default=None, metavar="SECONDS")
    run.add_argument("--max-repeats", type=int, default=1000,
                     help="cap on full deck passes under RepeatDeck")
    run.add_argument("--estop-at", type=float, default=None, metavar="SECONDS",
                     help="inject an emergency stop at this simulated time")
    run.add_argument("--from-notation", action="store_true")
    run.add_argument("--bindings")
    run.add_argument("--telemetry-every", type=int, default=0, metavar="N",
                     help="record drone position every N ticks")
    run.set_defaults(func=cmd_run)

    cat = sub.add_parser("catalog", help="list the card catalog")
    cat.add_argument("--json", action="store_true")
    cat.set_defaults(func=cmd_catalog)

    fmt = sub.add_parser("fmt", help="convert between notation and canonical deck JSON")
    fmt.add_argument("path")
    fmt.add_argument("--from-json", action="store_true",
                     help="input is deck JSON instead of notation")
    fmt.add_argument("--emit", choices=("json", "notation"), default="json")
    fmt.add_argument("--bindings")
    fmt.set_defaults(func=cmd_fmt)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
