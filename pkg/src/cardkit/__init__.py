"""Card-based mission programming for drones.

Decks of cards describe missions as sequential hands of concurrent actions;
this package provides the deck model and JSON form, the textual notation,
the static validator, a deterministic execution engine, a simulated drone,
and an HTTP mission service.
"""
from .catalog import drone_catalog, load_catalog
from .model import (
    BranchSpec,
    CardClass,
    CardDescriptor,
    CardInstance,
    Catalog,
    CondAnd,
    CondLeaf,
    CondNot,
    CondOr,
    DataKind,
    Deck,
    DescriptorNotFound,
    Hand,
    InputBinding,
    Literal,
    SatisfactionRule,
    TokenDecl,
    YieldRef,
    lookup_descriptor,
)
from .notation import parse_notation, print_notation
from .runtime import (
    Execution,
    ExecutionEvent,
    ExecutionOptions,
    execute_deck,
    resolve_inputs,
    trace_to_jsonl,
)
from .serialization import SchemaError, deserialize_deck, serialize_deck
from .simworld import SimClock, SimWorld, SimWorldConfig
from .validator import Diagnostic, has_errors, reachability_map, validate_deck

__version__ = "0.1.0"

__all__ = [
    "BranchSpec", "CardClass", "CardDescriptor", "CardInstance", "Catalog",
    "CondAnd", "CondLeaf", "CondNot", "CondOr", "DataKind", "Deck",
    "DescriptorNotFound", "Diagnostic", "Execution", "ExecutionEvent",
    "ExecutionOptions", "Hand", "InputBinding", "Literal", "SatisfactionRule",
    "SchemaError", "SimClock", "SimWorld", "SimWorldConfig", "TokenDecl",
    "YieldRef", "deserialize_deck", "drone_catalog", "execute_deck",
    "has_errors", "load_catalog", "lookup_descriptor", "parse_notation",
    "print_notation", "reachability_map", "resolve_inputs", "serialize_deck",
    "trace_to_jsonl", "validate_deck",
]
