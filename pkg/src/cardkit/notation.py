"""Textual mission notation: parser and pretty-printer.

One hand per line, read top to bottom::

    Deck: delivery-run            # optional header (flags: no-implicit-land)
    Tokens: movement:movement     # optional declarations (id:type or bare type)
    Hand 1: FlyTo <- Location [pickup]
    Hand 2: Land ; WaitForButtonPush
    Hand 3: {CoverArea <- (BoundingBox [yard] + Avoid <- BoundingBox [house]) ; Branch(A)} ; Any
    Hand 4 Branch A: ReturnHome

Syntax summary (see docs/notation.md for the full grammar):

* ``<-`` (or the arrow glyph) stacks input values onto a card; ``( a + b )``
  supplies several at once.
* ``;`` separates concurrent cards in one hand.
* ``{ ... ; Branch(X) }`` or ``( ... ; Branch(X) )`` groups the cards whose
  completion fires the branch; ``AND``/``OR``/``NOT`` expressions over the
  positional letters A, B, C... (the hand's action cards, left to right) may
  replace the cards: ``(AND(A, B) ; Branch(2))``.
* ``Branch(A)`` targets the matching ``Hand N Branch A`` arm of the next
  step; ``Branch(2a)`` names the step explicitly; a bare number targets that
  hand (one past the last hand ends the deck).
* ``(#)`` passes a parameter: ``Repeat(3)`` runs the hand three times.
* ``[ ... ]`` supplies the value for an input card: numbers with optional
  units (``5 ft.``, ``3 min.``, ``10 m``, ``2 s``), comma tuples for
  locations, boxes, and offsets, or a named placeholder resolved through a
  bindings table (unresolved placeholders stay behind as text literals).
* ``Yield(2.card-id.name[0])`` reads a yield produced in hand 2.
* ``Card#my-id`` pins an instance id (the printer always emits them).

Hands named ``Hand N Branch X`` are alternative arms of step N: when an arm
completes and the next hand is not the following plain step, the parser adds
a branch that jumps there (or ends the deck if no plain step follows).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    BranchSpec,
    CardClass,
    CardDescriptor,
    CardInstance,
    Catalog,
    Cond,
    CondAnd,
    CondLeaf,
    CondNot,
    CondOr,
    DataKind,
    Deck,
    Hand,
    InputBinding,
    Literal,
    ModelError,
    SatisfactionRule,
    Source,
    TokenDecl,
    ValueTag,
    YieldRef,
    value_matches_kind,
)

ARROW = "<-"

_UNIT_FACTORS = {"ft": 0.3048, "m": 1.0, "min": 60.0, "s": 1.0, "sec": 1.0, "km": 1000.0}
_NUMBER_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?(?:e[+-]?\d+)?)\s*([a-z]+)?\.?$")

_NUMERIC_TAGS = {ValueTag.DISTANCE, ValueTag.DURATION, ValueTag.ALTITUDE,
                 ValueTag.THRESHOLD, ValueTag.NUMBER}
_STRING_TAGS = {ValueTag.IMAGE, ValueTag.AUDIO, ValueTag.TEXT}

# Which input card stands for each value kind when printing.
_KIND_TO_INPUT_CARD = {
    ValueTag.LOCATION: "Location",
    ValueTag.DISTANCE: "Distance",
    ValueTag.DURATION: "Duration",
    ValueTag.ALTITUDE: "Altitude",
    ValueTag.IMAGE: "Image",
    ValueTag.AUDIO: "Audio",
    ValueTag.THRESHOLD: "Threshold",
    ValueTag.BOUNDING_BOX: "BoundingBox",
    ValueTag.RELATIVE_POSITION: "RelativeToObject",
    ValueTag.TEXT: "Location",  # symbolic placeholder; slot decides at re-parse
}


class NotationError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, column {column}: {message}" if line else message)
        self.line = line
        self.column = column


class ParseError(NotationError):
    pass


class UnknownCard(NotationError):
    def __init__(self, name: str, line: int = 0, column: int = 0):
        super().__init__(f"unknown card {name!r}", line, column)
        self.name = name


class BranchLabelUnresolved(NotationError):
    def __init__(self, label: str, line: int = 0, column: int = 0):
        super().__init__(f"branch label {label!r} does not match any hand", line, column)
        self.label = label


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # WORD INT PUNCT ARROW LIT
    text: str
    line: int
    col: int


_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_INT_RE = re.compile(r"\d+")
_PUNCT = set("{}();,+#.:")


def _tokenize(body: str, line_no: int, col_offset: int) -> list[_Tok]:
    tokens: list[_Tok] = []
    i = 0
    while i < len(body):
        ch = body[i]
        col = col_offset + i + 1
        if ch.isspace():
            i += 1
            continue
        if ch == "[":
            end = body.find("]", i + 1)
            if end < 0:
                raise ParseError("unterminated '['", line_no, col)
            tokens.append(_Tok("LIT", body[i + 1:end].strip(), line_no, col))
            i = end + 1
            continue
        if ch == "←":  # left arrow glyph
            tokens.append(_Tok("ARROW", ARROW, line_no, col))
            i += 1
            continue
        if body.startswith(ARROW, i):
            tokens.append(_Tok("ARROW", ARROW, line_no, col))
            i += 2
            continue
        if ch in _PUNCT:
            tokens.append(_Tok("PUNCT", ch, line_no, col))
            i += 1
            continue
        m = _INT_RE.match(body, i)
        if m and not _WORD_RE.match(body, i):
            tokens.append(_Tok("INT", m.group(), line_no, col))
            i = m.end()
            continue
        m = _WORD_RE.match(body, i)
        if m:
            tokens.append(_Tok("WORD", m.group(), line_no, col))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", line_no, col)
    return tokens


class _Stream:
    def __init__(self, tokens: list[_Tok], line: int):
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self, ahead: int = 0) -> _Tok | None:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of line", self.line,
                             self.tokens[-1].col + len(self.tokens[-1].text) if self.tokens else 1)
        self.pos += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> _Tok | None:
        tok = self.peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.accept(kind, text)
        if tok is None:
            got = self.peek()
            expected = text or kind
            found = f"{got.text!r}" if got else "end of line"
            raise ParseError(f"expected {expected!r}, found {found}", self.line,
                             got.col if got else 1)
        return tok

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)


# ---------------------------------------------------------------------------
# Intermediate structures
# ---------------------------------------------------------------------------

@dataclass
class _PendingCard:
    descriptor: CardDescriptor
    explicit_id: str | None
    bindings: list[tuple[str, Source]] = field(default_factory=list)
    line: int = 0
    col: int = 0

    def bound_slots(self) -> set[str]:
        return {slot for slot, _ in self.bindings}


@dataclass
class _StandaloneInput:
    card_name: str
    produces: DataKind
    preferred_slot: str
    raw: str | None
    line: int
    col: int


@dataclass
class _BranchDirective:
    label: str
    cond_ast: object | None        # positional condition expression, if given
    member_indices: list[int] | None  # group members, if the group held cards
    line: int
    col: int


@dataclass
class _PendingHand:
    step: int
    arm: str | None
    line: int
    cards: list[_PendingCard] = field(default_factory=list)
    standalone: list[_StandaloneInput] = field(default_factory=list)
    any_rule: bool = False
    repeat_extra: int = 0
    branch_dirs: list[_BranchDirective] = field(default_factory=list)
    repeat_deck: bool = False


# positional condition AST: ("leaf", idx) | ("and"/"or", [children]) | ("not", child)


class _Parser:
    def __init__(self, catalog: Catalog, bindings: dict[str, object] | None):
        self.catalog = catalog
        self.bindings = bindings or {}
        self.id_counts: dict[str, int] = {}
        self.taken_ids: set[str] = set()
        self.hands: list[_PendingHand] = []
        self.deck_id = "deck"
        self.implicit_land = True
        self.token_decls: list[TokenDecl] | None = None

    # -- helpers -------------------------------------------------------------

    def _descriptor(self, name: str, line: int, col: int) -> CardDescriptor:
        descriptor = self.catalog.by_name(name)
        if descriptor is None:
            raise UnknownCard(name, line, col)
        return descriptor

    def _auto_id(self, name: str) -> str:
        base = name.lower()
        while True:
            self.id_counts[base] = self.id_counts.get(base, 0) + 1
            candidate = f"{base}-{self.id_counts[base]}"
            if candidate not in self.taken_ids:
                self.taken_ids.add(candidate)
                return candidate

    # -- literal typing --------------------------------------------------------

    def _typed_literal(self, raw: str | None, kind: DataKind, line: int, col: int) -> Literal:
        if raw is None:
            if kind.tag is ValueTag.RELATIVE_POSITION:
                return Literal({"east": 0.0, "north": 0.0, "up": 0.0})
            raise ParseError(f"input of kind {kind} needs a [value]", line, col)
        if raw in self.bindings:
            value = self.bindings[raw]
            literal = Literal(value)
            if not value_matches_kind(literal.value, kind):
                raise ParseError(
                    f"binding {raw!r} does not have kind {kind}", line, col)
            return literal
        if kind.tag in _NUMERIC_TAGS:
            number = _parse_number(raw)
            if number is not None:
                return Literal(number)
        elif kind.tag is ValueTag.LOCATION:
            parts = _parse_floats(raw)
            if parts is not None and len(parts) in (2, 3):
                lat, lon = parts[0], parts[1]
                alt = parts[2] if len(parts) == 3 else 0.0
                return Literal({"lat": lat, "lon": lon, "alt": alt})
        elif kind.tag is ValueTag.BOUNDING_BOX:
            parts = _parse_floats(raw)
            if parts is not None and len(parts) == 4:
                return Literal({"latMin": parts[0], "latMax": parts[1],
                                "lonMin": parts[2], "lonMax": parts[3]})
        elif kind.tag is ValueTag.RELATIVE_POSITION:
            parts = _parse_floats(raw)
            if parts is not None and len(parts) == 3:
                return Literal({"east": parts[0], "north": parts[1], "up": parts[2]})
        elif kind.tag is ValueTag.BOOLEAN:
            if raw.lower() in ("true", "false"):
                return Literal(raw.lower() == "true")
        elif kind.tag in _STRING_TAGS:
            return Literal(raw)
        # Unresolved placeholder: keep it as symbolic text for the validator.
        return Literal(raw)

    # -- input slot matching ---------------------------------------------------

    def _match_slot(self, host: _PendingCard, preferred: str, kind: DataKind | None,
                    line: int, col: int) -> str:
        bound = host.bound_slots()
        for slot in host.descriptor.input_slots:
            if slot.name.lower() == preferred.lower() and slot.name not in bound \
                    and (kind is None or slot.kind == kind):
                return slot.name
        ranked = sorted(host.descriptor.input_slots, key=lambda s: not s.required)
        for slot in ranked:
            if slot.name not in bound and (kind is None or slot.kind == kind):
                return slot.name
        if kind is None:
            for slot in ranked:
                if slot.name not in bound:
                    return slot.name
        raise ParseError(
            f"{host.descriptor.name} has no open input slot for kind {kind}", line, col)

    # -- card expressions --------------------------------------------------------

    def _parse_card_expr(self, stream: _Stream, hand: _PendingHand) -> object:
        """Parse one card expression; returns a _PendingCard (actions), a
        _StandaloneInput (bare input cards), or None (hand/deck cards,
        handled in place)."""
        tok = stream.expect("WORD")
        name, line, col = tok.text, tok.line, tok.col

        if name == "Yield":
            raise ParseError("a yield reference can only appear after '<-'", line, col)

        # Hand and deck cards shape the hand instead of joining it.
        if name == "Any":
            hand.any_rule = True
            return None
        if name == "RepeatDeck":
            hand.repeat_deck = True
            return None
        if name == "Repeat":
            stream.expect("PUNCT", "(")
            count_tok = stream.expect("INT")
            stream.expect("PUNCT", ")")
            count = int(count_tok.text)
            if count < 1:
                raise ParseError("Repeat takes a positive count", count_tok.line, count_tok.col)
            hand.repeat_extra = count - 1
            return None
        if name == "Branch":
            label = self._parse_branch_label(stream)
            hand.branch_dirs.append(_BranchDirective(label, None, None, line, col))
            return None
        if name in ("And", "Or", "Not"):
            raise ParseError(
                f"{name} belongs inside a branch condition, e.g. "
                "{AND(A, B) ; Branch(2)}", line, col)

        descriptor = self._descriptor(name, line, col)

        explicit_id = None
        if stream.accept("PUNCT", "#"):
            id_tok = stream.next()
            if id_tok.kind not in ("WORD", "INT"):
                raise ParseError("expected an instance id after '#'", id_tok.line, id_tok.col)
            explicit_id = id_tok.text
            if explicit_id in self.taken_ids:
                raise ParseError(f"instance id {explicit_id!r} is already used",
                                 id_tok.line, id_tok.col)
            self.taken_ids.add(explicit_id)

        if stream.peek() is not None and stream.peek().kind == "PUNCT" and stream.peek().text == "(":
            # Parameters only exist on Repeat and Branch cards.
            raise ParseError(f"{name} does not take a parameter", line, col)

        raw = None
        lit = stream.accept("LIT")
        if lit is not None:
            raw = lit.text

        input_terms = []
        if stream.accept("ARROW"):
            input_terms = self._parse_input_terms(stream)

        if descriptor.card_class is CardClass.INPUT:
            value_raw = raw
            for term in input_terms:
                if not isinstance(term, _StandaloneInput):
                    raise ParseError(f"{name} only accepts a nested input value", line, col)
                if value_raw is not None and term.raw is not None:
                    raise ParseError(f"{name} has more than one value", line, col)
                value_raw = term.raw if term.raw is not None else value_raw
            assert descriptor.produces is not None
            return _StandaloneInput(card_name=name, produces=descriptor.produces,
                                    preferred_slot=name, raw=value_raw, line=line, col=col)

        if descriptor.card_class is not CardClass.ACTION:
            raise ParseError(f"{name} is a {descriptor.card_class.value} card and cannot "
                             "be played as an action", line, col)

        pending = _PendingCard(descriptor=descriptor, explicit_id=explicit_id, line=line, col=col)
        if raw is not None:
            raise ParseError(f"{name} is an action card; stack an input card instead "
                             f"(e.g. {name} {ARROW} Location [...])", line, col)
        hand.cards.append(pending)
        for term in input_terms:
            self._attach_term(pending, hand, term)
        return pending

    def _parse_input_terms(self, stream: _Stream) -> list[object]:
        if stream.accept("PUNCT", "("):
            terms = [self._parse_input_term(stream)]
            while stream.accept("PUNCT", "+"):
                terms.append(self._parse_input_term(stream))
            stream.expect("PUNCT", ")")
            return terms
        return [self._parse_input_term(stream)]

    def _parse_input_term(self, stream: _Stream) -> object:
        tok = stream.peek()
        if tok is not None and tok.kind == "WORD" and tok.text == "Yield":
            return self._parse_yield_ref(stream)
        return self._parse_card_term(stream)

    def _parse_card_term(self, stream: _Stream) -> object:
        # Inside an input expression a WORD is an input card or a hoisted
        # action card (e.g. TrackOnGround feeding Follow); parse it with a
        # scratch hand so hoisted actions land after the host.
        tok = stream.peek()
        if tok is None or tok.kind != "WORD":
            raise ParseError("expected a card or Yield(...) after '<-'",
                             stream.line, tok.col if tok else 1)
        scratch = _PendingHand(step=0, arm=None, line=stream.line)
        result = self._parse_card_expr(stream, scratch)
        if result is None:
            raise ParseError(f"{tok.text} cannot be used as an input", tok.line, tok.col)
        if isinstance(result, _PendingCard):
            return ("hoist", scratch.cards)
        return result

    def _parse_yield_ref(self, stream: _Stream) -> YieldRef:
        stream.expect("WORD", "Yield")
        stream.expect("PUNCT", "(")
        hand_tok = stream.expect("INT")
        stream.expect("PUNCT", ".")
        card_parts = [stream.next()]
        if card_parts[0].kind not in ("WORD", "INT"):
            raise ParseError("expected a card id", card_parts[0].line, card_parts[0].col)
        stream.expect("PUNCT", ".")
        name_tok = stream.expect("WORD")
        index = None
        lit = stream.accept("LIT")
        if lit is not None:
            if not lit.text.isdigit():
                raise ParseError("yield index must be a number", lit.line, lit.col)
            index = int(lit.text)
        stream.expect("PUNCT", ")")
        return YieldRef(hand=int(hand_tok.text) - 1, card=card_parts[0].text,
                        name=name_tok.text, index=index)

    def _attach_term(self, host: _PendingCard, hand: _PendingHand, term: object) -> None:
        if isinstance(term, tuple) and term[0] == "hoist":
            hand.cards.extend(term[1])
            return
        if isinstance(term, YieldRef):
            kind = self._yield_kind(term)
            slot = self._match_slot(host, "", kind, host.line, host.col)
            host.bindings.append((slot, term))
            return
        assert isinstance(term, _StandaloneInput)
        slot = self._match_slot(host, term.preferred_slot, term.produces, term.line, term.col)
        spec = host.descriptor.input_slot(slot)
        assert spec is not None
        host.bindings.append((slot, self._typed_literal(term.raw, spec.kind, term.line, term.col)))

    def _yield_kind(self, ref: YieldRef) -> DataKind | None:
        if not (0 <= ref.hand < len(self.hands)):
            return None
        for pending in self.hands[ref.hand].cards:
            # ids are assigned at finalization; match explicit ids only here
            if pending.explicit_id == ref.card:
                spec = pending.descriptor.yield_spec(ref.name)
                if spec is None:
                    return None
                if ref.index is not None:
                    return spec.kind.element
                return spec.kind
        return None

    # -- branch groups and conditions ------------------------------------------

    def _parse_branch_label(self, stream: _Stream) -> str:
        stream.expect("PUNCT", "(")
        first = stream.next()
        if first.kind == "INT":
            label = first.text
            letter = stream.accept("WORD")
            if letter is not None:
                label += letter.text
        elif first.kind == "WORD":
            label = first.text
        else:
            raise ParseError("expected a branch label", first.line, first.col)
        stream.expect("PUNCT", ")")
        return label

    def _parse_group(self, stream: _Stream, hand: _PendingHand, closer: str) -> None:
        cond_ast = None
        members: list[int] = []
        branch: _BranchDirective | None = None
        while True:
            tok = stream.peek()
            if tok is None:
                raise ParseError(f"expected {closer!r}", stream.line, 1)
            if tok.kind == "PUNCT" and tok.text == closer:
                stream.next()
                break
            if tok.kind == "WORD" and self._looks_like_cond(stream):
                cond_ast = self._parse_cond_expr(stream)
            elif tok.kind == "WORD" and tok.text == "Branch":
                stream.next()
                label = self._parse_branch_label(stream)
                branch = _BranchDirective(label, None, None, tok.line, tok.col)
            else:
                before = len(hand.cards)
                result = self._parse_card_expr(stream, hand)
                if isinstance(result, _StandaloneInput):
                    hand.standalone.append(result)
                members.extend(range(before, len(hand.cards)))
            if not stream.accept("PUNCT", ";"):
                stream.expect("PUNCT", closer)
                break
        if branch is not None:
            branch.cond_ast = cond_ast
            branch.member_indices = members if cond_ast is None else None
            hand.branch_dirs.append(branch)
        elif cond_ast is not None:
            raise ParseError("a condition group needs a Branch card", stream.line, 1)

    def _looks_like_cond(self, stream: _Stream) -> bool:
        tok = stream.peek()
        assert tok is not None
        nxt = stream.peek(1)
        if tok.text.upper() in ("AND", "OR", "NOT") and nxt is not None \
                and nxt.kind == "PUNCT" and nxt.text == "(":
            return True
        if len(tok.text) == 1 and tok.text.isalpha():
            return nxt is None or (nxt.kind == "PUNCT" and nxt.text in (";", ")", "}", ","))
        return False

    def _parse_cond_expr(self, stream: _Stream):
        tok = stream.expect("WORD")
        upper = tok.text.upper()
        if upper in ("AND", "OR", "NOT") and stream.accept("PUNCT", "("):
            children = [self._parse_cond_expr(stream)]
            while stream.accept("PUNCT", ","):
                children.append(self._parse_cond_expr(stream))
            stream.expect("PUNCT", ")")
            if upper == "NOT":
                if len(children) != 1:
                    raise ParseError("NOT takes exactly one argument", tok.line, tok.col)
                return ("not", children[0])
            return ("and" if upper == "AND" else "or", children)
        if len(tok.text) == 1 and tok.text.isalpha():
            return ("leaf", ord(tok.text.upper()) - ord("A"), tok.line, tok.col)
        raise ParseError(f"expected AND/OR/NOT or a card letter, found {tok.text!r}",
                         tok.line, tok.col)

    # -- hand/line level ---------------------------------------------------------

    def parse_hand_body(self, stream: _Stream, hand: _PendingHand) -> None:
        if stream.at_end():
            return
        while True:
            tok = stream.peek()
            if tok is None:
                break
            if tok.kind == "PUNCT" and tok.text in ("{", "("):
                stream.next()
                self._parse_group(stream, hand, "}" if tok.text == "{" else ")")
            else:
                result = self._parse_card_expr(stream, hand)
                if isinstance(result, _StandaloneInput):
                    hand.standalone.append(result)
            if not stream.accept("PUNCT", ";"):
                break
        if not stream.at_end():
            tok = stream.peek()
            raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.col)

    def parse_header(self, body: str, line_no: int) -> None:
        parts = body.strip().split()
        if not parts:
            raise ParseError("empty Deck header", line_no, 1)
        self.deck_id = parts[0]
        for flag in parts[1:]:
            if flag == "no-implicit-land":
                self.implicit_land = False
            else:
                raise ParseError(f"unknown deck flag {flag!r}", line_no, 1)

    def parse_tokens_line(self, body: str, line_no: int) -> None:
        decls = []
        for chunk in body.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" in chunk:
                token_id, token_type = (p.strip() for p in chunk.split(":", 1))
            else:
                token_id = token_type = chunk
            if not token_id or not token_type:
                raise ParseError(f"malformed token declaration {chunk!r}", line_no, 1)
            if any(d.token_id == token_id for d in decls):
                raise ParseError(f"token {token_id!r} declared twice", line_no, 1)
            decls.append(TokenDecl(token_id, token_type))
        if not decls:
            raise ParseError("empty Tokens header", line_no, 1)
        self.token_decls = decls


_HAND_LABEL_RE = re.compile(r"^\s*Hand\s+(\d+)(?:\s+Branch\s+([A-Za-z]))?\s*:(.*)$")
_HEADER_RE = re.compile(r"^\s*(Deck|Tokens)\s*:(.*)$")


def _parse_number(raw: str) -> float | None:
    m = _NUMBER_RE.match(raw.strip().lower())
    if m is None:
        return None
    value = float(m.group(1))
    unit = m.group(2)
    if unit is None:
        return value
    factor = _UNIT_FACTORS.get(unit)
    if factor is None:
        return None
    return value * factor


def _parse_floats(raw: str) -> list[float] | None:
    parts = [p.strip() for p in raw.split(",")]
    out = []
    for part in parts:
        try:
            out.append(float(part))
        except ValueError:
            return None
    return out


def parse_notation(text: str, catalog: Catalog,
                   bindings: dict[str, object] | None = None,
                   deck_id: str = "deck") -> Deck:
    """Parse notation text into a deck.

    ``bindings`` maps placeholder names (e.g. ``pickup``) to canonical
    payload values; unresolved placeholders become text literals that the
    validator reports as type mismatches.
    """
    parser = _Parser(catalog, bindings)
    parser.deck_id = deck_id

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        header = _HEADER_RE.match(raw_line)
        if header is not None:
            if header.group(1) == "Deck":
                parser.parse_header(header.group(2), line_no)
            else:
                parser.parse_tokens_line(header.group(2), line_no)
            continue
        label = _HAND_LABEL_RE.match(raw_line)
        if label is None:
            # An unlabeled line is an implicit next hand, so short fragments
            # parse without ceremony.
            step = parser.hands[-1].step + 1 if parser.hands else 1
            hand = _PendingHand(step=step, arm=None, line=line_no)
            stream = _Stream(_tokenize(raw_line, line_no, 0), line_no)
            parser.parse_hand_body(stream, hand)
            parser.hands.append(hand)
            continue
        step = int(label.group(1))
        arm = label.group(2).lower() if label.group(2) else None
        if parser.hands and step < parser.hands[-1].step:
            raise ParseError(f"hand numbers must not decrease (got {step})", line_no, 1)
        if any(h.step == step and h.arm == arm for h in parser.hands):
            raise ParseError(f"duplicate hand label 'Hand {step}"
                             + (f" Branch {arm.upper()}'" if arm else "'"), line_no, 1)
        hand = _PendingHand(step=step, arm=arm, line=line_no)
        body = label.group(3)
        stream = _Stream(_tokenize(body, line_no, len(raw_line) - len(body)), line_no)
        parser.parse_hand_body(stream, hand)
        parser.hands.append(hand)

    if not parser.hands:
        raise ParseError("deck has no hands", 1, 1)
    return _finalize(parser)


# ---------------------------------------------------------------------------
# Finalization: pending hands -> Deck
# ---------------------------------------------------------------------------

def _finalize(parser: _Parser) -> Deck:
    repeat_deck = any(h.repeat_deck for h in parser.hands)
    hands = [h for h in parser.hands if h.cards or h.standalone or not h.repeat_deck]

    # Attach standalone input cards (e.g. a bare Altitude) to the one card
    # in the hand that can take them.
    for hand in hands:
        for item in hand.standalone:
            candidates = []
            for pending in hand.cards:
                try:
                    slot = parser._match_slot(pending, item.preferred_slot, item.produces,
                                              item.line, item.col)
                except ParseError:
                    continue
                candidates.append((pending, slot))
            if not candidates:
                raise ParseError(f"no card in this hand can take {item.card_name}",
                                 item.line, item.col)
            if len(candidates) > 1:
                names = ", ".join(c[0].descriptor.name for c in candidates)
                raise ParseError(f"{item.card_name} could stack on any of: {names}",
                                 item.line, item.col)
            pending, slot = candidates[0]
            spec = pending.descriptor.input_slot(slot)
            assert spec is not None
            pending.bindings.append(
                (slot, parser._typed_literal(item.raw, spec.kind, item.line, item.col)))

    index_by_label: dict[tuple[int, str | None], int] = {}
    for index, hand in enumerate(hands):
        index_by_label[(hand.step, hand.arm)] = index
    max_step = max(h.step for h in hands)

    def resolve_label(owner: _PendingHand, label: str, line: int) -> int:
        m = re.match(r"^(\d+)([A-Za-z])?$", label)
        if m and m.group(2):
            key = (int(m.group(1)), m.group(2).lower())
            if key not in index_by_label:
                raise BranchLabelUnresolved(label, line)
            return index_by_label[key]
        if m:
            number = int(m.group(1))
            if (number, None) in index_by_label:
                return index_by_label[(number, None)]
            for hand in hands:  # a step that only has arms: take its first arm
                if hand.step == number:
                    return index_by_label[(hand.step, hand.arm)]
            if number == max_step + 1 or number == len(hands) + 1:
                return len(hands)  # exit sentinel
            raise BranchLabelUnresolved(label, line)
        if len(label) == 1 and label.isalpha():
            key = (owner.step + 1, label.lower())
            if key not in index_by_label:
                raise BranchLabelUnresolved(label, line)
            return index_by_label[key]
        raise BranchLabelUnresolved(label, line)

    # Assign instance ids in reading order.
    ids: dict[int, list[str]] = {}
    for index, hand in enumerate(hands):
        ids[index] = []
        for pending in hand.cards:
            if pending.explicit_id is not None:
                ids[index].append(pending.explicit_id)
            else:
                ids[index].append(parser._auto_id(pending.descriptor.name))

    def positional_cond(hand_pos: int, ast) -> Cond:
        kind = ast[0]
        if kind == "leaf":
            idx = ast[1]
            if idx >= len(ids[hand_pos]):
                raise ParseError(
                    f"condition letter {chr(ord('A') + idx)} exceeds the hand's "
                    f"{len(ids[hand_pos])} action cards", ast[2], ast[3])
            return CondLeaf(ids[hand_pos][idx])
        if kind == "not":
            return CondNot(positional_cond(hand_pos, ast[1]))
        children = tuple(positional_cond(hand_pos, c) for c in ast[1])
        return CondAnd(children) if kind == "and" else CondOr(children)

    def completion_cond(hand: _PendingHand, hand_pos: int,
                        member_indices: list[int] | None) -> Cond:
        pool = member_indices if member_indices else range(len(hand.cards))
        ending = [i for i in pool if hand.cards[i].descriptor.ends]
        chosen = ending or list(pool)
        leaves = tuple(CondLeaf(ids[hand_pos][i]) for i in chosen)
        if len(leaves) == 1:
            return leaves[0]
        if member_indices is None and hand.any_rule:
            return CondOr(leaves)
        return CondAnd(leaves)

    declared = parser.token_decls
    auto_tokens = declared is None
    if auto_tokens:
        needed: list[str] = []
        for hand in hands:
            for pending in hand.cards:
                for slot in pending.descriptor.token_slots:
                    if slot.token_type not in needed:
                        needed.append(slot.token_type)
        declared = [TokenDecl(t, t) for t in sorted(needed)]
    by_type: dict[str, str] = {}
    for decl in declared:
        by_type.setdefault(decl.token_type, decl.token_id)

    model_hands = []
    for index, hand in enumerate(hands):
        cards = []
        for pos, pending in enumerate(hand.cards):
            token_bindings = {}
            for slot in pending.descriptor.token_slots:
                token_bindings[slot.slot_name] = by_type.get(slot.token_type, slot.token_type)
            cards.append(CardInstance(
                instance_id=ids[index][pos],
                descriptor_path=pending.descriptor.path,
                input_bindings=tuple(InputBinding(slot, source)
                                     for slot, source in pending.bindings),
                token_bindings=token_bindings,
            ))

        branches = []
        for directive in hand.branch_dirs:
            target = resolve_label(hand, directive.label, directive.line)
            if directive.cond_ast is not None:
                condition = positional_cond(index, directive.cond_ast)
            else:
                condition = completion_cond(hand, index, directive.member_indices)
            branches.append(BranchSpec(condition, target))

        # Arm hands jump over their sibling arms once they complete.
        if hand.arm is not None:
            following = [j for j in range(index + 1, len(hands)) if hands[j].arm is None]
            target = following[0] if following else len(hands)
            if target != index + 1 and hand.cards:
                ending = [i for i in range(len(hand.cards)) if hand.cards[i].descriptor.ends]
                if ending:
                    branches.append(BranchSpec(completion_cond(hand, index, None), target))

        model_hands.append(Hand(
            hand_index=index,
            cards=tuple(cards),
            rule=SatisfactionRule.ANY if hand.any_rule else SatisfactionRule.ALL,
            branches=tuple(branches),
            repeat_count=hand.repeat_extra,
        ))

    try:
        return Deck(
            deck_id=parser.deck_id,
            declared_tokens=tuple(declared),
            hands=tuple(model_hands),
            repeat_deck=repeat_deck,
            implicit_land=parser.implicit_land,
        )
    except ModelError as exc:
        # Model invariants double as the parser's last line of defense.
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _format_float(value: float) -> str:
    return repr(value)


def _literal_repr(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _format_float(value)
    if isinstance(value, str):
        if "]" in value or "[" in value:
            raise ValueError(f"text literal {value!r} cannot be written in notation")
        return value
    if isinstance(value, dict):
        keys = tuple(sorted(value))
        if keys == ("alt", "lat", "lon"):
            return ", ".join(_format_float(value[k]) for k in ("lat", "lon", "alt"))
        if keys == ("latMax", "latMin", "lonMax", "lonMin"):
            return ", ".join(_format_float(value[k])
                             for k in ("latMin", "latMax", "lonMin", "lonMax"))
        if keys == ("east", "north", "up"):
            return ", ".join(_format_float(value[k]) for k in ("east", "north", "up"))
    raise ValueError(f"literal {value!r} has no notation form")


def _input_card_name(slot_name: str, kind: DataKind) -> str:
    if slot_name == "avoid" and kind.tag is ValueTag.BOUNDING_BOX:
        return "Avoid"
    name = _KIND_TO_INPUT_CARD.get(kind.tag)
    if name is None:
        raise ValueError(f"no input card stands for kind {kind}")
    return name


def _term_repr(slot_name: str, kind: DataKind, source: Source) -> str:
    if isinstance(source, Literal):
        return f"{_input_card_name(slot_name, kind)} [{_literal_repr(source.value)}]"
    index = f"[{source.index}]" if source.index is not None else ""
    return f"Yield({source.hand + 1}.{source.card}.{source.name}{index})"


def _cond_repr(cond: Cond, positions: dict[str, int]) -> str:
    if isinstance(cond, CondLeaf):
        index = positions.get(cond.card)
        if index is None or index >= 26:
            raise ValueError(f"condition references {cond.card!r}, which has no "
                             "positional letter")
        return chr(ord("A") + index)
    if isinstance(cond, CondNot):
        return f"NOT({_cond_repr(cond.child, positions)})"
    op = "AND" if isinstance(cond, CondAnd) else "OR"
    return f"{op}({', '.join(_cond_repr(c, positions) for c in cond.children)})"


def print_notation(deck: Deck, catalog: Catalog) -> str:
    """Render a deck as notation text; parse_notation(print_notation(d)) == d."""
    lines = [f"Deck: {deck.deck_id}" + ("" if deck.implicit_land else " no-implicit-land")]
    if deck.declared_tokens:
        decls = ", ".join(
            t.token_id if t.token_id == t.token_type else f"{t.token_id}:{t.token_type}"
            for t in deck.declared_tokens)
        lines.append(f"Tokens: {decls}")

    for hand in deck.hands:
        items = []
        positions = {card.instance_id: i for i, card in enumerate(hand.cards)}
        for card in hand.cards:
            descriptor = catalog.lookup(card.descriptor_path)
            text = f"{descriptor.name}#{card.instance_id}"
            terms = []
            for slot in descriptor.input_slots:
                source = card.binding(slot.name)
                if source is not None:
                    terms.append(_term_repr(slot.name, slot.kind, source))
            if len(terms) == 1:
                text += f" {ARROW} {terms[0]}"
            elif terms:
                text += f" {ARROW} ({' + '.join(terms)})"
            items.append(text)
        if hand.rule is SatisfactionRule.ANY:
            items.append("Any")
        if hand.repeat_count:
            items.append(f"Repeat({hand.repeat_count + 1})")
        if deck.repeat_deck and hand.hand_index == len(deck.hands) - 1:
            items.append("RepeatDeck")
        for spec in hand.branches:
            items.append(
                "{" + _cond_repr(spec.condition, positions) + f" ; Branch({spec.target + 1})" + "}")
        lines.append(f"Hand {hand.hand_index + 1}: " + " ; ".join(items))
    return "\n".join(lines) + "\n"
