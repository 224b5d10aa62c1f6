"""Line-oriented textual format for neuron diagrams (``.ndg`` files).

Grammar, one statement per line, ``#`` starts a comment::

    diagram IDENT            # header, must come first
    times INT                # number of columns, before any neuron
    neuron IDENT @ INT [threshold INT]
    stim IDENT -> IDENT
    inhib IDENT -> IDENT
    fire IDENT+              # stipulated sources, optional, at most once
    ask IDENT                # target neuron, required

Identifiers match ``[A-Za-z][A-Za-z0-9]*``. Neurons must be declared
before any statement references them. The parser reports the first error
with line and column plus a hint about what was expected, and guarantees
that a successfully parsed triple passes validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    Diagram,
    Edge,
    EdgeKind,
    ID_PATTERN,
    Neuron,
    SEVERITY_ERROR,
    Stipulation,
    validate,
)


class DslParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class ParsedDiagram:
    diagram: Diagram
    stipulation: Stipulation
    target: str


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    col: int


def _tokenize_line(text: str, line_no: int) -> list[_Token]:
    body = text.split("#", 1)[0]
    tokens = []
    col = 1
    i = 0
    while i < len(body):
        if body[i].isspace():
            i += 1
            continue
        start = i
        while i < len(body) and not body[i].isspace():
            i += 1
        tokens.append(_Token(body[start:i], line_no, start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.diagram_id: Optional[str] = None
        self.columns: Optional[int] = None
        self.neurons: list[Neuron] = []
        self.neuron_ids: set[str] = set()
        self.edges: list[Edge] = []
        self.edge_keys: set[tuple[str, str, EdgeKind]] = set()
        self.fire: Optional[tuple[str, ...]] = None
        self.target: Optional[str] = None

    def fail(self, tok: _Token, message: str) -> None:
        raise DslParseError(tok.line, tok.col, message)

    def ident(self, tok: _Token, role: str) -> str:
        if not ID_PATTERN.match(tok.text):
            self.fail(tok, f"{tok.text!r} is not a valid {role} identifier")
        return tok.text

    def integer(self, tok: _Token, role: str) -> int:
        if not tok.text.isdigit():
            self.fail(tok, f"expected {role} integer, got {tok.text!r}")
        return int(tok.text)

    def known_neuron(self, tok: _Token) -> str:
        if tok.text not in self.neuron_ids:
            self.fail(
                tok,
                f"unknown neuron {tok.text!r} (expected a declared neuron id)",
            )
        return tok.text

    def expect_count(self, tokens: list[_Token], n: int, usage: str) -> None:
        if len(tokens) != n:
            tok = tokens[min(len(tokens) - 1, n - 1)] if len(tokens) > 1 else tokens[0]
            self.fail(tok, f"malformed statement, expected {usage}")

    def parse(self) -> ParsedDiagram:
        saw_any = False
        for line_no, raw in enumerate(self.lines, start=1):
            tokens = _tokenize_line(raw, line_no)
            if not tokens:
                continue
            head = tokens[0]
            if not saw_any and head.text != "diagram":
                self.fail(head, "missing diagram header (expected 'diagram IDENT')")
            saw_any = True
            handler = getattr(self, f"_stmt_{head.text}", None)
            if handler is None:
                self.fail(
                    head,
                    f"unknown statement {head.text!r} (expected one of diagram, "
                    "times, neuron, stim, inhib, fire, ask)",
                )
            handler(tokens)
        if not saw_any:
            raise DslParseError(1, 1, "missing diagram header")
        eof_line = len(self.lines)
        if self.columns is None:
            raise DslParseError(eof_line, 1, "missing times statement")
        if self.target is None:
            raise DslParseError(eof_line, 1, "missing ask statement")
        diagram = Diagram(
            self.diagram_id, self.columns, self.neurons, self.edges
        )
        stipulation = Stipulation(self.fire or ())
        errors = [
            v
            for v in validate(diagram, stipulation)
            if v.severity == SEVERITY_ERROR
        ]
        if errors:
            # Everything positional is caught statement-by-statement above;
            # anything left is an internal inconsistency.
            raise DslParseError(eof_line, 1, errors[0].message)
        return ParsedDiagram(diagram, stipulation, self.target)

    def _stmt_diagram(self, tokens: list[_Token]) -> None:
        if self.diagram_id is not None:
            self.fail(tokens[0], "duplicate diagram header")
        self.expect_count(tokens, 2, "'diagram IDENT'")
        self.diagram_id = self.ident(tokens[1], "diagram")

    def _stmt_times(self, tokens: list[_Token]) -> None:
        if self.columns is not None:
            self.fail(tokens[0], "duplicate times statement")
        self.expect_count(tokens, 2, "'times INT'")
        value = self.integer(tokens[1], "column-count")
        if value < 1:
            self.fail(tokens[1], "column count must be at least 1")
        self.columns = value

    def _stmt_neuron(self, tokens: list[_Token]) -> None:
        if self.columns is None:
            self.fail(tokens[0], "times must be declared before neurons")
        if len(tokens) not in (4, 6):
            self.expect_count(tokens, 4, "'neuron IDENT @ INT [threshold INT]'")
        nid = self.ident(tokens[1], "neuron")
        if nid in self.neuron_ids:
            self.fail(tokens[1], f"duplicate declaration of neuron {nid}")
        if tokens[2].text != "@":
            self.fail(tokens[2], "expected '@' between neuron id and time")
        time = self.integer(tokens[3], "time")
        if not 1 <= time <= self.columns:
            self.fail(
                tokens[3],
                f"neuron time t{time} outside declared range 1..{self.columns}",
            )
        threshold = 1
        if len(tokens) == 6:
            if tokens[4].text != "threshold":
                self.fail(tokens[4], "expected 'threshold INT'")
            threshold = self.integer(tokens[5], "threshold")
            if threshold < 1:
                self.fail(tokens[5], "threshold must be at least 1")
        self.neurons.append(Neuron(nid, time, threshold))
        self.neuron_ids.add(nid)

    def _edge(self, tokens: list[_Token], kind: EdgeKind) -> None:
        self.expect_count(tokens, 4, f"'{kind.value} IDENT -> IDENT'")
        src = self.known_neuron(tokens[1])
        if tokens[2].text != "->":
            self.fail(tokens[2], "expected '->' between edge endpoints")
        dst = self.known_neuron(tokens[3])
        src_t = next(n.time for n in self.neurons if n.id == src)
        dst_t = next(n.time for n in self.neurons if n.id == dst)
        if src_t >= dst_t:
            self.fail(
                tokens[3],
                f"edge {src}->{dst} runs from t{src_t} to t{dst_t}; "
                "edges must move strictly forward in time",
            )
        key = (src, dst, kind)
        if key in self.edge_keys:
            self.fail(tokens[1], f"duplicate {kind.value} edge {src}->{dst}")
        self.edge_keys.add(key)
        self.edges.append(Edge(src, dst, kind))

    def _stmt_stim(self, tokens: list[_Token]) -> None:
        self._edge(tokens, EdgeKind.STIMULATORY)

    def _stmt_inhib(self, tokens: list[_Token]) -> None:
        self._edge(tokens, EdgeKind.INHIBITORY)

    def _stmt_fire(self, tokens: list[_Token]) -> None:
        if self.fire is not None:
            self.fail(tokens[0], "duplicate fire statement")
        if len(tokens) < 2:
            self.fail(tokens[0], "fire needs at least one neuron id")
        ids = []
        for tok in tokens[1:]:
            nid = self.known_neuron(tok)
            if nid in ids:
                self.fail(tok, f"neuron {nid} stipulated more than once")
            stim_parents = [
                e for e in self.edges
                if e.dst == nid and e.kind is EdgeKind.STIMULATORY
            ]
            if stim_parents:
                self.fail(
                    tok,
                    f"neuron {nid} has a stimulatory parent and cannot be "
                    "stipulated (only sources fire by stipulation)",
                )
            ids.append(nid)
        self.fire = tuple(ids)

    def _stmt_ask(self, tokens: list[_Token]) -> None:
        if self.target is not None:
            self.fail(tokens[0], "duplicate ask statement")
        self.expect_count(tokens, 2, "'ask IDENT'")
        self.target = self.known_neuron(tokens[1])


def parse_diagram(text: str) -> ParsedDiagram:
    """Parse ``.ndg`` text into a diagram, stipulation and target neuron."""
    return _Parser(text).parse()


def serialize_diagram(
    diagram: Diagram, stipulation: Stipulation, target: str
) -> str:
    """Canonical, byte-deterministic ``.ndg`` text.

    Neurons are written by (time, id) and edges by (src time, src, dst,
    kind); the stipulation keeps its stored order. ``parse_diagram``
    applied to the output reproduces the input values exactly.
    """
    lines = [f"diagram {diagram.id}", f"times {diagram.columns}"]
    for n in diagram.neurons:
        suffix = f" threshold {n.threshold}" if n.threshold != 1 else ""
        lines.append(f"neuron {n.id} @ {n.time}{suffix}")
    for e in diagram.edges:
        lines.append(f"{e.kind.value} {e.src} -> {e.dst}")
    if stipulation.firing_sources:
        lines.append("fire " + " ".join(stipulation.firing_sources))
    lines.append(f"ask {target}")
    return "\n".join(lines) + "\n"
