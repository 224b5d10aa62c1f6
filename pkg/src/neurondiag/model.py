"""Core value types for layered neuron diagrams.

A diagram is a column-layered acyclic graph. Each neuron sits in one time
column and either fires ("on") or stays quiet ("off"). Arrows carry
stimulation; dot-headed lines carry inhibition. A neuron with a double
border needs two stimulating signals, which is modelled here as a firing
threshold of 2.

All types are immutable values. Diagram construction normalises neuron and
edge order, so two diagrams built from the same elements in different
orders compare equal. Stipulation order is preserved: the English
transcription narrates firing sources in the order they were stipulated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence

ID_PATTERN = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"


class DiagramError(Exception):
    """Base class for diagram construction and lookup failures."""


class UnknownNeuronError(DiagramError):
    """A referenced neuron id is not declared in the diagram."""


class InvalidDiagramError(DiagramError):
    """A diagram (or stipulation) failed structural validation."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = tuple(violations)
        detail = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid diagram: {detail}")


class Polarity(Enum):
    """Whether an event is the firing (+) or non-firing (-) of its neuron."""

    PLUS = "+"
    MINUS = "-"

    def flipped(self) -> "Polarity":
        return Polarity.MINUS if self is Polarity.PLUS else Polarity.PLUS


class EdgeKind(Enum):
    STIMULATORY = "stim"
    INHIBITORY = "inhib"


@dataclass(frozen=True)
class Neuron:
    """One node of a diagram.

    time is the 1-based column index; threshold is the number of firing
    stimulatory parents needed for the neuron to fire (1 for ordinary
    neurons, 2 for double-border neurons).
    """

    id: str
    time: int
    threshold: int = 1


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind


@dataclass(frozen=True)
class Event:
    """A neuron paired with its polarity, e.g. the firing of C."""

    neuron: str
    polarity: Polarity

    @classmethod
    def from_token(cls, token: str) -> "Event":
        """Build from compact notation like "C+" or "B-"."""
        token = token.strip()
        if len(token) < 2 or token[-1] not in "+-":
            raise ValueError(f"malformed event token {token!r}")
        return cls(token[:-1], Polarity(token[-1]))

    @property
    def token(self) -> str:
        return f"{self.neuron}{self.polarity.value}"

    def render(self, diagram: "Diagram") -> str:
        """Compact notation with the time slice, e.g. "C+(t1)"."""
        time = diagram.neuron_map[self.neuron].time
        return f"{self.neuron}{self.polarity.value}(t{time})"


@dataclass(frozen=True)
class Stipulation:
    """The sources declared to fire. Order is significant for transcription."""

    firing_sources: tuple[str, ...] = ()

    def __contains__(self, neuron_id: str) -> bool:
        return neuron_id in self.firing_sources


@dataclass(frozen=True)
class Intervention:
    """An external clamp forcing one neuron on or off."""

    neuron: str
    state: bool


@dataclass(frozen=True)
class Violation:
    code: str
    severity: str
    subject: str
    message: str


@dataclass(frozen=True)
class Diagram:
    id: str
    columns: int
    neurons: tuple[Neuron, ...]
    edges: tuple[Edge, ...]

    def __init__(
        self,
        id: str,
        columns: int,
        neurons: Iterable[Neuron],
        edges: Iterable[Edge],
    ):
        # Normalise element order so value equality ignores input order.
        neurons = tuple(sorted(neurons, key=lambda n: (n.time, n.id)))
        times = {n.id: n.time for n in neurons}
        big = 10**9  # undeclared endpoints sort last; validate() reports them
        edges = tuple(
            sorted(
                edges,
                key=lambda e: (
                    times.get(e.src, big),
                    e.src,
                    times.get(e.dst, big),
                    e.dst,
                    e.kind.value,
                ),
            )
        )
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "neurons", neurons)
        object.__setattr__(self, "edges", edges)

    @cached_property
    def neuron_map(self) -> dict[str, Neuron]:
        return {n.id: n for n in self.neurons}

    @cached_property
    def by_time(self) -> tuple[Neuron, ...]:
        return self.neurons  # already sorted by (time, id)

    @cached_property
    def stim_parents(self) -> dict[str, tuple[str, ...]]:
        return self._parents(EdgeKind.STIMULATORY)

    @cached_property
    def inhib_parents(self) -> dict[str, tuple[str, ...]]:
        return self._parents(EdgeKind.INHIBITORY)

    def _parents(self, kind: EdgeKind) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.neurons}
        for e in self.edges:
            if e.kind is kind and e.dst in out and e.src in self.neuron_map:
                out[e.dst].append(e.src)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def out_edges(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {n.id: [] for n in self.neurons}
        for e in self.edges:
            if e.src in out and e.dst in self.neuron_map:
                out[e.src].append(e)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def in_edges(self) -> dict[str, tuple[Edge, ...]]:
        out: dict[str, list[Edge]] = {n.id: [] for n in self.neurons}
        for e in self.edges:
            if e.dst in out and e.src in self.neuron_map:
                out[e.dst].append(e)
        return {k: tuple(v) for k, v in out.items()}

    def out_degree(self, neuron_id: str) -> int:
        if neuron_id not in self.neuron_map:
            raise UnknownNeuronError(neuron_id)
        return len(self.out_edges[neuron_id])

    @cached_property
    def source_ids(self) -> frozenset[str]:
        """Neurons with no incoming stimulatory edge."""
        return frozenset(n.id for n in self.neurons if not self.stim_parents[n.id])

    @cached_property
    def structural_violations(self) -> tuple[Violation, ...]:
        return tuple(_check_structure(self))


def _check_structure(diagram: Diagram) -> list[Violation]:
    out: list[Violation] = []
    if diagram.columns < 1:
        out.append(
            Violation(
                "bad-columns",
                SEVERITY_ERROR,
                diagram.id,
                f"column count must be positive, got {diagram.columns}",
            )
        )
    if not ID_PATTERN.match(diagram.id):
        out.append(
            Violation(
                "bad-id",
                SEVERITY_ERROR,
                diagram.id,
                f"diagram id {diagram.id!r} is not a valid identifier",
            )
        )
    seen: set[str] = set()
    for n in diagram.neurons:
        if not ID_PATTERN.match(n.id):
            out.append(
                Violation(
                    "bad-id",
                    SEVERITY_ERROR,
                    n.id,
                    f"neuron id {n.id!r} is not a valid identifier",
                )
            )
        if n.id in seen:
            out.append(
                Violation(
                    "dup-neuron",
                    SEVERITY_ERROR,
                    n.id,
                    f"neuron {n.id} declared more than once",
                )
            )
        seen.add(n.id)
        if not 1 <= n.time <= diagram.columns:
            out.append(
                Violation(
                    "bad-time",
                    SEVERITY_ERROR,
                    n.id,
                    f"neuron {n.id} at t{n.time}, outside 1..{diagram.columns}",
                )
            )
        if n.threshold < 1:
            out.append(
                Violation(
                    "bad-threshold",
                    SEVERITY_ERROR,
                    n.id,
                    f"neuron {n.id} threshold must be at least 1",
                )
            )
        elif n.threshold > 2:
            out.append(
                Violation(
                    "high-threshold",
                    SEVERITY_WARNING,
                    n.id,
                    f"neuron {n.id} threshold {n.threshold} exceeds 2",
                )
            )
    seen_edges: set[Edge] = set()
    for e in diagram.edges:
        label = f"{e.src}->{e.dst} ({e.kind.value})"
        missing = [x for x in (e.src, e.dst) if x not in diagram.neuron_map]
        if missing:
            out.append(
                Violation(
                    "unknown-endpoint",
                    SEVERITY_ERROR,
                    label,
                    f"edge {label} names undeclared neuron(s) {', '.join(missing)}",
                )
            )
            continue
        src_t = diagram.neuron_map[e.src].time
        dst_t = diagram.neuron_map[e.dst].time
        if src_t >= dst_t:
            out.append(
                Violation(
                    "backward-edge",
                    SEVERITY_ERROR,
                    label,
                    f"edge {label} runs from t{src_t} to t{dst_t}; "
                    "edges must move strictly forward in time",
                )
            )
        if e in seen_edges:
            out.append(
                Violation(
                    "dup-edge",
                    SEVERITY_ERROR,
                    label,
                    f"edge {label} declared more than once",
                )
            )
        seen_edges.add(e)
    return out


def validate(
    diagram: Diagram, stipulation: Optional[Stipulation] = None
) -> list[Violation]:
    """Check every structural invariant; violations are data, not failures.

    The returned list is empty for a well-formed diagram (warnings, such as
    a threshold above 2, are reported but do not make a diagram invalid in
    the eyes of :func:`is_valid`).
    """
    out = list(diagram.structural_violations)
    if stipulation is not None:
        seen: set[str] = set()
        for nid in stipulation.firing_sources:
            if nid in seen:
                out.append(
                    Violation(
                        "dup-stipulated",
                        SEVERITY_ERROR,
                        nid,
                        f"neuron {nid} stipulated more than once",
                    )
                )
            seen.add(nid)
            if nid not in diagram.neuron_map:
                out.append(
                    Violation(
                        "unknown-source",
                        SEVERITY_ERROR,
                        nid,
                        f"stipulated neuron {nid} is not declared",
                    )
                )
            elif nid not in diagram.source_ids:
                out.append(
                    Violation(
                        "stipulated-nonsource",
                        SEVERITY_ERROR,
                        nid,
                        f"stipulated neuron {nid} has a stimulatory parent "
                        "and is not a source",
                    )
                )
    return out


def is_valid(diagram: Diagram, stipulation: Optional[Stipulation] = None) -> bool:
    """True when no error-severity violation exists."""
    return not any(
        v.severity == SEVERITY_ERROR for v in validate(diagram, stipulation)
    )


def ensure_valid(diagram: Diagram, stipulation: Optional[Stipulation] = None) -> None:
    errors = [
        v
        for v in validate(diagram, stipulation)
        if v.severity == SEVERITY_ERROR
    ]
    if errors:
        raise InvalidDiagramError(errors)


def clamp(diagram: Diagram, neuron: str, state: bool) -> Intervention:
    """Describe an external intervention forcing ``neuron`` on or off.

    When the resulting record is passed to the simulator, the clamped
    neuron takes the forced state regardless of its parents, the
    stipulation, or inhibition.
    """
    if neuron not in diagram.neuron_map:
        raise UnknownNeuronError(neuron)
    return Intervention(neuron, state)


def diagram_to_json(
    diagram: Diagram, stipulation: Optional[Stipulation] = None
) -> dict:
    """Canonical JSON shape: arrays sorted by (time, id)."""
    times = {n.id: n.time for n in diagram.neurons}
    doc: dict = {
        "id": diagram.id,
        "columns": diagram.columns,
        "neurons": [
            {"id": n.id, "time": n.time, "threshold": n.threshold}
            for n in diagram.neurons
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "kind": e.kind.value}
            for e in diagram.edges
        ],
    }
    if stipulation is not None:
        doc["firing_sources"] = sorted(
            stipulation.firing_sources, key=lambda nid: (times.get(nid, 0), nid)
        )
    return doc
