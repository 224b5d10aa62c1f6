"""Seeded random generation of valid diagrams plus complexity metrics.

The generator draws a rows-by-columns grid of neurons and wires adjacent
columns only, so the crossing metric stays well defined. All randomness
comes from a Mersenne Twister (``random.Random``) seeded with the given
64-bit seed, which CPython guarantees to be reproducible across platforms;
the same seed always yields the same serialized diagram.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .model import (
    Diagram,
    Edge,
    EdgeKind,
    Event,
    Neuron,
    Polarity,
    Stipulation,
)
from .simulate import simulate

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

# How many independent re-draws generate() makes before giving up on the
# reachability requirement.
RETRY_BUDGET = 100


class GenerationError(Exception):
    """Generation could not satisfy the requested constraints."""


class InfeasibleParamsError(GenerationError):
    """The parameters themselves rule out any valid diagram."""


@dataclass(frozen=True)
class GenParams:
    columns: int
    rows: int
    stim_density: float = 0.6
    inhib_probability: float = 0.2
    threshold2_probability: float = 0.15
    seed: int = 0
    require_target_reachable: bool = False

    def __post_init__(self):
        if self.columns < 2:
            raise InfeasibleParamsError("columns must be at least 2")
        if not 1 <= self.rows <= len(LETTERS):
            raise InfeasibleParamsError(
                f"rows must be between 1 and {len(LETTERS)}"
            )
        for name in ("stim_density", "inhib_probability", "threshold2_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InfeasibleParamsError(f"{name} must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise InfeasibleParamsError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ComplexityProfile:
    """Numeric difficulty measures for one diagram under one stipulation.

    ``blocked`` counts neurons with at least one factually firing
    inhibitory parent. ``crossings`` counts intersecting pairs of
    adjacent-column edges in the stored row layout; it is a layout notion
    with no canonical graph definition, so the count is a stand-in tied to
    this package's row assignment (alphabetical within each column).
    """

    neurons: int
    columns: int
    forks: int
    blocked: int
    crossings: int
    threshold2: int

    def to_json(self) -> dict:
        return {
            "neurons": self.neurons,
            "columns": self.columns,
            "forks": self.forks,
            "blocked": self.blocked,
            "crossings": self.crossings,
            "threshold2": self.threshold2,
        }


def _neuron_id(row: int, col: int) -> str:
    return f"{LETTERS[row]}{col}"


def _reachable_from_any(diagram: Diagram, sources: list[str], target: str) -> bool:
    seen = set(sources)
    frontier = list(sources)
    while frontier:
        cur = frontier.pop()
        if cur == target:
            return True
        for e in diagram.out_edges[cur]:
            if e.dst not in seen:
                seen.add(e.dst)
                frontier.append(e.dst)
    return target in seen


def generate(params: GenParams) -> tuple[Diagram, Stipulation, Event]:
    """Draw one valid diagram; a pure function of the seed.

    Edges run column-to-next-column only. Each ordered pair gets at most
    one edge: stimulatory with probability ``stim_density``, otherwise
    inhibitory with probability ``inhib_probability``. The stipulation is
    a nonempty subset of the first column; the target is one last-column
    neuron whose event polarity is whatever the factual simulation yields.
    """
    rng = random.Random(params.seed)
    for _ in range(RETRY_BUDGET):
        edges: list[Edge] = []
        stim_in: dict[str, int] = {}
        for col in range(1, params.columns):
            for src_row in range(params.rows):
                for dst_row in range(params.rows):
                    src = _neuron_id(src_row, col)
                    dst = _neuron_id(dst_row, col + 1)
                    if rng.random() < params.stim_density:
                        edges.append(Edge(src, dst, EdgeKind.STIMULATORY))
                        stim_in[dst] = stim_in.get(dst, 0) + 1
                    elif rng.random() < params.inhib_probability:
                        edges.append(Edge(src, dst, EdgeKind.INHIBITORY))
        neurons = []
        for col in range(1, params.columns + 1):
            for row in range(params.rows):
                nid = _neuron_id(row, col)
                threshold = 1
                if stim_in.get(nid, 0) >= 2 and rng.random() < params.threshold2_probability:
                    threshold = 2
                neurons.append(Neuron(nid, col, threshold))
        firing = [
            _neuron_id(row, 1)
            for row in range(params.rows)
            if rng.random() < 0.5
        ]
        if not firing:
            firing = [_neuron_id(rng.randrange(params.rows), 1)]
        target_id = _neuron_id(rng.randrange(params.rows), params.columns)
        diagram = Diagram(f"gen{params.seed}", params.columns, neurons, edges)
        if params.require_target_reachable and not _reachable_from_any(
            diagram, firing, target_id
        ):
            continue
        stipulation = Stipulation(tuple(firing))
        assignment = simulate(diagram, stipulation)
        polarity = Polarity.PLUS if assignment[target_id] else Polarity.MINUS
        return diagram, stipulation, Event(target_id, polarity)
    raise GenerationError(
        f"no diagram with a reachable target within {RETRY_BUDGET} draws "
        f"for seed {params.seed}"
    )


def row_layout(diagram: Diagram) -> dict[str, int]:
    """Row index of each neuron: its id rank within its column."""
    rows: dict[str, int] = {}
    by_col: dict[int, list[str]] = {}
    for n in diagram.neurons:
        by_col.setdefault(n.time, []).append(n.id)
    for ids in by_col.values():
        for idx, nid in enumerate(sorted(ids)):
            rows[nid] = idx
    return rows


def complexity(diagram: Diagram, stipulation: Stipulation) -> ComplexityProfile:
    """Deterministic complexity counts against the factual simulation."""
    assignment = simulate(diagram, stipulation)
    forks = sum(1 for n in diagram.neurons if len(diagram.out_edges[n.id]) >= 2)
    blocked = sum(
        1
        for n in diagram.neurons
        if any(assignment[p] for p in diagram.inhib_parents[n.id])
    )
    threshold2 = sum(1 for n in diagram.neurons if n.threshold >= 2)
    rows = row_layout(diagram)
    times = {n.id: n.time for n in diagram.neurons}
    crossings = 0
    spans: dict[int, list[Edge]] = {}
    for e in diagram.edges:
        if times[e.dst] - times[e.src] == 1:
            spans.setdefault(times[e.src], []).append(e)
    for group in spans.values():
        for i, e1 in enumerate(group):
            for e2 in group[i + 1:]:
                d_src = rows[e1.src] - rows[e2.src]
                d_dst = rows[e1.dst] - rows[e2.dst]
                if d_src * d_dst < 0:
                    crossings += 1
    return ComplexityProfile(
        neurons=len(diagram.neurons),
        columns=diagram.columns,
        forks=forks,
        blocked=blocked,
        crossings=crossings,
        threshold2=threshold2,
    )
