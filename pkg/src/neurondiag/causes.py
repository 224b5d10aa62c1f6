"""Counterfactual cause identification on neuron diagrams.

An actual event X is a cause of a later actual event Y when flipping X in
a counterfactual run flips Y, under these rules:

* Ceteris paribus: neurons not forward-connected to X keep their factual
  states; nothing upstream of X is touched.
* If the X-neuron is off, or has a single outgoing connection, the plain
  flip-and-propagate counterfactual decides the verdict.
* If the X-neuron is on and bifurcating (two or more outgoing connections
  of either kind), the flip is evaluated with off-path blocking kept
  maximal: every inhibition that was active in the factual run and whose
  target lies off the direct path stays active in the counterfactual run,
  even when its source no longer fires.

The direct path is the shortest X-to-Y path once redundant neurons
(exactly one connection in and out, same state as their unique parent)
are collapsed onto that parent. When several paths tie for shortest, the
verdict is computed for every one of them and must be unanimous; a
deterministic lexicographic representative is kept for trace display.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional

from .model import (
    Diagram,
    DiagramError,
    Edge,
    EdgeKind,
    Event,
    Polarity,
    Stipulation,
    UnknownNeuronError,
)
from .simulate import FiringAssignment, simulate


class NoPathError(DiagramError):
    """No edge-contiguous forward path connects the two neurons."""


class PolarityMismatchError(DiagramError):
    """A queried event's polarity contradicts the factual assignment."""


class TieDisagreementError(DiagramError):
    """Tied shortest direct paths produced different verdicts.

    Never resolved silently: the cause rule asserts the choice between
    tied paths cannot matter, so a disagreement is a reportable finding.
    """

    def __init__(self, x: Event, y: Event, verdicts: Mapping[tuple[str, ...], bool]):
        self.x = x
        self.y = y
        self.verdicts = dict(verdicts)
        super().__init__(
            f"tied direct paths disagree for {x.token} -> {y.token}: {self.verdicts}"
        )


class Branch(Enum):
    """Which arm of the cause rule decided a verdict."""

    SIMPLE_COUNTERFACTUAL = "simple-counterfactual"
    OFF_BIFURCATING = "off-bifurcating"
    ON_BIFURCATING_MAX_BLOCKING = "on-bifurcating-max-blocking"


@dataclass(frozen=True)
class CollapsedGraph:
    """Result of merging redundant neurons onto their parents."""

    representatives: Mapping[str, str]
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str, EdgeKind]]


@dataclass(frozen=True)
class PathAnalysis:
    """Every X-to-Y path plus the shortest-path choice used for blocking."""

    all_paths: tuple[tuple[str, ...], ...]
    collapsed_shortest: tuple[tuple[str, ...], ...]
    chosen_direct: Optional[tuple[str, ...]]
    off_path: frozenset[str]


@dataclass(frozen=True)
class CauseVerdict:
    x: Event
    y: Event
    is_cause: bool
    branch: Branch
    reason: str
    paths: PathAnalysis
    maintained_blockings: frozenset[Edge]
    counterfactual: Optional[FiringAssignment]
    per_tie_verdicts: Mapping[tuple[str, ...], bool]


def is_bifurcating(diagram: Diagram, neuron: str) -> bool:
    """True iff the neuron has two or more outgoing connections of any kind."""
    return diagram.out_degree(neuron) >= 2


def forward_reachable(diagram: Diagram, neuron: str) -> frozenset[str]:
    """All neurons strictly downstream of ``neuron`` over edges of either kind."""
    if neuron not in diagram.neuron_map:
        raise UnknownNeuronError(neuron)
    seen: set[str] = set()
    frontier = [neuron]
    while frontier:
        cur = frontier.pop()
        for e in diagram.out_edges[cur]:
            if e.dst not in seen:
                seen.add(e.dst)
                frontier.append(e.dst)
    return frozenset(seen)


def enumerate_paths(
    diagram: Diagram, x: str, y: str
) -> tuple[tuple[str, ...], ...]:
    """All edge-contiguous forward paths x..y over edges of either kind."""
    for nid in (x, y):
        if nid not in diagram.neuron_map:
            raise UnknownNeuronError(nid)
    paths: list[tuple[str, ...]] = []
    stack: list[str] = [x]

    def walk(cur: str) -> None:
        if cur == y:
            paths.append(tuple(stack))
            return
        for e in diagram.out_edges[cur]:
            stack.append(e.dst)
            walk(e.dst)
            stack.pop()

    walk(x)
    return tuple(sorted(paths))


def collapse_redundant(
    diagram: Diagram, factual: FiringAssignment
) -> CollapsedGraph:
    """Merge every redundant neuron onto its parent, applied to fixpoint.

    A neuron is redundant when it has exactly one incoming and one outgoing
    connection and its on/off state equals its unique parent's state.
    Chains of redundant neurons collapse onto the first non-redundant
    ancestor.
    """
    redundant_parent: dict[str, str] = {}
    for n in diagram.neurons:
        ins = diagram.in_edges[n.id]
        outs = diagram.out_edges[n.id]
        if len(ins) == 1 and len(outs) == 1 and factual[n.id] == factual[ins[0].src]:
            redundant_parent[n.id] = ins[0].src

    reps: dict[str, str] = {}

    def rep(nid: str) -> str:
        if nid in reps:
            return reps[nid]
        cur = nid
        while cur in redundant_parent:
            cur = redundant_parent[cur]
        reps[nid] = cur
        return cur

    representatives = {n.id: rep(n.id) for n in diagram.neurons}
    nodes = frozenset(representatives.values())
    edges = frozenset(
        (representatives[e.src], representatives[e.dst], e.kind)
        for e in diagram.edges
        if representatives[e.src] != representatives[e.dst]
    )
    return CollapsedGraph(representatives, nodes, edges)


def collapsed_length(path: Iterable[str], reps: Mapping[str, str]) -> int:
    """Edge count of a path after mapping nodes onto their representatives."""
    seq: list[str] = []
    for nid in path:
        r = reps[nid]
        if not seq or seq[-1] != r:
            seq.append(r)
    return len(seq) - 1


def direct_paths(
    diagram: Diagram,
    factual: FiringAssignment,
    x: str,
    y: str,
    paths: Optional[tuple[tuple[str, ...], ...]] = None,
) -> PathAnalysis:
    """Compute all x-to-y paths and pick the direct (shortest) candidates.

    Shortness is measured on the collapsed graph; every tied candidate is
    preserved and a deterministic lexicographic representative is chosen
    for display. Raises NoPathError when x cannot reach y.
    """
    if paths is None:
        paths = enumerate_paths(diagram, x, y)
    if not paths:
        raise NoPathError(f"no forward path from {x} to {y}")
    reps = collapse_redundant(diagram, factual).representatives
    lengths = {p: collapsed_length(p, reps) for p in paths}
    best = min(lengths.values())
    shortest = tuple(p for p in paths if lengths[p] == best)
    chosen = min(shortest)
    off = frozenset(n.id for n in diagram.neurons) - set(chosen)
    return PathAnalysis(paths, shortest, chosen, off)


def counterfactual(
    diagram: Diagram,
    stipulation: Stipulation,
    factual: FiringAssignment,
    x: Event,
    maintenance: Optional[Iterable[str]] = None,
) -> FiringAssignment:
    """Flip event x and propagate the consequences forward.

    Every neuron that is not forward-reachable from x keeps its factual
    state; backward consequences are cut off. Forward-reachable neurons are
    re-evaluated in time order against the counterfactual parent states.

    When ``maintenance`` is given, every inhibitory edge that was active in
    the factual run (source factually on) and whose target is in the
    maintenance set counts as active regardless of the source's
    counterfactual state.
    """
    if x.neuron not in diagram.neuron_map:
        raise UnknownNeuronError(x.neuron)
    if factual[x.neuron] != (x.polarity is Polarity.PLUS):
        raise PolarityMismatchError(
            f"event {x.token} does not match the factual state of {x.neuron}"
        )
    maintained = frozenset(maintenance) if maintenance is not None else frozenset()
    reach = forward_reachable(diagram, x.neuron)
    stipulated = set(stipulation.firing_sources)
    states: dict[str, bool] = {}
    for n in diagram.by_time:
        if n.id == x.neuron:
            states[n.id] = not factual[n.id]
            continue
        if n.id not in reach:
            states[n.id] = factual[n.id]
            continue
        inhibited = False
        for p in diagram.inhib_parents[n.id]:
            if states[p] or (factual[p] and n.id in maintained):
                inhibited = True
                break
        stim = diagram.stim_parents[n.id]
        if not stim:
            states[n.id] = n.id in stipulated and not inhibited
        else:
            hits = sum(1 for p in stim if states[p])
            states[n.id] = hits >= n.threshold and not inhibited
    return FiringAssignment(states)


def _branch_for(diagram: Diagram, factual: FiringAssignment, x: str) -> Branch:
    if not is_bifurcating(diagram, x):
        return Branch.SIMPLE_COUNTERFACTUAL
    if factual[x]:
        return Branch.ON_BIFURCATING_MAX_BLOCKING
    return Branch.OFF_BIFURCATING


def is_cause(
    diagram: Diagram,
    stipulation: Stipulation,
    x: Event,
    y: Event,
    factual: Optional[FiringAssignment] = None,
) -> CauseVerdict:
    """Decide whether actual event x is a cause of actual event y.

    Both events must match the factual assignment. Without a forward path
    from x to y the verdict is negative with reason "no-path". For an on,
    bifurcating x the verdict is computed per tied shortest path with
    off-path blocking maintained, and must be unanimous.
    """
    if x.neuron == y.neuron:
        raise ValueError("x and y must name different neurons")
    if factual is None:
        factual = simulate(diagram, stipulation)
    for ev in (x, y):
        if ev.neuron not in diagram.neuron_map:
            raise UnknownNeuronError(ev.neuron)
        if factual[ev.neuron] != (ev.polarity is Polarity.PLUS):
            raise PolarityMismatchError(
                f"event {ev.token} does not match the factual state of {ev.neuron}"
            )
    branch = _branch_for(diagram, factual, x.neuron)
    paths = enumerate_paths(diagram, x.neuron, y.neuron)
    if not paths:
        return CauseVerdict(
            x=x,
            y=y,
            is_cause=False,
            branch=branch,
            reason="no-path",
            paths=PathAnalysis((), (), None, frozenset()),
            maintained_blockings=frozenset(),
            counterfactual=None,
            per_tie_verdicts={},
        )
    y_factual = factual[y.neuron]
    if branch is Branch.ON_BIFURCATING_MAX_BLOCKING:
        analysis = direct_paths(diagram, factual, x.neuron, y.neuron, paths)
        all_ids = frozenset(n.id for n in diagram.neurons)
        per_tie: dict[tuple[str, ...], bool] = {}
        cf_by_path: dict[tuple[str, ...], FiringAssignment] = {}
        for p in analysis.collapsed_shortest:
            maintenance = all_ids - set(p)
            cf = counterfactual(diagram, stipulation, factual, x, maintenance)
            cf_by_path[p] = cf
            per_tie[p] = cf[y.neuron] != y_factual
        if len(set(per_tie.values())) > 1:
            raise TieDisagreementError(x, y, per_tie)
        flips = per_tie[analysis.chosen_direct]
        maintained = frozenset(
            e
            for e in diagram.edges
            if e.kind is EdgeKind.INHIBITORY
            and factual[e.src]
            and e.dst in analysis.off_path
        )
        return CauseVerdict(
            x=x,
            y=y,
            is_cause=flips,
            branch=branch,
            reason="flip" if flips else "no-flip",
            paths=analysis,
            maintained_blockings=maintained,
            counterfactual=cf_by_path[analysis.chosen_direct],
            per_tie_verdicts=per_tie,
        )
    cf = counterfactual(diagram, stipulation, factual, x, None)
    flips = cf[y.neuron] != y_factual
    return CauseVerdict(
        x=x,
        y=y,
        is_cause=flips,
        branch=branch,
        reason="flip" if flips else "no-flip",
        paths=PathAnalysis(paths, (), None, frozenset()),
        maintained_blockings=frozenset(),
        counterfactual=cf,
        per_tie_verdicts={},
    )


def cause_verdicts(
    diagram: Diagram,
    stipulation: Stipulation,
    y: Event,
    time_filter: Optional[int] = None,
) -> dict[Event, CauseVerdict]:
    """Run the cause test for every factual event that could bear on y."""
    factual = simulate(diagram, stipulation)
    if factual[y.neuron] != (y.polarity is Polarity.PLUS):
        raise PolarityMismatchError(
            f"event {y.token} does not match the factual state of {y.neuron}"
        )
    y_time = diagram.neuron_map[y.neuron].time
    out: dict[Event, CauseVerdict] = {}
    for n in diagram.by_time:
        if n.id == y.neuron or n.time >= y_time:
            continue
        if time_filter is not None and n.time != time_filter:
            continue
        if not enumerate_paths(diagram, n.id, y.neuron):
            continue
        polarity = Polarity.PLUS if factual[n.id] else Polarity.MINUS
        candidate = Event(n.id, polarity)
        out[candidate] = is_cause(diagram, stipulation, candidate, y, factual)
    return out


def all_causes(
    diagram: Diagram,
    stipulation: Stipulation,
    y: Event,
    time_filter: Optional[int] = None,
) -> frozenset[Event]:
    """Every factual event identified as a cause of y.

    Candidates are neurons strictly earlier than y with a forward path to
    it; each is tested at its actual polarity. ``time_filter`` restricts
    candidates to one column (1 recovers the initial causes).
    """
    verdicts = cause_verdicts(diagram, stipulation, y, time_filter)
    return frozenset(ev for ev, v in verdicts.items() if v.is_cause)


def verdict_to_json(verdict: CauseVerdict, diagram: Diagram) -> dict:
    """Canonical JSON trace for report embedding."""
    doc: dict = {
        "x": verdict.x.render(diagram),
        "y": verdict.y.render(diagram),
        "is_cause": verdict.is_cause,
        "branch": verdict.branch.value,
        "reason": verdict.reason,
        "direct_path": list(verdict.paths.chosen_direct)
        if verdict.paths.chosen_direct
        else None,
        "tie_paths": [
            {"path": list(p), "flips": flips}
            for p, flips in sorted(verdict.per_tie_verdicts.items())
        ],
        "maintained_blockings": [
            {"src": e.src, "dst": e.dst}
            for e in sorted(verdict.maintained_blockings, key=lambda e: (e.src, e.dst))
        ],
        "counterfactual": dict(sorted(verdict.counterfactual.states.items()))
        if verdict.counterfactual is not None
        else None,
    }
    return doc
