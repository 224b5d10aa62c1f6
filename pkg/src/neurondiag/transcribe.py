"""Render diagrams into the English prompt formats used for LLM querying.

Two templates exist. The explicit template spells out the time ordering,
one conditional sentence per stimulatory edge (inhibition becomes an
"unless" clause, a threshold-2 target gets an "if also ... (or both)"
clause), the stipulation, and the two questions. The contracted template
compresses unbranched chains into narrative sentences.

Clause order follows a depth-first walk of the stimulatory structure,
visiting stipulated sources in stipulation order first and any remaining
neurons with outgoing stimulation by (time, id). Equal inputs therefore
always produce byte-equal prompts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import (
    Diagram,
    Edge,
    EdgeKind,
    Stipulation,
    UnknownNeuronError,
    ensure_valid,
)

APOSTROPHE = "’"


class Template(Enum):
    EXPLICIT = "explicit"
    CONTRACTED = "contracted"


@dataclass(frozen=True)
class PromptStyle:
    template: Template = Template.EXPLICIT
    short_answer: bool = False
    initial_causes_only: bool = False


@dataclass(frozen=True)
class Clause:
    """One stimulatory edge with the modifiers its sentence must carry."""

    edge: Edge
    unless: tuple[str, ...]          # inhibitory parents of edge.dst, by id
    co_stimulators: tuple[str, ...]  # other stim parents when threshold >= 2


def _time(diagram: Diagram, neuron_id: str) -> int:
    return diagram.neuron_map[neuron_id].time


def _stim_out(diagram: Diagram, neuron_id: str) -> list[Edge]:
    edges = [
        e for e in diagram.out_edges[neuron_id] if e.kind is EdgeKind.STIMULATORY
    ]
    edges.sort(key=lambda e: (_time(diagram, e.dst), e.dst))
    return edges


def _make_clause(diagram: Diagram, edge: Edge) -> Clause:
    dst = diagram.neuron_map[edge.dst]
    unless = tuple(sorted(diagram.inhib_parents[edge.dst]))
    co = ()
    if dst.threshold >= 2:
        others = [p for p in diagram.stim_parents[edge.dst] if p != edge.src]
        co = tuple(sorted(others, key=lambda p: (_time(diagram, p), p)))
    return Clause(edge, unless, co)


def clause_plan(
    diagram: Diagram, stipulation: Stipulation
) -> tuple[list[Clause], list[Edge]]:
    """Ordered stimulatory clauses plus inhibitory edges no clause covers.

    An inhibitory edge whose target has no stimulatory parent cannot ride
    along as an "unless" clause and is returned separately for standalone
    rendering.
    """
    emitted: set[Edge] = set()
    visited: set[str] = set()
    clauses: list[Clause] = []

    def visit(nid: str) -> None:
        if nid in visited:
            return
        visited.add(nid)
        for e in _stim_out(diagram, nid):
            if e in emitted:
                continue
            emitted.add(e)
            clauses.append(_make_clause(diagram, e))
            visit(e.dst)

    roots = list(stipulation.firing_sources)
    roots += [
        n.id
        for n in diagram.by_time
        if n.id not in roots and _stim_out(diagram, n.id)
    ]
    for nid in roots:
        visit(nid)

    orphans = [
        e
        for e in diagram.edges
        if e.kind is EdgeKind.INHIBITORY and not diagram.stim_parents[e.dst]
    ]
    orphans.sort(key=lambda e: (_time(diagram, e.dst), e.dst, e.src))
    return clauses, orphans


def _threshold_clause_explicit(diagram: Diagram, co: tuple[str, ...]) -> str:
    if len(co) == 1:
        o = co[0]
        return f", if also {o} at t{_time(diagram, o)} would occur"
    alts = " or ".join(f"{o} at t{_time(diagram, o)}" for o in co)
    return f", if also either {alts} (or both) would occur"


def _explicit_sentence(diagram: Diagram, clause: Clause) -> str:
    src, dst = clause.edge.src, clause.edge.dst
    s = (
        f"If {src} would occur at t{_time(diagram, src)}, "
        f"{dst} would occur at t{_time(diagram, dst)}"
    )
    if clause.co_stimulators:
        s += _threshold_clause_explicit(diagram, clause.co_stimulators)
    for inh in clause.unless:
        s += f", unless {inh} would occur at t{_time(diagram, inh)}"
    return s + "."


def _orphan_sentence(diagram: Diagram, edge: Edge) -> str:
    return (
        f"If {edge.src} would occur at t{_time(diagram, edge.src)}, "
        f"{edge.dst} would not occur at t{_time(diagram, edge.dst)}."
    )


def _time_sentence(columns: int) -> str:
    if columns < 2:
        return ""
    s = "Suppose time t1 is earlier than time t2"
    for k in range(3, columns + 1):
        s += f", which is earlier than time t{k}"
    return s + "."


def _name_list(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + f" and {names[-1]}"


def _stipulation_sentence(diagram: Diagram, stipulation: Stipulation) -> str:
    names = list(stipulation.firing_sources)
    if not names:
        return "Suppose no events occur at t1."
    times = {_time(diagram, n) for n in names}
    if len(times) == 1:
        t = times.pop()
        verb = "occurs" if len(names) == 1 else "occur"
        return f"Suppose {_name_list(names)} {verb} at t{t}."
    parts = [f"{n} occurs at t{_time(diagram, n)}" for n in names]
    return f"Suppose {_name_list(parts)}."


def _questions(diagram: Diagram, target: str, style: PromptStyle) -> str:
    t = _time(diagram, target)
    s = f"Does {target} occur at t{t}?"
    if style.template is Template.CONTRACTED:
        s = f"Does {target} occur in this scenario?"
    scope = " at t1" if style.initial_causes_only else ""
    if style.template is Template.CONTRACTED and style.initial_causes_only:
        s += (
            f" What is/are the initial cause(s) of {target}{APOSTROPHE}s "
            "occurring or not occurring?"
        )
    else:
        s += (
            f" What is/are the cause(s){scope} of {target}{APOSTROPHE}s "
            "occurring or not occurring?"
        )
    if style.short_answer:
        s += (
            " Answer without stating your reasoning steps. So simply state "
            f"in one or two sentences whether {target} occurs or not, and "
            "what the initial cause(s) (so the cause(s) at t1) of this "
            "event are."
        )
    return s


def _transcribe_explicit(
    diagram: Diagram, stipulation: Stipulation, target: str, style: PromptStyle
) -> str:
    clauses, orphans = clause_plan(diagram, stipulation)
    sentences = []
    time_sentence = _time_sentence(diagram.columns)
    if time_sentence:
        sentences.append(time_sentence)
    sentences += [_explicit_sentence(diagram, c) for c in clauses]
    sentences += [_orphan_sentence(diagram, e) for e in orphans]
    sentences.append(_stipulation_sentence(diagram, stipulation))
    sentences.append(_questions(diagram, target, style))
    return " ".join(sentences)


def _contracted_modifiers(clause: Clause) -> str:
    s = ""
    if clause.co_stimulators:
        alts = " or ".join(clause.co_stimulators)
        if len(clause.co_stimulators) == 1:
            s += f", if also {alts} would have occurred"
        else:
            s += f", if also either {alts} (or both) would have occurred"
    for inh in clause.unless:
        s += f", unless {inh} occurs"
    return s


def _transcribe_contracted(
    diagram: Diagram, stipulation: Stipulation, target: str, style: PromptStyle
) -> str:
    clauses, orphans = clause_plan(diagram, stipulation)
    stipulated = set(stipulation.firing_sources)
    sentences: list[str] = []
    narrated: set[str] = set()
    first_scenario = True
    # Sources with no stimulatory out-edge never head a conditional
    # sentence, so their firing is stated up front.
    for src in stipulation.firing_sources:
        if _stim_out(diagram, src):
            continue
        if first_scenario:
            sentences.append(f"Suppose a scenario in which {src} occurs.")
            first_scenario = False
        else:
            sentences.append(f"Suppose {src} occurs.")
        narrated.add(src)
    i = 0
    while i < len(clauses):
        c = clauses[i]
        src = c.edge.src
        clean = not c.unless and not c.co_stimulators
        if src in stipulated and clean:
            chain = [c]
            j = i + 1
            while j < len(clauses):
                nxt = clauses[j]
                if (
                    nxt.edge.src == chain[-1].edge.dst
                    and not nxt.unless
                    and not nxt.co_stimulators
                ):
                    chain.append(nxt)
                    j += 1
                else:
                    break
            if src in narrated:
                s = f"{src} also causes {chain[0].edge.dst} to occur"
            elif first_scenario:
                s = (
                    f"Suppose a scenario in which {src} occurs and causes "
                    f"{chain[0].edge.dst} to occur"
                )
                first_scenario = False
            else:
                s = f"Suppose {src} occurs and causes {chain[0].edge.dst} to occur"
            for link in chain[1:]:
                s += f", which subsequently causes {link.edge.dst} to occur"
            sentences.append(s + ".")
            narrated.add(src)
            i = j
        elif src in stipulated:
            s = f"Suppose {src} normally causes {c.edge.dst} to occur"
            s += _contracted_modifiers(c)
            sentences.append(s + ".")
            narrated.add(src)
            i += 1
        else:
            s = (
                f"If {src} would have occurred, it would have caused "
                f"{c.edge.dst} to occur"
            )
            s += _contracted_modifiers(c)
            sentences.append(s + ".")
            i += 1
    for e in orphans:
        sentences.append(
            f"If {e.src} would have occurred, {e.dst} would not have occurred."
        )
    sentences.append(_questions(diagram, target, style))
    return " ".join(sentences)


def transcribe(
    diagram: Diagram,
    stipulation: Stipulation,
    target: str,
    style: PromptStyle = PromptStyle(),
) -> str:
    """Deterministic English prompt for one diagram and stipulation."""
    ensure_valid(diagram, stipulation)
    if target not in diagram.neuron_map:
        raise UnknownNeuronError(target)
    if style.template is Template.CONTRACTED:
        return _transcribe_contracted(diagram, stipulation, target, style)
    return _transcribe_explicit(diagram, stipulation, target, style)


def transcribe_intervention(
    diagram: Diagram, target: str, neuron: str, state: bool
) -> str:
    """Follow-up prompt forcing one neuron by external intervention."""
    for nid in (target, neuron):
        if nid not in diagram.neuron_map:
            raise UnknownNeuronError(nid)
    verb = "does" if state else "does not"
    return (
        f"Suppose now that in the situation just sketched, event {neuron} "
        f"{verb} occur, because of an external intervention. "
        f"Does {target} occur now in this new situation? Why?"
    )


def clause_coverage_issues(
    diagram: Diagram, stipulation: Stipulation
) -> list[str]:
    """Check that the clause plan tells the whole diagram, nothing twice.

    Every stimulatory edge must appear in exactly one clause; every
    inhibitory edge must surface at least once (as an "unless" on one of
    its target's clauses, or as a standalone sentence when the target has
    no stimulatory parent); every threshold-2 neuron's extra requirement
    must ride on each of its clauses.
    """
    clauses, orphans = clause_plan(diagram, stipulation)
    issues: list[str] = []
    stim_edges = [e for e in diagram.edges if e.kind is EdgeKind.STIMULATORY]
    seen: dict[Edge, int] = {}
    for c in clauses:
        seen[c.edge] = seen.get(c.edge, 0) + 1
    for e in stim_edges:
        n = seen.get(e, 0)
        if n != 1:
            issues.append(
                f"stimulatory edge {e.src}->{e.dst} appears in {n} clauses"
            )
    for e in diagram.edges:
        if e.kind is not EdgeKind.INHIBITORY:
            continue
        covered = any(
            c.edge.dst == e.dst and e.src in c.unless for c in clauses
        ) or e in orphans
        if not covered:
            issues.append(
                f"inhibitory edge {e.src}->{e.dst} is not rendered anywhere"
            )
    for n in diagram.neurons:
        if n.threshold < 2:
            continue
        for c in clauses:
            if c.edge.dst != n.id:
                continue
            expected = {p for p in diagram.stim_parents[n.id] if p != c.edge.src}
            if set(c.co_stimulators) != expected:
                issues.append(
                    f"threshold clause for {n.id} via {c.edge.src} lists "
                    f"{sorted(c.co_stimulators)}, expected {sorted(expected)}"
                )
    return issues
