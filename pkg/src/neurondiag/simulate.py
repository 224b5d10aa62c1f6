"""Deterministic firing dynamics for neuron diagrams.

A single pass over the columns in ascending time decides every state. A
neuron is on iff (a) it is clamped on, else (b) it is a stipulated source
and no inhibitory parent fires, else (c) at least ``threshold`` of its
stimulatory parents fire and no inhibitory parent fires. Clamped-off
neurons are off unconditionally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import (
    Diagram,
    DiagramError,
    Event,
    Intervention,
    Polarity,
    Stipulation,
    UnknownNeuronError,
    ensure_valid,
)


class InterventionConflictError(DiagramError):
    """Two clamps force the same neuron to different states."""


@dataclass(frozen=True)
class FiringAssignment:
    """Total mapping neuron id -> on/off for one (counter)factual run."""

    states: Mapping[str, bool]

    def __getitem__(self, neuron_id: str) -> bool:
        try:
            return self.states[neuron_id]
        except KeyError:
            raise UnknownNeuronError(neuron_id) from None

    def is_on(self, neuron_id: str) -> bool:
        return self[neuron_id]

    def on_ids(self) -> frozenset[str]:
        return frozenset(nid for nid, on in self.states.items() if on)


def _forced_states(diagram: Diagram, clamps: Iterable[Intervention]) -> dict[str, bool]:
    forced: dict[str, bool] = {}
    for iv in clamps:
        if iv.neuron not in diagram.neuron_map:
            raise UnknownNeuronError(iv.neuron)
        if iv.neuron in forced and forced[iv.neuron] != iv.state:
            raise InterventionConflictError(
                f"conflicting clamps on neuron {iv.neuron}"
            )
        forced[iv.neuron] = iv.state
    return forced


def simulate(
    diagram: Diagram,
    stipulation: Stipulation,
    clamps: Iterable[Intervention] = (),
) -> FiringAssignment:
    """Compute the factual (or clamped) firing assignment.

    Pure and deterministic: equal inputs produce equal assignments.
    """
    ensure_valid(diagram, stipulation)
    forced = _forced_states(diagram, clamps)
    stipulated = set(stipulation.firing_sources)
    states: dict[str, bool] = {}
    for n in diagram.by_time:
        if n.id in forced:
            states[n.id] = forced[n.id]
            continue
        inhibited = any(states[p] for p in diagram.inhib_parents[n.id])
        stim = diagram.stim_parents[n.id]
        if not stim:
            states[n.id] = n.id in stipulated and not inhibited
        else:
            hits = sum(1 for p in stim if states[p])
            states[n.id] = hits >= n.threshold and not inhibited
    return FiringAssignment(states)


def occurs(diagram: Diagram, stipulation: Stipulation, event: Event) -> bool:
    """True iff the factual assignment matches the event's polarity."""
    if event.neuron not in diagram.neuron_map:
        raise UnknownNeuronError(event.neuron)
    assignment = simulate(diagram, stipulation)
    return assignment[event.neuron] == (event.polarity is Polarity.PLUS)
