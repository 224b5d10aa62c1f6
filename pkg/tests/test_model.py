from __future__ import annotations

import pytest

from neurondiag.causes import forward_reachable
from neurondiag.model import (
    Diagram,
    Edge,
    EdgeKind,
    Event,
    Neuron,
    Polarity,
    Stipulation,
    UnknownNeuronError,
    clamp,
    diagram_to_json,
    is_valid,
    validate,
)
from neurondiag.simulate import simulate

from conftest import sweep_params
from neurondiag.generate import generate

STIM = EdgeKind.STIMULATORY
INHIB = EdgeKind.INHIBITORY


def small(neurons, edges, columns=3, did="t"):
    return Diagram(did, columns, neurons, edges)


def test_corpus_diagram_is_clean(by_id):
    case = by_id["d01"]
    assert validate(case.diagram, case.stipulation) == []


def test_backward_edge_violation():
    d = small(
        [Neuron("A", 2), Neuron("B", 1)],
        [Edge("A", "B", STIM)],
    )
    violations = validate(d)
    assert len(violations) == 1
    assert violations[0].code == "backward-edge"
    assert "A->B" in violations[0].subject


def test_stipulated_nonsource_violation(by_id):
    d01 = by_id["d01"]
    violations = validate(d01.diagram, Stipulation(("D",)))
    assert [v.code for v in violations] == ["stipulated-nonsource"]


def test_high_threshold_is_warning_only():
    d = small([Neuron("A", 1, threshold=3)], [])
    violations = validate(d)
    assert [v.code for v in violations] == ["high-threshold"]
    assert violations[0].severity == "warning"
    assert is_valid(d)


def test_bad_threshold_is_error():
    d = small([Neuron("A", 1, threshold=0)], [])
    assert not is_valid(d)


def test_bad_id_rejected():
    d = small([Neuron("C_1", 1)], [])
    assert any(v.code == "bad-id" for v in validate(d))


def test_duplicate_neuron_flagged():
    d = small([Neuron("A", 1), Neuron("A", 2)], [])
    assert any(v.code == "dup-neuron" for v in validate(d))


def test_unknown_edge_endpoint_flagged():
    d = small([Neuron("A", 1)], [Edge("A", "Z", STIM)])
    violations = validate(d)
    assert any(v.code == "unknown-endpoint" and "Z" in v.message for v in violations)


def test_time_outside_columns_flagged():
    d = small([Neuron("A", 5)], [], columns=3)
    assert any(v.code == "bad-time" for v in validate(d))


def test_validate_is_deterministic(by_id):
    case = by_id["d10"]
    assert validate(case.diagram, case.stipulation) == validate(
        case.diagram, case.stipulation
    )


def test_diagram_equality_ignores_input_order():
    n = [Neuron("A", 1), Neuron("B", 2), Neuron("C", 1)]
    e = [Edge("A", "B", STIM), Edge("C", "B", INHIB)]
    assert small(n, e) == small(list(reversed(n)), list(reversed(e)))


def test_event_tokens():
    assert Event.from_token("C+") == Event("C", Polarity.PLUS)
    assert Event.from_token("B-").token == "B-"
    with pytest.raises(ValueError):
        Event.from_token("+")


def test_event_render(by_id):
    d01 = by_id["d01"].diagram
    assert Event("C", Polarity.PLUS).render(d01) == "C+(t1)"
    assert Event("B", Polarity.MINUS).render(d01) == "B-(t2)"


def test_clamp_unknown_neuron(by_id):
    with pytest.raises(UnknownNeuronError):
        clamp(by_id["d01"].diagram, "Z", True)


def test_clamp_to_factual_state_is_identity(by_id):
    case = by_id["d01"]
    plain = simulate(case.diagram, case.stipulation)
    clamped = simulate(
        case.diagram, case.stipulation, [clamp(case.diagram, "D", plain["D"])]
    )
    assert clamped.states == plain.states


@pytest.mark.parametrize("seed", range(40))
def test_clamp_only_disturbs_forward_cone(seed):
    diagram, stipulation, _ = generate(sweep_params(seed))
    plain = simulate(diagram, stipulation)
    victim = diagram.neurons[seed % len(diagram.neurons)].id
    clamped = simulate(
        diagram, stipulation, [clamp(diagram, victim, not plain[victim])]
    )
    allowed = forward_reachable(diagram, victim) | {victim}
    changed = {
        nid for nid in plain.states if plain[nid] != clamped[nid]
    }
    assert changed <= allowed


def test_canonical_json_sorted(by_id):
    case = by_id["d05"]
    doc = diagram_to_json(case.diagram, case.stipulation)
    ids = [n["id"] for n in doc["neurons"]]
    times = [n["time"] for n in doc["neurons"]]
    assert times == sorted(times)
    assert ids == sorted(ids, key=lambda i: (times[ids.index(i)], i))
    assert doc["firing_sources"] == ["A", "C"]
