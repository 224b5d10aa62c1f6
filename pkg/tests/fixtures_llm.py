"""Recorded chatbot answers and ideal-answer builders for harness tests."""

from __future__ import annotations

from neurondiag.corpus import GoldenCase
from neurondiag.model import Polarity

# Verbatim recorded answers of one evaluated chatbot for the ten verified
# cases, used as an offline grading fixture. The expected verdict vector
# (below) was derived by applying the grading contract to these texts by
# hand before the grader was written.
GEMINI_ANSWERS = {
    "d01": "Yes, E occurs at t3. The cause at t1 of E’s occurring is C’s occurrence at t1.",
    "d02": "Yes, E occurs at t3. The cause at t1 of E's occurring is C.",
    "d03": "No, E does not occur at t3. The causes at t1 of E's not occurring are A and the absence of C.",
    "d05": "Yes, E occurs at t4. The cause at t1 of E's occurring is A.",
    "d08": "Yes, E occurs at t3. The cause at t1 of E's occurring is C.",
    "d10": "Yes, E occurs at t3. The cause at t1 of E's occurring is A.",
    "d12": "Yes, E occurs at t3. The causes at t1 of E's occurring are A and C.",
    "d15": "Yes, E occurs at t4. The causes at t1 of E's occurring are A and C.",
    "d17": "No, G does not occur at t4. The cause at t1 of G's not occurring is C.",
    "d18": "Yes, I occurs at t5. The cause at t1 of I's occurring is H.",
}

GEMINI_EXPECTED_VERDICTS = {
    "d01": "Full",
    "d02": "Full",
    "d03": "Partial",
    "d05": "Full",
    "d08": "Full",
    "d10": "Partial",
    "d12": "Full",
    "d15": "Full",
    "d17": "Full",
    "d18": "Partial",
}


def gold_answer_text(case: GoldenCase) -> str:
    """An ideal short answer that grades Full against its own case."""
    target = case.target.neuron
    t = case.diagram.neuron_map[target].time
    if case.expected_occurs:
        head = f"Yes, {target} occurs at t{t}."
        tail_verb = "occurring"
    else:
        head = f"No, {target} does not occur at t{t}."
        tail_verb = "not occurring"
    times = {n.id: n.time for n in case.diagram.neurons}
    causes = sorted(
        case.expected_initial_causes, key=lambda ev: (times[ev.neuron], ev.neuron)
    )
    names = [
        ev.neuron if ev.polarity is Polarity.PLUS else f"the absence of {ev.neuron}"
        for ev in causes
    ]
    if len(names) == 1:
        body = f"The cause at t1 of {target}'s {tail_verb} is {names[0]}."
    else:
        listing = ", ".join(names[:-1]) + f" and {names[-1]}"
        body = f"The causes at t1 of {target}'s {tail_verb} are {listing}."
    return f"{head} {body}"
