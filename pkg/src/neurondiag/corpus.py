"""Golden corpus of benchmark diagrams with expected answers.

The corpus ships 25 slots. Ten cases carry a full diagram encoding plus
expected occurrence and initial-cause answers and are used for grading.
The remaining slots exist only as recorded answers: their structures are
available only as figures in the source collection, so they are marked
unverified and excluded from any acceptance run until someone transcribes
them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .dsl import DslParseError, parse_diagram
from .model import Diagram, Event, Polarity, Stipulation

VERIFIED_CASE_IDS = (
    "d01", "d02", "d03", "d05", "d08", "d10", "d12", "d15", "d17", "d18",
)


class CorpusError(Exception):
    """The corpus directory is missing, inconsistent, or unreadable."""


@dataclass(frozen=True)
class GoldenCase:
    """One corpus slot: a diagram plus its expected answers.

    Unverified slots carry only ``recorded_answer`` and ``provenance``;
    their diagram fields are None and they must be skipped by graders.
    ``expected_later_causes`` is an informational annotation (raw event
    strings), not a machine-checked value.
    """

    case_id: str
    verified: bool
    provenance: str
    diagram: Optional[Diagram] = None
    stipulation: Optional[Stipulation] = None
    target: Optional[Event] = None
    expected_occurs: Optional[bool] = None
    expected_initial_causes: Optional[frozenset[Event]] = None
    expected_later_causes: tuple[str, ...] = ()
    recorded_answer: Optional[str] = None


def default_corpus_dir() -> Path:
    return Path(str(resources.files("neurondiag") / "corpus"))


def load_corpus(corpus_dir: Optional[Path] = None) -> list[GoldenCase]:
    """Load all 25 corpus slots, ordered by case id."""
    root = Path(corpus_dir) if corpus_dir is not None else default_corpus_dir()
    gold_path = root / "gold.json"
    try:
        gold = json.loads(gold_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorpusError(f"gold file not found: {gold_path}") from None
    except json.JSONDecodeError as exc:
        raise CorpusError(f"corrupt gold file {gold_path}: {exc}") from None

    cases: list[GoldenCase] = []
    for case_id in sorted(gold):
        entry = gold[case_id]
        if not isinstance(entry, dict) or "verified" not in entry:
            raise CorpusError(f"corrupt gold entry for {case_id}")
        if not entry["verified"]:
            cases.append(
                GoldenCase(
                    case_id=case_id,
                    verified=False,
                    provenance=entry.get("provenance", ""),
                    recorded_answer=entry.get("recorded_answer"),
                )
            )
            continue
        ndg_path = root / f"{case_id}.ndg"
        try:
            text = ndg_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CorpusError(
                f"case {case_id} is marked verified but {ndg_path} is missing"
            ) from None
        try:
            parsed = parse_diagram(text)
        except DslParseError as exc:
            raise CorpusError(f"corrupt corpus file {ndg_path}: {exc}") from None
        expected_occurs = entry["expected_occurs"]
        if parsed.target != entry["target"]:
            raise CorpusError(
                f"case {case_id}: gold target {entry['target']!r} does not "
                f"match the diagram's ask statement {parsed.target!r}"
            )
        target = Event(
            parsed.target,
            Polarity.PLUS if expected_occurs else Polarity.MINUS,
        )
        try:
            initial = frozenset(
                Event.from_token(tok) for tok in entry["expected_initial_causes"]
            )
        except (ValueError, KeyError) as exc:
            raise CorpusError(f"corrupt gold entry for {case_id}: {exc}") from None
        cases.append(
            GoldenCase(
                case_id=case_id,
                verified=True,
                provenance=entry.get("provenance", ""),
                diagram=parsed.diagram,
                stipulation=parsed.stipulation,
                target=target,
                expected_occurs=expected_occurs,
                expected_initial_causes=initial,
                expected_later_causes=tuple(entry.get("expected_later_causes", ())),
            )
        )
    return cases


def verified_cases(corpus_dir: Optional[Path] = None) -> list[GoldenCase]:
    return [c for c in load_corpus(corpus_dir) if c.verified]
