"""Query chat-completion endpoints, grade answers against the gold corpus.

The wire protocol is a chat-completions-compatible JSON POST (fields:
``model``, ``messages`` with a single user message). Grading never needs a
live endpoint: transcripts are JSONL files that can be replayed offline,
and replaying one always reproduces the same report byte for byte.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import requests

from .causes import cause_verdicts
from .corpus import GoldenCase
from .model import Diagram, Event, Polarity
from .transcribe import PromptStyle, Template, transcribe


class ConfigError(Exception):
    """The harness configuration is missing or unusable."""


class TransportError(Exception):
    """The endpoint could not be reached or refused the request."""


class MalformedResponseError(TransportError):
    """The endpoint answered 200 with an unusable body."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    backoff_base_s: float = 0.5
    backoff_cap_s: float = 8.0


@dataclass(frozen=True)
class HarnessConfig:
    endpoint_url: str
    model: str
    credential_env: str
    concurrency: int = 4
    timeout_s: float = 60.0
    retry: RetryPolicy = RetryPolicy()
    style: PromptStyle = PromptStyle(
        Template.EXPLICIT, short_answer=True, initial_causes_only=True
    )
    request_params: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def load(cls, path: Path | str) -> "HarnessConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        try:
            retry = RetryPolicy(**raw.get("retry", {}))
            style_raw = raw.get("prompt_style", {})
            style = PromptStyle(
                template=Template(style_raw.get("template", "explicit")),
                short_answer=style_raw.get("short_answer", True),
                initial_causes_only=style_raw.get("initial_causes_only", True),
            )
            return cls(
                endpoint_url=raw["endpoint_url"],
                model=raw["model"],
                credential_env=raw["credential_env"],
                concurrency=raw.get("concurrency", 4),
                timeout_s=raw.get("timeout_s", 60.0),
                retry=retry,
                style=style,
                request_params=raw.get("request_params", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config file {path} is incomplete: {exc}") from None

    def credential(self) -> str:
        value = os.environ.get(self.credential_env)
        if not value:
            raise ConfigError(
                f"credential environment variable {self.credential_env} is not set"
            )
        return value


@dataclass(frozen=True)
class TranscriptRecord:
    case_id: str
    prompt: str
    model: str
    response: str
    latency_ms: float
    timestamp: str
    attempts: int
    request_params: Mapping[str, object] = field(default_factory=dict)

    def to_json_line(self) -> str:
        doc = {
            "case_id": self.case_id,
            "prompt": self.prompt,
            "model": self.model,
            "response": self.response,
            "latency_ms": self.latency_ms,
            "timestamp": self.timestamp,
            "attempts": self.attempts,
            "request_params": dict(self.request_params),
        }
        return json.dumps(doc, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "TranscriptRecord":
        doc = json.loads(line)
        return cls(
            case_id=doc["case_id"],
            prompt=doc.get("prompt", ""),
            model=doc.get("model", ""),
            response=doc["response"],
            latency_ms=doc.get("latency_ms", 0.0),
            timestamp=doc.get("timestamp", ""),
            attempts=doc.get("attempts", 1),
            request_params=doc.get("request_params", {}),
        )


@dataclass(frozen=True)
class ParsedAnswer:
    occurrence: Optional[bool]
    causes: frozenset[Event]
    unparsed: bool


class Verdict(Enum):
    FULL = "Full"
    PARTIAL = "Partial"
    WRONG = "Wrong"
    UNPARSED = "Unparsed"


@dataclass(frozen=True)
class GradedResult:
    case_id: str
    verdict: Verdict
    occurrence_correct: bool
    missing: frozenset[Event]
    extra: frozenset[Event]
    parsed: ParsedAnswer


def query_model(
    prompt: str, config: HarnessConfig, case_id: str = ""
) -> TranscriptRecord:
    """Send one chat-completion request, retrying transient failures.

    Connection failures, HTTP 5xx and HTTP 429 are retried with capped
    exponential backoff up to ``retry.max_attempts``; other HTTP errors
    fail immediately. The verbatim response text is recorded.
    """
    token = config.credential()
    payload: dict = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
    }
    payload.update(config.request_params)
    headers = {"Authorization": f"Bearer {token}"}
    backoff = config.retry.backoff_base_s
    attempts = 0
    last_error = "no attempt made"
    while attempts < config.retry.max_attempts:
        attempts += 1
        started = time.perf_counter()
        try:
            resp = requests.post(
                config.endpoint_url,
                json=payload,
                headers=headers,
                timeout=config.timeout_s,
            )
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
        else:
            if resp.status_code == 200:
                latency_ms = (time.perf_counter() - started) * 1000.0
                try:
                    body = resp.json()
                    content = body["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise MalformedResponseError(
                        f"unusable response body: {exc}"
                    ) from None
                return TranscriptRecord(
                    case_id=case_id,
                    prompt=prompt,
                    model=config.model,
                    response=content,
                    latency_ms=round(latency_ms, 3),
                    timestamp=datetime.now(timezone.utc).isoformat(),
                    attempts=attempts,
                    request_params=dict(config.request_params),
                )
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
            else:
                raise TransportError(
                    f"HTTP {resp.status_code} from {config.endpoint_url}"
                )
        if attempts < config.retry.max_attempts:
            time.sleep(min(backoff, config.retry.backoff_cap_s))
            backoff *= 2
    raise TransportError(
        f"giving up after {attempts} attempts: {last_error}"
    )


_NEGATIVE_BEFORE = re.compile(
    r"(?:\babsence\s+of|\bnon-occurrence\s+of|\bnon\s+occurrence\s+of)"
    r"(?:\s+the)?\s*$",
    re.IGNORECASE,
)
_NEGATIVE_AFTER = re.compile(
    r"^\s*(?:['’]s)?\s*(?:does\s+not\s+occur|not\s+occurring|non-occurrence)",
    re.IGNORECASE,
)
_TOKEN = re.compile(r"\b[A-Za-z][A-Za-z0-9]*\b")


def _first_occurrence_statement(text: str, target: str) -> Optional[bool]:
    patterns: list[tuple[re.Pattern, bool]] = [
        (re.compile(r"\byes\b", re.IGNORECASE), True),
        (re.compile(r"\bno\b", re.IGNORECASE), False),
        (re.compile(rf"\b{re.escape(target)}\s+does\s+not\s+occur\b"), False),
        (re.compile(rf"\b{re.escape(target)}\s+does\s+occur\b"), True),
        (re.compile(rf"\b{re.escape(target)}\s+occurs\b"), True),
        (re.compile(r"\bdoes\s+not\s+occur\b", re.IGNORECASE), False),
    ]
    best: Optional[tuple[int, bool]] = None
    for pattern, value in patterns:
        m = pattern.search(text)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), value)
    return best[1] if best else None


def parse_answer(text: str, diagram: Diagram, target: str) -> ParsedAnswer:
    """Extract the occurrence statement and the cause events from free text.

    The occurrence comes from the first affirmation or negation of the
    target. Causes are declared neuron ids mentioned in sentences that
    contain a cause cue; "absence of", "non-occurrence of" and trailing
    "not occurring"/"does not occur" flip the polarity to minus. The
    target itself is never read as one of its own causes (its mentions are
    question echoes). Parsing never fails; an answer with no recognisable
    occurrence statement degrades to unparsed.
    """
    occurrence = _first_occurrence_statement(text, target)
    if occurrence is None:
        return ParsedAnswer(None, frozenset(), unparsed=True)
    declared = set(diagram.neuron_map)
    causes: dict[str, Polarity] = {}
    for sentence in re.split(r"[.!?]", text):
        if "cause" not in sentence.lower():
            continue
        for m in _TOKEN.finditer(sentence):
            token = m.group(0)
            if token not in declared or token == target:
                continue
            if token in causes:
                continue
            before = sentence[: m.start()]
            after = sentence[m.end():]
            negative = bool(
                _NEGATIVE_BEFORE.search(before) or _NEGATIVE_AFTER.match(after)
            )
            causes[token] = Polarity.MINUS if negative else Polarity.PLUS
    events = frozenset(Event(nid, pol) for nid, pol in causes.items())
    return ParsedAnswer(occurrence, events, unparsed=False)


def grade(parsed: ParsedAnswer, gold: GoldenCase) -> GradedResult:
    """Grade one parsed answer against a verified golden case.

    Full requires the occurrence and the exact initial-cause set; an
    overlapping but unequal cause set (omissions or spurious extras) is
    Partial; a wrong occurrence or a disjoint cause set is Wrong.
    """
    if not gold.verified:
        raise ValueError(f"case {gold.case_id} is unverified and cannot be graded")
    gold_causes = gold.expected_initial_causes
    if parsed.unparsed:
        return GradedResult(
            gold.case_id, Verdict.UNPARSED, False, gold_causes, frozenset(), parsed
        )
    occurrence_correct = parsed.occurrence == gold.expected_occurs
    missing = frozenset(gold_causes - parsed.causes)
    extra = frozenset(parsed.causes - gold_causes)
    if not occurrence_correct or not (parsed.causes & gold_causes):
        verdict = Verdict.WRONG
    elif not missing and not extra:
        verdict = Verdict.FULL
    else:
        verdict = Verdict.PARTIAL
    return GradedResult(gold.case_id, verdict, occurrence_correct, missing, extra, parsed)


def write_transcript(records: Iterable[TranscriptRecord], path: Path | str) -> None:
    lines = [r.to_json_line() for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_transcript(path: Path | str) -> list[TranscriptRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(TranscriptRecord.from_json_line(line))
    return records


def grade_records(
    records: Sequence[TranscriptRecord], cases: Sequence[GoldenCase]
) -> list[GradedResult]:
    """Offline replay: parse and grade recorded responses, by case id."""
    by_id = {c.case_id: c for c in cases if c.verified}
    graded = []
    for record in sorted(records, key=lambda r: r.case_id):
        gold = by_id.get(record.case_id)
        if gold is None:
            continue
        parsed = parse_answer(record.response, gold.diagram, gold.target.neuron)
        graded.append(grade(parsed, gold))
    return graded


def _render_events(events: Iterable[Event], diagram: Diagram) -> str:
    times = {n.id: n.time for n in diagram.neurons}
    ordered = sorted(events, key=lambda ev: (times.get(ev.neuron, 0), ev.neuron))
    return " ".join(ev.render(diagram) for ev in ordered) if ordered else "-"


def tally(graded: Sequence[GradedResult]) -> dict[str, int]:
    counts = {v.value: 0 for v in Verdict}
    for g in graded:
        counts[g.verdict.value] += 1
    return counts


def render_report_markdown(
    graded: Sequence[GradedResult],
    cases: Sequence[GoldenCase],
    model: str,
    skipped: Sequence[str] = (),
    transport_failures: Sequence[tuple[str, str]] = (),
) -> str:
    """Grid of per-case verdicts plus traces for every disagreement."""
    by_id = {c.case_id: c for c in cases}
    counts = tally(graded)
    lines = [
        "# Causal benchmark evaluation",
        "",
        f"Model: {model}",
        f"Cases graded: {len(graded)}",
    ]
    if skipped:
        lines.append(
            f"Skipped (structure pending): {', '.join(sorted(skipped))}"
        )
    if transport_failures:
        lines.append(
            "Transport failures: "
            + ", ".join(f"{cid} ({err})" for cid, err in sorted(transport_failures))
        )
    lines += [
        "",
        "| case | verdict | occurrence | gold causes | parsed causes | missing | extra |",
        "|------|---------|------------|-------------|---------------|---------|-------|",
    ]
    for g in graded:
        gold = by_id[g.case_id]
        occurrence = "ok" if g.occurrence_correct else "wrong"
        if g.verdict is Verdict.UNPARSED:
            occurrence = "unparsed"
        lines.append(
            f"| {g.case_id} | {g.verdict.value} | {occurrence} "
            f"| {_render_events(gold.expected_initial_causes, gold.diagram)} "
            f"| {_render_events(g.parsed.causes, gold.diagram)} "
            f"| {_render_events(g.missing, gold.diagram)} "
            f"| {_render_events(g.extra, gold.diagram)} |"
        )
    lines += [
        "",
        f"Tally: {counts['Full']} Full / {counts['Partial']} Partial / "
        f"{counts['Wrong']} Wrong / {counts['Unparsed']} Unparsed",
    ]
    disagreements = [g for g in graded if g.verdict is not Verdict.FULL]
    if disagreements:
        lines += ["", "## Disagreements"]
        for g in disagreements:
            gold = by_id[g.case_id]
            lines += ["", f"### {g.case_id}", ""]
            lines.append(
                f"Expected: occurrence {'yes' if gold.expected_occurs else 'no'}, "
                f"initial causes {_render_events(gold.expected_initial_causes, gold.diagram)}."
            )
            parsed_occ = (
                "unparsed"
                if g.parsed.occurrence is None
                else ("yes" if g.parsed.occurrence else "no")
            )
            lines.append(
                f"Parsed: occurrence {parsed_occ}, "
                f"causes {_render_events(g.parsed.causes, gold.diagram)}."
            )
            verdicts = cause_verdicts(
                gold.diagram, gold.stipulation, gold.target, time_filter=1
            )
            for ev in sorted(verdicts, key=lambda e: e.neuron):
                v = verdicts[ev]
                lines.append(
                    f"- engine: {ev.render(gold.diagram)} "
                    f"{'is' if v.is_cause else 'is not'} a cause "
                    f"({v.branch.value}, {v.reason})"
                )
    return "\n".join(lines) + "\n"


def render_report_csv(
    graded: Sequence[GradedResult], cases: Sequence[GoldenCase]
) -> str:
    by_id = {c.case_id: c for c in cases}
    lines = ["case_id,verdict,occurrence_correct,gold_causes,parsed_causes,missing,extra"]
    for g in graded:
        gold = by_id[g.case_id]

        def cell(events: Iterable[Event]) -> str:
            return _render_events(events, gold.diagram).replace(" ", ";")

        lines.append(
            f"{g.case_id},{g.verdict.value},{str(g.occurrence_correct).lower()},"
            f"{cell(gold.expected_initial_causes)},{cell(g.parsed.causes)},"
            f"{cell(g.missing)},{cell(g.extra)}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvaluationResult:
    records: tuple[TranscriptRecord, ...]
    graded: tuple[GradedResult, ...]
    skipped: tuple[str, ...]
    transport_failures: tuple[tuple[str, str], ...]
    report_markdown: str
    report_csv: str

    @property
    def tally(self) -> dict[str, int]:
        return tally(self.graded)


def run_evaluation(
    cases: Sequence[GoldenCase],
    config: HarnessConfig,
    style: Optional[PromptStyle] = None,
    transcript_path: Optional[Path | str] = None,
) -> EvaluationResult:
    """Prompt the endpoint for every verified case and grade the answers.

    Requests fan out over a bounded thread pool; results are aggregated in
    case-id order, so reports are deterministic given the responses.
    Endpoint failures are recorded per case and the run continues.
    """
    style = style or config.style
    config.credential()  # fail before any request when unset
    verified = [c for c in cases if c.verified]
    skipped = tuple(c.case_id for c in cases if not c.verified)
    prompts = {
        c.case_id: transcribe(c.diagram, c.stipulation, c.target.neuron, style)
        for c in verified
    }

    def worker(case: GoldenCase) -> tuple[str, TranscriptRecord | None, str | None]:
        try:
            record = query_model(prompts[case.case_id], config, case.case_id)
            return case.case_id, record, None
        except (TransportError, ConfigError) as exc:
            return case.case_id, None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, config.concurrency)) as pool:
        outcomes = list(pool.map(worker, verified))

    records = tuple(
        sorted(
            (rec for _, rec, _ in outcomes if rec is not None),
            key=lambda r: r.case_id,
        )
    )
    failures = tuple(
        sorted((cid, err) for cid, _, err in outcomes if err is not None)
    )
    graded = tuple(grade_records(records, verified))
    report_md = render_report_markdown(
        graded, verified, config.model, skipped, failures
    )
    report_csv = render_report_csv(graded, verified)
    if transcript_path is not None:
        write_transcript(records, transcript_path)
    return EvaluationResult(records, graded, skipped, failures, report_md, report_csv)
