from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from neurondiag.causes import all_causes
from neurondiag.harness import (
    ConfigError,
    HarnessConfig,
    MalformedResponseError,
    ParsedAnswer,
    RetryPolicy,
    TranscriptRecord,
    TransportError,
    Verdict,
    grade,
    grade_records,
    parse_answer,
    query_model,
    read_transcript,
    render_report_markdown,
    run_evaluation,
    write_transcript,
)
from neurondiag.model import Event, Polarity

from fixtures_llm import GEMINI_ANSWERS, GEMINI_EXPECTED_VERDICTS, gold_answer_text

CRED_ENV = "NEURONDIAG_TEST_KEY"


class _MockHandler(BaseHTTPRequestHandler):
    # behavior is injected per-server: a callable (payload) -> (status, body)
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        status, body = self.server.behavior(payload)  # type: ignore[attr-defined]
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MockHandler)
    server.behavior = lambda payload: (200, _completion("ok"))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join(timeout=5)


def _completion(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def _config(server, **overrides) -> HarnessConfig:
    defaults = dict(
        endpoint_url=f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions",
        model="mock-model",
        credential_env=CRED_ENV,
        concurrency=3,
        timeout_s=5.0,
        retry=RetryPolicy(max_attempts=4, backoff_base_s=0.01, backoff_cap_s=0.02),
    )
    defaults.update(overrides)
    return HarnessConfig(**defaults)


@pytest.fixture(autouse=True)
def credential(monkeypatch):
    monkeypatch.setenv(CRED_ENV, "test-token")


# ---------------------------------------------------------------- parsing


def test_parse_answer_positive(by_id):
    case = by_id["d01"]
    parsed = parse_answer(
        "Yes, E occurs at t3. The cause at t1 of E’s occurring is "
        "C’s occurrence at t1.",
        case.diagram,
        "E",
    )
    assert parsed.occurrence is True
    assert parsed.causes == {Event("C", Polarity.PLUS)}
    assert not parsed.unparsed


def test_parse_answer_negative_with_absence(by_id):
    case = by_id["d03"]
    parsed = parse_answer(
        "No, E does not occur at t3. The causes at t1 of E's not occurring "
        "are A and the absence of C.",
        case.diagram,
        "E",
    )
    assert parsed.occurrence is False
    assert parsed.causes == {Event("A", Polarity.PLUS), Event("C", Polarity.MINUS)}


def test_parse_answer_unrelated_prose(by_id):
    case = by_id["d01"]
    parsed = parse_answer("The weather is lovely today.", case.diagram, "E")
    assert parsed.unparsed
    assert parsed.occurrence is None
    assert parsed.causes == frozenset()


def test_parse_answer_final_answer_prefix(by_id):
    case = by_id["d17"]
    parsed = parse_answer(
        "Final answer: No, G does not occur at t4. The cause at t1 of G's "
        "not occurring is C.",
        case.diagram,
        "G",
    )
    assert parsed.occurrence is False
    assert parsed.causes == {Event("C", Polarity.PLUS)}


def test_parse_answer_without_yes_no(by_id):
    case = by_id["d01"]
    parsed = parse_answer(
        "E occurs at t3. The initial cause at t1 is the occurrence of C.",
        case.diagram,
        "E",
    )
    assert parsed.occurrence is True
    assert Event("C", Polarity.PLUS) in parsed.causes


def test_parse_answer_non_occurrence_cue(by_id):
    case = by_id["d03"]
    parsed = parse_answer(
        "No. The cause is the non-occurrence of C.", case.diagram, "E"
    )
    assert parsed.occurrence is False
    assert parsed.causes == {Event("C", Polarity.MINUS)}


# ---------------------------------------------------------------- grading


def _parsed(occurrence, causes):
    return ParsedAnswer(occurrence, frozenset(Event.from_token(t) for t in causes), False)


def test_grade_full(by_id):
    result = grade(_parsed(True, ["C+"]), by_id["d01"])
    assert result.verdict is Verdict.FULL
    assert result.occurrence_correct


def test_grade_partial_missing_cause(by_id):
    result = grade(_parsed(True, ["A+"]), by_id["d10"])
    assert result.verdict is Verdict.PARTIAL
    assert result.missing == {Event.from_token("C+")}


def test_grade_partial_extra_cause(by_id):
    result = grade(_parsed(True, ["C+", "A+"]), by_id["d01"])
    assert result.verdict is Verdict.PARTIAL
    assert result.extra == {Event.from_token("A+")}


def test_grade_wrong_occurrence(by_id):
    result = grade(_parsed(False, ["C+"]), by_id["d02"])
    assert result.verdict is Verdict.WRONG


def test_grade_wrong_disjoint_causes(by_id):
    result = grade(_parsed(True, ["A+"]), by_id["d01"])
    assert result.verdict is Verdict.WRONG


def test_grade_unparsed(by_id):
    result = grade(ParsedAnswer(None, frozenset(), True), by_id["d01"])
    assert result.verdict is Verdict.UNPARSED


def test_grade_rejects_unverified(by_id):
    with pytest.raises(ValueError):
        grade(_parsed(True, ["C+"]), by_id["d04"])


# ---------------------------------------------------------------- transport


def test_query_model_roundtrip(mock_server):
    seen = {}

    def echo(payload):
        seen.update(payload)
        return 200, _completion(f"echo: {payload['messages'][0]['content']}")

    mock_server.behavior = echo
    config = _config(mock_server, request_params={"temperature": 0.2})
    record = query_model("hello diagram", config, case_id="d01")
    assert record.response == "echo: hello diagram"
    assert record.attempts == 1
    assert record.case_id == "d01"
    assert record.model == "mock-model"
    # decoding parameters pass through verbatim and are recorded
    assert seen["temperature"] == 0.2
    assert record.request_params == {"temperature": 0.2}


def test_query_model_retries_transient_500(mock_server):
    calls = {"n": 0}

    def flaky(payload):
        calls["n"] += 1
        if calls["n"] <= 3:
            return 500, {"error": "boom"}
        return 200, _completion("recovered")

    mock_server.behavior = flaky
    record = query_model("p", _config(mock_server))
    assert record.attempts == 4
    assert record.response == "recovered"


def test_query_model_gives_up_after_cap(mock_server):
    mock_server.behavior = lambda payload: (500, {"error": "down"})
    with pytest.raises(TransportError):
        query_model("p", _config(mock_server))


def test_query_model_auth_failure_is_immediate(mock_server):
    calls = {"n": 0}

    def reject(payload):
        calls["n"] += 1
        return 401, {"error": "bad key"}

    mock_server.behavior = reject
    with pytest.raises(TransportError):
        query_model("p", _config(mock_server))
    assert calls["n"] == 1


def test_query_model_missing_credential(mock_server, monkeypatch):
    monkeypatch.delenv(CRED_ENV)
    calls = {"n": 0}

    def count(payload):
        calls["n"] += 1
        return 200, _completion("x")

    mock_server.behavior = count
    with pytest.raises(ConfigError):
        query_model("p", _config(mock_server))
    assert calls["n"] == 0  # configuration error before any request


def test_query_model_malformed_body(mock_server):
    mock_server.behavior = lambda payload: (200, {"unexpected": "shape"})
    with pytest.raises(MalformedResponseError):
        query_model("p", _config(mock_server))


# ------------------------------------------------------------- evaluation


def _prompt_to_case(corpus, config):
    from neurondiag.transcribe import transcribe

    out = {}
    for case in corpus:
        if case.verified:
            prompt = transcribe(
                case.diagram, case.stipulation, case.target.neuron, config.style
            )
            out[prompt] = case
    return out


def test_run_evaluation_gold_echo(mock_server, corpus):
    config = _config(mock_server)
    prompt_map = _prompt_to_case(corpus, config)

    def answer_gold(payload):
        case = prompt_map[payload["messages"][0]["content"]]
        return 200, _completion(gold_answer_text(case))

    mock_server.behavior = answer_gold
    result = run_evaluation(corpus, config)
    assert result.tally == {"Full": 10, "Partial": 0, "Wrong": 0, "Unparsed": 0}
    assert len(result.skipped) == 15
    assert not result.transport_failures
    assert [g.case_id for g in result.graded] == sorted(g.case_id for g in result.graded)


def test_run_evaluation_all_no(mock_server, corpus):
    config = _config(mock_server)
    mock_server.behavior = lambda payload: (
        200,
        _completion("No, it does not occur. The cause is unknown."),
    )
    result = run_evaluation(corpus, config)
    gold_yes = [c.case_id for c in corpus if c.verified and c.expected_occurs]
    for graded in result.graded:
        if graded.case_id in gold_yes:
            assert graded.verdict is Verdict.WRONG


def test_full_verdicts_agree_with_engine(mock_server, corpus):
    config = _config(mock_server)
    prompt_map = _prompt_to_case(corpus, config)
    mock_server.behavior = lambda payload: (
        200,
        _completion(gold_answer_text(prompt_map[payload["messages"][0]["content"]])),
    )
    result = run_evaluation(corpus, config)
    by_id = {c.case_id: c for c in corpus if c.verified}
    for graded in result.graded:
        assert graded.verdict is Verdict.FULL
        case = by_id[graded.case_id]
        engine = all_causes(case.diagram, case.stipulation, case.target, 1)
        assert graded.parsed.causes == engine


def test_run_evaluation_records_transport_failures(mock_server, corpus):
    config = _config(mock_server, retry=RetryPolicy(1, 0.01, 0.01))
    mock_server.behavior = lambda payload: (500, {"error": "down"})
    result = run_evaluation(corpus, config)
    assert len(result.transport_failures) == 10
    assert result.tally["Full"] == 0


# ------------------------------------------------------ replay and reports


def _gemini_records():
    now = datetime.now(timezone.utc).isoformat()
    return [
        TranscriptRecord(
            case_id=cid,
            prompt="",
            model="gemini-fixture",
            response=text,
            latency_ms=0.0,
            timestamp=now,
            attempts=1,
        )
        for cid, text in GEMINI_ANSWERS.items()
    ]


def test_gemini_fixture_verdicts(verified):
    graded = grade_records(_gemini_records(), verified)
    got = {g.case_id: g.verdict.value for g in graded}
    assert got == GEMINI_EXPECTED_VERDICTS


def test_transcript_roundtrip(tmp_path):
    records = _gemini_records()
    path = tmp_path / "t.jsonl"
    write_transcript(records, path)
    loaded = read_transcript(path)
    assert [r.case_id for r in loaded] == [r.case_id for r in records]
    assert [r.response for r in loaded] == [r.response for r in records]


def test_report_replay_is_byte_stable(tmp_path, verified):
    records = _gemini_records()
    path = tmp_path / "t.jsonl"
    write_transcript(records, path)
    first = render_report_markdown(
        grade_records(read_transcript(path), verified), verified, "gemini-fixture"
    )
    second = render_report_markdown(
        grade_records(read_transcript(path), verified), verified, "gemini-fixture"
    )
    assert first == second
    assert "Tally: 7 Full / 3 Partial / 0 Wrong / 0 Unparsed" in first


def test_report_lists_disagreement_traces(verified):
    graded = grade_records(_gemini_records(), verified)
    report = render_report_markdown(graded, verified, "gemini-fixture")
    assert "## Disagreements" in report
    assert "### d10" in report
    assert "is a cause" in report


def test_config_load_and_errors(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "endpoint_url": "http://localhost:1/v1",
                "model": "m",
                "credential_env": CRED_ENV,
                "concurrency": 2,
                "retry": {"max_attempts": 2, "backoff_base_s": 0.1, "backoff_cap_s": 1},
                "prompt_style": {"template": "explicit", "short_answer": True,
                                  "initial_causes_only": True},
                "request_params": {"temperature": 0},
            }
        ),
        encoding="utf-8",
    )
    config = HarnessConfig.load(path)
    assert config.model == "m"
    assert config.retry.max_attempts == 2
    assert config.request_params == {"temperature": 0}
    with pytest.raises(ConfigError):
        HarnessConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{}", encoding="utf-8")
    with pytest.raises(ConfigError):
        HarnessConfig.load(bad)
