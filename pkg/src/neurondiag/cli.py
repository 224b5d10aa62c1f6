"""Command-line front door binding all modules."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .causes import cause_verdicts, verdict_to_json
from .corpus import CorpusError, load_corpus
from .dsl import DslParseError, parse_diagram, serialize_diagram
from .generate import GenParams, GenerationError, complexity, generate
from .harness import (
    ConfigError,
    HarnessConfig,
    grade_records,
    read_transcript,
    render_report_csv,
    render_report_markdown,
    run_evaluation,
    tally,
)
from .model import DiagramError, Event, Polarity
from .simulate import occurs, simulate
from .transcribe import PromptStyle, Template, transcribe


def _load_file(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DiagramError(f"cannot read {path}: {exc}") from None
    try:
        return parse_diagram(text)
    except DslParseError as exc:
        raise DiagramError(f"{path}:{exc}") from None


def _cmd_simulate(args) -> int:
    parsed = _load_file(args.file)
    assignment = simulate(parsed.diagram, parsed.stipulation)
    if args.json:
        print(json.dumps({"states": dict(sorted(assignment.states.items()))}))
        return 0
    by_col: dict[int, list[str]] = {}
    for n in parsed.diagram.by_time:
        state = "on" if assignment[n.id] else "off"
        by_col.setdefault(n.time, []).append(f"{n.id}={state}")
    for t in sorted(by_col):
        print(f"t{t}: " + " ".join(by_col[t]))
    return 0


def _cmd_causes(args) -> int:
    parsed = _load_file(args.file)
    diagram = parsed.diagram
    target_id = args.target or parsed.target
    assignment = simulate(diagram, parsed.stipulation)
    polarity = Polarity.PLUS if assignment[target_id] else Polarity.MINUS
    target = Event(target_id, polarity)
    verdicts = cause_verdicts(diagram, parsed.stipulation, target, args.at)
    causes = sorted(
        (ev for ev, v in verdicts.items() if v.is_cause),
        key=lambda ev: (diagram.neuron_map[ev.neuron].time, ev.neuron),
    )
    if args.json:
        doc = {
            "target": target.render(diagram),
            "causes": [verdict_to_json(verdicts[ev], diagram) for ev in causes],
        }
        print(json.dumps(doc))
        return 0
    print(", ".join(ev.render(diagram) for ev in causes) if causes else "(none)")
    if args.trace:
        for ev in sorted(
            verdicts, key=lambda e: (diagram.neuron_map[e.neuron].time, e.neuron)
        ):
            v = verdicts[ev]
            mark = "cause" if v.is_cause else "not a cause"
            print(f"  {ev.render(diagram)}: {mark} ({v.branch.value}, {v.reason})")
    return 0


def _cmd_transcribe(args) -> int:
    parsed = _load_file(args.file)
    style = PromptStyle(
        template=Template(args.style),
        short_answer=args.short,
        initial_causes_only=args.initial_only,
    )
    prompt = transcribe(parsed.diagram, parsed.stipulation, parsed.target, style)
    if args.json:
        print(json.dumps({"prompt": prompt}))
    else:
        print(prompt)
    return 0


def _cmd_generate(args) -> int:
    params = GenParams(
        columns=args.columns,
        rows=args.rows,
        stim_density=args.stim_density,
        inhib_probability=args.inhib_probability,
        threshold2_probability=args.threshold2_probability,
        seed=args.seed,
        require_target_reachable=args.require_target_reachable,
    )
    diagram, stipulation, target = generate(params)
    text = serialize_diagram(diagram, stipulation, target.neuron)
    out = Path(args.output)
    out.write_text(text, encoding="utf-8")
    profile = complexity(diagram, stipulation)
    profile_path = out.with_suffix(".profile.json")
    profile_path.write_text(
        json.dumps(profile.to_json(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {out} and {profile_path}")
    return 0


def _cmd_evaluate(args) -> int:
    cases = load_corpus(Path(args.corpus) if args.corpus else None)
    config = HarnessConfig.load(args.config)
    result = run_evaluation(cases, config, transcript_path=args.output)
    if args.report:
        Path(args.report).write_text(result.report_markdown, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(result.report_csv, encoding="utf-8")
    counts = result.tally
    print(
        f"{counts['Full']} Full / {counts['Partial']} Partial / "
        f"{counts['Wrong']} Wrong / {counts['Unparsed']} Unparsed"
    )
    for cid, err in result.transport_failures:
        print(f"error: {cid}: {err}", file=sys.stderr)
    return 1 if result.transport_failures else 0


def _cmd_grade(args) -> int:
    cases = load_corpus(Path(args.gold) if args.gold else None)
    records = read_transcript(args.transcript)
    graded = grade_records(records, cases)
    verified = [c for c in cases if c.verified]
    model = records[0].model if records else ""
    report = render_report_markdown(graded, verified, model)
    Path(args.output).write_text(report, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(
            render_report_csv(graded, verified), encoding="utf-8"
        )
    counts = tally(graded)
    print(
        f"{counts['Full']} Full / {counts['Partial']} Partial / "
        f"{counts['Wrong']} Wrong / {counts['Unparsed']} Unparsed"
    )
    return 0


def _cmd_verify_corpus(args) -> int:
    cases = load_corpus(Path(args.corpus) if args.corpus else None)
    verified = [c for c in cases if c.verified]
    mismatches = []
    rows = []
    for case in verified:
        # target polarity already encodes the expected occurrence
        occurs_ok = occurs(case.diagram, case.stipulation, case.target)
        initial = frozenset(
            ev
            for ev, v in cause_verdicts(
                case.diagram, case.stipulation, case.target, time_filter=1
            ).items()
            if v.is_cause
        )
        causes_ok = initial == case.expected_initial_causes
        ok = occurs_ok and causes_ok
        if not ok:
            got = " ".join(sorted(ev.token for ev in initial))
            want = " ".join(sorted(ev.token for ev in case.expected_initial_causes))
            mismatches.append(
                f"{case.case_id}: occurrence {'ok' if occurs_ok else 'MISMATCH'}, "
                f"initial causes got [{got}] want [{want}]"
            )
        rows.append({"case_id": case.case_id, "ok": ok})
    if args.json:
        print(json.dumps({"cases": rows, "mismatches": mismatches}))
    else:
        for row in rows:
            print(f"{row['case_id']}: {'ok' if row['ok'] else 'MISMATCH'}")
        for line in mismatches:
            print(line, file=sys.stderr)
        matched = sum(1 for r in rows if r["ok"])
        print(f"{matched}/{len(rows)} verified cases match")
    return 1 if mismatches else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurondiag",
        description="Simulate neuron diagrams, identify causes, and grade "
        "language-model answers against the golden corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="print the firing table of a diagram")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("causes", help="print the cause set of the target event")
    p.add_argument("file")
    p.add_argument("--at", type=int, default=None, metavar="N",
                   help="restrict causes to column N")
    p.add_argument("--target", default=None, metavar="ID",
                   help="override the diagram's ask target")
    p.add_argument("--trace", action="store_true",
                   help="print a per-candidate verdict trace")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_causes)

    p = sub.add_parser("transcribe", help="print the English prompt")
    p.add_argument("file")
    p.add_argument("--style", choices=["explicit", "contracted"],
                   default="explicit")
    p.add_argument("--short", action="store_true",
                   help="append the short-answer instruction")
    p.add_argument("--initial-only", action="store_true",
                   help="ask only for the causes at t1")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_transcribe)

    p = sub.add_parser("generate", help="write a seeded random diagram")
    p.add_argument("--columns", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stim-density", type=float, default=0.6)
    p.add_argument("--inhib-probability", type=float, default=0.2)
    p.add_argument("--threshold2-probability", type=float, default=0.15)
    p.add_argument("--require-target-reachable", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="run the corpus against an endpoint")
    p.add_argument("--corpus", default=None)
    p.add_argument("--config", required=True)
    p.add_argument("-o", "--output", required=True,
                   help="transcript JSONL output path")
    p.add_argument("--report", default=None, help="markdown report path")
    p.add_argument("--csv", default=None, help="CSV report path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("grade", help="re-grade a recorded transcript offline")
    p.add_argument("transcript")
    p.add_argument("--gold", default=None, help="corpus directory")
    p.add_argument("-o", "--output", required=True, help="markdown report path")
    p.add_argument("--csv", default=None, help="CSV report path")
    p.set_defaults(func=_cmd_grade)

    p = sub.add_parser(
        "verify-corpus",
        help="check the engine against every verified golden case",
    )
    p.add_argument("--corpus", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_verify_corpus)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DiagramError, CorpusError, ConfigError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
