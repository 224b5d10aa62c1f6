"""Neuron-diagram causal reasoning benchmark toolkit.

Simulates firing dynamics on layered neuron diagrams, identifies causes by
counterfactual analysis with off-path blocking maintenance, ships a golden
corpus with a textual diagram format, generates seeded random diagrams
with complexity metrics, and grades LLM answers against the gold standard.
"""

from .causes import (
    Branch,
    CauseVerdict,
    NoPathError,
    PathAnalysis,
    PolarityMismatchError,
    TieDisagreementError,
    all_causes,
    cause_verdicts,
    collapse_redundant,
    counterfactual,
    direct_paths,
    is_bifurcating,
    is_cause,
)
from .corpus import CorpusError, GoldenCase, load_corpus, verified_cases
from .dsl import DslParseError, ParsedDiagram, parse_diagram, serialize_diagram
from .generate import (
    ComplexityProfile,
    GenParams,
    GenerationError,
    InfeasibleParamsError,
    complexity,
    generate,
)
from .harness import (
    ConfigError,
    EvaluationResult,
    GradedResult,
    HarnessConfig,
    ParsedAnswer,
    TranscriptRecord,
    TransportError,
    Verdict,
    grade,
    grade_records,
    parse_answer,
    query_model,
    run_evaluation,
)
from .model import (
    Diagram,
    DiagramError,
    Edge,
    EdgeKind,
    Event,
    Intervention,
    InvalidDiagramError,
    Neuron,
    Polarity,
    Stipulation,
    UnknownNeuronError,
    Violation,
    clamp,
    diagram_to_json,
    is_valid,
    validate,
)
from .simulate import FiringAssignment, InterventionConflictError, occurs, simulate
from .transcribe import (
    PromptStyle,
    Template,
    clause_coverage_issues,
    transcribe,
    transcribe_intervention,
)

__version__ = "0.1.0"
