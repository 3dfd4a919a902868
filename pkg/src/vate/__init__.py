"""Self-hosted AI tutoring service.

The package analyzes wrong answers from a student's scratch work with a
two-stage model pipeline, caches canonical analyses in a bounded
per-problem pool, tutors the student through a guarded multi-round
dialogue, and aggregates learning-outcome metrics.
"""

from .analytics import (
    AblatedElement,
    AblationJudgment,
    GroupedReport,
    KpMetrics,
    LearningEvent,
    SessionMetrics,
    Winner,
    group_report,
    repeat_learning_report,
    session_metrics,
    win_rate,
)
from .dialogue import (
    DialogueEngine,
    DialogueQuality,
    DialogueSession,
    GuardEvent,
    QualityBucket,
    SessionClosed,
    Turn,
    classify_dialogue_quality,
    guard_tutor_message,
)
from .draft import (
    DraftAnalysis,
    DraftQualityScore,
    GateVerdict,
    analyze_draft,
    gate_submission,
    score_draft_quality,
)
from .gateway import (
    BackendRejected,
    BackendTimeout,
    CompletionRequest,
    CompletionResponse,
    GatewayError,
    HttpBackend,
    HttpBackendConfig,
    LlmGateway,
    MalformedResponse,
    UsageLedger,
)
from .model import (
    AnalysisSource,
    DraftImage,
    ErrorCauseAnalysis,
    NormalizedAnswer,
    Problem,
    StudentSubmission,
    answers_equal,
    normalize_answer,
)
from .pipeline import (
    Ablation,
    AnalysisBundle,
    AnalysisPipeline,
    ProblemRepository,
    SubmissionOutcome,
    UnknownProblem,
    Verdict,
    analyze_error,
    assemble_error_prompt,
)
from .pool import ErrorPool, InsertOutcome, PoolKey, PoolStats
from .scripted import ScriptedBackend
from .simulate import SavingsReport, SimConfig, run_cost_sim

__version__ = "0.1.0"

__all__ = [
    "AblatedElement",
    "AblationJudgment",
    "Ablation",
    "AnalysisBundle",
    "AnalysisPipeline",
    "AnalysisSource",
    "BackendRejected",
    "BackendTimeout",
    "CompletionRequest",
    "CompletionResponse",
    "DialogueEngine",
    "DialogueQuality",
    "DialogueSession",
    "DraftAnalysis",
    "DraftImage",
    "DraftQualityScore",
    "ErrorCauseAnalysis",
    "ErrorPool",
    "GateVerdict",
    "GatewayError",
    "GroupedReport",
    "GuardEvent",
    "HttpBackend",
    "HttpBackendConfig",
    "InsertOutcome",
    "KpMetrics",
    "LearningEvent",
    "LlmGateway",
    "MalformedResponse",
    "NormalizedAnswer",
    "PoolKey",
    "PoolStats",
    "Problem",
    "ProblemRepository",
    "QualityBucket",
    "SavingsReport",
    "ScriptedBackend",
    "SessionClosed",
    "SessionMetrics",
    "SimConfig",
    "StudentSubmission",
    "SubmissionOutcome",
    "Turn",
    "UnknownProblem",
    "UsageLedger",
    "Verdict",
    "Winner",
    "analyze_draft",
    "analyze_error",
    "answers_equal",
    "assemble_error_prompt",
    "classify_dialogue_quality",
    "gate_submission",
    "group_report",
    "guard_tutor_message",
    "normalize_answer",
    "repeat_learning_report",
    "run_cost_sim",
    "score_draft_quality",
    "session_metrics",
    "win_rate",
]
