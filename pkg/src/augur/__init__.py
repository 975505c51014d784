"""Causal-explanation tooling for multivariate time series.

Screens variable pairs by rank correlation, asks an oracle (remote model
or deterministic mock) to judge causal direction, repairs the resulting
graph into a DAG, scores narratives for grounding and length, and writes
a quality-gated SFT corpus. Also ships a small discrete causal calculus
(d-separation, back-door adjustment, Markov blankets) and a lagged SCM
simulator for ground-truth benchmarking.
"""

from .causal import (
    DiscreteBayesNet,
    FeatureSelection,
    JointTable,
    backdoor_adjust,
    backdoor_satisfies,
    conditional_entropy,
    d_separated,
    entropy,
    intervene,
    joint,
    load_net,
    markov_blanket,
    mutual_information,
    save_net,
    select_features,
)
from .curation import (
    EOT_TOKEN,
    CurationConfig,
    ExplanationRecord,
    curate,
    parse_sft_record,
    quality,
    select_stable,
    serialize_sft_record,
    stability_scores,
    write_corpus,
)
from .dataset import (
    StandardizationStats,
    TimeSeriesWindow,
    VariableMeta,
    destandardize,
    impute,
    load_csv,
    serialize_series,
    standardize,
)
from .errors import (
    AugurError,
    ConfigError,
    MalformedRecordError,
    MalformedResponseError,
    OracleUnavailableError,
    OutOfCycleError,
    PositivityError,
    ReversalConflictError,
    RowParseError,
    SchemaError,
    SerializationError,
    StaleModificationError,
    TableTooLargeError,
    UnimputableError,
)
from .explanation import (
    CausalClaim,
    EfficiencyScore,
    claim_report,
    efficiency,
    extract_claims,
    groundedness,
)
from .graph import (
    Critique,
    DirectedEdge,
    DirectedGraph,
    GraphModification,
    RefinementStep,
    ancestors,
    apply_modification,
    descendants,
    find_critiques,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    refine,
    save_graph,
    to_dot,
    topological_sort,
)
from .oracle import (
    JudgmentRequest,
    JudgmentResponse,
    MockOracle,
    OracleConfig,
    RemoteOracle,
    mock_judge,
)
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    WindowFailure,
    mock_ensemble_factory,
    process_window,
    run_pipeline,
    shared_oracle_factory,
)
from .screening import (
    CandidatePair,
    UndirectedCandidateGraph,
    build_candidate_graph,
    correlation,
    correlation_matrix,
    prune,
    top_k_pairs,
)
from .simulation import (
    LaggedSCM,
    Mechanism,
    RecoveryReport,
    chain_scm,
    evaluate_recovery,
    generate,
    load_scm,
    save_scm,
)

__version__ = "0.1.0"

__all__ = [
    "AugurError",
    "CandidatePair",
    "CausalClaim",
    "ConfigError",
    "Critique",
    "CurationConfig",
    "DirectedEdge",
    "DirectedGraph",
    "DiscreteBayesNet",
    "EfficiencyScore",
    "EOT_TOKEN",
    "ExplanationRecord",
    "FeatureSelection",
    "GraphModification",
    "JointTable",
    "JudgmentRequest",
    "JudgmentResponse",
    "LaggedSCM",
    "MalformedRecordError",
    "MalformedResponseError",
    "Mechanism",
    "MockOracle",
    "OracleConfig",
    "OracleUnavailableError",
    "OutOfCycleError",
    "PipelineConfig",
    "PipelineResult",
    "PositivityError",
    "RecoveryReport",
    "RefinementStep",
    "RemoteOracle",
    "ReversalConflictError",
    "RowParseError",
    "SchemaError",
    "SerializationError",
    "StaleModificationError",
    "StandardizationStats",
    "TableTooLargeError",
    "TimeSeriesWindow",
    "UndirectedCandidateGraph",
    "UnimputableError",
    "VariableMeta",
    "WindowFailure",
    "ancestors",
    "apply_modification",
    "backdoor_adjust",
    "backdoor_satisfies",
    "build_candidate_graph",
    "chain_scm",
    "claim_report",
    "conditional_entropy",
    "correlation",
    "correlation_matrix",
    "curate",
    "d_separated",
    "descendants",
    "destandardize",
    "efficiency",
    "entropy",
    "evaluate_recovery",
    "extract_claims",
    "find_critiques",
    "generate",
    "graph_from_dict",
    "graph_to_dict",
    "groundedness",
    "impute",
    "intervene",
    "joint",
    "load_csv",
    "load_graph",
    "load_net",
    "load_scm",
    "markov_blanket",
    "mock_ensemble_factory",
    "mock_judge",
    "mutual_information",
    "parse_sft_record",
    "process_window",
    "prune",
    "quality",
    "refine",
    "run_pipeline",
    "save_graph",
    "save_net",
    "save_scm",
    "select_features",
    "select_stable",
    "serialize_series",
    "serialize_sft_record",
    "shared_oracle_factory",
    "stability_scores",
    "standardize",
    "to_dot",
    "top_k_pairs",
    "topological_sort",
    "write_corpus",
]
