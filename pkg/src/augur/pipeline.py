"""End-to-end corpus generation.

Per window: screen pairs, collect oracle judgments into an initial directed
graph, refine an ensemble of candidates to DAGs, keep the most stable one,
narrate it, score the narrative, and gate the record into the SFT corpus.
Windows run independently (optionally concurrently); one window's oracle
failure never aborts the batch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .curation import (
    CurationConfig,
    ExplanationRecord,
    quality,
    select_stable,
    serialize_sft_record,
    stability_scores,
    write_corpus,
)
from .dataset import TimeSeriesWindow
from .errors import OracleUnavailableError
from .explanation import efficiency
from .graph import DirectedEdge, DirectedGraph, RefinementLog, refine
from .oracle import (
    BACKWARD,
    FORWARD,
    JudgmentResponse,
    MockOracle,
    build_judgment_request,
)
from .screening import CandidatePair, build_candidate_graph, prune

__all__ = [
    "DEFAULT_TASK",
    "Oracle",
    "PipelineConfig",
    "WindowFailure",
    "PipelineResult",
    "mock_ensemble_factory",
    "shared_oracle_factory",
    "assemble_initial_graph",
    "process_window",
    "run_pipeline",
]

logger = logging.getLogger("augur.pipeline")

DEFAULT_TASK = (
    "Infer the causal graph over the given variables and summarize the key "
    "dynamics it explains."
)


class Oracle(Protocol):
    def judge_pair(self, req) -> JudgmentResponse: ...

    def propose_cycle_fix(self, g, critique): ...

    def synthesize_narrative(self, g_f, log, window, precision: int = 2) -> str: ...


OracleFactory = Callable[[int], Oracle]


@dataclass(frozen=True)
class PipelineConfig:
    top_k: int = 10
    tau: float = 0.0
    method: str = "spearman"
    target: str | None = None
    top_target: int = 5
    k_max: int = 8
    precision: int = 2
    domain_context: str = ""
    task: str = DEFAULT_TASK
    curation: CurationConfig = CurationConfig()
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class WindowFailure:
    index: int
    kind: str
    message: str


@dataclass(frozen=True)
class PipelineResult:
    records: tuple[ExplanationRecord, ...]  # every scored window, ungated
    kept: tuple[ExplanationRecord, ...]  # records passing the quality gate
    corpus_lines: tuple[str, ...]
    failures: tuple[WindowFailure, ...]

    @property
    def all_failures_oracle_unavailable(self) -> bool:
        return bool(self.failures) and all(
            f.kind == OracleUnavailableError.__name__ for f in self.failures
        )


def mock_ensemble_factory(
    lag_budget: int = 5, margin: float = 0.3, samples: int = 5
) -> OracleFactory:
    """N deterministic mocks with slightly jittered decision margins, so the
    ensemble members can disagree the way resampled oracle calls would."""

    def factory(i: int) -> MockOracle:
        return MockOracle(lag_budget, margin + 0.02 * (i - samples // 2))

    return factory


def shared_oracle_factory(oracle: Oracle) -> OracleFactory:
    """Every ensemble pass consults the same client; variation comes from
    the endpoint's sampling temperature."""
    return lambda i: oracle


def screen_pairs(window: TimeSeriesWindow, cfg: PipelineConfig) -> list[CandidatePair]:
    """The pairs submitted for judgment: target-centred when a target is
    configured, otherwise thresholded top-K over all pairs."""
    if cfg.target is not None:
        candidate = build_candidate_graph(
            window, cfg.target, cfg.tau, cfg.top_target, cfg.method
        )
        return [
            CandidatePair(a, b, rho, cfg.method)
            for (a, b), rho in sorted(candidate.edges.items())
        ]
    return prune(window, cfg.top_k, cfg.tau, cfg.method)


def assemble_initial_graph(
    window: TimeSeriesWindow,
    pairs: Sequence[CandidatePair],
    judgments: Sequence[JudgmentResponse],
) -> DirectedGraph:
    """Directed edges from pairwise verdicts; confounded/spurious pairs
    contribute no edge."""
    edges = []
    for pair, judgment in zip(pairs, judgments):
        if judgment.conclusion == FORWARD:
            src, dst = pair.first, pair.second
        elif judgment.conclusion == BACKWARD:
            src, dst = pair.second, pair.first
        else:
            continue
        edges.append(
            DirectedEdge(
                src=src,
                dst=dst,
                label=judgment.conclusion,
                correlation=pair.correlation,
            )
        )
    descriptions = {m.name: m.description for m in window.variables if m.description}
    return DirectedGraph(window.names, tuple(edges), descriptions)


def process_window(
    window: TimeSeriesWindow,
    cfg: PipelineConfig,
    oracle_factory: OracleFactory,
) -> ExplanationRecord:
    """Screen, judge, refine an ensemble, select, narrate, and score."""
    pairs = screen_pairs(window, cfg)
    ensemble: list[DirectedGraph] = []
    logs: list[RefinementLog] = []
    for i in range(cfg.curation.samples):
        oracle = oracle_factory(i)
        judgments = [
            oracle.judge_pair(
                build_judgment_request(
                    window, pair, cfg.precision, cfg.domain_context
                )
            )
            for pair in pairs
        ]
        g0 = assemble_initial_graph(window, pairs, judgments)

        def fix(g, critique, _oracle=oracle):
            return _oracle.propose_cycle_fix(g, critique, cfg.domain_context)

        g_final, log = refine(g0, fixer=fix, k_max=cfg.k_max)
        ensemble.append(g_final)
        logs.append(log)
    scores = stability_scores(ensemble)
    idx, g_star = select_stable(ensemble)
    max_stability = cfg.curation.samples * len(g_star.edges)
    summary = oracle_factory(idx).synthesize_narrative(
        g_star, logs[idx], window, precision=cfg.precision
    )
    eff = efficiency(summary, g_star, window.names, cfg.curation.penalty)
    q = quality(scores[idx], max_stability, eff, cfg.curation)
    ratio = 1.0 if max_stability == 0 else scores[idx] / max_stability
    return ExplanationRecord(
        window=window,
        graph=g_star,
        summary=summary,
        stability=ratio,
        efficiency=eff,
        quality=q,
    )


def run_pipeline(
    windows: Sequence[TimeSeriesWindow],
    cfg: PipelineConfig,
    oracle_factory: OracleFactory,
    corpus_path: str | Path | None = None,
) -> PipelineResult:
    """Process every window; failures are recorded, not raised.

    Output order equals input order regardless of worker completion order.
    When corpus_path is given, the gated records are written there as JSON
    Lines.
    """

    def run_one(index: int) -> ExplanationRecord:
        return process_window(windows[index], cfg, oracle_factory)

    indices = range(len(windows))
    if cfg.workers == 1 or len(windows) <= 1:
        outcomes = [_attempt(run_one, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(lambda i: _attempt(run_one, i), indices))

    records = tuple(o for o in outcomes if isinstance(o, ExplanationRecord))
    failures = tuple(o for o in outcomes if isinstance(o, WindowFailure))
    kept = tuple(r for r in records if r.quality >= cfg.curation.alpha)
    corpus_lines = tuple(
        serialize_sft_record(r, cfg.task, cfg.precision) for r in kept
    )
    if corpus_path is not None:
        write_corpus(corpus_lines, corpus_path)
    return PipelineResult(
        records=records, kept=kept, corpus_lines=corpus_lines, failures=failures
    )


def _attempt(runner: Callable[[int], ExplanationRecord], index: int):
    try:
        return runner(index)
    except Exception as exc:  # per-window isolation is the contract
        logger.warning("window %d failed: %s: %s", index, type(exc).__name__, exc)
        return WindowFailure(index=index, kind=type(exc).__name__, message=str(exc))
