"""Ensemble stability, quality gating, and SFT-corpus serialization.

A window's candidate graphs are scored by shared-edge consensus, the most
stable graph is kept, and records passing the quality gate are serialized
into the reserved-token JSONL training format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .dataset import TimeSeriesWindow, serialize_series
from .errors import MalformedRecordError, SerializationError
from .explanation import EfficiencyScore
from .graph import DirectedGraph, is_dag

__all__ = [
    "DATA_TOKEN",
    "TASK_TOKEN",
    "GRAPH_TOKEN",
    "SUMMARY_TOKEN",
    "EOT_TOKEN",
    "RESERVED_TOKENS",
    "ExplanationRecord",
    "CurationConfig",
    "stability_scores",
    "select_stable",
    "quality",
    "curate",
    "serialize_sft_record",
    "parse_sft_record",
    "write_corpus",
]

DATA_TOKEN = "<|data|>"
TASK_TOKEN = "<|task|>"
GRAPH_TOKEN = "<|graph|>"
SUMMARY_TOKEN = "<|summary|>"
EOT_TOKEN = "<|EOT|>"
RESERVED_TOKENS = (DATA_TOKEN, TASK_TOKEN, GRAPH_TOKEN, SUMMARY_TOKEN, EOT_TOKEN)


@dataclass(frozen=True)
class CurationConfig:
    samples: int = 5
    penalty: float = 1e-4
    alpha: float = 0.6
    stability_weight: float = 0.5
    efficiency_weight: float = 0.5

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.stability_weight < 0 or self.efficiency_weight < 0:
            raise ValueError("weights must be >= 0")
        if self.stability_weight + self.efficiency_weight <= 0:
            raise ValueError("at least one weight must be positive")


@dataclass(frozen=True)
class ExplanationRecord:
    """One curated unit: window, selected DAG, narrative, and its scores.

    stability holds the consensus ratio (score over the ensemble maximum,
    1 when the maximum is 0), so quality is reconstructible from the record
    alone.
    """

    window: TimeSeriesWindow
    graph: DirectedGraph
    summary: str
    stability: float
    efficiency: EfficiencyScore
    quality: float

    def __post_init__(self):
        if not is_dag(self.graph):
            raise ValueError("record graph must be a DAG")
        if not 0.0 <= self.stability <= 1.0:
            raise ValueError("stability ratio must lie in [0, 1]")


def stability_scores(graphs: Sequence[DirectedGraph]) -> list[int]:
    """Shared-edge consensus: score_k = sum over all j of |E_k ∩ E_j|.

    The sum runs over every member including j = k, so a graph's own edge
    count contributes.
    """
    if not graphs:
        raise ValueError("need at least one graph")
    node_set = set(graphs[0].nodes)
    for g in graphs[1:]:
        if set(g.nodes) != node_set:
            raise ValueError("ensemble graphs must share a node set")
    edge_sets = [g.edge_pairs for g in graphs]
    return [
        sum(len(mine & theirs) for theirs in edge_sets) for mine in edge_sets
    ]


def select_stable(graphs: Sequence[DirectedGraph]) -> tuple[int, DirectedGraph]:
    """Index and graph of the consensus argmax; ties go to the lowest index."""
    scores = stability_scores(graphs)
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return best, graphs[best]


def quality(
    stability: int,
    max_stability: int,
    eff: EfficiencyScore,
    cfg: CurationConfig,
) -> float:
    """Weighted blend of the normalized stability ratio and efficiency value.

    An all-empty ensemble (max stability 0) counts as full consensus.
    """
    if stability < 0 or stability > max_stability:
        raise ValueError("need 0 <= stability <= max_stability")
    ratio = 1.0 if max_stability == 0 else stability / max_stability
    return cfg.stability_weight * ratio + cfg.efficiency_weight * eff.value


def curate(
    records: Sequence[ExplanationRecord], cfg: CurationConfig
) -> list[ExplanationRecord]:
    """Records whose quality clears the gate, input order preserved."""
    return [r for r in records if r.quality >= cfg.alpha]


# --- SFT serialization ----------------------------------------------------


def _series_block(window: TimeSeriesWindow, precision: int) -> str:
    lines = [
        f"{name}: {serialize_series(window.column(name), precision)}"
        for name in window.names
    ]
    return "\n".join(lines)


def _check_clean(part: str, where: str) -> None:
    for token in RESERVED_TOKENS:
        if token in part:
            raise SerializationError(
                f"{where} contains reserved token {token}; records are rejected, "
                "not escaped"
            )


def serialize_sft_record(
    record: ExplanationRecord, task: str, precision: int = 2
) -> str:
    """One JSONL line {"input", "target"} in the reserved-token format.

    input  = <|data|> series block <|task|> task <|EOT|>
    target = <|graph|> edge list (one "A -> B" per line, sorted) <|summary|>
             summary <|EOT|>
    """
    series = _series_block(record.window, precision)
    edges = "\n".join(
        f"{src} -> {dst}" for src, dst in sorted(e.pair for e in record.graph.edges)
    )
    _check_clean(series, "series block")
    _check_clean(task, "task text")
    _check_clean(edges, "edge list")
    _check_clean(record.summary, "summary")
    input_seq = f"{DATA_TOKEN}{series}{TASK_TOKEN}{task}{EOT_TOKEN}"
    target_seq = f"{GRAPH_TOKEN}{edges}{SUMMARY_TOKEN}{record.summary}{EOT_TOKEN}"
    return json.dumps({"input": input_seq, "target": target_seq}, ensure_ascii=False)


def _slice_between(text: str, start_token: str, end_token: str, where: str) -> str:
    start = text.find(start_token)
    if start < 0:
        raise MalformedRecordError(f"{where} is missing {start_token}")
    start += len(start_token)
    end = text.find(end_token, start)
    if end < 0:
        raise MalformedRecordError(f"{where} is missing {end_token}")
    return text[start:end]


def parse_sft_record(line: str) -> tuple[str, str, list[tuple[str, str]], str]:
    """Inverse of serialize_sft_record: (series text, task, edges, summary)."""
    if not line.strip():
        raise MalformedRecordError("empty corpus line")
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"corpus line is not JSON: {exc}") from exc
    if not isinstance(payload, dict) or "input" not in payload or "target" not in payload:
        raise MalformedRecordError('corpus line needs "input" and "target" keys')
    series = _slice_between(payload["input"], DATA_TOKEN, TASK_TOKEN, "input")
    task = _slice_between(payload["input"], TASK_TOKEN, EOT_TOKEN, "input")
    edge_text = _slice_between(payload["target"], GRAPH_TOKEN, SUMMARY_TOKEN, "target")
    summary = _slice_between(payload["target"], SUMMARY_TOKEN, EOT_TOKEN, "target")
    edges: list[tuple[str, str]] = []
    for raw in edge_text.splitlines():
        raw = raw.strip()
        if not raw:
            continue
        if " -> " not in raw:
            raise MalformedRecordError(f"unparseable edge line {raw!r}")
        src, dst = raw.split(" -> ", 1)
        edges.append((src, dst))
    return series, task, edges, summary


def write_corpus(lines: Sequence[str], path: str | Path) -> None:
    """JSON Lines, UTF-8, LF endings, trailing newline."""
    data = "".join(line + "\n" for line in lines)
    Path(path).write_bytes(data.encode("utf-8"))
