"""Causal-judgment and narrative oracle boundary.

Three prompt builders (pairwise judgment, cycle resolution, narrative
summary), a remote text-generation client with bounded concurrency and
retry/backoff, strict response parsing onto the four-way hypothesis space,
and a deterministic offline mock driven by lagged cross-correlation.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .dataset import TimeSeriesWindow, VariableMeta, serialize_series
from .errors import MalformedResponseError, OracleUnavailableError, OutOfCycleError
from .graph import Critique, DirectedGraph, GraphModification, RefinementLog
from .screening import CandidatePair

__all__ = [
    "FORWARD",
    "BACKWARD",
    "CONFOUNDED",
    "SPURIOUS",
    "HYPOTHESES",
    "JudgmentRequest",
    "JudgmentResponse",
    "OracleConfig",
    "render_prompt_judgment",
    "render_prompt_cycle_fix",
    "render_prompt_narrative",
    "parse_conclusion",
    "parse_judgment_body",
    "mock_judge",
    "RemoteOracle",
    "MockOracle",
]

FORWARD = "forward"
BACKWARD = "backward"
CONFOUNDED = "confounded"
SPURIOUS = "spurious"
HYPOTHESES = frozenset({FORWARD, BACKWARD, CONFOUNDED, SPURIOUS})

API_KEY_ENV = "AUGUR_API_KEY"

_METHOD_STATEMENT = {
    "spearman": "Spearman's rho",
    "pearson": "Pearson's r",
    "kendall": "Kendall's tau",
}


@dataclass(frozen=True)
class JudgmentRequest:
    """One pairwise judgment: the pair, its serialized series, and context."""

    pair: CandidatePair
    serialized_a: str
    serialized_b: str
    metas: tuple[VariableMeta, VariableMeta]
    domain_context: str = ""

    def __post_init__(self):
        if not self.serialized_a or not self.serialized_b:
            raise ValueError("serialized series must be non-empty")
        if (self.metas[0].name, self.metas[1].name) != (
            self.pair.first,
            self.pair.second,
        ):
            raise ValueError("metas must match the pair's variable order")


@dataclass(frozen=True)
class JudgmentResponse:
    reasoning: str
    conclusion: str
    raw: str

    def __post_init__(self):
        if self.conclusion not in HYPOTHESES:
            raise ValueError(f"conclusion must be one of {sorted(HYPOTHESES)}")


@dataclass(frozen=True)
class OracleConfig:
    """Remote-endpoint settings; the API key comes from AUGUR_API_KEY only."""

    endpoint: str
    model: str
    analysis_model: str | None = None
    judgment_temperature: float = 0.1
    analysis_temperature: float = 0.5
    max_tokens: int = 4096
    max_in_flight: int = 4
    retry_budget: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    request_timeout: float = 60.0
    # key path into the response JSON holding the generated text
    response_path: tuple[str | int, ...] = ("text",)

    def __post_init__(self):
        if not 0.0 <= self.judgment_temperature <= 2.0:
            raise ValueError("judgment_temperature must lie in [0, 2]")
        if not 0.0 <= self.analysis_temperature <= 2.0:
            raise ValueError("analysis_temperature must lie in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be >= 0")


# --- prompt construction -------------------------------------------------


def _correlation_statement(pair: CandidatePair) -> str:
    stat = _METHOD_STATEMENT.get(pair.method, "correlation")
    return f"{stat} = {pair.correlation:+.2f}"


def render_prompt_judgment(req: JudgmentRequest) -> str:
    """Pairwise-judgment prompt; a pure function of the request."""
    domain = req.domain_context.strip() or "general time series"
    meta_a, meta_b = req.metas
    def_a = meta_a.description or "no further definition provided"
    def_b = meta_b.description or "no further definition provided"
    hypotheses = "\n".join(
        [
            f"- A -> B: {meta_a.name} directly drives {meta_b.name}.",
            f"- B -> A: {meta_b.name} directly drives {meta_a.name}.",
            "- Confounder: an unobserved or third factor drives both.",
            "- Correlation Only: the association is coincidental or an artifact.",
        ]
    )
    return (
        "ROLE:\n"
        f"You are an expert in {domain} and a specialist in causal inference.\n"
        "\n"
        "CONTEXT:\n"
        "I am analyzing data from this system to build a Causal Directed "
        "Acyclic Graph (DAG). I have identified a significant statistical "
        "correlation between two variables and need to determine their "
        "causal associations.\n"
        "\n"
        "VARIABLE DEFINITIONS:\n"
        f"Variable A: {meta_a.name} - {def_a}\n"
        f"Variable B: {meta_b.name} - {def_b}\n"
        "\n"
        "INPUT DATA:\n"
        f"Correlation between {meta_a.name} and {meta_b.name}: "
        f"{_correlation_statement(req.pair)}\n"
        f"Series A ({meta_a.name}): {req.serialized_a}\n"
        f"Series B ({meta_b.name}): {req.serialized_b}\n"
        "\n"
        "TASK:\n"
        "Evaluate the following causal hypotheses from first principles of "
        "the domain together with the statistical evidence above.\n"
        "\n"
        "HYPOTHESES:\n"
        f"{hypotheses}\n"
        "\n"
        "OUTPUT FORMAT:\n"
        'Provide a JSON object with keys: "reasoning" and "conclusion". '
        'The value of "conclusion" must be exactly one of: "A -> B", '
        '"B -> A", "Confounder", "Correlation Only".\n'
    )


def render_prompt_cycle_fix(
    g: DirectedGraph, critique: Critique, domain_context: str = ""
) -> str:
    """Cycle-resolution prompt listing all edges and the offending cycle."""
    domain = domain_context.strip() or "general time series"
    all_edges = "\n".join(f"{e.src} -> {e.dst}" for e in g.edges)
    cycle = "\n".join(f"{a} -> {b}" for a, b in critique.edges)
    return (
        "ROLE:\n"
        "You are an expert in systems modeling and graph theory, "
        "specializing in the validation of causal structures.\n"
        "\n"
        "CONTEXT:\n"
        "I have performed pairwise causal analysis to generate a set of "
        "directed edges representing a system's hypothesized causal "
        f"structure in the domain of {domain}. I need you to validate this "
        "structure.\n"
        "\n"
        "INPUT: LIST OF DIRECTED EDGES\n"
        f"{all_edges}\n"
        "\n"
        "DETECTED CYCLE:\n"
        f"{cycle}\n"
        "\n"
        "TASK:\n"
        "1. Identify Cycles: the cycle above violates acyclicity.\n"
        '2. Propose Resolution: propose which single edge is the "weakest '
        'link" and should be removed.\n'
        "3. Justify Proposal: provide a clear, logical justification for "
        "your choice.\n"
        "\n"
        "OUTPUT FORMAT:\n"
        "Provide a structured response with your justification, ending with "
        'a final line of the form "REMOVE: X -> Y" naming one edge of the '
        "cycle.\n"
    )


def _downsample_rows(window: TimeSeriesWindow, precision: int, max_rows: int) -> str:
    stride = max(1, math.ceil(window.length / max_rows))
    header = "Timestamp, " + ", ".join(window.names)
    lines = [header]
    for t in range(0, window.length, stride):
        stamp = window.timestamps[t].strftime("%Y-%m-%d %H:%M")
        cells = ", ".join(f"{v:.{precision}f}" for v in window.values[t])
        lines.append(f"{stamp}, {cells}")
    return "\n".join(lines)


def render_prompt_narrative(
    g_f: DirectedGraph,
    log: RefinementLog,
    window: TimeSeriesWindow,
    precision: int = 2,
    max_rows: int = 64,
) -> str:
    """Narrative-summary prompt: DAG edge list, key modifications, data."""
    edges = "\n".join(f"{e.src} -> {e.dst}" for e in g_f.edges) or "(no edges)"
    if log:
        mods = "\n".join(
            f"- iteration {s.iteration}: {s.modification.kind} "
            f"{s.modification.edge[0]} -> {s.modification.edge[1]} ({s.source})"
            for s in log
        )
    else:
        mods = "none"
    series = _downsample_rows(window, precision, max_rows)
    return (
        "TASK:\n"
        "Your task is to analyze the provided multivariate time series data "
        "to identify the 2-3 most significant patterns or events. Then, "
        "write a concise narrative summary that explains your findings "
        "using the causal associations defined in the Causal DAG.\n"
        "\n"
        "INPUTS:\n"
        '1. Causal DAG (this graph is the "rule book" for causation):\n'
        f"{edges}\n"
        "\n"
        "2. Key modifications made during structure validation:\n"
        f"{mods}\n"
        "\n"
        "3. Core Variable Time Series (downsampled):\n"
        f"{series}\n"
        "\n"
        "INSTRUCTIONS:\n"
        "1. Analyze First: examine the raw time series to find the most "
        "important patterns.\n"
        "2. Explain with DAG: for each significant pattern you identify, "
        "construct a causal explanation strictly from the DAG edges.\n"
        "3. Causal Fidelity is Crucial: you must not infer any "
        "cause-and-effect relationship that is absent from the DAG.\n"
        "\n"
        "OUTPUT:\n"
        "Produce a concise summary. Start with a one-sentence overview, "
        "followed by bullet points. Each bullet point should first describe "
        "a key pattern you found in the data and then explain its cause(s) "
        "based on the DAG.\n"
    )


# --- response parsing ----------------------------------------------------

_ARROW = re.compile(r"\s*(?:->|→)\s*")


def parse_conclusion(text: str, name_a: str, name_b: str) -> str:
    """Map a conclusion string onto the four-way hypothesis space.

    Accepts the positional labels ("A -> B"), the actual variable names
    ("Wspd -> Patv"), and common synonyms, case-insensitively. Anything
    else raises rather than defaulting.
    """
    cleaned = text.strip().strip("`").strip()
    folded = _ARROW.sub(" -> ", cleaned).casefold()
    a, b = name_a.casefold(), name_b.casefold()
    forward_aliases = {"a -> b", f"{a} -> {b}", "forward"}
    backward_aliases = {"b -> a", f"{b} -> {a}", "backward"}
    confounded_aliases = {"confounder", "confounded", "common cause"}
    spurious_aliases = {"correlation only", "spurious", "coincidental"}
    if folded in forward_aliases:
        return FORWARD
    if folded in backward_aliases:
        return BACKWARD
    if folded in confounded_aliases:
        return CONFOUNDED
    if folded in spurious_aliases:
        return SPURIOUS
    raise MalformedResponseError(
        f"unrecognized conclusion {text!r} for pair ({name_a}, {name_b})", raw=text
    )


def _strip_code_fence(body: str) -> str:
    stripped = body.strip()
    if stripped.startswith("```"):
        stripped = re.sub(r"^```[a-zA-Z]*\n", "", stripped)
        stripped = re.sub(r"\n```$", "", stripped.rstrip())
    return stripped


def parse_judgment_body(raw: str, name_a: str, name_b: str) -> JudgmentResponse:
    """Parse a judgment reply: a JSON object with a "conclusion" key."""
    try:
        payload = json.loads(_strip_code_fence(raw))
    except json.JSONDecodeError as exc:
        raise MalformedResponseError(f"reply is not JSON: {exc}", raw=raw) from exc
    if not isinstance(payload, dict) or "conclusion" not in payload:
        raise MalformedResponseError('reply lacks a "conclusion" key', raw=raw)
    conclusion = parse_conclusion(str(payload["conclusion"]), name_a, name_b)
    reasoning = str(payload.get("reasoning", ""))
    return JudgmentResponse(reasoning=reasoning, conclusion=conclusion, raw=raw)


def parse_cycle_fix_reply(
    raw: str, g: DirectedGraph, critique: Critique
) -> GraphModification:
    """Extract the edge to delete from a cycle-resolution reply.

    Prefers an explicit "REMOVE: X -> Y" line; otherwise the first arrow
    expression found. Naming an edge outside the critique is an error the
    caller converts into a fallback step.
    """
    match = re.search(
        r"REMOVE:\s*(\S+)\s*(?:->|→)\s*(\S+)", raw, flags=re.IGNORECASE
    ) or re.search(r"(\S+)\s*(?:->|→)\s*(\S+)", raw)
    if match is None:
        raise MalformedResponseError("no edge named in cycle-fix reply", raw=raw)
    edge = (match.group(1).strip("`"), match.group(2).strip("`").rstrip(".,;:"))
    if edge not in critique.edges:
        raise OutOfCycleError(
            f"proposed edge {edge[0]} -> {edge[1]} is not part of the cycle"
        )
    return GraphModification("remove_edge", edge, justification=raw.strip())


# --- deterministic mock ---------------------------------------------------


def _parse_serialized(text: str) -> np.ndarray:
    return np.asarray([float(tok) for tok in text.split(",")], dtype=float)


def _lead(a: np.ndarray, b: np.ndarray, lag_budget: int) -> float:
    """max |corr(a[:T-l], b[l:])| over lags 0..lag_budget."""
    best = 0.0
    for lag in range(0, min(lag_budget, a.size - 2) + 1):
        x = a[: a.size - lag]
        y = b[lag:]
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        best = max(best, abs(float(np.corrcoef(x, y)[0, 1])))
    return best


def mock_judge(
    req: JudgmentRequest, lag_budget: int = 5, margin: float = 0.3
) -> JudgmentResponse:
    """Offline stand-in judge driven by lagged cross-correlation.

    Recovers the numeric series from their serialized text and compares the
    strongest lagged alignment in each direction: a clear lead one way is a
    directed verdict; both directions strong is a common cause; both weak is
    coincidence. Swapping the pair swaps forward/backward and fixes the
    other two verdicts.
    """
    if lag_budget < 1:
        raise ValueError("lag_budget must be >= 1")
    a = _parse_serialized(req.serialized_a)
    b = _parse_serialized(req.serialized_b)
    lead_ab = _lead(a, b, lag_budget)
    lead_ba = _lead(b, a, lag_budget)
    name_a, name_b = req.pair.first, req.pair.second
    if lead_ab >= lead_ba + margin:
        label = "A -> B"
    elif lead_ba >= lead_ab + margin:
        label = "B -> A"
    elif min(lead_ab, lead_ba) >= margin:
        label = "Confounder"
    else:
        label = "Correlation Only"
    reasoning = (
        f"lagged-alignment leads: {name_a}->{name_b} = {lead_ab:.4f}, "
        f"{name_b}->{name_a} = {lead_ba:.4f}, margin = {margin:.2f}"
    )
    raw = json.dumps({"reasoning": reasoning, "conclusion": label})
    return parse_judgment_body(raw, name_a, name_b)


class MockOracle:
    """Deterministic offline oracle: judge, cycle fixer, and narrator."""

    def __init__(self, lag_budget: int = 5, margin: float = 0.3):
        if lag_budget < 1:
            raise ValueError("lag_budget must be >= 1")
        self.lag_budget = lag_budget
        self.margin = margin

    def judge_pair(self, req: JudgmentRequest) -> JudgmentResponse:
        return mock_judge(req, self.lag_budget, self.margin)

    def propose_cycle_fix(
        self, g: DirectedGraph, critique: Critique, domain_context: str = ""
    ) -> GraphModification:
        def weight(pair: tuple[str, str]) -> tuple[float, str, str]:
            rho = g.edge(*pair).correlation
            return (abs(rho) if rho is not None else 0.0, pair[0], pair[1])

        victim = min(critique.edges, key=weight)
        return GraphModification(
            "remove_edge", victim, justification="weakest correlation in cycle"
        )

    def synthesize_narrative(
        self,
        g_f: DirectedGraph,
        log: RefinementLog,
        window: TimeSeriesWindow,
        precision: int = 2,
    ) -> str:
        lines = [
            f"Overview: {len(g_f.nodes)} variables with "
            f"{len(g_f.edges)} validated causal links."
        ]
        for src, dst in sorted(e.pair for e in g_f.edges):
            lines.append(f"- {src} -> {dst} holds.")
        return "\n".join(lines)


# --- remote client ---------------------------------------------------------

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class RemoteOracle:
    """HTTP text-generation client with audit logging.

    POSTs {"model", "prompt", "temperature", "max_tokens"} to the endpoint,
    bounds concurrent requests with a semaphore, retries transient failures
    with exponential backoff inside the retry budget, and appends one JSON
    audit line per exchange.
    """

    def __init__(
        self,
        cfg: OracleConfig,
        audit_path: str | Path | None = None,
        session: requests.Session | None = None,
    ):
        self.cfg = cfg
        self.audit_path = Path(audit_path) if audit_path is not None else None
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(cfg.max_in_flight)
        self._audit_lock = threading.Lock()

    # -- transport ---------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _extract_text(self, payload) -> str:
        cursor = payload
        for step in self.cfg.response_path:
            try:
                cursor = cursor[step]
            except (KeyError, IndexError, TypeError) as exc:
                raise MalformedResponseError(
                    f"response lacks text at path {self.cfg.response_path!r}",
                    raw=json.dumps(payload),
                ) from exc
        if not isinstance(cursor, str):
            raise MalformedResponseError(
                "generated-text field is not a string", raw=json.dumps(payload)
            )
        return cursor

    def complete(self, prompt: str, temperature: float, model: str | None = None) -> str:
        """One completion; raises OracleUnavailableError when the budget ends."""
        body = {
            "model": model or self.cfg.model,
            "prompt": prompt,
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        request_id = str(uuid.uuid4())
        attempts = self.cfg.retry_budget + 1
        last_error = "no attempt made"
        with self._gate:
            started = time.monotonic()
            for attempt in range(attempts):
                if attempt:
                    delay = min(
                        self.cfg.backoff_base * 2 ** (attempt - 1),
                        self.cfg.backoff_cap,
                    )
                    time.sleep(delay)
                try:
                    resp = self._session.post(
                        self.cfg.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=self.cfg.request_timeout,
                    )
                except requests.RequestException as exc:
                    last_error = f"transport failure: {exc}"
                    continue
                if resp.status_code in _RETRYABLE_STATUS:
                    last_error = f"retryable status {resp.status_code}"
                    continue
                if resp.status_code != 200:
                    raise OracleUnavailableError(
                        f"endpoint answered {resp.status_code}: {resp.text[:200]}"
                    )
                try:
                    payload = resp.json()
                except ValueError as exc:
                    raise MalformedResponseError(
                        f"response body is not JSON: {exc}", raw=resp.text
                    ) from exc
                text = self._extract_text(payload)
                latency_ms = (time.monotonic() - started) * 1000.0
                self._audit(request_id, prompt, text, latency_ms)
                return text
        raise OracleUnavailableError(
            f"retry budget exhausted after {attempts} attempts ({last_error})"
        )

    def _audit(self, request_id: str, prompt: str, response: str, latency_ms: float):
        if self.audit_path is None:
            return
        record = {
            "id": request_id,
            "prompt": prompt,
            "response": response,
            "latency_ms": round(latency_ms, 3),
        }
        line = json.dumps(record, ensure_ascii=False)
        with self._audit_lock:
            with self.audit_path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    # -- oracle operations ---------------------------------------------------

    def judge_pair(self, req: JudgmentRequest) -> JudgmentResponse:
        prompt = render_prompt_judgment(req)
        raw = self.complete(prompt, self.cfg.judgment_temperature)
        return parse_judgment_body(raw, req.pair.first, req.pair.second)

    def propose_cycle_fix(
        self, g: DirectedGraph, critique: Critique, domain_context: str = ""
    ) -> GraphModification:
        if len(critique.edges) < 2:
            raise ValueError("cycle critique must contain at least two edges")
        prompt = render_prompt_cycle_fix(g, critique, domain_context)
        raw = self.complete(prompt, self.cfg.judgment_temperature)
        return parse_cycle_fix_reply(raw, g, critique)

    def synthesize_narrative(
        self,
        g_f: DirectedGraph,
        log: RefinementLog,
        window: TimeSeriesWindow,
        precision: int = 2,
    ) -> str:
        prompt = render_prompt_narrative(g_f, log, window, precision=precision)
        return self.complete(
            prompt,
            self.cfg.analysis_temperature,
            model=self.cfg.analysis_model,
        )


def build_judgment_request(
    window: TimeSeriesWindow,
    pair: CandidatePair,
    precision: int = 2,
    domain_context: str = "",
) -> JudgmentRequest:
    """Assemble the judgment request for one screened pair of a window."""
    meta_a = window.meta(pair.first)
    meta_b = window.meta(pair.second)
    return JudgmentRequest(
        pair=pair,
        serialized_a=serialize_series(window.column(pair.first), precision),
        serialized_b=serialize_series(window.column(pair.second), precision),
        metas=(meta_a, meta_b),
        domain_context=domain_context,
    )
