import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from augur.errors import (
    MalformedResponseError,
    OracleUnavailableError,
    OutOfCycleError,
)
from augur.graph import Critique, DirectedEdge, DirectedGraph
from augur.oracle import (
    JudgmentRequest,
    MockOracle,
    OracleConfig,
    RemoteOracle,
    build_judgment_request,
    mock_judge,
    parse_conclusion,
    parse_cycle_fix_reply,
    parse_judgment_body,
    render_prompt_cycle_fix,
    render_prompt_judgment,
    render_prompt_narrative,
)
from augur.screening import CandidatePair

from util import make_window


def request_for(a, b, name_a="a", name_b="b", rho=0.85, method="spearman"):
    serial_a = ", ".join(f"{v:.2f}" for v in a)
    serial_b = ", ".join(f"{v:.2f}" for v in b)
    w = make_window([name_a, name_b], [list(a), list(b)])
    pair = CandidatePair(first=name_a, second=name_b, correlation=rho, method=method)
    return JudgmentRequest(
        pair=pair,
        serialized_a=serial_a,
        serialized_b=serial_b,
        metas=(w.meta(name_a), w.meta(name_b)),
    )


# --- prompt rendering ----------------------------------------------------------


def test_judgment_prompt_structure():
    req = request_for([1.0, 2.0, 3.0], [2.0, 4.0, 6.0], "Wspd", "Patv")
    prompt = render_prompt_judgment(req)
    for section in (
        "ROLE:",
        "CONTEXT:",
        "VARIABLE DEFINITIONS:",
        "INPUT DATA:",
        "TASK:",
        "HYPOTHESES:",
        "OUTPUT FORMAT:",
    ):
        assert section in prompt
    # the four options, spelled exactly as the parser expects them back
    assert '"A -> B"' in prompt
    assert '"B -> A"' in prompt
    assert '"Confounder"' in prompt
    assert '"Correlation Only"' in prompt
    assert "Spearman's rho = +0.85" in prompt
    assert "1.00, 2.00, 3.00" in prompt
    assert '"reasoning"' in prompt and '"conclusion"' in prompt


def test_judgment_prompt_correlation_sign_and_method():
    req = request_for([1.0, 2.0], [2.0, 1.0], rho=-0.5, method="kendall")
    assert "Kendall's tau = -0.50" in render_prompt_judgment(req)


def test_judgment_prompt_deterministic():
    req = request_for([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    assert render_prompt_judgment(req) == render_prompt_judgment(req)


def test_cycle_fix_prompt_lists_cycle_and_remove_format():
    g = DirectedGraph(
        nodes=("A", "B", "C"),
        edges=(DirectedEdge("A", "B"), DirectedEdge("B", "C"), DirectedEdge("C", "A")),
    )
    (critique,) = __import__("augur.graph", fromlist=["find_critiques"]).find_critiques(g)
    prompt = render_prompt_cycle_fix(g, critique, domain_context="wind farms")
    assert "DETECTED CYCLE:" in prompt
    assert "REMOVE: X -> Y" in prompt
    assert "wind farms" in prompt
    for a, b in critique.edges:
        assert f"{a} -> {b}" in prompt


def test_narrative_prompt_downsamples_long_windows():
    T = 500
    w = make_window(["x", "y"], [list(range(T)), list(range(T))])
    g = DirectedGraph(nodes=("x", "y"), edges=(DirectedEdge("x", "y"),))
    prompt = render_prompt_narrative(g, (), w, max_rows=64)
    data_lines = [
        line for line in prompt.splitlines() if line.startswith("2025-")
    ]
    assert 0 < len(data_lines) <= 64
    assert "x -> y" in prompt
    assert "none" in prompt  # no key modifications


# --- conclusion parsing -----------------------------------------------------------


@pytest.mark.parametrize(
    "text,expected",
    [
        ("A -> B", "forward"),
        ("a->b", "forward"),
        ("Wspd -> Patv", "forward"),
        ("B -> A", "backward"),
        ("patv → wspd", "backward"),
        ("Confounder", "confounded"),
        ("COMMON CAUSE", "confounded"),
        ("Correlation Only", "spurious"),
        ("spurious", "spurious"),
    ],
)
def test_parse_conclusion_aliases(text, expected):
    assert parse_conclusion(text, "Wspd", "Patv") == expected


def test_parse_conclusion_never_defaults():
    with pytest.raises(MalformedResponseError):
        parse_conclusion("it is complicated", "a", "b")


def test_parse_judgment_body_plain_and_fenced():
    body = {"reasoning": "because", "conclusion": "A -> B"}
    raw = json.dumps(body)
    parsed = parse_judgment_body(raw, "a", "b")
    assert parsed.conclusion == "forward"
    assert parsed.reasoning == "because"
    assert parsed.raw == raw

    fenced = "```json\n" + raw + "\n```"
    assert parse_judgment_body(fenced, "a", "b").conclusion == "forward"


def test_parse_judgment_body_rejects_non_json_and_missing_key():
    with pytest.raises(MalformedResponseError):
        parse_judgment_body("The answer is A -> B.", "a", "b")
    with pytest.raises(MalformedResponseError):
        parse_judgment_body('{"reasoning": "no conclusion here"}', "a", "b")


def test_parse_cycle_fix_reply():
    g = DirectedGraph(
        nodes=("A", "B"),
        edges=(DirectedEdge("A", "B"), DirectedEdge("B", "A")),
    )
    critique = Critique(kind="two_cycle", edges=(("A", "B"), ("B", "A")))
    mod = parse_cycle_fix_reply(
        "The weakest link is clearly this one.\nREMOVE: A -> B", g, critique
    )
    assert mod.kind == "remove_edge"
    assert mod.edge == ("A", "B")
    assert "weakest link" in mod.justification

    with pytest.raises(OutOfCycleError):
        parse_cycle_fix_reply("REMOVE: C -> D", g, critique)
    with pytest.raises(MalformedResponseError):
        parse_cycle_fix_reply("cannot decide", g, critique)


# --- the mock judge ------------------------------------------------------------


def shifted_pair(T=120, shift=2, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=T + shift)
    b = np.concatenate([np.zeros(shift), a[:-shift]])  # b trails a by `shift`
    return a[:T], b[:T]


def test_mock_judge_forward_on_shifted_series():
    a, b = shifted_pair()
    assert mock_judge(request_for(a, b)).conclusion == "forward"


def test_mock_judge_backward_when_swapped():
    a, b = shifted_pair()
    assert mock_judge(request_for(b, a)).conclusion == "backward"


def test_mock_judge_spurious_on_independent_noise():
    rng = np.random.default_rng(1)
    a = rng.normal(size=150)
    b = rng.normal(size=150)
    assert mock_judge(request_for(a, b), margin=0.3).conclusion == "spurious"


def test_mock_judge_confounded_on_common_driver():
    rng = np.random.default_rng(2)
    z = rng.normal(size=150)
    a = z + 0.05 * rng.normal(size=150)
    b = z + 0.05 * rng.normal(size=150)
    assert mock_judge(request_for(a, b)).conclusion == "confounded"


def test_mock_judge_antisymmetric():
    flip = {"forward": "backward", "backward": "forward"}
    for seed in range(12):
        rng = np.random.default_rng(seed)
        kind = seed % 3
        z = rng.normal(size=100)
        if kind == 0:
            a, b = shifted_pair(seed=seed)
        elif kind == 1:
            a, b = z, rng.normal(size=100)
        else:
            a, b = z + 0.1 * rng.normal(size=100), z + 0.1 * rng.normal(size=100)
        one = mock_judge(request_for(a, b)).conclusion
        other = mock_judge(request_for(b, a)).conclusion
        assert other == flip.get(one, one)


def test_mock_judge_verdict_is_itself_parseable():
    a, b = shifted_pair()
    res = mock_judge(request_for(a, b))
    assert parse_judgment_body(res.raw, "a", "b").conclusion == res.conclusion


def test_mock_oracle_cycle_fix_picks_weakest():
    g = DirectedGraph(
        nodes=("A", "B", "C"),
        edges=(
            DirectedEdge("A", "B", correlation=0.9),
            DirectedEdge("B", "C", correlation=-0.95),
            DirectedEdge("C", "A", correlation=0.4),
        ),
    )
    critique = Critique(
        kind="cycle", edges=(("A", "B"), ("B", "C"), ("C", "A"))
    )
    mod = MockOracle().propose_cycle_fix(g, critique)
    assert mod.edge == ("C", "A")


def test_mock_narrative_lists_edges():
    g = DirectedGraph(
        nodes=("x", "y", "z"),
        edges=(DirectedEdge("y", "z"), DirectedEdge("x", "y")),
    )
    w = make_window(["x", "y", "z"], [[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]])
    text = MockOracle().synthesize_narrative(g, (), w)
    assert text.splitlines()[0].startswith("Overview: 3 variables")
    assert "- x -> y holds." in text
    assert "- y -> z holds." in text


# --- remote client ---------------------------------------------------------------


class FakeEndpoint:
    """Scripted local HTTP endpoint recording everything it sees."""

    def __init__(self):
        self.requests = []
        self.scripted = []  # queue of (status, payload)
        self.handler_delay = 0.0
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()

        fake = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                with fake._lock:
                    fake.in_flight += 1
                    fake.peak_in_flight = max(fake.peak_in_flight, fake.in_flight)
                try:
                    length = int(self.headers.get("Content-Length", 0))
                    body = json.loads(self.rfile.read(length) or b"{}")
                    with fake._lock:
                        fake.requests.append(
                            {"body": body, "headers": dict(self.headers)}
                        )
                        if fake.scripted:
                            status, payload = fake.scripted.pop(0)
                        else:
                            status, payload = 200, {"text": "ok"}
                    if fake.handler_delay:
                        import time

                        time.sleep(fake.handler_delay)
                    data = json.dumps(payload).encode()
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                finally:
                    with fake._lock:
                        fake.in_flight -= 1

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/v1/complete"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def endpoint():
    fake = FakeEndpoint()
    yield fake
    fake.close()


def oracle_config(endpoint, **overrides):
    base = dict(
        endpoint=endpoint.url,
        model="judge-model",
        retry_budget=3,
        backoff_base=0.5,
        request_timeout=5.0,
    )
    base.update(overrides)
    return OracleConfig(**base)


def test_remote_complete_success_and_request_shape(endpoint, monkeypatch):
    monkeypatch.setenv("AUGUR_API_KEY", "sk-test-123")
    endpoint.scripted.append((200, {"text": "generated!"}))
    client = RemoteOracle(oracle_config(endpoint))
    out = client.complete("hello", temperature=0.1)
    assert out == "generated!"
    (seen,) = endpoint.requests
    assert seen["body"] == {
        "model": "judge-model",
        "prompt": "hello",
        "temperature": 0.1,
        "max_tokens": 4096,
    }
    assert seen["headers"]["Authorization"] == "Bearer sk-test-123"


def test_remote_no_key_means_no_auth_header(endpoint, monkeypatch):
    monkeypatch.delenv("AUGUR_API_KEY", raising=False)
    client = RemoteOracle(oracle_config(endpoint))
    client.complete("x", temperature=0.0)
    assert "Authorization" not in endpoint.requests[0]["headers"]


def test_remote_retries_with_exponential_backoff(endpoint, monkeypatch):
    sleeps = []
    monkeypatch.setattr("augur.oracle.time.sleep", sleeps.append)
    endpoint.scripted += [(500, {}), (429, {}), (200, {"text": "third time"})]
    client = RemoteOracle(oracle_config(endpoint))
    assert client.complete("x", temperature=0.1) == "third time"
    assert sleeps == [0.5, 1.0]
    assert len(endpoint.requests) == 3


def test_remote_backoff_is_capped(endpoint, monkeypatch):
    sleeps = []
    monkeypatch.setattr("augur.oracle.time.sleep", sleeps.append)
    endpoint.scripted += [(503, {})] * 3 + [(200, {"text": "ok"})]
    client = RemoteOracle(oracle_config(endpoint, backoff_base=4.0, backoff_cap=6.0))
    client.complete("x", temperature=0.1)
    assert sleeps == [4.0, 6.0, 6.0]


def test_remote_budget_exhaustion(endpoint, monkeypatch):
    monkeypatch.setattr("augur.oracle.time.sleep", lambda s: None)
    endpoint.scripted += [(500, {})] * 10
    client = RemoteOracle(oracle_config(endpoint, retry_budget=2))
    with pytest.raises(OracleUnavailableError):
        client.complete("x", temperature=0.1)
    assert len(endpoint.requests) == 3  # initial try + 2 retries


def test_remote_non_retryable_status_fails_fast(endpoint):
    endpoint.scripted.append((400, {"error": "bad request"}))
    client = RemoteOracle(oracle_config(endpoint))
    with pytest.raises(OracleUnavailableError):
        client.complete("x", temperature=0.1)
    assert len(endpoint.requests) == 1


def test_remote_response_path(endpoint):
    endpoint.scripted.append(
        (200, {"choices": [{"text": "nested answer"}]})
    )
    cfg = oracle_config(endpoint, response_path=("choices", 0, "text"))
    assert RemoteOracle(cfg).complete("x", temperature=0.1) == "nested answer"


def test_remote_response_path_mismatch(endpoint):
    endpoint.scripted.append((200, {"unexpected": "shape"}))
    client = RemoteOracle(oracle_config(endpoint))
    with pytest.raises(MalformedResponseError):
        client.complete("x", temperature=0.1)


def test_remote_in_flight_bound(endpoint):
    endpoint.handler_delay = 0.05
    client = RemoteOracle(oracle_config(endpoint, max_in_flight=2))
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda i: client.complete(f"p{i}", 0.1), range(8)))
    assert endpoint.peak_in_flight <= 2
    assert len(endpoint.requests) == 8


def test_remote_audit_log(endpoint, tmp_path):
    audit = tmp_path / "audit.jsonl"
    client = RemoteOracle(oracle_config(endpoint), audit_path=audit)
    client.complete("first prompt", temperature=0.1)
    client.complete("second prompt", temperature=0.5)
    lines = [json.loads(l) for l in audit.read_text().splitlines()]
    assert len(lines) == 2
    for record in lines:
        assert set(record) == {"id", "prompt", "response", "latency_ms"}
    assert lines[0]["prompt"] == "first prompt"
    assert lines[0]["id"] != lines[1]["id"]


def test_remote_judge_uses_judgment_temperature(endpoint):
    endpoint.scripted.append(
        (200, {"text": json.dumps({"reasoning": "r", "conclusion": "A -> B"})})
    )
    client = RemoteOracle(oracle_config(endpoint))
    req = request_for([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])
    res = client.judge_pair(req)
    assert res.conclusion == "forward"
    assert endpoint.requests[0]["body"]["temperature"] == 0.1


def test_remote_narrative_uses_analysis_profile(endpoint):
    cfg = oracle_config(endpoint, analysis_model="analyst-model")
    client = RemoteOracle(cfg)
    g = DirectedGraph(nodes=("x", "y"), edges=(DirectedEdge("x", "y"),))
    w = make_window(["x", "y"], [[1.0, 2.0], [2.0, 3.0]])
    client.synthesize_narrative(g, (), w)
    body = endpoint.requests[0]["body"]
    assert body["temperature"] == 0.5
    assert body["model"] == "analyst-model"


# --- request assembly -------------------------------------------------------------


def test_build_judgment_request_serializes_columns():
    w = make_window(["u", "v"], [[1.234, 5.678], [9.0, 10.0]])
    pair = CandidatePair(first="u", second="v", correlation=1.0, method="pearson")
    req = build_judgment_request(w, pair, precision=1)
    assert req.serialized_a == "1.2, 5.7"
    assert req.serialized_b == "9.0, 10.0"
    assert req.metas[0].name == "u" and req.metas[1].name == "v"
