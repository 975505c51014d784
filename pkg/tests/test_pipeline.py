import time

import pytest

from augur.curation import CurationConfig
from augur.errors import OracleUnavailableError
from augur.oracle import (
    CONFOUNDED,
    FORWARD,
    JudgmentResponse,
    MockOracle,
)
from augur.pipeline import (
    PipelineConfig,
    WindowFailure,
    assemble_initial_graph,
    mock_ensemble_factory,
    process_window,
    run_pipeline,
    screen_pairs,
    shared_oracle_factory,
)
from augur.screening import CandidatePair, prune
from augur.simulation import chain_scm, evaluate_recovery, generate

from util import make_window


CHAIN = chain_scm(["a", "b", "c", "d"], lag=1, coefficient=1.5)


def chain_window(T=200, seed=0, noise=0.0):
    scm = chain_scm(["a", "b", "c", "d"], lag=1, coefficient=1.5,
                    noise_scale=noise, seed=seed)
    return generate(scm, T)


def mock_config(**overrides):
    defaults = dict(
        top_k=10,
        tau=0.42,
        method="spearman",
        curation=CurationConfig(samples=5),
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


# --- config ----------------------------------------------------------------------


def test_config_rejects_bad_workers():
    with pytest.raises(ValueError):
        PipelineConfig(workers=0)


def test_mock_ensemble_margins_straddle_the_base():
    factory = mock_ensemble_factory(lag_budget=5, margin=0.3, samples=5)
    margins = [factory(i).margin for i in range(5)]
    assert margins == pytest.approx([0.26, 0.28, 0.30, 0.32, 0.34])
    assert all(factory(i).lag_budget == 5 for i in range(5))


def test_shared_factory_reuses_one_client():
    oracle = MockOracle()
    factory = shared_oracle_factory(oracle)
    assert factory(0) is oracle
    assert factory(3) is oracle


# --- screening routes ---------------------------------------------------------------


def test_screen_pairs_default_route_matches_prune():
    window = chain_window()
    cfg = mock_config()
    assert screen_pairs(window, cfg) == prune(window, cfg.top_k, cfg.tau, cfg.method)


def test_screen_pairs_target_route():
    # target links to its 2 strongest neighbours, non-target pairs over tau
    # come along, and only b's connected component survives
    window = chain_window()
    cfg = mock_config(target="b", top_target=2)
    pairs = screen_pairs(window, cfg)
    assert {(p.first, p.second) for p in pairs} == {
        ("a", "b"),
        ("b", "c"),
        ("c", "d"),
    }
    direct = [p for p in pairs if "b" in (p.first, p.second)]
    assert len(direct) == 2
    assert all(p.method == "spearman" for p in pairs)


# --- graph assembly -----------------------------------------------------------------


def response(conclusion):
    return JudgmentResponse(reasoning="r", conclusion=conclusion, raw="raw")


def test_assemble_initial_graph_directs_edges():
    window = make_window(["x", "y", "z"], [[0, 1, 2, 3], [1, 2, 3, 4], [9, 1, 5, 2]])
    pairs = [
        CandidatePair("x", "y", 0.9, "spearman"),
        CandidatePair("x", "z", 0.5, "spearman"),
        CandidatePair("y", "z", -0.4, "spearman"),
    ]
    judgments = [response(FORWARD), response("backward"), response(CONFOUNDED)]
    g = assemble_initial_graph(window, pairs, judgments)
    assert g.nodes == ("x", "y", "z")
    assert set(g.edge_pairs) == {("x", "y"), ("z", "x")}
    by_pair = {(e.src, e.dst): e for e in g.edges}
    assert by_pair[("x", "y")].label == FORWARD
    assert by_pair[("x", "y")].correlation == 0.9
    assert by_pair[("z", "x")].correlation == 0.5


def test_assemble_initial_graph_drops_nondirectional_verdicts():
    window = make_window(["x", "y"], [[0, 1, 2], [1, 2, 3]])
    pairs = [CandidatePair("x", "y", 0.8, "pearson")]
    for verdict in ("confounded", "spurious"):
        g = assemble_initial_graph(window, pairs, [response(verdict)])
        assert g.edges == ()


def test_assemble_initial_graph_keeps_descriptions():
    window = make_window(["x", "y"], [[0, 1, 2], [1, 2, 3]])
    metas = tuple(
        type(m)(name=m.name, description=f"about {m.name}") for m in window.variables
    )
    window = type(window)(
        timestamps=window.timestamps, values=window.values, variables=metas
    )
    g = assemble_initial_graph(window, [], [])
    assert g.descriptions == {"x": "about x", "y": "about y"}


# --- single-window processing --------------------------------------------------------


def test_process_window_recovers_noise_free_chain():
    record = process_window(
        chain_window(), mock_config(), mock_ensemble_factory(5, 0.3, 5)
    )
    report = evaluate_recovery(CHAIN.summary_edges(), record.graph)
    assert report.f1 == 1.0
    assert record.stability == 1.0
    assert 0.0 <= record.quality <= 1.0
    assert record.summary
    assert "a -> b" in record.summary


def test_process_window_is_deterministic():
    cfg = mock_config()
    factory = mock_ensemble_factory(5, 0.3, 5)
    r1 = process_window(chain_window(), cfg, factory)
    r2 = process_window(chain_window(), cfg, factory)
    assert r1.summary == r2.summary
    assert set(r1.graph.edge_pairs) == set(r2.graph.edge_pairs)
    assert r1.quality == r2.quality


def test_process_window_empty_graph_has_unit_stability_ratio():
    # independent columns: screening may keep pairs, but the mock judges
    # them non-directional, so the selected graph is empty and the
    # stability ratio falls back to its max=0 convention
    window = make_window(
        ["p", "q"],
        [[0.1, 0.9, 0.2, 0.8, 0.3], [5.0, 5.1, 4.9, 5.2, 5.0]],
    )
    record = process_window(window, mock_config(tau=0.0), mock_ensemble_factory())
    if not record.graph.edges:
        assert record.stability == 1.0


# --- batch runs ------------------------------------------------------------------


def test_run_pipeline_happy_path(tmp_path):
    windows = [chain_window(seed=s) for s in (0, 1)]
    corpus = tmp_path / "corpus.jsonl"
    result = run_pipeline(
        windows, mock_config(), mock_ensemble_factory(5, 0.3, 5), corpus_path=corpus
    )
    assert len(result.records) == 2
    assert result.failures == ()
    assert len(result.kept) == len(result.corpus_lines)
    assert corpus.read_bytes() == ("\n".join(result.corpus_lines) + "\n").encode()


def test_run_pipeline_quality_gate(tmp_path):
    windows = [chain_window()]
    strict = mock_config(curation=CurationConfig(samples=5, alpha=2.0))
    result = run_pipeline(windows, strict, mock_ensemble_factory(5, 0.3, 5))
    assert len(result.records) == 1
    assert result.kept == ()
    assert result.corpus_lines == ()


class BoomOracle(MockOracle):
    """Fails any window whose first screened pair involves `trigger`."""

    def __init__(self, trigger, exc):
        super().__init__()
        self.trigger = trigger
        self.exc = exc

    def judge_pair(self, req):
        if self.trigger in (req.pair.first, req.pair.second):
            raise self.exc
        return super().judge_pair(req)


def test_run_pipeline_isolates_failures():
    good = chain_window()
    bad = generate(chain_scm(["a", "b", "boom"], coefficient=1.5), 200)
    oracle = BoomOracle("boom", OracleUnavailableError("endpoint down"))
    result = run_pipeline([good, bad, good], mock_config(), shared_oracle_factory(oracle))
    assert len(result.records) == 2
    assert len(result.failures) == 1
    failure = result.failures[0]
    assert isinstance(failure, WindowFailure)
    assert failure.index == 1
    assert failure.kind == "OracleUnavailableError"
    assert "endpoint down" in failure.message
    assert result.all_failures_oracle_unavailable


def test_all_failures_flag_is_false_when_mixed():
    bad1 = generate(chain_scm(["a", "boom"], coefficient=1.5), 200)
    bad2 = generate(chain_scm(["a", "kapow"], coefficient=1.5), 200)

    class TwoFaced(BoomOracle):
        def judge_pair(self, req):
            if "kapow" in (req.pair.first, req.pair.second):
                raise RuntimeError("parse went sideways")
            return super().judge_pair(req)

    oracle = TwoFaced("boom", OracleUnavailableError("down"))
    result = run_pipeline([bad1, bad2], mock_config(), shared_oracle_factory(oracle))
    assert len(result.failures) == 2
    assert {f.kind for f in result.failures} == {
        "OracleUnavailableError",
        "RuntimeError",
    }
    assert not result.all_failures_oracle_unavailable


def test_no_failures_means_flag_is_false():
    result = run_pipeline(
        [chain_window()], mock_config(), mock_ensemble_factory(5, 0.3, 5)
    )
    assert not result.all_failures_oracle_unavailable


class SlowFirstOracle(MockOracle):
    """Stalls on the lexicographically first variable set it sees, so later
    windows finish before earlier ones under concurrency."""

    def __init__(self, slow_name):
        super().__init__()
        self.slow_name = slow_name

    def judge_pair(self, req):
        if self.slow_name in (req.pair.first, req.pair.second):
            time.sleep(0.05)
        return super().judge_pair(req)


def test_run_pipeline_parallel_preserves_input_order():
    slow = generate(chain_scm(["slow1", "slow2"], coefficient=1.5), 120)
    fast1 = generate(chain_scm(["f1", "f2"], coefficient=1.5), 120)
    fast2 = generate(chain_scm(["g1", "g2"], coefficient=1.5), 120)
    cfg = mock_config(workers=3)
    oracle = SlowFirstOracle("slow1")
    result = run_pipeline([slow, fast1, fast2], cfg, shared_oracle_factory(oracle))
    assert result.failures == ()
    firsts = [r.window.names[0] for r in result.records]
    assert firsts == ["slow1", "f1", "g1"]


def test_run_pipeline_parallel_matches_serial():
    windows = [chain_window(seed=s) for s in (0, 1, 2)]
    serial = run_pipeline(windows, mock_config(workers=1), mock_ensemble_factory(5, 0.3, 5))
    parallel = run_pipeline(windows, mock_config(workers=4), mock_ensemble_factory(5, 0.3, 5))
    assert serial.corpus_lines == parallel.corpus_lines


def test_run_pipeline_is_byte_deterministic(tmp_path):
    windows = [chain_window(seed=s) for s in (0, 1)]
    p1, p2 = tmp_path / "one.jsonl", tmp_path / "two.jsonl"
    run_pipeline(windows, mock_config(), mock_ensemble_factory(5, 0.3, 5), corpus_path=p1)
    run_pipeline(windows, mock_config(), mock_ensemble_factory(5, 0.3, 5), corpus_path=p2)
    assert p1.read_bytes() == p2.read_bytes()
