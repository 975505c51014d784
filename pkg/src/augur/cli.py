"""Command-line entry points.

One subcommand per pipeline stage plus graph/net analysis utilities.
Settings resolve with precedence: explicit flags, then the --config JSON
file, then built-in defaults. Exit codes: 0 success, 1 usage, 2 bad
config/input, 3 oracle unavailable, 4 partial failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .causal import (
    backdoor_adjust,
    backdoor_satisfies,
    d_separated,
    markov_blanket,
    net_from_dict,
    select_features,
)
from .curation import (
    CurationConfig,
    quality,
    select_stable,
    serialize_sft_record,
    stability_scores,
    write_corpus,
)
from .dataset import (
    StandardizationStats,
    TimeSeriesWindow,
    impute,
    load_csv,
    standardize,
)
from .errors import AugurError, ConfigError, OracleUnavailableError
from .explanation import efficiency
from .graph import (
    graph_from_dict,
    graph_to_dict,
    load_graph,
    log_from_dicts,
    log_to_dicts,
    refine,
    to_dot,
)
from .oracle import OracleConfig, RemoteOracle
from .pipeline import (
    DEFAULT_TASK,
    PipelineConfig,
    assemble_initial_graph,
    build_judgment_request,
    mock_ensemble_factory,
    run_pipeline,
    screen_pairs,
    shared_oracle_factory,
)
from .simulation import (
    evaluate_recovery,
    generate,
    load_scm,
    scm_from_dict,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_PARTIAL = 4


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON settings file")
    common.add_argument("--input", help="input file (CSV window data or graph JSON)")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--target", help="target variable name")
    common.add_argument(
        "--method", choices=("spearman", "pearson", "kendall"), default=None
    )
    common.add_argument("--tau", type=float, help="correlation threshold")
    common.add_argument("--top-k", type=int, dest="top_k", help="pair budget")
    common.add_argument("--k-max", type=int, dest="k_max", help="oracle fix budget")
    common.add_argument("--alpha", type=float, help="quality gate")
    common.add_argument(
        "--lambda", type=float, dest="penalty", help="per-token length penalty"
    )
    common.add_argument("--samples", type=int, help="ensemble size")
    common.add_argument(
        "--mock",
        action="store_const",
        const=True,
        default=None,
        help="use the deterministic offline oracle",
    )
    common.add_argument(
        "--standardize",
        action="store_const",
        const=True,
        default=None,
        help="z-score each window by its own statistics before analysis",
    )
    common.add_argument("--precision", type=int, help="serialization decimals")
    common.add_argument("--workers", type=int, help="concurrent windows")
    return common


def build_parser() -> _Parser:
    parser = _Parser(
        prog="augur",
        description="Correlation screening, causal judgment, DAG refinement, "
        "narrative scoring, and SFT-corpus generation for time series.",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser("prune", parents=[common], help="emit screened pairs as CSV")
    sub.add_parser("judge", parents=[common], help="emit the judged initial graph")

    refine_p = sub.add_parser(
        "refine", parents=[common], help="repair cycles in a graph file"
    )
    refine_p.add_argument("--log-output", help="write the refinement log JSON here")

    narrate_p = sub.add_parser(
        "narrate", parents=[common], help="synthesize a narrative for a DAG"
    )
    narrate_p.add_argument("--graph", required=True, help="graph JSON file")
    narrate_p.add_argument("--log", help="refinement log JSON file")

    score_p = sub.add_parser(
        "score", parents=[common], help="stability/efficiency/quality of an ensemble"
    )
    score_p.add_argument("--summary", required=True, help="narrative text file")
    score_p.add_argument("graphs", nargs="+", help="ensemble graph JSON files")

    sub.add_parser(
        "curate", parents=[common], help="gate a scored records file into a corpus"
    )

    corpus_p = sub.add_parser(
        "corpus", parents=[common], help="run the full pipeline over all windows"
    )
    corpus_p.add_argument(
        "--records-output",
        help="also write every scored (ungated) record with its quality",
    )

    analyze_p = sub.add_parser(
        "analyze", parents=[common], help="graph/net queries (d-sep, back-door, MB)"
    )
    analyze_p.add_argument("--dsep", nargs=2, metavar=("X", "Y"))
    analyze_p.add_argument("--backdoor", nargs=2, metavar=("X", "Y"))
    analyze_p.add_argument("--mb", metavar="NODE")
    analyze_p.add_argument(
        "--adjust", nargs=2, metavar=("X=VALUE", "Y"), help="P(Y | do(X=VALUE))"
    )
    analyze_p.add_argument(
        "--given", action="append", default=[], help="conditioning set (comma-separated)"
    )

    sub.add_parser(
        "select-features", parents=[common], help="Markov-blanket feature set"
    )

    simulate_p = sub.add_parser(
        "simulate", parents=[common], help="generate series from an SCM spec"
    )
    simulate_p.add_argument("--scm", required=True, help="SCM JSON file")
    simulate_p.add_argument("--length", type=int, default=None, help="steps to keep")

    eval_p = sub.add_parser(
        "eval-recovery", parents=[common], help="score a recovered graph against truth"
    )
    eval_p.add_argument("--truth", required=True, help="SCM or graph JSON file")
    eval_p.add_argument("--found", required=True, help="recovered graph JSON file")

    sub.add_parser("export-dot", parents=[common], help="graph JSON to DOT")
    return parser


# --- settings ----------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    return payload


_CONFIG_KEYS = {"penalty": "lambda"}  # flag dest -> config-file key


def _setting(args, cfg: dict, name: str, default):
    value = getattr(args, name, None)
    if value is None:
        value = cfg.get(_CONFIG_KEYS.get(name, name), default)
    return value


def _curation_config(args, cfg: dict) -> CurationConfig:
    try:
        return CurationConfig(
            samples=int(_setting(args, cfg, "samples", 5)),
            penalty=float(_setting(args, cfg, "penalty", 1e-4)),
            alpha=float(_setting(args, cfg, "alpha", 0.6)),
            stability_weight=float(cfg.get("stability_weight", 0.5)),
            efficiency_weight=float(cfg.get("efficiency_weight", 0.5)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _pipeline_config(args, cfg: dict) -> PipelineConfig:
    try:
        return PipelineConfig(
            top_k=int(_setting(args, cfg, "top_k", 10)),
            tau=float(_setting(args, cfg, "tau", 0.0)),
            method=_setting(args, cfg, "method", "spearman"),
            target=_setting(args, cfg, "target", None),
            top_target=int(cfg.get("top_target", 5)),
            k_max=int(_setting(args, cfg, "k_max", 8)),
            precision=int(_setting(args, cfg, "precision", 2)),
            domain_context=str(cfg.get("domain_context", "")),
            task=str(cfg.get("task", DEFAULT_TASK)),
            curation=_curation_config(args, cfg),
            workers=int(_setting(args, cfg, "workers", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _use_mock(args, cfg: dict) -> bool:
    return bool(_setting(args, cfg, "mock", False))


def _oracle_factory(args, cfg: dict, samples: int):
    if _use_mock(args, cfg):
        return mock_ensemble_factory(
            lag_budget=int(cfg.get("lag_budget", 5)),
            margin=float(cfg.get("margin", 0.3)),
            samples=samples,
        )
    endpoint = cfg.get("endpoint")
    model = cfg.get("model")
    if not endpoint or not model:
        raise ConfigError(
            "remote oracle needs 'endpoint' and 'model' in the config file "
            "(or pass --mock)"
        )
    try:
        oracle_cfg = OracleConfig(
            endpoint=str(endpoint),
            model=str(model),
            analysis_model=cfg.get("analysis_model"),
            judgment_temperature=float(cfg.get("judgment_temperature", 0.1)),
            analysis_temperature=float(cfg.get("analysis_temperature", 0.5)),
            max_tokens=int(cfg.get("max_tokens", 4096)),
            max_in_flight=int(cfg.get("max_in_flight", 4)),
            retry_budget=int(cfg.get("retry_budget", 3)),
            backoff_base=float(cfg.get("backoff_base", 0.5)),
            backoff_cap=float(cfg.get("backoff_cap", 8.0)),
            request_timeout=float(cfg.get("request_timeout", 60.0)),
            response_path=tuple(cfg.get("response_path", ["text"])),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    client = RemoteOracle(oracle_cfg, audit_path=cfg.get("audit_path"))
    return shared_oracle_factory(client)


def _single_oracle(args, cfg: dict):
    samples = int(_setting(args, cfg, "samples", 5))
    factory = _oracle_factory(args, cfg, samples)
    return factory(samples // 2)


# --- data loading -------------------------------------------------------------


def _require_input(args) -> str:
    if not args.input:
        raise ConfigError("--input is required for this command")
    return args.input


def _load_windows(args, cfg: dict) -> list[TimeSeriesWindow]:
    path = _require_input(args)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ConfigError(f"{path} is empty")
            data_rows = sum(1 for row in reader if any(cell.strip() for cell in row))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    timestamp_column = cfg.get("timestamp_column") or header[0]
    columns = cfg.get("columns") or [c for c in header if c != timestamp_column]
    window_length = cfg.get("window_length") or data_rows
    windows = load_csv(
        path,
        variable_columns=columns,
        timestamp_column=timestamp_column,
        window_length=int(window_length),
        stride=cfg.get("stride"),
    )
    windows = [impute(w) for w in windows]
    if bool(_setting(args, cfg, "standardize", False)):
        windows = [
            standardize(w, StandardizationStats.from_window(w)) for w in windows
        ]
    return windows


def _pick_window(windows, cfg: dict) -> TimeSeriesWindow:
    index = int(cfg.get("window_index", 0))
    if not 0 <= index < len(windows):
        raise ConfigError(
            f"window_index {index} out of range; file yields {len(windows)} windows"
        )
    return windows[index]


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_graph_payload(path: str):
    """A graph JSON file, or the graph inside a net JSON file."""
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict) and "cpts" in payload:
        net = net_from_dict(payload)
        return net, net.graph
    return None, graph_from_dict(payload)


# --- handlers -------------------------------------------------------------------


def cmd_prune(args, cfg: dict) -> int:
    windows = _load_windows(args, cfg)
    window = _pick_window(windows, cfg)
    pcfg = _pipeline_config(args, cfg)
    pairs = screen_pairs(window, pcfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["first", "second", "correlation", "method"])
    for p in pairs:
        writer.writerow([p.first, p.second, f"{p.correlation:.6f}", p.method])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_judge(args, cfg: dict) -> int:
    windows = _load_windows(args, cfg)
    window = _pick_window(windows, cfg)
    pcfg = _pipeline_config(args, cfg)
    oracle = _single_oracle(args, cfg)
    pairs = screen_pairs(window, pcfg)
    judgments = [
        oracle.judge_pair(
            build_judgment_request(window, pair, pcfg.precision, pcfg.domain_context)
        )
        for pair in pairs
    ]
    g0 = assemble_initial_graph(window, pairs, judgments)
    _emit(json.dumps(graph_to_dict(g0), indent=2), args.output)
    return EXIT_OK


def cmd_refine(args, cfg: dict) -> int:
    g0 = load_graph(_require_input(args))
    pcfg = _pipeline_config(args, cfg)
    fixer = None
    if _use_mock(args, cfg) or (cfg.get("endpoint") and cfg.get("model")):
        oracle = _single_oracle(args, cfg)

        def fixer(g, critique, _oracle=oracle):
            return _oracle.propose_cycle_fix(g, critique, pcfg.domain_context)

    g_final, log = refine(g0, fixer=fixer, k_max=pcfg.k_max)
    _emit(json.dumps(graph_to_dict(g_final), indent=2), args.output)
    if args.log_output:
        Path(args.log_output).write_text(
            json.dumps({"steps": log_to_dicts(log)}, indent=2) + "\n"
        )
    print(f"refine: {len(log)} modification(s) applied", file=sys.stderr)
    return EXIT_OK


def cmd_narrate(args, cfg: dict) -> int:
    windows = _load_windows(args, cfg)
    window = _pick_window(windows, cfg)
    pcfg = _pipeline_config(args, cfg)
    _, g = _load_graph_payload(args.graph)
    log = ()
    if args.log:
        payload = json.loads(Path(args.log).read_text())
        log = log_from_dicts(payload.get("steps", []))
    oracle = _single_oracle(args, cfg)
    summary = oracle.synthesize_narrative(g, log, window, precision=pcfg.precision)
    _emit(summary, args.output)
    return EXIT_OK


def cmd_score(args, cfg: dict) -> int:
    windows = _load_windows(args, cfg)
    window = _pick_window(windows, cfg)
    cur = _curation_config(args, cfg)
    graphs = [_load_graph_payload(p)[1] for p in args.graphs]
    summary = Path(args.summary).read_text()
    scores = stability_scores(graphs)
    idx, g_star = select_stable(graphs)
    eff = efficiency(summary, g_star, window.names, cur.penalty)
    max_stability = len(graphs) * len(g_star.edges)
    q = quality(scores[idx], max_stability, eff, cur)
    report = {
        "stability_scores": scores,
        "selected_index": idx,
        "max_stability": max_stability,
        "efficiency": {
            "groundedness": eff.groundedness,
            "token_count": eff.token_count,
            "lambda": eff.penalty,
            "value": eff.value,
        },
        "quality": q,
        "gate_alpha": cur.alpha,
        "passes_gate": q >= cur.alpha,
    }
    _emit(json.dumps(report, indent=2), args.output)
    return EXIT_OK


def cmd_curate(args, cfg: dict) -> int:
    path = _require_input(args)
    cur = _curation_config(args, cfg)
    kept_lines: list[str] = []
    total = 0
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        total += 1
        record = json.loads(line)
        for key in ("input", "target", "quality"):
            if key not in record:
                raise ConfigError(f"records file line lacks {key!r}")
        if record["quality"] >= cur.alpha:
            kept_lines.append(
                json.dumps(
                    {"input": record["input"], "target": record["target"]},
                    ensure_ascii=False,
                )
            )
    if args.output:
        write_corpus(kept_lines, args.output)
    else:
        for line in kept_lines:
            print(line)
    print(f"curate: kept {len(kept_lines)} of {total}", file=sys.stderr)
    return EXIT_OK


def cmd_corpus(args, cfg: dict) -> int:
    windows = _load_windows(args, cfg)
    pcfg = _pipeline_config(args, cfg)
    factory = _oracle_factory(args, cfg, pcfg.curation.samples)
    result = run_pipeline(windows, pcfg, factory, corpus_path=args.output)
    if not args.output:
        for line in result.corpus_lines:
            print(line)
    if args.records_output:
        lines = []
        for record in result.records:
            payload = json.loads(serialize_sft_record(record, pcfg.task, pcfg.precision))
            payload["quality"] = record.quality
            payload["stability"] = record.stability
            payload["efficiency_value"] = record.efficiency.value
            lines.append(json.dumps(payload, ensure_ascii=False))
        write_corpus(lines, args.records_output)
    print(
        f"corpus: windows={len(windows)} kept={len(result.kept)} "
        f"gated_out={len(result.records) - len(result.kept)} "
        f"failed={len(result.failures)}",
        file=sys.stderr,
    )
    if result.failures:
        if result.all_failures_oracle_unavailable and not result.records:
            return EXIT_ORACLE
        return EXIT_PARTIAL
    return EXIT_OK


def _parse_given(args) -> set[str]:
    names: set[str] = set()
    for chunk in args.given:
        names.update(n.strip() for n in chunk.split(",") if n.strip())
    return names


def cmd_analyze(args, cfg: dict) -> int:
    net, g = _load_graph_payload(_require_input(args))
    queries = [q for q in (args.dsep, args.backdoor, args.mb, args.adjust) if q]
    if len(queries) != 1:
        print(
            "analyze: pass exactly one of --dsep, --backdoor, --mb, --adjust",
            file=sys.stderr,
        )
        return EXIT_USAGE
    given = _parse_given(args)
    if args.dsep:
        x, y = args.dsep
        result = d_separated(g, {x}, {y}, given)
        _emit("true" if result else "false", args.output)
    elif args.backdoor:
        x, y = args.backdoor
        result = backdoor_satisfies(g, given, x, y)
        _emit("true" if result else "false", args.output)
    elif args.mb:
        blanket = markov_blanket(g, args.mb)
        _emit(json.dumps(sorted(blanket)), args.output)
    else:
        if net is None:
            raise ConfigError("--adjust needs a net file with cpts")
        assignment, outcome = args.adjust
        if "=" not in assignment:
            print("analyze: --adjust expects X=VALUE", file=sys.stderr)
            return EXIT_USAGE
        var, _, raw_value = assignment.partition("=")
        dist = backdoor_adjust(net, var, int(raw_value), outcome, given)
        _emit(json.dumps(dist), args.output)
    return EXIT_OK


def cmd_select_features(args, cfg: dict) -> int:
    _, g = _load_graph_payload(_require_input(args))
    target = _setting(args, cfg, "target", None)
    if not target:
        raise ConfigError("--target is required for select-features")
    selection = select_features(g, target)
    _emit(
        json.dumps(
            {
                "target": selection.target,
                "features": sorted(selection.features),
                "excluded_descendants": list(selection.excluded_descendants),
            },
            indent=2,
        ),
        args.output,
    )
    return EXIT_OK


def cmd_simulate(args, cfg: dict) -> int:
    scm = load_scm(args.scm)
    length = args.length or int(cfg.get("length", 200))
    window = generate(scm, length)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp"] + list(window.names))
    for t in range(window.length):
        writer.writerow(
            [window.timestamps[t].isoformat()]
            + [repr(float(v)) for v in window.values[t]]
        )
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_eval_recovery(args, cfg: dict) -> int:
    payload = json.loads(Path(args.truth).read_text())
    if isinstance(payload, dict) and "mechanisms" in payload:
        truth = scm_from_dict(payload).summary_edges()
    else:
        truth = set(graph_from_dict(payload).edge_pairs)
    _, found = _load_graph_payload(args.found)
    report = evaluate_recovery(truth, found)
    _emit(
        json.dumps(
            {
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "shd": report.shd,
            },
            indent=2,
        ),
        args.output,
    )
    return EXIT_OK


def cmd_export_dot(args, cfg: dict) -> int:
    _, g = _load_graph_payload(_require_input(args))
    _emit(to_dot(g), args.output)
    return EXIT_OK


_HANDLERS = {
    "prune": cmd_prune,
    "judge": cmd_judge,
    "refine": cmd_refine,
    "narrate": cmd_narrate,
    "score": cmd_score,
    "curate": cmd_curate,
    "corpus": cmd_corpus,
    "analyze": cmd_analyze,
    "select-features": cmd_select_features,
    "simulate": cmd_simulate,
    "eval-recovery": cmd_eval_recovery,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args.config)
        return _HANDLERS[args.command](args, cfg)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"augur: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleUnavailableError as exc:
        print(f"augur: oracle unavailable: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (AugurError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"augur: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
