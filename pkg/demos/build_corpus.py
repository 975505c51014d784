"""End-to-end corpus generation with the offline mock oracle.

Simulates two windows of a causal chain, runs the full pipeline (screen,
judge, refine an ensemble, pick the most stable DAG, narrate, score, gate),
and prints the scored records plus one serialized training example.

Run:  python3 demos/build_corpus.py
"""

from augur import (
    CurationConfig,
    PipelineConfig,
    chain_scm,
    generate,
    mock_ensemble_factory,
    parse_sft_record,
    run_pipeline,
)

CONFIG = PipelineConfig(
    top_k=10,
    tau=0.42,
    method="spearman",
    curation=CurationConfig(samples=5, alpha=0.6),
)


def main():
    windows = [
        generate(chain_scm(["a", "b", "c", "d"], coefficient=1.5,
                           noise_scale=0.3, seed=seed), T=150)
        for seed in (1, 2)
    ]
    result = run_pipeline(windows, CONFIG, mock_ensemble_factory(samples=5))

    print(f"windows: {len(windows)}  scored: {len(result.records)}  "
          f"kept past the alpha={CONFIG.curation.alpha} gate: {len(result.kept)}")
    for i, record in enumerate(result.records):
        edges = sorted(e.pair for e in record.graph.edges)
        print(f"\nwindow {i}: quality={record.quality:.4f} "
              f"stability={record.stability:.2f} "
              f"efficiency={record.efficiency.value:.4f}")
        print(f"  edges: {edges}")
        print(f"  summary: {record.summary.splitlines()[0]}")

    line = result.corpus_lines[0]
    print(f"\nfirst corpus line ({len(line)} chars):")
    print(f"  {line[:140]}...")

    series, task, edges, summary = parse_sft_record(line)
    print("\nparsed back out of the line:")
    print(f"  task:    {task}")
    print(f"  edges:   {edges}")
    print(f"  summary: {summary.splitlines()[0]}")
    print(f"  series block: {len(series.splitlines())} lines, "
          f"first = {series.splitlines()[0][:60]}...")


if __name__ == "__main__":
    main()
