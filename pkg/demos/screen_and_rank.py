"""Correlation screening on simulated data.

Simulates a small lagged system, ranks variable pairs by each correlation
method, and shows how the candidate graph around a target thins out as the
threshold rises.

Run:  python3 demos/screen_and_rank.py
"""

from augur import (
    LaggedSCM,
    Mechanism,
    build_candidate_graph,
    generate,
    top_k_pairs,
)

SCM = LaggedSCM(
    variables=("r", "s", "t", "u", "w"),
    mechanisms=(
        Mechanism("r", "s", lag=1, coefficient=1.4),
        Mechanism("s", "t", lag=1, coefficient=1.2),
        Mechanism("r", "u", lag=2, coefficient=0.9),
    ),
    noise_scale=0.3,
    seed=11,
)


def main():
    window = generate(SCM, T=300)
    print(f"simulated window: T={window.length}, variables={window.names}")

    for method in ("spearman", "pearson", "kendall"):
        pairs = top_k_pairs(window, 5, method)
        ranked = ", ".join(
            f"{p.first}-{p.second} {p.correlation:+.3f}" for p in pairs
        )
        print(f"top-5 by {method:9s} {ranked}")

    print()
    print("candidate graph around 's' as the threshold rises:")
    for tau in (0.3, 0.5, 0.7, 0.9):
        candidate = build_candidate_graph(
            window, target="s", tau=tau, top_target=3, method="spearman"
        )
        edges = sorted(candidate.edges)
        print(f"  tau={tau:.1f}  {len(edges)} edges  {edges}")


if __name__ == "__main__":
    main()
