"""Cycle critiques and graph repair.

Builds a directed graph with a 3-cycle and a mutual edge pair, lists the
structural critiques, then repairs it two ways: with the deterministic
weakest-edge fallback alone, and with the mock oracle proposing each fix.

Run:  python3 demos/repair_cycles.py
"""

from augur import (
    DirectedEdge,
    DirectedGraph,
    MockOracle,
    find_critiques,
    refine,
    to_dot,
)

TANGLED = DirectedGraph(
    ("P", "Q", "R", "S", "T"),
    (
        DirectedEdge("P", "Q", correlation=0.9),
        DirectedEdge("Q", "R", correlation=0.7),
        DirectedEdge("R", "P", correlation=0.2),  # closes the 3-cycle
        DirectedEdge("S", "T", correlation=0.6),
        DirectedEdge("T", "S", correlation=0.4),  # mutual pair
    ),
)


def describe(log):
    for step in log:
        src, dst = step.modification.edge
        print(
            f"  step {step.iteration}: {step.critique.kind:9s} "
            f"{step.modification.kind} {src} -> {dst}  [{step.source}]"
        )


def main():
    print("critiques of the tangled graph:")
    for critique in find_critiques(TANGLED):
        chain = " -> ".join(a for a, _ in critique.edges)
        print(f"  {critique.kind}: {chain} -> {critique.edges[-1][1]}")

    print("\nfallback-only repair (deletes the weakest edge of each cycle):")
    repaired, log = refine(TANGLED, fixer=None)
    describe(log)
    print(f"  result edges: {sorted(e.pair for e in repaired.edges)}")

    print("\nmock-oracle repair (fixer proposes, refine validates):")
    oracle = MockOracle()
    repaired, log = refine(TANGLED, fixer=oracle.propose_cycle_fix)
    describe(log)
    print(f"  result edges: {sorted(e.pair for e in repaired.edges)}")

    print("\nDOT export of the repaired graph:")
    print(to_dot(repaired))


if __name__ == "__main__":
    main()
