"""Exact causal calculus on a small discrete network.

The classic lawn example: Season drives both Rain and Sprinkler, either one
wets the grass. Shows d-separation queries, why do() differs from
conditioning, back-door adjustment, Markov-blanket feature selection, and
the blanket carrying all predictive information about its target.

Run:  python3 demos/graph_queries.py
"""

from augur import (
    DirectedEdge,
    DirectedGraph,
    DiscreteBayesNet,
    backdoor_adjust,
    backdoor_satisfies,
    d_separated,
    intervene,
    joint,
    markov_blanket,
    mutual_information,
    select_features,
)

GRAPH = DirectedGraph(
    ("Season", "Rain", "Sprinkler", "Wet"),
    (
        DirectedEdge("Season", "Rain"),
        DirectedEdge("Season", "Sprinkler"),
        DirectedEdge("Rain", "Wet"),
        DirectedEdge("Sprinkler", "Wet"),
    ),
)

NET = DiscreteBayesNet(
    graph=GRAPH,
    cardinalities={"Season": 2, "Rain": 2, "Sprinkler": 2, "Wet": 2},
    cpts={
        "Season": {(): (0.5, 0.5)},
        "Rain": {(0,): (0.8, 0.2), (1,): (0.25, 0.75)},
        "Sprinkler": {(0,): (0.3, 0.7), (1,): (0.8, 0.2)},
        # parents in sorted order: (Rain, Sprinkler)
        "Wet": {
            (0, 0): (0.95, 0.05),
            (0, 1): (0.2, 0.8),
            (1, 0): (0.1, 0.9),
            (1, 1): (0.02, 0.98),
        },
    },
)


def main():
    g = NET.graph
    print("d-separation:")
    for X, Y, Z in (
        ({"Rain"}, {"Sprinkler"}, set()),
        ({"Rain"}, {"Sprinkler"}, {"Season"}),
        ({"Rain"}, {"Sprinkler"}, {"Season", "Wet"}),
    ):
        sep = d_separated(g, X, Y, Z)
        print(f"  {sorted(X)} _||_ {sorted(Y)} given {sorted(Z) or '{}'} : {sep}")

    table = joint(NET)
    print("\nseeing vs. doing (does a running sprinkler mean rain?):")
    p_rain = float(table.marginal_array(["Rain"])[1])
    cond = table.marginal_array(["Sprinkler", "Rain"])[1]
    p_rain_seen = float(cond[1] / cond.sum())
    p_rain_done = float(intervene(NET, "Sprinkler", 1).marginal_array(["Rain"])[1])
    print(f"  P(Rain=1)                    = {p_rain:.4f}")
    print(f"  P(Rain=1 | Sprinkler=1)      = {p_rain_seen:.4f}  (observation)")
    print(f"  P(Rain=1 | do(Sprinkler=1))  = {p_rain_done:.4f}  (intervention)")

    print("\nback-door adjustment for the effect of Sprinkler on Wet:")
    for Z in (set(), {"Season"}):
        ok = backdoor_satisfies(g, Z, "Sprinkler", "Wet")
        print(f"  Z={sorted(Z) or '{}'} admissible: {ok}")
    adjusted = backdoor_adjust(NET, "Sprinkler", 1, "Wet", {"Season"})
    truncated = intervene(NET, "Sprinkler", 1).marginal_array(["Wet"])
    print(f"  adjusted P(Wet | do(Sprinkler=1))  = {adjusted}")
    print(f"  truncated-factorization check      = {list(truncated)}")

    print("\nMarkov blankets and feature selection:")
    print(f"  MB(Wet)  = {sorted(markov_blanket(g, 'Wet'))}")
    print(f"  MB(Rain) = {sorted(markov_blanket(g, 'Rain'))}")
    picked = select_features(g, "Rain")
    print(f"  features for predicting Rain: {sorted(picked.features)} "
          f"(excluded downstream: {list(picked.excluded_descendants)})")

    rest = set(g.nodes) - {"Rain"}
    blanket = markov_blanket(g, "Rain")
    print("\nthe blanket already carries everything the rest knows:")
    print(f"  I(all others; Rain) = {mutual_information(table, rest, 'Rain'):.6f} bits")
    print(f"  I(MB(Rain); Rain)   = {mutual_information(table, blanket, 'Rain'):.6f} bits")


if __name__ == "__main__":
    main()
