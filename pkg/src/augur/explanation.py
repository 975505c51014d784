"""Claim extraction and scoring of narrative summaries.

A summary earns groundedness for each extracted causal claim that is backed
by a graph edge, and the efficiency score trades groundedness off against
summary length.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .graph import DirectedGraph

__all__ = [
    "CAUSAL_VERBS",
    "CausalClaim",
    "EfficiencyScore",
    "extract_claims",
    "groundedness",
    "efficiency",
    "claim_report",
]

CAUSAL_VERBS = (
    "causes",
    "drives",
    "raises",
    "increases",
    "decreases",
    "lowers",
    "affects",
    "influences",
)

_ARROW_PATTERN = re.compile(r"(\S+)\s*(?:->|→)\s*(\S+)")
_VERB_PATTERN = re.compile(
    r"(\S+)\s+(" + "|".join(CAUSAL_VERBS) + r")\s+(\S+)", re.IGNORECASE
)


@dataclass(frozen=True)
class CausalClaim:
    cause: str
    effect: str
    surface: str

    def __post_init__(self):
        if self.cause == self.effect:
            raise ValueError("claim endpoints must differ")


@dataclass(frozen=True)
class EfficiencyScore:
    """groundedness minus a per-token length penalty."""

    groundedness: float
    token_count: int
    penalty: float  # the per-token lambda
    value: float

    def __post_init__(self):
        if not 0.0 <= self.groundedness <= 1.0:
            raise ValueError("groundedness must lie in [0, 1]")
        if self.token_count < 0:
            raise ValueError("token_count must be >= 0")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.value != self.groundedness - self.penalty * self.token_count:
            raise ValueError("value must equal groundedness - penalty * token_count")


def _resolve(token: str, lookup: dict[str, str]) -> str | None:
    """Map a matched token onto a variable name, tolerating code font and
    adjacent punctuation (in any nesting order, e.g. "`Patv`.")."""
    stripped = token
    while True:
        before = stripped
        stripped = stripped.strip("`'\"()[]{}").rstrip(".,;:!?")
        if stripped == before:
            break
    return lookup.get(stripped.casefold())


def extract_claims(summary: str, variables: Iterable[str]) -> list[CausalClaim]:
    """Directed claims a summary makes about known variables.

    Matches "X -> Y", "X → Y", and "X <verb> Y" over the controlled verb
    set, case-insensitively; endpoints must resolve to supplied variable
    names. Duplicates collapse to the first appearance; negation is not
    interpreted ("does not cause" still matches).
    """
    lookup = {name.casefold(): name for name in variables}
    hits: list[tuple[int, CausalClaim]] = []
    for match in _ARROW_PATTERN.finditer(summary):
        cause = _resolve(match.group(1), lookup)
        effect = _resolve(match.group(2), lookup)
        if cause and effect and cause != effect:
            hits.append((match.start(), CausalClaim(cause, effect, match.group(0))))
    for match in _VERB_PATTERN.finditer(summary):
        cause = _resolve(match.group(1), lookup)
        effect = _resolve(match.group(3), lookup)
        if cause and effect and cause != effect:
            hits.append((match.start(), CausalClaim(cause, effect, match.group(0))))
    hits.sort(key=lambda item: item[0])
    claims: list[CausalClaim] = []
    seen: set[tuple[str, str]] = set()
    for _, claim in hits:
        key = (claim.cause, claim.effect)
        if key not in seen:
            seen.add(key)
            claims.append(claim)
    return claims


def groundedness(claims: Sequence[CausalClaim], g: DirectedGraph) -> float:
    """Fraction of claims whose (cause, effect) is a graph edge.

    Direction-sensitive; an empty claim set grounds nothing and scores 0.
    """
    if not claims:
        return 0.0
    edges = g.edge_pairs
    backed = sum(1 for c in claims if (c.cause, c.effect) in edges)
    return backed / len(claims)


def efficiency(
    summary: str,
    g: DirectedGraph,
    variables: Iterable[str],
    penalty: float = 1e-4,
) -> EfficiencyScore:
    """Groundedness minus penalty per whitespace-delimited token."""
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    claims = extract_claims(summary, variables)
    grounded = groundedness(claims, g)
    tokens = len(summary.split())
    return EfficiencyScore(
        groundedness=grounded,
        token_count=tokens,
        penalty=penalty,
        value=grounded - penalty * tokens,
    )


def claim_report(claims: Sequence[CausalClaim], g: DirectedGraph) -> list[dict]:
    """Per-claim audit rows: endpoints, matched span, and edge backing."""
    edges = g.edge_pairs
    return [
        {
            "cause": c.cause,
            "effect": c.effect,
            "surface": c.surface,
            "grounded": (c.cause, c.effect) in edges,
        }
        for c in claims
    ]
