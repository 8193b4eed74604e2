"""Questionnaire scoring and group allocation for viewing experiments.

Covers the standard instruments: the 10-item System Usability Scale,
NASA-TLX (raw mean or pairwise-weighted), comprehension quiz marking,
and proficiency-balanced group allocation by serpentine dealing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

TLX_SUBSCALES = ("mental", "physical", "temporal", "performance", "effort", "frustration")
TLX_WEIGHT_TOTAL = 15  # tally of the 15 pairwise subscale comparisons

# Adjective bands are external convention, reported for orientation only.
SUS_BANDS = ((85.5, "Excellent"), (71.1, "Good"), (51.0, "OK"))


class AllocationError(ValueError):
    """Group allocation was asked for more groups than participants."""


@dataclass(frozen=True)
class SusResponse:
    """One respondent's ten SUS items, each an integer in [1, 5]."""

    items: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) != 10:
            raise ValueError(f"SUS has exactly 10 items, got {len(self.items)}")
        for i, item in enumerate(self.items, start=1):
            if not isinstance(item, int) or not (1 <= item <= 5):
                raise ValueError(f"SUS item {i} must be an integer in [1, 5], got {item!r}")


@dataclass(frozen=True)
class TlxResponse:
    """Six TLX subscale ratings in [0, 100], optionally with pairwise weights.

    Subscale order: mental, physical, temporal, performance, effort,
    frustration. Weights, when present, are six integers summing to 15.
    """

    subscales: tuple[float, ...]
    weights: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "subscales", tuple(float(s) for s in self.subscales))
        if len(self.subscales) != len(TLX_SUBSCALES):
            raise ValueError(f"TLX has {len(TLX_SUBSCALES)} subscales, got {len(self.subscales)}")
        for name, value in zip(TLX_SUBSCALES, self.subscales):
            if not (0.0 <= value <= 100.0):
                raise ValueError(f"TLX subscale {name} must be in [0, 100], got {value}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
            if len(self.weights) != len(TLX_SUBSCALES):
                raise ValueError("TLX weights must have one entry per subscale")
            if any(w < 0 for w in self.weights) or sum(self.weights) != TLX_WEIGHT_TOTAL:
                raise ValueError(
                    f"TLX weights must be non-negative and sum to {TLX_WEIGHT_TOTAL}, "
                    f"got {self.weights}"
                )


@dataclass(frozen=True)
class GroupAssignment:
    """A partition of participant indices into balanced groups."""

    groups: tuple[tuple[int, ...], ...]
    group_means: tuple[float, ...]

    @property
    def mean_spread(self) -> float:
        return max(self.group_means) - min(self.group_means)


def score_sus(response: SusResponse) -> float:
    """SUS score in [0, 100]: odd items count (item - 1), even (5 - item), total x 2.5."""
    total = 0
    for i, item in enumerate(response.items, start=1):
        total += (item - 1) if i % 2 == 1 else (5 - item)
    return total * 2.5


def sus_adjective(score: float) -> str:
    """Informational adjective band for a SUS score (external convention)."""
    for cutoff, label in SUS_BANDS:
        if score >= cutoff:
            return label
    return "Poor"


def score_tlx(response: TlxResponse) -> float:
    """Raw TLX (mean of subscales) or weighted sum(w * s) / 15 when weights exist."""
    if response.weights is None:
        return sum(response.subscales) / len(response.subscales)
    return sum(w * s for w, s in zip(response.weights, response.subscales)) / TLX_WEIGHT_TOTAL


def allocate_groups(scores: Sequence[float], k: int) -> GroupAssignment:
    """Deal participants into k groups serpentine-fashion to balance means.

    Indices are sorted by descending score and dealt to groups in order
    1..k, then k..1, repeating. Group sizes differ by at most one, and on
    evenly divisible inputs the spread of group means never exceeds what
    naive round-robin dealing produces.
    """
    if k < 1:
        raise AllocationError(f"need at least one group, got k={k}")
    if k > len(scores):
        raise AllocationError(f"cannot split {len(scores)} participants into {k} groups")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    groups: list[list[int]] = [[] for _ in range(k)]
    forward = True
    for pos, idx in enumerate(order):
        within = pos % k
        target = within if forward else k - 1 - within
        groups[target].append(idx)
        if within == k - 1:
            forward = not forward
    means = tuple(sum(scores[i] for i in g) / len(g) for g in groups)
    return GroupAssignment(groups=tuple(tuple(g) for g in groups), group_means=means)


def score_quiz(answers: Sequence[str], key: Sequence[str]) -> float:
    """Fraction of answers matching the key, in [0, 1]."""
    if len(answers) != len(key):
        raise ValueError(f"answers ({len(answers)}) and key ({len(key)}) differ in length")
    if not key:
        raise ValueError("quiz key is empty")
    return sum(a == k for a, k in zip(answers, key)) / len(key)
