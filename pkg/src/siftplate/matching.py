"""Nearest-neighbor descriptor matching with the distinctiveness ratio test.

Searches are exact brute force over all pairs: template sets are one
word image each, so correctness beats indexing tricks here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Match", "match_descriptors", "cross_check", "SINGLE_TEMPLATE_FALLBACK"]

SINGLE_TEMPLATE_FALLBACK = 0.7  # absolute distance gate when only one neighbor exists


@dataclass(frozen=True)
class Match:
    """An accepted query -> template descriptor pairing."""

    query_index: int
    template_index: int
    distance: float
    ratio: float  # distance / second-best distance; 1 when no second neighbor


def match_descriptors(
    query: np.ndarray, template: np.ndarray, ratio_threshold: float = 0.8
) -> list[Match]:
    """Match each query descriptor to its nearest template neighbor.

    A match is accepted when nearest / second-nearest Euclidean distance
    is strictly below ``ratio_threshold``.  With a single template
    descriptor there is no second neighbor, so an absolute distance gate
    of 0.7 applies instead.  Results are sorted by ascending distance.
    """
    q = np.asarray(query, dtype=np.float64)
    t = np.asarray(template, dtype=np.float64)
    if q.size == 0 or t.size == 0:
        return []
    dists = np.sqrt(((q[:, None, :] - t[None, :, :]) ** 2).sum(axis=2))
    n_t = t.shape[0]
    matches: list[Match] = []
    for i in range(q.shape[0]):
        row = dists[i]
        j = int(np.argmin(row))
        d1 = float(row[j])
        if n_t == 1:
            if d1 < SINGLE_TEMPLATE_FALLBACK:
                matches.append(Match(i, j, d1, 1.0))
            continue
        d2 = float(np.partition(row, 1)[1])
        if d2 > 0.0:
            ratio = d1 / d2
        else:
            ratio = 0.0 if d1 == 0.0 else 1.0
        if d2 > 0.0 and d1 < ratio_threshold * d2:
            matches.append(Match(i, j, d1, ratio))
    matches.sort(key=lambda m: (m.distance, m.query_index, m.template_index))
    return matches


def cross_check(matches_ab: list[Match], matches_ba: list[Match]) -> list[Match]:
    """Keep only pairings present in both match directions."""
    reverse = {(m.query_index, m.template_index) for m in matches_ba}
    return [m for m in matches_ab if (m.template_index, m.query_index) in reverse]
