"""
Planted hypergraphs for end-to-end checks: nodes fall into groups, hyperlinks
live inside a group (closing many short loops) except for a few bridges between
consecutive groups.
"""

from __future__ import annotations

import numpy as np

from .hypergraph import Hypergraph, build_hypergraph


def planted_hypergraph(
    groups: int = 8,
    group_size: int = 6,
    links_per_group: int = 10,
    cardinalities: tuple[int, ...] = (2, 3, 4),
    bridges: bool = True,
    seed: int = 0,
) -> Hypergraph:
    """
    :param groups: Number of node groups.
    :param group_size: Nodes per group.
    :param links_per_group: Distinct hyperlinks drawn uniformly inside each group.
    :param cardinalities: Hyperlink sizes, drawn uniformly.
    :param bridges: Add one 2-node hyperlink between each pair of consecutive groups.
    """
    if max(cardinalities) > group_size:
        raise ValueError("cardinalities cannot exceed group_size")

    rng = np.random.default_rng(seed)
    width = len(str(groups * group_size))

    def label(group: int, member: int) -> str:
        return f"n{group * group_size + member:0{width}d}"

    hyperlinks: list[frozenset[str]] = []
    for group in range(groups):
        drawn: set[frozenset[str]] = set()
        while len(drawn) < links_per_group:
            k = int(rng.choice(cardinalities))
            members = rng.choice(group_size, size=k, replace=False)
            e = frozenset(label(group, int(i)) for i in members)
            if e not in drawn:
                drawn.add(e)
                hyperlinks.append(e)

    if bridges and groups > 1:
        for group in range(groups):
            other = (group + 1) % groups
            if other == group or (groups == 2 and group == 1):
                continue
            hyperlinks.append(
                frozenset(
                    [
                        label(group, int(rng.integers(group_size))),
                        label(other, int(rng.integers(group_size))),
                    ]
                )
            )

    labels = [label(g, i) for g in range(groups) for i in range(group_size)]
    return build_hypergraph(hyperlinks, node_labels=labels)


__all__ = [
    "planted_hypergraph",
]
