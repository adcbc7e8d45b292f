import itertools

import numpy as np
import pytest

from hyperloops import Hypergraph, build_hypergraph


@pytest.fixture()
def triangle() -> Hypergraph:
    return build_hypergraph([("a", "b"), ("b", "c"), ("a", "c")])


@pytest.fixture()
def single() -> Hypergraph:
    return build_hypergraph([("a", "b", "c")])


def make_random_hypergraph(
    seed: int,
    n: int = 6,
    m: int = 6,
    cardinalities: tuple[int, ...] = (2, 3, 4),
) -> Hypergraph:
    rng = np.random.default_rng(seed)
    labels = [f"v{i}" for i in range(n)]
    pool = [
        frozenset(c)
        for k in cardinalities
        if k <= n
        for c in itertools.combinations(labels, k)
    ]
    chosen = rng.choice(len(pool), size=min(m, len(pool)), replace=False)
    return build_hypergraph([pool[i] for i in chosen], node_labels=labels)


@pytest.fixture()
def random_hypergraph():
    return make_random_hypergraph


@pytest.fixture()
def write_file(tmp_path):
    def write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
