import numpy as np
import pytest

from spectral_sbm.unionfind import UnionFind


def _closure_groups(n, pairs):
    """Connected components by repeated relaxation."""
    comp = list(range(n))
    changed = True
    while changed:
        changed = False
        for x, y in pairs:
            low = min(comp[x], comp[y])
            if comp[x] != low or comp[y] != low:
                comp[x] = comp[y] = low
                changed = True
    groups = {}
    for v in range(n):
        groups.setdefault(comp[v], []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def test_singletons():
    assert UnionFind(3).groups() == [[0], [1], [2]]


def test_docstring_example():
    uf = UnionFind(6)
    uf.union_pairs([(0, 2), (2, 4), (1, 5)])
    assert uf.groups() == [[0, 2, 4], [1, 5], [3]]
    assert uf.find(4) == uf.find(0)
    assert uf.find(3) != uf.find(1)


def test_union_is_idempotent():
    uf = UnionFind(4)
    uf.union(1, 2)
    uf.union(2, 1)
    uf.union(1, 1)
    assert uf.groups() == [[0], [1, 2], [3]]


def test_long_chain_flattens():
    uf = UnionFind(500)
    uf.union_pairs((i, i + 1) for i in range(499))
    root = uf.find(499)
    assert all(uf.find(v) == root for v in range(500))
    assert uf.groups() == [list(range(500))]


@pytest.mark.parametrize("n, m", [(10, 4), (60, 40), (200, 150)])
def test_matches_transitive_closure(n, m):
    rng = np.random.default_rng(n + m)
    pairs = [tuple(int(v) for v in rng.integers(0, n, size=2)) for _ in range(m)]
    uf = UnionFind(n)
    uf.union_pairs(pairs)
    assert uf.groups() == _closure_groups(n, pairs)
