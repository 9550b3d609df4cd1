"""Disjoint sets over the vertex range 0..n-1."""

from typing import Iterable, List, Tuple

import numpy as np


class UnionFind:
    """
    Union by rank with path compression over a fixed range of integers.

    Examples
    --------
    >>> uf = UnionFind(6)
    >>> uf.union(0, 2)
    >>> uf.union(2, 4)
    >>> uf.union(1, 5)
    >>> uf.find(4) == uf.find(0)
    True
    >>> uf.groups()
    [[0, 2, 4], [1, 5], [3]]
    """

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.parent.shape[0])

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = int(self.parent[root])
        # path compression
        while self.parent[x] != root:
            self.parent[x], x = root, int(self.parent[x])
        return root

    def union(self, x: int, y: int) -> None:
        px = self.find(x)
        py = self.find(y)
        if px == py:
            return
        if self.rank[px] < self.rank[py]:
            px, py = py, px
        self.parent[py] = px
        if self.rank[px] == self.rank[py]:
            self.rank[px] += 1

    def union_pairs(self, pairs: Iterable[Tuple[int, int]]) -> None:
        for x, y in pairs:
            self.union(int(x), int(y))

    def groups(self) -> List[List[int]]:
        """Sets as sorted member lists, ordered by smallest member."""
        buckets = {}
        for x in range(len(self)):
            buckets.setdefault(self.find(x), []).append(x)
        return sorted(buckets.values(), key=lambda members: members[0])
