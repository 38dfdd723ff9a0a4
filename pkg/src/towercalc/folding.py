"""Stallings foldings: subgroup graphs of free groups.

The folded graph answers membership queries exactly and computes the rank
of the subgroup as the cycle rank of its core.  Folding is driven by a
union-find over states, so the result does not depend on fold order.
"""

from __future__ import annotations

from typing import Sequence

from .words import Word


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict[int, int] = {}

    def add(self, x: int) -> None:
        self.parent.setdefault(x, x)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> int:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[ry] = rx
        return rx


class SubgroupGraph:
    """Folded, based, labeled graph for a finitely generated subgroup of F_rank."""

    def __init__(self, rank: int, generators: Sequence[Word]):
        if not generators:
            raise ValueError("fold needs a nonempty list of generators")
        for g in generators:
            if g.rank != rank:
                raise ValueError("generator has wrong ambient rank")
        self.rank = rank
        self.generators = tuple(generators)
        self._build()

    def _build(self) -> None:
        # Wedge of loops at the basepoint, one per generator word.
        uf = _UnionFind()
        uf.add(0)
        edges: list[tuple[int, int, int]] = []  # (source, label>0, target)
        fresh = 1
        for g in self.generators:
            prev = 0
            for i, letter in enumerate(g.letters):
                nxt = 0 if i == len(g.letters) - 1 else fresh
                if nxt:
                    fresh += 1
                uf.add(nxt)
                if letter > 0:
                    edges.append((prev, letter, nxt))
                else:
                    edges.append((nxt, -letter, prev))
                prev = nxt

        # Fold until deterministic and co-deterministic on every label.
        changed = True
        while changed:
            changed = False
            out: dict[tuple[int, int], int] = {}
            inn: dict[tuple[int, int], int] = {}
            for src, label, dst in edges:
                src, dst = uf.find(src), uf.find(dst)
                if (src, label) in out and out[(src, label)] != dst:
                    uf.union(out[(src, label)], dst)
                    changed = True
                    break
                if (dst, label) in inn and inn[(dst, label)] != src:
                    uf.union(inn[(dst, label)], src)
                    changed = True
                    break
                out[(src, label)] = dst
                inn[(dst, label)] = src

        folded: set[tuple[int, int, int]] = set()
        for src, label, dst in edges:
            folded.add((uf.find(src), label, uf.find(dst)))
        self.basepoint = uf.find(0)
        self._out: dict[tuple[int, int], int] = {}
        self._in: dict[tuple[int, int], int] = {}
        self.states: set[int] = {self.basepoint}
        for src, label, dst in folded:
            self._out[(src, label)] = dst
            self._in[(dst, label)] = src
            self.states.add(src)
            self.states.add(dst)
        self.edges = folded
        self._renumber()

    def _renumber(self) -> None:
        # Canonical breadth-first numbering from the basepoint, labels in order.
        order: dict[int, int] = {self.basepoint: 0}
        queue = [self.basepoint]
        while queue:
            state = queue.pop(0)
            for label in range(1, self.rank + 1):
                for nxt in (self._out.get((state, label)), self._in.get((state, label))):
                    if nxt is not None and nxt not in order:
                        order[nxt] = len(order)
                        queue.append(nxt)
        self.basepoint = 0
        self.states = set(order.values())
        self.edges = {(order[s], l, order[d]) for s, l, d in self.edges}
        self._out = {(order[s], l): order[d] for (s, l), d in self._out.items()}
        self._in = {(order[d], l): order[s] for (d, l), s in self._in.items()}

    def trace(self, w: Word, start: int | None = None) -> int | None:
        state = self.basepoint if start is None else start
        for letter in w.letters:
            nxt = self._out.get((state, letter)) if letter > 0 else self._in.get((state, -letter))
            if nxt is None:
                return None
            state = nxt
        return state

    def contains(self, w: Word) -> bool:
        return self.trace(w) == self.basepoint

    def core_counts(self) -> tuple[int, int]:
        """(states, edges) of the core graph: hanging trees trimmed away."""
        states = set(self.states)
        edges = set(self.edges)
        while True:
            degree: dict[int, int] = {s: 0 for s in states}
            for src, _, dst in edges:
                degree[src] += 1
                degree[dst] += 1
            leaves = {s for s, d in degree.items() if d <= 1 and s != self.basepoint}
            if not leaves:
                return len(states), len(edges)
            states -= leaves
            edges = {(s, l, d) for s, l, d in edges if s not in leaves and d not in leaves}

    @property
    def subgroup_rank(self) -> int:
        states, edges = self.core_counts()
        return edges - states + 1

    def canonical_form(self) -> tuple:
        return (self.basepoint, tuple(sorted(self.edges)))


def fold(generators: Sequence[Word]) -> SubgroupGraph:
    """Fold the subgroup generated by the given words."""
    rank = generators[0].rank if generators else 0
    return SubgroupGraph(rank, generators)


def is_free_basis(generators: Sequence[Word]) -> bool:
    """True iff the words freely generate a subgroup of rank len(generators)."""
    if not generators:
        raise ValueError("is_free_basis needs a nonempty list")
    if any(g.is_identity for g in generators):
        return False
    return fold(generators).subgroup_rank == len(generators)
