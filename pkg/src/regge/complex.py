"""Finite simplicial complexes and pseudomanifolds.

Simplexes are plain tuples of strictly increasing vertex ids. A
:class:`SimplicialComplex` is built from its maximal simplexes; every face
is derived from them and indexed densely per dimension in lexicographic
order. The edge order fixed here is the coordinate order of every vector
quantity (metrics, Einstein fields, volume gradients) in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ComplexError",
    "EmptyInput",
    "DuplicateTopSimplex",
    "SimplexNotFound",
    "Simplex",
    "make_simplex",
    "SimplicialComplex",
    "PseudomanifoldCertificate",
    "build_complex",
    "check_pseudomanifold",
    "star",
    "euler_characteristic",
]

Simplex = tuple


class ComplexError(ValueError):
    pass


class EmptyInput(ComplexError):
    pass


class DuplicateTopSimplex(ComplexError):
    pass


class SimplexNotFound(KeyError):
    pass


def make_simplex(vertices: Iterable[int]) -> Simplex:
    """Return the canonical (sorted) form of a simplex.

    Raises ComplexError for empty input, repeated or negative vertex ids.
    """
    vs = tuple(sorted(int(v) for v in vertices))
    if not vs:
        raise EmptyInput("a simplex needs at least one vertex")
    if vs[0] < 0:
        raise ComplexError(f"negative vertex id in {vs}")
    if any(a == b for a, b in zip(vs, vs[1:])):
        raise ComplexError(f"repeated vertex in {vs}")
    return vs


class SimplicialComplex:
    """A finite simplicial complex given by its top simplexes.

    Vertex ids are dense, ``0 .. vertex_count - 1``. ``labels[i]`` keeps the
    id that vertex ``i`` had in the input, so sparse inputs can be mapped
    back. Faces of each dimension are enumerated on first use and cached;
    the object is otherwise immutable.
    """

    def __init__(self, top_simplexes: Sequence[Simplex], labels: Sequence[int]):
        self.top_simplexes: tuple[Simplex, ...] = tuple(top_simplexes)
        self.labels: tuple[int, ...] = tuple(labels)
        self.vertex_count = len(self.labels)
        self.dim = max(len(s) for s in self.top_simplexes) - 1
        self._faces: dict[int, tuple[Simplex, ...]] = {}
        self._index: dict[int, dict[Simplex, int]] = {}
        self._sarr: dict[int, np.ndarray] = {}
        self._earr: dict[int, np.ndarray] = {}

    def __repr__(self):
        counts = ", ".join(str(self.count(k)) for k in range(self.dim + 1))
        return f"SimplicialComplex(dim={self.dim}, f=({counts}))"

    def faces(self, k: int) -> tuple[Simplex, ...]:
        """All k-simplexes, sorted lexicographically."""
        if k < 0 or k > self.dim:
            return ()
        if k not in self._faces:
            found = set()
            for s in self.top_simplexes:
                if len(s) > k:
                    found.update(combinations(s, k + 1))
            faces = tuple(sorted(found))
            self._faces[k] = faces
            self._index[k] = {f: i for i, f in enumerate(faces)}
        return self._faces[k]

    def count(self, k: int) -> int:
        return len(self.faces(k))

    def index(self, s: Sequence[int]) -> int:
        """Dense index of the simplex ``s`` among faces of its dimension."""
        s = tuple(sorted(s))
        k = len(s) - 1
        self.faces(k)
        try:
            return self._index[k][s]
        except KeyError:
            raise SimplexNotFound(s) from None

    def __contains__(self, s) -> bool:
        try:
            self.index(s)
        except (SimplexNotFound, KeyError):
            return False
        return True

    @property
    def edges(self) -> tuple[Simplex, ...]:
        return self.faces(1)

    @property
    def n_edges(self) -> int:
        return self.count(1)

    def edge_index(self, i: int, j: int) -> int:
        return self.index((i, j) if i < j else (j, i))

    # -- array views used by the numerical modules ------------------------

    def simplex_array(self, k: int) -> np.ndarray:
        """The k-faces as an integer array of shape (count, k+1)."""
        if k not in self._sarr:
            self._sarr[k] = np.array(self.faces(k), dtype=np.int64).reshape(-1, k + 1)
        return self._sarr[k]

    def edge_array(self, k: int) -> np.ndarray:
        """Global edge indices of each k-face.

        Row ``r`` lists the edges of face ``r`` in the local order of
        ``combinations(range(k+1), 2)``.
        """
        if k not in self._earr:
            self.faces(1)
            idx = self._index[1]
            pairs = list(combinations(range(k + 1), 2))
            out = np.empty((self.count(k), len(pairs)), dtype=np.int64)
            for r, s in enumerate(self.faces(k)):
                for c, (p, q) in enumerate(pairs):
                    out[r, c] = idx[(s[p], s[q])]
            self._earr[k] = out
        return self._earr[k]

    @cached_property
    def hinge_map(self) -> np.ndarray:
        """For each top simplex and local vertex pair (p, q), the index of the
        (n-2)-face opposite that pair. Shape (count(n), n(n+1)/2)."""
        n = self.dim
        self.faces(n - 2)
        index = self._index[n - 2]
        pairs = list(combinations(range(n + 1), 2))
        out = np.empty((self.count(n), len(pairs)), dtype=np.int64)
        for r, s in enumerate(self.faces(n)):
            for c, (p, q) in enumerate(pairs):
                out[r, c] = index[tuple(v for i, v in enumerate(s) if i != p and i != q)]
        return out

    @cached_property
    def certificate(self) -> "PseudomanifoldCertificate":
        return check_pseudomanifold(self)

    def cofaces(self, s: Sequence[int], k: int | None = None) -> list[Simplex]:
        """The k-simplexes (default: top dimension) containing ``s``."""
        k = self.dim if k is None else k
        target = set(s)
        return [f for f in self.faces(k) if target.issubset(f)]


@dataclass(frozen=True)
class PseudomanifoldCertificate:
    is_pseudomanifold: bool
    boundary_faces: list = field(default_factory=list)
    violation: str | None = None


def build_complex(top_simplexes: Iterable[Iterable[int]]) -> SimplicialComplex:
    """Build a complex from its top simplexes.

    Vertex ids may be sparse; they are remapped to ``0..V-1`` in increasing
    order and the original ids are kept in ``labels``.
    """
    tops = [make_simplex(s) for s in top_simplexes]
    if not tops:
        raise EmptyInput("no top simplexes given")
    seen = set()
    for s in tops:
        if s in seen:
            raise DuplicateTopSimplex(s)
        seen.add(s)
    labels = sorted({v for s in tops for v in s})
    remap = {v: i for i, v in enumerate(labels)}
    tops = [tuple(remap[v] for v in s) for s in tops]
    return SimplicialComplex(tops, labels)


def check_pseudomanifold(K: SimplicialComplex) -> PseudomanifoldCertificate:
    """Test the three pseudomanifold conditions.

    (1) every top simplex has dimension n, (2) every (n-1)-face lies in at
    most two n-simplexes, (3) the n-simplexes are connected through shared
    (n-1)-faces. The boundary is the set of (n-1)-faces in exactly one
    n-simplex.
    """
    n = K.dim
    low = [s for s in K.top_simplexes if len(s) != n + 1]
    if low:
        return PseudomanifoldCertificate(
            False, [], f"condition 1: {low[0]} is not a face of any {n}-simplex")
    if n == 0:
        ok = len(K.top_simplexes) == 1
        return PseudomanifoldCertificate(
            ok, [], None if ok else "condition 3: several isolated vertices")

    tops = K.faces(n)
    incident: dict[Simplex, list[int]] = {}
    for t, s in enumerate(tops):
        for f in combinations(s, n):
            incident.setdefault(f, []).append(t)

    for f, ts in sorted(incident.items()):
        if len(ts) > 2:
            return PseudomanifoldCertificate(
                False, [], f"condition 2: {f} lies in {len(ts)} {n}-simplexes")

    # union-find over top simplexes sharing a facet
    parent = list(range(len(tops)))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for ts in incident.values():
        if len(ts) == 2:
            a, b = root(ts[0]), root(ts[1])
            if a != b:
                parent[a] = b
    roots = {root(i) for i in range(len(tops))}
    boundary = sorted(f for f, ts in incident.items() if len(ts) == 1)
    if len(roots) > 1:
        return PseudomanifoldCertificate(
            False, boundary,
            f"condition 3: top simplexes fall into {len(roots)} facet-connected pieces")
    return PseudomanifoldCertificate(True, boundary, None)


def star(K: SimplicialComplex, s: Sequence[int]) -> SimplicialComplex:
    """Subcomplex of all top simplexes containing ``s``, with their faces.

    The result is re-indexed densely; ``labels`` map its vertices back to
    the vertex ids of ``K``.
    """
    s = tuple(sorted(s))
    if s not in K:
        raise SimplexNotFound(s)
    tops = K.cofaces(s)
    return build_complex(tops)


def euler_characteristic(K: SimplicialComplex) -> int:
    return sum((-1) ** k * K.count(k) for k in range(K.dim + 1))
