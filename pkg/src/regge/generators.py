"""Concrete spaces: simplex boundaries, flat tori, barycentric subdivisions
and random perturbations of a metric."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Any

import numpy as np

from .complex import SimplicialComplex, build_complex
from .metric import is_valid, total_volume

__all__ = [
    "GeneratorError",
    "PeriodTooSmall",
    "CannotPerturb",
    "GeneratedSpace",
    "SubdivisionMap",
    "boundary_simplex",
    "flat_torus",
    "torus_cover_sqdist",
    "barycentric_subdivision",
    "perturb",
]


class GeneratorError(ValueError):
    pass


class PeriodTooSmall(GeneratorError):
    pass


class CannotPerturb(GeneratorError):
    pass


@dataclass(frozen=True)
class GeneratedSpace:
    K: SimplicialComplex
    z: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.K.dim


def boundary_simplex(n: int, a: float = 1.0) -> GeneratedSpace:
    """The boundary of the (n+1)-simplex with every squared length ``a``."""
    if n < 1:
        raise GeneratorError("n must be at least 1")
    if not a > 0:
        raise GeneratorError("a must be positive")
    K = build_complex(combinations(range(n + 2), n + 1))
    return GeneratedSpace(K, np.full(K.n_edges, float(a)),
                          {"kind": "boundary-simplex", "n": n, "a": float(a)})


# -- flat torus -------------------------------------------------------------
#
# Vertices live on the doubled lattice (Z / 2N)^n: even coordinates are cube
# corners, odd coordinates mark barycenters of cube faces. Coning each cube
# face from its barycenter, recursively, cuts every cube into n! 2^n flag
# simplexes: start at the cube center and fix the coordinates one at a time
# (order given by a permutation, each to the low or high side).

def _torus_vertex_id(p, N):
    m = 2 * N
    vid = 0
    for c in p:
        vid = vid * m + (c % m)
    return vid


def _torus_coords(vid, n, N):
    m = 2 * N
    out = []
    for _ in range(n):
        out.append(vid % m)
        vid //= m
    return tuple(reversed(out))


def torus_cover_sqdist(p, q, N: int) -> float:
    """Squared distance between two doubled-lattice points of the torus,
    in the universal cover, using the shortest image (cube side 1)."""
    m = 2 * N
    total = 0.0
    for a, b in zip(p, q):
        d = (b - a) % m
        d = min(d, m - d)
        total += (d / 2.0) ** 2
    return total


def flat_torus(n: int, period: int = 3) -> GeneratedSpace:
    """Flat n-torus (n in {2, 3}) made of period^n unit cubes."""
    if n not in (2, 3):
        raise GeneratorError("flat_torus supports n = 2 or 3")
    if period < 3:
        raise PeriodTooSmall("period must be at least 3")
    N = period
    tops = []
    for corner in product(range(N), repeat=n):
        base = [2 * c for c in corner]
        center = [b + 1 for b in base]
        for order in permutations(range(n)):
            for side in product((0, 2), repeat=n):
                p = list(center)
                chain = [tuple(p)]
                for axis in order:
                    p[axis] = base[axis] + side[axis]
                    chain.append(tuple(p))
                tops.append([_torus_vertex_id(v, N) for v in chain])
    K = build_complex(tops)
    coords = [_torus_coords(lbl, n, N) for lbl in K.labels]
    z = np.array([torus_cover_sqdist(coords[i], coords[j], N) for i, j in K.edges])
    return GeneratedSpace(K, z, {"kind": "torus", "n": n, "period": N,
                                 "coords": coords})


# -- barycentric subdivision ------------------------------------------------

@dataclass(frozen=True)
class SubdivisionMap:
    """Correspondence between a barycentric subdivision and its parent.

    ``labels[i]`` is the parent face whose barycenter is vertex ``i`` of the
    subdivision. A subdivision simplex is a chain of parent faces; its
    carrier is the largest face of the chain.
    """
    parent: SimplicialComplex
    labels: tuple

    def carrier(self, s) -> tuple:
        return max((self.labels[v] for v in s), key=len)

    def precedes(self, s, parent_face) -> bool:
        """True when ``s`` lies in ``parent_face`` and has its dimension."""
        c = self.carrier(s)
        return len(c) == len(s) and c == tuple(sorted(parent_face))

    def theta(self, K: SimplicialComplex, k: int) -> list:
        """k-simplexes of the subdivision whose carrier has larger dimension."""
        return [s for s in K.faces(k) if len(self.carrier(s)) - 1 > k]

    def fiber(self, K: SimplicialComplex, parent_face) -> list:
        parent_face = tuple(sorted(parent_face))
        k = len(parent_face) - 1
        return [s for s in K.faces(k) if self.precedes(s, parent_face)]


def _barycenter_sqdist(alpha, beta, D):
    """Squared distance between the barycenters of two faces of a simplex.

    ``alpha`` and ``beta`` are local vertex index tuples and ``D`` the
    squared-distance matrix of the simplex. For weight vectors w summing to
    zero, |sum w_i x_i|^2 = -1/2 w^T D w.
    """
    k1 = len(D)
    one = Fraction(1) if isinstance(D[0][1], Fraction) else 1.0
    w = [0 * one] * k1
    for i in alpha:
        w[i] += one / len(alpha)
    for i in beta:
        w[i] -= one / len(beta)
    total = 0 * one
    for i in range(k1):
        for j in range(k1):
            if i != j:
                total += w[i] * w[j] * D[i][j]
    return -total / 2


def barycentric_subdivision(space: GeneratedSpace):
    """Barycentric subdivision of a space together with its induced metric.

    Returns ``(GeneratedSpace, SubdivisionMap)``. New vertices are the
    barycenters of all parent faces, numbered by (dimension, lexicographic
    order); top simplexes are the full flags of faces. Each new edge joins
    the barycenters of two nested faces, and its squared length is computed
    inside the larger one. When that face is equilateral the computation is
    exact in rational arithmetic.
    """
    P = space.K
    z = np.asarray(space.z, dtype=float)
    n = P.dim
    labels = [f for k in range(n + 1) for f in P.faces(k)]
    vid = {f: i for i, f in enumerate(labels)}

    tops = []
    for top in P.faces(n):
        for order in permutations(top):
            chain = [tuple(sorted(order[:j])) for j in range(1, n + 2)]
            tops.append([vid[c] for c in chain])
    K = build_complex(tops)

    def sqdist_matrix(face):
        vals = [z[P.edge_index(a, b)] for a, b in combinations(face, 2)]
        exact = len(set(vals)) == 1
        k1 = len(face)
        zero = Fraction(0) if exact else 0.0
        D = [[zero] * k1 for _ in range(k1)]
        for (p, q), val in zip(combinations(range(k1), 2), vals):
            v = Fraction(val) if exact else val
            D[p][q] = D[q][p] = v
        return D

    cache: dict = {}
    znew = np.empty(K.n_edges)
    for e, (i, j) in enumerate(K.edges):
        fi, fj = labels[i], labels[j]
        small, big = (fi, fj) if len(fi) < len(fj) else (fj, fi)
        if big not in cache:
            cache[big] = sqdist_matrix(big)
        pos = {v: t for t, v in enumerate(big)}
        znew[e] = float(_barycenter_sqdist([pos[v] for v in small],
                                           list(range(len(big))), cache[big]))
    smap = SubdivisionMap(P, tuple(labels))
    prov = {"kind": "barycentric", "parent": space.provenance}
    return GeneratedSpace(K, znew, prov), smap


# -- perturbation -----------------------------------------------------------

def perturb(space: GeneratedSpace, magnitude: float, constraint: str | None = None,
            seed: int = 0, max_tries: int = 100) -> GeneratedSpace:
    """Random perturbation ``z + magnitude * u`` with a unit vector ``u``.

    ``constraint`` is ``None``, ``"sphere"`` (rescale back to the original
    norm) or ``"volume"`` (rescale back to the original total volume).
    Invalid draws are retried with the magnitude halved each time.
    """
    if constraint not in (None, "none", "sphere", "volume"):
        raise GeneratorError(f"unknown constraint {constraint!r}")
    K, z = space.K, np.asarray(space.z, dtype=float)
    rng = np.random.default_rng(seed)
    eps = float(magnitude)
    norm0 = float(np.linalg.norm(z))
    V0 = total_volume(K, z) if constraint == "volume" else None
    for attempt in range(max_tries):
        u = rng.standard_normal(z.size)
        u /= np.linalg.norm(u)
        w = z + eps * u
        if is_valid(K, w):
            if constraint == "sphere":
                w = norm0 * w / np.linalg.norm(w)
            elif constraint == "volume":
                w = (V0 / total_volume(K, w)) ** (2.0 / K.dim) * w
            prov = {"kind": "perturbation", "parent": space.provenance,
                    "magnitude": eps, "constraint": constraint, "seed": seed,
                    "attempts": attempt + 1}
            return GeneratedSpace(K, w, prov)
        eps *= 0.5
    raise CannotPerturb(f"no valid perturbation after {max_tries} draws")
