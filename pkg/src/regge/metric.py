"""Squared-edge-length metrics, Gram matrices and simplex volumes.

A metric on a complex K is a vector ``z`` of squared edge lengths, indexed
by the lexicographic edge order of K. For a k-simplex with vertices
``v_0 < ... < v_k`` the Gram matrix with base ``v_0`` is

    A_ij = (z_{0i} + z_{0j} - z_ij) / 2,    1 <= i, j <= k,

and the simplex volume is ``sqrt(det A) / k!``. All batched routines work
on every k-face of K at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .complex import SimplicialComplex

__all__ = [
    "MetricError",
    "DegenerateSimplex",
    "InvalidMetric",
    "BadBaseVertex",
    "VALIDITY_EPS",
    "as_metric",
    "gram",
    "gram_from_sqdist",
    "sqdist_matrices",
    "face_grams",
    "Validity",
    "is_valid",
    "volume_simplex",
    "face_volumes",
    "total_volume",
    "dvolume_dz",
    "face_volume_gradients",
    "BoundaryGauge",
    "boundary_gauge",
]

VALIDITY_EPS = 1e-12


class MetricError(ValueError):
    pass


class DegenerateSimplex(MetricError):
    def __init__(self, simplex, message="degenerate simplex"):
        super().__init__(f"{message}: {tuple(simplex)}")
        self.simplex = tuple(simplex)


class InvalidMetric(MetricError):
    def __init__(self, simplex, message="metric not realizable on simplex"):
        super().__init__(f"{message}: {tuple(simplex) if simplex is not None else '?'}")
        self.simplex = simplex


class BadBaseVertex(MetricError):
    pass


def as_metric(K: SimplicialComplex, z) -> np.ndarray:
    """Check shape and positivity of ``z`` and return it as a float array."""
    z = np.asarray(z, dtype=float)
    if z.shape != (K.n_edges,):
        raise MetricError(f"metric has shape {z.shape}, expected ({K.n_edges},)")
    if not np.all(np.isfinite(z)):
        raise MetricError("metric has non-finite entries")
    bad = np.flatnonzero(z <= 0)
    if bad.size:
        raise InvalidMetric(K.edges[bad[0]], "non-positive squared length on edge")
    return z


def sqdist_matrices(K: SimplicialComplex, z, k: int) -> np.ndarray:
    """Squared-distance matrices of all k-faces, shape (m, k+1, k+1)."""
    z = np.asarray(z, dtype=float)
    E = K.edge_array(k)
    m = E.shape[0]
    D = np.zeros((m, k + 1, k + 1))
    for c, (p, q) in enumerate(combinations(range(k + 1), 2)):
        D[:, p, q] = D[:, q, p] = z[E[:, c]]
    return D


def gram_from_sqdist(D: np.ndarray, base: int = 0) -> np.ndarray:
    """Gram matrices from stacked squared-distance matrices."""
    D = np.asarray(D)
    k1 = D.shape[-1]
    rest = [i for i in range(k1) if i != base]
    d0 = D[..., base, rest]
    Dr = D[..., rest, :][..., :, rest]
    return 0.5 * (d0[..., :, None] + d0[..., None, :] - Dr)


def face_grams(K: SimplicialComplex, z, k: int) -> np.ndarray:
    """Gram matrices (base = smallest vertex) of all k-faces, shape (m, k, k)."""
    return gram_from_sqdist(sqdist_matrices(K, z, k))


def gram(K: SimplicialComplex, z, s: Sequence[int], base_vertex: int | None = None) -> np.ndarray:
    """Gram matrix of the simplex ``s`` with the given base vertex.

    Rows follow the remaining vertices of ``s`` in increasing order.
    """
    s = tuple(sorted(s))
    if base_vertex is None:
        base_vertex = s[0]
    if base_vertex not in s:
        raise BadBaseVertex(f"{base_vertex} is not a vertex of {s}")
    z = np.asarray(z, dtype=float)
    k = len(s) - 1
    D = np.zeros((k + 1, k + 1))
    for p, q in combinations(range(k + 1), 2):
        D[p, q] = D[q, p] = z[K.edge_index(s[p], s[q])]
    return gram_from_sqdist(D, s.index(base_vertex))


# -- validity ---------------------------------------------------------------

@dataclass(frozen=True)
class Validity:
    valid: bool
    simplex: tuple | None = None
    near_degenerate: tuple = ()

    def __bool__(self):
        return self.valid


def _minor_status(A: np.ndarray, eps: float):
    """Leading-principal-minor test on stacked Gram matrices.

    Returns per-matrix codes: 0 positive definite, 1 near-degenerate
    (some minor in (0, eps * (trace/l)^l]), 2 not positive definite.
    """
    m, k, _ = A.shape
    status = np.zeros(m, dtype=int)
    for l in range(1, k + 1):
        sub = A[:, :l, :l]
        det = np.linalg.det(sub)
        scale = (np.trace(sub, axis1=1, axis2=2) / l)
        thresh = eps * np.abs(scale) ** l
        bad = (det <= 0) | (scale <= 0)
        near = ~bad & (det <= thresh)
        status = np.maximum(status, np.where(bad, 2, np.where(near, 1, 0)))
    return status


def is_valid(K: SimplicialComplex, z, eps: float = VALIDITY_EPS) -> Validity:
    """Whether ``z`` lies in the cone of realizable metrics on ``K``.

    Every top simplex must have a positive definite Gram matrix. Positive
    definiteness of a top simplex covers all of its faces.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (K.n_edges,) or not np.all(np.isfinite(z)):
        return Validity(False, None)
    nonpos = np.flatnonzero(z <= 0)
    if nonpos.size:
        return Validity(False, K.edges[nonpos[0]])
    near = []
    groups = {}
    for t in K.top_simplexes:
        groups.setdefault(len(t) - 1, []).append(t)
    for k, faces in sorted(groups.items()):
        if k < 2:
            continue
        if k == K.dim:
            faces = K.faces(k)
            A = face_grams(K, z, k)
        else:
            A = np.array([gram(K, z, t) for t in faces])
        status = _minor_status(A, eps)
        bad = np.flatnonzero(status == 2)
        if bad.size:
            return Validity(False, faces[bad[0]])
        near.extend(faces[i] for i in np.flatnonzero(status == 1))
    return Validity(True, None, tuple(near))


# -- volumes ----------------------------------------------------------------

def _volumes_from_grams(A: np.ndarray, k: int) -> np.ndarray:
    det = np.linalg.det(A)
    return np.sqrt(np.clip(det, 0.0, None)) / math.factorial(k), det


def face_volumes(K: SimplicialComplex, z, k: int, check: bool = True) -> np.ndarray:
    """Volumes of all k-faces of K."""
    z = np.asarray(z, dtype=float)
    if k == 0:
        return np.ones(K.count(0))
    if k == 1:
        return np.sqrt(z)
    vol, det = _volumes_from_grams(face_grams(K, z, k), k)
    if check:
        bad = np.flatnonzero(det <= 0)
        if bad.size:
            raise DegenerateSimplex(K.faces(k)[bad[0]])
    return vol


def volume_simplex(K: SimplicialComplex, z, s: Sequence[int]) -> float:
    s = tuple(sorted(s))
    k = len(s) - 1
    if k == 0:
        return 1.0
    z = np.asarray(z, dtype=float)
    if k == 1:
        return math.sqrt(z[K.index(s)])
    det = np.linalg.det(gram(K, z, s))
    if det <= 0:
        raise DegenerateSimplex(s)
    return math.sqrt(det) / math.factorial(k)


def total_volume(K: SimplicialComplex, z) -> float:
    return float(np.sum(face_volumes(K, z, K.dim)))


def _volume_gradients_from_grams(A: np.ndarray, k: int):
    """Local volume gradients for stacked Gram matrices.

    With ``adj = det(A) A^{-1}`` Jacobi's formula gives
    d det / d z_{0i} = row sum i of adj and d det / d z_ij = -adj_ij
    (i, j >= 1). Dividing by ``2 (k!)^2 |sigma|`` and cancelling det gives
    the expressions below in terms of the inverse. Columns follow
    ``combinations(range(k+1), 2)``.
    """
    vol, det = _volumes_from_grams(A, k)
    Ainv = np.linalg.inv(A)
    half = (np.sqrt(np.clip(det, 0.0, None)) / (2 * math.factorial(k)))[:, None]
    pairs = list(combinations(range(k + 1), 2))
    G = np.empty((A.shape[0], len(pairs)))
    rows = Ainv.sum(axis=2)
    for c, (p, q) in enumerate(pairs):
        if p == 0:
            G[:, c] = rows[:, q - 1]
        else:
            G[:, c] = -Ainv[:, p - 1, q - 1]
    return vol, det, G * half


def face_volume_gradients(K: SimplicialComplex, z, k: int):
    """Volumes of all k-faces and their gradients along the local edges.

    Returns ``(vol, grad)`` with ``grad`` of shape (m, k(k+1)/2), columns
    matching ``K.edge_array(k)``.
    """
    z = np.asarray(z, dtype=float)
    m = K.count(k)
    if k == 0:
        return np.ones(m), np.zeros((m, 0))
    if k == 1:
        s = np.sqrt(z)
        return s, (0.5 / s)[:, None]
    vol, det, G = _volume_gradients_from_grams(face_grams(K, z, k), k)
    bad = np.flatnonzero(det <= 0)
    if bad.size:
        raise DegenerateSimplex(K.faces(k)[bad[0]])
    return vol, G


def dvolume_dz(K: SimplicialComplex, z, s: Sequence[int]) -> dict:
    """Partial derivatives of |s| with respect to the squared lengths of
    its edges, as a mapping edge -> derivative."""
    s = tuple(sorted(s))
    k = len(s) - 1
    z = np.asarray(z, dtype=float)
    edges = [(s[p], s[q]) for p, q in combinations(range(k + 1), 2)]
    if k == 1:
        return {edges[0]: 0.5 / math.sqrt(z[K.index(s)])}
    if k == 0:
        return {}
    A = gram(K, z, s)[None]
    _, det, G = _volume_gradients_from_grams(A, k)
    if det[0] <= 0:
        raise DegenerateSimplex(s)
    return dict(zip(edges, G[0]))


# -- boundary gauge ---------------------------------------------------------

@dataclass(frozen=True)
class BoundaryGauge:
    d: float
    argmin_simplex: tuple


def boundary_gauge(K: SimplicialComplex, z) -> BoundaryGauge:
    """Distance-like functional to the boundary of the metric cone.

    ``d(z) = min over all faces sigma^k, k >= 1, of |sigma^k|^(2/k)``. It is
    homogeneous of degree one in ``z`` and vanishes exactly when some face
    degenerates.
    """
    z = np.asarray(z, dtype=float)
    best, arg = math.inf, None
    for k in range(1, K.dim + 1):
        vol = face_volumes(K, z, k, check=False)
        if vol.size == 0:
            continue
        i = int(np.argmin(vol))
        val = float(vol[i]) ** (2.0 / k)
        if val < best:
            best, arg = val, K.faces(k)[i]
    return BoundaryGauge(best, arg)
