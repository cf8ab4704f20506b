"""Dihedral angles, deficits and the Einstein vector field.

Angles are measured in turns (a full turn is 1), so the deficit at an
(n-2)-face F is ``1 - sum of dihedral angles at F``. The total scalar
curvature is ``R = sum_F deficit(F) |F|`` and, by Regge's identity, its
gradient with respect to the squared lengths is

    Ein_e = sum_{F containing e} deficit(F) * d|F|/dz_e.

Everything here requires a pseudomanifold without boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .complex import SimplicialComplex
from .metric import (
    DegenerateSimplex,
    MetricError,
    face_grams,
    face_volume_gradients,
    gram,
)

__all__ = [
    "CurvatureError",
    "BoundaryNotSupported",
    "DenominatorZero",
    "ACOS_GUARD",
    "ZERO_TOL",
    "dihedral_angles",
    "dihedral_angle",
    "dihedral_angle_wedge",
    "deficits",
    "deficit",
    "total_scalar_curvature",
    "einstein_vector_field",
    "volume_gradient",
    "Kappas",
    "Deltas",
    "CurvatureReport",
    "curvature_report",
    "traceless_fields",
    "kappa_estimates",
    "deviation_measures",
    "EinsteinVerdict",
    "einstein_verdict",
]

ACOS_GUARD = 1e-12
ZERO_TOL = 1e-12


class CurvatureError(MetricError):
    pass


class BoundaryNotSupported(CurvatureError):
    pass


class DenominatorZero(CurvatureError):
    pass


def _require_closed(K: SimplicialComplex):
    cert = K.certificate
    if not cert.is_pseudomanifold:
        raise CurvatureError(f"not a pseudomanifold ({cert.violation})")
    if cert.boundary_faces:
        raise BoundaryNotSupported(
            f"complex has {len(cert.boundary_faces)} boundary faces")
    if K.dim < 2:
        raise CurvatureError("curvature needs dimension >= 2")


def _clamped_acos(c: np.ndarray, faces, what="dihedral angle") -> np.ndarray:
    over = (np.abs(c) > 1 + ACOS_GUARD).any(axis=-1)
    if np.any(over):
        raise DegenerateSimplex(faces[np.flatnonzero(over)[0]], f"{what} cosine out of range")
    return np.arccos(np.clip(c, -1.0, 1.0))


def _angles_from_grams(A: np.ndarray, faces) -> np.ndarray:
    """Interior dihedral angles (turns) of stacked simplexes.

    The simplex is embedded with vertex 0 at the origin and vertex i at row
    i of the Cholesky factor L of its Gram matrix. The rows of L^{-T} are
    the dual basis; the inward normal of the facet opposite vertex i >= 1
    is dual vector i, and that of the facet opposite vertex 0 is minus
    their sum. The angle at the face opposite the pair (p, q) is
    ``arccos(-<m_p, m_q>) / 2pi`` for unit inward normals m.
    """
    m, n, _ = A.shape
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        bad = [i for i in range(m) if np.any(np.linalg.eigvalsh(A[i]) <= 0)]
        raise DegenerateSimplex(faces[bad[0] if bad else 0]) from None
    dual = np.linalg.inv(L).transpose(0, 2, 1)
    N = np.empty((m, n + 1, n))
    N[:, 1:, :] = dual
    N[:, 0, :] = -dual.sum(axis=1)
    N /= np.linalg.norm(N, axis=2, keepdims=True)
    pairs = list(combinations(range(n + 1), 2))
    p = [a for a, _ in pairs]
    q = [b for _, b in pairs]
    cos = -np.einsum("mij,mij->mi", N[:, p, :], N[:, q, :])
    return _clamped_acos(cos, faces) / (2 * math.pi)


def dihedral_angles(K: SimplicialComplex, z) -> np.ndarray:
    """Dihedral angles of every top simplex, shape (count(n), n(n+1)/2).

    Column c belongs to the local vertex pair ``combinations(range(n+1), 2)[c]``
    and holds the angle at the (n-2)-face opposite that pair, in turns.
    """
    n = K.dim
    return _angles_from_grams(face_grams(K, z, n), K.faces(n))


def _local_pair(s_n2, s_n):
    s_n2, s_n = tuple(sorted(s_n2)), tuple(sorted(s_n))
    if len(s_n) != len(s_n2) + 2 or not set(s_n2) <= set(s_n):
        raise CurvatureError(f"{s_n2} is not a codimension-2 face of {s_n}")
    p, q = (i for i, v in enumerate(s_n) if v not in s_n2)
    return s_n2, s_n, p, q


def dihedral_angle(K: SimplicialComplex, z, s_n2: Sequence[int], s_n: Sequence[int]) -> float:
    """Dihedral angle of ``s_n`` at its codimension-2 face ``s_n2`` (turns)."""
    s_n2, s_n, p, q = _local_pair(s_n2, s_n)
    A = gram(K, z, s_n)[None]
    col = list(combinations(range(len(s_n)), 2)).index((p, q))
    return float(_angles_from_grams(A, [s_n])[0, col])


def dihedral_angle_wedge(K: SimplicialComplex, z, s_n2: Sequence[int], s_n: Sequence[int]) -> float:
    """The same angle from Gram determinants of wedge products.

    With base b in F = s_n2, f_i = x_i - x_b for the other vertices of F and
    u_p, u_q the edge vectors to the two remaining vertices,

        cos = <f ^ u_q, f ^ u_p> / (|f ^ u_q| |f ^ u_p|),

    and each wedge inner product is a determinant of inner products
    ``<x_i - x_b, x_j - x_b> = (z_bi + z_bj - z_ij) / 2``. No embedding is
    used, so this is an independent route to the angle.
    """
    s_n2, s_n, p, q = _local_pair(s_n2, s_n)
    z = np.asarray(z, dtype=float)
    vp, vq = s_n[p], s_n[q]
    b, rest = s_n2[0], list(s_n2[1:])

    def zz(i, j):
        return 0.0 if i == j else z[K.edge_index(i, j)]

    def ip(i, j):
        return 0.5 * (zz(b, i) + zz(b, j) - zz(i, j))

    def wedge_ip(last1, last2):
        r1, r2 = rest + [last1], rest + [last2]
        return np.linalg.det(np.array([[ip(i, j) for j in r2] for i in r1]))

    c = wedge_ip(vq, vp) / math.sqrt(wedge_ip(vq, vq) * wedge_ip(vp, vp))
    if abs(c) > 1 + ACOS_GUARD:
        raise DegenerateSimplex(s_n, "dihedral angle cosine out of range")
    return math.acos(min(1.0, max(-1.0, c))) / (2 * math.pi)


def deficits(K: SimplicialComplex, z) -> np.ndarray:
    """Deficit angle (turns) at every (n-2)-face."""
    _require_closed(K)
    ang = dihedral_angles(K, z)
    total = np.bincount(K.hinge_map.ravel(), weights=ang.ravel(),
                        minlength=K.count(K.dim - 2))
    return 1.0 - total


def deficit(K: SimplicialComplex, z, s_n2: Sequence[int]) -> float:
    return float(deficits(K, z)[K.index(s_n2)])


def _scatter_edges(K, k, local, n_edges):
    out = np.zeros(n_edges)
    E = K.edge_array(k)
    if E.size:
        np.add.at(out, E.ravel(), local.ravel())
    return out


def total_scalar_curvature(K: SimplicialComplex, z) -> float:
    d = deficits(K, z)
    vol, _ = face_volume_gradients(K, z, K.dim - 2)
    return float(d @ vol)


def einstein_vector_field(K: SimplicialComplex, z) -> np.ndarray:
    d = deficits(K, z)
    _, G = face_volume_gradients(K, z, K.dim - 2)
    return _scatter_edges(K, K.dim - 2, d[:, None] * G, K.n_edges)


def volume_gradient(K: SimplicialComplex, z) -> np.ndarray:
    _, G = face_volume_gradients(K, z, K.dim)
    return _scatter_edges(K, K.dim, G, K.n_edges)


# -- report -----------------------------------------------------------------

@dataclass(frozen=True)
class Kappas:
    """Estimators for the Einstein constant; ``None`` marks a zero denominator."""
    I1: float
    I2: float
    I3: float | None
    II1: float
    II2: float
    II3: float | None


@dataclass(frozen=True)
class Deltas:
    """Squared norms of the residuals ``Ein - kappa * z`` (type I) and
    ``Ein - kappa * v`` (type II) for the corresponding estimators."""
    I1: float
    I2: float
    I3: float | None
    II1: float
    II2: float
    II3: float | None


@dataclass(frozen=True)
class CurvatureReport:
    n: int
    z: np.ndarray
    deficits: np.ndarray
    R: float
    V: float
    Rbar: float
    Ein: np.ndarray
    v: np.ndarray
    ric_hat_I: np.ndarray
    ric_hat_II: np.ndarray
    kappa: Kappas
    delta: Deltas
    # scales used to decide when R or <v, Ein> count as zero
    R_scale: float = field(repr=False, default=1.0)
    vEin_scale: float = field(repr=False, default=1.0)

    @property
    def norm_z_sq(self) -> float:
        return float(self.z @ self.z)

    @property
    def v_dot_Ein(self) -> float:
        return float(self.v @ self.Ein)

    @property
    def R_is_zero(self) -> bool:
        return abs(self.R) <= ZERO_TOL * self.R_scale

    @property
    def vEin_is_zero(self) -> bool:
        return abs(self.v_dot_Ein) <= ZERO_TOL * self.vEin_scale

    def to_dict(self) -> dict:
        def arr(x):
            return [float(t) for t in x]
        return {
            "n": self.n,
            "R": self.R,
            "V": self.V,
            "Rbar": self.Rbar,
            "norm_z_sq": self.norm_z_sq,
            "z": arr(self.z),
            "deficits": arr(self.deficits),
            "Ein": arr(self.Ein),
            "v": arr(self.v),
            "ric_hat_I": arr(self.ric_hat_I),
            "ric_hat_II": arr(self.ric_hat_II),
            "kappa": vars(self.kappa).copy(),
            "delta": vars(self.delta).copy(),
        }


def curvature_report(K: SimplicialComplex, z) -> CurvatureReport:
    """Evaluate all curvature quantities at ``z`` in one pass."""
    _require_closed(K)
    z = np.asarray(z, dtype=float)
    n = K.dim
    ne = K.n_edges

    d = deficits(K, z)
    hvol, hgrad = face_volume_gradients(K, z, n - 2)
    R = float(d @ hvol)
    Ein = _scatter_edges(K, n - 2, d[:, None] * hgrad, ne)
    tvol, tgrad = face_volume_gradients(K, z, n)
    V = float(tvol.sum())
    v = _scatter_edges(K, n, tgrad, ne)

    zz = float(z @ z)
    vv = float(v @ v)
    vE = float(v @ Ein)
    EE = float(Ein @ Ein)
    R_scale = float(hvol.sum())
    unit_ein = _scatter_edges(K, n - 2, hgrad, ne)
    vEin_scale = math.sqrt(vv) * float(np.linalg.norm(unit_ein))
    R_zero = abs(R) <= ZERO_TOL * R_scale
    vE_zero = abs(vE) <= ZERO_TOL * vEin_scale

    kI1 = 0.5 * (n - 2) * R / zz
    kI2 = (2.0 / n) * vE / V
    # in dimension 2 the estimator is 0/0: R is topological and Ein vanishes
    kI3 = None if R_zero or n == 2 else (2.0 / (n - 2)) * EE / R
    kII1 = ((n - 2) / n) * R / V
    kII2 = vE / vv
    kII3 = None if vE_zero else EE / vE
    kappa = Kappas(kI1, kI2, kI3, kII1, kII2, kII3)

    def sq(x):
        return float(x @ x)

    ric_I = Ein - kI1 * z
    ric_II = Ein - kII1 * v
    delta = Deltas(
        sq(ric_I),
        sq(Ein - kI2 * z),
        None if kI3 is None else sq(Ein - kI3 * z),
        sq(ric_II),
        sq(Ein - kII2 * v),
        None if kII3 is None else sq(Ein - kII3 * v),
    )
    return CurvatureReport(n, z, d, R, V, R / V, Ein, v, ric_I, ric_II,
                           kappa, delta, R_scale, vEin_scale)


def traceless_fields(K: SimplicialComplex, z):
    r = curvature_report(K, z)
    return r.ric_hat_I, r.ric_hat_II


def kappa_estimates(K: SimplicialComplex, z) -> Kappas:
    return curvature_report(K, z).kappa


def deviation_measures(K: SimplicialComplex, z) -> Deltas:
    return curvature_report(K, z).delta


# -- Einstein test ----------------------------------------------------------

@dataclass(frozen=True)
class EinsteinVerdict:
    type_I: bool
    type_II: bool
    einstein_flat: bool
    residual_I: float
    residual_II: float
    kappa_I: float
    kappa_II: float
    # both sides of R^2 <= 4/(n-2)^2 |z|^2 |Ein|^2, equality iff type I
    schwarz_lhs: float | None
    schwarz_rhs: float | None

    def to_dict(self) -> dict:
        return dict(vars(self))


def einstein_verdict(K: SimplicialComplex, z, tol: float = 1e-8,
                     report: CurvatureReport | None = None) -> EinsteinVerdict:
    """Decide whether ``z`` is an Einstein metric of type I and/or II.

    ``Ein`` counts as zero when ``|Ein| <= tol * (n-2)/2 * |z|^((n-4)/2)``,
    the size the Einstein field of a unit-curvature metric would have at
    this scale. Otherwise type I holds when the residual of ``Ein`` against
    the best multiple of ``z`` is at most ``tol * |Ein|``; type II likewise
    against the volume gradient. An Einstein-flat metric is of both types.
    """
    r = report if report is not None else curvature_report(K, z)
    n = r.n
    norm_z = math.sqrt(r.norm_z_sq)
    norm_E = float(np.linalg.norm(r.Ein))
    floor = 0.5 * (n - 2) * norm_z ** ((n - 4) / 2)
    flat = norm_E <= tol * floor
    scale = max(norm_E, floor)
    res_I = r.delta.I1
    res_II = r.delta.II1
    type_I = flat or math.sqrt(res_I) <= tol * scale
    type_II = flat or math.sqrt(res_II) <= tol * scale
    if n > 2:
        lhs = r.R ** 2
        rhs = 4.0 / (n - 2) ** 2 * r.norm_z_sq * norm_E ** 2
    else:
        lhs = rhs = None
    return EinsteinVerdict(
        type_I, type_II, flat, res_I, res_II,
        0.0 if flat else r.kappa.I1,
        0.0 if flat else r.kappa.II1,
        lhs, rhs)
