"""Second variation of the total scalar curvature at the equilateral
boundary of the 4-simplex.

Near the equilateral metric ``a`` on the ten edges of the 4-simplex
boundary, R is expanded to second order along two families of paths:

* sphere paths  ``z(t) = |a| (a + t u) / |a + t u|``,
* volume paths  ``z(t) = (V(a) / V(a + t u))^(2/3) (a + t u)``,

with ``u`` orthogonal to the all-ones vector. The quadratic forms are
combinations of three spectral projections H1, H4, H5 of the edge
adjacency matrices (disjoint edges: N1, edges sharing a vertex: N2), so
their spectra follow from three coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np

from .curvature import deficits, total_scalar_curvature
from .generators import boundary_simplex
from .metric import total_volume

__all__ = [
    "DELTA3",
    "CombinatorialMatrices",
    "build_combinatorial_matrices",
    "edge_permutation_matrix",
    "all_edge_permutations",
    "gammas",
    "mhat",
    "dihedral_derivative_matrix",
    "dihedral_derivative_fd",
    "SpectrumResult",
    "spectrum",
    "projection_coefficients",
    "tetra_detA",
    "tetra_detA_partials",
    "tetra_detA_derivatives",
    "printed_detA_hessian",
    "dihedral_derivative_pattern",
    "volume_hessian",
    "volume_hessian_printed",
    "mv_matrices",
    "VariationMatrices",
    "variation_matrices",
    "second_variation_sphere",
    "second_variation_volume",
    "sphere_path",
    "volume_path",
    "second_variation_fd",
    "REFERENCE_SPECTRA",
    "compare_spectrum",
]

# deficit at every edge of the equilateral 4-simplex boundary (turns)
DELTA3 = 1.0 - 3.0 / (2.0 * math.pi) * math.acos(1.0 / 3.0)

# published approximate spectra of the normalized forms, (value, multiplicity)
REFERENCE_SPECTRA = {
    "sphere": [(-26.4846, 5), (-11.4846, 4), (0.0, 1)],
    "volume": [(-5.54, 4), (0.0, 1), (35.08, 5)],
}
REFERENCE_TOL = {"sphere": 1e-3, "volume": 1e-2}


@dataclass(frozen=True)
class CombinatorialMatrices:
    edges: tuple
    I: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    P: np.ndarray
    H1: np.ndarray
    H4: np.ndarray
    H5: np.ndarray


def build_combinatorial_matrices() -> CombinatorialMatrices:
    """Adjacency matrices and spectral projections on the ten edges, in the
    lexicographic edge order of the complex module."""
    K = boundary_simplex(3).K
    edges = K.edges
    m = len(edges)
    N1 = np.zeros((m, m), dtype=int)
    N2 = np.zeros((m, m), dtype=int)
    for i, e in enumerate(edges):
        for j, f in enumerate(edges):
            if i == j:
                continue
            if set(e) & set(f):
                N2[i, j] = 1
            else:
                N1[i, j] = 1
    I = np.eye(m, dtype=int)
    P = np.full((m, m), 1.0 / m)
    H1 = (I + N1 + N2) / 10.0
    H4 = (6 * I - 4 * N1 + N2) / 15.0
    H5 = (3 * I + N1 - N2) / 6.0
    return CombinatorialMatrices(edges, I, N1, N2, P, H1, H4, H5)


def edge_permutation_matrix(perm) -> np.ndarray:
    """Matrix of the action of a vertex permutation on the ten edges."""
    edges = list(combinations(range(5), 2))
    index = {e: i for i, e in enumerate(edges)}
    O = np.zeros((10, 10))
    for i, (p, q) in enumerate(edges):
        img = tuple(sorted((perm[p], perm[q])))
        O[index[img], i] = 1.0
    return O


def all_edge_permutations() -> list:
    """Edge actions of all 120 vertex permutations."""
    return [edge_permutation_matrix(p) for p in permutations(range(5))]


def gammas(a: float = 1.0):
    """Prefactors of the quadratic forms at squared edge length ``a``."""
    s = a ** 1.5
    g1 = 1.0 / (2 * math.pi * s * 6 * math.sqrt(2))
    g2 = DELTA3 / (4 * s)
    g3 = DELTA3 / (6 * s)
    g4 = DELTA3 / (24 * s)
    return g1, g2, g3, g4


def mhat(cm: CombinatorialMatrices | None = None) -> np.ndarray:
    cm = cm or build_combinatorial_matrices()
    return 3 * cm.I + 3 * cm.N1 - 2 * cm.N2


def dihedral_derivative_matrix(a: float = 1.0) -> np.ndarray:
    """Jacobian of the deficits, ``M[i, j] = d deficit(e_i) / d z_j`` at ``a``.

    Equals ``-Mhat / (2 pi a 3 sqrt 2)``: ``-1/(2 pi a sqrt 2)`` on the
    diagonal and for disjoint edges, ``+2/(2 pi a 3 sqrt 2)`` for edges
    sharing a vertex.
    """
    return -mhat() / (2 * math.pi * a * 3 * math.sqrt(2))


def dihedral_derivative_pattern() -> list:
    """Exact entries of ``M`` in units of ``1 / (2 pi a sqrt 2)``: -1 on the
    diagonal and for disjoint edges, 2/3 for edges sharing a vertex."""
    cm = build_combinatorial_matrices()
    return [[Fraction(-int(v), 3) for v in row] for row in mhat(cm)]


def dihedral_derivative_fd(a: float = 1.0, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of the deficits at ``a``."""
    space = boundary_simplex(3, a)
    K, z = space.K, space.z
    h = 1e-5 * a if h is None else h
    M = np.empty((10, 10))
    for j in range(10):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        M[:, j] = (deficits(K, zp) - deficits(K, zm)) / (2 * h)
    return M


# -- spectra ----------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    groups: list  # [(value, multiplicity)], ascending
    kernel_dim: int
    tangent_definiteness: str  # negative definite / positive definite / indefinite / degenerate
    coefficients: dict  # coefficient of each projection H1, H4, H5

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "groups": [[float(v), int(m)] for v, m in self.groups],
            "kernel_dim": self.kernel_dim,
            "tangent_definiteness": self.tangent_definiteness,
            "coefficients": {k: float(v) for k, v in self.coefficients.items()},
        }


def projection_coefficients(Q: np.ndarray, cm: CombinatorialMatrices | None = None) -> dict:
    """Coefficients of ``Q`` in the basis H1, H4, H5 (assumes Q lies in
    their span)."""
    cm = cm or build_combinatorial_matrices()
    return {name: float(np.trace(Q @ H) / np.trace(H))
            for name, H in (("H1", cm.H1), ("H4", cm.H4), ("H5", cm.H5))}


def spectrum(Q: np.ndarray, rel_tol: float = 1e-9,
             cm: CombinatorialMatrices | None = None) -> SpectrumResult:
    cm = cm or build_combinatorial_matrices()
    ev = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    scale = max(1.0, float(np.abs(ev).max()))
    groups: list = []
    for x in ev:
        if groups and abs(x - groups[-1][0]) <= rel_tol * scale:
            v, m = groups[-1]
            groups[-1] = (float((v * m + x) / (m + 1)), m + 1)
        else:
            groups.append((float(x), 1))
    zero = [x for x in ev if abs(x) <= rel_tol * scale]
    kernel = len(zero)
    # on the tangent space (orthogonal to all-ones) drop one zero mode
    coeffs = projection_coefficients(Q, cm)
    tangent = [coeffs["H4"], coeffs["H5"]]
    if any(abs(c) <= rel_tol * scale for c in tangent):
        kind = "degenerate"
    elif all(c < 0 for c in tangent):
        kind = "negative definite"
    elif all(c > 0 for c in tangent):
        kind = "positive definite"
    else:
        kind = "indefinite"
    return SpectrumResult(ev, groups, kernel, kind, coeffs)


def compare_spectrum(result: SpectrumResult, reference, tol: float) -> bool:
    """True when the grouped spectrum matches ``reference`` (list of
    ``(value, multiplicity)``) value by value within ``tol``."""
    ref = sorted(reference)
    got = sorted(result.groups)
    if [m for _, m in got] != [m for _, m in ref]:
        return False
    return all(abs(g - r) <= tol for (g, _), (r, _) in zip(got, ref))


# -- determinant of the tetrahedron Gram matrix -----------------------------
#
# det A as a cubic in the six squared lengths, ordered
# z01, z02, z03, z12, z13, z23. Each entry: (coefficient in quarters, monomial
# as a tuple of variable indices).
_DET_TERMS = [
    (-1, (0, 0, 5)), (-1, (1, 1, 4)), (-1, (2, 2, 3)),
    (-1, (3, 3, 2)), (-1, (4, 4, 1)), (-1, (5, 5, 0)),
    (-1, (0, 1, 3)), (-1, (0, 2, 4)), (1, (0, 1, 5)),
    (1, (0, 2, 3)), (1, (0, 1, 4)), (1, (0, 4, 5)),
    (1, (0, 2, 5)), (1, (0, 3, 5)), (1, (1, 2, 4)),
    (1, (1, 2, 3)), (1, (1, 3, 4)), (-1, (1, 2, 5)),
    (1, (1, 4, 5)), (1, (2, 3, 4)), (1, (2, 3, 5)),
    (-1, (3, 4, 5)),
]


def tetra_detA(z) -> object:
    """Gram determinant of a tetrahedron from its six squared lengths
    (order z01, z02, z03, z12, z13, z23). Exact for Fraction input."""
    total = 0
    for c, mono in _DET_TERMS:
        term = c
        for i in mono:
            term = term * z[i]
        total += term
    return total / 4 if not isinstance(total, int) else Fraction(total, 4)


def tetra_detA_partials(z):
    """Value, gradient (6) and Hessian (6x6) of the cubic det A at ``z``.

    Works in exact arithmetic when ``z`` holds Fractions or ints.
    """
    z = list(z)
    zero = z[0] * 0
    val = tetra_detA(z)
    grad = [zero] * 6
    hess = [[zero] * 6 for _ in range(6)]
    for c, mono in _DET_TERMS:
        for p in range(3):
            rest = [mono[q] for q in range(3) if q != p]
            term = Fraction(c, 4) * z[rest[0]] * z[rest[1]]
            grad[mono[p]] += term
            for r in range(2):
                other = rest[1 - r]
                hess[mono[p]][rest[r]] += Fraction(c, 4) * z[other]
    return val, grad, hess


TETRA_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
OPPOSITE_PAIRS = ((0, 5), (1, 4), (2, 3))


def tetra_detA_derivatives(a=1, x=None) -> dict:
    """det A, gradient and Hessian at the tetrahedron with five squared
    lengths ``a`` and ``z23 = x`` (default ``a``).

    Exact when ``a`` and ``x`` are ints or Fractions.
    """
    a = Fraction(a) if isinstance(a, int) else a
    x = a if x is None else (Fraction(x) if isinstance(x, int) else x)
    val, grad, hess = tetra_detA_partials([a, a, a, a, a, x])
    return {"detA": val, "grad": grad, "hessian": hess}


def printed_detA_hessian(a=1) -> list:
    """Second partials of det A at the equilateral point as listed with the
    cubic: -a/2 diagonal, -3a/4 for opposite edges, a/4 otherwise."""
    a = Fraction(a) if isinstance(a, int) else a
    H = [[a / 4] * 6 for _ in range(6)]
    for i in range(6):
        H[i][i] = -a / 2
    for i, j in OPPOSITE_PAIRS:
        H[i][j] = H[j][i] = -3 * a / 4
    return H


def _tetra_volume_hessian(a: float) -> np.ndarray:
    """Hessian of |tetrahedron| in its six squared lengths at ``z = a``."""
    val, grad, hess = tetra_detA_partials([Fraction(1)] * 6)
    D = float(val) * a**3
    g = np.array([float(x) for x in grad]) * a**2
    H = np.array([[float(x) for x in row] for row in hess]) * a
    # |sigma| = sqrt(D) / 6
    return (H / (2 * math.sqrt(D)) - np.outer(g, g) / (4 * D**1.5)) / 6.0


def volume_hessian(a: float = 1.0) -> np.ndarray:
    """Hessian of the total volume of the 4-simplex boundary at ``a``,
    assembled from the exact tetrahedron determinant derivatives."""
    K = boundary_simplex(3, a).K
    Ht = _tetra_volume_hessian(a)
    E = K.edge_array(3)
    H = np.zeros((10, 10))
    for row in E:
        H[np.ix_(row, row)] += Ht
    return H


def mv_matrices(cm: CombinatorialMatrices | None = None) -> dict:
    """Pattern matrices of the volume Hessian.

    ``H_V = -(sqrt2/48) MV3 / sqrt(a) - (2^1.5/384) MV4 / sqrt(a)``. The
    published MV3 is ``6I + 3N1 - 2N2``; the exact Hessian needs
    ``6I - 2N2`` (disjoint edges never share a tetrahedron, so their mixed
    volume derivative vanishes). Both are returned.
    """
    cm = cm or build_combinatorial_matrices()
    return {"MV3": 6 * cm.I - 2 * cm.N2,
            "MV3_printed": 6 * cm.I + 3 * cm.N1 - 2 * cm.N2,
            "MV4": 3 * cm.I + cm.N1 + 2 * cm.N2}


def volume_hessian_printed(a: float = 1.0) -> np.ndarray:
    """The closed form of the volume Hessian with the published MV3.
    Kept for comparison; its disjoint-edge entries disagree with
    :func:`volume_hessian`."""
    mv = mv_matrices()
    return (-(math.sqrt(2) / 48) * mv["MV3_printed"]
            - (2**1.5 / 384) * mv["MV4"]) / math.sqrt(a)


@dataclass(frozen=True)
class VariationMatrices:
    a: float
    gammas: tuple
    Mhat: np.ndarray
    MV3: np.ndarray
    MV3_printed: np.ndarray
    MV4: np.ndarray
    Q_sphere: np.ndarray
    Q_volume: np.ndarray
    Q_volume_printed: np.ndarray


def variation_matrices(a: float = 1.0) -> VariationMatrices:
    cm = build_combinatorial_matrices()
    mv = mv_matrices(cm)
    return VariationMatrices(
        a, gammas(a), mhat(cm), mv["MV3"], mv["MV3_printed"], mv["MV4"],
        second_variation_sphere(a)[0], second_variation_volume(a)[0],
        second_variation_volume(a, form="printed")[0])


def second_variation_sphere(a: float = 1.0, normalized: bool = False):
    """Quadratic form of d^2 R / dt^2 along sphere paths at ``a``.

    ``Q = gamma1 (I-P)(-Mhat)(I-P) - (3/4) delta a^(-3/2) (I - P)``
    ``= gamma1 (5 H4 - 10 H5) - (3/4) delta a^(-3/2) (H4 + H5)``. With
    ``normalized=True`` the form is divided by gamma1.
    """
    cm = build_combinatorial_matrices()
    g1, _, _, _ = gammas(a)
    IP = cm.H4 + cm.H5
    Q = g1 * (IP @ (-mhat(cm)) @ IP) - 0.75 * DELTA3 * a**-1.5 * IP
    if normalized:
        Q = Q / g1
    return Q, spectrum(Q, cm=cm)


def second_variation_volume(a: float = 1.0, normalized: bool = False,
                            form: str = "derived"):
    """Quadratic form of d^2 R / dt^2 along volume-preserving paths at ``a``.

    ``Q = (I-P)(-gamma1 Mhat - gamma2 I + gamma3 MV3 + gamma4 MV4)(I-P)``.
    ``form="derived"`` uses the exact MV3 and gives the normalized form
    ``(13 + 5c) H4 + (34 - 10c) H5`` with ``c = gamma1 / gamma4``;
    ``form="printed"`` uses the published MV3 and gives
    ``(-11 + 5c) H4 + (46 - 10c) H5``. Normalization divides by gamma4.
    """
    cm = build_combinatorial_matrices()
    mv = mv_matrices(cm)
    if form == "derived":
        MV3 = mv["MV3"]
    elif form == "printed":
        MV3 = mv["MV3_printed"]
    else:
        raise ValueError(f"unknown form {form!r}")
    g1, g2, g3, g4 = gammas(a)
    IP = cm.H4 + cm.H5
    inner = -g1 * mhat(cm) - g2 * np.eye(10) + g3 * MV3 + g4 * mv["MV4"]
    Q = IP @ inner @ IP
    if normalized:
        Q = Q / g4
    return Q, spectrum(Q, cm=cm)


# -- finite-difference oracle -----------------------------------------------

def sphere_path(a: float, u):
    base = np.full(10, float(a))
    r = np.linalg.norm(base)

    def path(t):
        w = base + t * np.asarray(u)
        return r * w / np.linalg.norm(w)
    return path


def volume_path(a: float, u):
    K = boundary_simplex(3, a).K
    base = np.full(10, float(a))
    V0 = total_volume(K, base)

    def path(t):
        w = base + t * np.asarray(u)
        return (V0 / total_volume(K, w)) ** (2.0 / 3.0) * w
    return path


def second_variation_fd(u, a: float = 1.0, constraint: str = "sphere",
                        h: float | None = None) -> float:
    """``d^2/dt^2 R(z(t))`` at ``t = 0`` by central differences with one
    Richardson extrapolation step."""
    K = boundary_simplex(3, a).K
    path = (sphere_path if constraint == "sphere" else volume_path)(a, u)
    h = 1e-4 * a if h is None else h
    f0 = total_scalar_curvature(K, path(0.0))

    def d2(hh):
        return (total_scalar_curvature(K, path(hh)) - 2 * f0
                + total_scalar_curvature(K, path(-hh))) / hh**2
    return (4 * d2(h / 2) - d2(h)) / 3
