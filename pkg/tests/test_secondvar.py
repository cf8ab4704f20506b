import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import fd_gradient, random_valid_metric
from regge.complex import build_complex
from regge.generators import boundary_simplex
from regge.metric import gram, total_volume
from regge.secondvar import (DELTA3, OPPOSITE_PAIRS, REFERENCE_SPECTRA, REFERENCE_TOL,
                             all_edge_permutations, build_combinatorial_matrices,
                             compare_spectrum, dihedral_derivative_fd,
                             dihedral_derivative_matrix, dihedral_derivative_pattern, gammas,
                             mhat, mv_matrices, printed_detA_hessian, second_variation_fd,
                             second_variation_sphere, second_variation_volume, spectrum,
                             tetra_detA, tetra_detA_derivatives, variation_matrices,
                             volume_hessian, volume_hessian_printed)

# disjoint-edge adjacency as printed, edge order 01 02 03 04 12 13 14 23 24 34
PRINTED_N1 = [
    [0, 0, 0, 0, 0, 0, 0, 1, 1, 1],
    [0, 0, 0, 0, 0, 1, 1, 0, 0, 1],
    [0, 0, 0, 0, 1, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 1, 1, 0, 1, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 0, 0, 1],
    [0, 1, 0, 1, 0, 0, 0, 0, 1, 0],
    [0, 1, 1, 0, 0, 0, 0, 1, 0, 0],
    [1, 0, 0, 1, 0, 0, 1, 0, 0, 0],
    [1, 0, 1, 0, 0, 1, 0, 0, 0, 0],
    [1, 1, 0, 0, 1, 0, 0, 0, 0, 0],
]
TET = build_complex([[0, 1, 2, 3]])


@pytest.fixture(scope="module")
def cm():
    return build_combinatorial_matrices()


def tangent_vectors(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        u = rng.standard_normal(10)
        u -= u.mean()
        out.append(u / np.linalg.norm(u))
    return out


def test_adjacency_matches_printed(cm):
    assert np.array_equal(cm.N1, PRINTED_N1)
    J = np.ones((10, 10), dtype=int)
    assert np.array_equal(cm.N2, J - cm.I - cm.N1)
    assert set(cm.N1.sum(1)) == {3} and set(cm.N2.sum(1)) == {6}
    assert list(np.flatnonzero(cm.N1[0])) == [cm.edges.index(e) for e in [(2, 3), (2, 4), (3, 4)]]


def test_projection_identities_exact(cm):
    N1, N2, I = cm.N1, cm.N2, cm.I
    assert np.array_equal(N1 @ N2, 2 * (N1 + N2))
    assert np.array_equal(N2 @ N1, 2 * (N1 + N2))
    # integer multiples: 10 H1, 15 H4, 6 H5
    h1, h4, h5 = I + N1 + N2, 6 * I - 4 * N1 + N2, 3 * I + N1 - N2
    assert np.array_equal(h1 @ h1, 10 * h1)
    assert np.array_equal(h4 @ h4, 15 * h4)
    assert np.array_equal(h5 @ h5, 6 * h5)
    for x, y in [(h1, h4), (h1, h5), (h4, h5)]:
        assert not (x @ y).any()
    assert np.array_equal(6 * h1 + 4 * h4 + 10 * h5, 60 * I)
    assert [np.linalg.matrix_rank(h) for h in (h1, h4, h5)] == [1, 4, 5]
    assert np.allclose(np.eye(10) - cm.P, cm.H4 + cm.H5)


def test_pattern_matrices_in_projection_basis(cm):
    mv = mv_matrices(cm)
    H1, H4, H5 = cm.H1, cm.H4, cm.H5
    assert np.allclose(mhat(cm), -5 * H4 + 10 * H5)
    assert np.allclose(mv["MV3_printed"], 3 * H1 - 2 * H4 + 13 * H5)
    assert np.allclose(mv["MV4"], 18 * H1 + 3 * H4)
    assert np.allclose(mv["MV3"], -6 * H1 + 4 * H4 + 10 * H5)


def test_intertwiners(cm):
    vm = variation_matrices(1.3)
    mats = [vm.Mhat, vm.MV3, vm.MV4, vm.Q_sphere, vm.Q_volume, vm.Q_volume_printed]
    perms = all_edge_permutations()
    assert len(perms) == 120
    for O in perms:
        for Q in mats:
            assert np.allclose(O.T @ Q @ O, Q, atol=1e-13)
    for Q in mats[3:]:
        assert np.allclose(Q, Q.T) and np.allclose(Q @ np.ones(10), 0, atol=1e-12)


def test_dihedral_derivative_matrix():
    M = dihedral_derivative_matrix(1.0)
    assert np.allclose(M, M.T)
    alpha = 1 / (2 * math.pi * 3 * math.sqrt(2))
    assert alpha == pytest.approx(0.0375132, abs=1e-7)
    unit = 1 / (2 * math.pi * math.sqrt(2))
    pattern = dihedral_derivative_pattern()
    cm = build_combinatorial_matrices()
    for i in range(10):
        for j in range(10):
            expected = Fraction(-1) if i == j or cm.N1[i, j] else Fraction(2, 3)
            assert pattern[i][j] == expected
            assert M[i, j] == pytest.approx(float(expected) * unit, rel=1e-14)


@pytest.mark.parametrize("a", [1.0, 0.5, 4.0])
def test_dihedral_derivative_matches_finite_differences(a):
    assert np.abs(dihedral_derivative_fd(a) - dihedral_derivative_matrix(a)).max() <= 1e-6 / a


def test_sphere_spectrum():
    _, res = second_variation_sphere(1.0, normalized=True)
    assert compare_spectrum(res, REFERENCE_SPECTRA["sphere"], REFERENCE_TOL["sphere"])
    kappa = 9 * math.sqrt(2) * math.pi * DELTA3
    assert kappa == pytest.approx(16.4846, abs=1e-4)
    assert res.coefficients["H4"] == pytest.approx(5 - kappa, rel=1e-12)
    assert res.coefficients["H5"] == pytest.approx(-10 - kappa, rel=1e-12)
    assert res.kernel_dim == 1 and res.tangent_definiteness == "negative definite"


def test_volume_forms():
    g1, _, _, g4 = gammas(1.0)
    c = g1 / g4
    assert c == pytest.approx(1.0919, abs=1e-4)
    _, derived = second_variation_volume(1.0, normalized=True)
    assert derived.coefficients["H4"] == pytest.approx(13 + 5 * c, rel=1e-12)
    assert derived.coefficients["H5"] == pytest.approx(34 - 10 * c, rel=1e-12)
    assert derived.tangent_definiteness == "positive definite"
    _, printed = second_variation_volume(1.0, normalized=True, form="printed")
    assert printed.coefficients["H4"] == pytest.approx(-11 + 5 * c, rel=1e-12)
    assert printed.coefficients["H5"] == pytest.approx(46 - 10 * c, rel=1e-12)
    assert compare_spectrum(printed, REFERENCE_SPECTRA["volume"], REFERENCE_TOL["volume"])
    with pytest.raises(ValueError):
        second_variation_volume(1.0, form="other")


@pytest.mark.parametrize("a", [1.0, 4.0])
def test_sphere_form_matches_finite_differences(a):
    Q, _ = second_variation_sphere(a)
    for u in tangent_vectors(11, 10):
        assert second_variation_fd(u, a, "sphere") == pytest.approx(u @ Q @ u, rel=1e-4)


@pytest.mark.parametrize("a", [1.0, 4.0])
def test_derived_volume_form_matches_finite_differences(a):
    Q, _ = second_variation_volume(a)
    for u in tangent_vectors(12, 10):
        assert second_variation_fd(u, a, "volume") == pytest.approx(u @ Q @ u, rel=1e-4, abs=1e-8)


def test_scaling_with_a():
    Q1, _ = second_variation_sphere(1.0)
    Q4, _ = second_variation_sphere(4.0)
    assert np.allclose(Q4, Q1 / 8)
    V1, _ = second_variation_volume(1.0)
    V4, _ = second_variation_volume(4.0)
    assert np.allclose(V4, V1 / 8)


def test_spectrum_grouping():
    res = spectrum(np.diag([1.0, 1.0, 2.0, 0.0, 0, 0, 0, 0, 0, 0]))
    assert res.groups == [(0.0, 7), (1.0, 2), (2.0, 1)]
    assert res.kernel_dim == 7
    assert not compare_spectrum(res, [(0.0, 6), (1.0, 3), (2.0, 1)], 1e-3)


def test_detA_at_equilateral_point_exact():
    d = tetra_detA_derivatives(1)
    assert d["detA"] == Fraction(1, 2)
    assert all(g == Fraction(1, 4) for g in d["grad"])
    H = d["hessian"]
    for i in range(6):
        assert H[i][i] == Fraction(-1, 2)
        for j in range(6):
            if i != j and (min(i, j), max(i, j)) not in OPPOSITE_PAIRS:
                assert H[i][j] == Fraction(1, 4)
    # mixed partials of opposite edges cancel at the equilateral point
    for i, j in OPPOSITE_PAIRS:
        assert H[i][j] == 0
    d3 = tetra_detA_derivatives(3)
    assert d3["detA"] == Fraction(27, 2)


def test_printed_hessian_differs_only_on_opposite_pairs():
    P = printed_detA_hessian(1)
    H = tetra_detA_derivatives(1)["hessian"]
    diff = {(i, j) for i in range(6) for j in range(i + 1, 6) if P[i][j] != H[i][j]}
    assert diff == set(OPPOSITE_PAIRS)
    assert all(P[i][j] == Fraction(-3, 4) for i, j in OPPOSITE_PAIRS)


def test_detA_hessian_matches_finite_differences():
    z = np.ones(6)
    H = tetra_detA_derivatives(1)["hessian"]
    h = 1e-3
    for i, j in combinations(range(6), 2):
        def f(si, sj):
            w = z.copy()
            w[i] += si * h
            w[j] += sj * h
            return tetra_detA(w)
        fd = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h * h)
        assert fd == pytest.approx(float(H[i][j]), abs=1e-9)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_detA_polynomial_matches_gram(seed):
    rng = np.random.default_rng(seed)
    z = random_valid_metric(TET, np.ones(6), rng, 0.5)
    poly = float(tetra_detA(z))
    assert poly == pytest.approx(np.linalg.det(gram(TET, z, (0, 1, 2, 3))), rel=1e-12)


def test_volume_hessian_matches_finite_differences():
    K = boundary_simplex(3).K
    z = np.ones(10)
    h = 1e-4
    H = np.array([fd_gradient(lambda w: total_volume(K, w), z + h * np.eye(10)[i], 1e-4)
                  - fd_gradient(lambda w: total_volume(K, w), z - h * np.eye(10)[i], 1e-4)
                  for i in range(10)]) / (2 * h)
    assert np.abs(H - volume_hessian(1.0)).max() <= 1e-6
    printed = volume_hessian_printed(1.0)
    assert np.abs(H - printed).max() > 1e-2
    cm = build_combinatorial_matrices()
    off = np.abs(H - printed) > 1e-6
    assert np.array_equal(off, cm.N1.astype(bool))
