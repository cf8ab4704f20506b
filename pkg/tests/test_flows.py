import csv
import json
import math

import numpy as np
import pytest

from regge.curvature import DenominatorZero, curvature_report
from regge.flows import (CONSERVED, MONITORS, FlowError, FlowKind, InvalidInitialMetric,
                         StepControl, a_priori_R_bound, exact_einstein_flow, integrate, rescale_to_normalized,
                         rhs, scaling_covariance_check)
from regge.generators import boundary_simplex, perturb

DELTA3 = 1 - 3 * math.acos(1 / 3) / (2 * math.pi)
KAPPA = DELTA3 / 2
NORMALIZED = [k for k in FlowKind if k is not FlowKind.UNNORMALIZED]


@pytest.fixture(scope="module")
def perturbed(s4):
    return perturb(s4, 0.01 * np.linalg.norm(s4.z), "sphere", seed=1)


def test_parse_kinds():
    assert FlowKind.parse("typeI_1") is FlowKind.TYPE_I_1
    assert FlowKind.parse("TYPE_II_3") is FlowKind.TYPE_II_3
    assert FlowKind.TYPE_II_2.family == "II" and FlowKind.TYPE_I_2.family == "I"
    with pytest.raises(ValueError):
        FlowKind.parse("TypeIII")


@pytest.mark.parametrize("kind", NORMALIZED)
def test_einstein_metric_is_fixed_point(s4, kind):
    assert np.abs(rhs(kind, s4.K, s4.z)).max() <= 1e-10
    assert np.abs(rhs(kind, s4.K, 3.0 * s4.z)).max() <= 1e-10 * 3.0


def test_unnormalized_rhs(s4):
    assert np.allclose(rhs("Unnormalized", s4.K, s4.z), -2 * KAPPA, rtol=1e-13)


def test_flat_torus_fixed_point(t3):
    for kind in ("Unnormalized", "TypeI_1", "TypeI_2", "TypeII_1", "TypeII_2"):
        assert np.abs(rhs(kind, t3.K, t3.z)).max() <= 1e-12
    with pytest.raises(DenominatorZero):
        rhs("TypeI_3", t3.K, t3.z)
    with pytest.raises(DenominatorZero):
        rhs("TypeII_3", t3.K, t3.z)


def test_fixed_point_trajectory_is_constant(s4):
    traj = integrate("TypeI_1", s4.K, s4.z, 1.0)
    assert np.abs(traj.z - s4.z).max() <= 1e-12
    assert traj.termination in ("Converged", "MaxTime")


def test_exact_solution_closed_forms():
    sol = exact_einstein_flow(3, KAPPA)
    assert sol.t_max == pytest.approx(1 / (3 * KAPPA))
    assert sol.t_max == pytest.approx(1.6171018, abs=1e-6)
    assert sol.f(0.0) == 1.0
    assert sol.f(0.5) == pytest.approx((1 - 3 * KAPPA * 0.5) ** (2 / 3))
    six = exact_einstein_flow(6, 1.0)
    assert six.t_max == math.inf
    assert six.f(0.7) == pytest.approx(math.exp(-1.4))
    assert exact_einstein_flow(4, 0.0).f(3.0) == 1.0
    with pytest.raises(ValueError):
        exact_einstein_flow(2, 1.0)


def test_unnormalized_matches_exact_solution(s4):
    sol = exact_einstein_flow(3, KAPPA)
    traj = integrate("Unnormalized", s4.K, s4.z, 0.9 * sol.t_max)
    pred = np.outer(sol.f(traj.t), s4.z)
    assert np.max(np.abs(traj.z - pred) / pred) <= 1e-6
    assert traj.t[-1] == pytest.approx(0.9 * sol.t_max)


def test_unnormalized_collapse_hits_boundary(s4):
    traj = integrate("Unnormalized", s4.K, s4.z, 2.0)
    assert traj.termination == "BoundaryHit"
    assert traj.t[-1] == pytest.approx(1 / (3 * KAPPA), rel=1e-3)


def test_invalid_initial_metric(s4):
    with pytest.raises(InvalidInitialMetric):
        integrate("TypeI_1", s4.K, np.r_[5.0, np.ones(9)], 1.0)


def test_type_i3_on_flat_torus_reports_denominator(t3):
    traj = integrate("TypeI_3", t3.K, t3.z, 0.1)
    assert traj.termination == "DenominatorZero"


@pytest.mark.parametrize("kind", NORMALIZED)
def test_conservation(s4, perturbed, kind):
    kind = FlowKind.parse(kind)
    traj = integrate(kind, s4.K, perturbed.z, 0.5)
    for name in CONSERVED[kind]:
        m = traj.monitor(name)
        assert np.abs(m - m[0]).max() <= 1e-8 * abs(m[0]) * max(traj.t[-1], 1.0)


def test_type_i1_decreases_R_and_leaves_the_maximum(s4, perturbed):
    traj = integrate("TypeI_1", s4.K, perturbed.z, 0.5)
    R = traj.monitor("R")
    assert np.all(np.diff(R) < 0)
    dist = np.linalg.norm(traj.z - s4.z, axis=1)
    assert dist[-1] > dist[0]


def test_R_integral_identity(s4, perturbed):
    traj = integrate("TypeI_1", s4.K, perturbed.z, 0.5, step=StepControl(h0=1e-3, adaptive=False))
    R, d1 = traj.monitor("R"), traj.monitor("delta_I1")
    t = traj.t
    integral = np.sum(0.5 * np.diff(t) * (d1[1:] + d1[:-1]))
    assert R[-1] - R[0] == pytest.approx(-2 * integral, rel=1e-4)


def test_a_priori_bound(s4, perturbed):
    traj = integrate("TypeI_1", s4.K, perturbed.z, 0.5)
    R = traj.monitor("R")
    # the smallest sampled deviation stands in for the infimum along the run
    low = float(traj.monitor("delta_I1").min())
    assert np.all(R <= a_priori_R_bound(R[0], traj.t, low) + 1e-14)
    assert np.array_equal(a_priori_R_bound(R[0], traj.t, 0.0), np.full(len(R), R[0]))
    with pytest.raises(ValueError):
        a_priori_R_bound(1.0, 0.0, -1.0)


def test_type_ii_monotonicity(s4, perturbed):
    n = 3
    t1 = integrate("TypeII_1", s4.K, perturbed.z, 0.5)
    Rhat = t1.monitor("R") / t1.monitor("V") ** ((n - 2) / n)
    assert np.all(np.diff(Rhat) <= 1e-14 * abs(Rhat[0]))
    t2 = integrate("TypeII_2", s4.K, perturbed.z, 0.5)
    assert np.all(np.diff(t2.monitor("R")) <= 1e-14)


def test_type_i3_norm_increases(s4, perturbed):
    traj = integrate("TypeI_3", s4.K, perturbed.z, 0.3)
    assert np.all(np.diff(traj.monitor("norm_z_sq")) > 0)


def test_subdivision_initial_direction(s4_sub):
    space, smap = s4_sub
    K = space.K
    f = rhs("TypeI_1", K, space.z)
    r = curvature_report(K, space.z)
    theta = {K.edge_index(*e) for e in smap.theta(K, 1)}
    other = [e for e in range(K.n_edges) if e not in theta]
    assert all(r.ric_hat_I[e] < 0 and f[e] > 0 for e in theta)
    assert all(r.ric_hat_I[e] > 0 and f[e] < 0 for e in other)
    vals = r.ric_hat_I[other]
    assert vals.max() - vals.min() <= 1e-12 * abs(vals.max())


def test_rescaling_of_fixed_point(s4):
    plain = integrate("Unnormalized", s4.K, s4.z, 0.5, step=StepControl(h0=1e-3, adaptive=False))
    res = rescale_to_normalized(plain, s4.K)
    assert res.t[0] == 0.0
    assert np.abs(res.z - s4.z).max() <= 1e-9


def test_rescaling_residual(s4, perturbed):
    plain = integrate("Unnormalized", s4.K, perturbed.z, 0.5, step=StepControl(h0=1e-3, adaptive=False))
    res = rescale_to_normalized(plain, s4.K)
    assert res.t[0] == 0.0 and np.allclose(res.z[0], perturbed.z)
    t, z = res.t, res.z
    worst = 0.0
    for i in range(5, len(t) - 5, 37):
        dz = (z[i + 1] - z[i - 1]) / (t[i + 1] - t[i - 1])
        ric = curvature_report(s4.K, z[i]).ric_hat_I
        worst = max(worst, np.linalg.norm(dz + 2 * ric) / np.linalg.norm(ric))
    assert worst <= 1e-4


def test_rescaling_needs_plain_flow(s4):
    traj = integrate("TypeI_1", s4.K, s4.z, 0.01)
    with pytest.raises(FlowError):
        rescale_to_normalized(traj, s4.K)


@pytest.mark.parametrize("kind,lam", [("TypeI_1", 2.0), ("TypeII_1", 0.5), ("TypeI_1", 1.0)])
def test_scaling_covariance(s4, perturbed, kind, lam):
    ok, worst = scaling_covariance_check(kind, s4.K, perturbed.z, lam)
    assert ok, worst


def test_csv_output(tmp_path, s4, perturbed):
    traj = integrate("TypeI_1", s4.K, perturbed.z, 0.05)
    path = tmp_path / "run.csv"
    traj.write_csv(path, max_rows=5)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", *MONITORS] + [f"z_{i}" for i in range(10)]
    assert len(rows) - 1 <= 5
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == traj.t[-1]
    side = json.loads((tmp_path / "run.csv.json").read_text())
    assert side["kind"] == "TypeI_1" and side["termination"] == traj.termination


def test_subdivided_flow_runs(s4_sub):
    space, _ = s4_sub
    traj = integrate("TypeI_1", space.K, space.z, 0.02)
    m = traj.monitor("norm_z_sq")
    assert np.abs(m - m[0]).max() <= 1e-8 * m[0]
    assert np.all(np.diff(traj.monitor("R")) <= 0)


def test_higher_dimension_fixed_point():
    sp = boundary_simplex(4, 2.0)
    traj = integrate("TypeII_2", sp.K, sp.z, 0.1)
    assert np.abs(traj.z - sp.z).max() <= 1e-10
