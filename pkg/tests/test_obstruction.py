import math

import numpy as np
import pytest

from poisres.core.characteristic import characteristic_ode_family, characteristic_ode_trace
from poisres.core.chart import Chart
from poisres.core.errors import DimensionError, UnknownVariableError
from poisres.core.event_log import EventLog
from poisres.core.locus import classify_locus, locus_tangency, rank_on_locus, scan_singular_locus
from poisres.core.obstruction import obstruction_verdict
from poisres.core.parser import parse
from poisres.core.poisson import PoissonStructure, rank_at
from poisres.core.verdicts import LocusKind, ObstructionStatus

PLANE = Chart(("x", "y"), ((-2.0, 2.0), (-2.0, 2.0)))
R4 = Chart(("x1", "x2", "x3", "x4"), ((-1.0, 1.0),) * 4)


def _planar(bracket: str) -> PoissonStructure:
    return PoissonStructure.from_brackets(PLANE, {("x", "y"): bracket} if bracket != "0" else {})


# ----------------------------
# Locus scan
# ----------------------------

def test_isolated_zero_is_not_a_sheet():
    P = _planar("x^2 + y^2")
    scan = scan_singular_locus(P, 81)
    assert scan.zero_points.shape[0] == 1
    np.testing.assert_array_equal(scan.zero_points[0], [0.0, 0.0])
    assert classify_locus(scan, P).kind is LocusKind.ISOLATED_POINTS
    assert [r.rank for r in rank_on_locus(P, scan)] == [0]


def test_sign_changes_between_nodes_are_refined():
    P = _planar("x - 0.33")
    scan = scan_singular_locus(P, 81)
    assert scan.refined_points == 81
    np.testing.assert_allclose(scan.zero_points[:, 0], 0.33, atol=1e-9)
    assert classify_locus(scan, P).kind is LocusKind.CODIM_ONE_HYPERSURFACE


def test_double_sheet_counts_as_regular():
    P = _planar("x^2")
    scan = scan_singular_locus(P, 81)
    assert np.all(scan.gradient_norms == 0.0)
    assert np.all(scan.hessian_regular)
    assert classify_locus(scan, P).kind is LocusKind.CODIM_ONE_HYPERSURFACE


def test_vanishing_bracket_is_a_fat_region():
    P = _planar("0")
    scan = scan_singular_locus(P, 11)
    assert scan.fat
    assert classify_locus(scan, P).kind is LocusKind.FAT_REGION


def test_constant_bracket_has_empty_locus():
    scan = scan_singular_locus(_planar("1"), 21)
    assert scan.empty
    assert classify_locus(scan, _planar("1")).kind is LocusKind.EMPTY


def test_symplectic_leaves_are_tangent_to_a_poisson_sheet():
    P = _planar("x")
    assert locus_tangency(P, scan_singular_locus(P, 81)) == 0.0


def test_scan_needs_even_dimension():
    cube = Chart(("x", "y", "z"), ((-1.0, 1.0),) * 3)
    with pytest.raises(DimensionError):
        scan_singular_locus(PoissonStructure.from_brackets(cube, {("x", "y"): "z"}), 9)


# ----------------------------
# Zeros between grid nodes
# ----------------------------

OFFSET = Chart(("x", "y"), ((-2.0, 2.1), (-2.0, 2.0)))


def _offset(bracket: str) -> PoissonStructure:
    return PoissonStructure.from_brackets(OFFSET, {("x", "y"): bracket})


def test_isolated_zero_between_nodes_of_an_even_grid():
    P = _planar("x^2 + y^2")
    scan = scan_singular_locus(P, 80)
    assert scan.touch_points >= 1
    assert scan.zero_points.shape[0] >= 1
    np.testing.assert_allclose(scan.zero_points, 0.0, atol=1e-6)
    assert classify_locus(scan, P).kind is LocusKind.ISOLATED_POINTS


def test_double_sheet_off_the_grid_still_obstructs():
    P = _offset("x^2")
    scan = scan_singular_locus(P, 81)
    assert scan.touch_points == 81
    np.testing.assert_allclose(scan.zero_points[:, 0], 0.0, atol=1e-6)
    assert obstruction_verdict(P, grid=81).status is ObstructionStatus.NO_PROPER_RESOLUTION


@pytest.mark.parametrize("bracket", ["x", "x - 0.33", "x^2", "x^2 + y^2", "x*y", "1"])
def test_locus_kind_does_not_depend_on_the_grid(bracket):
    P = _offset(bracket)
    kinds = {grid: classify_locus(scan_singular_locus(P, grid), P).kind for grid in (41, 80, 81)}
    assert len(set(kinds.values())) == 1, kinds


@pytest.mark.parametrize("bracket", ["x", "x - 0.33", "x^2", "x^2 + y^2", "x*y"])
def test_every_zero_point_is_degenerate(bracket):
    P = _offset(bracket)
    scan = scan_singular_locus(P, 81)
    assert scan.zero_points.shape[0] > 0
    for row in scan.zero_points:
        assert rank_at(P, P.chart.point(row)).rank < P.dim, row


def test_isolated_zero_in_four_dimensions_off_the_grid():
    box = Chart(("x1", "x2", "x3", "x4"), ((-1.0, 1.1),) + ((-1.0, 1.0),) * 3)
    P = PoissonStructure.from_brackets(box, {("x1", "x2"): "x1^2 + x3^2", ("x3", "x4"): "1"})
    scan = scan_singular_locus(P, (10, 9, 10, 9))
    assert scan.touch_points >= 1


# ----------------------------
# Decision table
# ----------------------------

@pytest.mark.parametrize(
    "bracket, status",
    [
        ("0", ObstructionStatus.NOT_DENSE_SYMPLECTIC),
        ("x", ObstructionStatus.NO_PROPER_RESOLUTION),
        ("x*(1 + y^2)", ObstructionStatus.NO_PROPER_RESOLUTION),
        ("x^2 + y^2", ObstructionStatus.INCONCLUSIVE),
        ("(1 + x^2)*(x^2 + y^2)", ObstructionStatus.INCONCLUSIVE),
        ("1", ObstructionStatus.SYMPLECTIC_ON_BOX),
        ("2 + sin(x*y)", ObstructionStatus.SYMPLECTIC_ON_BOX),
    ],
)
def test_planar_decision_table(bracket, status):
    verdict = obstruction_verdict(_planar(bracket))
    assert verdict.status is status


def test_planar_sheet_cites_the_surface_result_and_keeps_the_caveat():
    verdict = obstruction_verdict(_planar("x"))
    assert verdict.citations == ["codim_one_surface", "codim_one"]
    assert any("PROPER" in n for n in verdict.notes)
    assert any("open" in n for n in verdict.notes)
    assert verdict.to_dict()["citations"][0]["statement"].startswith("{x,y} = x g(x,y)")


def test_bivector_vanishing_on_a_sheet_in_four_dimensions():
    P = PoissonStructure.from_brackets(R4, {("x1", "x2"): "x1", ("x3", "x4"): "x1"})
    verdict = obstruction_verdict(P)
    assert verdict.status is ObstructionStatus.NO_RESOLUTION_RANK_ZERO
    assert set(verdict.rank_histogram) == {0}
    assert verdict.citations[0] == "rank_zero"


def test_corank_two_sheet_in_four_dimensions():
    P = PoissonStructure.from_brackets(R4, {("x1", "x2"): "x1", ("x3", "x4"): "1"})
    verdict = obstruction_verdict(P)
    assert verdict.status is ObstructionStatus.NO_PROPER_RESOLUTION
    assert verdict.corank_two
    assert "corank_two" in verdict.citations
    assert set(verdict.rank_histogram) == {2}


def test_obstruction_events_are_logged():
    log = EventLog()
    obstruction_verdict(_planar("x"), log=log)
    assert log.count_by_type() == {"locus_scan": 1, "obstruction": 1}


def test_obstructed_statuses():
    assert ObstructionStatus.NO_PROPER_RESOLUTION.obstructed
    assert ObstructionStatus.NOT_DENSE_SYMPLECTIC.obstructed
    assert not ObstructionStatus.INCONCLUSIVE.obstructed
    assert not ObstructionStatus.SYMPLECTIC_ON_BOX.obstructed


# ----------------------------
# Characteristic ODE
# ----------------------------

def test_trajectory_on_the_singular_line_stays_there():
    trace = characteristic_ode_trace(parse("x"), v0=0.5, u0=0.0, p_span=(0.0, 5.0))
    assert np.all(trace.u == 0.0)
    assert not trace.blew_up and not trace.truncated


def test_linear_growth_matches_the_exponential():
    trace = characteristic_ode_trace(parse("x"), v0=0.0, u0=1e-3, p_span=(0.0, 5.0), step=1e-3)
    assert trace.final_u == pytest.approx(1e-3 * math.exp(5.0), rel=1e-9)
    assert trace.p[-1] == pytest.approx(5.0)


def test_quadratic_right_hand_side_blows_up_near_one():
    trace = characteristic_ode_trace(parse("x^2"), v0=0.0, u0=1.0, p_span=(0.0, 2.0))
    assert trace.blew_up
    assert 0.99 <= trace.blowup_p <= 1.01
    assert np.all(np.isfinite(trace.u))


def test_undefined_right_hand_side_truncates():
    trace = characteristic_ode_trace(parse("log(x)"), v0=0.0, u0=-1.0, p_span=(0.0, 1.0), step=0.1)
    assert trace.truncated and not trace.blew_up
    assert trace.truncated_p == pytest.approx(0.1)
    assert trace.u.tolist() == [-1.0]


def test_family_runs_every_pair_independently():
    f = parse("x*(1 + y^2)")
    traces = characteristic_ode_family(f, [0.0, 1.0], [0.0, 0.1], p_span=(0.0, 1.0), step=1e-2)
    assert [t.v0 for t in traces] == [0.0, 1.0]
    assert traces[0].final_u == 0.0
    assert traces[1].final_u == pytest.approx(0.1 * math.exp(2.0), rel=1e-6)


def test_ode_rejects_foreign_variables():
    with pytest.raises(UnknownVariableError):
        characteristic_ode_trace(parse("z"), 0.0, 0.0)
