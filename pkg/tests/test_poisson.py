import numpy as np
import pytest

from poisres.core.calculus import differentiate
from poisres.core.chart import Chart
from poisres.core.errors import DimensionError, OutsideBoxWarning, UnknownVariableError
from poisres.core.expr import Mul, Neg, Pow, Var
from poisres.core.identity import equivalent
from poisres.core.linalg import _parlett_reid, determinant_expr, even_rank, pfaffian, pfaffian_batch
from poisres.core.parser import parse
from poisres.core.poisson import (
    PoissonStructure,
    bracket,
    hamiltonian_vector_field,
    jacobiator,
    matrix_at,
    pfaffian_at,
    rank_at,
    verify_jacobi,
)
from poisres.core.poisson import pfaffian as structure_pfaffian

CUBE = Chart(("x", "y", "z"), ((-1.0, 1.0),) * 3)
R4 = Chart(("x1", "x2", "x3", "x4"), ((-1.0, 1.0),) * 4)


def _so3(zx: str = "y") -> PoissonStructure:
    return PoissonStructure.from_brackets(CUBE, {("x", "y"): "z", ("y", "z"): "x", ("z", "x"): zx})


def _antisymmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n))
    return a - a.T


# ----------------------------
# Structures and brackets
# ----------------------------

def test_reversed_pair_stores_negated_entry(plane):
    P = PoissonStructure.from_brackets(plane, {("y", "x"): "x"})
    assert P.upper[(0, 1)] == Neg(Var("x"))
    assert P.entry(1, 0) == Var("x")
    assert P.entry(0, 0).value == 0.0


def test_structure_rejects_foreign_variables(plane):
    with pytest.raises(UnknownVariableError):
        PoissonStructure.from_brackets(plane, {("x", "y"): "z"})
    with pytest.raises(DimensionError):
        PoissonStructure.from_brackets(plane, {("x", "x"): "1"})


def test_bracket_of_coordinates_is_the_entry(plane):
    P = PoissonStructure.from_brackets(plane, {("x", "y"): "x^2 + y^2"})
    assert bracket(P, Var("x"), Var("y")) == P.upper[(0, 1)]
    assert equivalent(bracket(P, Var("y"), Var("x")), Neg(P.upper[(0, 1)]), plane.box_dict()).ok


def test_bracket_antisymmetry_and_leibniz(make_expr, make_structure):
    rng = np.random.default_rng(31)
    names = CUBE.coords
    box = CUBE.box_dict()
    for _ in range(100):
        P = make_structure(rng, CUBE, 1)
        f, g, h = (make_expr(rng, names, 2) for _ in range(3))
        assert equivalent(bracket(P, f, g), Neg(bracket(P, g, f)), box, n=16).ok

        lhs = bracket(P, f, Mul(g, h))
        rhs = Mul(bracket(P, f, g), h) + Mul(g, bracket(P, f, h))
        assert equivalent(lhs, rhs, box, n=16).ok, f"Leibniz fails for {f}, {g}, {h}"


# ----------------------------
# Jacobi
# ----------------------------

def test_so3_satisfies_jacobi():
    P = _so3()
    assert jacobiator(P, 0, 1, 2).value == 0.0
    verdict = verify_jacobi(P)
    assert verdict.passed
    assert verdict.triple is None


def test_perturbed_so3_fails_jacobi_with_witness():
    P = _so3(zx="x")
    assert equivalent(jacobiator(P, 0, 1, 2), parse("-z"), CUBE.box_dict()).ok

    verdict = verify_jacobi(P, seed=42)
    assert not verdict.passed
    assert verdict.triple == ("x", "y", "z")
    assert verdict.witness is not None and verdict.witness["z"] != 0.0
    assert 0.0 < verdict.worst_gap <= 1.0


def test_every_planar_structure_is_poisson(make_structure, plane):
    rng = np.random.default_rng(1)
    for _ in range(20):
        verdict = verify_jacobi(make_structure(rng, plane, 3))
        assert verdict.passed and verdict.samples == 0


def test_jacobiator_index_order():
    with pytest.raises(DimensionError):
        jacobiator(_so3(), 2, 1, 0)


# ----------------------------
# Pfaffians and ranks
# ----------------------------

def test_planar_pfaffian_is_the_bracket(plane):
    P = PoissonStructure.from_brackets(plane, {("x", "y"): "x^2 + y^2"})
    assert structure_pfaffian(P) == P.upper[(0, 1)]
    assert pfaffian_at(P, {"x": 1.0, "y": 1.0}) == 2.0


def test_pfaffian_needs_even_dimension():
    with pytest.raises(DimensionError):
        structure_pfaffian(_so3())
    with pytest.raises(DimensionError):
        pfaffian_at(_so3(), {"x": 0.0, "y": 0.0, "z": 0.0})
    with pytest.raises(DimensionError):
        pfaffian_batch(np.zeros((3, 3)))


def test_four_dimensional_pfaffian_formula():
    P = PoissonStructure.from_brackets(
        R4,
        {
            ("x1", "x2"): "x1",
            ("x1", "x3"): "x2",
            ("x1", "x4"): "x3",
            ("x2", "x3"): "x4",
            ("x2", "x4"): "x1*x2",
            ("x3", "x4"): "x3 + x4",
        },
    )
    p = P.upper
    expected = p[(0, 1)] * p[(2, 3)] - p[(0, 2)] * p[(1, 3)] + p[(0, 3)] * p[(1, 2)]
    assert equivalent(structure_pfaffian(P), expected, R4.box_dict()).ok


def test_determinant_is_pfaffian_squared_symbolically(make_structure):
    rng = np.random.default_rng(4)
    for _ in range(100):
        P = make_structure(rng, R4, 1)
        det = determinant_expr(P.matrix_exprs())
        assert equivalent(det, Pow(structure_pfaffian(P), 2), R4.box_dict(), n=32).ok


def test_determinant_is_pfaffian_squared_numerically():
    rng = np.random.default_rng(12)
    for n in (2, 4, 6, 8, 10):
        stack = np.stack([_antisymmetric(rng, n) for _ in range(20)])
        pf = pfaffian_batch(stack)
        np.testing.assert_allclose(pf**2, np.linalg.det(stack), rtol=1e-8, atol=1e-10)


def test_parlett_reid_matches_expansion():
    rng = np.random.default_rng(13)
    for n in (2, 4, 6):
        for _ in range(25):
            a = _antisymmetric(rng, n)
            assert _parlett_reid(a) == pytest.approx(float(pfaffian_batch(a[None])[0]), rel=1e-10, abs=1e-12)


def test_standard_symplectic_pfaffian_is_one():
    for n in (2, 4, 8):
        j = np.zeros((n, n))
        for k in range(0, n, 2):
            j[k, k + 1] = 1.0
            j[k + 1, k] = -1.0
        assert pfaffian(j) == pytest.approx(1.0)


def test_even_rank_rounds_down_and_uses_hybrid_cutoff():
    assert even_rank(np.array([3.0, 3.0, 1e-12, 0.0]), 1e-8) == 2
    assert even_rank(np.array([1.0, 1e-3, 0.0]), 1e-2) == 0
    assert even_rank(np.zeros(4), 1e-8) == 0
    assert even_rank(np.array([1e-9, 1e-9]), 1e-8) == 0
    assert even_rank(np.array([1e4, 1e4, 1e-5, 1e-5]), 1e-8) == 2


def test_rank_drops_on_the_singular_locus(plane):
    P = PoissonStructure.from_brackets(plane, {("x", "y"): "x"})
    assert rank_at(P, {"x": 0.0, "y": 0.5}).rank == 0
    assert rank_at(P, {"x": 1.0, "y": 0.5}).rank == 2

    Q = PoissonStructure.from_brackets(R4, {("x1", "x2"): "x1", ("x3", "x4"): "1"})
    point = {"x1": 0.0, "x2": 0.1, "x3": 0.2, "x4": 0.3}
    assert rank_at(Q, point).rank == 2
    point["x1"] = 0.5
    assert rank_at(Q, point).rank == 4


def test_evaluation_outside_the_box_warns(plane):
    P = PoissonStructure.from_brackets(plane, {("x", "y"): "1"})
    with pytest.warns(OutsideBoxWarning):
        matrix_at(P, {"x": 5.0, "y": 0.0})


# ----------------------------
# Hamiltonian vector fields
# ----------------------------

def test_hamiltonian_vector_fields_of_coordinates(plane):
    P = PoissonStructure.from_brackets(plane, {("x", "y"): "x"})
    assert hamiltonian_vector_field(P, Var("y")) == (Var("x"), parse("0"))
    assert hamiltonian_vector_field(P, Var("x")) == (parse("0"), Neg(Var("x")))


def test_hamiltonian_vector_field_applies_the_bracket(make_expr, make_structure):
    rng = np.random.default_rng(17)
    box = CUBE.box_dict()
    for _ in range(30):
        P = make_structure(rng, CUBE, 1)
        f = make_expr(rng, CUBE.coords, 2)
        g = make_expr(rng, CUBE.coords, 2)
        field = hamiltonian_vector_field(P, f)
        # X_f(g) = sum_i X_f^i d_i g = {g, f}
        applied = sum(
            (Mul(field[i], differentiate(g, name)) for i, name in enumerate(CUBE.coords)),
            parse("0"),
        )
        assert equivalent(applied, bracket(P, g, f), box, n=16).ok
