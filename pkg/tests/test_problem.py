import copy
import json

import pytest

from poisres.core.errors import ProblemError
from poisres.core.settings import Settings
from poisres.runner.catalog import EXAMPLES, INPUT_ERROR, example_document, example_names
from poisres.runner.problem import check_problem_jacobi, load_problem, problem_from_dict


def _squares() -> dict:
    return example_document("squares")


def _error(doc) -> ProblemError:
    with pytest.raises(ProblemError) as info:
        problem_from_dict(doc)
    return info.value


# ----------------------------
# Schema and construction
# ----------------------------

def test_squares_document_loads():
    problem = problem_from_dict(_squares())
    assert problem.name == "squares"
    assert problem.has_candidate
    assert problem.target.chart.coords == ("x", "y")
    assert [p.name for p in problem.pieces] == ["plane"]
    assert problem.digest == problem_from_dict(_squares()).digest


def test_missing_target_is_a_schema_error():
    err = _error({"name": "empty"})
    assert "target" in err.message
    assert err.path == "<document>"


def test_unknown_top_level_key_is_rejected():
    doc = _squares()
    doc["extra"] = 1
    assert _error(doc).path == "<document>"


def test_box_interval_shape_is_checked():
    doc = _squares()
    doc["target"]["box"] = [[-2.0], [-2.0, 2.0]]
    assert _error(doc).path == "target.box[0]"


def test_empty_interval_is_rejected():
    doc = _squares()
    doc["target"]["box"] = [[2.0, -2.0], [-2.0, 2.0]]
    assert _error(doc).path == "target.box"


def test_bad_expression_names_the_bracket():
    doc = _squares()
    doc["target"]["brackets"] = {"x,y": "x^2 +"}
    err = _error(doc)
    assert err.path == "target.brackets.x,y"
    assert "offset 5" in err.message


def test_foreign_variable_in_a_bracket():
    doc = _squares()
    doc["target"]["brackets"] = {"x,y": "z"}
    assert _error(doc).path == "target.brackets"


def test_numbers_are_accepted_as_expressions():
    doc = _squares()
    doc["pieces"][0]["brackets"] = {"p,q": 1}
    problem = problem_from_dict(doc)
    assert problem.pieces[0].structure.upper[(0, 1)].value == 1.0


def test_map_must_give_every_component():
    doc = _squares()
    del doc["pieces"][0]["map"]["y"]
    assert _error(doc).path == "pieces[0].map"


def test_pinned_points_must_give_every_coordinate():
    doc = _squares()
    doc["pieces"][0]["probes"] = [{"p": 0.5}]
    assert _error(doc).path == "pieces[0].probes[0]"


def test_piece_names_are_distinct():
    doc = _squares()
    doc["pieces"].append(copy.deepcopy(doc["pieces"][0]))
    assert _error(doc).path == "pieces"


def test_structure_only_file_has_no_candidate():
    problem = problem_from_dict(example_document("linear"))
    assert not problem.has_candidate
    with pytest.raises(ProblemError) as info:
        problem.candidate()
    assert info.value.path == "pieces"


def test_odd_dimensional_candidate_is_an_input_error():
    doc = example_document("so3")
    doc["pieces"] = [
        {
            "name": "id",
            "coords": ["a", "b", "c"],
            "box": [[-1, 1]] * 3,
            "brackets": {"a,b": "c"},
            "map": {"x": "a", "y": "b", "z": "c"},
        }
    ]
    with pytest.raises(ProblemError) as info:
        problem_from_dict(doc).candidate()
    assert info.value.path == "pieces"


# ----------------------------
# Options
# ----------------------------

def test_options_then_overrides():
    doc = _squares()
    doc["options"] = {"seed": 7, "grid": [11, 11], "samples": 500}
    s = problem_from_dict(doc).settings({"seed": 9, "grid": None})
    assert s.seed == 9
    assert s.coverage_grid == (11, 11)
    assert s.morphism_samples == 500
    assert s.tol == Settings().tol


@pytest.mark.parametrize(
    "options, path",
    [
        ({"colour": 1}, "options.colour"),
        ({"seed": 1.5}, "options.seed"),
        ({"seed": -1}, "options.seed"),
        ({"tol": float("inf")}, "options.tol"),
        ({"grid": [1, 5]}, "options.grid"),
        ({"check_jacobi": "yes"}, "options.check_jacobi"),
        ({"tol": -1.0}, "options.tol"),
        ({"samples": 0}, "options.samples"),
    ],
)
def test_malformed_options(options, path):
    doc = _squares()
    doc["options"] = options
    assert _error(doc).path == path


def test_locus_grid_depends_on_dimension():
    s = Settings()
    assert s.locus_grid_for(2) == 81
    assert s.locus_grid_for(4) == 21
    assert s.locus_grid_for(6) == 9
    assert Settings(locus_grid=15).locus_grid_for(4) == 15


def test_critical_grid_depends_on_dimension():
    s = Settings()
    assert [s.critical_grid_for(d) for d in (2, 4, 6)] == [41, 21, 9]
    assert s.merged({"critical_grid": [11, 7]}).critical_grid_for(2) == (11, 7)


# ----------------------------
# Files and Jacobi gate
# ----------------------------

def test_load_problem_from_file(tmp_path):
    path = tmp_path / "squares.json"
    path.write_text(json.dumps(_squares()), encoding="utf-8")
    assert load_problem(str(path)).name == "squares"


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ProblemError):
        load_problem(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProblemError) as info:
        load_problem(str(bad))
    assert "line 1" in info.value.message


def test_jacobi_failure_stops_before_any_other_work():
    problem = problem_from_dict(example_document("broken"))
    with pytest.raises(ProblemError) as info:
        check_problem_jacobi(problem, Settings())
    assert info.value.path == "target.brackets"
    assert "(x, y, z)" in info.value.message


def test_jacobi_passes_for_so3():
    results = check_problem_jacobi(problem_from_dict(example_document("so3")), Settings())
    assert [label for label, _ in results] == ["target"]
    assert results[0][1].passed


# ----------------------------
# Catalog
# ----------------------------

def test_every_bundled_example_builds_a_valid_document():
    for name in example_names():
        doc = example_document(name)
        assert doc["name"] == name
        if EXAMPLES[name].expected != INPUT_ERROR:
            problem_from_dict(doc)


def test_example_parameters():
    doc = example_document("powers", {"n": 3, "m": 2})
    assert doc["target"]["brackets"]["x,y"] == "x^6 + y^4"
    assert example_document("linear", {"g": "1 + y^2", "n": 5})["target"]["brackets"]["x,y"] == "x*(1 + y^2)"
    with pytest.raises(ProblemError):
        example_document("powers", {"n": 1, "m": 2})
    with pytest.raises(ProblemError):
        example_document("nonexistent")
