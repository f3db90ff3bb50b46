import random

import pytest

from covtour.errors import Disconnected, NotEulerian, ParseError
from covtour.milp import (
    FORMULATIONS,
    build,
    decode_solution,
    encode,
    export_lp,
    parse_lp,
    raw_objective,
    read_assignment,
    write_assignment,
)
from covtour.oracle import solve_exact
from covtour.solution import Solution, Tour, check_feasible, evaluate

from conftest import FIXTURES, expected_constraints, expected_variables, tight_fleet

GOLDEN = FIXTURES / "golden"


def test_toy_counts(toy3):
    rn = build(toy3, "RN-wS")
    assert [rn.count(p) for p in "xyzqfs"] == [16, 6, 6, 6, 16, 3]
    assert len(rn.constraints) == 71
    cg = build(toy3, "CG-noS")
    assert [cg.count(p) for p in "xyzqf"] == [12, 3, 6, 3, 12]
    assert len(cg.constraints) == 38


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("tag", FORMULATIONS)
def test_counts_match_closed_form(seed, tag):
    inst = tight_fleet(seed, 30)
    for valid in (True, False):
        model = build(inst, tag, with_valid_ineq=valid)
        assert len(model.variables) == expected_variables(inst, tag, valid)
        assert len(model.constraints) == expected_constraints(inst, tag, valid)


def test_toy_optimum_encodes_everywhere(toy3):
    opt = solve_exact(toy3).optimum
    assert opt.tours == (Tour(((1, 3),)), Tour(((3, 2),)))
    for tag in FORMULATIONS:
        model = build(toy3, tag)
        values = encode(toy3, opt, tag)
        assert model.violations(values) == []
        assert model.objective_value(values) == pytest.approx(350)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_encodings_feasible(seed):
    inst = tight_fleet(seed, 30)
    opt = solve_exact(inst).optimum
    total = evaluate(inst, opt).total_s
    for tag in FORMULATIONS:
        try:
            values = encode(inst, opt, tag)
        except ValueError:
            continue
        model = build(inst, tag)
        assert model.violations(values) == [], tag
        assert model.objective_value(values) == pytest.approx(total)


def test_preference_row_blocks_skipping_a_visited_stop(toy3):
    # demand node 1 ranks stop 1 first; visiting 1 but assigning 1 to 2 breaks the row
    sol = Solution((Tour(((1, 0), (2, 5))), Tour()), {1: 2, 3: 2})
    model = build(toy3, "RN-wS")
    values = encode(toy3, sol, "RN-wS")
    bad = model.violations(values)
    assert any(v.startswith("pref_1_1_1") for v in bad)


def test_double_visit_breaks_no_split_model(toy3):
    sol = Solution((Tour(((1, 2),)), Tour(((1, 1), (3, 2)))), {1: 1, 3: 3})
    values = encode(toy3, sol, "RN-wS", with_valid_ineq=False)
    assert build(toy3, "RN-wS", with_valid_ineq=False).violations(values) == []
    assert any(v.startswith("once_1") for v in build(toy3, "RN-noS").violations(values))


def test_two_index_departures(toy3):
    model = build(toy3, "CG-noS")
    (row,) = [c for c in model.constraints if c.name == "depot_out"]
    assert row.rhs == toy3.m and set(row.terms) == {"x_0_1", "x_0_2", "x_0_3"}
    one_tour = Solution((Tour(((1, 3), (3, 2))),), {1: 1, 3: 3})
    with pytest.raises(ValueError):
        encode(toy3, one_tour, "CG-noS")


def test_unlisted_assignment_forbidden(toy3):
    opt = solve_exact(toy3).optimum
    values = encode(toy3, opt, "RN-wS")
    values["z_1_3"] = 1.0
    assert any(v.startswith("nopref_1") for v in build(toy3, "RN-wS").violations(values))


def test_export_is_deterministic_and_golden(toy3):
    for tag in ("RN-wS", "CG-noS"):
        a = export_lp(build(toy3, tag))
        assert a == export_lp(build(toy3, tag))
        assert a == (GOLDEN / f"toy3_{tag.lower()}.lp").read_bytes()


@pytest.mark.parametrize("tag", FORMULATIONS)
def test_lp_round_trip(toy3, tag):
    model = build(toy3, tag)
    back = parse_lp(export_lp(model))
    assert back.structurally_equal(model)
    assert export_lp(back) == export_lp(model)


def test_parse_lp_errors():
    with pytest.raises(ParseError):
        parse_lp(b"Minimize\n obj: 3 x_1 +\nSubject To\n c: x_1 >= oops\nEnd\n")


def test_decode_single_cycle(toy3):
    values = read_assignment(
        b"# Objective value = 315\n"
        b"x_0_1_1 1\nx_1_2_1 1\nx_2_3_1 1\nx_3_0_1 1\n"
        b"y_2_1 1   # one stop\nq_2_1 5\nz_1_2 1\nz_3_2 1\n"
    )
    sol = decode_solution(toy3, "RN-wS", values)
    assert sol.tours == (Tour(((2, 5),)), Tour())
    assert sol.assignment == {1: 2, 3: 2}
    # the walk 0-1-2-3-0 costs 310; shortest paths to and from stop 2 cost 300
    assert raw_objective(build(toy3, "RN-wS"), values) == 310 + 5
    assert sol.cost.total_s == 300 + 5


def test_decode_drops_detached_cycle(toy3):
    opt = solve_exact(toy3).optimum
    values = encode(toy3, opt, "RN-wS")
    values["x_1_2_2"] = values["x_2_1_2"] = 1.0
    model = build(toy3, "RN-wS")
    assert model.violations(values) == []
    sol = decode_solution(toy3, "RN-wS", values)
    assert sol.tours == opt.tours
    assert sol.cost.total_s == pytest.approx(raw_objective(model, values) - 120)


@pytest.mark.parametrize("seed", range(5))
def test_decoded_never_worse_than_raw(seed):
    inst = tight_fleet(seed, 30)
    opt = solve_exact(inst).optimum
    for tag in FORMULATIONS:
        try:
            values = encode(inst, opt, tag)
        except ValueError:
            continue
        sol = decode_solution(inst, tag, values)
        assert check_feasible(inst, sol).ok
        assert sol.cost.total_s <= raw_objective(build(inst, tag), values) + 1e-6


def test_decode_errors(toy3):
    with pytest.raises(NotEulerian):
        decode_solution(toy3, "RN-wS", {"x_0_1_1": 1, "x_1_2_1": 1})
    loose = {"x_2_3_1": 1, "x_3_2_1": 1, "y_2_1": 1, "q_2_1": 5, "x_0_1_1": 1, "x_1_0_1": 1}
    with pytest.raises(Disconnected):
        decode_solution(toy3, "RN-wS", loose)


def test_read_assignment_reports_line():
    with pytest.raises(ParseError) as exc:
        read_assignment("# header\nx_0_1_1 1\nx_1_0_1\n")
    assert exc.value.locus == "line 3"
    with pytest.raises(ParseError):
        read_assignment("x_1 one\n")


def test_assignment_round_trip():
    values = {"x_10_2_1": 1.0, "x_2_10_1": 1.0, "q_2_1": 2.5}
    text = write_assignment(values, objective=12)
    assert text.splitlines()[0] == b"# Objective value = 12"
    assert read_assignment(text) == values


def test_split_models_agree_without_splits():
    for seed in range(20):
        inst = tight_fleet(seed, 30)
        opt = solve_exact(inst).optimum
        if opt.splits():
            continue
        ws = build(inst, "RN-wS")
        nos = build(inst, "RN-noS")
        a = encode(inst, opt, "RN-wS")
        b = encode(inst, opt, "RN-noS")
        assert ws.objective_value(a) == pytest.approx(nos.objective_value(b))
        assert nos.violations(b) == []


def test_fuzzed_encodings_decode(toy3):
    rng = random.Random(3)
    opt = solve_exact(toy3).optimum
    model = build(toy3, "RN-wS")
    base = encode(toy3, opt, "RN-wS")
    for _ in range(50):
        values = dict(base)
        k = rng.randint(1, 2)
        a, b = rng.choice([(1, 2), (2, 3)])
        values[f"x_{a}_{b}_{k}"] = values.get(f"x_{a}_{b}_{k}", 0) + 1
        values[f"x_{b}_{a}_{k}"] = values.get(f"x_{b}_{a}_{k}", 0) + 1
        assert model.violations(values) == []
        sol = decode_solution(toy3, "RN-wS", values)
        assert sol.cost.total_s <= raw_objective(model, values)
