import json
import statistics

import pytest

from covtour.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION, main
from covtour.instance import load_instance
from covtour.milp import build, encode, write_assignment
from covtour.oracle import solve_exact
from covtour.solution import load_solution

from conftest import FIXTURES

TOY = str(FIXTURES / "toy3.json")
QUICK = ["--max-iterations", "30", "--max-length", "4", "--it-no-improve", "30"]


def _gen(tmp_path, name, *extra):
    out = tmp_path / name
    assert main(["gen", "--nodes", "12", "--demand-prob", "0.5", "--gamma", "30", *extra, "-o", str(out)]) == EXIT_OK
    return out


def test_gen_deterministic(tmp_path):
    a = _gen(tmp_path, "a.json", "--seed", "5", "--m", "2")
    b = _gen(tmp_path, "b.json", "--seed", "5", "--m", "2")
    assert a.read_bytes() == b.read_bytes()
    c = _gen(tmp_path, "c.json", "--seed", "6", "--m", "2")
    assert a.read_bytes() != c.read_bytes()


def test_gen_real_preset(tmp_path):
    params = json.loads(_gen(tmp_path, "r.json", "--seed", "1", "--capacity", "20", "--preset", "real").read_text())["params"]
    assert (params["s_col"], params["s_dep"], params["stop_penalty_s"]) == (2, 14, 5)


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("COVTOUR_SEED", "5")
    env = _gen(tmp_path, "env.json", "--m", "2")
    flag = _gen(tmp_path, "flag.json", "--seed", "5", "--m", "2")
    assert env.read_bytes() == flag.read_bytes()
    monkeypatch.setenv("COVTOUR_SEED", "five")
    assert main(["gen", "--nodes", "5", "--demand-prob", "1", "--m", "1"]) == EXIT_VALIDATION


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--nodes", "5", "--demand-prob", "0.5"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", TOY, "--workers", "0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["export-milp", TOY, "--formulation", "rn-maybe"])
    assert exc.value.code == 2


def test_missing_file_is_usage_error(tmp_path):
    assert main(["validate", str(tmp_path / "absent.json")]) == 2


def test_solve_validate_and_byte_stability(tmp_path, capsys):
    inst = _gen(tmp_path, "i.json", "--seed", "3", "--m", "2")
    outs = []
    for n in range(2):
        out = tmp_path / f"s{n}.json"
        assert main(["solve", str(inst), "--seed", "2", *QUICK, "-o", str(out), "--geojson", str(tmp_path / "g.json"), "--dot", str(tmp_path / "t.dot")]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    err = capsys.readouterr().err
    assert "travel" in err and "phase 1" in err
    assert json.loads((tmp_path / "g.json").read_text())["type"] == "FeatureCollection"
    assert main(["validate", str(inst), str(tmp_path / "s0.json")]) == EXIT_OK


def test_validate_rejects_other_instance(tmp_path):
    a = _gen(tmp_path, "a.json", "--seed", "3", "--m", "2")
    b = _gen(tmp_path, "b.json", "--seed", "4", "--m", "2")
    sol = tmp_path / "s.json"
    main(["solve", str(a), *QUICK, "-o", str(sol)])
    assert main(["validate", str(b), str(sol)]) == EXIT_VALIDATION


def test_validate_reports_violations(tmp_path):
    inst = load_instance((FIXTURES / "toy3.json").read_bytes())
    main(["oracle", TOY, "-o", str(tmp_path / "opt.json")])
    doc = json.loads((tmp_path / "opt.json").read_text())
    doc["tours"][0][0]["qty"] = 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", TOY, str(bad)]) == EXIT_VALIDATION
    assert inst.total_demand == 5


def test_solve_with_time_limit(tmp_path):
    inst = tmp_path / "big.json"
    main(["gen", "--nodes", "80", "--demand-prob", "0.4", "--seed", "9", "--gamma", "50", "--capacity", "20", "--buffer", "0.2", "-o", str(inst)])
    out = tmp_path / "s.json"
    assert main(["solve", str(inst), "--time-limit", "1", "-o", str(out)]) == EXIT_OK
    assert main(["validate", str(inst), str(out)]) == EXIT_OK


def test_solve_never_beats_oracle(tmp_path):
    heur, exact = tmp_path / "h.json", tmp_path / "o.json"
    assert main(["solve", TOY, *QUICK, "-o", str(heur)]) == EXIT_OK
    assert main(["oracle", TOY, "-o", str(exact)]) == EXIT_OK
    h, _ = load_solution(heur.read_bytes())
    o, _ = load_solution(exact.read_bytes())
    assert h.cost.total_s >= o.cost.total_s
    assert o.cost.total_s == 350


def test_oracle_limit_exit_code(tmp_path):
    inst = tmp_path / "big.json"
    main(["gen", "--nodes", "30", "--demand-prob", "1", "--seed", "1", "--m", "2", "-o", str(inst)])
    assert main(["oracle", str(inst)]) == EXIT_INFEASIBLE


def test_export_twice_identical(tmp_path, capsys):
    for tag in ("rn-ws", "rn-nos", "cg-ws", "cg-nos"):
        a, b = tmp_path / f"{tag}1.lp", tmp_path / f"{tag}2.lp"
        main(["export-milp", TOY, "--formulation", tag, "-o", str(a)])
        main(["export-milp", TOY, "--formulation", tag, "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()
    main(["export-milp", TOY, "--formulation", "rn-ws", "--valid-ineq", "off"])
    assert "s_1" not in capsys.readouterr().out


def test_decode_hand_built_assignment(tmp_path):
    sol = tmp_path / "assign.txt"
    sol.write_text(
        "# two out-and-back tours\n"
        "x_0_1_1 1\nx_1_0_1 1\ny_1_1 1\nq_1_1 3\nz_1_1 1\n"
        "x_0_3_2 1\nx_3_0_2 1\ny_3_2 1\nq_3_2 2\nz_3_3 1\n"
    )
    out = tmp_path / "s.json"
    assert main(["decode", TOY, "--formulation", "rn-ws", str(sol), "-o", str(out)]) == EXIT_OK
    decoded, _ = load_solution(out.read_bytes())
    assert [t.visits for t in decoded.tours] == [((1, 3),), ((3, 2),)]
    assert decoded.cost.total_s == 350


def test_decode_cross_check_mismatch(tmp_path):
    inst = load_instance((FIXTURES / "toy3.json").read_bytes())
    values = encode(inst, solve_exact(inst).optimum, "RN-wS", with_valid_ineq=False)
    values["x_1_2_2"] = values["x_2_1_2"] = 1.0
    path = tmp_path / "a.txt"
    path.write_bytes(write_assignment(values))
    assert not build(inst, "RN-wS", with_valid_ineq=False).violations(values)
    out = tmp_path / "s.json"
    assert main(["decode", TOY, "--formulation", "rn-ws", str(path), "-o", str(out)]) == EXIT_VALIDATION
    assert out.exists()


def _solution_with_cost(tmp_path, name, total, digest="8e7b291d90a59a70"):
    doc = {"instance": digest, "tours": [], "assignment": {}, "cost": {"travel_s": total, "stop_penalty_s": 0, "total_s": total}}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_compare(tmp_path, capsys):
    main(["oracle", TOY, "-o", str(tmp_path / "o.json")])
    assert main(["compare", str(tmp_path / "o.json"), str(tmp_path / "o.json"), "--instance", TOY]) == EXIT_OK
    out = capsys.readouterr().out
    assert "+0.00%" in out and "feasible" in out
    a = _solution_with_cost(tmp_path, "a.json", 103)
    b = _solution_with_cost(tmp_path, "b.json", 100)
    assert main(["compare", a, b]) == EXIT_OK
    assert "relative difference +3.00%" in capsys.readouterr().out
    c = _solution_with_cost(tmp_path, "c.json", 100, digest="0000000000000000")
    assert main(["compare", a, c]) == EXIT_VALIDATION


def test_median_gap_over_tiny_seeds(tmp_path, capsys):
    gaps = []
    for seed in range(20):
        inst = tmp_path / f"t{seed}.json"
        main(["gen", "--nodes", "7", "--demand-prob", "0.6", "--seed", str(seed), "--gamma", "30", "--m", "2", "-o", str(inst)])
        main(["solve", str(inst), *QUICK, "-o", str(tmp_path / "h.json")])
        if main(["oracle", str(inst), "-o", str(tmp_path / "o.json")]) != EXIT_OK:
            continue
        h, _ = load_solution((tmp_path / "h.json").read_bytes())
        o, _ = load_solution((tmp_path / "o.json").read_bytes())
        gaps.append((seed, (h.cost.total_s - o.cost.total_s) / o.cost.total_s))
    capsys.readouterr()
    with capsys.disabled():
        print("\nseed  gap")
        for seed, gap in gaps:
            print(f"{seed:4d}  {100 * gap:6.2f}%")
        print(f"median {100 * statistics.median(g for _, g in gaps):.2f}%")
    assert len(gaps) >= 15
    assert all(g >= -1e-9 for _, g in gaps)
