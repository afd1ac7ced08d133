import json
import re
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirac_workbench.cli import main
from dirac_workbench.config import ConfigError, dump_config, load_config, parse_config


def _write(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


def _run(tmp_path, command, payload, *extra):
    cfg = _write(tmp_path, payload)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--output", str(out), *extra]), out


# -- configuration ---------------------------------------------------------------------

def test_minimal_config_gets_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, {"version": 1, "model": {}}))
    m = cfg.model
    assert (m.d, m.m, m.M, m.Omega, m.potential.kind, m.bath.modes) == (2, 1.0, 1.0, 1.0, "free", 0)
    assert (cfg.simulate.dt, cfg.simulate.t_final, cfg.simulate.seeds) == (1e-3, 10.0, [42])
    assert cfg.initial_vectors() == ([1.0, 0.0], [0.0, 1.0])


@pytest.mark.parametrize("payload, fragment", [
    ({"version": 1, "model": {"m": -1}}, "model.m"),
    ({"version": 1, "model": {"potential": {"kind": "quartic"}}}, "model.potential.kind"),
    ({"version": 1, "model": {"mass": 2}}, "model.mass"),
    ({"version": 1, "simulate": {"dt": 0}}, "simulate.dt"),
    ({"version": 1, "simulate": {"seeds": [-1]}}, "simulate.seeds"),
    ({"version": 1, "simulate": {"x0": [1, 0, 0]}}, "x0"),
    ({"version": 2}, "version"),
    ({"model": {}}, "version"),
])
def test_config_errors_name_the_field(tmp_path, payload, fragment):
    with pytest.raises(ConfigError, match=re.escape(fragment)):
        load_config(_write(tmp_path, payload))


def test_parse_error_reports_position(tmp_path):
    with pytest.raises(ConfigError, match=r"line 2, column"):
        load_config(_write(tmp_path, '{"version": 1,\n  "model": {,}}'))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.json")


configs = st.fixed_dictionaries({"version": st.just(1)}, optional={
    "model": st.fixed_dictionaries({}, optional={
        "d": st.integers(1, 4), "m": st.floats(0.1, 10), "M": st.floats(0.1, 10),
        "Omega": st.floats(0, 3),
        "potential": st.sampled_from([{"kind": "free"}, {"kind": "harmonic", "k": 2.5},
                                      {"kind": "double-well", "a": 1.5, "b": 0.25}]),
        "bath": st.fixed_dictionaries({}, optional={"modes": st.integers(0, 20), "eta": st.floats(0, 1)}),
    }),
    "simulate": st.fixed_dictionaries({}, optional={
        "dt": st.floats(1e-4, 1e-2), "seeds": st.lists(st.integers(0, 2 ** 64 - 1), min_size=1, max_size=3,
                                                       unique=True),
        "schemes": st.lists(st.sampled_from(["dirac-rk4", "rattle", "penalty"]), min_size=1, max_size=3),
    }),
})


@settings(max_examples=100, deadline=None)
@given(configs)
def test_config_round_trip_is_idempotent(payload):
    once = dump_config(parse_config(payload))
    twice = dump_config(parse_config(json.loads(once)))
    assert once == twice


# -- analyze / table ---------------------------------------------------------------------

def test_analyze_ring_model(tmp_path):
    code, out = _run(tmp_path, "analyze", {"version": 1, "model": {"potential": {"kind": "harmonic"},
                                                                   "bath": {"modes": 16}}})
    assert code == 0
    report = json.loads((out / "analysis.json").read_text())
    assert [c["class"] for c in report["constraints"]] == ["second-class", "second-class"]
    assert report["constraints"][1]["expression"] == "(-2*Q*P*m + 2*x1*p1*M + 2*x2*p2*M)/(m*M)"
    assert set(report["eom"]) >= {"x1", "p1", "Q", "P", "q16", "pq16"}


def test_analyze_hyperplane(tmp_path):
    code, out = _run(tmp_path, "analyze", {"version": 1, "model": {"environment": False, "constraints": ["x1"]}})
    assert code == 0
    report = json.loads((out / "analysis.json").read_text())
    assert [c["expression"] for c in report["constraints"]] == ["x1", "p1/m"]


def test_analyze_empty_constraints(tmp_path, capsys):
    code, _ = _run(tmp_path, "analyze", {"version": 1, "model": {"constraints": []}})
    assert code == 2
    assert "no primary constraints" in capsys.readouterr().err


def test_analyze_bad_constraint_text(tmp_path, capsys):
    code, _ = _run(tmp_path, "analyze", {"version": 1, "model": {"constraints": ["x1 + $"]}})
    assert code == 2


def test_table(tmp_path):
    code, out = _run(tmp_path, "table", {"version": 1, "model": {"M": 3}})
    assert code == 0
    rows = {(r["left"], r["right"]): r for r in json.loads((out / "commutators.json").read_text())["entries"]}
    assert rows[("Q", "P")]["coefficient"] == "M/(m + M)"
    assert rows[("Q", "P")]["at_parameters"] == "3/4"
    assert "[Q, P]" in (out / "commutators.txt").read_text()


def test_table_symmetric_masses(tmp_path):
    code, out = _run(tmp_path, "table", {"version": 1, "model": {}})
    rows = {(r["left"], r["right"]): r for r in json.loads((out / "commutators.json").read_text())["entries"]}
    assert rows[("Q", "P")]["at_parameters"] == "1/2"


def test_table_unconstrained(tmp_path):
    code, out = _run(tmp_path, "table", {"version": 1, "model": {"constraints": []}})
    assert code == 0
    for r in json.loads((out / "commutators.json").read_text())["entries"]:
        canonical = {("x1", "p1"), ("x2", "p2"), ("Q", "P")}
        want = "1" if (r["left"], r["right"]) in canonical else (
            "-1" if (r["right"], r["left"]) in canonical else "0")
        assert r["coefficient"] == want


# -- simulate ----------------------------------------------------------------------------

def test_simulate_rattle_summary(tmp_path, capsys):
    code, out = _run(tmp_path, "simulate", {"version": 1, "model": {"Omega": 0},
                                            "simulate": {"schemes": ["rattle"]}})
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    max_phi = float(re.search(r"max\|phi\|=(\S+)", line).group(1))
    assert max_phi <= 1e-8


def test_simulate_three_schemes_share_grids(tmp_path):
    code, out = _run(tmp_path, "simulate", {"version": 1, "model": {"Omega": 0},
                                            "simulate": {"schemes": ["dirac-rk4", "rattle", "penalty"],
                                                         "t_final": 1.0}})
    assert code == 0
    trajs = sorted(out.glob("*.trajectory.csv"))
    assert len(trajs) == 3 and len(list(out.glob("*.observables.csv"))) == 3
    grids = [[line.split(",")[0] for line in p.read_text().splitlines()] for p in trajs]
    assert grids[0] == grids[1] == grids[2]
    assert grids[0][0] == "t"


def test_simulate_is_byte_identical(tmp_path):
    payload = {"version": 1, "model": {"bath": {"modes": 2}},
               "simulate": {"schemes": ["rattle", "dirac-rk4"], "seeds": [1, 2], "t_final": 0.5,
                            "temperature": 0.3}}
    cfg = _write(tmp_path, payload)
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_dt_zero_is_a_config_error(tmp_path):
    code, out = _run(tmp_path, "simulate", {"version": 1, "simulate": {"dt": 0}})
    assert code == 4
    assert not out.exists()


def test_simulate_flag_overrides(tmp_path):
    code, out = _run(tmp_path, "simulate", {"version": 1}, "--scheme", "rattle", "--seed", "7",
                     "--dt", "0.01", "--t-final", "0.5")
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["rattle-seed7.observables.csv",
                                                     "rattle-seed7.trajectory.csv", "rattle.qq.csv"]
    assert len((out / "rattle-seed7.trajectory.csv").read_text().splitlines()) == 52


def test_simulate_integrator_error_removes_outputs(tmp_path):
    # rattle succeeds first, then the radial infall hits x = 0 under dirac-rk4
    payload = {"version": 1, "model": {"Omega": 0},
               "simulate": {"schemes": ["rattle", "dirac-rk4"], "x0": [1, 0], "p0": [-1, 0],
                            "t_final": 0.5}}
    cfg = _write(tmp_path, payload)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--output", str(out)]) == 0
    for p in out.iterdir():
        p.unlink()
    assert main(["simulate", "--config", str(cfg), "--output", str(out), "--t-final", "2"]) == 3
    assert list(out.iterdir()) == []


def test_simulate_rejects_unsupported_model(tmp_path):
    code, _ = _run(tmp_path, "simulate", {"version": 1, "model": {"constraints": ["x1"]}})
    assert code == 4


def test_usage_error_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 4


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {"version": 1, "model": {"m": 0}})
    proc = subprocess.run([sys.executable, "-m", "dirac_workbench", "analyze", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 4
    assert "model.m" in proc.stderr
    assert proc.stdout == ""


# -- verify ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("verify")
    cfg = _write(tmp, {"version": 1})
    code = main(["verify", "--config", str(cfg), "--output", str(tmp / "out")])
    return code, json.loads((tmp / "out" / "verification.json").read_text())


def test_verify_report(verify_run):
    code, report = verify_run
    checks = {c["number"]: c for c in report["checks"]}
    assert sorted(checks) == list(range(1, 13))
    # the displayed [P, p_i] form carries the opposite sign to the computed bracket
    assert not checks[3]["passed"]
    assert "[P, p1]" in checks[3]["detail"]
    assert {c["entry"] for c in checks[3]["measured"]["mismatches"]} == {"[P, p1]", "[P, p2]", "[P, p3]"}
    assert all(checks[n]["passed"] for n in checks if n != 3)
    assert code == 1 and report["passed"] is False


def test_verify_corrupted_constraint_names_entry(tmp_path, capsys):
    from dirac_workbench.verify import run_check
    from dirac_workbench.dynamics import ModelSpec

    result = run_check(3, ModelSpec(constraints=["dot(x,x) - 2*Q^2"]))
    assert not result.passed
    assert result.detail.startswith("first mismatch [x1, p1]")
