import json
import math
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wpress import cli
from wpress.covering import StageSpec, w_lp_stage
from wpress.cli import PROVENANCE, ResultRecord, main, parse_config, run
from wpress.io import (
    ConfigError,
    bundled_names,
    eval_number,
    load_measure,
    load_potential,
    load_system,
    parse_weights,
    system_from_dict,
)

FS42 = json.loads(
    '{"name": "fs42", "levels": [{"symbols": ["a", "b", "c", "d"]}, {"symbols": ["0", "1"]}],'
    ' "codes": [{"a": "0", "b": "0", "c": "1", "d": "1"}], "weights": [1, "1/2"]}'
)


def run_main(argv, capsys):
    code = main(argv)
    rec = ResultRecord.from_json(capsys.readouterr().out)
    return code, rec


def test_parse_config_minimal():
    cfg = parse_config(["upper", "--system", "bundled:fs42"])
    assert cfg.command == "upper" and cfg.n == 10 and cfg.potential is None


def test_weights_are_exact():
    assert parse_weights("1, 0.5") == (Fraction(1), Fraction(1, 2))
    assert parse_weights([1, "1/3", 0]) == (Fraction(1), Fraction(1, 3), Fraction(0))


@pytest.mark.parametrize("raw", ["", [], "1, x"])
def test_bad_weights(raw):
    with pytest.raises(ConfigError):
        parse_weights(raw)


def test_negative_first_weight_rejected():
    with pytest.raises(ConfigError, match="a1 must be positive"):
        system_from_dict(dict(FS42, weights=[-1, "1/2"]))


def test_unknown_field_reports_line():
    text = '{\n  "name": "x",\n  "levels": [{"symbols": ["a"]}],\n  "colour": 3,\n  "weights": [1]\n}'
    with pytest.raises(ConfigError) as exc:
        system_from_dict(json.loads(text), text)
    assert exc.value.field == "colour" and exc.value.line == 4


def test_code_count_mismatch():
    with pytest.raises(ConfigError):
        system_from_dict(dict(FS42, codes=[]))


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "bad.system.json"
    p.write_text('{\n  "levels": [,\n}')
    with pytest.raises(ConfigError) as exc:
        load_system(str(p))
    assert exc.value.line == 2


def test_expressions():
    assert eval_number("log(2)") == pytest.approx(math.log(2))
    assert eval_number("2**-1 + 1/4") == pytest.approx(0.75)
    for bad in ("__import__('os')", "log(2, 3)", True):
        with pytest.raises(ValueError):
            eval_number(bad)


def test_potential_and_measure_files(tmp_path):
    system = load_system("bundled:fs42")
    pot = load_potential("bundled:fs42", system)
    assert pot.table[(0,)] == pytest.approx(math.log(2))
    mu = load_measure("bundled:fs42", system)
    assert np.allclose(mu.stationary, [1 / 2, 1 / 4, 1 / 8, 1 / 8])
    p = tmp_path / "x.potential.json"
    p.write_text('{"range": 2, "entries": {"ab": 1.0}}')
    assert load_potential(str(p), system).table[(0, 1)] == 1.0
    p.write_text('{"range": 1, "entries": {"z": 1.0}}')
    with pytest.raises(ConfigError):
        load_potential(str(p), system)


def test_every_bundled_system_loads():
    for name in bundled_names("system"):
        assert load_system(f"bundled:{name}").k >= 1


def test_bisect_with_small_n_max_exits_2(capsys):
    code, rec = run_main(["bisect", "--system", "bundled:fs42", "--N", "3", "--n-max", "2"], capsys)
    assert code == 2
    assert rec.error["kind"] == "config" and rec.error["field"] == "n-max"


def test_missing_file_exits_2(capsys):
    code, rec = run_main(["upper", "--system", "/nonexistent.json"], capsys)
    assert code == 2 and "not found" in rec.error["message"]


def test_unknown_command_exits_2(capsys):
    code, rec = run_main(["nope"], capsys)
    assert code == 2


def test_stage_cap_exits_3(capsys, monkeypatch):
    real = cli.covering.build_stage

    def capped(*a, **k):
        k["nonzero_cap"] = 10
        return real(*a, **k)

    monkeypatch.setattr(cli.covering, "build_stage", capped)
    code, rec = run_main(["lp", "--system", "bundled:fs42", "--n-max", "3"], capsys)
    assert code == 3 and rec.error["kind"] == "resource"


def test_frostman_no_mass_flag(capsys):
    code, rec = run_main(["frostman", "--system", "bundled:fs42", "--s", "100"], capsys)
    assert code == 0
    assert rec.flags["no_mass_certifiable"] is True
    assert rec.values["c"]["value"] < 1e-12


def test_frostman_dump_measure(tmp_path, capsys):
    out = tmp_path / "mu.json"
    code, rec = run_main(["frostman", "--system", "bundled:fs42", "--dump-measure", str(out)], capsys)
    assert code == 0 and not rec.flags["no_mass_certifiable"]
    system = load_system("bundled:fs42")
    lp_value = w_lp_stage(system, load_potential(None, system), 0.0, StageSpec(1, 2, 3))
    assert rec.values["c"]["value"] == pytest.approx(lp_value, rel=1e-8)
    assert rec.values["gap"]["value"] <= 1e-8 * lp_value
    dumped = json.loads(out.read_text())
    assert dumped


def test_upper_values_and_provenance(capsys):
    code, rec = run_main(["upper", "--system", "bundled:fs42", "--potential", "bundled:fs42"], capsys)
    assert code == 0
    assert rec.values["upper_pressure"]["value"] == pytest.approx(math.log(5) + 0.5 * math.log(2), abs=1e-12)


def test_record_round_trip():
    rec = ResultRecord(["upper"], "abc", seed=3, timing=1.5)
    rec.add("x", np.float64(2.5), "exact")
    rec.add("arr", np.arange(3), "lp")
    back = ResultRecord.from_json(rec.to_json())
    assert back == ResultRecord.from_json(back.to_json())
    assert back.values["x"] == {"value": 2.5, "provenance": "exact"}
    assert back.values["arr"]["value"] == [0, 1, 2]
    with pytest.raises(ValueError):
        rec.add("y", 1.0, "guess")


@pytest.mark.parametrize(
    "argv",
    [
        ["upper", "--system", "bundled:golden_chain", "--potential", "bundled:golden_chain", "-n", "6"],
        ["optimize", "--system", "bundled:golden", "--restarts", "2", "--iters", "100", "--seed", "4"],
        ["smb", "--system", "bundled:fs42", "--measure", "bundled:fs42", "--sample", "200", "--seed", "1"],
        ["lp", "--system", "bundled:golden_chain", "--s", "1.0"],
    ],
)
def test_reproducible_modulo_timing(argv):
    a, ca = run(parse_config(argv), argv)
    b, cb = run(parse_config(argv), argv)
    assert ca == cb
    assert a.without_timing() == b.without_timing()
    for entry in a.values.values():
        assert entry["provenance"] in PROVENANCE


def test_inputs_digest_tracks_inputs():
    a = cli.inputs_digest(parse_config(["upper", "--system", "bundled:fs42"]))
    b = cli.inputs_digest(parse_config(["upper", "--system", "bundled:fs42", "-n", "11"]))
    c = cli.inputs_digest(parse_config(["upper", "--system", "bundled:golden"]))
    assert len({a, b, c}) == 3


def test_verify_all_fs42(capsys):
    code, rec = run_main(["verify", "--system", "bundled:fs42", "--potential", "bundled:fs42", "--suite", "all", "--restarts", "3"], capsys)
    assert code == 0
    assert [s["name"] for s in rec.suites] == ["vp", "smb", "duality", "power"]
    assert all(s["ok"] for s in rec.suites)
    assert all(v["provenance"] in PROVENANCE for v in rec.values.values())


def test_out_file(tmp_path, capsys):
    out = tmp_path / "rec.json"
    assert main(["upper", "--system", "bundled:fs42", "-n", "2", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    rec = ResultRecord.from_json(out.read_text())
    assert rec.values["upper_pressure"]["value"] == pytest.approx(2.5 * math.log(2), abs=1e-12)


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "wpress.cli", "upper", "--system", "bundled:fs42", "-n", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["values"]["n"]["value"] == 2


@given(st.integers(-5, 0))
def test_nonpositive_n_rejected(n):
    with pytest.raises(ConfigError):
        parse_config(["upper", "--system", "bundled:fs42", "-n", str(n)])
