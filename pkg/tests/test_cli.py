"""Command-line surface: exit codes, byte determinism, and the emitted
formats, driven through main() with in-process capture."""

import json
from fractions import Fraction
from pathlib import Path

import pytest

from pulsehit.cli import RunConfig, main
from pulsehit.errors import ParameterRangeError

MOVE_RIGHT_3 = """\
states: q0 q1 q2 qH
alphabet: _
start: q0
halt: qH
rule: q0 _ -> q1 _ R
rule: q1 _ -> q2 _ R
rule: q2 _ -> qH _ R
"""

LOOP_STAY = "states: q0 qH\nalphabet: _\nstart: q0\nhalt: qH\nrule: q0 _ -> q0 _ S\n"


@pytest.fixture
def mover(tmp_path):
    path = tmp_path / "mover.tm"
    path.write_text(MOVE_RIGHT_3)
    return str(path)


@pytest.fixture
def looper(tmp_path):
    path = tmp_path / "looper.tm"
    path.write_text(LOOP_STAY)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- config boundary ---------------------------------------------------------------


def test_run_config_revalidates_ranges():
    RunConfig(command="hit", epsilon=Fraction(1, 3))
    with pytest.raises(ParameterRangeError):
        RunConfig(command="explode")
    with pytest.raises(ParameterRangeError):
        RunConfig(command="hit", epsilon=Fraction(1, 2))
    with pytest.raises(ParameterRangeError):
        RunConfig(command="hit", delta=Fraction(1))
    with pytest.raises(ParameterRangeError):
        RunConfig(command="hit", horizon=0)
    with pytest.raises(ParameterRangeError):
        RunConfig(command="hit", grid=0)
    with pytest.raises(ParameterRangeError):
        RunConfig(command="evolve", time=Fraction(-1, 2))
    with pytest.raises(ParameterRangeError):
        RunConfig(command="hit", format="xml")


# -- compile -----------------------------------------------------------------------


def test_compile_defaults_echo_the_instance(capsys, mover):
    code, out, err = run(capsys, "compile", mover)
    assert code == 0 and err == ""
    payload = json.loads(out)
    assert payload["epsilon"] == "1/4"
    assert payload["delta"] == "1/2"
    assert payload["grid"] == 6
    assert payload["horizon"] == 100
    assert payload["clock"] == "unbounded"
    assert payload["target"] == "beacon"
    assert payload["machine"]["start"] == "q0"
    assert payload["machine"]["rules"][0] == ["q0", "_", "q1", "_", "R"]


def test_compile_is_byte_deterministic(capsys, mover):
    first = run(capsys, "compile", mover)
    second = run(capsys, "compile", mover)
    assert first == second


def test_compile_rejects_out_of_range_epsilon(capsys, mover):
    code, out, err = run(capsys, "compile", mover, "--epsilon", "3/4")
    assert code == 1 and out == ""
    assert "epsilon" in err


def test_float_spellings_are_rejected(capsys, mover):
    code, _out, err = run(capsys, "compile", mover, "--epsilon", "0.25")
    assert code == 1
    assert "exact rational" in err
    code, _out, err = run(capsys, "compile", mover, "--delta", "0.5")
    assert code == 1


# -- hit ---------------------------------------------------------------------------


def test_hit_exit_zero_and_report(capsys, mover):
    code, out, err = run(capsys, "hit", mover, "--horizon", "10")
    assert code == 0 and err == ""
    payload = json.loads(out)
    assert payload["outcome"] == "hit"
    assert payload["t"] == "7/2"


def test_hit_exhausted_exits_two(capsys, looper):
    code, out, _err = run(capsys, "hit", looper, "--horizon", "10")
    assert code == 2
    payload = json.loads(out)
    assert payload["outcome"] == "exhausted"
    assert payload["max_fidelity"] == 0.0


def test_hit_on_cyclic_clock_finds_the_mid_pulse_crossing(capsys, mover):
    code, out, _err = run(capsys, "hit", mover, "--clock", "cyclic:2", "--horizon", "10")
    assert code == 0
    payload = json.loads(out)
    assert payload["t"] == "10/3" and payload["fidelity"] == 0.75


def test_hit_exact_targets(capsys, mover):
    code, out, _err = run(capsys, "hit", mover, "--target", "exact", "--horizon", "10")
    assert code == 0 and json.loads(out)["t"] == "0"
    code, out, _err = run(capsys, "hit", mover, "--target", "exact:2", "--horizon", "10")
    assert code == 0 and json.loads(out)["t"] == "3/2"
    code, _out, err = run(capsys, "hit", mover, "--target", "nearby")
    assert code == 1 and "target" in err


def test_bad_machine_file_exits_one_with_diagnostics(capsys, tmp_path):
    bad = tmp_path / "bad.tm"
    bad.write_text("states q0\n")
    code, out, err = run(capsys, "hit", str(bad))
    assert code == 1 and out == ""
    assert "error" in err
    code, _out, err = run(capsys, "hit", str(tmp_path / "missing.tm"))
    assert code == 1


def test_cyclic_period_below_two_exits_one(capsys, mover):
    code, _out, err = run(capsys, "hit", mover, "--clock", "cyclic:1")
    assert code == 1 and "period" in err
    code, _out, err = run(capsys, "hit", mover, "--clock", "sometimes")
    assert code == 1


# -- trace -------------------------------------------------------------------------


def test_trace_header_and_looper_cells(capsys, looper):
    code, out, _err = run(capsys, "trace", looper, "--horizon", "8")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,fidelity"
    for line in lines[1:]:
        assert line.endswith(",0.000000000000")


def test_trace_integer_rows_alternate_after_first_lit_pulse(capsys, mover):
    code, out, _err = run(capsys, "trace", mover, "--horizon", "8", "--grid", "1")
    assert code == 0
    integer_fids = []
    for line in out.splitlines()[1:]:
        t, fid = line.split(",")
        if "/" not in t and "." not in t:
            integer_fids.append(fid)
    assert integer_fids == [
        "0.000000000000",
        "0.000000000000",
        "0.000000000000",
        "0.000000000000",
        "1.000000000000",
        "0.000000000000",
        "1.000000000000",
        "0.000000000000",
        "1.000000000000",
    ]


def test_trace_json_format(capsys, mover):
    code, out, _err = run(capsys, "trace", mover, "--horizon", "5", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert rows[0] == ["0", 0.0]
    assert ["7/2", 1.0] in rows


def test_csv_format_is_only_for_trace(capsys, mover):
    code, _out, err = run(capsys, "hit", mover, "--format", "csv")
    assert code == 1 and "trace" in err


# -- evolve ------------------------------------------------------------------------


def test_evolve_dumps_the_state(capsys, mover):
    code, out, err = run(capsys, "evolve", mover, "--time", "7/2")
    assert code == 0 and err == ""
    rows = json.loads(out)
    assert len(rows) == 1
    serial, re_part, im_part = rows[0]
    bytes.fromhex(serial)
    assert (re_part, im_part) == (1.0, 0.0)


def test_evolve_mid_pulse_superposition(capsys, mover):
    code, out, _err = run(capsys, "evolve", mover, "--time", "13/4", "--clock", "cyclic:2")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 2
    total = sum(re * re + im * im for _, re, im in rows)
    assert abs(total - 1.0) < 1e-12


def test_evolve_requires_a_time(capsys, mover):
    code, _out, err = run(capsys, "evolve", mover)
    assert code == 1 and "--time" in err


def test_evolve_rejects_negative_time(capsys, mover):
    code, _out, err = run(capsys, "evolve", mover, "--time", "-1/2")
    assert code == 1 and "time" in err


def test_evolve_mid_pulse_refusal_exits_one(capsys, mover):
    # pre-halt mid-pulse points have no finite description on a cyclic clock
    code, _out, err = run(capsys, "evolve", mover, "--time", "1/4", "--clock", "cyclic:2")
    assert code == 1 and err != ""


# -- verify ------------------------------------------------------------------------


def test_verify_builtin_corpus_agrees(capsys):
    code, out, err = run(capsys, "verify", "--horizon", "300")
    assert code == 0 and err == ""
    lines = out.splitlines()
    assert len(lines) == 17
    for line in lines:
        assert json.loads(line)["verdict"] == "agree"


def test_verify_explicit_corpus_path(capsys):
    from importlib import resources

    manifest = Path(str(resources.files("pulsehit"))) / "corpus" / "manifest.json"
    code, out, _err = run(capsys, "verify", "--corpus", str(manifest), "--horizon", "250")
    assert code == 0
    assert len(out.splitlines()) == 17


def test_verify_is_byte_deterministic(capsys):
    first = run(capsys, "verify", "--horizon", "300")
    second = run(capsys, "verify", "--horizon", "300")
    assert first == second


# -- sweep -------------------------------------------------------------------------


def test_sweep_emits_witness_lines(capsys):
    code, out, err = run(capsys, "sweep", "--budgets", "10,20")
    assert code == 0 and err == ""
    lines = out.splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["witness"] == {"K": 11, "n": 10, "name": "counter-10"}
    assert first["outcome"] == "reported-unreachable"
    assert json.loads(lines[1])["witness"]["n"] == 20


def test_sweep_rejects_malformed_budget_lists(capsys):
    code, _out, err = run(capsys, "sweep", "--budgets", "10,x")
    assert code == 1 and "positive integers" in err
    code, _out, _err = run(capsys, "sweep", "--budgets", "0")
    assert code == 1


def test_sweep_family_cap_failure_exits_one(capsys):
    code, _out, err = run(capsys, "sweep", "--budgets", "50", "--family-cap", "10")
    assert code == 1 and "witness" in err


# -- plumbing ----------------------------------------------------------------------


def test_out_flag_writes_the_same_bytes(capsys, mover, tmp_path):
    dest = tmp_path / "instance.json"
    code, out, _err = run(capsys, "compile", mover, "--out", str(dest))
    assert code == 0 and out == ""
    _code, direct, _err = run(capsys, "compile", mover)
    assert dest.read_text() == direct


def test_no_command_exits_one(capsys):
    code, _out, err = run(capsys)
    assert code == 1 and err != ""


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
