import json
import subprocess
import sys

import jsonschema
import pytest

from qcis.cli import RunConfig, UsageError, config_from_args, load_schema, main, run

SCHEMA = load_schema()


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    doc = json.loads(out.out) if out.out.strip() else None
    if doc is not None:
        jsonschema.validate(doc, SCHEMA)
    return code, doc, out


def test_spectral_curve(capsys):
    code, doc, _ = invoke(capsys, "spectral-curve", "--m", "1", "--g2", "4", "--g3", "1")
    assert code == 0 and doc["schema"] == "qcis-lab/1"
    assert doc["result"]["P"]["coefficients"] == ["-1/4", "-1", "0", "1"]


def test_algebraic_type_verdict_is_not_failure(capsys):
    code, doc, _ = invoke(capsys, "--m", "1/2", "algebraic-type", "--max-order", "7")
    assert code == 0
    assert doc["result"]["verdict"] == "NoWitnessUpTo(7)"


def test_malformed_flag(capsys):
    code, doc, out = invoke(capsys, "spectral-curve", "--bogus", "3")
    assert code == 1 and doc is None
    assert "usage" in out.err


def test_missing_required_field():
    with pytest.raises(UsageError):
        RunConfig("commutant find", {"m": "1"}, {}, {}, 0, 40, {}, None).validate()
    with pytest.raises(UsageError):
        config_from_args(["commutant", "find", "--m", "1"])


def test_float_rationals_rejected(capsys):
    code, _, _ = invoke(capsys, "spectral-curve", "--m", "0.5")
    assert code == 1


def test_verification_failure_exit(capsys):
    code, doc, _ = invoke(capsys, "lame", "bethe", "--m", "1", "--tol", "pi=0")
    assert code == 2 and doc["status"] == "verification_failed"


@pytest.mark.parametrize("argv", [
    ["wp-series", "--trunc", "12"],
    ["lattice-invariants", "--omega1", "1,0", "--omega2", "0.2,1.1"],
    ["op", "commutator", "--m", "1", "--expr", "D^2 - 2*wp", "--expr2", "D^3 - 3*wp*D - 3/2*wp'"],
    ["op", "adjoint", "--expr", "D^3 + wp*D"],
    ["op", "eval", "--ring", "series", "--trunc", "8", "--expr", "D*u - u*D"],
    ["commutant", "find", "--m", "1", "--order", "3"],
    ["lame", "qm", "--m", "2"],
    ["lame", "bethe", "--m", "1", "--seed", "2"],
    ["lame", "verify", "--m", "1", "--seed", "0"],
    ["cm", "build", "--n", "3", "--m", "1"],
    ["cm", "integral", "--n", "2", "--m", "1", "--order", "2"],
    ["cm", "commute-check", "--n", "2", "--m", "1", "--samples", "20"],
    ["cm", "bethe", "--n", "2", "--m", "1"],
    ["monodromy", "group", "--m", "1", "--lambda", "1/3"],
])
def test_subcommands_emit_valid_documents(capsys, argv):
    code, doc, _ = invoke(capsys, *argv)
    assert code == 0, doc
    assert doc["command"] == " ".join(a for a in argv[:2] if not a.startswith("-")).strip()
    assert doc["config"]["seed"] is not None


def test_commutant_not_found_is_a_result(capsys):
    code, doc, _ = invoke(capsys, "commutant", "find", "--m", "3/2", "--order", "3")
    assert code == 0 and doc["result"]["found"] is False


def test_reruns_are_byte_identical():
    argv = [sys.executable, "-m", "qcis", "lame", "bethe", "--m", "2", "--seed", "4"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and a


def test_trunc_environment_variable(monkeypatch, capsys):
    monkeypatch.setenv("QCIS_TRUNC", "9")
    code, doc, _ = invoke(capsys, "wp-series")
    assert code == 0 and doc["config"]["trunc"] == 9
    code, doc, _ = invoke(capsys, "wp-series", "--trunc", "11")
    assert doc["config"]["trunc"] == 11


def test_output_file(tmp_path, capsys):
    out = tmp_path / "doc.json"
    code = main(["spectral-curve", "--m", "1", "--output", str(out)])
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), SCHEMA)


def test_run_returns_status_and_document():
    cfg = config_from_args(["spectral-curve", "--m", "2"])
    status, doc = run(cfg)
    assert status == 0 and len(doc["result"]["P"]["coefficients"]) == 6
