"""End-to-end checks of the bdclt tool: exit codes, schema validity, determinism."""

import json
import os
import subprocess
from pathlib import Path

import jsonschema
import pytest

BIN = os.environ.get("BDCLT_BIN", "bdclt")
ROOT = Path(__file__).resolve().parents[2]
SPECS = ROOT / "tools" / "specs"
SCHEMA = json.loads((ROOT / "schemas" / "report.schema.json").read_text())
VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def run(*args, threads=None, check_code=None):
    env = dict(os.environ)
    if threads is not None:
        env["BD_CLT_THREADS"] = str(threads)
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, env=env)
    if check_code is not None:
        assert proc.returncode == check_code, proc.stderr
    return proc


def report(*args, code=0, threads=None):
    proc = run(*args, threads=threads, check_code=code)
    doc = json.loads(proc.stdout)
    VALIDATOR.validate(doc)
    return doc


SIM = ["--replicas", "400", "--steps", "2000", "--pilot-steps", "20000"]


@pytest.mark.parametrize(
    "spec,regime",
    [
        ("constant_third.json", "PositiveRecurrentWithGap"),
        ("lamperti_half.json", "PositiveRecurrentNoGap"),
        ("lamperti_critical.json", "Critical"),
        ("lamperti_null.json", "NullRecurrent"),
        ("table_example.json", "Unclassified"),
    ],
)
def test_classify(spec, regime):
    doc = report("classify", "--chain", SPECS / spec)
    assert doc["regime"] == regime
    if regime == "Unclassified":
        assert doc["reason"] and "evidence" in doc
    if regime == "NullRecurrent":
        assert doc["normalization"]["status"] == "divergent"


def test_malformed_spec_is_input_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    proc = run("classify", "--chain", bad, check_code=2)
    assert proc.stdout == ""
    assert "bdclt" in proc.stderr
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"family": "cubic"}')
    run("classify", "--chain", unknown, check_code=2)
    run("classify", "--chain", tmp_path / "missing.json", check_code=2)


def test_invalid_chain_and_flags():
    run("classify", "--bogus", check_code=2)
    run("spectrum", "--chain", SPECS / "constant_third.json", "--sizes", "100,x", check_code=2)
    run("spectrum", "--chain", SPECS / "constant_third.json", "--sizes", "1000,100", check_code=2)
    run("spectrum", "--chain", SPECS / "constant_third.json", "--eps-gap", "-1", check_code=2)
    run("stationary", "--chain", SPECS / "lamperti_null.json", check_code=2)
    run("simulate", "--chain", SPECS / "constant_third.json", "--observable",
        SPECS / "indicator_zero.json", "--replicas", "0", check_code=2)


def test_bad_lamperti_parameters(tmp_path):
    spec = tmp_path / "c.json"
    spec.write_text('{"family": "lamperti", "c": 0.6, "alpha": 0.5}')
    proc = run("classify", "--chain", spec, check_code=2)
    assert proc.stderr


def test_stationary_json_and_csv():
    doc = report("stationary", "--chain", SPECS / "constant_third.json")
    assert abs(doc["Z"] - 4.0) < 1e-12
    assert abs(doc["pi"][0] - 0.25) < 1e-12
    assert doc["detailed_balance_residual"] <= 1e-12
    csv = run("stationary", "--chain", SPECS / "constant_third.json", "--truncation", "5",
              "--format", "csv", check_code=0).stdout.splitlines()
    assert csv[0] == "x,log_pi_tilde,pi"
    assert len(csv) == 7


@pytest.mark.parametrize(
    "spec,sizes,verdict",
    [
        ("constant_third.json", "40,500,1000,2000,4000", "GapLikely"),
        ("lamperti_half.json", "1000,10000,100000", "NoGapLikely"),
        ("constant_third.json", "1000", "Inconclusive"),
    ],
)
def test_spectrum_verdicts(spec, sizes, verdict):
    doc = report("spectrum", "--chain", SPECS / spec, "--sizes", sizes)
    assert doc["verdict"] == verdict
    raw = doc["lambda1_raw"]
    assert all(a <= b + 1e-12 for a, b in zip(raw, raw[1:]))


def test_spectrum_csv():
    lines = run("spectrum", "--chain", SPECS / "constant_third.json", "--sizes", "10,20",
                "--format", "csv", check_code=0).stdout.splitlines()
    assert lines[0] == "N,lambda1,lambda1_raw,witness,delta_running_sup"
    assert len(lines) == 3


def test_hminus_finite_and_divergent():
    compact = report("hminus", "--chain", SPECS / "lamperti_half.json", "--observable", SPECS / "compact.json")
    assert compact["verdict"] == "Finite"
    assert compact["sigma2"] > 0
    div = report("hminus", "--chain", SPECS / "lamperti_half.json", "--observable", SPECS / "sqrt_pi.json",
                 "--truncation", "20000")
    assert div["verdict"] == "Divergent"
    assert div["sigma2"] is None


def test_sigma2_indicator():
    doc = report("sigma2", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "indicator_zero.json")
    assert abs(doc["sigma2"] - 0.375) < 1e-9


def test_clt_agreement_on_gap_chain():
    doc = report("clt", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "indicator_zero.json",
                 "--replicas", "2000", "--steps", "5000")
    assert doc["certificate"]["verdict"] == "Finite"
    assert doc["agreement"]["agree"] is True
    assert doc["agreement"]["relative_error"] <= 0.05


def test_clt_zero_is_degenerate():
    doc = report("clt", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "zero.json", *SIM)
    assert doc["agreement"]["status"] == "degenerate"
    assert doc["simulation"]["degenerate"] is True


def test_clt_divergent_still_reports():
    proc = run("clt", "--chain", SPECS / "lamperti_half.json", "--observable", SPECS / "sqrt_pi.json", *SIM)
    assert proc.returncode in (0, 3)
    doc = json.loads(proc.stdout)
    VALIDATOR.validate(doc)
    assert doc["certificate"]["verdict"] == "Divergent"
    assert doc["agreement"]["status"] == "divergent"
    assert (proc.returncode == 3) == (doc["agreement"]["agree"] is False)


def test_simulate_determinism_and_replay(tmp_path):
    args = ["simulate", "--chain", SPECS / "lamperti_half.json", "--observable", SPECS / "compact.json",
            "--seed", "12345", *SIM]
    # Same manifest means the same --out path too.
    a = tmp_path / "a.json"
    run(*args, "--out", a, threads=1, check_code=0)
    first = a.read_bytes()
    run(*args, "--out", a, threads=3, check_code=0)
    assert a.read_bytes() == first
    VALIDATOR.validate(json.loads(a.read_text()))
    c = tmp_path / "c.json"
    run("replay", "--report", a, "--out", c, threads=2, check_code=0)
    assert a.read_bytes() == c.read_bytes()


def test_clt_replay_identical(tmp_path):
    first = tmp_path / "first.json"
    proc = run("clt", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "indicator_zero.json",
               "--seed", "7", *SIM, "--out", first, threads=4)
    again = tmp_path / "again.json"
    rerun = run("replay", "--report", first, "--out", again, threads=1)
    assert rerun.returncode == proc.returncode
    assert first.read_bytes() == again.read_bytes()


def test_replay_rejects_reports_without_manifest(tmp_path):
    bogus = tmp_path / "r.json"
    bogus.write_text('{"schema_version": "bdclt.report/1"}')
    run("replay", "--report", bogus, check_code=2)


def test_trajectory_dump(tmp_path):
    traj = tmp_path / "traj.csv"
    run("simulate", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "indicator_zero.json",
        "--replicas", "4", "--steps", "500", "--dump-trajectory", traj, check_code=0)
    rows = traj.read_text().splitlines()
    assert rows[0] == "n,X_n"
    xs = [int(r.split(",")[1]) for r in rows[1:]]
    assert len(xs) == 501
    assert all(abs(a - b) == 1 for a, b in zip(xs, xs[1:]))
    assert all(x >= 0 for x in xs)


def test_simulate_csv():
    lines = run("simulate", "--chain", SPECS / "constant_third.json", "--observable", SPECS / "indicator_zero.json",
                "--replicas", "10", "--steps", "40", "--ladder", "10,20,40", "--format", "csv",
                check_code=0).stdout.splitlines()
    assert lines[0] == "N,D2"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [10, 20, 40]
