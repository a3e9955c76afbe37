import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgap.cli import SCAN_COLUMNS, RunConfig, UsageError, main

G = "gaussian:amp=-5,range=1"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_tc_record(capsys):
    code, out, _ = run(["tc", "--potential", G, "--mu", "1", "--lambda", "0.3"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["command"] == "tc"
    assert {"tc", "bracket", "channel"} <= set(rec["outputs"])
    assert rec["outputs"]["tc"]["status"] == "converged"
    assert rec["outputs"]["tc"]["value"] > 0
    assert rec["config"]["potential"] == G and rec["config"]["lambda"] == 0.3
    assert {"timestamp", "wall_time_s", "versions"} <= set(rec["meta"])


def test_every_output_is_annotated(capsys):
    code, out, _ = run(["bmu", "--potential", G, "--mu", "1", "--lambda", "0.3"], capsys)
    assert code == 0
    for v in json.loads(out)["outputs"].values():
        assert set(v) == {"value", "status"}


def test_emu_table(capsys, tmp_path):
    path = tmp_path / "emu.csv"
    code, out, _ = run(["emu", "--potential", G, "--mu", "1", "--ellmax", "8",
                        "--csv", str(path)], capsys)
    assert code == 0
    rec = json.loads(out)
    chans = rec["outputs"]["channels"]["value"]
    assert [c["ell"] for c in chans] == list(range(9))
    assert rec["outputs"]["argmin_ell"]["value"] == 0
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["ell", "e"] and len(rows) == 10


def test_negative_mu_is_usage_error(capsys):
    code, _, err = run(["tc", "--potential", G, "--mu", "-1", "--lambda", "0.3"], capsys)
    assert code == 1 and "mu must be positive" in err


def test_missing_key_named(capsys):
    code, _, err = run(["tc", "--potential", G, "--lambda", "0.3"], capsys)
    assert code == 1 and "'mu'" in err


def test_bad_potential_named(capsys):
    code, _, err = run(["tc", "--potential", "gaussian:amp=x", "--mu", "1", "--lambda", "1"],
                       capsys)
    assert code == 1 and "potential" in err


def test_unknown_flag_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tc", "--bogus", "1"])
    assert exc.value.code == 1


def test_unknown_verify_suite_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "medium"])
    assert exc.value.code == 1


def test_unsupported_regime_exit_1(capsys):
    code, _, err = run(["bmu", "--potential", "gaussian:amp=2,range=1", "--mu", "1",
                        "--lambda", "0.3"], capsys)
    assert code == 1 and "only the constant-eigenfunction case" in err


def test_nonconverged_gap_exit_2(capsys):
    code, out, _ = run(["gap", "--potential", G, "--mu", "1", "--lambda", "0.5",
                        "--max-iter", "2"], capsys)
    assert code == 2
    assert json.loads(out)["outputs"]["delta_fermi"]["status"] == "not-converged"


def test_gap_csv_and_out_file(capsys, tmp_path):
    out_path = tmp_path / "rec" / "gap.json"
    csv_path = tmp_path / "gap.csv"
    code, out, _ = run(["gap", "--potential", G, "--mu", "1", "--lambda", "0.5",
                        "--out", str(out_path), "--csv", str(csv_path)], capsys)
    assert code == 0 and out == ""
    rec = json.loads(out_path.read_text())
    assert rec["outputs"]["xi"]["value"] <= rec["outputs"]["delta_fermi"]["value"]
    header = next(csv.reader(csv_path.open()))
    assert header == ["p", "delta", "alpha", "gamma"]


def test_mmu_and_free_energy(capsys):
    code, out, _ = run(["mmu", "--mu", "1", "-T", "20"], capsys)
    assert code == 0 and json.loads(out)["outputs"]["m_mu"]["value"] == 0.0
    code, out, _ = run(["free-energy", "--potential", G, "--mu", "1", "--lambda", "0.5",
                        "-T", "0.05"], capsys)
    assert code == 0
    assert json.loads(out)["outputs"]["difference"]["value"] < 0


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\npotential = {G}\nmu = 4\nlambda = 0.3\n")
    code, out, _ = run(["mmu", "--config", str(cfg), "--mu", "1", "-T", "1e-3"], capsys)
    assert code == 0
    assert json.loads(out)["config"]["mu"] == 1.0


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("mu = 1\nfoo = 2\n")
    code, _, err = run(["mmu", "--config", str(cfg), "-T", "0.1"], capsys)
    assert code == 1 and "'foo'" in err


def test_config_round_trip():
    text = "lambda_ladder = 0.6, 0.3,0.15\nmu=1\npotential=gaussian:amp=-5,range=1\njobs=2\n"
    cfg = RunConfig.parse(text)
    norm = cfg.emit()
    assert RunConfig.parse(norm).emit() == norm
    assert norm == ("jobs=2\nlambda_ladder=0.59999999999999998,0.29999999999999999,"
                    "0.14999999999999999\nmu=1\npotential=gaussian:amp=-5,range=1\n")


def test_config_rejects_bad_values():
    with pytest.raises(UsageError):
        RunConfig.parse("mu = abc")
    with pytest.raises(UsageError):
        RunConfig.parse("just text")


positive = st.floats(1e-6, 1e6, allow_nan=False, allow_infinity=False)


@given(mu=positive, lam=positive, T=st.one_of(st.none(), positive),
       ladder=st.lists(positive, max_size=4), ellmax=st.integers(0, 32))
@settings(max_examples=100, deadline=None)
def test_config_round_trip_property(mu, lam, T, ladder, ellmax):
    cfg = RunConfig(potential=G, mu=mu, lam=lam, temperature=T, lambda_ladder=ladder,
                    ellmax=ellmax)
    again = RunConfig.parse(cfg.emit())
    assert again == cfg
    assert again.emit() == cfg.emit()


def _scan(capsys, out_dir, lams, extra=()):
    return run(["scan", "--potential", G, "--mu", "1", "--lambda-ladder", lams,
                "--out-dir", str(out_dir), *extra], capsys)


def test_scan_budget_exceeded(capsys, tmp_path):
    out_dir = tmp_path / "scan"
    code, _, err = _scan(capsys, out_dir, "0.6,0.5,0.4", ("--budget", "2"))
    assert code == 1 and "budget" in err
    assert not out_dir.exists()


def test_scan_single_point(capsys, tmp_path):
    code, out, _ = _scan(capsys, tmp_path / "one", "0.6")
    assert code == 0
    rows = list(csv.reader((tmp_path / "one" / "scan.csv").open()))
    assert rows[0] == list(SCAN_COLUMNS) and len(rows) == 2
    summary = json.loads((tmp_path / "one" / "summary.json").read_text())
    assert "extrapolation" not in summary


def test_scan_resume_is_byte_identical(capsys, tmp_path):
    out_dir = tmp_path / "ladder"
    code, out, _ = _scan(capsys, out_dir, "0.6,0.5,0.4", ("--jobs", "3"))
    assert code == 0
    first = (out_dir / "scan.csv").read_bytes()
    summary = json.loads((out_dir / "summary.json").read_text())
    assert set(summary["extrapolation"]["mu=1"]) == {"drift_tc", "drift_xi", "ratio"}
    (out_dir / "points" / "00001.json").unlink()
    code, _, _ = _scan(capsys, out_dir, "0.6,0.5,0.4")
    assert code == 0
    assert (out_dir / "scan.csv").read_bytes() == first
    rows = list(csv.DictReader((out_dir / "scan.csv").open()))
    assert [float(r["lambda"]) for r in rows] == [0.6, 0.5, 0.4]
    assert all(float(r["tc"]) > 0 and float(r["xi"]) > 0 for r in rows)
