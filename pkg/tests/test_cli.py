"""CLI surface: exit codes, artifacts, determinism, sweeps, fit."""

import json
import subprocess
import sys

import pytest

from gibbsmpo.cli import (
    EXIT_BUDGET,
    EXIT_CAP,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VERIFY,
    main,
)
from gibbsmpo.mpo import load_mpo


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def demo_config(n=4, **run):
    base_run = {"mode": "thermal", "beta_steps": 2, "epsilon": 0.01}
    base_run.update(run)
    return {"format": 1,
            "model": {"name": "power_law_ising", "n": n, "alpha": 3.0},
            "run": base_run}


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def test_build_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path, demo_config())
    out = tmp_path / "out"
    assert main(["build", "--config", cfg, "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["format"] == 1
    assert report["measured"]["p2"] <= 0.01
    mpo = load_mpo(out / "mbeta.mpo")
    assert mpo.n == 4
    assert list(mpo.bond_profile) == report["bond_profile"]


def test_build_reports_are_deterministic(tmp_path):
    cfg = write_config(tmp_path, demo_config(n=6, seed=7))
    reports = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["build", "--config", cfg, "--out", str(out)]) == EXIT_OK
        data = json.loads((out / "report.json").read_text())
        data.pop("timings")
        reports.append(json.dumps(data, sort_keys=True))
    assert reports[0] == reports[1]
    assert (tmp_path / "a" / "mbeta.mpo").read_bytes() \
        == (tmp_path / "b" / "mbeta.mpo").read_bytes()


def test_build_real_time_mode(tmp_path):
    payload = {"format": 1,
               "model": {"name": "power_law_ising", "n": 4, "alpha": 3.0},
               "run": {"mode": "real_time", "time": 0.25, "epsilon": 0.01}}
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "rt"
    assert main(["build", "--config", cfg, "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["budget"]["real_time"] is True
    assert report["measured"]["pinf"] <= 0.01


def test_build_budget_error_exit_code(tmp_path):
    payload = demo_config()
    payload["run"] = {"mode": "thermal", "beta": 10.0, "epsilon": 0.01}
    cfg = write_config(tmp_path, payload, "over.json")
    assert main(["build", "--config", cfg, "--out", str(tmp_path / "x")]) \
        == EXIT_BUDGET


def test_build_config_error_exit_codes(tmp_path):
    bad = demo_config()
    bad["run"]["mystery"] = 1
    cfg = write_config(tmp_path, bad, "bad.json")
    assert main(["build", "--config", cfg]) == EXIT_CONFIG
    missing = {"format": 1, "model": {"name": "power_law_ising", "n": 4,
                                      "alpha": 3.0}}
    cfg2 = write_config(tmp_path, missing, "missing.json")
    assert main(["build", "--config", cfg2]) == EXIT_CONFIG
    cfg3 = tmp_path / "broken.json"
    cfg3.write_text("{not json")
    assert main(["build", "--config", str(cfg3)]) == EXIT_CONFIG


def test_build_bad_flag_values_exit_config(tmp_path):
    cfg = write_config(tmp_path, demo_config())
    assert main(["build", "--config", cfg, "--compress", "squash=5"]) \
        == EXIT_CONFIG
    assert main(["build", "--config", cfg, "--pnorms", "1,zero"]) \
        == EXIT_CONFIG
    assert main(["build", "--config", cfg, "--pnorms", "0.5"]) == EXIT_CONFIG


def test_build_cap_error_exit_code(tmp_path):
    cfg = write_config(tmp_path, demo_config(
        n=6, engine="mpo", max_bond=256, dense_cap=16))
    assert main(["build", "--config", cfg, "--out", str(tmp_path / "c")]) \
        == EXIT_CAP


def test_build_missed_target_exit_code(tmp_path):
    # an identity-only merge cascade at a tight target must miss and say so
    cfg = write_config(tmp_path, demo_config(
        n=6, beta_steps=8, epsilon=1e-6, override_order=0,
        two_local="off"))
    assert main(["build", "--config", cfg, "--out", str(tmp_path / "m")]) \
        == EXIT_VERIFY
    report = json.loads((tmp_path / "m" / "report.json").read_text())
    assert report["measured"]["p2"] > 1e-6
    assert report["certified"] is False


def test_build_flag_overrides(tmp_path):
    cfg = write_config(tmp_path, demo_config(n=6))
    out = tmp_path / "flags"
    assert main(["build", "--config", cfg, "--out", str(out),
                 "--compress", "maxbond=16", "--pnorms", "2,inf"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["policy"] == "maxbond=16"
    assert set(report["measured"]) == {"p2", "pinf", "trace"}


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_fast_suite_passes(tmp_path):
    out = tmp_path / "verify"
    assert main(["verify", "--fast", "--out", str(out)]) == EXIT_OK
    results = json.loads((out / "verify.json").read_text())["results"]
    by_name = {r["name"]: r["passed"] for r in results}
    assert by_name["forced_low_order"] is False  # honored as expected-fail
    assert all(ok for name, ok in by_name.items()
               if name != "forced_low_order")


def test_verify_expected_fail_marker(tmp_path):
    cfg = write_config(tmp_path, {
        "format": 1,
        "verify": {"checks": ["decoupled_identity", "forced_low_order"],
                   "expect_fail": ["forced_low_order"]}})
    assert main(["verify", "--config", cfg]) == EXIT_OK
    # marking a passing check as expect_fail must flip the exit status
    cfg2 = write_config(tmp_path, {
        "format": 1,
        "verify": {"checks": ["decoupled_identity"],
                   "expect_fail": ["decoupled_identity"]}}, "c2.json")
    assert main(["verify", "--config", cfg2]) == EXIT_VERIFY


def test_verify_unknown_check_rejected(tmp_path):
    cfg = write_config(tmp_path, {"format": 1,
                                  "verify": {"checks": ["nonexistent"]}})
    with pytest.raises(ValueError):
        main(["verify", "--config", cfg])


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def read_rows(path):
    return [json.loads(line) for line in open(path)]


def test_sweep_order_rows_within_bound(tmp_path):
    cfg = write_config(tmp_path, {
        "format": 1,
        "model": {"name": "power_law_ising", "n": 6, "alpha": 3.0},
        "sweep": {"kind": "order", "orders": [2, 4, 6]}})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out / "sweep.jsonl")
    assert len(rows) == 3
    assert all(r["within_bound"] for r in rows)
    assert all("runtime_s" in r for r in rows)


def test_sweep_epsilon_reports_fit(tmp_path):
    cfg = write_config(tmp_path, {
        "format": 1,
        "model": {"name": "power_law_ising", "n": 4, "alpha": 3.0},
        "sweep": {"kind": "epsilon", "epsilons": [1e-1, 1e-2, 1e-3],
                  "beta_steps": 2}})
    out = tmp_path / "swe"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out / "sweep.jsonl")
    fit_row = rows[-1]
    assert "polylog_exponent" in fit_row
    data_rows = [r for r in rows if "epsilon" in r]
    assert all(r["measured"]["p2"] <= r["epsilon"] for r in data_rows)
    ledgers = [r["ledger_log10"] for r in data_rows]
    assert ledgers == sorted(ledgers)  # tighter targets need larger ledgers


def test_sweep_steps_measured_below_prediction(tmp_path):
    cfg = write_config(tmp_path, {
        "format": 1,
        "model": {"name": "power_law_ising", "n": 4, "alpha": 3.0},
        "sweep": {"kind": "steps", "max_steps": 4, "epsilon": 0.01,
                  "two_local": "off"}})
    out = tmp_path / "sws"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out / "sweep.jsonl")
    assert len(rows) == 4
    for row in rows:
        assert not row.get("failed"), row
        assert row["measured"]["p2"] <= row["predicted"]


def test_sweep_unknown_kind(tmp_path):
    cfg = write_config(tmp_path, {
        "format": 1,
        "model": {"name": "power_law_ising", "n": 4, "alpha": 3.0},
        "sweep": {"kind": "banana"}})
    assert main(["sweep", "--config", cfg]) == EXIT_CONFIG


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def test_fit_prints_series(tmp_path, capsys):
    assert main(["fit", "--alpha", "3", "--epsilon", "1e-3"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["m"] == 28
    assert len(payload["weights"]) == 57


def test_fit_rejects_invalid(capsys):
    assert main(["fit", "--alpha", "3", "--epsilon", "1"]) == EXIT_CONFIG
    assert main(["fit", "--alpha", "1.0", "--epsilon", "1e-3"]) == EXIT_CONFIG


def test_fit_boundary_alpha_warns(tmp_path, capsys):
    with pytest.warns(UserWarning):
        code = main(["fit", "--alpha", "2.5", "--epsilon", "1e-2",
                     "--out", str(tmp_path / "series.json")])
    assert code == EXIT_OK
    saved = json.loads((tmp_path / "series.json").read_text())
    assert saved["alpha"] == 2.5


# ---------------------------------------------------------------------------
# bundled demo configs
# ---------------------------------------------------------------------------

def test_bundled_configs_are_valid():
    from pathlib import Path
    import warnings
    from gibbsmpo.cli import _load_config
    from gibbsmpo.model import spec_from_config
    cfg_dir = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(cfg_dir.glob("*.json"))
    assert len(paths) >= 6
    for path in paths:
        cfg = _load_config(str(path))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = spec_from_config(cfg["model"])
        assert spec.n >= 2


def test_bundled_demo_build_runs(tmp_path):
    from pathlib import Path
    cfg = Path(__file__).resolve().parents[1] / "configs" / "thermal_heisenberg_a3.json"
    out = tmp_path / "demo"
    assert main(["build", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["measured"]["pinf"] <= 0.01


# ---------------------------------------------------------------------------
# installed entry point
# ---------------------------------------------------------------------------

def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "gibbsmpo.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "build" in proc.stdout and "verify" in proc.stdout
