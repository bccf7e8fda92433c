import json
import logging
import os

import pytest

import config
from backend import init_package
from backend.errors import InvalidArgument, ParseError
from backend.instance_loader import load_instance_file, parse_instance
from backend.run_manager import RunManager
from backend.settings_manager import DEFAULT_SETTINGS, SettingsManager
from main import main
from tests.helpers import COIN, STICKY

pytestmark = pytest.mark.usefixtures("isolated_dirs")


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    report = json.loads(captured.out) if code == 0 else None
    return code, report, captured.err


def test_analyze_instance_a(capsys, instance_a_file):
    code, report, _ = _run(capsys, "analyze", instance_a_file)
    assert code == 0
    outputs = report["outputs"]
    assert outputs["lattice"]["kind"] == "Lattice"
    assert outputs["lattice"]["h"] == "2"
    assert outputs["variance"]["verdict"] == "PositiveCertified"
    assert outputs["s_ell2"] == pytest.approx(1.0)
    assert outputs["variance"]["lower_bound"] == pytest.approx(0.25)
    assert report["digest"] == load_instance_file(instance_a_file).digest


def test_analyze_writes_a_report_when_asked(capsys, instance_a_file, tmp_path):
    out = tmp_path / "analysis"
    code, report, _ = _run(capsys, "analyze", instance_a_file, "--out", str(out), "--k-max", "5")
    assert code == 0
    assert (out / "report.json").exists()
    assert report["flags"]["k_max"] == 5
    assert set(report["outputs"]["mixing"]["delta"]) == {str(k) for k in range(1, 6)}


def test_malformed_row_names_its_location(capsys, write_instance):
    path = write_instance({"chain": {"transition": [[0.5, 0.5], [0.5]]},
                           "observable": {"ell": 1, "values": [-1, 1]}})
    code, _, err = _run(capsys, "analyze", path)
    assert code == 2
    assert "chain.transition[1]" in err
    assert "ParseError" in err


def test_non_stochastic_chain_exits_with_validation_code(capsys, write_instance):
    path = write_instance({"chain": {"transition": [[0.5, 0.6], [0.5, 0.5]]},
                           "observable": {"ell": 1, "values": [-1, 1]}})
    code, _, err = _run(capsys, "analyze", path)
    assert code == 2
    assert "NonStochastic" in err


def test_missing_file_is_a_parse_error(capsys, tmp_path):
    code, _, err = _run(capsys, "analyze", str(tmp_path / "nope.json"))
    assert code == 2
    assert "cannot read instance file" in err


def test_zero_observable_is_degenerate(capsys, write_instance):
    path = write_instance({"chain": {"transition": STICKY}, "observable": {"ell": 2, "values": [0, 0, 0, 0]}})
    code, report, _ = _run(capsys, "analyze", path)
    assert code == 0
    assert report["outputs"]["variance"]["verdict"] == "DegenerateFEllZero"
    assert report["outputs"]["reduced_ell"] == 1


def _simulate(capsys, path, out, workers):
    code, report, _ = _run(capsys, "simulate", path, "--horizon", "16", "--samples", "3000",
                           "--seed", "5", "--workers", str(workers), "--out", str(out))
    assert code == 0
    return report


def test_simulate_is_reproducible_across_worker_counts(capsys, instance_a_file, tmp_path):
    first = _simulate(capsys, instance_a_file, tmp_path / "one", 1)
    second = _simulate(capsys, instance_a_file, tmp_path / "eight", 8)
    for name in ("distribution.csv", "covariance.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "eight" / name).read_bytes()
    assert first["seeds"] == {"seed": 5}
    assert first["outputs"]["support_on_lattice"] is True
    assert first["outputs"]["ks_statistic"] == second["outputs"]["ks_statistic"]
    header = (tmp_path / "one" / "covariance.csv").read_text().splitlines()[0]
    assert header == "i,j,C,C_stderr,D,D_stderr"


SAMPLED_RUNS = {
    "llt": (["--horizon", "16"], ("llt.csv",)),
    "cf-scan": (["--mode", "monte_carlo", "--theta-grid", "0.2,0.5,1.0", "--n-grid", "2,4"],
                ("cf.csv", "contraction.csv")),
}


@pytest.mark.parametrize("command", sorted(SAMPLED_RUNS))
def test_sampled_commands_do_not_depend_on_worker_count(capsys, instance_a_file, tmp_path, command):
    flags, files = SAMPLED_RUNS[command]
    for workers in (1, 8):
        code, report, _ = _run(capsys, command, instance_a_file, *flags, "--samples", "5000", "--seed", "5",
                               "--workers", str(workers), "--out", str(tmp_path / f"w{workers}"))
        assert code == 0
        assert report["seeds"] == {"seed": 5}
    for name in files:
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w8" / name).read_bytes()


def test_simulate_reads_defaults_from_the_instance(capsys, write_instance, tmp_path):
    path = write_instance({"chain": {"transition": COIN},
                           "observable": {"ell": 1, "values": [-1, 1]},
                           "defaults": {"seed": 3, "samples": 500, "horizon": 8}})
    code, report, _ = _run(capsys, "simulate", path, "--workers", "1", "--out", str(tmp_path / "sim"))
    assert code == 0
    assert report["outputs"]["N"] == 8
    assert report["outputs"]["M"] == 500
    assert report["seeds"] == {"seed": 3}


def test_zero_samples_is_a_usage_error(capsys, instance_a_file):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", instance_a_file, "--samples", "0"])
    assert exc.value.code == 2


def test_llt_on_kind_other_is_a_precondition_failure(capsys, write_instance):
    path = write_instance({"chain": {"transition": COIN}, "observable": {"ell": 2, "values": [1, -1, -1, 1]}})
    code, _, err = _run(capsys, "llt", path, "--horizon", "8", "--samples", "100")
    assert code == 3
    assert "KindOther" in err


def test_llt_without_positive_variance_is_a_precondition_failure(capsys, write_instance):
    path = write_instance({"chain": {"transition": [[0, 1], [1, 0]], "stationary": [0.5, 0.5]},
                           "observable": {"ell": 1, "values": [-1, 1]}})
    code, _, err = _run(capsys, "llt", path, "--horizon", "8", "--samples", "100")
    assert code == 3
    assert "DegenerateVariance" in err


def test_llt_writes_its_table(capsys, instance_a_file, tmp_path):
    out = tmp_path / "llt"
    code, report, _ = _run(capsys, "llt", instance_a_file, "--horizon", "16", "--samples", "4000",
                           "--seed", "1", "--workers", "2", "--sigma2", "3", "--out", str(out))
    assert code == 0
    assert report["outputs"]["kind"] == "Lattice"
    assert report["outputs"]["sigma2_source"] == "flag"
    lines = (out / "llt.csv").read_text().splitlines()
    assert lines[0] == "u,L,R,stderr"
    assert len(lines) - 1 == report["outputs"]["points"]


def test_cf_scan_exact(capsys, instance_a_file, tmp_path):
    out = tmp_path / "cf"
    code, report, _ = _run(capsys, "cf-scan", instance_a_file, "--theta-grid", "0.05,0.1,0.5,1.0",
                           "--n-grid", "2,4,6", "--out", str(out))
    assert code == 0
    outputs = report["outputs"]
    assert outputs["support_on_lattice"] is True
    assert outputs["scan"]["mode"] == "exact"
    assert outputs["contraction"]["r_fit"] > 0
    assert len((out / "cf.csv").read_text().splitlines()) == 1 + 3 * 4
    assert len((out / "contraction.csv").read_text().splitlines()) == 1 + 4 * 2


def test_cf_scan_without_positivity_window(capsys, write_instance, tmp_path):
    path = write_instance({"chain": {"transition": [[0, 1], [1, 0]], "stationary": ["1/2", "1/2"]},
                           "observable": {"ell": 1, "values": [-1, 1], "exact_values": ["-1", "1"]}})
    code, report, _ = _run(capsys, "cf-scan", path, "--theta-grid", "0.5,1.0", "--n-grid", "1:3",
                           "--out", str(tmp_path / "cf"))
    assert code == 0
    assert "unavailable" in report["outputs"]["contraction"]


def test_step_budget_exits_with_budget_code(capsys, instance_a_file, monkeypatch):
    monkeypatch.setattr(config, "SIM_STEP_BUDGET", 100)
    code, _, err = _run(capsys, "simulate", instance_a_file, "--horizon", "16", "--samples", "100")
    assert code == 4
    assert "BudgetExceeded" in err


def test_enumeration_cap_exits_with_budget_code(capsys, instance_a_file, monkeypatch):
    monkeypatch.setattr(config, "MAX_ENUM", 8)
    code, _, err = _run(capsys, "cf-scan", instance_a_file, "--theta-grid", "0.5", "--n-grid", "2,3,4")
    assert code == 4
    assert "CapExceeded" in err


def test_audit_log_records_each_run(capsys, instance_a_file, isolated_dirs):
    _run(capsys, "analyze", instance_a_file)
    log = (isolated_dirs / "logs" / "runs.log").read_text()
    assert "START analyze" in log
    assert "EXIT analyze - 0" in log


def test_settings_fall_back_to_defaults(tmp_path):
    manager = SettingsManager(str(tmp_path / "missing.json"))
    assert manager.get_all_settings() == DEFAULT_SETTINGS
    assert manager.get_setting("simulation.samples") == 100000
    assert manager.get_setting("simulation.nothing", 7) == 7


def test_settings_merge_partial_sections(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"llt": {"horizon": 64}}))
    manager = SettingsManager(str(path))
    assert manager.get_setting("llt.horizon") == 64
    assert manager.get_setting("llt.samples") == DEFAULT_SETTINGS["llt"]["samples"]


def test_digest_ignores_key_order():
    a = {"chain": {"transition": COIN}, "observable": {"ell": 1, "values": [-1, 1]}}
    b = {"observable": {"values": [-1, 1], "ell": 1}, "chain": {"transition": COIN}}
    assert parse_instance(a).digest == parse_instance(b).digest


def test_invalid_json_reports_its_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"chain": \n  {"transition": [[1, 0]],}\n}')
    with pytest.raises(ParseError, match="line 2"):
        load_instance_file(str(path))


def test_unknown_default_keys_rejected():
    raw = {"chain": {"transition": COIN}, "observable": {"ell": 1, "values": [-1, 1]}, "defaults": {"sead": 1}}
    with pytest.raises(ParseError, match="defaults"):
        parse_instance(raw)


def test_results_default_under_the_results_dir(capsys, instance_a_file):
    code, report, _ = _run(capsys, "simulate", instance_a_file, "--horizon", "4", "--samples", "50",
                           "--workers", "1")
    assert code == 0
    assert report["files"][0].startswith(config.RESULTS_DIR)
    assert os.path.exists(report["files"][0])


def test_analyze_reports_the_raw_second_moment(capsys, write_instance):
    # F = (0, 2) on a fair coin: mean 1, E F^2 = 2, centered mean square 1
    path = write_instance({"chain": {"transition": COIN}, "observable": {"ell": 1, "values": [0, 2]}})
    code, report, _ = _run(capsys, "analyze", path)
    assert code == 0
    outputs = report["outputs"]
    assert outputs["F_bar"] == pytest.approx(1.0)
    assert outputs["b2"] == pytest.approx(2.0)
    assert outputs["centered_mean_square"] == pytest.approx(1.0)


def test_library_runs_validate_their_sampling_request(instance_a_file, tmp_path):
    manager = RunManager(SettingsManager(str(tmp_path / "missing.json")))
    with pytest.raises(InvalidArgument, match="horizon"):
        manager.cmd_simulate(instance_a_file, horizon=0, samples=10, seed=1, workers=1)
    with pytest.raises(InvalidArgument, match="seed"):
        manager.cmd_simulate(instance_a_file, horizon=4, samples=10, seed=-1, workers=1)


def test_init_creates_the_results_dir():
    init_package()
    assert os.path.isdir(config.RESULTS_DIR)


def test_repeated_init_closes_the_dedicated_log_files():
    init_package()
    old = list(logging.getLogger("run.audit").handlers)
    init_package()
    assert all(h.stream is None for h in old)
    assert logging.getLogger("run.audit").handlers[0] not in old
