import json
import pathlib
import subprocess
import sys

import pytest

from edgeworth_dp.cli import (CURVE_HEADER, EXIT_ACCOUNTING, EXIT_CONFIG, EXIT_FAILED, EXIT_OK,
                              PRESETS, ConfigError, fmt, main, parse_grid)

GOLDEN = pathlib.Path(__file__).parent / "golden"
CUSTOM = ["--n-samples", "10000", "--batch-size", "100", "--delta", "1e-5", "--m", "200"]
# Provenance entries that legitimately vary between machines.
_ENVIRONMENT_KEYS = ("python", "numpy", "scipy", "mc_backend")


def _run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _normalized(text: str) -> dict:
    data = json.loads(text)
    data.pop("created")
    for key in _ENVIRONMENT_KEYS:
        data["provenance"].pop(key)
    return data


# ---------------------------------------------------------------- parsing helpers

def test_parse_grid_forms():
    assert parse_grid("5:8:1", "epsilon") == [5.0, 6.0, 7.0, 8.0]
    assert parse_grid("0.1:0.3:0.1", "epsilon") == [0.1, 0.2, 0.3]
    assert parse_grid(8, "epsilon") == [8.0]
    assert parse_grid([1, 2], "epsilon") == [1.0, 2.0]
    assert parse_grid("2.5", "epsilon") == [2.5]


@pytest.mark.parametrize("text", ["1:2", "a:b:c", "3:1:1", "1:2:0", "x"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError) as info:
        parse_grid(text, "epsilon")
    assert info.value.field == "epsilon"


def test_six_significant_digits():
    assert fmt(0.123456789) == "0.123457"
    assert fmt(1234567.0) == "1.23457e+06"
    assert fmt(None) == ""


def test_presets():
    assert PRESETS == {"MNLI": (393000, 1e-6), "QNLI": (105000, 1e-6),
                       "QQP": (364000, 1e-6), "SST-2": (67000, 1e-5)}


# ---------------------------------------------------------------- golden files

def test_curve_golden(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, _, _ = _run(["curve", *CUSTOM, "--epsilon", "1:2:0.5", "--out", str(out)], capsys)
    assert code == EXIT_OK
    assert out.read_bytes() == (GOLDEN / "curve_custom.csv").read_bytes()


def test_curve_rows_and_ordering(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    _run(["curve", *CUSTOM, "--epsilon", "1:2:0.5", "--out", str(out)], capsys)
    lines = out.read_text().splitlines()
    assert lines[0] == CURVE_HEADER
    assert len(lines) == 4
    for line in lines[1:]:
        _, rdp, prv, ew = map(float, line.split(","))
        assert ew <= prv <= rdp


def test_calibrate_csv_golden(capsys):
    code, out, _ = _run(["calibrate", *CUSTOM, "--epsilon", "1", "--format", "csv"], capsys)
    assert code == EXIT_OK
    assert out == (GOLDEN / "calibrate_custom.csv").read_text()


def test_calibrate_json_golden(capsys):
    code, out, _ = _run(["calibrate", *CUSTOM, "--epsilon", "1"], capsys)
    assert code == EXIT_OK
    expected = json.loads((GOLDEN / "calibrate_custom.json").read_text())
    assert _normalized(out) == expected


def test_calibrate_echoes_rate(capsys):
    code, out, _ = _run(["calibrate", "--preset", "MNLI", "--m", "100", "--epsilon", "8",
                         "--accountant", "rdp"], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    (pop,) = report["config"]["populations"]
    assert f"{pop['q']:.12g}" == f"{2000 / 393000:.12g}"
    assert report["results"][0]["q"] == pop["q"]
    assert report["config"]["accountant"] == ["rdp"]


def test_calibrate_sweep_and_mapping(capsys):
    code, out, _ = _run(["calibrate", "--preset", "all", "--m", "MNLI=100,QNLI=100,QQP=100,SST-2=50",
                         "--accountant", "rdp", "--format", "csv"], capsys)
    assert code == EXIT_OK
    rows = out.splitlines()[1:]
    assert [r.split(",")[:2] for r in rows] == [["MNLI", "100"], ["QNLI", "100"],
                                                ["QQP", "100"], ["SST-2", "50"]]
    code, out, _ = _run(["calibrate", "--preset", "QNLI", "--m-sweep", "100:300:100",
                         "--accountant", "rdp", "--format", "csv"], capsys)
    assert code == EXIT_OK
    assert [r.split(",")[1] for r in out.splitlines()[1:]] == ["100", "200", "300"]


# ---------------------------------------------------------------- configuration and exit codes

def test_empty_accountant_list(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"accountants": [], "m": 100}))
    code, _, err = _run(["calibrate", "--config", str(cfg)], capsys)
    assert code == EXIT_CONFIG
    assert "accountant" in err


def test_unreachable_target_exit_code(capsys):
    code, _, err = _run(["calibrate", "--preset", "QNLI", "--m", "4000", "--epsilon", "0.01",
                         "--accountant", "rdp"], capsys)
    assert code == EXIT_ACCOUNTING
    assert "TargetUnreachable" in err


@pytest.mark.parametrize("argv,field", [
    (["calibrate", "--preset", "MNLI"], "m"),
    (["calibrate", "--preset", "MNLI", "--m", "10", "--m-sweep", "1:2:1"], "m_sweep"),
    (["calibrate", "--preset", "MNLI", "--m", "NOPE=3"], "m"),
    (["calibrate", "--preset", "MNLI", "--m", "-4"], "m"),
    (["calibrate", "--n-samples", "100", "--m", "10"], "delta"),
    (["calibrate", "--n-samples", "100", "--delta", "1e-5", "--m", "10"], "batch_size"),
    (["calibrate", "--preset", "MNLI", "--m", "10", "--delta", "2"], "delta"),
    (["curve", "--m", "10"], "out"),
    (["curve", "--preset", "MNLI", "--m-sweep", "10:20:10"], "m_sweep"),
    (["train-sim", "--m", "10", "--no-accounting"], "no_accounting"),
    (["train-sim", "--m", "10", "--epsilon", "1:2:1"], "epsilon"),
])
def test_config_errors_name_the_field(argv, field, capsys):
    code, _, err = _run(argv, capsys)
    assert code == EXIT_CONFIG
    assert f"field '{field}'" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "QNLI", "m": 100, "accountant": ["rdp"],
                               "epsilon": 4, "format": "csv"}))
    _, from_file, _ = _run(["calibrate", "--config", str(cfg)], capsys)
    assert from_file.splitlines()[1].startswith("QNLI,100,4,rdp,")
    _, overridden, _ = _run(["calibrate", "--config", str(cfg), "--epsilon", "6"], capsys)
    assert overridden.splitlines()[1].startswith("QNLI,100,6,rdp,")


@pytest.mark.parametrize("content", ["{not json", "[1, 2]", json.dumps({"bogus": 1})])
def test_bad_config_file(tmp_path, content, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    code, _, _ = _run(["calibrate", "--config", str(cfg)], capsys)
    assert code == EXIT_CONFIG


def test_missing_config_file(tmp_path, capsys):
    code, _, err = _run(["calibrate", "--config", str(tmp_path / "none.json")], capsys)
    assert code == EXIT_CONFIG and "config" in err


def test_unknown_flag_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["calibrate", "--bogus"])
    assert info.value.code == EXIT_CONFIG


# ---------------------------------------------------------------- determinism

@pytest.mark.parametrize("argv", [
    ["calibrate", *CUSTOM, "--epsilon", "1:2:1"],
    ["curve", *CUSTOM, "--epsilon", "1:2:1", "--format", "json"],
    ["train-sim", "--n-samples", "3000", "--batch-size", "100", "--m", "30", "--seed", "4"],
])
def test_repeated_runs_identical(argv, capsys):
    _, first, _ = _run(argv, capsys)
    _, second, _ = _run(argv, capsys)
    a, b = json.loads(first), json.loads(second)
    a.pop("created"), b.pop("created")
    assert a == b


def test_curve_files_per_preset(tmp_path, capsys):
    code, _, _ = _run(["curve", "--preset", "all", "--m", "50", "--epsilon", "8",
                       "--accountant", "rdp", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(f"{n}.csv" for n in PRESETS)
    row = (tmp_path / "MNLI.csv").read_text().splitlines()[1].split(",")
    assert row[2] == row[3] == ""  # accountants not requested stay empty


# ---------------------------------------------------------------- validate

SMALL_GRID = {"q": [1.0], "sigma": [1.0], "m": [1], "epsilon": [0.0, 0.5]}


def test_validate_small_grid(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"validation_grid": SMALL_GRID, "mc_samples": 200000}))
    code, out, _ = _run(["validate", "--config", str(cfg), "--format", "csv"], capsys)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "q,sigma,m,epsilon,accountant,delta_method,delta_mc,stderr,envelope,pass"
    assert len(lines) == 1 + 2 * 3
    assert all(line.endswith(",yes") for line in lines[1:])


def test_validate_detects_perturbed_edgeworth(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"validation_grid": SMALL_GRID, "mc_samples": 200000,
                               "accountant": ["ew"]}))
    code, out, err = _run(["validate", "--config", str(cfg), "--ew-sigma-perturbation", "0.05"],
                          capsys)
    assert code == EXIT_FAILED
    assert json.loads(out)["passed"] is False
    assert "validation failed" in err


# ---------------------------------------------------------------- train-sim

def test_train_sim_budget_and_metrics(capsys):
    code, out, _ = _run(["train-sim", "--n-samples", "3000", "--batch-size", "100", "--m", "30",
                         "--epsilon", "8", "--accountant", "rdp"], capsys)
    assert code == EXIT_OK
    report = json.loads(out)
    metrics = report["metrics"]
    assert metrics["spent"]["epsilon"] <= 8.0
    assert metrics["spent"]["method"] == "rdp"
    assert len(metrics["clip_fraction"]) == 30
    assert report["config"]["q"] == pytest.approx(100 / 3000)


def test_train_sim_noise_off_matches_baseline(capsys):
    argv = ["train-sim", "--n-samples", "3000", "--batch-size", "100", "--m", "30",
            "--sigma-override", "0", "--no-accounting", "--baseline"]
    code, out, _ = _run(argv, capsys)
    assert code == EXIT_OK
    metrics = json.loads(out)["metrics"]
    assert metrics["spent"] is None
    assert metrics["accuracy"] == metrics["nonprivate_accuracy"]


def test_train_sim_dataset_file(tmp_path, capsys):
    from edgeworth_dp.rgp import make_separable, save_dataset

    path = tmp_path / "data.txt"
    save_dataset(path, *make_separable(400, 3, seed=1))
    code, out, _ = _run(["train-sim", "--dataset", str(path), "--batch-size", "40", "--m", "5",
                         "--sigma-override", "1.0"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["config"]["n_samples"] == 400
    bad = tmp_path / "bad.txt"
    bad.write_text("oops\n")
    code, _, err = _run(["train-sim", "--dataset", str(bad), "--m", "5"], capsys)
    assert code == EXIT_CONFIG and "dataset" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "edgeworth_dp.cli", "calibrate", "--preset",
                           "SST-2", "--m", "50", "--accountant", "rdp", "--format", "csv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("preset,m,epsilon,accountant,sigma,achieved_epsilon\nSST-2,50,8,rdp,")
