import csv
import json

import pytest

from grovernoise.cli import main, parse_qubits


def _lines(capsys):
    out = capsys.readouterr().out
    return [json.loads(line) for line in out.splitlines() if line.strip()]


def test_parse_qubits():
    assert parse_qubits("4") == [4]
    assert parse_qubits("4,6,8") == [4, 6, 8]
    assert parse_qubits("4:6") == [4, 5, 6]


def test_run_prints_distribution(capsys):
    assert main(["run", "--algo", "sga", "--qubits", "2"]) == 0
    [dist] = _lines(capsys)
    assert dist == {"target": "11", "shots": 0, "probs": {"11": 1.0}}


def test_run_with_noise_writes_json(tmp_path, capsys):
    code = main(["run", "--qubits", "3", "--error", "dep", "--param", "0.01",
                 "--backend", "trajectory", "--shots", "400", "--seed", "2", "--out", str(tmp_path)])
    assert code == 0
    [dist] = _lines(capsys)
    assert dist["shots"] == 400
    assert json.loads((tmp_path / "distribution.json").read_text()) == dist
    assert sum(dist["probs"].values()) == pytest.approx(1.0)


def test_run_thermal_and_config(tmp_path, capsys):
    assert main(["run", "--qubits", "3", "--error", "thermal", "--t1", "50", "--t2", "40"]) == 0
    [dist] = _lines(capsys)
    assert max(dist["probs"], key=dist["probs"].get) == "111"
    cfg = tmp_path / "lab.yaml"
    cfg.write_text("grover: {algorithm: sgaa, n_qubits: 3, target: '010'}\n"
                   "noise: {rules: [{family: pd, param: 0.01}]}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    [dist] = _lines(capsys)
    assert dist["target"] == "010"
    assert max(dist["probs"], key=dist["probs"].get) == "010"


def test_run_argument_errors(capsys):
    assert main(["run", "--qubits", "3", "--error", "dep"]) == 2
    assert "--param" in capsys.readouterr().err
    assert main(["run", "--qubits", "3", "--error", "thermal", "--t1", "10", "--t2", "30"]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--algo", "nope"])


def test_threshold_writes_csv(tmp_path, capsys):
    code = main(["threshold", "--algo", "sga", "--qubits", "3", "--error", "dep", "--error", "pd",
                 "--grid", "1e-4:1:9", "--out", str(tmp_path)])
    assert code == 0
    rows = _lines(capsys)
    assert [r["error_type"] for r in rows] == ["dep", "pd"]
    with open(tmp_path / "thresholds.csv", newline="") as fh:
        table = list(csv.DictReader(fh))
    assert [r["error_type"] for r in table] == ["dep", "pd"]
    assert float(table[0]["threshold"]) == pytest.approx(rows[0]["threshold"])
    assert (tmp_path / "threshold_samples.csv").exists()


def test_threshold_unbracketed(capsys):
    assert main(["threshold", "--qubits", "3", "--error", "bf", "--grid", "1e-8:1e-6:4"]) == 2
    assert "upper" in capsys.readouterr().err


def test_threshold_rejects_thermal(capsys):
    assert main(["threshold", "--qubits", "3", "--error", "thermal"]) == 2


def test_relax_scan(tmp_path, capsys):
    code = main(["relax-scan", "--qubits", "3", "--t1-grid", "1:100:5", "--t2-grid", "1:100:5",
                 "--out", str(tmp_path)])
    assert code == 0
    rows = _lines(capsys)
    with open(tmp_path / "relaxation.csv", newline="") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == len(rows)
    assert all(2.5 <= r["selectivity"] <= 3.5 for r in rows)


def test_fit_from_points_and_extrapolate(tmp_path, capsys):
    assert main(["fit", "--points", "3:95,4:322,6:2418", "--out", str(tmp_path)]) == 0
    [fit] = _lines(capsys)
    assert fit["model"] == "exponential" and fit["b"] == pytest.approx(1.07, abs=0.01)
    assert main(["extrapolate", "--fit", str(tmp_path / "fit.json"), "--qubits", "6"]) == 0
    [row] = _lines(capsys)
    assert row["value"] == pytest.approx(fit["a"] * 2.718281828459045 ** (6 * fit["b"]))


def test_fit_from_csv(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text("algorithm,n,error_type,threshold,target_S,shots,seed\n"
                    "sga,4,dep,0.01,3.0,20000,0\nsga,6,dep,0.0015,3.0,20000,0\n"
                    "sga,8,dep,0.0002,3.0,20000,0\nsga,8,bf,0.9,3.0,20000,0\n")
    assert main(["fit", "--input", str(path), "--where", "error_type=dep"]) == 0
    [fit] = _lines(capsys)
    assert fit["b"] < 0 and fit["r2"] > 0.99


def test_fit_gate_metric(capsys):
    assert main(["fit", "--metric", "gates", "--algo", "sga", "--qubits", "3:6"]) == 0
    [fit] = _lines(capsys)
    assert 0.9 <= fit["b"] <= 1.2


def test_extrapolate_inline(capsys):
    args = ["extrapolate", "--model", "power_exponential", "--a", "1.2761", "--b", "2.8401",
            "--c", "0.3436", "--qubits", "15"]
    assert main(args) == 0
    [row] = _lines(capsys)
    assert row["value"] == pytest.approx(4.84e5, rel=0.05)
    assert main(["extrapolate", "--qubits", "15"]) == 2


def test_report_from_config(tmp_path, capsys):
    cfg = tmp_path / "lab.yaml"
    cfg.write_text(
        "grover: {algorithm: sga, n_qubits: 3}\n"
        "thresholds:\n  - {algo: sga, qubits: [3, 4, 5], errors: [dep], grid: '1e-4:1:9'}\n"
        "relaxation:\n  - {algo: sga, qubits: 3, t1_grid: '1:100:5', t2_grid: '1:100:5'}\n")
    out = tmp_path / "out"
    assert main(["report", "--config", str(cfg), "--out", str(out)]) == 0
    written = capsys.readouterr().out.split()
    names = {p.rsplit("/", 1)[-1] for p in written}
    assert {"distribution.json", "thresholds.csv", "threshold_samples.csv", "relaxation.csv",
            "fit_sga_dep.json"} <= names
    fit = json.loads((out / "fit_sga_dep.json").read_text())
    assert fit["b"] < 0


def test_threshold_csv_is_byte_identical(tmp_path):
    args = ["threshold", "--qubits", "3", "--error", "ad", "--grid", "1e-4:1:9",
            "--backend", "trajectory", "--shots", "2000", "--seed", "11"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("thresholds.csv", "threshold_samples.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
