import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grovernoise.errors import FitError, UnbracketedError, ValidationError
from grovernoise.grover import closed_form_success, config_for
from grovernoise.lab import (
    Distribution,
    FitResult,
    RelaxationPoint,
    ThresholdResult,
    default_relaxation_grid,
    export_relaxation,
    export_report,
    extrapolate,
    find_error_threshold,
    fit_scaling,
    load_config,
    log_grid,
    noise_for,
    parse_grid,
    relaxation_scan,
    run_shots,
    selectivity,
    selectivity_value,
    thermal_model,
)
from grovernoise.lab.experiment import parallel_map, resolve_backend, worker_count
from grovernoise.lab.report import ReportError


# ---------------------------------------------------------------------------
# selectivity
# ---------------------------------------------------------------------------

def test_selectivity_examples():
    assert selectivity_value(0.066, 0.076) == pytest.approx(-0.61, abs=0.005)
    assert selectivity_value(0.2, 0.2) == 0.0
    assert selectivity_value(0.5, 0.25) == pytest.approx(3.0103, abs=1e-4)


def test_selectivity_sentinels():
    assert selectivity_value(1.0, 0.0) == math.inf
    assert selectivity_value(0.0, 0.5) == -math.inf
    rep = selectivity({"00": 0.0, "01": 0.5, "10": 0.5}, "00")
    assert rep.S == -math.inf


def test_selectivity_ties_pick_smallest_bitstring():
    rep = selectivity({"00": 0.4, "01": 0.3, "10": 0.3}, "00")
    assert rep.P_hn == pytest.approx(0.3) and rep.hn_state == "01"


def test_selectivity_needs_nonempty():
    with pytest.raises(ValidationError):
        selectivity({}, "0")


@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4), st.integers(0, 3))
def test_selectivity_matches_definition(weights, t):
    p = np.array(weights) / sum(weights)
    dist = Distribution(2, format(t, "02b"), p)
    rep = selectivity(dist)
    others = np.delete(p, t)
    assert rep.S == pytest.approx(10 * math.log10(p[t] / others.max()))


# ---------------------------------------------------------------------------
# distributions and runs
# ---------------------------------------------------------------------------

def test_distribution_invariants():
    with pytest.raises(ValidationError):
        Distribution(1, "1", np.array([0.5, 0.6]))
    with pytest.raises(ValidationError):
        Distribution(1, "1", np.array([0.5, 0.5]), shots=10, counts=np.array([4, 5]))
    d = Distribution(2, "11", np.array([0.25, 0.25, 0.0, 0.5]))
    assert Distribution.from_json(d.to_json()).probs.tolist() == d.probs.tolist()
    assert d.to_json() == {"target": "11", "shots": 0, "probs": {"00": 0.25, "01": 0.25, "11": 0.5}}


def test_noiseless_n2_is_certain():
    for backend in ("density", "trajectory"):
        dist = run_shots(config_for("sga", 2), None, shots=500, backend=backend, seed=1)
        assert dist.as_dict() == {"11": 1.0}


def test_noiseless_n4_exact():
    dist = run_shots(config_for("sga", 4))
    assert dist.exact
    assert dist.prob("1111") == pytest.approx(closed_form_success(4), abs=1e-9)
    assert dist.prob("1111") == pytest.approx(0.9613, abs=1e-4)


def test_auto_backend_choice():
    assert resolve_backend(config_for("sgaa", 8), "auto") == "density"
    assert resolve_backend(config_for("sga", 9), "auto") == "trajectory"
    with pytest.raises(ValidationError):
        resolve_backend(config_for("sga", 4), "gpu")


def test_trajectory_runs_are_seeded():
    cfg = config_for("sga", 3)
    model = noise_for("dep", 0.02)
    a = run_shots(cfg, model, 3000, "trajectory", seed=4)
    b = run_shots(cfg, model, 3000, "trajectory", seed=4)
    c = run_shots(cfg, model, 3000, "trajectory", seed=5)
    assert np.array_equal(a.counts, b.counts) and a.counts.sum() == 3000
    assert not np.array_equal(a.counts, c.counts)


def test_two_stage_outcomes_are_concatenated():
    dist = run_shots(config_for("m2ga", 4))
    assert dist.n_qubits == 4 and dist.prob("1111") > 0.9


def test_shots_validation():
    with pytest.raises(ValidationError):
        run_shots(config_for("sga", 2), shots=0)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def test_grid_parsing():
    g = parse_grid("1e-4:1e-1:7")
    assert len(g) == 7 and g[0] == pytest.approx(1e-4) and g[-1] == pytest.approx(1e-1)
    with pytest.raises(ValidationError):
        parse_grid("1e-4:1e-1")
    with pytest.raises(ValidationError):
        log_grid(1.0, 0.5, 4)


def test_threshold_sga4_depolarizing():
    res = find_error_threshold(config_for("sga", 4), "dep", log_grid(1e-4, 1e-1, 7))
    assert 3e-3 <= res.threshold <= 3e-2
    assert res.error_label == "dep" and res.algorithm == "sga" and res.target_S == 3.0
    ps = [p for p, _ in res.samples]
    assert ps == sorted(ps) and len(ps) >= 7
    # bracketed by samples on both sides of S = 3
    below = [s for p, s in res.samples if p < res.threshold]
    above = [s for p, s in res.samples if p > res.threshold]
    assert max(below) >= 3 and min(above) <= 3
    # interpolation soundness
    s = selectivity(run_shots(config_for("sga", 4), noise_for("dep", res.threshold))).S
    assert 2.5 <= s <= 3.5


def test_threshold_unbracketed_edges():
    cfg = config_for("sga", 3)
    with pytest.raises(UnbracketedError) as info:
        find_error_threshold(cfg, "bf", log_grid(1e-7, 1e-6, 4))
    assert info.value.edge == "upper"
    with pytest.raises(UnbracketedError) as info:
        find_error_threshold(cfg, "bf", [0.05, 0.1, 0.3, 0.5])
    assert info.value.edge == "lower"


def test_threshold_grid_rules():
    cfg = config_for("sga", 3)
    with pytest.raises(ValidationError):
        find_error_threshold(cfg, "bf", [1e-3, 1e-2, 1e-1])
    with pytest.raises(ValidationError):
        find_error_threshold(cfg, "bf", [1e-3, 2e-3, 4e-3, 8e-3])
    with pytest.raises(ValidationError):
        find_error_threshold(cfg, "thermal", log_grid(1e-4, 1e-1, 4))


def test_threshold_scopes_at_n3():
    cfg = config_for("sga", 3)
    grid = log_grid(1e-4, 1.0, 9)
    full = find_error_threshold(cfg, "dep", grid).threshold
    one = find_error_threshold(cfg, "dep", grid, scope="single", noisy_qubit=0).threshold
    assert one > full


def test_threshold_is_deterministic():
    cfg = config_for("sga", 3)
    grid = log_grid(1e-3, 1e-1, 5)
    a = find_error_threshold(cfg, "ad", grid, shots=2000, seed=3, backend="trajectory")
    b = find_error_threshold(cfg, "ad", grid, shots=2000, seed=3, backend="trajectory")
    assert a == b


# ---------------------------------------------------------------------------
# relaxation scans
# ---------------------------------------------------------------------------

def test_default_relaxation_grid():
    g = default_relaxation_grid()
    assert g[0] == pytest.approx(10.0) and g[-1] == pytest.approx(1e4)
    assert len(g) == 25


def test_monotone_scan_matches_exhaustive():
    cfg = config_for("sga", 3)
    grid = log_grid(0.5, 50, 9)
    fast = relaxation_scan(cfg, grid, grid, band=(2.5, 6.0))
    full = relaxation_scan(cfg, grid, grid, band=(2.5, 6.0), monotone=False)
    assert fast == full and fast
    assert all(p.T2 <= 2 * p.T1 for p in fast)
    assert all(2.5 <= p.S <= 6.0 for p in fast)


def test_near_noiseless_point_excluded():
    cfg = config_for("sga", 4)
    assert relaxation_scan(cfg, [1e6], [1e6]) == []
    s = selectivity(run_shots(cfg, thermal_model(1e6, 1e6))).S
    assert s > 3.5


def test_scan_grid_validation():
    with pytest.raises(ValidationError):
        relaxation_scan(config_for("sga", 3), [0.0], [1.0])


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------

def test_exponential_recovery():
    pts = [(n, 4.6991 * math.exp(1.0388 * n)) for n in range(4, 15)]
    fit = fit_scaling(pts, "exponential")
    assert fit.a == pytest.approx(4.6991, abs=1e-9) and fit.b == pytest.approx(1.0388, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_power_exponential_recovery():
    pts = [(n, 1.2761 * n ** 2.8401 * math.exp(0.3436 * n)) for n in range(4, 15)]
    fit = fit_scaling(pts, "power_exponential")
    assert (fit.a, fit.b, fit.c) == pytest.approx((1.2761, 2.8401, 0.3436), abs=1e-9)


def test_fit_on_quoted_counts():
    fit = fit_scaling([(3, 95), (4, 322), (6, 2418)], "exponential")
    assert fit.b == pytest.approx(1.07, abs=0.01)


def test_constant_data():
    fit = fit_scaling([(3, 5.0), (4, 5.0), (5, 5.0), (6, 5.0)], "power_exponential")
    assert fit.b == pytest.approx(0, abs=1e-9) and fit.c == pytest.approx(0, abs=1e-9)
    assert fit.a == pytest.approx(5.0)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_scaling([(4, 1.0), (4, 2.0), (4, 3.0)], "exponential")
    with pytest.raises(ValidationError):
        fit_scaling([(4, 1.0), (5, 2.0)], "exponential")
    with pytest.raises(ValidationError):
        fit_scaling([(4, 1.0), (5, -2.0), (6, 3.0)], "exponential")
    with pytest.raises(FitError):
        FitResult("exponential", math.inf, 1.0)


def test_extrapolate_examples():
    assert extrapolate(FitResult("exponential", 1.0, 0.0), 37) == 1.0
    sga = FitResult("exponential", 4.6991, 1.0388)
    sgaa = FitResult("power_exponential", 1.2761, 2.8401, 0.3436)
    assert extrapolate(sga, 15) == pytest.approx(2.7e7, rel=0.05)
    assert extrapolate(sgaa, 15) == pytest.approx(4.84e5, rel=0.05)


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_fit_r2_in_range(slope, scale):
    rng = np.random.default_rng(0)
    pts = [(n, scale * math.exp(slope * n + rng.normal(0, 0.1))) for n in range(3, 9)]
    fit = fit_scaling(pts)
    assert 0.0 <= fit.r_squared <= 1.0


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _result():
    return ThresholdResult("sga", 4, "depolarizing", ((1e-3, 10.0), (1e-2, 1.0)), 0.0051, 3.0, 20000, 7)


def test_threshold_csv_schema(tmp_path):
    paths = export_report([_result()], tmp_path)
    lines = paths[0].read_text().splitlines()
    assert lines[0] == "algorithm,n,error_type,threshold,target_S,shots,seed"
    assert lines[1] == "sga,4,dep,0.0051,3.0,20000,7"
    assert paths[1].read_text().splitlines()[0] == "algorithm,n,error_type,scope,param,selectivity"


def test_relaxation_csv_schema(tmp_path):
    pts = [RelaxationPoint("sga", 4, 20.0, 30.0, 3.1)]
    path = export_report(pts, tmp_path / "scan.csv")[0]
    assert path.read_text().splitlines() == ["algorithm,n,T1_us,T2_us,selectivity", "sga,4,20.0,30.0,3.1"]
    empty = export_relaxation([], tmp_path)
    assert empty.read_text() == "algorithm,n,T1_us,T2_us,selectivity\n"


def test_fit_json_schema(tmp_path):
    p = export_report(FitResult("exponential", 2.0, 0.5, None, 0.9), tmp_path)[0]
    assert json.loads(p.read_text()) == {"model": "exponential", "a": 2.0, "b": 0.5, "r2": 0.9}
    p = export_report(FitResult("power_exponential", 2.0, 0.5, 0.1, 0.9), tmp_path / "pe.json")[0]
    assert list(json.loads(p.read_text())) == ["model", "a", "b", "c", "r2"]


def test_export_errors(tmp_path):
    with pytest.raises(ValidationError):
        export_report([], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError, match="file"):
        export_report([_result()], blocker / "sub")


# ---------------------------------------------------------------------------
# config and parallelism
# ---------------------------------------------------------------------------

def test_yaml_config(tmp_path):
    path = tmp_path / "lab.yaml"
    path.write_text(
        "grover: {algorithm: sgaa, n_qubits: 4, target: '0101'}\n"
        "noise:\n  rules:\n    - {family: ad, param: 0.01, gate_scope: [2q]}\n"
        "run: {shots: 100, seed: 3, backend: trajectory}\n")
    cfg = load_config(path)
    assert cfg.grover.algorithm == "sgaa" and cfg.grover.target == "0101"
    assert cfg.noise.rules[0].family == "amplitude_damping"
    assert cfg.run.shots == 100


def test_json_config_round_trip(tmp_path):
    from grovernoise.lab.config import dump_config, parse_config

    cfg = parse_config({"grover": config_for("m1ga", 5).to_dict(),
                        "noise": noise_for("pd", 0.01).to_dict()})
    path = tmp_path / "lab.json"
    dump_config(cfg, path)
    again = load_config(path)
    assert again.grover == cfg.grover and again.noise == cfg.noise


def test_bad_config(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("bogus: 1\n")
    with pytest.raises(ValidationError):
        load_config(path)
    with pytest.raises(ValidationError):
        load_config(tmp_path / "missing.yaml")


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("GROVER_LAB_THREADS", "3")
    assert worker_count() == 3
    assert parallel_map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    monkeypatch.setenv("GROVER_LAB_THREADS", "many")
    with pytest.raises(ValidationError):
        worker_count()
