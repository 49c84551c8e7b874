import json
import math

import numpy as np
import pytest

from lattice_smooth.errors import ConfigurationError, DomainError
from lattice_smooth.estimator import BandwidthSchedule
from lattice_smooth.experiment import (
    CSV_HEADER,
    admissibility,
    csv_text,
    fit_slope,
    load_config,
    parse_config,
    run_bias_study,
    run_rate_study,
    run_variance_study,
)
from lattice_smooth.experiment.studies import run_conditions, run_estimate, run_orlicz, run_simulate

MD1 = {"variant": "MD_NEIGHBOR", "link": "sign", "innovation": {"law": "rademacher"}}
MA1 = {
    "variant": "LINEAR",
    "coefficients": [{"offset": 0, "value": 1.0}, {"offset": 1, "value": 0.5}],
    "innovation": {"law": "gaussian", "sigma": 1.0},
}


def small_rates(**extra):
    raw = {"d": 1, "n": [64, 128, 256, 512], "generator": MD1, "replications": 30, "seed": 11}
    raw.update(extra)
    return parse_config(raw)


# --- fit_slope -----------------------------------------------------------------


def test_fit_slope_exact_line():
    slope, icpt, se = fit_slope([(x, 2 * x + 1) for x in (0.0, 1.0, 2.5, 4.0)])
    assert slope == pytest.approx(2.0, abs=1e-14)
    assert icpt == pytest.approx(1.0, abs=1e-14)
    assert se == pytest.approx(0.0, abs=1e-14)


def test_fit_slope_with_repeated_x():
    pts = [(0.0, 3.0), (1.0, 2.5), (1.0, 2.5), (2.0, 2.0), (4.0, 1.0)]
    assert fit_slope(pts)[0] == pytest.approx(-0.5, abs=1e-14)


def test_fit_slope_symmetric_perturbation():
    # y = s x + delta * (-1, +1, +1, -1): the perturbation is orthogonal to centred x
    s, delta = 0.7, 0.05
    xs = [-3.0, -1.0, 1.0, 3.0]
    pts = [(x, s * x + delta * e) for x, e in zip(xs, (-1, 1, 1, -1))]
    slope, _, se = fit_slope(pts)
    assert slope == pytest.approx(s, abs=1e-14)
    assert se == pytest.approx(math.sqrt(4 * delta**2 / 2 / 20), rel=1e-12)
    # an antisymmetric perturbation moves the slope by exactly sum(x e) delta / sxx
    pts = [(x, s * x + delta * e) for x, e in zip(xs, (-1, -1, 1, 1))]
    assert fit_slope(pts)[0] == pytest.approx(s + delta * 8 / 20, abs=1e-14)


def test_fit_slope_degenerate():
    with pytest.raises(DomainError):
        fit_slope([(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)])
    with pytest.raises(DomainError):
        fit_slope([(1.0, 2.0), (2.0, 3.0)])
    with pytest.raises(DomainError):
        fit_slope([(1.0, 2.0), (2.0, math.nan), (3.0, 1.0)])


# --- config --------------------------------------------------------------------


@pytest.mark.parametrize(
    "raw",
    [
        {"d": 1, "nn": [1]},
        {"d": 1, "generator": {"variant": "IID", "lnk": "sign"}},
        {"d": 1, "generator": {"variant": "IID", "innovation": {"law": "gaussian", "sd": 1}}},
        {"d": 1, "kernel": {"variant": "UNIFORM", "width": 2}},
        {"d": 1, "bandwidth": {"form": "FIXED", "h": 0.1}},
        {"d": 1, "grid": {"points": 4}},
        {"d": 1, "output": {"png": "x"}},
        {"d": 1, "variance": {"x": [0.5]}},
        {"d": 1, "orlicz": {"marginal": {"law": "point", "mass": 1}}},
    ],
)
def test_unknown_keys_rejected(raw):
    with pytest.raises(ConfigurationError, match="unknown key"):
        parse_config(raw)


@pytest.mark.parametrize(
    "raw",
    [
        {},
        {"d": 0},
        {"d": 1, "n": [10, 1]},
        {"d": 1, "generator": {"variant": "IID", "innovation": {"law": "uniform", "low": 0, "high": 2}}},
        {"d": 1, "generator": {"variant": "LINEAR", "coefficients": []}},
        {"d": 2, "generator": MA1},
        {"d": 1, "seed": -3},
        {"d": 1, "seed": 1.5},
        {"d": 1, "regression": {"g": "cubic"}},
        {"d": 1, "kernel": {"variant": "PEDESTAL", "a": 0}},
        {"d": 1, "bandwidth": {"form": "FIXED"}},
        {"d": 1, "error": "bias"},
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(ConfigurationError):
        parse_config(raw)


def test_monte_carlo_invariants():
    with pytest.raises(ConfigurationError, match="at least 4"):
        run_rate_study(parse_config({"d": 1, "n": [64, 128, 256], "replications": 30}))
    with pytest.raises(ConfigurationError, match="30 replications"):
        run_rate_study(small_rates(replications=29))
    with pytest.raises(ConfigurationError, match="increasing"):
        run_rate_study(parse_config({"d": 1, "n": [64, 256, 128, 512], "replications": 30}))
    with pytest.raises(ConfigurationError, match="floor"):
        run_rate_study(parse_config({"d": 1, "n": [8, 16, 32, 64], "replications": 30,
                                     "bandwidth": {"form": "POWERLOG", "theta1": 0, "theta2": 0.9}}))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"d": 2, "n": [16, 32], "kernel": {"variant": "PEDESTAL", "a": 1, "b": 1}}))
    cfg = load_config(good)
    assert cfg.kernel.d == 2 and cfg.x0 == (0.5, 0.5)


def test_admissibility_validator():
    sched = BandwidthSchedule("POWERLOG", 0.5, 0.2)
    ok = admissibility(1, sched, p=4.0, a=1.0, b=0.0)
    # theta = (2 * 1 * 5 - 1 - 2) / 5 = 1.4 >= 0.2 and 5 * 0.5 > 2
    assert ok["theta_as"] == pytest.approx(1.4)
    assert ok["as_admissible"]
    bad = admissibility(1, BandwidthSchedule("POWERLOG", 0.1, 0.2), p=4.0, a=1.0, b=0.0)
    assert not bad["as_admissible"]  # 5 * 0.1 + 0 < 2
    rescued = admissibility(1, BandwidthSchedule("POWERLOG", 0.1, 0.2), p=4.0, a=1.0, b=0.2)
    assert rescued["as_admissible"]  # 0.5 + 2 * 5 * 0.2 > 2
    lp = admissibility(1, BandwidthSchedule(), p=4.0, a=0.5, ns=[100, 1000])
    assert lp["theta_lp"] == pytest.approx((2 * 0.5 * 5 - 1) / 5)
    assert lp["lp_admissible"]
    # theta' = 0.2 but h_100 = (log 100 / 100)^(1/3) ~ 0.357 < 100^-0.2 ~ 0.398
    assert not admissibility(1, BandwidthSchedule(), p=4.0, a=0.2, ns=[100])["lp_admissible"]
    assert not admissibility(1, BandwidthSchedule(), p=4.0, a=0.05)["lp_admissible"]
    with pytest.raises(ConfigurationError):
        admissibility(1, sched, p=2.0, a=1.0)


# --- bias ----------------------------------------------------------------------


def test_bias_study_toy():
    cfg = parse_config({"d": 1, "n": [10], "bandwidth": {"form": "FIXED", "value": 0.3},
                        "regression": {"battery": ["affine"]}})
    rep, rows = run_bias_study(cfg)
    (row,) = rep.per_n
    # the largest bias on the 401-point grid sits at x = 0 (window {0.1, 0.2, 0.3})
    assert row["max_abs_bias"] == pytest.approx(0.2, abs=1e-12)
    assert row["argmax_x"] == [0.0]
    assert row["holds"] and rep.verdict == "PASS"
    assert rep.max_ratio <= 1.0


def test_bias_constant_is_zero():
    cfg = parse_config({"d": 2, "n": [16], "regression": {"battery": ["constant"]}})
    rep, _ = run_bias_study(cfg)
    assert rep.per_n[0]["max_abs_bias"] <= 1e-14


def test_bias_affine_ratio_at_most_B():
    cfg = parse_config({"d": 1, "n": [10, 100, 1000], "regression": {"B": 3.0, "battery": ["affine"]}})
    rep, _ = run_bias_study(cfg)
    assert rep.verdict == "PASS" and rep.max_ratio <= 3.0


# --- rates ---------------------------------------------------------------------


def test_rate_study_report_shape():
    rep, rows = run_rate_study(small_rates())
    assert [r.n for r in rep.rows] == [64, 128, 256, 512]
    assert all(r.replications == 30 for r in rep.rows)
    assert rep.theoretical_slope == pytest.approx(1 / 3)
    assert rep.slope is not None and rep.stderr >= 0
    assert rep.verdict == ("PASS" if abs(rep.slope - 1 / 3) <= 0.12 else "FAIL")
    sups = [r for r in rows if r[5] == "sup"]
    assert len(sups) == 4 * 30
    for r in rep.rows:
        vals = np.array([row[6] for row in sups if row[2] == r.n])
        assert r.mean == pytest.approx(vals.mean())
        assert r.median <= r.q90


def test_rate_study_degenerate():
    cfg = small_rates(generator={"variant": "IID", "innovation": {"law": "gaussian", "sigma": 0.0}})
    rep, _ = run_rate_study(cfg)
    assert rep.verdict == "DEGENERATE" and rep.slope is None
    assert all(r.mean == 0.0 for r in rep.rows)


def test_rate_study_total_error_mode():
    rep, _ = run_rate_study(small_rates(error="total"))
    dev, _ = run_rate_study(small_rates())
    assert all(t.mean >= 0 for t in rep.rows)
    assert any(t.mean != d.mean for t, d in zip(rep.rows, dev.rows))


def test_determinism_across_worker_counts():
    a = csv_text(run_rate_study(small_rates(workers=1))[1])
    b = csv_text(run_rate_study(small_rates(workers=3))[1])
    assert a == b
    c = csv_text(run_rate_study(small_rates(seed=12))[1])
    assert a != c
    assert a.splitlines()[0] == ",".join(CSV_HEADER)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("LATTICE_SMOOTH_THREADS", "2")
    a = csv_text(run_rate_study(small_rates())[1])
    monkeypatch.setenv("LATTICE_SMOOTH_THREADS", "zero")
    with pytest.raises(ConfigurationError):
        run_rate_study(small_rates())
    monkeypatch.delenv("LATTICE_SMOOTH_THREADS")
    assert csv_text(run_rate_study(small_rates())[1]) == a


# --- variance ------------------------------------------------------------------


def test_variance_study_small():
    cfg = parse_config({"d": 1, "n": [128, 256, 512, 1024], "generator": MA1, "replications": 40,
                        "variance": {"oracle_n": [16, 32]}})
    rep, rows = run_variance_study(cfg)
    assert [o["n"] for o in rep.oracle] == [16, 32]
    assert all(o["holds"] for o in rep.oracle)
    assert all(0 < o["max_ratio"] <= 1 for o in rep.oracle)
    assert rep.theoretical_slope == -0.5
    for m in rep.mc:
        assert m["rms"] > 0 and m["predicted_rms"] > 0


def test_variance_oracle_iid_attains_sigma_squared_sum_of_squares():
    cfg = parse_config({"d": 1, "n": [128, 256, 512, 1024], "generator": {"variant": "IID"},
                        "replications": 30, "variance": {"oracle_n": [16]}})
    rep, _ = run_variance_study(cfg)
    assert rep.oracle[0]["abs_cov_sum"] == 1.0


# --- single-shot tools -------------------------------------------------------------


def test_simulate_and_estimate():
    cfg = parse_config({"d": 1, "n": [256, 512], "generator": MA1})
    sim, rows = run_simulate(cfg)
    assert sim["fields"][0]["theoretical_cov_lag_e1"] == 0.5
    est, rows = run_estimate(cfg)
    for r in est["rows"]:
        assert r["sup_deviation"] <= r["decomposition_bound"] + 1e-15


def test_conditions_and_orlicz_payloads():
    cfg = parse_config({"d": 1, "generator": MA1, "conditions": {"ids": ["C4", "C1"]},
                        "admissibility": {"p": 4, "a": 1, "b": 0}})
    payload, rows = run_conditions(cfg)
    assert [r["condition"] for r in payload["reports"]] == ["C4", "C1"]
    assert payload["reports"][0]["value"] == 2.25
    assert "as_admissible" in payload["admissibility"]
    cfg = parse_config({"d": 1, "orlicz": {"marginal": {"law": "point", "value": 1.0}, "beta": 2, "alpha": 0.1, "p": 4}})
    payload, rows = run_orlicz(cfg)
    assert payload["results"]["luxemburg_norm"] == pytest.approx(1 / math.sqrt(math.log(2)), abs=1e-8)
    assert payload["results"]["c_k"] == pytest.approx(1 / math.sqrt(math.log(11)), abs=1e-6)
    assert payload["results"]["d_k"] == pytest.approx(0.1**0.25, abs=1e-12)
