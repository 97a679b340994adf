import dataclasses
import warnings

import numpy as np
import pytest
from scipy import stats

from oracles import ljung_box_l1
from ltsta.arma import ArmaFit, arma_state
from ltsta.config import RunConfig
from ltsta.errors import TooFewResiduals
from ltsta.model import (BreaksNearEndpoint, LtstaModel, diagnose, fit, forecast,
                         parameter_names, summarize)
from ltsta.series import TimeSeries
from ltsta.simulate import SimulationSpec, simulate

SPEC = SimulationSpec(n=120, slopes=(0.5, -0.5, 0.5), breaks=(40, 80), beta0=10.0, period=4,
                      cos=(1.0,), sin=(0.5,), phi=(0.5,), sigma2=0.1)


@pytest.fixture(scope="module")
def model():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit(simulate(SPEC, 0), RunConfig(policy="l_method"))


def _noiseless():
    t = np.arange(1, 41)
    return TimeSeries(2 + 0.3 * t + np.cos(np.pi * t / 2) + 0.5 * np.sin(np.pi * t / 2), 4)


def test_decomposition_identity(model):
    comp = model.components()
    total = comp["trend"] + comp["seasonal"] + comp["arma_fitted"] + comp["residual"]
    assert np.abs(total - model.y).max() < 1e-8
    rows = model.decomposition_rows()
    assert len(rows) == model.n and rows[0]["t"] == 1


def test_breaks_respect_spacing(model):
    edges = (0,) + model.breaks + (model.n,)
    assert all(b - a >= model.config.h for a, b in zip(edges[:-1], edges[1:]))
    assert model.breaks == (40, 80)


def test_step3_keeps_step1_breaks_on_separated_suite():
    for seed in range(8):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = fit(simulate(SPEC, seed), RunConfig(policy="l_method"))
        assert m.stages[0].refined_breaks == m.stages[0].initial_breaks


def test_noiseless_line_plus_seasonal():
    m = fit(_noiseless(), RunConfig(policy="ratio"))
    assert m.selection.m_selected == 0 and m.breaks == ()
    assert m.seasonal.n_harmonics == 1
    assert m.seasonal.cos_coefs[0] == pytest.approx(1.0, abs=1e-10)
    assert m.seasonal.sin_coefs[0] == pytest.approx(0.5, abs=1e-10)
    assert (m.arma.p, m.arma.q) == (0, 0)
    assert np.abs(m.residuals).max() < 1e-10
    s = summarize(m)
    for row in s["parameters"]:
        if row["name"] != "sigma2":
            assert row["std_err"] < 1e-9 * max(1.0, abs(row["coef"]))
            assert row["p_value"] < 1e-12


def test_summary_z_identity_and_names(model):
    s = summarize(model)
    names = parameter_names(model)
    assert [r["name"] for r in s["parameters"]] == names
    assert names[:4] == ["beta0_1", "beta1_1", "beta1_2", "beta1_3"]
    for r in s["parameters"]:
        assert r["z"] == pytest.approx(r["coef"] / r["std_err"])
        assert r["ci_lower"] < r["coef"] < r["ci_upper"]
        assert 0.0 <= r["p_value"] <= 1.0
    est = {r["name"]: r for r in s["parameters"]}
    for i, slope in enumerate(SPEC.slopes, start=1):
        r = est[f"beta1_{i}"]
        assert r["ci_lower"] - 0.05 < slope < r["ci_upper"] + 0.05


def test_diagnose_zero_autocorrelation():
    e = np.array([1.0, 0.0, -1.0, 0.0] * 4)
    d = diagnose(e)
    assert d.ljung_box_q == 0.0 and d.ljung_box_p == 1.0
    with pytest.raises(TooFewResiduals):
        diagnose(np.ones(7))


def test_diagnose_against_reference_formulas():
    from statsmodels.stats.diagnostic import acorr_ljungbox
    from statsmodels.stats.stattools import jarque_bera

    e = np.random.default_rng(4).standard_t(5, size=90)
    d = diagnose(e)
    lb = acorr_ljungbox(e, lags=[1])
    assert d.ljung_box_q == pytest.approx(float(lb["lb_stat"].iloc[0]), rel=1e-10)
    assert d.ljung_box_q == pytest.approx(ljung_box_l1(e), rel=1e-12)
    assert d.ljung_box_p == pytest.approx(float(lb["lb_pvalue"].iloc[0]), rel=1e-8)
    jb, jbp, skew, kurt = jarque_bera(e)
    assert d.jarque_bera == pytest.approx(jb, rel=1e-10)
    assert d.jarque_bera_p == pytest.approx(jbp, rel=1e-8)
    assert d.skew == pytest.approx(skew) and d.kurtosis == pytest.approx(kurt)
    k = 30
    h = np.sum(e[-k:] ** 2) / np.sum(e[:k] ** 2)
    assert d.het_h == pytest.approx(h)
    assert d.het_p == pytest.approx(2 * min(stats.f.cdf(h, k, k), stats.f.sf(h, k, k)))


def test_jarque_bera_sanity_on_normal_samples():
    passes = sum(diagnose(np.random.default_rng(s).standard_normal(1000)).jarque_bera_p > 0.05
                 for s in range(100))
    assert passes >= 90


def test_diagnostic_ranges(model):
    d = model.diagnostics
    assert d.ljung_box_q >= 0 and d.jarque_bera >= 0 and d.het_h > 0
    for p in (d.ljung_box_p, d.jarque_bera_p, d.het_p):
        assert 0.0 <= p <= 1.0


def test_forecast_pure_trend_model():
    rng = np.random.default_rng(2)
    t = np.arange(1, 61)
    y = np.where(t <= 30, 1 + 0.2 * t, 7 - 0.1 * (t - 30)) + rng.normal(scale=0.1, size=60)
    m = fit(TimeSeries(y), RunConfig(m=1, p_max=0, q_max=0))
    assert (m.arma.p, m.arma.q, m.seasonal.n_harmonics) == (0, 0, 0)
    fc = forecast(m, 5)
    tt = np.arange(61, 66)
    line = m.trend.intercepts[-1] + m.trend.slopes[-1] * tt
    assert np.allclose(fc.point, line, atol=1e-12)
    half = stats.norm.ppf(0.975) * np.sqrt(m.arma.sigma2)
    assert np.allclose(fc.upper - fc.point, half)
    assert np.allclose(fc.point - fc.lower, half)


def test_forecast_ma2_memory(model):
    ma = ArmaFit(0, 2, (), (0.4, 0.3), 0.1, 0.0, 0.0, model.n)
    z = model.y - model.components()["trend"] - model.components()["seasonal"]
    m2 = dataclasses.replace(model, arma=ma, state=arma_state(ma, z))
    fc = forecast(m2, 6)
    assert np.all(fc.arma[2:] == 0.0)
    assert np.any(fc.arma[:2] != 0.0)


def test_forecast_continuity_and_interval_shape(model):
    fc = forecast(model, 12)
    b0, s = model.trend.intercepts[-1], model.trend.slopes[-1]
    assert fc.trend[0] == pytest.approx(b0 + s * (model.n + 1), abs=1e-10)
    width = fc.upper - fc.lower
    assert np.all(np.diff(width) >= -1e-12)
    assert np.all(fc.lower <= fc.point) and np.all(fc.point <= fc.upper)
    narrow = forecast(model, 12, level=0.5)
    assert np.all(narrow.upper - narrow.lower < width)
    assert np.allclose(fc.point, fc.trend + fc.seasonal + fc.arma)


def test_log_model_intervals_map_through_exp():
    ts = simulate(SPEC, 1)
    pos = ts.with_values(np.exp(ts.values / 10.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = fit(pos, RunConfig(transform="log", policy="l_method"))
    fc = forecast(m, 4)
    assert np.allclose(fc.point, np.exp(fc.mean_transformed))
    half = stats.norm.ppf(0.975) * np.sqrt(fc.variance)
    assert np.allclose(fc.upper, np.exp(fc.mean_transformed + half))


def test_box_cox_bounds_stay_in_domain():
    ts = TimeSeries(1.0 + 0.01 * np.random.default_rng(0).random(40))
    m = fit(ts, RunConfig(transform="box_cox", lam=2.0, m=0, p_max=0, q_max=0))
    big = dataclasses.replace(m, arma=dataclasses.replace(m.arma, sigma2=25.0))
    fc = forecast(big, 2)
    assert np.all(np.isfinite(fc.lower)) and np.all(fc.lower >= 0.0)


def test_serialization_round_trip(model):
    back = LtstaModel.from_dict(model.to_dict())
    a, b = forecast(model, 4), forecast(back, 4)
    assert np.array_equal(a.point, b.point) and np.array_equal(a.upper, b.upper)
    assert back.breaks == model.breaks
    assert back.selection == model.selection


def test_breaks_near_endpoint_warning():
    t = np.arange(1, 41, dtype=float)
    y = np.where(t <= 38, 0.1 * t, 3.8 + 3.0 * (t - 38))
    with pytest.warns(BreaksNearEndpoint):
        fit(TimeSeries(y + 0.01 * np.sin(t)), RunConfig(m=1, p_max=0, q_max=0))


def test_extra_passes_run():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = fit(simulate(SPEC, 3), RunConfig(policy="l_method", passes=2))
    assert len(m.stages) == 2
    assert m.stages[1].initial_breaks == m.stages[0].refined_breaks
