import datetime as dt

import numpy as np
import pytest

from midterm_epf import seasonal as se
from midterm_epf.errors import BasisError, InsufficientSpan, SingularFit

START = dt.date(2015, 1, 1)


def _cov(n_days, start=START):
    days = np.datetime64(start) + np.arange(n_days)
    return se.covariates(np.repeat(days, 24), np.tile(np.arange(1, 25), n_days))


def test_ps_hod_constrained_full_rank():
    cov = {"HoD": np.arange(24.0)}
    X, P, _ = se.build_basis(se.ps("HoD", 24), cov)
    assert X.shape == (24, 23)
    assert np.linalg.matrix_rank(X) == 23
    np.testing.assert_allclose(X.sum(axis=0), 0.0, atol=1e-12)
    assert P.shape == (23, 23)


def test_ti_dimensions():
    cov = _cov(30)
    X, P, _ = se.build_basis(se.ti("HoD", 12, "SoY", 6), cov)
    assert X.shape[1] == 11 * 5
    assert P.shape == (55, 55)


def test_cyclic_basis_wraps():
    k, period = 12, se.SOY_PERIOD
    b0 = se.cyclic_basis(np.array([0.0]), period, k)
    for eps in (1e-3, 1e-6, 1e-9):
        b1 = se.cyclic_basis(np.array([period - eps]), period, k)
        assert np.abs(b0 - b1).max() < 1e-8 + 1e-3 * eps
    # partition of unity
    x = np.linspace(0, period, 997, endpoint=False)
    np.testing.assert_allclose(se.cyclic_basis(x, period, k).sum(axis=1), 1.0, atol=1e-12)


def test_cyclic_penalty_annihilates_constants_only():
    P = se.difference_penalty(8, 2, cyclic=True)
    np.testing.assert_allclose(P @ np.ones(8), 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(P) == 7


def test_spec_validation():
    with pytest.raises(BasisError):
        se.ps("HoD", 3)
    with pytest.raises(BasisError):
        se.SplineTermSpec("x", "cp", (se.Margin("HoD", 8, True),))
    with pytest.raises(BasisError):
        se.build_basis(se.ps("DoW", 9), {"DoW": np.arange(7.0)})


def test_covariates_calendar():
    cov = se.covariates(np.array(["2024-01-15", "2022-06-05"], dtype="datetime64[D]"), np.array([9, 1]))
    assert cov["DoW"].tolist() == [0.0, 6.0]  # Monday, Sunday
    assert cov["HoD"].tolist() == [8.0, 0.0]


def test_constant_series():
    y = np.full((1096, 24), 123.0)
    m = se.fit_seasonal(y, START, "load")
    assert m.intercept == pytest.approx(123.0, abs=1e-8)
    np.testing.assert_allclose(m.theta[1:], 0.0, atol=1e-8)


def test_daily_sine_in_sample():
    cov = _cov(1096)
    y = np.sin(2 * np.pi * cov["HoD"] / 24).reshape(-1, 24)
    m = se.fit_seasonal(y, START, "load")
    fit = m.predict_grid(START, 1096)
    assert np.sqrt(np.mean((fit - y) ** 2)) < 0.01


def test_trend_slope_against_ols():
    rng = np.random.default_rng(11)
    n_days = 1095
    cov = _cov(n_days)
    t = cov["t"] - cov["t"][0]
    y = 0.001 * t + rng.normal(0, 0.1, len(t))
    m = se.fit_seasonal(y.reshape(-1, 24), START, "load")
    ols = np.polyfit(t, y, 1)[0]
    assert abs(m.trend_slope - 0.001) < 0.05 * 0.001
    assert abs(ols - 0.001) < 0.05 * 0.001


def test_small_lambda_reduces_to_ols():
    rng = np.random.default_rng(2)
    y = rng.normal(size=(1095, 24)) + np.arange(24)
    specs = [se.ps("HoD", 8), se.cp("SoY", 6)]
    m = se.fit_seasonal(y, START, "load", specs=specs, lambdas=[1e-12, 1e-12])
    X = m.design(_cov(1095))
    ols = np.linalg.lstsq(X, y.ravel(), rcond=None)[0]
    assert np.abs(m.theta - ols).max() < 1e-6


def test_fitted_values_invariant_to_basis_shift():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 23, 500)
    y = np.sin(x / 3) + rng.normal(0, 0.1, 500)
    raw = se.bspline_basis(x, 0, 23, 10)

    def fitted(B):
        z = se.sum_to_zero(B.sum(axis=0))
        X = np.hstack([np.ones((len(x), 1)), B @ z])
        return X @ np.linalg.lstsq(X, y, rcond=None)[0]

    np.testing.assert_allclose(fitted(raw), fitted(raw + 5.0), atol=1e-9)


def test_periodic_forecast():
    rng = np.random.default_rng(1)
    cov = _cov(1096)
    y = (np.cos(2 * np.pi * cov["SoY"] / se.SOY_PERIOD) + rng.normal(0, 0.1, len(cov["t"]))).reshape(-1, 24)
    m = se.fit_seasonal(y, START, "res", specs=[se.cp("SoY", 12), se.ti("HoD", 12, "SoY", 6)])
    c = {"HoD": np.array([5.0, 5.0]), "DoW": np.array([2.0, 2.0]),
         "SoY": np.array([100.5, 100.5 + se.SOY_PERIOD]), "t": np.array([0.0, 0.0])}
    v = m.design(c) @ m.theta
    assert abs(v[0] - v[1]) < 1e-9


def test_forecast_identities():
    rng = np.random.default_rng(4)
    cov = _cov(1096)
    y = (5 + 0.01 * cov["t"] / 24 + rng.normal(0, 1, len(cov["t"]))).reshape(-1, 24)
    m = se.fit_seasonal(y, START, "load", specs=[])
    # trend-only model: forecasts continue the line
    end = m.train_end
    last = se.forecast_seasonal(m, end, 24)
    later = se.forecast_seasonal(m, end + dt.timedelta(days=10), 24)
    assert later - last == pytest.approx(m.trend_slope * 240, rel=1e-10)
    # inside the span the forecast equals the fitted value
    X = m.design(_cov(1096))
    assert se.forecast_seasonal(m, START + dt.timedelta(days=3), 7) == pytest.approx((X @ m.theta)[3 * 24 + 6], abs=1e-9)


def test_res_floor():
    y = np.full((1096, 24), 10.0)
    y[:, :] -= np.linspace(0, 30, 1096)[:, None]  # falls below zero
    m = se.fit_seasonal(np.maximum(y, -1e9), START, "res", specs=[])
    assert se.forecast_seasonal(m, dt.date(2019, 6, 1), 12) == 0.0


def test_insufficient_span():
    with pytest.raises(InsufficientSpan):
        se.fit_seasonal(np.zeros((700, 24)), START, "load")


def test_singular_fit():
    y = np.zeros((1096, 24))
    with pytest.raises(SingularFit):
        se.fit_seasonal(y, START, "load", specs=[se.ps("HoD", 8), se.ps("HoD", 8)], lambdas=[0.0, 0.0])


def test_refit_schedule():
    sched = se.expanding_refit_schedule(dt.date(2015, 1, 1), dt.date(2024, 6, 30))
    assert [e.year for e, _ in sched] == list(range(2017, 2024))
    assert [y for _, y in sched] == list(range(2018, 2025))
    assert se.expanding_refit_schedule(dt.date(2015, 1, 1), dt.date(2017, 12, 31)) == [(dt.date(2017, 12, 31), 2018)]
    with pytest.raises(InsufficientSpan):
        se.expanding_refit_schedule(dt.date(2015, 1, 1), dt.date(2016, 12, 31))


def test_no_lookahead_and_origin_selection():
    rng = np.random.default_rng(9)
    y = rng.normal(100, 5, size=(4 * 365 + 1, 24))
    models = se.fit_schedule(y, START, "load")
    y2 = y.copy()
    y2[1096:] += 1000.0  # perturb everything after the first train_end
    models2 = se.fit_schedule(y2, START, "load")
    a = models[0].predict_grid(dt.date(2018, 1, 1), 30)
    b = models2[0].predict_grid(dt.date(2018, 1, 1), 30)
    assert a.tobytes() == b.tobytes()
    ss = se.SeasonalSet({"load": models})
    assert ss.for_origin("load", dt.date(2017, 12, 31)) is None
    assert ss.for_origin("load", dt.date(2018, 1, 1)).train_end == dt.date(2017, 12, 31)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    y = rng.normal(100, 5, size=(1096, 24))
    m = se.fit_seasonal(y, START, "res")
    se.save_model(m, tmp_path / "m.csv")
    m2 = se.load_model(tmp_path / "m.csv")
    assert m2.lambdas == m.lambdas
    a = m.predict_grid(dt.date(2018, 3, 1), 40)
    b = m2.predict_grid(dt.date(2018, 3, 1), 40)
    np.testing.assert_array_equal(a, b)
