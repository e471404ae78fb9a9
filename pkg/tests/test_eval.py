import datetime as dt
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from midterm_epf import eval as ev
from midterm_epf.dftable import PROBS, df_quantiles
from midterm_epf.dftable_values import QUANTILES, SIZES
from midterm_epf.errors import DegenerateVariance, EmptyGroup, EmptyPlotInput, SingularRegression
from midterm_epf.models import COMPONENTS, ForecastRecord

D0 = dt.date(2021, 1, 1)


def rec(model="a", day=0, hour=1, pred=0.0, actual=0.0, horizon=1, comps=None):
    target = D0 + dt.timedelta(days=day)
    comps = comps if comps is not None else {c: 0.0 for c in COMPONENTS}
    icpt = pred - sum(comps.values())
    return ForecastRecord(model, target - dt.timedelta(days=horizon), horizon, target, hour, pred, actual,
                          icpt, comps)


def day_records(errors, model="a", day=0, horizon=1):
    return [rec(model, day, h + 1, 0.0, e, horizon) for h, e in enumerate(errors)]


# ---------------------------------------------------------------- metrics

def test_metrics_examples():
    (m,) = ev.compute_metrics(day_records([0.0] * 24))
    assert m.rmse == 0.0 and m.mae == 0.0 and m.n_days == 1
    (m,) = ev.compute_metrics(day_records([2.0] * 24))
    assert m.rmse == 2.0 and m.mae == 2.0
    (m,) = ev.compute_metrics(day_records([3.0] * 12 + [4.0] * 12))
    assert m.mae == 3.5
    assert m.rmse == math.sqrt(12.5)


def test_metrics_skip_invalid_and_group_by_year():
    recs = day_records([1.0] * 24) + [rec(day=3, pred=math.nan, actual=5.0), rec(day=4, actual=math.nan)]
    res = ev.compute_metrics(recs, "year")
    assert [(r.group, r.n_days) for r in res] == [("2021", 1)]
    with pytest.raises(EmptyGroup):
        ev.compute_metrics([rec(pred=math.nan)])
    with pytest.raises(EmptyGroup):
        ev.compute_metrics([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_rmse_at_least_mae_and_order_free(errors, rnd):
    recs = [rec(day=i // 24, hour=i % 24 + 1, actual=e) for i, e in enumerate(errors)]
    (a,) = ev.compute_metrics(recs)
    rnd.shuffle(recs)
    (b,) = ev.compute_metrics(recs)
    assert a.rmse >= a.mae - 1e-9 * max(1.0, a.mae)
    assert a.rmse == pytest.approx(b.rmse, rel=1e-12) and a.mae == pytest.approx(b.mae, rel=1e-12)


# ---------------------------------------------------------------- Diebold-Mariano

def test_dm_q0_matches_t_statistic():
    d = np.random.default_rng(3).normal(0.4, 2.0, 300)
    stat, p = ev.dm_statistic(d, 0)
    oracle = d.mean() / (d.std() / math.sqrt(len(d)))
    assert abs(stat - oracle) < 1e-10
    assert p == pytest.approx(0.5 * math.erfc(-oracle / math.sqrt(2)), abs=1e-12)


def test_newey_west_bartlett_weights():
    d = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
    x = d - d.mean()
    g = [float(x[k:] @ x[:len(x) - k]) / 5 for k in range(3)]
    assert ev.newey_west_variance(d, 2) == pytest.approx(g[0] + 2 * (2 / 3) * g[1] + 2 * (1 / 3) * g[2], abs=1e-14)


def test_dm_identical_forecasts_degenerate():
    recs = [r for day in range(40) for r in day_records(np.arange(24.0), day=day)]
    with pytest.raises(DegenerateVariance):
        ev.dm_test(recs, recs, 1)


def test_dm_direction_and_antisymmetry():
    rng = np.random.default_rng(0)
    a, b = [], []
    for day in range(120):
        a += day_records(rng.normal(0, 1, 24), "good", day, 7)
        b += day_records(rng.normal(0, 3, 24), "bad", day, 7)
    ab, ba = ev.dm_test(a, b, 7), ev.dm_test(b, a, 7)
    assert ab.model_a == "good" and ab.hac_lag == 6 and ab.n_days == 120 and ab.loss == "L1-daily"
    assert ab.p_value < 0.01
    assert ab.statistic == pytest.approx(-ba.statistic, rel=1e-12)


def test_dm_needs_enough_days():
    a = [r for day in range(10) for r in day_records(np.ones(24), "a", day)]
    b = [r for day in range(10) for r in day_records(2 * np.ones(24), "b", day)]
    with pytest.raises(EmptyGroup):
        ev.dm_test(a, b, 1)


def test_hac_lag():
    assert [ev.hac_lag(h) for h in (1, 2, 30, 31, 360)] == [0, 1, 29, 30, 30]


def test_dm_null_pvalues_uniform():
    rng = np.random.default_rng(2024)
    ps = [ev.dm_statistic(rng.normal(0, 1, 250), 0)[1] for _ in range(1000)]
    assert kstest(ps, "uniform").statistic < 0.05


# ---------------------------------------------------------------- ADF

def test_adf_power_on_white_noise():
    rej = [ev.adf_test(np.random.default_rng(s).normal(size=1000)).reject_at_5pct for s in range(200)]
    assert np.mean(rej) > 0.99


def test_adf_size_on_random_walk():
    rej = [ev.adf_test(np.cumsum(np.random.default_rng(10_000 + s).normal(size=1000))).reject_at_5pct
           for s in range(200)]
    assert abs(np.mean(rej) - 0.05) <= 0.02


def test_adf_pure_trend_not_rejected():
    res = ev.adf_test(np.arange(200.0))
    assert not res.reject_at_5pct


def test_adf_errors():
    with pytest.raises(ValueError):
        ev.adf_test(np.zeros(20))
    with pytest.raises(SingularRegression):
        ev.adf_test(np.full(100, 3.0))


def test_df_pvalue_at_table_points():
    j = int(np.argmin(np.abs(PROBS - 0.05)))
    k = SIZES.index(1000)
    assert ev.df_pvalue(QUANTILES[k][j], 1000) == pytest.approx(0.05, abs=1e-12)
    assert ev.df_pvalue(-50.0, 500) == PROBS[0] and ev.df_pvalue(50.0, 500) == PROBS[-1]


def test_df_table_matches_fresh_simulation():
    """Shipped 1/5/10% quantiles agree with an independent simulation at n = 1000."""
    sim = df_quantiles(1000, 100_000, seed=77, probs=np.array([0.01, 0.05, 0.10]))
    k = SIZES.index(1000)
    table = [QUANTILES[k][list(PROBS).index(p)] for p in (0.01, 0.05, 0.10)]
    assert np.all(np.abs(sim - np.array(table)) <= 0.03)


# ---------------------------------------------------------------- rendering

def _metric_results():
    return [ev.MetricsResult(m, h, "overall", 10.0 + i + h / 100, 8.0, 30)
            for i, m in enumerate(("naive", "constr")) for h in (1, 30, 180)]


def test_by_horizon_table_shape(tmp_path):
    svg = tmp_path / "t.svg"
    text = ev.render_tables(_metric_results(), "by_horizon", svg_path=svg)
    rows = [line.split(",") for line in text.strip().splitlines()]
    assert rows[0] == ["model", "h1", "h30", "h180"]
    assert [r[0] for r in rows[1:]] == ["naive", "constr"] and all(len(r) == 4 for r in rows)
    ET.parse(svg)


def test_by_year_table():
    res = [ev.MetricsResult(m, 30, y, 5.0, 4.0, 300) for m in ("a", "b") for y in ("2019", "2020")]
    rows = ev.render_tables(res, "by_year").strip().splitlines()
    assert rows == ["year,a,b", "2019,5.00,5.00", "2020,5.00,5.00"]


def test_dm_matrix_diagonal(tmp_path):
    res = [ev.DmResult(a, b, 30, 0.0, 0.2 if a == "x" else 0.01, 100, 29)
           for a in ("x", "y", "z") for b in ("x", "y", "z") if a != b]
    svg = tmp_path / "dm.svg"
    rows = [r.split(",") for r in ev.render_tables(res, "dm_matrix", svg_path=svg).strip().splitlines()]
    assert [rows[i][i] for i in range(1, 4)] == ["—"] * 3
    assert rows[1][2] == "0.2000" and rows[2][1] == "0.0100"
    ET.parse(svg)


def test_render_errors():
    with pytest.raises(EmptyGroup):
        ev.render_tables([], "by_horizon")
    with pytest.raises(ValueError):
        ev.render_tables(_metric_results(), "pie")


def test_coefficient_paths_svg(tmp_path):
    a = ev.render_coefficient_paths([1, 30, 90], ["gas"], np.array([[0.1], [0.3], [0.2]]), tmp_path / "a.svg")
    b = ev.render_coefficient_paths([1, 30, 90], ["gas"], np.array([[0.1], [0.3], [0.2]]), tmp_path / "b.svg")
    ET.parse(a)
    assert a.read_bytes() == b.read_bytes()
    with pytest.raises(EmptyPlotInput):
        ev.render_coefficient_paths([], ["gas"], np.zeros((0, 1)), tmp_path / "c.svg")


def test_components_envelope_equals_forecast(tmp_path):
    rng = np.random.default_rng(1)
    recs = []
    for day in range(3):
        for hour in range(1, 25):
            comps = dict(zip(COMPONENTS, rng.normal(0, 5, len(COMPONENTS))))
            recs.append(rec("current", day, hour, pred=40.0 + sum(comps.values()), actual=41.0, comps=comps))
    x, labels, layers = ev.stack_components(recs)
    assert labels[0] == "intercept" and len(layers) == len(COMPONENTS) + 1
    np.testing.assert_array_equal(layers[-1], [r.prediction for r in recs])
    np.testing.assert_allclose(layers[-2] + np.array([r.components[COMPONENTS[-1]] for r in recs]), layers[-1],
                               atol=1e-9)
    ET.parse(ev.render_components(recs, tmp_path / "c.svg"))
    with pytest.raises(EmptyPlotInput):
        ev.stack_components([rec(pred=math.nan)])
