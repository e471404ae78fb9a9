import hashlib

import numpy as np
import pytest

from midterm_epf.ingest import dst_kind
from midterm_epf.synthetic import generate_synthetic, simulate


def _digest(paths):
    return [hashlib.sha256(p.read_bytes()).hexdigest() for p in paths]


def test_generate_is_deterministic(tmp_path):
    a = generate_synthetic(4, 11, tmp_path / "a")
    b = generate_synthetic(4, 11, tmp_path / "b")
    assert _digest(a) == _digest(b)
    c = generate_synthetic(4, 12, tmp_path / "c")
    assert _digest(a)[0] != _digest(c)[0]


def test_generate_needs_four_years(tmp_path):
    with pytest.raises(ValueError):
        generate_synthetic(3, 0, tmp_path)


def test_price_correlates_with_gas():
    m = simulate(4, seed=2)
    r = np.corrcoef(m.data["price"].mean(axis=1), m.spot["gas"])[0, 1]
    assert r > 0.5


def test_zero_noise_price_is_merit_order():
    m = simulate(4, seed=5, noise=False)
    price = m.data["price"]
    spring = np.array([dst_kind(m.data.day(d)) == "spring" for d in range(m.data.n_days)])
    # spring-forward days carry the interpolated 02:00 value, as after ingest
    keep = np.ones(price.shape, dtype=bool)
    keep[spring, 2] = False
    assert np.array_equal(price[keep], m.merit_price[keep])
    np.testing.assert_array_equal(price[spring, 2], 0.5 * (m.merit_price[spring, 1] + m.merit_price[spring, 3]))


def test_futures_track_spot():
    m = simulate(4, seed=1)
    gas = m.futures.curves["gas"]
    idx = (gas.dates - np.datetime64(m.data.start_day)).astype(int)
    rel = gas.settles[:, 0] / m.spot["gas"][idx] - 1.0
    assert np.all(np.abs(rel) < 0.05)
    weekdays = {d.isoweekday() for d in gas.dates.astype("datetime64[D]").astype(object)}
    assert weekdays == {1, 2, 3, 4, 5}
