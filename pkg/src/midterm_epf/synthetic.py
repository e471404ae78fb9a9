"""Seeded synthetic market for demos and tests.

Fuel spot prices follow geometric random walks; futures are spot times a
mean-reverting term-structure tilt plus small per-maturity noise, quoted on
weekdays. Load and RES are seasonal sinusoids plus trend and noise. The price is the marginal cost of a lignite/coal/gas merit
order (ten units per technology spanning old to new efficiencies) after
zero-cost renewables, plus Gaussian noise. Oil is simulated and quoted but no
unit burns it.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .fundamentals import COAL_MWH_TH_PER_T, default_plants, merit_order_prices
from .ingest import (HOURLY_HEADER, RAW_COLUMNS, TZ, FuturesStore, HourlyDataset, _add_res,
                     dst_kind, futures_from_arrays, write_futures_csv)

START = dt.date(2015, 1, 1)
UNITS_PER_TECH = 10
CAPACITY_MW = {"lignite": 1000.0, "coal": 1000.0, "gas": 4000.0}  # per unit
LIGNITE_FUEL = 4.0  # EUR/MWh_th, not traded
SPOT0 = {"co2": 8.0, "gas": 20.0, "coal": 60.0, "oil": 50.0}
VOL = {"co2": 0.02, "gas": 0.018, "coal": 0.012, "oil": 0.015}
CONTANGO = 0.004  # log premium per month of maturity
SLOPE_SD = 0.002  # stationary sd of the log curve slope per month of maturity
SLOPE_PHI = 0.98  # daily persistence of the slope
QUOTE_NOISE = 0.005  # relative idiosyncratic noise per maturity and day


@dataclass
class SyntheticMarket:
    data: HourlyDataset
    futures: FuturesStore
    spot: dict[str, np.ndarray]  # daily spot per commodity
    merit_price: np.ndarray  # noiseless merit-order price, (days, 24)
    load_signal: np.ndarray  # noiseless load, (days, 24)


def _unit_table():
    plants = default_plants()
    techs, etas = [], []
    for tech in ("lignite", "coal", "gas"):
        p = plants[tech]
        techs += [tech] * UNITS_PER_TECH
        etas += list(np.linspace(p.efficiency_old, p.efficiency_new, UNITS_PER_TECH))
    caps = np.array([CAPACITY_MW[t] for t in techs])
    return techs, np.array(etas), caps


def unit_costs(spot: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Daily variable cost per unit (days, units) and unit capacities."""
    plants = default_plants()
    techs, etas, caps = _unit_table()
    n = len(spot["gas"])
    costs = np.empty((n, len(techs)))
    for j, (tech, eta) in enumerate(zip(techs, etas)):
        p = plants[tech]
        fuel = {"lignite": np.full(n, LIGNITE_FUEL), "coal": spot["coal"] / COAL_MWH_TH_PER_T,
                "gas": spot["gas"]}[tech]
        costs[:, j] = fuel / eta + p.co2_intensity * spot["co2"] / eta
    return costs, caps


def simulate(years: int = 5, seed: int = 0, price_noise: float = 3.0, start: dt.date = START,
             load_noise: float | None = None, noise: bool = True) -> SyntheticMarket:
    """Simulate ``years`` years of hourly data starting at ``start``.

    With ``noise=False`` every stochastic disturbance except the fuel random
    walks is switched off, so the price equals the merit-order output.
    """
    if years < 1:
        raise ValueError("years must be >= 1")
    rng = np.random.default_rng(seed)
    end = dt.date(start.year + years, start.month, start.day) - dt.timedelta(days=1)
    n_days = (end - start).days + 1
    days = np.datetime64(start, "D") + np.arange(n_days)

    # fuels: geometric random walks
    spot = {}
    for c in ("co2", "gas", "coal", "oil"):
        steps = rng.normal(-0.5 * VOL[c] ** 2, VOL[c], n_days)
        steps[0] = 0.0
        spot[c] = SPOT0[c] * np.exp(np.cumsum(steps))

    # covariates on the local grid
    dnum = (days - np.datetime64("2000-01-01")).astype(np.int64)
    hod = np.arange(24.0)[None, :]
    dow = ((dnum + 5) % 7)[:, None]
    doy = (days - days.astype("datetime64[Y]")).astype(np.int64)[:, None]
    ann = 2 * np.pi * (doy + hod / 24) / 365.24
    tyear = (np.arange(n_days) / 365.24)[:, None]
    daily = np.sin(2 * np.pi * (hod - 8) / 24)
    weekend = np.where(dow >= 5, 1.0, 0.0)

    def ar1(shape, phi, sd):
        e = rng.normal(0, sd, shape).ravel()
        return lfilter([1.0], [1.0, -phi], e).reshape(shape)

    load_signal = (55000 + 8000 * daily - 6000 * weekend + 5000 * np.cos(ann) + 300 * tyear
                   + np.zeros((n_days, 24)))
    sig_sd = load_signal.std()
    load_sd = sig_sd / 10 if load_noise is None else load_noise
    load = load_signal + (ar1((n_days, 24), 0.9, load_sd * np.sqrt(1 - 0.81)) if noise else 0.0)

    solar_shape = np.clip(np.sin(np.pi * (hod - 5) / 14), 0, None) * (hod >= 5) * (hod <= 19)
    solar = solar_shape * (9000 - 5000 * np.cos(ann)) * (1 + 0.08 * tyear)
    wind_mean = (11000 + 5000 * np.cos(ann)) * (1 + 0.08 * tyear)
    if noise:
        wind_dev = np.exp(ar1((n_days, 24), 0.97, 0.12))
        solar = solar * np.clip(1 + rng.normal(0, 0.25, (n_days, 1)), 0.2, None)
    else:
        wind_dev = 1.0
    wind = wind_mean * wind_dev
    wind_on, wind_off = 0.8 * wind, 0.2 * wind
    res = solar + wind_on + wind_off

    costs, caps = unit_costs(spot)
    resid = np.clip(load - res, 0.0, 0.999 * caps.sum())
    merit = np.zeros((n_days, 24))
    for h in range(24):
        pos = resid[:, h] > 0
        merit[pos, h] = merit_order_prices(resid[pos, h], caps, costs[pos])
    price = merit + (rng.normal(0, price_noise, (n_days, 24)) if noise else 0.0)

    def fc(x, rel):
        return np.maximum(x * (1 + rng.normal(0, rel, x.shape)), 0.0) if noise else x.copy()

    cols = {
        "price": price, "load_actual": load, "load_da_fc": fc(load, 0.02),
        "solar_actual": solar, "solar_da_fc": fc(solar, 0.1),
        "wind_on_actual": wind_on, "wind_on_da_fc": fc(wind_on, 0.1),
        "wind_off_actual": wind_off, "wind_off_da_fc": fc(wind_off, 0.1),
    }
    filled = {k: np.zeros((n_days, 24), dtype=bool) for k in cols}
    adjustments = {"spring_interpolated": 0, "autumn_averaged": 0, "gap_filled_cells": 0}
    for d in range(n_days):
        kind = dst_kind(start + dt.timedelta(days=d))
        if kind == "spring":
            # the file omits clock hour 02:00; mirror the ingest interpolation
            for k in cols:
                cols[k][d, 2] = 0.5 * (cols[k][d, 1] + cols[k][d, 3])
                filled[k][d, 2] = True
            adjustments["spring_interpolated"] += 1
        elif kind == "autumn":
            adjustments["autumn_averaged"] += 1
    _add_res(cols, filled)
    data = HourlyDataset(start, cols, filled, "local", adjustments)

    # futures: weekday quotes, maturity 1..13
    weekdays = days[((dnum + 5) % 7) < 5]
    widx = (weekdays - days[0]).astype(np.int64)
    mats = np.arange(1, 14)[None, :]
    settles = {}
    for c in ("co2", "gas", "coal", "oil"):
        if noise:
            dev = ar1((n_days,), SLOPE_PHI, SLOPE_SD * np.sqrt(1 - SLOPE_PHI ** 2))
            slope = CONTANGO + dev[widx, None]
            idio = rng.normal(0, QUOTE_NOISE, (len(widx), 13))
        else:
            slope, idio = CONTANGO, 0.0
        settles[c] = spot[c][widx, None] * np.exp(slope * mats + idio)
    futures = futures_from_arrays(weekdays, settles)
    return SyntheticMarket(data, futures, spot, merit, load_signal)


def write_hourly_csv(data: HourlyDataset, path: str | Path) -> None:
    """Write local timestamps with UTC offsets; DST days get 23 or 25 rows."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOURLY_HEADER)
        for d in range(data.n_days):
            day = data.day(d)
            kind = dst_kind(day)
            for h in range(24):
                if kind == "spring" and h == 2:
                    continue
                vals = [repr(float(data.columns[k][d, h])) for k in RAW_COLUMNS]
                folds = (0, 1) if kind == "autumn" and h == 2 else (0,)
                for fold in folds:
                    stamp = dt.datetime(day.year, day.month, day.day, h, tzinfo=TZ, fold=fold)
                    off = stamp.utcoffset()
                    mins = int(off.total_seconds() // 60)
                    text = f"{day.isoformat()}T{h:02d}:00{'+' if mins >= 0 else '-'}{abs(mins) // 60:02d}:{abs(mins) % 60:02d}"
                    w.writerow([text, *vals])


def generate_synthetic(years: int, seed: int, out_dir: str | Path, **kwargs) -> tuple[Path, Path]:
    """Write ``hourly.csv`` and ``futures.csv`` for a seeded synthetic market."""
    if years < 4:
        raise ValueError("synthetic fixtures need at least 4 years")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = simulate(years, seed, **kwargs)
    write_hourly_csv(m.data, out / "hourly.csv")
    write_futures_csv(m.futures, out / "futures.csv")
    return out / "hourly.csv", out / "futures.csv"
