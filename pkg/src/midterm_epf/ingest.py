"""Hourly market data and futures curves: parsing, clock-change regularization,
persistence.

Hours are indexed 1..24 as local clock hour + 1 in Europe/Berlin time. A spring
transition day therefore lacks hour 3 and an autumn transition day carries hour 3
twice; :func:`adjust_clock_change` turns both into regular 24-hour days.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (DuplicateRow, EmptyInput, InvalidMaturity, MalformedRow, MissingData,
                     NonPositiveSettle, StaleQuote, UnknownColumn)

TZ = ZoneInfo("Europe/Berlin")
UTC = dt.timezone.utc

HOURLY_HEADER = ("timestamp", "price_eur_mwh", "load_actual_mw", "load_da_fc_mw",
                 "solar_actual_mw", "solar_da_fc_mw", "wind_on_actual_mw", "wind_on_da_fc_mw",
                 "wind_off_actual_mw", "wind_off_da_fc_mw")
FUTURES_HEADER = ("quote_date", "commodity", "maturity_months", "settle")

# internal column names, in file order after the timestamp
RAW_COLUMNS = ("price", "load_actual", "load_da_fc", "solar_actual", "solar_da_fc",
               "wind_on_actual", "wind_on_da_fc", "wind_off_actual", "wind_off_da_fc")
NONNEGATIVE = RAW_COLUMNS[1:]
COMMODITIES = ("co2", "gas", "coal", "oil")
MAX_MATURITY = 13
CARRY_FORWARD_DAYS = 10
MAX_GAP_HOURS = 3


# --------------------------------------------------------------------------- hourly

@dataclass(frozen=True)
class RawRecord:
    """One parsed input row, keyed by local day and hour 1..24."""

    local_day: dt.date
    hour: int
    values: tuple[float, ...]
    line: int
    duplicate_pending: bool = False


def dst_kind(day: dt.date) -> str | None:
    """``"spring"``, ``"autumn"`` or ``None`` for a Europe/Berlin calendar day."""
    start = dt.datetime(day.year, day.month, day.day, tzinfo=TZ).utcoffset()
    nxt = day + dt.timedelta(days=1)
    end = dt.datetime(nxt.year, nxt.month, nxt.day, tzinfo=TZ).utcoffset()
    if end > start:
        return "spring"
    if end < start:
        return "autumn"
    return None


def _parse_timestamp(text: str, tz_mode: str) -> dt.datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(text)
    if ts.tzinfo is None:
        if tz_mode == "utc":
            ts = ts.replace(tzinfo=UTC)
        else:
            return ts  # wall clock already local
    return ts.astimezone(TZ).replace(tzinfo=None)


def _parse_float(text: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na"):
        return math.nan
    return float(text)


def parse_hourly_csv(path: str | Path, tz_mode: str = "local") -> list[RawRecord]:
    """Read ``hourly.csv`` into raw records.

    Offset-aware timestamps are converted to Berlin local time. Naive
    timestamps are taken as local wall clock (``tz_mode="local"``) or UTC
    (``tz_mode="utc"``). Empty cells become NaN and are resolved later.
    """
    if tz_mode not in ("local", "utc"):
        raise ValueError(f"tz_mode must be 'local' or 'utc', got {tz_mode!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyInput(f"{path}: no rows")
    _check_header(rows[0][1], HOURLY_HEADER, path)
    if len(rows) == 1:
        raise EmptyInput(f"{path}: header only")

    records: list[RawRecord] = []
    seen: dict[tuple[dt.date, int], int] = {}  # key -> index of first record
    for line, row in rows[1:]:
        if len(row) != len(HOURLY_HEADER):
            raise MalformedRow(f"expected {len(HOURLY_HEADER)} fields, got {len(row)}", line)
        try:
            ts = _parse_timestamp(row[0], tz_mode)
            values = tuple(_parse_float(c) for c in row[1:])
        except ValueError as exc:
            raise MalformedRow(str(exc), line) from None
        if ts.minute or ts.second:
            raise MalformedRow(f"timestamp {row[0]!r} is not on the hour", line)
        for name, v in zip(RAW_COLUMNS, values):
            if name in NONNEGATIVE and v < 0:
                raise MalformedRow(f"{name} must be non-negative, got {v}", line)
            if math.isinf(v):
                raise MalformedRow(f"{name} is infinite", line)
        key = (ts.date(), ts.hour + 1)
        dup = False
        if key in seen:
            first = seen[key]
            autumn_repeat = dst_kind(key[0]) == "autumn" and key[1] == 3 and not records[first].duplicate_pending
            if not autumn_repeat:
                raise DuplicateRow(f"line {line}: duplicate row for {key[0]} hour {key[1]}")
            prev = records[first]
            records[first] = RawRecord(prev.local_day, prev.hour, prev.values, prev.line, True)
            dup = True
        else:
            seen[key] = len(records)
        records.append(RawRecord(key[0], key[1], values, line, dup))
    return records


def _check_header(row: Sequence[str], expected: Sequence[str], path: Path) -> None:
    got = [c.strip() for c in row]
    unknown = [c for c in got if c not in expected]
    if unknown:
        raise UnknownColumn(f"{path}: unknown column(s) {', '.join(unknown)}")
    if tuple(got) != tuple(expected):
        raise MalformedRow(f"{path}: header must be exactly {','.join(expected)}", 1)


@dataclass(frozen=True)
class HourlyDataset:
    """Dense (days x 24) hourly table on a contiguous local-day grid.

    ``columns`` holds the raw columns plus the aggregates ``res_actual`` and
    ``res_da_fc``. ``filled`` marks cells produced by interpolation or
    averaging rather than read directly.
    """

    start_day: dt.date
    columns: dict[str, np.ndarray]
    filled: dict[str, np.ndarray]
    tz_mode: str = "local"
    adjustments: dict[str, int] = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return self.columns["price"].shape[0]

    @property
    def end_day(self) -> dt.date:
        return self.start_day + dt.timedelta(days=self.n_days - 1)

    @property
    def days(self) -> np.ndarray:
        return np.datetime64(self.start_day, "D") + np.arange(self.n_days)

    def index(self, day: dt.date) -> int:
        i = (day - self.start_day).days
        if not 0 <= i < self.n_days:
            raise KeyError(f"{day} outside dataset {self.start_day}..{self.end_day}")
        return i

    def day(self, i: int) -> dt.date:
        return self.start_day + dt.timedelta(days=int(i))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def truncate(self, last_day: dt.date) -> "HourlyDataset":
        """Copy holding only days up to and including ``last_day``."""
        n = (last_day - self.start_day).days + 1
        cols = {k: v[:n].copy() for k, v in self.columns.items()}
        filled = {k: v[:n].copy() for k, v in self.filled.items()}
        return HourlyDataset(self.start_day, cols, filled, self.tz_mode, dict(self.adjustments))


    def as_of(self, day: dt.date) -> "HourlyDataset":
        """Information available at the end of ``day``.

        Keeps the following day's day-ahead forecast columns (published on
        ``day``) and blanks everything else dated after ``day``.
        """
        last = min(day + dt.timedelta(days=1), self.end_day)
        out = self.truncate(last)
        if last > day:
            for k, v in out.columns.items():
                if not k.endswith("_da_fc"):
                    v[-1] = np.nan
        return out


def _fill_short_gaps(series: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Linear interpolation over NaN runs of at most MAX_GAP_HOURS interior hours."""
    bad = np.isnan(series)
    if not bad.any():
        return series, bad
    idx = np.flatnonzero(bad)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        if len(run) > MAX_GAP_HOURS or run[0] == 0 or run[-1] == len(series) - 1:
            raise MissingData(f"{name}: gap of {len(run)} hour(s) at flat index {run[0]} cannot be filled")
    good = ~bad
    out = series.copy()
    out[bad] = np.interp(idx, np.flatnonzero(good), series[good])
    return out, bad


def adjust_clock_change(records: Iterable[RawRecord], tz_mode: str = "local") -> HourlyDataset:
    """Regularize raw records to exactly 24 hours per day.

    A spring transition day may lack one hour, filled by linear interpolation
    of its neighbours per column. An autumn transition day may repeat one hour,
    replaced by the mean of both rows. Non-price gaps of up to three hours are
    interpolated; any missing price is an error.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no hourly records")
    days = sorted({r.local_day for r in records})
    start, end = days[0], days[-1]
    n_days = (end - start).days + 1
    ncol = len(RAW_COLUMNS)
    sums = np.zeros((n_days, 24, ncol))
    counts = np.zeros((n_days, 24), dtype=int)
    for r in records:
        d = (r.local_day - start).days
        sums[d, r.hour - 1] += r.values
        counts[d, r.hour - 1] += 1

    adjustments = {"spring_interpolated": 0, "autumn_averaged": 0, "gap_filled_cells": 0}
    spring_fill = np.zeros((n_days, 24), dtype=bool)
    for d in range(n_days):
        day = start + dt.timedelta(days=d)
        kind = dst_kind(day)
        dup = np.flatnonzero(counts[d] > 1)
        miss = np.flatnonzero(counts[d] == 0)
        if len(dup):
            if kind != "autumn" or len(dup) > 1 or counts[d, dup[0]] > 2:
                raise DuplicateRow(f"{day}: duplicate hour(s) {list(dup + 1)} outside an autumn clock change")
            adjustments["autumn_averaged"] += 1
        if len(miss) == 0:
            continue
        if len(miss) > 1 or kind != "spring":
            raise MissingData(f"{day}: missing hour(s) {list(miss + 1)}")
        spring_fill[d, miss[0]] = True
        adjustments["spring_interpolated"] += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        table = sums / np.maximum(counts, 1)[:, :, None]
    flat = table.reshape(n_days * 24, ncol)
    flat[spring_fill.ravel()] = np.nan
    sf = spring_fill.ravel()

    columns: dict[str, np.ndarray] = {}
    filled: dict[str, np.ndarray] = {}
    for j, name in enumerate(RAW_COLUMNS):
        s = flat[:, j].copy()
        if sf.any():
            # spring hole: midpoint of the adjacent hours
            pos = np.flatnonzero(sf)
            if pos[0] == 0 or pos[-1] == len(s) - 1:
                raise MissingData(f"{name}: clock-change gap at the data boundary")
            s[pos] = 0.5 * (s[pos - 1] + s[pos + 1])
        if name == "price":
            bad = np.isnan(s)
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                raise MissingData(f"price missing on {start + dt.timedelta(days=k // 24)} hour {k % 24 + 1}")
            gap = np.zeros(len(s), dtype=bool)
        else:
            s, gap = _fill_short_gaps(s, name)
            adjustments["gap_filled_cells"] += int(gap.sum())
        columns[name] = s.reshape(n_days, 24)
        filled[name] = (gap | sf).reshape(n_days, 24)
    _add_res(columns, filled)
    return HourlyDataset(start, columns, filled, tz_mode, adjustments)


def _add_res(columns: dict[str, np.ndarray], filled: dict[str, np.ndarray]) -> None:
    for kind in ("actual", "da_fc"):
        parts = [f"{src}_{kind}" for src in ("solar", "wind_on", "wind_off")]
        columns[f"res_{kind}"] = columns[parts[0]] + columns[parts[1]] + columns[parts[2]]
        filled[f"res_{kind}"] = filled[parts[0]] | filled[parts[1]] | filled[parts[2]]


def load_hourly(path: str | Path, tz_mode: str = "local") -> HourlyDataset:
    return adjust_clock_change(parse_hourly_csv(path, tz_mode), tz_mode)


# --------------------------------------------------------------------------- futures

@dataclass(frozen=True)
class FuturesCurve:
    """Settlement history for one commodity: quote dates x maturities 1..13."""

    dates: np.ndarray  # datetime64[D], ascending
    settles: np.ndarray  # (n_dates, 13), NaN where not quoted


@dataclass(frozen=True)
class FuturesStore:
    curves: dict[str, FuturesCurve]

    def commodities(self) -> list[str]:
        return sorted(self.curves)

    def as_of(self, day: dt.date) -> "FuturesStore":
        """Copy holding only quotes dated on or before ``day``."""
        last = np.datetime64(day, "D")
        out = {}
        for c, curve in self.curves.items():
            keep = curve.dates <= last
            out[c] = FuturesCurve(curve.dates[keep].copy(), curve.settles[keep].copy())
        return FuturesStore(out)

    def series(self, commodity: str, maturity: int, dates: np.ndarray) -> np.ndarray:
        """Carried-forward settles for many query dates; NaN where stale.

        For each date, the settle of the latest quote on or before it for the
        given maturity, if no older than the carry-forward cap.
        """
        if not 1 <= maturity <= MAX_MATURITY:
            raise InvalidMaturity(f"maturity {maturity} outside 1..{MAX_MATURITY}")
        dates = np.asarray(dates, dtype="datetime64[D]")
        curve = self.curves.get(commodity)
        out = np.full(dates.shape, np.nan)
        if curve is None:
            return out
        col = curve.settles[:, maturity - 1]
        ok = ~np.isnan(col)
        qd, qv = curve.dates[ok], col[ok]
        if len(qd) == 0:
            return out
        pos = np.searchsorted(qd, dates, side="right") - 1
        has = pos >= 0
        age = np.where(has, (dates - qd[np.maximum(pos, 0)]).astype(int), CARRY_FORWARD_DAYS + 1)
        fresh = has & (age <= CARRY_FORWARD_DAYS)
        out[fresh] = qv[pos[fresh]]
        return out


def last_quote_on_or_before(store: FuturesStore, date: dt.date, commodity: str,
                            maturity_months: int) -> float:
    """Settle of the latest quote dated on or before ``date``, at most 10 days old."""
    v = store.series(commodity, maturity_months, np.array([np.datetime64(date, "D")]))[0]
    if np.isnan(v):
        raise StaleQuote(f"no {commodity} M{maturity_months} quote within "
                         f"{CARRY_FORWARD_DAYS} days before {date}")
    return float(v)


def parse_futures_csv(path: str | Path) -> FuturesStore:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyInput(f"{path}: no rows")
    _check_header(rows[0][1], FUTURES_HEADER, path)
    quotes: dict[str, dict[np.datetime64, dict[int, float]]] = {}
    for line, row in rows[1:]:
        if len(row) != 4:
            raise MalformedRow(f"expected 4 fields, got {len(row)}", line)
        try:
            qd = np.datetime64(dt.date.fromisoformat(row[0].strip()), "D")
            maturity = int(row[2])
            settle = float(row[3])
        except ValueError as exc:
            raise MalformedRow(str(exc), line) from None
        commodity = row[1].strip().lower()
        if commodity not in COMMODITIES:
            raise MalformedRow(f"unknown commodity {row[1]!r}", line)
        if not 1 <= maturity <= MAX_MATURITY:
            raise InvalidMaturity(f"line {line}: maturity {maturity} outside 1..{MAX_MATURITY}")
        if not settle > 0 or math.isinf(settle):
            raise NonPositiveSettle(f"line {line}: settle {settle} must be positive")
        slot = quotes.setdefault(commodity, {}).setdefault(qd, {})
        if maturity in slot:
            raise DuplicateRow(f"line {line}: duplicate quote {row[0]} {commodity} M{maturity}")
        slot[maturity] = settle
    return _store_from_quotes(quotes)


def _store_from_quotes(quotes) -> FuturesStore:
    curves = {}
    for commodity, by_date in quotes.items():
        dates = np.array(sorted(by_date), dtype="datetime64[D]")
        settles = np.full((len(dates), MAX_MATURITY), np.nan)
        for i, d in enumerate(dates):
            for m, v in by_date[d].items():
                settles[i, m - 1] = v
        curves[commodity] = FuturesCurve(dates, settles)
    return FuturesStore(curves)


def futures_from_arrays(dates: np.ndarray, settles: dict[str, np.ndarray]) -> FuturesStore:
    """Build a store from a shared date axis and per-commodity (n, 13) arrays."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    return FuturesStore({c: FuturesCurve(dates.copy(), np.asarray(v, float).copy())
                         for c, v in settles.items()})


# --------------------------------------------------------------------------- persistence

PROCESSED_HOURLY = "hourly_adjusted.csv"
PROCESSED_FUTURES = "futures.csv"
MANIFEST = "manifest.json"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_futures_csv(store: FuturesStore, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FUTURES_HEADER)
        for commodity in store.commodities():
            curve = store.curves[commodity]
            for d, row in zip(curve.dates, curve.settles):
                for m in range(MAX_MATURITY):
                    if not np.isnan(row[m]):
                        w.writerow([str(d), commodity, m + 1, _fmt(row[m])])


def save_processed(ds: HourlyDataset, store: FuturesStore, out_dir: str | Path) -> Path:
    """Write the adjusted table, the futures store and a manifest to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = list(RAW_COLUMNS)
    with (out / PROCESSED_HOURLY).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["local_day", "hour", *names, *[f"{n}_filled" for n in names]])
        for d in range(ds.n_days):
            day = ds.day(d).isoformat()
            for h in range(24):
                w.writerow([day, h + 1, *[_fmt(ds.columns[n][d, h]) for n in names],
                            *[int(ds.filled[n][d, h]) for n in names]])
    write_futures_csv(store, out / PROCESSED_FUTURES)
    manifest = {
        "start_day": ds.start_day.isoformat(),
        "end_day": ds.end_day.isoformat(),
        "tz_mode": ds.tz_mode,
        "adjustments": ds.adjustments,
        "commodities": store.commodities(),
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_processed(out_dir: str | Path) -> tuple[HourlyDataset, FuturesStore]:
    out = Path(out_dir)
    manifest = json.loads((out / MANIFEST).read_text())
    start = dt.date.fromisoformat(manifest["start_day"])
    end = dt.date.fromisoformat(manifest["end_day"])
    n_days = (end - start).days + 1
    names = list(RAW_COLUMNS)
    with (out / PROCESSED_HOURLY).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    if len(rows) != 24 * n_days:
        raise MissingData(f"{out / PROCESSED_HOURLY}: expected {24 * n_days} rows, got {len(rows)}")
    k = len(names)
    vals = np.array([[float(c) for c in r[2:2 + k]] for r in rows])
    flags = np.array([[c == "1" for c in r[2 + k:]] for r in rows], dtype=bool)
    columns = {n: vals[:, j].reshape(n_days, 24).copy() for j, n in enumerate(names)}
    filled = {n: flags[:, j].reshape(n_days, 24).copy() for j, n in enumerate(names)}
    _add_res(columns, filled)
    ds = HourlyDataset(start, columns, filled, manifest["tz_mode"], dict(manifest["adjustments"]))
    return ds, parse_futures_csv(out / PROCESSED_FUTURES)
