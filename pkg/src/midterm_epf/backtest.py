"""Rolling-window backtest engine.

For each model, horizon and target day in the evaluation span the engine fits
at origin ``target - h`` on the preceding ``window_rows`` estimation rows and
forecasts all 24 hours. Cells run on a thread pool (the solver releases the
GIL); records are sorted by (model, target, horizon, hour) before they are
written, so output does not depend on scheduling.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, EmptyInput
from .features import FeatureBuilder
from .fundamentals import CoefficientBounds, derive_bounds
from .ingest import FuturesStore, HourlyDataset
from .models import COMPONENTS, DailyFit, ForecastRecord, get_spec, run_cell
from .seasonal import SeasonalSet, fit_schedule
from .solver import SolverConfig

DEFAULT_HORIZONS = (1, 7, 14, 30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330, 360)
RECORD_HEADER = ("model", "origin", "horizon", "target", "hour", "prediction", "actual", "intercept",
                 *COMPONENTS, "flags")
FIT_HEADER = ("model", "origin", "horizon", "hour", "name", "coefficient", "coefficient_scaled")


@dataclass(frozen=True)
class BacktestConfig:
    models: tuple[str, ...] = ("naive", "wd", "constr")
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    eval_start: dt.date = dt.date(2018, 4, 1)
    eval_end: dt.date = dt.date(2024, 4, 1)
    window_rows: int = 1095
    step_days: int = 1
    seed: int = 0
    threads: int = 1
    noise_count: int = 0
    noise_kind: str = "both"
    bounds_mode: str = "table4"
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        hs = tuple(int(h) for h in self.horizons)
        if not hs or any(h < 1 for h in hs) or list(hs) != sorted(set(hs)):
            raise ConfigError(f"horizons must be positive and strictly ascending, got {list(hs)}")
        if self.window_rows < 400:
            raise ConfigError(f"window_rows must be >= 400, got {self.window_rows}")
        if self.step_days < 1 or self.threads < 1:
            raise ConfigError("step_days and threads must be >= 1")
        if self.eval_end < self.eval_start:
            raise ConfigError("eval_end precedes eval_start")
        if not self.models:
            raise ConfigError("no models selected")
        for m in self.models:
            get_spec(m)
        if self.noise_count < 0:
            raise ConfigError("noise_count must be >= 0")
        if self.bounds_mode not in ("appendixB", "table4", "custom"):
            raise ConfigError(f"unknown bounds mode {self.bounds_mode!r}")

    def snapshot(self) -> dict:
        d = asdict(self)
        d["eval_start"] = self.eval_start.isoformat()
        d["eval_end"] = self.eval_end.isoformat()
        d["models"] = list(self.models)
        d["horizons"] = list(self.horizons)
        return d


@dataclass
class BacktestResult:
    records: list[ForecastRecord]
    fits: dict[tuple[str, int, int], DailyFit | None]  # (model, horizon, origin index)
    manifest: dict

    def by_model_horizon(self, model: str, horizon: int) -> list[ForecastRecord]:
        return [r for r in self.records if r.model == model and r.horizon == horizon]


def data_hash(data: HourlyDataset, futures: FuturesStore) -> dict[str, str]:
    """SHA-256 over the adjusted hourly arrays and the futures curves."""
    h = hashlib.sha256()
    h.update(data.start_day.isoformat().encode())
    for k in sorted(data.columns):
        h.update(k.encode())
        h.update(np.ascontiguousarray(data.columns[k]).tobytes())
    f = hashlib.sha256()
    for c in futures.commodities():
        f.update(c.encode())
        f.update(futures.curves[c].dates.astype("datetime64[D]").astype(np.int64).tobytes())
        f.update(np.ascontiguousarray(futures.curves[c].settles).tobytes())
    return {"hourly": h.hexdigest(), "futures": f.hexdigest()}


def _targets(config: BacktestConfig) -> list[dt.date]:
    n = (config.eval_end - config.eval_start).days
    return [config.eval_start + dt.timedelta(days=d) for d in range(0, n + 1, config.step_days)]


def run_backtest(config: BacktestConfig, data: HourlyDataset, futures: FuturesStore | None = None,
                 seasonal: SeasonalSet | None = None, out_dir: str | Path | None = None,
                 bounds: CoefficientBounds | None = None, keep_fits: bool = False) -> BacktestResult:
    """Run every (model, horizon, target) cell and optionally persist the results.

    Targets outside the dataset are skipped and listed as gaps in the
    manifest. Failures inside a cell become flagged records.
    """
    t0 = time.perf_counter()
    if bounds is None:
        if config.bounds_mode == "custom":
            raise ConfigError("bounds mode 'custom' needs explicit bounds")
        bounds = derive_bounds(mode=config.bounds_mode)
    builder = FeatureBuilder(data, futures, seasonal, max_horizon=max(config.horizons) + 1)
    noise = (config.noise_count, config.noise_kind, config.seed) if config.noise_count else None

    cells, gaps = [], []
    for model in config.models:
        for h in config.horizons:
            for target in _targets(config):
                tidx = (target - data.start_day).days
                origin = tidx - h
                if tidx >= data.n_days or origin < 0:
                    gaps.append({"model": model, "horizon": h, "target": target.isoformat(),
                                 "reason": "target outside dataset" if tidx >= data.n_days
                                 else "origin before dataset start"})
                    continue
                cells.append((model, h, origin))

    def work(cell):
        model, h, origin = cell
        return run_cell(get_spec(model), builder, origin, h, bounds, config.solver,
                        config.window_rows, noise)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]

    records: list[ForecastRecord] = []
    fits: dict[tuple[str, int, int], DailyFit | None] = {}
    for cell, (recs, daily) in zip(cells, results):
        records.extend(recs)
        if keep_fits or out_dir is not None:
            fits[cell] = daily
    records.sort(key=lambda r: (r.model, r.target, r.horizon, r.hour))

    counts: dict[str, int] = {}
    flagged: dict[str, int] = {}
    for r in records:
        counts[r.model] = counts.get(r.model, 0) + 1
        if r.flags:
            flagged[r.model] = flagged.get(r.model, 0) + 1
    manifest = {
        "config": config.snapshot(),
        "data_hash": data_hash(data, builder.futures),
        "code_version": __version__,
        "start_day": data.start_day.isoformat(),
        "record_counts": counts,
        "flagged_records": flagged,
        "gaps": gaps,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    result = BacktestResult(records, fits, manifest)
    if out_dir is not None:
        write_results(result, out_dir)
    return result


# --------------------------------------------------------------------------- record store

def _fmt(v: float) -> str:
    return "" if isinstance(v, float) and math.isnan(v) else repr(float(v))


def record_row(r: ForecastRecord) -> list[str]:
    comps = [_fmt(r.components.get(c, math.nan)) for c in COMPONENTS]
    return [r.model, r.origin.isoformat(), str(r.horizon), r.target.isoformat(), str(r.hour),
            _fmt(r.prediction), _fmt(r.actual), _fmt(r.intercept), *comps, ";".join(r.flags)]


def shard_name(model: str, horizon: int, kind: str = "records") -> str:
    return f"{kind}_{model}_h{horizon:03d}.csv"


def write_results(result: BacktestResult, out_dir: str | Path) -> Path:
    """One record shard and one coefficient shard per (model, horizon), plus the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, int], list[ForecastRecord]] = {}
    for r in result.records:
        groups.setdefault((r.model, r.horizon), []).append(r)
    for (model, h), recs in sorted(groups.items()):
        with (out / shard_name(model, h)).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RECORD_HEADER)
            w.writerows(record_row(r) for r in recs)
    start = dt.date.fromisoformat(result.manifest["start_day"])
    fit_groups: dict[tuple[str, int], list] = {}
    for (model, h, origin), daily in sorted(result.fits.items()):
        if daily is not None:
            fit_groups.setdefault((model, h), []).append(daily)
    for (model, h), dailies in fit_groups.items():
        with (out / shard_name(model, h, "fits")).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FIT_HEADER)
            for daily in dailies:
                origin = (start + dt.timedelta(days=daily.origin)).isoformat()
                for hour, fit in enumerate(daily.fits, start=1):
                    if fit is None:
                        continue
                    w.writerow([model, origin, h, hour, "(intercept)", repr(float(fit.intercept)), ""])
                    for nm, b, bs in zip(fit.names, fit.coefficients, fit.coefficients_scaled):
                        w.writerow([model, origin, h, hour, nm, repr(float(b)), repr(float(bs))])
    (out / "run_manifest.json").write_text(json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_records(out_dir: str | Path) -> list[ForecastRecord]:
    """Read every record shard in ``out_dir``."""
    out = Path(out_dir)
    records = []
    for path in sorted(out.glob("records_*.csv")):
        with path.open(newline="") as fh:
            rows = csv.reader(fh)
            header = next(rows)
            if tuple(header) != RECORD_HEADER:
                raise ValueError(f"{path}: unexpected header")
            k = len(COMPONENTS)
            for row in rows:
                num = [float(v) if v != "" else math.nan for v in row[5:8 + k]]
                comps = dict(zip(COMPONENTS, num[3:]))
                comps = {c: v for c, v in comps.items() if not math.isnan(v)}
                records.append(ForecastRecord(
                    row[0], dt.date.fromisoformat(row[1]), int(row[2]), dt.date.fromisoformat(row[3]),
                    int(row[4]), num[0], num[1], num[2], comps,
                    tuple(f for f in row[8 + k].split(";") if f)))
    records.sort(key=lambda r: (r.model, r.target, r.horizon, r.hour))
    return records


# --------------------------------------------------------------------------- spurious regressors

@dataclass
class SpuriousResult:
    horizons: list[int]
    names: list[str]  # noise column names
    mean_abs_scaled: np.ndarray  # horizon x noise column, mean |scaled coefficient|
    selection_freq: dict[str, np.ndarray]  # "white"/"brownian" -> per-horizon frequency
    n_fits: np.ndarray  # fits per horizon
    backtest: BacktestResult


def spurious_experiment(config: BacktestConfig, data: HourlyDataset, futures: FuturesStore | None,
                        seasonal: SeasonalSet | None = None, seed: int = 0, count: int = 4,
                        model: str = "constr", threshold: float = 0.01) -> SpuriousResult:
    """Refit ``model`` with ``count`` white-noise and ``count`` random-walk regressors.

    A noise column counts as selected when its scaled coefficient exceeds
    ``threshold`` in absolute value.
    """
    cfg = BacktestConfig(**{**config.__dict__, "models": (model,), "noise_count": count,
                            "noise_kind": "both", "seed": seed})
    res = run_backtest(cfg, data, futures, seasonal, keep_fits=True)
    names = [f"noise_white_{i + 1}" for i in range(count)] + [f"noise_bm_{i + 1}" for i in range(count)]
    H = list(cfg.horizons)
    sums = np.zeros((len(H), len(names)))
    sel = np.zeros((len(H), len(names)))
    n = np.zeros(len(H), dtype=int)
    for (m, h, _), daily in res.fits.items():
        if daily is None:
            continue
        i = H.index(h)
        for fit in daily.fits:
            if fit is None:
                continue
            coef = dict(zip(fit.names, fit.coefficients_scaled))
            v = np.array([coef.get(nm, 0.0) for nm in names])
            sums[i] += np.abs(v)
            sel[i] += np.abs(v) > threshold
            n[i] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_abs = sums / n[:, None]
        freq = sel / n[:, None]
    if count == 0:
        by_kind = {"white": np.full(len(H), np.nan), "brownian": np.full(len(H), np.nan)}
    else:
        by_kind = {"white": freq[:, :count].mean(axis=1), "brownian": freq[:, count:].mean(axis=1)}
    return SpuriousResult(H, names, mean_abs, by_kind, n, res)


# --------------------------------------------------------------------------- seasonal models and audits

def fit_seasonal_set(data: HourlyDataset, targets: Sequence[str] = ("load", "res")) -> SeasonalSet:
    """Expanding yearly refits for each target over the fully observed days."""
    models = {}
    for t in targets:
        series = data[f"{t}_actual"]
        ok = np.all(np.isfinite(series), axis=1)
        last = int(np.nonzero(ok)[0][-1]) if ok.any() else -1
        if last < 0:
            raise EmptyInput(f"no complete days of {t}_actual")
        models[t] = fit_schedule(series[:last + 1], data.start_day, t)
    return SeasonalSet(models)


def _record_key(r: ForecastRecord) -> tuple:
    comps = tuple(repr(r.components.get(c, math.nan)) for c in COMPONENTS)
    return (r.model, r.origin, r.horizon, r.hour, repr(r.prediction), repr(r.intercept), comps, r.flags)


def audit_no_lookahead(models: Sequence[str], horizons: Sequence[int], data: HourlyDataset,
                       futures: FuturesStore, cut_day: dt.date, origins: Sequence[int],
                       window: int = 1095, bounds: CoefficientBounds | None = None) -> list[str]:
    """Compare cells at origins up to ``cut_day`` on the full and the truncated data.

    The truncated inputs hold only information available at the end of
    ``cut_day``; seasonal models are refitted on them. Returns a list of
    mismatch descriptions (empty when every record agrees bit for bit, apart
    from the realized price).
    """
    full_b = FeatureBuilder(data, futures, fit_seasonal_set(data), max_horizon=max(horizons) + 1)
    cut = data.as_of(cut_day)
    cut_b = FeatureBuilder(cut, futures.as_of(cut_day), fit_seasonal_set(cut), max_horizon=max(horizons) + 1)
    cut_idx = (cut_day - data.start_day).days
    problems = []
    for model in models:
        spec = get_spec(model)
        for h in horizons:
            for origin in origins:
                if origin > cut_idx:
                    continue
                a, _ = run_cell(spec, full_b, origin, h, bounds, window=window)
                b, _ = run_cell(spec, cut_b, origin, h, bounds, window=window)
                for ra, rb in zip(a, b):
                    if _record_key(ra) != _record_key(rb):
                        problems.append(f"{model} h={h} origin={ra.origin} hour={ra.hour}: "
                                        f"{ra.prediction!r} != {rb.prediction!r}")
    return problems
