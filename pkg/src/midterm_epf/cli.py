"""Command-line interface: ``midterm-epf <command> ...``.

Exit codes: 0 success, 1 user error (bad flag, missing file, invalid data or
config), 2 internal error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import traceback
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ConfigError, EpfError

DEMO_MODELS = ("naive", "constr", "current")
DEMO_HORIZONS = (1, 30, 180)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid date {text!r}, expected YYYY-MM-DD") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="midterm-epf", description="Mid- and long-term electricity price forecasting.")
    p.add_argument("--version", action="version", version=f"midterm-epf {__version__}")
    p.add_argument("--config", help="key = value config file (default: $MIDTERM_EPF_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded synthetic hourly.csv and futures.csv")
    g.add_argument("--years", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")

    i = sub.add_parser("ingest", help="parse, clock-adjust and persist raw CSVs")
    i.add_argument("--hourly")
    i.add_argument("--futures")
    i.add_argument("--tz-mode", choices=("local", "utc"))
    i.add_argument("--out")

    s = sub.add_parser("seasonal", help="fit or evaluate seasonal RES/load models")
    ss = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sf = ss.add_parser("fit", help="expanding yearly refits for load and RES")
    sf.add_argument("--data", help="processed data directory")
    sf.add_argument("--target", choices=("load", "res", "all"), default="all")
    sf.add_argument("--out")
    sc = ss.add_parser("forecast", help="hourly forecasts from the model valid at --from")
    sc.add_argument("--seasonal", help="directory of fitted seasonal models")
    sc.add_argument("--target", choices=("load", "res"), required=True)
    sc.add_argument("--from", dest="start", type=_date, required=True)
    sc.add_argument("--days", type=int, default=7)
    sc.add_argument("--out", help="output CSV (default: stdout)")

    b = sub.add_parser("backtest", help="rolling-window backtest")
    b.add_argument("--data", help="processed data directory")
    b.add_argument("--seasonal", help="fitted seasonal models (fitted on the fly when absent)")
    b.add_argument("--models", type=_strs)
    b.add_argument("--horizons", type=_ints)
    b.add_argument("--eval-start", type=_date)
    b.add_argument("--eval-end", type=_date)
    b.add_argument("--window-rows", type=int)
    b.add_argument("--step-days", type=int)
    b.add_argument("--threads", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--noise-count", type=int)
    b.add_argument("--bounds-mode", choices=("table4", "appendixB", "custom"))
    b.add_argument("--dump-design", help="directory for every design matrix (small runs only)")
    b.add_argument("--out")

    e = sub.add_parser("eval", help="metrics and Diebold-Mariano tests on backtest records")
    es = e.add_subparsers(dest="action", required=True, parser_class=_Parser)
    em = es.add_parser("metrics")
    em.add_argument("--runs", help="backtest output directory")
    em.add_argument("--grouping", choices=("overall", "year"), default="overall")
    em.add_argument("--out", help="output CSV (default: stdout)")
    ed = es.add_parser("dm")
    ed.add_argument("--runs")
    ed.add_argument("--a", required=True)
    ed.add_argument("--b", required=True)
    ed.add_argument("--horizon", type=int, required=True)

    d = sub.add_parser("diag", help="diagnostics")
    ds = d.add_subparsers(dest="action", required=True, parser_class=_Parser)
    da = ds.add_parser("adf", help="augmented Dickey-Fuller test on one hourly series")
    da.add_argument("--data")
    da.add_argument("--target", default="price")
    da.add_argument("--hour", type=int, default=9)
    da.add_argument("--year", type=int)
    da.add_argument("--max-lag", type=int)

    r = sub.add_parser("report", help="tables and figures")
    rs = r.add_subparsers(dest="action", required=True, parser_class=_Parser)
    rt = rs.add_parser("table9", help="RMSE by model and horizon, plus DM matrices")
    rt.add_argument("--runs")
    rt.add_argument("--metric", choices=("rmse", "mae"), default="rmse")
    rt.add_argument("--out")
    rc = rs.add_parser("components", help="stacked forecast components")
    rc.add_argument("--runs")
    rc.add_argument("--model", required=True)
    rc.add_argument("--from", dest="start", type=_date, required=True)
    rc.add_argument("--days", type=int, default=14)
    rc.add_argument("--horizon", type=int)
    rc.add_argument("--out")
    rp = rs.add_parser("paths", help="scaled coefficient paths over horizons")
    rp.add_argument("--data")
    rp.add_argument("--seasonal")
    rp.add_argument("--model", default="constr")
    rp.add_argument("--hour", type=int, default=9)
    rp.add_argument("--origin", type=_date, help="fit origin (default: second-to-last day)")
    rp.add_argument("--horizons", type=_ints, default=tuple(range(1, 361, 7)))
    rp.add_argument("--out")

    m = sub.add_parser("demo", help="synthetic end-to-end run: generate, ingest, seasonal, backtest, report")
    m.add_argument("--out")
    m.add_argument("--seed", type=int)
    m.add_argument("--years", type=int)
    m.add_argument("--threads", type=int)
    m.add_argument("--step-days", type=int)
    return p


# --------------------------------------------------------------------------- helpers

def _opt(args, cfg: dict, name: str, default: Any = None, required: bool = False) -> Any:
    v = getattr(args, name, None)
    if v is None:
        v = cfg.get(name, default)
    if v is None and required:
        raise ConfigError(f"missing --{name.replace('_', '-')} (or '{name}' in the config file)")
    return v


def _write_manifest(out: Path, command: str, args, extra: dict | None = None) -> None:
    data = {"command": command, "code_version": __version__,
            "arguments": {k: (v.isoformat() if isinstance(v, dt.date) else v)
                          for k, v in sorted(vars(args).items())}}
    if extra:
        data.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"manifest_{command.replace(' ', '_')}.json").write_text(
        json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def _require_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise FileNotFoundError(f"{what} directory {p} does not exist")
    return p


def _load_seasonal(path: str):
    from .seasonal import SeasonalSet, load_model
    d = _require_dir(path, "seasonal model")
    models: dict[str, list] = {}
    for f in sorted(d.glob("*_*.csv")):
        m = load_model(f)
        models.setdefault(m.target, []).append(m)
    for v in models.values():
        v.sort(key=lambda m: m.train_end)
    return SeasonalSet(models)


def _save_seasonal(sset, out: Path) -> list[Path]:
    from .seasonal import save_model
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for target, models in sorted(sset.models.items()):
        for m in models:
            p = out / f"{target}_{m.train_end.isoformat()}.csv"
            save_model(m, p)
            paths.append(p)
    return paths


def _bounds(cfg: dict, mode: str):
    from .config import custom_bounds
    from .fundamentals import derive_bounds
    return custom_bounds(cfg) if mode == "custom" else derive_bounds(mode=mode)


def _solver(cfg: dict):
    from .solver import SolverConfig
    keys = ("alpha", "grid_size", "grid_ratio", "tol", "max_sweeps")
    return SolverConfig(**{k: cfg[k] for k in keys if k in cfg})


def _threads(args, cfg: dict) -> int:
    from .config import env_threads
    v = getattr(args, "threads", None)
    if v is None:
        v = cfg.get("threads")
    if v is None:
        v = env_threads()
    return v or 1


# --------------------------------------------------------------------------- commands

def cmd_generate(args, cfg) -> int:
    from .synthetic import generate_synthetic
    out = Path(_opt(args, cfg, "out", required=True))
    years, seed = _opt(args, cfg, "years", 5), _opt(args, cfg, "seed", 0)
    hourly, futures = generate_synthetic(years, seed, out)
    _write_manifest(out, "generate", args, {"files": [hourly.name, futures.name]})
    print(f"wrote {hourly} and {futures}")
    return 0


def cmd_ingest(args, cfg) -> int:
    from .ingest import load_hourly, parse_futures_csv, save_processed
    hourly = _opt(args, cfg, "hourly", required=True)
    futures = _opt(args, cfg, "futures", required=True)
    out = Path(_opt(args, cfg, "out", required=True))
    ds = load_hourly(hourly, _opt(args, cfg, "tz_mode", "local"))
    store = parse_futures_csv(futures)
    save_processed(ds, store, out)
    _write_manifest(out, "ingest", args, {"days": ds.n_days, "adjustments": ds.adjustments})
    print(f"{ds.n_days} days {ds.start_day}..{ds.end_day}; adjustments {ds.adjustments}")
    return 0


def cmd_seasonal(args, cfg) -> int:
    if args.action == "fit":
        from .backtest import fit_seasonal_set
        from .ingest import load_processed
        ds, _ = load_processed(_require_dir(_opt(args, cfg, "data", required=True), "data"))
        targets = ("load", "res") if args.target == "all" else (args.target,)
        sset = fit_seasonal_set(ds, targets)
        out = Path(_opt(args, cfg, "out", required=True))
        paths = _save_seasonal(sset, out)
        _write_manifest(out, "seasonal fit", args, {"models": [p.name for p in paths]})
        for p in paths:
            print(p)
        return 0
    sset = _load_seasonal(_opt(args, cfg, "seasonal", required=True))
    model = sset.for_origin(args.target, args.start)
    if model is None:
        from .errors import MissingSeasonalModel
        raise MissingSeasonalModel(f"no {args.target} model trained before {args.start}")
    grid = model.predict_grid(args.start, args.days)
    lines = ["day,hour,forecast"]
    for k in range(args.days):
        day = (args.start + dt.timedelta(days=k)).isoformat()
        lines += [f"{day},{h + 1},{grid[k, h]!r}" for h in range(24)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _backtest_config(args, cfg, **overrides):
    from .backtest import BacktestConfig
    base = BacktestConfig()
    kw = {}
    for name in ("models", "horizons", "eval_start", "eval_end", "window_rows", "step_days", "seed",
                 "noise_count", "bounds_mode"):
        kw[name] = _opt(args, cfg, name, getattr(base, name))
    kw["noise_kind"] = cfg.get("noise_kind", base.noise_kind)
    kw["threads"] = _threads(args, cfg)
    kw["solver"] = _solver(cfg)
    kw.update(overrides)
    return BacktestConfig(**kw)


def _needs_seasonal(models) -> bool:
    from .models import get_spec
    return any((s.current or s.short_term_hybrid or s.seasonal_rl) and s.uses("res_load")
               for s in map(get_spec, models))


def cmd_backtest(args, cfg) -> int:
    from .backtest import fit_seasonal_set, run_backtest
    from .ingest import load_processed
    config = _backtest_config(args, cfg)
    ds, store = load_processed(_require_dir(_opt(args, cfg, "data", required=True), "data"))
    seas = _opt(args, cfg, "seasonal")
    sset = _load_seasonal(seas) if seas else (fit_seasonal_set(ds) if _needs_seasonal(config.models) else None)
    out = Path(_opt(args, cfg, "out", required=True))
    res = run_backtest(config, ds, store, sset, out, _bounds(cfg, config.bounds_mode))
    if args.dump_design:
        dump = Path(args.dump_design)
        dump.mkdir(parents=True, exist_ok=True)
        for (model, h, origin), daily in sorted(res.fits.items()):
            for design in (daily.designs if daily is not None else []):
                if design is not None:
                    design.to_csv(dump / f"design_{model}_h{h:03d}_o{origin:05d}_H{design.hour:02d}.csv")
    print(f"{len(res.records)} records, {len(res.manifest['gaps'])} gaps, "
          f"{res.manifest['wall_time_s']} s -> {out}")
    return 0


def _records(args, cfg):
    from .backtest import load_records
    recs = load_records(_require_dir(_opt(args, cfg, "runs", required=True), "runs"))
    if not recs:
        from .errors import EmptyGroup
        raise EmptyGroup("no record shards found")
    return recs


def cmd_eval(args, cfg) -> int:
    from . import eval as ev
    recs = _records(args, cfg)
    if args.action == "metrics":
        res = ev.compute_metrics(recs, args.grouping)
        lines = ["model,horizon,group,rmse,mae,n_days"]
        lines += [f"{r.model},{r.horizon},{r.group},{r.rmse!r},{r.mae!r},{r.n_days}" for r in res]
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    a = [r for r in recs if r.model == args.a]
    b = [r for r in recs if r.model == args.b]
    for name, rs in ((args.a, a), (args.b, b)):
        if not rs:
            raise ConfigError(f"no records for model {name!r}")
    r = ev.dm_test(a, b, args.horizon)
    print("model_a,model_b,horizon,statistic,p_value,n_days,hac_lag,loss")
    print(f"{r.model_a},{r.model_b},{r.horizon},{r.statistic!r},{r.p_value!r},{r.n_days},{r.hac_lag},{r.loss}")
    return 0


def cmd_diag(args, cfg) -> int:
    import numpy as np

    from .eval import adf_test
    from .ingest import load_processed
    ds, _ = load_processed(_require_dir(_opt(args, cfg, "data", required=True), "data"))
    if not 1 <= args.hour <= 24:
        raise ConfigError("--hour must lie in 1..24")
    col = ds[args.target] if args.target in ds.columns else None
    if col is None:
        raise ConfigError(f"unknown series {args.target!r}; choose from {', '.join(sorted(ds.columns))}")
    series = col[:, args.hour - 1]
    days = ds.days.astype("datetime64[Y]").astype(int) + 1970
    if args.year is not None:
        series = series[days == args.year]
        if series.size == 0:
            raise ConfigError(f"no data in {args.year}")
    r = adf_test(series[np.isfinite(series)], args.max_lag, f"{args.target}/h{args.hour}/{args.year or 'all'}")
    print("series,lag_order,statistic,p_value,n_obs,reject_at_5pct")
    print(f"{r.series_id},{r.lag_order},{r.statistic!r},{r.p_value!r},{r.n_obs},{r.reject_at_5pct}")
    return 0


def report_table9(recs, out: Path, metric: str = "rmse") -> list[Path]:
    from . import eval as ev
    from .errors import DegenerateVariance, EmptyGroup
    out.mkdir(parents=True, exist_ok=True)
    overall = ev.compute_metrics(recs, "overall")
    (out / "table9.csv").write_text(ev.render_tables(overall, "by_horizon", metric, svg_path=out / "table9.svg"))
    yearly = ev.compute_metrics(recs, "year")
    written = [out / "table9.csv", out / "table9.svg"]
    models = sorted({r.model for r in recs})
    for h in sorted({r.horizon for r in recs}):
        (out / f"by_year_h{h:03d}.csv").write_text(ev.render_tables(yearly, "by_year", metric, horizon=h))
        written.append(out / f"by_year_h{h:03d}.csv")
        dms = []
        for a in models:
            for b in models:
                if a == b:
                    continue
                try:
                    dms.append(ev.dm_test([r for r in recs if r.model == a], [r for r in recs if r.model == b], h))
                except (DegenerateVariance, EmptyGroup):
                    pass
        if dms:
            svg = out / f"dm_h{h:03d}.svg"
            (out / f"dm_h{h:03d}.csv").write_text(ev.render_tables(dms, "dm_matrix", horizon=h, svg_path=svg))
            written += [out / f"dm_h{h:03d}.csv", svg]
    return written


def report_components(recs, model: str, start: dt.date, days: int, horizon: int | None, out: Path) -> Path:
    from .eval import render_components
    sel = [r for r in recs if r.model == model]
    if not sel:
        raise ConfigError(f"no records for model {model!r}")
    h = horizon if horizon is not None else min(r.horizon for r in sel)
    end = start + dt.timedelta(days=days - 1)
    sel = [r for r in sel if r.horizon == h and start <= r.target <= end]
    out.mkdir(parents=True, exist_ok=True)
    return render_components(sel, out / f"components_{model}_h{h:03d}.svg", f"{model}, h = {h}")


def report_paths(data, futures, sset, model: str, hour: int, origin: dt.date | None,
                 horizons: Sequence[int], out: Path) -> Path:
    from .eval import render_coefficient_paths
    from .features import FeatureBuilder
    from .models import coefficient_path, get_spec
    b = FeatureBuilder(data, futures, sset, max_horizon=max(horizons) + 1)
    # the last origin whose next-day forecasts exist
    idx = data.n_days - 2 if origin is None else (origin - data.start_day).days
    hs, names, mat = coefficient_path(get_spec(model), b, horizons, idx, hour)
    out.mkdir(parents=True, exist_ok=True)
    with (out / f"paths_{model}_H{hour:02d}.csv").open("w") as fh:
        fh.write("horizon," + ",".join(names) + "\n")
        for h, row in zip(hs, mat):
            fh.write(f"{h}," + ",".join(repr(float(v)) for v in row) + "\n")
    return render_coefficient_paths(hs, names, mat, out / f"paths_{model}_H{hour:02d}.svg",
                                    f"{model}, hour {hour}")


def cmd_report(args, cfg) -> int:
    out = Path(_opt(args, cfg, "out", required=True))
    if args.action == "paths":
        from .ingest import load_processed
        ds, store = load_processed(_require_dir(_opt(args, cfg, "data", required=True), "data"))
        seas = _opt(args, cfg, "seasonal")
        sset = _load_seasonal(seas) if seas else None
        print(report_paths(ds, store, sset, args.model, args.hour, args.origin, args.horizons, out))
        return 0
    recs = _records(args, cfg)
    if args.action == "table9":
        for p in report_table9(recs, out, args.metric):
            print(p)
    else:
        print(report_components(recs, args.model, args.start, args.days, args.horizon, out))
    _write_manifest(out, f"report {args.action}", args)
    return 0


def run_demo(out: Path, seed: int = 0, years: int = 5, threads: int = 1, step_days: int = 7) -> dict:
    """Generate, ingest, fit seasonal models, backtest three models and write reports."""
    from .backtest import BacktestConfig, fit_seasonal_set, run_backtest
    from .ingest import load_hourly, parse_futures_csv, save_processed
    from .synthetic import START, generate_synthetic
    hourly, futures = generate_synthetic(years, seed, out / "raw")
    ds = load_hourly(hourly)
    store = parse_futures_csv(futures)
    save_processed(ds, store, out / "processed")
    sset = fit_seasonal_set(ds)
    _save_seasonal(sset, out / "seasonal")
    last_year = START.year + years - 1
    config = BacktestConfig(models=DEMO_MODELS, horizons=DEMO_HORIZONS, eval_start=dt.date(last_year, 1, 1),
                            eval_end=dt.date(last_year, 12, 31), step_days=step_days, seed=seed, threads=threads)
    res = run_backtest(config, ds, store, sset, out / "runs")
    reports = out / "report"
    report_table9(res.records, reports)
    report_components(res.records, "current", dt.date(last_year, 3, 1), 28, 30, reports)
    report_paths(ds, store, sset, "constr", 9, None, tuple(range(1, 361, 15)), reports)
    return res.manifest


def cmd_demo(args, cfg) -> int:
    out = Path(_opt(args, cfg, "out", required=True))
    manifest = run_demo(out, _opt(args, cfg, "seed", 0), _opt(args, cfg, "years", 5), _threads(args, cfg),
                        _opt(args, cfg, "step_days", 7))
    _write_manifest(out, "demo", args, {"record_counts": manifest["record_counts"]})
    print(f"demo complete: {manifest['record_counts']} -> {out}")
    return 0


COMMANDS = {"generate": cmd_generate, "ingest": cmd_ingest, "seasonal": cmd_seasonal,
            "backtest": cmd_backtest, "eval": cmd_eval, "diag": cmd_diag, "report": cmd_report,
            "demo": cmd_demo}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error [cli.UsageError]: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    try:
        from .config import load_config
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except EpfError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError, ValueError) as exc:
        print(f"error [cli.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
