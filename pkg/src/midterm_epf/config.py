"""Plain-text ``key = value`` configuration.

Lines starting with ``#`` are comments. Every key is validated and typed
before any work starts; unknown keys are rejected. The file path comes from
``--config`` or the ``MIDTERM_EPF_CONFIG`` environment variable, and
``MIDTERM_EPF_THREADS`` is the fallback worker count.
"""

from __future__ import annotations

import datetime as dt
import os
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .fundamentals import TABLE4_LOWER

ENV_CONFIG = "MIDTERM_EPF_CONFIG"
ENV_THREADS = "MIDTERM_EPF_THREADS"


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


KEYS: dict[str, Callable[[str], Any]] = {
    # data
    "hourly": str, "futures": str, "data": str, "seasonal": str, "runs": str, "out": str,
    "tz_mode": _choice("local", "utc"),
    # bounds
    "bounds_mode": _choice("table4", "appendixB", "custom"),
    # solver
    "alpha": float, "grid_size": int, "grid_ratio": float, "tol": float, "max_sweeps": int,
    # backtest
    "models": _str_list, "horizons": _int_list, "eval_start": dt.date.fromisoformat,
    "eval_end": dt.date.fromisoformat, "window_rows": int, "step_days": int, "threads": int,
    "seed": int, "noise_count": int, "noise_kind": _choice("both", "white", "brownian"),
    # synthetic data
    "years": int,
}
KEYS.update({f"bound_{g}_{side}": float for g in TABLE4_LOWER for side in ("lower", "upper")})


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path: str | Path | None = None) -> dict[str, Any]:
    """Read the config file named by ``path`` or the environment; empty when neither is set."""
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return parse_config(p.read_text(), str(p))


def env_threads() -> int | None:
    text = os.environ.get(ENV_THREADS)
    if text is None or text == "":
        return None
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"{ENV_THREADS} must be an integer, got {text!r}") from None
    if n < 1:
        raise ConfigError(f"{ENV_THREADS} must be >= 1")
    return n


def custom_bounds(cfg: dict[str, Any]):
    """CoefficientBounds from ``bound_<group>_<side>`` keys over the published defaults."""
    from .fundamentals import derive_bounds
    base = derive_bounds(mode="table4")
    out = base
    for g in TABLE4_LOWER:
        lo, up = base.get(g)
        lo = cfg.get(f"bound_{g}_lower", lo)
        up = cfg.get(f"bound_{g}_upper", up)
        if lo > up:
            raise ConfigError(f"bound for {g}: lower {lo} exceeds upper {up}")
        out = out.with_group(g, lo, up)
    return out
