"""Plant characteristics, marginal costs and fundamentally derived coefficient bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DivisionByZero, EmptyTable, Scarcity

INF = math.inf

COAL_MWH_TH_PER_T = 8.141
# 1,000 bbl oil = 1.700 MWh_th
OIL_MWH_TH_PER_BBL = 1.700 / 1000.0

BOUND_GROUPS = ("autoregressive", "load", "res", "co2", "gas", "coal", "oil", "calendar")
FUELS = ("co2", "gas", "coal", "oil")


@dataclass(frozen=True)
class PlantCharacteristics:
    """Technical parameters of one generation technology.

    ``conversion`` is MWh_th per native fuel unit (t for coal, bbl for oil,
    MWh_th for gas), so ``fuel_price / conversion`` is EUR/MWh_th. ``lot`` is
    the number of native units per trading lot used when expressing the
    coefficient bound (1000 bbl for oil).
    """

    technology: str
    efficiency_old: float
    efficiency_new: float
    co2_intensity: float | None
    conversion: float = 1.0
    lot: float = 1.0

    def __post_init__(self):
        for eta in (self.efficiency_old, self.efficiency_new):
            if not 0.0 < eta <= 1.0:
                raise ValueError(f"{self.technology}: efficiency must lie in (0, 1], got {eta}")
        if self.co2_intensity is not None and self.co2_intensity < 0:
            raise ValueError(f"{self.technology}: negative CO2 intensity")
        if self.conversion <= 0 or self.lot <= 0:
            raise ValueError(f"{self.technology}: conversion and lot must be positive")

    @property
    def efficiencies(self) -> tuple[float, float]:
        return (self.efficiency_old, self.efficiency_new)


def default_plants() -> dict[str, PlantCharacteristics]:
    """Built-in characteristics table (old and new fleet)."""
    return {
        "lignite": PlantCharacteristics("lignite", 0.30, 0.43, 0.4),
        "coal": PlantCharacteristics("coal", 0.35, 0.46, 0.3, COAL_MWH_TH_PER_T),
        "gas": PlantCharacteristics("gas", 0.25, 0.40, 0.2),
        "oil": PlantCharacteristics("oil", 0.24, 0.44, None, OIL_MWH_TH_PER_BBL, 1000.0),
    }


def variable_cost(fuel_price: float, co2_price: float, plant: PlantCharacteristics,
                  other_cost: float = 0.0, efficiency: float | str = "new") -> float:
    """Short-run variable cost in EUR/MWh_el.

    ``fuel_price`` is in the plant's native unit and converted to EUR/MWh_th
    with ``plant.conversion``. ``efficiency`` is ``"old"``, ``"new"`` or an
    explicit value.
    """
    if efficiency == "old":
        eta = plant.efficiency_old
    elif efficiency == "new":
        eta = plant.efficiency_new
    else:
        eta = float(efficiency)
    if eta == 0.0:
        raise DivisionByZero(f"{plant.technology}: efficiency is zero")
    fuel_th = fuel_price / plant.conversion
    eps = plant.co2_intensity or 0.0
    return fuel_th / eta + eps * co2_price / eta + other_cost


@dataclass(frozen=True)
class CoefficientBounds:
    """Box constraints per regressor group in physical units."""

    lower: Mapping[str, float]
    upper: Mapping[str, float]

    def __post_init__(self):
        for g in self.lower:
            if self.lower[g] > self.upper[g]:
                raise ValueError(f"bound group {g}: lower {self.lower[g]} > upper {self.upper[g]}")

    def get(self, group: str) -> tuple[float, float]:
        return self.lower.get(group, -INF), self.upper.get(group, INF)

    def with_group(self, group: str, lower: float, upper: float) -> "CoefficientBounds":
        lo, up = dict(self.lower), dict(self.upper)
        lo[group], up[group] = lower, upper
        return CoefficientBounds(lo, up)

    @classmethod
    def unbounded(cls) -> "CoefficientBounds":
        return cls({g: -INF for g in BOUND_GROUPS}, {g: INF for g in BOUND_GROUPS})


# Published table values (the fitted configuration).
TABLE4_LOWER = {"autoregressive": 0.0, "load": 0.0, "res": -INF, "co2": 0.0,
                "gas": 0.0, "coal": 0.0, "oil": 0.0, "calendar": -INF}
TABLE4_UPPER = {"autoregressive": INF, "load": INF, "res": 0.0, "co2": 1.33,
                "gas": 4.0, "coal": 0.123, "oil": 0.588, "calendar": INF}


def derive_bounds(plants: Mapping[str, PlantCharacteristics] | Iterable[PlantCharacteristics] | None = None,
                  mode: str = "table4") -> CoefficientBounds:
    """Coefficient bounds from plant characteristics.

    Fuel uppers are the largest heat rate (1/eta) of the technology burning that
    fuel, scaled to the price unit; the CO2 upper is the largest eps/eta over all
    fossil plants, lignite included. ``mode="table4"`` returns the published
    table instead of the computed quotients.
    """
    if plants is None:
        plants = default_plants()
    plist: Sequence[PlantCharacteristics] = list(plants.values()) if isinstance(plants, Mapping) else list(plants)
    if not plist:
        raise EmptyTable("no plant characteristics given")
    if mode not in ("table4", "appendixB"):
        raise ValueError(f"unknown bounds mode {mode!r}")
    if mode == "table4":
        return CoefficientBounds(dict(TABLE4_LOWER), dict(TABLE4_UPPER))

    by_tech = {p.technology: p for p in plist}
    upper = dict(TABLE4_UPPER)
    co2 = [eps / eta for p in plist if p.co2_intensity is not None
           for eps, eta in ((p.co2_intensity, e) for e in p.efficiencies)]
    if co2:
        upper["co2"] = max(co2)
    for fuel in ("gas", "coal", "oil"):
        p = by_tech.get(fuel)
        if p is None:
            continue
        # coefficient unit: trading lots per MWh_el
        upper[fuel] = max(1.0 / eta for eta in p.efficiencies) / (p.conversion * p.lot)
    return CoefficientBounds(dict(TABLE4_LOWER), upper)


def merit_order_price(demand: float, stack: Sequence[tuple[float, float]]) -> float:
    """Price set by the marginal unit of a (capacity MW, cost EUR/MWh) stack."""
    if not stack:
        raise EmptyTable("empty supply stack")
    if demand < 0:
        raise ValueError("demand must be non-negative")
    order = sorted(stack, key=lambda unit: unit[1])
    total = 0.0
    for capacity, cost in order:
        total += capacity
        if total >= demand:
            return cost
    raise Scarcity(f"demand {demand} MW exceeds capacity {total} MW")


def merit_order_prices(demand: np.ndarray, capacities: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Vectorized ``merit_order_price`` for many periods.

    ``costs`` has shape (n_periods, n_units); ``capacities`` is (n_units,).
    """
    demand = np.asarray(demand, dtype=float)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    capacities = np.asarray(capacities, dtype=float)
    if np.any(demand > capacities.sum()):
        raise Scarcity("demand exceeds total capacity")
    order = np.argsort(costs, axis=1, kind="stable")
    sorted_costs = np.take_along_axis(costs, order, axis=1)
    cum = np.cumsum(capacities[order], axis=1)
    idx = (cum < demand[:, None]).sum(axis=1)
    return sorted_costs[np.arange(len(demand)), idx]


def plants_from_mapping(overrides: Mapping[str, Mapping[str, float]]) -> dict[str, PlantCharacteristics]:
    """Apply ``{tech: {field: value}}`` overrides on top of the built-in table."""
    plants = default_plants()
    for tech, fields in overrides.items():
        base = plants.get(tech)
        if base is None:
            plants[tech] = PlantCharacteristics(technology=tech, **fields)
        else:
            plants[tech] = replace(base, **fields)
    return plants
