"""Thermal comfort: iterative PMV model, polynomial surrogate, and fitting.

The iterative model is the standard Fanger heat-balance (ISO 7730 style)
with mean radiant temperature equal to air temperature. The surrogate is a
polynomial in air temperature and fan speed,

    PMV = c_T * T + c_v2 * v_a^2 + c_v1 * v_a + c_0,

with season-specific coefficients; three nested functional forms can be
fitted against the iterative model by least squares.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class PmvDomainError(ValueError):
    """Inputs outside the supported temperature / air-speed range."""


class PmvConvergenceError(RuntimeError):
    """Clothing-surface-temperature iteration failed to converge."""


@dataclass(frozen=True)
class PmvContext:
    """Fixed-person parameters of the iterative model."""

    humidity_pct: float = 50.0
    met: float = 1.1
    clo: float = 1.0

    def __post_init__(self):
        if not 0 < self.humidity_pct <= 100:
            raise ValueError("humidity must be a percentage in (0, 100]")


WINTER_CONTEXT = PmvContext(humidity_pct=50.0, met=1.1, clo=1.0)
SUMMER_CONTEXT = PmvContext(humidity_pct=50.0, met=1.1, clo=0.5)


def pmv_full(temp: float, air_speed: float, ctx: PmvContext,
             tol: float = 1e-5, max_iter: int = 150) -> float:
    """Iterative PMV with mean radiant temperature equal to air temperature.

    Raises PmvDomainError outside 10..40 degC / 0..2 m/s and
    PmvConvergenceError if the clothing-temperature fixed point stalls.
    """
    if not (10.0 <= temp <= 40.0) or not (0.0 <= air_speed <= 2.0):
        raise PmvDomainError(f"PMV inputs out of range: T={temp}, v={air_speed}")

    ta = tr = float(temp)
    vel = float(air_speed)
    pa = ctx.humidity_pct * 10.0 * math.exp(16.6536 - 4030.183 / (ta + 235.0))
    icl = 0.155 * ctx.clo
    m = ctx.met * 58.15
    mw = m  # no external work
    fcl = 1.0 + 1.29 * icl if icl <= 0.078 else 1.05 + 0.645 * icl
    hcf = 12.1 * math.sqrt(vel) if vel > 0 else 0.0

    taa = ta + 273.0
    tra = tr + 273.0
    tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1)

    p1 = icl * fcl
    p2 = p1 * 3.96
    p3 = p1 * 100.0
    p4 = p1 * taa
    p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0) ** 4
    xn = tcla / 100.0
    xf = tcla / 50.0
    hc = hcf
    n = 0
    while abs(xn - xf) > tol:
        xf = (xf + xn) / 2.0
        hcn = 2.38 * abs(100.0 * xf - taa) ** 0.25
        hc = max(hcf, hcn)
        xn = (p5 + p4 * hc - p2 * xf**4) / (100.0 + p3 * hc)
        n += 1
        if n > max_iter:
            raise PmvConvergenceError(
                f"clothing-temperature iteration stalled at T={temp}, v={air_speed}")
    tcl = 100.0 * xn - 273.0

    hl1 = 3.05e-3 * (5733.0 - 6.99 * mw - pa)
    hl2 = 0.42 * (mw - 58.15) if mw > 58.15 else 0.0
    hl3 = 1.7e-5 * m * (5867.0 - pa)
    hl4 = 0.0014 * m * (34.0 - ta)
    hl5 = 3.96 * fcl * (xn**4 - (tra / 100.0) ** 4)
    hl6 = fcl * hc * (tcl - ta)

    ts = 0.303 * math.exp(-0.036 * m) + 0.028
    pmv = ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6)
    return float(min(4.0, max(-4.0, pmv)))


@dataclass(frozen=True)
class SimplifiedPmvModel:
    """Polynomial surrogate PMV = c_T*T + c_v2*v^2 + c_v1*v + c_0."""

    c_temp: float
    c_v2: float
    c_v1: float
    c_0: float
    season: str = ""

    def __call__(self, temp: float, air_speed: float = 0.0) -> float:
        return (self.c_temp * temp + self.c_v2 * air_speed * air_speed
                + self.c_v1 * air_speed + self.c_0)

    def temp_for(self, pmv: float, air_speed: float = 0.0) -> float:
        """Invert the surrogate for temperature at a fixed fan speed."""
        return (pmv - self.c_v2 * air_speed**2 - self.c_v1 * air_speed - self.c_0) / self.c_temp

    def dpmv_dspeed(self, air_speed: float) -> float:
        return 2.0 * self.c_v2 * air_speed + self.c_v1


WINTER_MODEL = SimplifiedPmvModel(0.25, 0.58, -1.41, -5.47, season="winter")
SUMMER_MODEL = SimplifiedPmvModel(0.37, 0.76, -2.14, -9.22, season="summer")


def pmv_simplified(model: SimplifiedPmvModel, temp: float, air_speed: float = 0.0) -> float:
    return model(temp, air_speed)


@dataclass(frozen=True)
class ComfortBand:
    """Per-occupant acceptable PMV interval."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("band lower limit must be below the upper limit")

    def contains(self, pmv: float) -> bool:
        return self.lo <= pmv <= self.hi

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


# Season-default bands; the band endpoints correspond to (21, 23) degC in
# winter and (23, 25) degC in summer at fan speed zero.
WINTER_BAND = ComfortBand(-0.29, 0.21)
SUMMER_BAND = ComfortBand(-0.7, 0.0)

# Per-room bands for the heterogeneous-preference studies.
HETEROGENEOUS_BANDS = {
    "winter": (
        ComfortBand(-0.40, -0.16),
        ComfortBand(-0.29, -0.04),
        ComfortBand(-0.16, 0.08),
        ComfortBand(-0.04, 0.21),
        ComfortBand(0.08, 0.33),
    ),
    "summer": (
        ComfortBand(-0.92, -0.56),
        ComfortBand(-0.74, -0.37),
        ComfortBand(-0.56, -0.19),
        ComfortBand(-0.37, 0.0),
        ComfortBand(-0.19, 0.18),
    ),
}


def _design_matrix(form: int, temps: np.ndarray, speeds: np.ndarray) -> np.ndarray:
    one = np.ones_like(temps)
    if form == 1:
        cols = [one, temps, speeds]
    elif form == 2:
        cols = [one, temps, speeds**2]
    elif form == 3:
        cols = [one, temps, speeds**2, speeds]
    else:
        raise ValueError(f"unknown functional form {form}")
    return np.column_stack(cols)


@dataclass(frozen=True)
class FitReport:
    """Least-squares fits of each functional form plus the selected one."""

    coefficients: dict[int, tuple[float, ...]]  # form -> coefficient vector
    rmse: dict[int, float]
    selected: int
    season: str = ""

    def model(self, form: int | None = None) -> SimplifiedPmvModel:
        form = self.selected if form is None else form
        c = self.coefficients[form]
        if form == 1:
            return SimplifiedPmvModel(c[1], 0.0, c[2], c[0], season=self.season)
        if form == 2:
            return SimplifiedPmvModel(c[1], c[2], 0.0, c[0], season=self.season)
        return SimplifiedPmvModel(c[1], c[2], c[3], c[0], season=self.season)

    def to_json(self) -> str:
        payload = {
            "season": self.season,
            "selected_form": self.selected,
            "forms": {
                str(f): {"coefficients": list(self.coefficients[f]), "rmse": self.rmse[f]}
                for f in sorted(self.coefficients)
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def fit_grid(t_lo: float = 18.0, t_hi: float = 30.0, t_step: float = 0.5,
             v_lo: float = 0.0, v_hi: float = 1.0, v_step: float = 0.05) -> list[tuple[float, float]]:
    """Default (temperature, speed) grid for surrogate fitting."""
    temps = np.arange(t_lo, t_hi + 1e-9, t_step)
    speeds = np.arange(v_lo, v_hi + 1e-9, v_step)
    return [(float(t), float(v)) for t in temps for v in speeds]


def fit_simplified(grid, oracle, forms=(1, 2, 3), season: str = "") -> FitReport:
    """Least-squares fit of each functional form against ``oracle`` on ``grid``.

    ``oracle`` maps (temp, air_speed) to PMV. The form with the smallest RMSE
    is selected. A rank-deficient design matrix is rejected.
    """
    pts = list(grid)
    if not pts:
        raise ValueError("empty fitting grid")
    temps = np.array([p[0] for p in pts], dtype=float)
    speeds = np.array([p[1] for p in pts], dtype=float)
    target = np.array([oracle(t, v) for t, v in pts], dtype=float)

    coeffs: dict[int, tuple[float, ...]] = {}
    rmse: dict[int, float] = {}
    for form in forms:
        a = _design_matrix(form, temps, speeds)
        sol, _, rank, _ = np.linalg.lstsq(a, target, rcond=None)
        if rank < a.shape[1]:
            raise ValueError(f"rank-deficient design matrix for form {form}")
        resid = a @ sol - target
        coeffs[form] = tuple(float(c) for c in sol)
        rmse[form] = float(np.sqrt(np.mean(resid**2)))
    selected = min(rmse, key=lambda f: (rmse[f], f))
    return FitReport(coefficients=coeffs, rmse=rmse, selected=selected, season=season)


def season_context(season: str) -> PmvContext:
    if season == "winter":
        return WINTER_CONTEXT
    if season == "summer":
        return SUMMER_CONTEXT
    raise ValueError(f"unknown season {season!r}")


def season_model(season: str) -> SimplifiedPmvModel:
    if season == "winter":
        return WINTER_MODEL
    if season == "summer":
        return SUMMER_MODEL
    raise ValueError(f"unknown season {season!r}")


def season_band(season: str) -> ComfortBand:
    if season == "winter":
        return WINTER_BAND
    if season == "summer":
        return SUMMER_BAND
    raise ValueError(f"unknown season {season!r}")
