"""Closed-loop co-simulation: 30 s plant, reactive devices, 10 min replans.

The plant integrates the bilinear room model with 30 s Euler steps; devices
react every 30 s; the planner re-solves every 600 s and commits the AHU
set point once an hour. Device duty actually delivered by the reactive
controller (not the planner's prediction) drives both the thermal offset
and the device energy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .building import BuildingConfig, ThermalParams, single_zone
from .comfort import (
    ComfortBand,
    HETEROGENEOUS_BANDS,
    season_band,
    season_model,
)
from .device import DevicePolicy, DeviceState, duty_fraction, react, reset_slot
from .mpc import (
    ComfortSpec,
    Forecasts,
    HourClock,
    KAPPA,
    MpcBuilder,
    MpcConfig,
    Variant,
    extract_plan,
)
from .nlp import SolverSettings, solve_single, uniform_start, best_solution
from .thermal import zone_matrices

TICK_S = 30
TICKS_PER_SLOT = 20          # 600 s planning step at 30 s ticks
SLOTS_PER_HOUR = 6

BASE_DATES = {
    "winter": datetime(2021, 1, 18, tzinfo=timezone.utc),
    "summer": datetime(2021, 7, 19, tzinfo=timezone.utc),
}


class SimulationError(RuntimeError):
    """Planner infeasible even after relaxation; carries diagnostics."""


# ------------------------------------------------------------------ scenarios


@dataclass(frozen=True)
class Scenario:
    """Building layout, season and comfort-requirement style."""

    sid: str                      # S1, S2 or S3
    season: str                   # winter or summer
    comfort: str = "homogeneous"  # or heterogeneous

    def __post_init__(self):
        if self.sid not in ("S1", "S2", "S3"):
            raise ValueError(f"unknown scenario {self.sid}")
        if self.season not in ("winter", "summer"):
            raise ValueError(f"unknown season {self.season}")
        if self.comfort not in ("homogeneous", "heterogeneous"):
            raise ValueError(f"unknown comfort spec {self.comfort}")

    def building(self, params: ThermalParams | None = None) -> BuildingConfig:
        params = params or ThermalParams()
        if self.sid == "S1":
            return single_zone(5, 0, params)
        if self.sid == "S2":
            return single_zone(4, 1, params)
        return BuildingConfig(zone_sizes=(5, 1),
                              has_device=(True,) * 5 + (False,),
                              params=params)

    def bands(self) -> tuple[ComfortBand, ...]:
        n = self.building().n_rooms
        if self.comfort == "homogeneous":
            return (season_band(self.season),) * n
        het = HETEROGENEOUS_BANDS[self.season]
        return tuple(het[i % len(het)] for i in range(n))

    def comfort_spec(self) -> ComfortSpec:
        return ComfortSpec(
            model=season_model(self.season),
            bands=self.bands(),
            kappa=KAPPA[self.season],
            kappa_from_table=self.comfort == "homogeneous",
        )

    @property
    def relaxed(self) -> bool:
        return self.comfort == "heterogeneous"


# --------------------------------------------------------------------- traces


@dataclass
class Trace:
    """Outside temperature and per-room occupancy at 30 s resolution."""

    start: datetime
    outside: np.ndarray           # (n_ticks,)
    occupancy: np.ndarray         # (n_rooms, n_ticks) of 0/1

    def __post_init__(self):
        self.outside = np.asarray(self.outside, dtype=float)
        self.occupancy = np.asarray(self.occupancy, dtype=np.int8)
        if self.occupancy.ndim != 2 or self.occupancy.shape[1] != self.outside.size:
            raise ValueError("occupancy and weather series must align")
        if not np.isin(self.occupancy, (0, 1)).all():
            raise ValueError("occupancy must be binary")

    @property
    def n_ticks(self) -> int:
        return self.outside.size

    @property
    def n_rooms(self) -> int:
        return self.occupancy.shape[0]


@dataclass(frozen=True)
class OccupancyProfile:
    """Arrival/departure windows plus the fraction of presence spent on break.

    ``stated_fraction`` declares the expected occupied fraction over the
    business window; generated traces are validated against it.
    """

    name: str
    arrive_window: tuple[float, float] = (8.0, 9.5)     # hours of day
    depart_window: tuple[float, float] = (15.5, 17.5)
    break_rate: float = 0.35          # fraction of the presence span on break
    n_short_breaks: float = 2.0       # Poisson mean; lunch takes 40% of break time
    absent_prob: float = 0.08
    business_window: tuple[float, float] = (8.0, 18.0)
    stated_fraction: tuple[float, float] = (0.30, 0.65)


PROFILES = {
    "absent": OccupancyProfile(name="absent", absent_prob=1.0, stated_fraction=(0.0, 0.0)),
    "nine_to_five": OccupancyProfile(
        name="nine_to_five", arrive_window=(8.0, 8.0), depart_window=(17.0, 17.0),
        break_rate=0.0, n_short_breaks=0.0, absent_prob=0.0,
        stated_fraction=(0.88, 0.92)),
    "office": OccupancyProfile(name="office"),
}


def _snap(hour: float) -> int:
    """Hour of day -> tick index on the 600 s planning grid."""
    slot = int(round(hour * 3600.0 / 600.0))
    return slot * TICKS_PER_SLOT


def generate_synthetic_occupancy(
    n_rooms: int,
    seed: int,
    profile: OccupancyProfile | str = "office",
    n_ticks: int = (24 + 4) * 120,
) -> np.ndarray:
    """Binary (n_rooms, n_ticks) series; transitions snap to the 600 s grid.

    Snapping keeps the slot-level forecast the planner consumes exact, so a
    reactive device never starts mid-slot against a stale plan.
    """
    if isinstance(profile, str):
        profile = PROFILES[profile]
    occ = np.zeros((n_rooms, n_ticks), dtype=np.int8)
    for room in range(n_rooms):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7, room)))
        if rng.random() < profile.absent_prob:
            continue
        arrive = rng.uniform(*profile.arrive_window)
        depart = rng.uniform(*profile.depart_window)
        if depart <= arrive:
            continue
        t0, t1 = _snap(arrive), _snap(depart)
        t1 = min(t1, n_ticks)
        occ[room, t0:t1] = 1
        span_h = (t1 - t0) * TICK_S / 3600.0
        break_h = profile.break_rate * span_h
        if break_h <= 0:
            continue
        n_short = int(rng.poisson(profile.n_short_breaks)) if profile.n_short_breaks else 0
        pieces = [0.4 * break_h] if n_short else [break_h]  # lunch piece
        if n_short:
            rest = break_h - pieces[0]
            cuts = np.sort(rng.random(max(n_short - 1, 0)))
            shares = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
            pieces.extend(rest * shares)
        for i, piece_h in enumerate(pieces):
            n_slots = max(1, int(round(piece_h * 6.0)))
            if i == 0 and profile.n_short_breaks:
                start_h = rng.uniform(11.7, 12.8)
            else:
                start_h = rng.uniform(arrive + 0.5, max(depart - 0.5, arrive + 0.6))
            b0 = _snap(start_h)
            b1 = min(b0 + n_slots * TICKS_PER_SLOT, t1)
            occ[room, b0:b1] = 0
    return occ


def generate_weather(season: str, seed: int, n_ticks: int = (24 + 4) * 120) -> np.ndarray:
    """Sinusoidal daily profile with a seeded level shift and smooth noise."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(11,)))
    if season == "winter":
        mid, amp = -4.0, 4.0
    elif season == "summer":
        mid, amp = 26.5, 5.5
    else:
        raise ValueError(f"unknown season {season!r}")
    mid += rng.uniform(-2.0, 2.0)
    amp *= rng.uniform(0.85, 1.15)
    hours = np.arange(n_ticks) * TICK_S / 3600.0
    base = mid + amp * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
    noise = rng.standard_normal(n_ticks // 40 + 2) * 0.4
    smooth = np.interp(np.arange(n_ticks), np.arange(noise.size) * 40.0, noise)
    return base + smooth


def make_trace(scenario: Scenario, seed: int, profile: OccupancyProfile | str = "office",
               day_length_h: float = 24.0, horizon_h: float = 4.0) -> Trace:
    n_ticks = int(round((day_length_h + horizon_h) * 3600 / TICK_S))
    n_rooms = scenario.building().n_rooms
    return Trace(
        start=BASE_DATES[scenario.season],
        outside=generate_weather(scenario.season, seed, n_ticks),
        occupancy=generate_synthetic_occupancy(n_rooms, seed, profile, n_ticks),
    )


# ------------------------------------------------------------------ trace IO


def write_occupancy_csv(path, trace: Trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "room_id", "occupied"])
        for t in range(trace.n_ticks):
            ts = (trace.start + timedelta(seconds=t * TICK_S)).strftime("%Y-%m-%dT%H:%M:%SZ")
            for room in range(trace.n_rooms):
                writer.writerow([ts, room, int(trace.occupancy[room, t])])


def write_weather_csv(path, trace: Trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "temp_c"])
        for t in range(trace.n_ticks):
            ts = (trace.start + timedelta(seconds=t * TICK_S)).strftime("%Y-%m-%dT%H:%M:%SZ")
            writer.writerow([ts, f"{trace.outside[t]:.4f}"])


def _parse_ts(value: str) -> datetime:
    return datetime.strptime(value, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def read_trace_csvs(occupancy_path, weather_path) -> Trace:
    """Load a trace from the two CSV files written by the generators."""
    with open(weather_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty weather CSV")
    start = _parse_ts(rows[0]["timestamp"])
    outside = np.array([float(r["temp_c"]) for r in rows])
    times = [_parse_ts(r["timestamp"]) for r in rows]
    for i, ts in enumerate(times):
        if int((ts - start).total_seconds()) != i * TICK_S:
            raise ValueError("weather series must be gap-free at 30 s cadence")

    with open(occupancy_path, newline="") as fh:
        occ_rows = list(csv.DictReader(fh))
    rooms = sorted({int(r["room_id"]) for r in occ_rows})
    occupancy = np.zeros((len(rooms), len(rows)), dtype=np.int8)
    for r in occ_rows:
        t = int((_parse_ts(r["timestamp"]) - start).total_seconds())
        if t % TICK_S:
            raise ValueError("occupancy timestamps must be on the 30 s grid")
        occupancy[int(r["room_id"]), t // TICK_S] = int(r["occupied"])
    return Trace(start=start, outside=outside, occupancy=occupancy)


# ------------------------------------------------------------------- metrics


def compute_discomfort(pmv, occupied, bands, tol: float = 1e-9):
    """Per-user and mean discomfort: fraction of occupied ticks out of band.

    Users whose room is never occupied contribute 0 by convention.
    """
    pmv = np.asarray(pmv, dtype=float)
    occupied = np.asarray(occupied)
    d_users = []
    for i, band in enumerate(bands):
        occ_ticks = occupied[i] > 0
        total = int(occ_ticks.sum())
        if total == 0:
            d_users.append(0.0)
            continue
        vals = pmv[i][occ_ticks]
        bad = np.sum((vals < band.lo - tol) | (vals > band.hi + tol))
        d_users.append(float(bad) / total)
    return np.array(d_users), float(np.mean(d_users))


# ------------------------------------------------------------------- results


@dataclass
class SlotLog:
    """Per-replan commands and solver diagnostics."""

    slot: int
    supply: float
    flow: np.ndarray
    reuse: float
    status: str
    objective: float
    violation: float
    iterations: int
    relaxed: bool
    new_supply: bool


@dataclass
class DayResult:
    scenario: str
    season: str
    comfort: str
    variant: str
    seed: int | None
    energy_kwh: dict[str, float]
    discomfort_users: np.ndarray
    discomfort: float
    timelines: dict[str, np.ndarray]
    slots: list[SlotLog]
    start: datetime

    @property
    def total_energy(self) -> float:
        return self.energy_kwh["total"]

    def commands(self) -> list[dict]:
        return [
            {"slot": s.slot, "supply": s.supply, "flow": s.flow.tolist(), "reuse": s.reuse}
            for s in self.slots
        ]

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "season": self.season,
            "comfort": self.comfort,
            "variant": self.variant,
            "seed": self.seed,
            "energy_kwh": {k: float(v) for k, v in self.energy_kwh.items()},
            "discomfort": self.discomfort,
            "discomfort_users": [float(d) for d in self.discomfort_users],
            "mean_supply_occupied": float(self.mean_supply_while_flowing()),
        }

    def mean_supply_while_flowing(self) -> float:
        """Average committed AHU set point over ticks with nonzero flow."""
        u = self.timelines["u"]
        flow = self.timelines["v"].sum(axis=0)
        mask = flow > 1e-9
        if not mask.any():
            return float("nan")
        return float(u[mask].mean())

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)

    def write_timelines_csv(self, path):
        tl = self.timelines
        n_rooms, n_ticks = tl["x"].shape
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "room", "x", "x1", "x2", "pmv", "u", "v", "r", "w", "va"])
            zone = tl["zone_of_room"].astype(int)
            for t in range(n_ticks):
                for room in range(n_rooms):
                    writer.writerow([
                        t * TICK_S, room,
                        f"{tl['x'][room, t]:.5f}", f"{tl['x1'][room, t]:.5f}",
                        f"{tl['x2'][room, t]:.5f}", f"{tl['pmv'][room, t]:.5f}",
                        f"{tl['u'][t]:.4f}", f"{tl['v'][zone[room], t]:.5f}",
                        f"{tl['r'][t]:.4f}", int(tl['heater'][room, t]),
                        f"{tl['fan'][room, t]:.1f}",
                    ])


# ---------------------------------------------------------------- run config


@dataclass(frozen=True)
class RunConfig:
    """Planner, solver and harness knobs for one closed-loop run."""

    mpc: MpcConfig = field(default_factory=MpcConfig)
    solver: SolverSettings = field(default_factory=lambda: SolverSettings(
        feasibility_tol=3e-5, optimality_tol=1e-4, max_iterations=2000,
        inner_maxiter=300, lbfgs_m=10))
    starts_first: int = 15     # random starts for a day's first solve
    starts_replan: int = 2     # random starts added to the warm start later
    day_length_h: float = 24.0
    load_kw: float = 0.2
    capture_timelines: bool = True

    def solver_for_slot(self, slot: int) -> SolverSettings:
        return replace(self.solver, seed=self.solver.seed + 1000003 * slot)


# ------------------------------------------------------------ the closed loop


def _slot_forecasts(trace: Trace, slot: int, n_steps: int, load_kw: float) -> Forecasts:
    """Slot-level forecast: mean outside temp; occupied iff any tick occupied."""
    n_rooms = trace.n_rooms
    outside = np.empty(n_steps)
    occupancy = np.zeros((n_rooms, n_steps))
    for s in range(n_steps):
        a = (slot + s) * TICKS_PER_SLOT
        b = min(a + TICKS_PER_SLOT, trace.n_ticks)
        outside[s] = trace.outside[a:b].mean()
        occupancy[:, s] = trace.occupancy[:, a:b].max(axis=1)
    return Forecasts(outside=outside, occupancy=occupancy,
                     load=np.full(n_rooms, load_kw))


LOOSE_VIOLATION = 1e-3   # relaxed problems are structurally feasible; beyond
                         # this the run aborts, below it the best point is used


def _solve_slot(builder, planning_variant, relaxed, x, dx_planned, clock,
                forecasts, cfg, slot, warm_store):
    """One replanning solve: warm start plus a few seeded random probes.

    ``warm_store`` maps problem size -> (x, lam, mu) from earlier slots. A
    strict problem that the solver cannot certify falls back to the relaxed
    formulation, warm-started from the best strict point.
    """
    settings = cfg.solver_for_slot(slot)
    problem = builder.build(x, dx_planned, clock, forecasts,
                            planning_variant, relaxed=relaxed)
    solutions = []
    warm = warm_store.get(problem.n)
    n_random = cfg.starts_replan if warm is not None else cfg.starts_first
    if warm is not None:
        solutions.append(solve_single(problem, problem.shifted_guess(warm[0]),
                                      settings, lam0=warm[1], mu0=warm[2]))
    for i in range(n_random):
        seq = np.random.SeedSequence(entropy=settings.seed, spawn_key=(i,))
        solutions.append(solve_single(problem, uniform_start(problem, seq), settings))
    best = best_solution(solutions)
    used_relaxed = relaxed

    if not best.feasible and not relaxed:
        strict_best = best
        used_relaxed = True
        problem = builder.build(x, dx_planned, clock, forecasts,
                                planning_variant, relaxed=True)
        retry = replace(settings, max_iterations=2 * settings.max_iterations)
        solutions = [solve_single(problem, problem.embed_strict(strict_best.x), retry)]
        warm = warm_store.get(problem.n)
        if warm is not None:
            solutions.append(solve_single(problem, problem.shifted_guess(warm[0]),
                                          retry, lam0=warm[1], mu0=warm[2]))
        for i in range(max(cfg.starts_replan, 2)):
            seq = np.random.SeedSequence(entropy=settings.seed, spawn_key=(99, i))
            solutions.append(solve_single(problem, uniform_start(problem, seq), retry))
        best = best_solution(solutions)

    if not best.feasible and best.max_violation > LOOSE_VIOLATION:
        raise SimulationError(
            f"planner infeasible at slot {slot} even after relaxation "
            f"(violation {best.max_violation:.2e})")
    warm_store[problem.n] = (best.x, best.multipliers_eq, best.multipliers_ineq)
    return problem, best, used_relaxed


def run_closed_loop(scenario: Scenario, trace: Trace, variant: Variant,
                    cfg: RunConfig = RunConfig(), seed: int | None = None,
                    plan_source: list[dict] | None = None) -> DayResult:
    """Simulate one day; returns energies, discomfort and timelines.

    ``plan_source`` replays previously recorded commands instead of solving
    (used to share the planning between the NS and SU variants, whose
    problems are identical).
    """
    building = scenario.building()
    comfort = scenario.comfort_spec()
    params = building.params
    n_rooms = building.n_rooms
    n_zones = building.n_zones
    zone_of_room = np.asarray(building.zone_of_room)
    device_rooms = list(building.device_rooms) if variant is not Variant.NS else []
    has_devices = bool(device_rooms)
    planning_variant = Variant.SA if variant is Variant.SA else Variant.NS

    n_ticks = int(round(cfg.day_length_h * 3600 / TICK_S))
    need = n_ticks + cfg.mpc.n_steps * TICKS_PER_SLOT
    if trace.n_ticks < need:
        raise ValueError(f"trace must cover the day plus the horizon ({need} ticks)")
    if trace.n_rooms != n_rooms:
        raise ValueError("trace room count does not match the scenario")

    mats = zone_matrices(building, TICK_S)
    builder = MpcBuilder(building, cfg.mpc, comfort)
    model = comfort.model
    bands = comfort.bands

    # initial state: comfort-band midpoint temperature, no device offset
    x = np.array([model.temp_for(bands[r].midpoint()) for r in range(n_rooms)])
    dx = np.zeros(n_rooms)
    dx_prev = np.zeros(n_rooms)

    policies = {
        r: DevicePolicy(
            band=bands[r], model=model,
            offset_decay=params.alpha_region * TICK_S / params.c_region,
            offset_gain=TICK_S * params.q_heater / params.c_region)
        for r in device_rooms
    }
    devices = {r: DeviceState() for r in device_rooms}

    tl = {
        "x": np.zeros((n_rooms, n_ticks)), "x1": np.zeros((n_rooms, n_ticks)),
        "x2": np.zeros((n_rooms, n_ticks)), "pmv": np.zeros((n_rooms, n_ticks)),
        "occ": np.zeros((n_rooms, n_ticks), dtype=np.int8),
        "heater": np.zeros((n_rooms, n_ticks), dtype=np.int8),
        "fan": np.zeros((n_rooms, n_ticks)),
        "u": np.zeros(n_ticks), "v": np.zeros((n_zones, n_ticks)),
        "r": np.zeros(n_ticks), "to": np.zeros(n_ticks),
        "p_heat": np.zeros(n_ticks), "p_cool": np.zeros(n_ticks),
        "p_fan": np.zeros(n_ticks), "p_dev_heat": np.zeros(n_ticks),
        "p_dev_fan": np.zeros(n_ticks),
        "zone_of_room": zone_of_room.astype(float),
    }

    theta1 = cfg.mpc.theta1(params.rho_sigma)
    theta2 = cfg.mpc.theta2(params.rho_sigma)
    supply = cfg.mpc.u_lo
    flow = np.zeros(n_zones)
    reuse = 0.0
    warm_store: dict[int, tuple] = {}
    relaxed_mode = scenario.relaxed
    slots: list[SlotLog] = []
    d3_tick = mats[0].d3

    for t in range(n_ticks):
        if t % TICKS_PER_SLOT == 0:
            slot = t // TICKS_PER_SLOT
            q = slot % SLOTS_PER_HOUR
            for r in device_rooms:
                devices[r] = reset_slot(devices[r])
            if plan_source is not None:
                cmd = plan_source[slot]
                supply = cmd["supply"]
                flow = np.asarray(cmd["flow"], dtype=float)
                reuse = cmd["reuse"]
                slots.append(SlotLog(slot, supply, flow.copy(), reuse, "replayed",
                                     float("nan"), 0.0, 0, relaxed_mode, q == 0))
            else:
                clock = HourClock(p=(slot // 6) % 24, q=q,
                                  carried_u=None if q == 0 else supply)
                forecasts = _slot_forecasts(trace, slot, cfg.mpc.n_steps, cfg.load_kw)
                dx_planned = dx[device_rooms] if planning_variant is Variant.SA else np.zeros(0)
                problem, best, used_relaxed = _solve_slot(
                    builder, planning_variant, relaxed_mode, x, dx_planned,
                    clock, forecasts, cfg, slot, warm_store)
                plan = extract_plan(problem, best)
                if q == 0:
                    supply = plan.predicted["supply_committed"]
                flow = np.clip(plan.flow, 0.0, None)
                reuse = min(max(plan.reuse, 0.0), cfg.mpc.r_max)
                slots.append(SlotLog(slot, supply, flow.copy(), reuse,
                                     best.status.value, best.objective,
                                     best.max_violation, best.iterations,
                                     used_relaxed, q == 0))

        occupied_now = trace.occupancy[:, t]
        heat_flags = np.zeros(n_rooms)
        fan_speeds = np.zeros(n_rooms)
        for r in device_rooms:
            state, heater_on, fan_speed = react(
                devices[r], x[r] + dx[r], bool(occupied_now[r]), policies[r])
            devices[r] = state
            heat_flags[r] = 1.0 if heater_on else 0.0
            fan_speeds[r] = fan_speed

        # instantaneous powers for this tick
        t_e = float(x.mean())
        t_m = reuse * t_e + (1.0 - reuse) * trace.outside[t]
        t_c = min(supply, t_m)
        vsum = float(flow.sum())
        tl["p_heat"][t] = theta1 * (supply - t_c) * vsum
        tl["p_cool"][t] = theta2 * (t_m - t_c) * vsum
        tl["p_fan"][t] = cfg.mpc.theta3 * vsum * vsum
        tl["p_dev_heat"][t] = cfg.mpc.theta4 * heat_flags.sum()
        tl["p_dev_fan"][t] = cfg.mpc.theta5 * fan_speeds.sum()

        # comfort bookkeeping (state at tick start, actions applied this tick)
        x2 = x + dx
        tl["x"][:, t] = x
        tl["x1"][:, t] = x + d3_tick * dx_prev
        tl["x2"][:, t] = x2
        for r in range(n_rooms):
            tl["pmv"][r, t] = model(x2[r], fan_speeds[r])
        tl["occ"][:, t] = occupied_now
        tl["heater"][:, t] = heat_flags.astype(np.int8)
        tl["fan"][:, t] = fan_speeds
        tl["u"][t] = supply
        tl["v"][:, t] = flow
        tl["r"][t] = reuse
        tl["to"][t] = trace.outside[t]

        # plant step
        x_next = np.empty(n_rooms)
        for z in range(n_zones):
            rooms = list(building.rooms_in_zone(z))
            x_next[rooms] = (
                mats[z].a0 @ x[rooms]
                + mats[z].a1 * x[rooms] * flow[z]
                + mats[z].b * supply * flow[z]
                + mats[z].d1 * trace.outside[t]
                + mats[z].d2 * cfg.load_kw * occupied_now[rooms]
            )
        dx_next = mats[0].a0_region * dx + mats[0].b_region * heat_flags
        dx_prev = dx
        x, dx = x_next, dx_next

    dt_h = TICK_S / 3600.0
    energy = {
        "hvac_heat": float(tl["p_heat"].sum() * dt_h),
        "hvac_cool": float(tl["p_cool"].sum() * dt_h),
        "hvac_fan": float(tl["p_fan"].sum() * dt_h),
        "device_heat": float(tl["p_dev_heat"].sum() * dt_h),
        "device_fan": float(tl["p_dev_fan"].sum() * dt_h),
    }
    energy["total"] = float(sum(energy.values()))
    d_users, d_mean = compute_discomfort(tl["pmv"], tl["occ"], bands)
    if not cfg.capture_timelines:
        tl = {k: v for k, v in tl.items()
              if k in ("u", "v", "r", "pmv", "occ", "zone_of_room")}
    return DayResult(
        scenario=scenario.sid, season=scenario.season, comfort=scenario.comfort,
        variant=variant.value, seed=seed, energy_kwh=energy,
        discomfort_users=d_users, discomfort=d_mean,
        timelines=tl, slots=slots, start=trace.start,
    )
