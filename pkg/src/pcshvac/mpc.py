"""Two-time-scale planning problem for the device-aware HVAC controller.

Every 10-minute step the controller builds a nonconvex NLP over a 24-step
horizon: bilinear room dynamics, device-offset dynamics, the PMV surrogate,
mixer and actuator constraints, and hourly equality blocks that pin the
supply air temperature. Three controller forms exist:

  SA  device-aware: device rooms carry PMV bands plus heater-duty and
      fan-speed decision variables,
  NS  no devices: occupied rooms carry temperature bands,
  SU  devices deployed but planning identical to NS.

The relaxed variant softens every occupied comfort band with per-room
slacks (eps_lo, eps_hi) in PMV units and adds W * prod(1 + eps_lo + eps_hi)
to the objective, so discomfort is shared between rooms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from ._kernels.data import KernelData
from ._kernels.layout import layout_spans, total_size
from .building import BuildingConfig
from .comfort import ComfortBand, SimplifiedPmvModel
from .nlp import NlpInstance, Solution
from .thermal import build_discrete_matrices


class Variant(Enum):
    SA = "SA"   # device-aware planning
    NS = "NS"   # no devices anywhere
    SU = "SU"   # devices present, planning unaware (identical to NS)

    @property
    def plans_devices(self) -> bool:
        return self is Variant.SA


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, actuator limits, efficiencies and penalty weights."""

    n_steps: int = 24
    tau_s: float = 600.0
    u_lo: float = 12.0
    u_hi: float = 30.0
    v_lo: float = 0.236          # aggregate flow lower bound when occupied
    v_hi: float = 4.5            # aggregate flow upper bound
    va_max: float = 1.0          # device fan speed ceiling (m/s)
    r_max: float = 0.8
    eta_h: float = 0.9
    eta_c: float = 0.9
    theta3: float = 0.094        # fan power coefficient (kW s^2/kg^2)
    theta4: float = 0.7          # device heater rating (kW)
    theta5: float = 0.03         # device fan power at 1 m/s (kW)
    penalty_w: float = 1000.0
    gamma_lo: float = 18.0
    gamma_hi: float = 28.0
    comfort_margin: float = 0.05  # PMV shrink applied to bands inside the planner
    pmv_box: float = 8.0
    eps_cap: float = 4.0

    def theta1(self, rho_sigma: float) -> float:
        return rho_sigma / self.eta_h

    def theta2(self, rho_sigma: float) -> float:
        return rho_sigma / self.eta_c


# Season temperature bands for rooms without a device (Table-style constants).
KAPPA = {"winter": (21.0, 23.0), "summer": (23.0, 25.0)}


@dataclass(frozen=True)
class ComfortSpec:
    """Season surrogate plus per-room PMV bands and the plain-room temp band."""

    model: SimplifiedPmvModel
    bands: tuple[ComfortBand, ...]    # one per room (flattened building order)
    kappa: tuple[float, float]        # season temperature band for plain rooms
    kappa_from_table: bool = True     # intersect kappa with the inverted band

    def temp_band(self, room: int) -> tuple[float, float]:
        """Effective temperature band equivalent to the room's PMV band.

        The surrogate-inverted band keeps the planner consistent with the
        PMV-based discomfort metric; for the season-default (homogeneous)
        case it is intersected with the tabulated kappa band.
        """
        band = self.bands[room]
        lo = self.model.temp_for(band.lo)
        hi = self.model.temp_for(band.hi)
        if self.kappa_from_table:
            lo, hi = max(lo, self.kappa[0]), min(hi, self.kappa[1])
        if lo >= hi:
            raise ValueError(f"empty effective temperature band for room {room}")
        return lo, hi


@dataclass(frozen=True)
class HourClock:
    """Position inside the hour: step ell = 6p + q; U is the committed set point."""

    p: int = 0
    q: int = 0
    carried_u: float | None = None

    def __post_init__(self):
        if not 0 <= self.q <= 5:
            raise ValueError("q must lie in 0..5")
        if self.q != 0 and self.carried_u is None:
            raise ValueError("q != 0 requires the carried AHU set point")

    @property
    def ell(self) -> int:
        return 6 * self.p + self.q


def hour_blocks(q: int, n_steps: int = 24) -> list[list[int]]:
    """Partition of horizon indices into equal-supply-temperature blocks.

    The first block of a mid-hour problem (q != 0) is pinned to the carried
    set point; all others are free.
    """
    if not 0 <= q <= 5:
        raise ValueError("q must lie in 0..5")
    blocks = []
    start = 0
    first = (6 - q) % 6 or 6  # length of the leading block
    while start < n_steps:
        length = first if start == 0 else 6
        length = min(length, n_steps - start)
        blocks.append(list(range(start, start + length)))
        start += length
    return blocks


def hour_block_constraints(clock: HourClock, n_steps: int = 24) -> list[tuple[int, int, float]]:
    """Equality rows (a, b, const): u[a] = u[b], or u[a] = const when b < 0."""
    rows: list[tuple[int, int, float]] = []
    blocks = hour_blocks(clock.q, n_steps)
    for bi, block in enumerate(blocks):
        if bi == 0 and clock.q != 0:
            rows.extend((s, -1, float(clock.carried_u)) for s in block)
        else:
            rows.extend((s, block[0], 0.0) for s in block[1:])
    return rows


# --------------------------------------------------------------------- problem


class MpcProblem(NlpInstance):
    """One horizon's NLP, evaluated through the selected kernel backend."""

    def __init__(self, data: KernelData, lower: np.ndarray, upper: np.ndarray,
                 variant: Variant, clock: HourClock):
        self.data = data
        self.spans = layout_spans(data.n_steps, data.n_zones, data.n_rooms,
                                  data.n_device, data.relaxed)
        self.n = total_size(self.spans)
        self.lower = lower
        self.upper = upper
        self.variant = variant
        self.clock = clock
        self.evaluator = _kernels.make_evaluator(data)

    # NlpInstance interface -------------------------------------------------

    def objective(self, x):
        return self.evaluator.objective(x)

    def gradient(self, x):
        return self.evaluator.objective_grad(x)[1]

    def constraints(self, x):
        return self.evaluator.constraints(x)

    def eq_constraints(self, x):
        return self.evaluator.constraints(x)[0]

    def ineq_constraints(self, x):
        return self.evaluator.constraints(x)[1]

    def al_value_grad(self, x, lam, mu, rho):
        return self.evaluator.al_value_grad(x, lam, mu, rho)

    def lagrangian_grad(self, x, lam_hat, mu_hat):
        _, grad = self.evaluator.objective_grad(x)
        return grad + self.evaluator.jt_products(x, lam_hat, mu_hat)

    def feasibility_value_grad(self, x):
        return self.evaluator.feasibility_value_grad(x)

    def eq_jacobian(self, x):
        m = self.data.eq_count()
        return np.stack([
            self.evaluator.jt_products(x, _unit(m, i), np.zeros(self.data.ineq_count()))
            for i in range(m)
        ])

    def ineq_jacobian(self, x):
        m = self.data.ineq_count()
        return np.stack([
            self.evaluator.jt_products(x, np.zeros(self.data.eq_count()), _unit(m, i))
            for i in range(m)
        ])

    # helpers ---------------------------------------------------------------

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        off, shape = self.spans[name]
        size = int(np.prod(shape)) if shape else 1
        return x[off:off + size].reshape(shape)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {name: self.block(x, name) for name in self.spans if name != "__total__"}

    def midpoint_guess(self) -> np.ndarray:
        lo = np.where(np.isfinite(self.lower), self.lower, -1.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 1.0)
        return 0.5 * (lo + hi)

    def shifted_guess(self, prev_x: np.ndarray) -> np.ndarray:
        """Warm start: shift every per-step block one step left, repeat the tail."""
        x = prev_x.copy()
        for name, (off, shape) in self.spans.items():
            if name == "__total__" or not shape or shape[-1] != self.data.n_steps:
                continue
            size = int(np.prod(shape))
            blk = x[off:off + size].reshape(shape)
            blk[..., :-1] = blk[..., 1:]
        return np.clip(x, self.lower, self.upper)

    def embed_strict(self, x_strict: np.ndarray) -> np.ndarray:
        """Lift a strict-problem point into this relaxed problem (slacks at 0)."""
        if not self.data.relaxed:
            raise ValueError("target problem is not relaxed")
        x = np.zeros(self.n)
        x[:x_strict.size] = x_strict
        return np.clip(x, self.lower, self.upper)

    def dump(self, point: np.ndarray | None = None) -> dict:
        """Debug snapshot: layout, bounds, and residuals at a point."""
        out = {
            "variant": self.variant.value,
            "relaxed": bool(self.data.relaxed),
            "n_variables": self.n,
            "n_equalities": self.data.eq_count(),
            "n_inequalities": self.data.ineq_count(),
            "layout": {
                name: {"offset": off, "shape": list(shape)}
                for name, (off, shape) in self.spans.items() if name != "__total__"
            },
            "bounds": {
                name: {
                    "lower": self.block(self.lower, name).tolist(),
                    "upper": self.block(self.upper, name).tolist(),
                }
                for name in ("u", "r")
            },
        }
        if point is not None:
            ceq, gin = self.constraints(point)
            out["residuals"] = {
                "objective": self.objective(point),
                "max_equality": float(np.max(np.abs(ceq))) if ceq.size else 0.0,
                "max_inequality": float(np.max(gin)) if gin.size else 0.0,
            }
        return out

    def dump_json(self, point: np.ndarray | None = None) -> str:
        return json.dumps(self.dump(point), indent=2, sort_keys=True)


def _unit(m: int, i: int) -> np.ndarray:
    e = np.zeros(m)
    e[i] = 1.0
    return e


# --------------------------------------------------------------------- builder


@dataclass(frozen=True)
class Forecasts:
    """Slot-resolution exogenous forecasts over the horizon."""

    outside: np.ndarray          # (N,) deg C
    occupancy: np.ndarray        # (nR, N) 0/1
    load: np.ndarray             # (nR,) kW when occupied

    def validate(self, n_steps: int, n_rooms: int):
        if self.outside.shape != (n_steps,):
            raise ValueError(f"outside forecast must cover {n_steps} steps")
        if self.occupancy.shape != (n_rooms, n_steps):
            raise ValueError("occupancy forecast shape mismatch")
        if self.load.shape != (n_rooms,):
            raise ValueError("one internal load per room required")


def _boundary_gate(occ: np.ndarray) -> np.ndarray:
    """Two-boundary gate: state constrained when an adjacent slot is occupied.

    Column c gates state c+1, whose adjacent slots are c and c+1; enforcing
    the band already at the boundary where someone arrives makes the planner
    pre-position the room (forecasts are exact).
    """
    gate = occ.copy()
    gate[:, :-1] = np.maximum(occ[:, :-1], occ[:, 1:])
    return gate


class MpcBuilder:
    """Constructs planning problems for one building and comfort season."""

    def __init__(self, building: BuildingConfig, cfg: MpcConfig, comfort: ComfortSpec):
        if len(comfort.bands) != building.n_rooms:
            raise ValueError("one comfort band per room required")
        self.building = building
        self.cfg = cfg
        self.comfort = comfort

    def build(self, x_init, dx_init, clock: HourClock, forecasts: Forecasts,
              variant: Variant, relaxed: bool = False) -> MpcProblem:
        bld, cfg, comfort = self.building, self.cfg, self.comfort
        n, nr, m = cfg.n_steps, bld.n_rooms, bld.n_zones
        forecasts.validate(n, nr)
        x_init = np.asarray(x_init, dtype=float)
        if x_init.shape != (nr,):
            raise ValueError("one initial temperature per room required")

        plans_devices = variant.plans_devices
        device_rooms = np.asarray(bld.device_rooms if plans_devices else (), dtype=np.int32)
        nd = len(device_rooms)
        dx_init = np.asarray(dx_init, dtype=float)[:nd] if nd else np.zeros(0)
        if nd and dx_init.shape != (nd,):
            raise ValueError("one initial offset per device room required")

        params = bld.params
        mats = [build_discrete_matrices(params, cfg.tau_s, bld.zone_sizes[i],
                                        bld.coupling_matrix(i)) for i in range(m)]
        a0 = np.zeros((nr, nr))
        for i in range(m):
            rows = bld.rooms_in_zone(i)
            a0[np.ix_(rows, rows)] = mats[i].a0
        zone_of_room = np.asarray(bld.zone_of_room, dtype=np.int32)
        a1_room = np.array([mats[z].a1 for z in zone_of_room])
        b_room = np.array([mats[z].b for z in zone_of_room])
        d1_room = np.array([mats[z].d1 for z in zone_of_room])
        d2_room = np.array([mats[z].d2 for z in zone_of_room])

        occ = np.asarray(forecasts.occupancy, dtype=float)
        gate = _boundary_gate(occ)
        # lower edge needs pre-positioning (the heater is slow); the upper
        # edge is enforced only after occupied slots since the fan restores
        # comfort within one reactive cycle of an arrival
        comf_gate_lo = gate[device_rooms, :] if nd else np.zeros((0, n))
        comf_gate_hi = occ[device_rooms, :] if nd else np.zeros((0, n))
        x1_gate = comf_gate_lo.copy()

        # temperature bands: plain rooms under SA; every room under NS/SU
        kap_mask = np.ones(nr) if not plans_devices else np.array(
            [0.0 if bld.has_device[r] else 1.0 for r in range(nr)])
        kap_lo = np.zeros(nr)
        kap_hi = np.zeros(nr)
        margin_t = cfg.comfort_margin / comfort.model.c_temp
        for r in range(nr):
            if kap_mask[r]:
                lo, hi = comfort.temp_band(r)
                shrink = min(margin_t, 0.33 * (hi - lo))
                kap_lo[r], kap_hi[r] = lo + shrink, hi - shrink
        kap_gate = gate * kap_mask[:, None]

        beta_lo = np.zeros(nd)
        beta_hi = np.zeros(nd)
        for j, r in enumerate(device_rooms):
            band = comfort.bands[r]
            shrink = min(cfg.comfort_margin, 0.33 * (band.hi - band.lo))
            beta_lo[j], beta_hi[j] = band.lo + shrink, band.hi - shrink

        hour_rows = hour_block_constraints(clock, n)
        hour_a = np.array([r[0] for r in hour_rows], dtype=np.int32)
        hour_b = np.array([r[1] for r in hour_rows], dtype=np.int32)
        hour_c = np.array([r[2] for r in hour_rows])

        occ_any = occ.max(axis=0) if nr else np.zeros(n)
        data = KernelData(
            n_steps=n, n_zones=m, n_rooms=nr, n_device=nd, relaxed=relaxed,
            theta1=cfg.theta1(params.rho_sigma), theta2=cfg.theta2(params.rho_sigma),
            theta3=cfg.theta3, theta4=cfg.theta4, theta5=cfg.theta5,
            tau_h=cfg.tau_s / 3600.0, penalty_w=cfg.penalty_w,
            c_temp=comfort.model.c_temp, c_v2=comfort.model.c_v2,
            c_v1=comfort.model.c_v1, c_0=comfort.model.c_0,
            a0=a0, a1_room=a1_room, b_room=b_room, d1_room=d1_room, d2_room=d2_room,
            a0_region=mats[0].a0_region, b_region=mats[0].b_region, d3=mats[0].d3,
            outside=np.asarray(forecasts.outside, dtype=float),
            occ=occ, load=np.asarray(forecasts.load, dtype=float),
            x_init=x_init, dx_init=dx_init,
            zone_of_room=zone_of_room, device_rooms=device_rooms,
            beta_lo=beta_lo, beta_hi=beta_hi,
            kap_lo=kap_lo, kap_hi=kap_hi, kap_mask=kap_mask,
            gamma_lo=cfg.gamma_lo, gamma_hi=cfg.gamma_hi,
            comf_gate_lo=comf_gate_lo, comf_gate_hi=comf_gate_hi,
            kap_gate=kap_gate, x1_gate=x1_gate,
            vsum_lo=np.where(occ_any > 0, cfg.v_lo, 0.0),
            vsum_hi=cfg.v_hi,
            hour_a=hour_a, hour_b=hour_b, hour_c=hour_c,
        )
        lower, upper = self._bounds(data)
        return MpcProblem(data, lower, upper, variant, clock)

    def _bounds(self, d: KernelData) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.cfg
        spans = layout_spans(d.n_steps, d.n_zones, d.n_rooms, d.n_device, d.relaxed)
        n_total = total_size(spans)
        lower = np.full(n_total, -np.inf)
        upper = np.full(n_total, np.inf)

        def blk(arr, name):
            off, shape = spans[name]
            size = int(np.prod(shape)) if shape else 1
            return arr[off:off + size].reshape(shape)

        blk(lower, "u")[:] = cfg.u_lo
        blk(upper, "u")[:] = cfg.u_hi
        # zone flow: lower bound active while the zone has occupants
        vlo = np.zeros((d.n_zones, d.n_steps))
        for z in range(d.n_zones):
            rooms = [r for r in range(d.n_rooms) if d.zone_of_room[r] == z]
            zone_occ = d.occ[rooms, :].max(axis=0)
            vlo[z, :] = np.where(zone_occ > 0, cfg.v_lo, 0.0)
        blk(lower, "v")[:] = vlo
        blk(upper, "v")[:] = cfg.v_hi
        blk(lower, "r")[:] = 0.0
        blk(upper, "r")[:] = cfg.r_max
        t_lo = min(float(d.outside.min()), cfg.gamma_lo) - 5.0
        t_hi = max(float(d.outside.max()), cfg.gamma_hi) + 5.0
        for name in ("tm", "tc"):
            blk(lower, name)[:] = t_lo
            blk(upper, name)[:] = t_hi

        # room temperatures: setback box, tightened by temp bands when strict
        xlo = np.full((d.n_rooms, d.n_steps), cfg.gamma_lo)
        xhi = np.full((d.n_rooms, d.n_steps), cfg.gamma_hi)
        if not d.relaxed:
            gated = d.kap_gate > 0
            xlo[gated] = np.maximum(xlo[gated], np.broadcast_to(
                d.kap_lo[:, None], gated.shape)[gated])
            xhi[gated] = np.minimum(xhi[gated], np.broadcast_to(
                d.kap_hi[:, None], gated.shape)[gated])
        blk(lower, "x")[:] = xlo
        blk(upper, "x")[:] = xhi

        if d.n_device:
            blk(lower, "w")[:] = 0.0
            blk(upper, "w")[:] = d.occ[d.device_rooms, :]
            blk(lower, "va")[:] = 0.0
            blk(upper, "va")[:] = d.occ[d.device_rooms, :] * cfg.va_max
            dx_cap = self.building.params.q_heater / self.building.params.alpha_region + 0.5
            blk(lower, "dx")[:] = 0.0
            blk(upper, "dx")[:] = dx_cap
            plo = np.full((d.n_device, d.n_steps), -cfg.pmv_box)
            phi = np.full((d.n_device, d.n_steps), cfg.pmv_box)
            if not d.relaxed:
                glo = d.comf_gate_lo > 0
                ghi = d.comf_gate_hi > 0
                plo[glo] = np.broadcast_to(d.beta_lo[:, None], glo.shape)[glo]
                phi[ghi] = np.broadcast_to(d.beta_hi[:, None], ghi.shape)[ghi]
            blk(lower, "p")[:] = plo
            blk(upper, "p")[:] = phi
        if d.relaxed:
            for name in ("el", "eh"):
                blk(lower, name)[:] = 0.0
                blk(upper, name)[:] = cfg.eps_cap
        return lower, upper


def build_problem(building, cfg, comfort, x_init, dx_init, clock, forecasts,
                  variant, relaxed=False) -> MpcProblem:
    return MpcBuilder(building, cfg, comfort).build(
        x_init, dx_init, clock, forecasts, variant, relaxed)


# ---------------------------------------------------------------- energy terms


def energy_terms(u, v, t_m, t_c, w, v_a, cfg: MpcConfig, rho_sigma: float):
    """Per-step power components (kW): heating, cooling, HVAC fan, device heat/fan.

    ``v`` has shape (zones, steps); ``w`` and ``v_a`` have shape
    (device rooms, steps) and may be empty.
    """
    u = np.asarray(u, dtype=float)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    vsum = v.sum(axis=0)
    p_h = cfg.theta1(rho_sigma) * (u - np.asarray(t_c)) * vsum
    p_c = cfg.theta2(rho_sigma) * (np.asarray(t_m) - np.asarray(t_c)) * vsum
    p_f = cfg.theta3 * vsum**2
    w = np.atleast_2d(np.asarray(w, dtype=float)) if np.size(w) else np.zeros((0, u.size))
    v_a = np.atleast_2d(np.asarray(v_a, dtype=float)) if np.size(v_a) else np.zeros((0, u.size))
    p_dev_h = cfg.theta4 * w.sum(axis=0)
    p_dev_f = cfg.theta5 * v_a.sum(axis=0)
    return p_h, p_c, p_f, p_dev_h, p_dev_f


# ----------------------------------------------------------------------- plans


FAN_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def round_fan_speed(value: float) -> float:
    """Nearest member of the discrete fan ladder, half-up ties."""
    idx = int(np.floor(value * 10.0 + 0.5))
    return FAN_GRID[min(max(idx, 0), len(FAN_GRID) - 1)]


@dataclass(frozen=True)
class Plan:
    """First-step commands plus the predicted device trajectory."""

    supply_temp: float | None      # new AHU set point (hour boundaries only)
    flow: np.ndarray               # per-zone flow for the first step
    reuse: float
    device_duty: np.ndarray        # predicted first-step heater duties
    device_fan: np.ndarray         # predicted first-step fan speeds (on the grid)
    objective: float
    feasible: bool
    predicted: dict = field(default_factory=dict)


def extract_plan(problem: MpcProblem, solution: Solution) -> Plan:
    """Implementable commands from a solved horizon."""
    vs = problem.unpack(solution.x)
    clock = problem.clock
    supply = float(vs["u"][0]) if clock.q == 0 else clock.carried_u
    nd = problem.data.n_device
    duty = vs["w"][:, 0].copy() if nd else np.zeros(0)
    fan = (np.array([round_fan_speed(f) for f in vs["va"][:, 0]]) if nd else np.zeros(0))
    return Plan(
        supply_temp=float(vs["u"][0]) if clock.q == 0 else None,
        flow=vs["v"][:, 0].copy(),
        reuse=float(vs["r"][0]),
        device_duty=duty,
        device_fan=fan,
        objective=solution.objective,
        feasible=solution.feasible,
        predicted={
            "u": vs["u"].copy(),
            "v": vs["v"].copy(),
            "r": vs["r"].copy(),
            "x": vs["x"].copy(),
            "supply_committed": supply,
        },
    )
