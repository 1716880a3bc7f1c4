"""Bilinear room thermal dynamics, continuous and Euler-discretized.

Room temperature follows a first-order energy balance

    C dx/dt = -alpha_o x + sum_l alpha_lj x_l - rho*sigma*v*(x - u)
              + alpha_o T_o + O*d

which is bilinear in (x, v) and (u, v). The desk device adds a local offset
state ``dx`` on top of the room temperature:

    dx(k+1) = (1 - alpha_r*tau/C_region) dx(k) + (tau/C_region) * w * Q_h

The device region reads x2 = x + dx; the rest of the room reads
x1 = x + D3*dx(k-1) with D3 = alpha_r*tau/(C - C_region).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .building import BuildingConfig, RoomKind, ThermalParams


@dataclass(frozen=True)
class HvacCommand:
    """Actuator set points held constant over one step."""

    supply_temp: float           # u, deg C
    flow: float                  # v of the room's zone, m^3/s
    reuse: float = 0.0           # r, fraction of exhaust air recirculated
    mixer_temp: float = 0.0      # T_m, deg C (derived, informational here)
    cooler_temp: float = 0.0     # T_c, deg C (derived, informational here)


@dataclass(frozen=True)
class Exogenous:
    """Exogenous drivers for one step."""

    outside_temp: float          # T_o, deg C
    occupied: bool = False
    load: float = 0.2            # internal load when occupied, kW

    def __post_init__(self):
        if self.load < 0:
            raise ValueError("internal load must be nonnegative")


@dataclass(frozen=True)
class RoomState:
    """Room temperature plus the device-region offset.

    ``offset_prev`` is the one-step history of the offset needed by the
    region-1 readout; it starts at zero.
    """

    temp: float
    offset: float = 0.0
    offset_prev: float = 0.0

    def region2(self) -> float:
        return self.temp + self.offset

    def region1(self, d3: float) -> float:
        return self.temp + d3 * self.offset_prev


@dataclass(frozen=True)
class DiscreteMatrices:
    """Euler step matrices for one zone at step ``tau`` seconds.

    a0 couples rooms within the zone; a1, b, d1, d2 are the scalar
    coefficients of the flow, supply, outside and internal-load terms.
    a0_region/b_region propagate the device offset; d3 maps offset history
    into the region-1 readout.
    """

    tau: float
    a0: np.ndarray               # (n, n)
    a1: float                    # -tau*rho*sigma/C
    b: float                     # tau*rho*sigma/C
    d1: float                    # tau*alpha_o/C
    d2: float                    # tau/C, multiplies O*d (kW)
    a0_region: float             # 1 - alpha_r*tau/C_region
    b_region: float              # tau*Q_h/C_region
    d3: float                    # alpha_r*tau/(C - C_region)


def continuous_rhs(
    x_room: float,
    cmd: HvacCommand,
    exo: Exogenous,
    params: ThermalParams,
    neighbors: tuple[tuple[float, float], ...] = (),
) -> float:
    """Instantaneous dT/dt (K/s) of a room; neighbors are (alpha, temp) pairs."""
    if cmd.flow < 0:
        raise ValueError("flow must be nonnegative")
    c = params.c_room
    inter = sum(a * t for a, t in neighbors)
    return (
        (-params.alpha_out * x_room + inter) / c
        - params.rho_sigma / c * x_room * cmd.flow
        + params.rho_sigma / c * cmd.flow * cmd.supply_temp
        + params.alpha_out / c * exo.outside_temp
        + (exo.load / c if exo.occupied else 0.0)
    )


def build_discrete_matrices(
    params: ThermalParams,
    tau: float,
    zone_size: int,
    coupling: np.ndarray | None = None,
) -> DiscreteMatrices:
    """Euler discretization of the zone dynamics with step ``tau`` seconds."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    a0_region = 1.0 - params.alpha_region * tau / params.c_region
    if a0_region < 0:
        raise ValueError(
            f"tau={tau} s unstable for the device region "
            f"(needs tau <= {params.c_region / params.alpha_region:.1f} s)"
        )
    c = params.c_room
    a0 = np.eye(zone_size) - (tau * params.alpha_out / c) * np.eye(zone_size)
    if coupling is not None:
        a0 = a0 + (tau / c) * np.asarray(coupling, dtype=float)
    return DiscreteMatrices(
        tau=tau,
        a0=a0,
        a1=-tau * params.rho_sigma / c,
        b=tau * params.rho_sigma / c,
        d1=tau * params.alpha_out / c,
        d2=tau / c,
        a0_region=a0_region,
        b_region=tau * params.q_heater / params.c_region,
        d3=params.alpha_region * tau / (c - params.c_region),
    )


def step_zone(
    x: np.ndarray,
    flow: float,
    supply: float,
    outside: float,
    occupied: np.ndarray,
    load: np.ndarray,
    mats: DiscreteMatrices,
) -> np.ndarray:
    """Vectorized Euler step for all rooms of one zone."""
    x = np.asarray(x, dtype=float)
    return (
        mats.a0 @ x
        + mats.a1 * x * flow
        + mats.b * supply * flow
        + mats.d1 * outside
        + mats.d2 * np.asarray(load) * np.asarray(occupied, dtype=float)
    )


def step_room(
    state: RoomState,
    cmd: HvacCommand,
    exo: Exogenous,
    mats: DiscreteMatrices,
    heater_w: float = 0.0,
    kind: RoomKind = RoomKind.PLAIN,
    neighbor_terms: float = 0.0,
) -> RoomState:
    """Scalar Euler step for a single room including the device offset.

    ``heater_w`` is the duty fraction of the desk heater over the step;
    ``neighbor_terms`` is sum(alpha_lj * x_l) * tau / C for coupled rooms.
    """
    if not 0.0 <= heater_w <= 1.0:
        raise ValueError("heater duty must lie in [0, 1]")
    if kind is RoomKind.PLAIN and heater_w != 0.0:
        raise ValueError("plain rooms have no heater")
    a0_diag = 1.0 - mats.d1  # 1 - alpha_o*tau/C
    x_next = (
        a0_diag * state.temp
        + neighbor_terms
        + mats.a1 * state.temp * cmd.flow
        + mats.b * cmd.supply_temp * cmd.flow
        + mats.d1 * exo.outside_temp
        + mats.d2 * (exo.load if exo.occupied else 0.0)
    )
    if kind is RoomKind.PLAIN:
        return RoomState(temp=x_next)
    offset_next = mats.a0_region * state.offset + mats.b_region * heater_w
    return RoomState(temp=x_next, offset=offset_next, offset_prev=state.offset)


def mixer_temp(reuse: float, exhaust: float, outside: float, reuse_max: float = 0.8) -> float:
    """Mixer outlet temperature: convex combination of exhaust and outside air."""
    if not 0.0 <= reuse <= reuse_max:
        raise ValueError(f"reuse ratio must lie in [0, {reuse_max}]")
    return reuse * exhaust + (1.0 - reuse) * outside


def exhaust_temp(room_temps) -> float:
    """Exhaust air temperature: mean of all room temperatures."""
    temps = np.asarray(list(room_temps), dtype=float)
    if temps.size == 0:
        raise ValueError("building has no rooms")
    return float(temps.mean())


def reference_step(
    x0: float,
    cmd: HvacCommand,
    exo: Exogenous,
    params: ThermalParams,
    horizon: float,
    substep: float = 1.0,
) -> float:
    """Integrate the continuous balance with small Euler substeps.

    Independent reference for checking the coarse discretization; inputs are
    held constant over ``horizon``.
    """
    n = int(round(horizon / substep))
    x = x0
    for _ in range(n):
        x += substep * continuous_rhs(x, cmd, exo, params)
    return x


def zone_matrices(building: BuildingConfig, tau: float) -> list[DiscreteMatrices]:
    """Discrete matrices for every zone of a building at step ``tau``."""
    return [
        build_discrete_matrices(building.params, tau, n, building.coupling_matrix(i))
        for i, n in enumerate(building.zone_sizes)
    ]
