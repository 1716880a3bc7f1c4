"""Packed parameter block consumed by the NLP evaluation kernels.

Both kernel implementations (compiled and pure numpy) read exactly this
structure. All arrays are C-contiguous float64 unless noted; index
conventions are documented in ``pcshvac.mpc``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KernelData:
    # dimensions
    n_steps: int          # planning steps N
    n_zones: int
    n_rooms: int
    n_device: int         # rooms with a comfort device (0 for NS-form problems)
    relaxed: bool

    # objective coefficients
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    theta5: float
    tau_h: float          # step length in hours
    penalty_w: float      # W; only used when relaxed

    # surrogate comfort model
    c_temp: float
    c_v2: float
    c_v1: float
    c_0: float

    # dynamics coefficients
    a0: np.ndarray        # (nR, nR) zone-block-diagonal step matrix
    a1_room: np.ndarray   # (nR,) flow bilinear coefficient per room
    b_room: np.ndarray    # (nR,) supply bilinear coefficient per room
    d1_room: np.ndarray   # (nR,) outside-temperature gain per room
    d2_room: np.ndarray   # (nR,) internal-load gain per room
    a0_region: float
    b_region: float
    d3: float             # offset-history gain in the region-1 readout

    # exogenous / measured
    outside: np.ndarray   # (N,)
    occ: np.ndarray       # (nR, N) slot occupancy 0/1
    load: np.ndarray      # (nR,) internal load when occupied, kW
    x_init: np.ndarray    # (nR,)
    dx_init: np.ndarray   # (nDev,)

    # room/zone wiring
    zone_of_room: np.ndarray   # (nR,) int32
    device_rooms: np.ndarray   # (nDev,) int32

    # comfort bands (already margined)
    beta_lo: np.ndarray   # (nDev,)
    beta_hi: np.ndarray   # (nDev,)
    kap_lo: np.ndarray    # (nR,) temperature band; 0 where kap_mask is 0
    kap_hi: np.ndarray    # (nR,)
    kap_mask: np.ndarray  # (nR,) 1 where the room carries a temperature band
    gamma_lo: float
    gamma_hi: float

    # constraint gates (state index s=1..N stored at column s-1); the lower
    # band edge is pre-positioned at arrivals (slow heater), the upper edge
    # is only enforced after occupied slots (the fan reacts instantly)
    comf_gate_lo: np.ndarray  # (nDev, N)
    comf_gate_hi: np.ndarray  # (nDev, N)
    kap_gate: np.ndarray      # (nR, N)
    x1_gate: np.ndarray       # (nDev, N)

    # aggregate-flow bounds
    vsum_lo: np.ndarray    # (N,)
    vsum_hi: float

    # hourly supply-temperature structure: u[a] - u[b] = 0, or u[a] = const
    hour_a: np.ndarray     # (20,) int32
    hour_b: np.ndarray     # (20,) int32, -1 means pinned to hour_c
    hour_c: np.ndarray     # (20,)

    def eq_count(self) -> int:
        n, nr, nd = self.n_steps, self.n_rooms, self.n_device
        return nr * n + 2 * nd * n + n + len(self.hour_a)

    def ineq_count(self) -> int:
        n, nr, nd = self.n_steps, self.n_rooms, self.n_device
        soft = (2 * nd * n + 2 * nr * n) if self.relaxed else 0
        return soft + 2 * nd * n + 4 * n
