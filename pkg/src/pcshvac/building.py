"""Building description: thermal parameters, room kinds, zone layout.

A building is a set of zones served by one air handling unit. Each zone has
one variable-air-volume box (flow rate ``v_i``) feeding every room in the
zone; rooms optionally carry a desk-level comfort device (heater + fan).
All rooms in a zone share thermal parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class RoomKind(Enum):
    """Room with a desk comfort device (DEVICE) or without (PLAIN)."""

    DEVICE = "device"
    PLAIN = "plain"


@dataclass(frozen=True)
class ThermalParams:
    """Lumped thermal parameters shared by the rooms of a building.

    Units: capacities kJ/K, heat-transfer coefficients kJ/(K*s), air density
    kg/m^3, specific heat kJ/(kg*K), heater rating kW.
    """

    c_room: float = 2000.0       # whole-room thermal capacity
    c_region: float = 200.0      # capacity of the device-heated region
    alpha_out: float = 0.048     # room <-> outside
    alpha_region: float = 0.1425  # device region <-> rest of room
    rho: float = 1.2041          # air density
    sigma: float = 1.0           # specific heat of air
    q_heater: float = 0.7        # desk heater rating (kW)

    def __post_init__(self):
        if min(self.c_room, self.c_region, self.alpha_out, self.alpha_region,
               self.rho, self.sigma, self.q_heater) <= 0:
            raise ValueError("thermal parameters must be strictly positive")
        if self.c_region >= self.c_room:
            raise ValueError("device-region capacity must be below room capacity")

    @property
    def rho_sigma(self) -> float:
        return self.rho * self.sigma


def _check_coupling(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("coupling matrix must be square")
    if np.any(mat < 0) or np.any(np.diag(mat) != 0):
        raise ValueError("coupling must be nonnegative with zero diagonal")
    if not np.allclose(mat, mat.T):
        raise ValueError("coupling matrix must be symmetric")
    return mat


@dataclass(frozen=True)
class BuildingConfig:
    """Zones, rooms and their thermal parameters.

    ``zone_sizes[i]`` is the number of rooms in zone ``i``; ``has_device`` is
    flattened over zones in order. ``coupling[i]``, when given, is the
    symmetric room-to-room heat-transfer matrix of zone ``i`` (kJ/(K*s));
    rooms are thermally insulated by default.
    """

    zone_sizes: tuple[int, ...]
    has_device: tuple[bool, ...]
    params: ThermalParams = field(default_factory=ThermalParams)
    coupling: tuple[np.ndarray | None, ...] | None = None

    def __post_init__(self):
        if not self.zone_sizes or any(n <= 0 for n in self.zone_sizes):
            raise ValueError("every zone needs at least one room")
        if len(self.has_device) != self.n_rooms:
            raise ValueError("has_device must cover every room")
        if self.coupling is not None:
            if len(self.coupling) != self.n_zones:
                raise ValueError("one coupling matrix (or None) per zone")
            for size, mat in zip(self.zone_sizes, self.coupling):
                if mat is not None and _check_coupling(mat).shape[0] != size:
                    raise ValueError("coupling matrix size must match the zone")

    @property
    def n_zones(self) -> int:
        return len(self.zone_sizes)

    @property
    def n_rooms(self) -> int:
        return sum(self.zone_sizes)

    @property
    def zone_of_room(self) -> tuple[int, ...]:
        out = []
        for i, n in enumerate(self.zone_sizes):
            out.extend([i] * n)
        return tuple(out)

    @property
    def device_rooms(self) -> tuple[int, ...]:
        """Indices (flattened) of rooms that carry a comfort device."""
        return tuple(r for r, d in enumerate(self.has_device) if d)

    def rooms_in_zone(self, zone: int) -> range:
        start = sum(self.zone_sizes[:zone])
        return range(start, start + self.zone_sizes[zone])

    def room_kind(self, room: int) -> RoomKind:
        return RoomKind.DEVICE if self.has_device[room] else RoomKind.PLAIN

    def coupling_matrix(self, zone: int) -> np.ndarray:
        n = self.zone_sizes[zone]
        if self.coupling is None or self.coupling[zone] is None:
            return np.zeros((n, n))
        return np.asarray(self.coupling[zone], dtype=float)


def single_zone(n_device: int, n_plain: int = 0, params: ThermalParams | None = None) -> BuildingConfig:
    """One zone with ``n_device`` device rooms followed by ``n_plain`` plain rooms."""
    total = n_device + n_plain
    return BuildingConfig(
        zone_sizes=(total,),
        has_device=tuple([True] * n_device + [False] * n_plain),
        params=params or ThermalParams(),
    )
