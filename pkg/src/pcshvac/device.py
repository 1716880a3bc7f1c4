"""Reactive desk comfort device: 30-second heater/fan decisions.

Every check period the device measures the temperature of its region,
computes the occupant's PMV at the current fan speed and acts:

  * PMV above the band   -> fan on, speed stepped up one notch
  * PMV below the band   -> heater on (fan off)
  * PMV inside the band  -> fan stepped down when the lower speed would
    still keep PMV inside; heater only tops up when a one-step lookahead
    of the cooling offset predicts PMV would fall below the band.

The device is off whenever the room is unoccupied. Fan speeds live on the
discrete ladder 0.0, 0.1, ..., 1.0 m/s. The heater-duty accumulator counts
heated check intervals inside the current 10-minute slot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .comfort import ComfortBand, SimplifiedPmvModel

FAN_SPEEDS = tuple(round(0.1 * i, 1) for i in range(11))
INTERVALS_PER_SLOT = 20  # 10-minute slot of 30 s checks


class DeviceMode(Enum):
    OFF = "off"
    HEAT = "heat"
    FAN = "fan"


@dataclass(frozen=True)
class DeviceState:
    """Mode, fan notch, slot duty count, and the device's offset estimate.

    ``offset_estimate`` integrates the heater's own thermal model so the
    controller can anticipate the decay of its heating effect; it starts at
    zero together with the plant offset.
    """

    mode: DeviceMode = DeviceMode.OFF
    fan_index: int = 0
    heated_intervals: int = 0
    offset_estimate: float = 0.0
    was_occupied: bool = False

    @property
    def fan_speed(self) -> float:
        return FAN_SPEEDS[self.fan_index]


@dataclass(frozen=True)
class DevicePolicy:
    """Occupant band, season surrogate, and the offset-state coefficients."""

    band: ComfortBand
    model: SimplifiedPmvModel
    check_period_s: float = 30.0
    offset_decay: float = 0.021375   # alpha_r * check_period / c_region
    offset_gain: float = 0.105       # check_period * q_heater / c_region


def react(state: DeviceState, region_temp: float, occupied: bool,
          policy: DevicePolicy) -> tuple[DeviceState, bool, float]:
    """One reactive cycle; returns (state', heater_on, fan_speed).

    ``region_temp`` is the device-region temperature x2 = x + dx measured at
    the start of the interval. The returned actions apply for the coming
    check period.
    """
    band, model = policy.band, policy.model

    if not occupied:
        new = DeviceState(
            mode=DeviceMode.OFF,
            fan_index=0,
            heated_intervals=state.heated_intervals,
            offset_estimate=(1.0 - policy.offset_decay) * state.offset_estimate,
            was_occupied=False,
        )
        return new, False, 0.0

    pmv_now = model(region_temp, state.fan_speed)
    heater_on = False
    fan_index = state.fan_index

    if pmv_now > band.hi:
        if not state.was_occupied:
            # fresh arrival into a warm room: jump straight to the slowest
            # speed that restores comfort instead of ramping one notch per
            # cycle (the fan's effect on perceived comfort is immediate)
            fan_index = next(
                (i for i, speed in enumerate(FAN_SPEEDS)
                 if model(region_temp, speed) <= band.hi),
                len(FAN_SPEEDS) - 1,
            )
        else:
            fan_index = min(fan_index + 1, len(FAN_SPEEDS) - 1)
        mode = DeviceMode.FAN
    elif pmv_now < band.lo:
        heater_on = True
        fan_index = 0
        mode = DeviceMode.HEAT
    else:
        if state.mode is DeviceMode.FAN and fan_index > 0:
            if model(region_temp, FAN_SPEEDS[fan_index - 1]) <= band.hi:
                fan_index -= 1
            mode = DeviceMode.FAN if fan_index > 0 else DeviceMode.OFF
        elif state.mode is DeviceMode.HEAT:
            # Without a top-up the offset decays; keep heating while the
            # predicted next reading would leave the band.
            predicted = region_temp - policy.offset_decay * state.offset_estimate
            if model(predicted, 0.0) < band.lo:
                heater_on = True
                mode = DeviceMode.HEAT
            else:
                mode = DeviceMode.OFF
        else:
            mode = DeviceMode.OFF

    if heater_on:
        fan_index = 0

    offset = (1.0 - policy.offset_decay) * state.offset_estimate \
        + (policy.offset_gain if heater_on else 0.0)
    new = DeviceState(
        mode=mode,
        fan_index=fan_index,
        heated_intervals=state.heated_intervals + (1 if heater_on else 0),
        offset_estimate=offset,
        was_occupied=True,
    )
    return new, heater_on, FAN_SPEEDS[fan_index]


def duty_fraction(state: DeviceState) -> float:
    """Fraction of the current slot's check intervals with the heater on."""
    return state.heated_intervals / INTERVALS_PER_SLOT


def reset_slot(state: DeviceState) -> DeviceState:
    """Clear the duty accumulator at a 10-minute boundary."""
    return replace(state, heated_intervals=0)
