"""Canonical decision-vector packing shared by the builder and kernels.

Blocks appear in this fixed order (C-order flattened):

    u    (N,)        supply air temperature per step
    v    (m, N)      zone flow rates
    r    (N,)        reuse ratio
    tm   (N,)        mixer outlet temperature
    tc   (N,)        cooling-unit outlet temperature
    w    (nDev, N)   device heater duty fractions
    va   (nDev, N)   device fan speeds
    x    (nR, N)     room temperatures at state times 1..N
    dx   (nDev, N)   device-region offsets at state times 1..N
    p    (nDev, N)   occupant PMV at state times 1..N
    el   (nR,)       lower comfort slack per room   (relaxed problems only)
    eh   (nR,)       upper comfort slack per room   (relaxed problems only)
"""

from __future__ import annotations


def layout_spans(n_steps: int, n_zones: int, n_rooms: int, n_device: int,
                 relaxed: bool) -> dict[str, tuple[int, tuple[int, ...]]]:
    """Ordered mapping block name -> (offset, shape)."""
    spans: dict[str, tuple[int, tuple[int, ...]]] = {}
    off = 0

    def add(name: str, shape: tuple[int, ...]):
        nonlocal off
        size = 1
        for s in shape:
            size *= s
        spans[name] = (off, shape)
        off += size

    n = n_steps
    add("u", (n,))
    add("v", (n_zones, n))
    add("r", (n,))
    add("tm", (n,))
    add("tc", (n,))
    add("w", (n_device, n))
    add("va", (n_device, n))
    add("x", (n_rooms, n))
    add("dx", (n_device, n))
    add("p", (n_device, n))
    if relaxed:
        add("el", (n_rooms,))
        add("eh", (n_rooms,))
    spans["__total__"] = (off, ())
    return spans


def total_size(spans: dict[str, tuple[int, tuple[int, ...]]]) -> int:
    return spans["__total__"][0]
