"""
Unit-suffixed quantities for run configuration files.

Every physical entry of a config file is written with its unit ("20 MHz",
"80 Mbps", "-174 dBm/Hz"); bare numbers are refused because their unit
would be a guess. Values come back in SI (Hz, bits/s, Watts, meters) or in
dB for the logarithmic kinds.
"""

import math
import re

from django.core.exceptions import ValidationError

FREQUENCY = 'frequency'
RATE = 'rate'
POWER = 'power'
DECIBEL = 'decibel'
PSD = 'psd'
LENGTH = 'length'

_SCALE = {
    FREQUENCY: {'Hz': 1.0, 'kHz': 1e3, 'MHz': 1e6, 'GHz': 1e9},
    RATE: {'bps': 1.0, 'kbps': 1e3, 'Mbps': 1e6, 'Gbps': 1e9},
    POWER: {'W': 1.0, 'mW': 1e-3},
    DECIBEL: {'dB': 1.0},
    PSD: {'dBm/Hz': 1.0},
    LENGTH: {'m': 1.0, 'km': 1e3},
}

_QUANTITY = re.compile(r'^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/]+)\s*$')


def parse_quantity(value, kind):
    """'20 MHz' -> 2e7; 'dBm' is accepted for powers and converted to Watts."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ValidationError(f"{value!r} has no unit; write it like {example(kind)!r}")
    match = _QUANTITY.match(value)
    if not match:
        raise ValidationError(f"cannot read {value!r} as a {kind}; write it like {example(kind)!r}")
    number, unit = float(match.group(1)), match.group(2)
    if kind == POWER and unit == 'dBm':
        return 10 ** (number / 10) / 1000
    scale = _SCALE[kind].get(unit)
    if scale is None:
        allowed = ', '.join(list(_SCALE[kind]) + (['dBm'] if kind == POWER else []))
        raise ValidationError(f"unit {unit!r} is not a {kind} unit (expected one of {allowed})")
    return number * scale


def example(kind):
    return {
        FREQUENCY: '20 MHz',
        RATE: '80 Mbps',
        POWER: '1e-6 W',
        DECIBEL: '6 dB',
        PSD: '-174 dBm/Hz',
        LENGTH: '100 m',
    }[kind]


def format_quantity(value, kind):
    """Inverse of parse_quantity for reports: the largest unit that keeps the number >= 1."""
    if kind in (DECIBEL, PSD):
        unit = next(iter(_SCALE[kind]))
        return f"{value:g} {unit}"
    units = sorted(_SCALE[kind].items(), key=lambda item: item[1])
    chosen = units[0]
    for unit, scale in units:
        if abs(value) >= scale:
            chosen = (unit, scale)
    return f"{value / chosen[1]:g} {chosen[0]}"


def watts_to_dbm(watts):
    return 10 * math.log10(watts * 1000)
