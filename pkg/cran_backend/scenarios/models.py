"""
Configuration and result types of the scenario generator.

Distances are meters, powers dB/dBm where the field name says so, everything
else SI. Like the system model types these validate in `clean()`.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.core.exceptions import ValidationError

from core_model.models import ChannelState, ContentState, SystemConfig

SEED_MAX = 2 ** 64 - 1

LAYOUT_CENTER_PLUS_VERTICES = 'center_plus_vertices'
LAYOUT_CUSTOM = 'custom'

CACHE_MOST_POPULAR = 'most_popular'
CACHE_PROBABILISTIC = 'probabilistic'
CACHE_NONE = 'none'
CACHE_STRATEGIES = (CACHE_MOST_POPULAR, CACHE_PROBABILISTIC, CACHE_NONE)

# last tap sits e^-3 below the first
DEFAULT_TAP_DECAY_DB = 30.0 / math.log(10.0)


def check_seed(seed):
    if int(seed) != seed or not 0 <= seed <= SEED_MAX:
        raise ValidationError({'seed': f"seed must be an unsigned 64-bit integer, got {seed!r}"})
    return int(seed)


@dataclass(frozen=True)
class GeometryConfig:
    """
    RRH square (side `rrh_region_side`) centred inside the user square.
    The default layout puts one RRH in the centre and the others on the
    vertices; `custom` takes explicit (x, y) pairs.
    """
    rrh_region_side: float = 100.0
    user_region_side: float = 200.0
    rrh_layout: str = LAYOUT_CENTER_PLUS_VERTICES
    rrh_positions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'rrh_positions', tuple(tuple(map(float, p)) for p in self.rrh_positions))
        self.clean()

    def clean(self):
        errors = {}
        if not self.rrh_region_side > 0:
            errors['rrh_region_side'] = "must be positive"
        if not self.user_region_side > 0:
            errors['user_region_side'] = "must be positive"
        if self.rrh_layout not in (LAYOUT_CENTER_PLUS_VERTICES, LAYOUT_CUSTOM):
            errors['rrh_layout'] = f"unknown layout {self.rrh_layout!r}"
        elif self.rrh_layout == LAYOUT_CUSTOM:
            if not self.rrh_positions:
                errors['rrh_positions'] = "a custom layout needs at least one RRH position"
            elif any(len(p) != 2 for p in self.rrh_positions):
                errors['rrh_positions'] = "positions are (x, y) pairs"
            elif np.any(np.abs(np.mean(self.rrh_positions, axis=0)) > self.user_region_side / 2):
                errors['rrh_positions'] = "the user region must contain the centre of the RRH region"
        if errors:
            raise ValidationError(errors)


@dataclass(frozen=True)
class ChannelConfig:
    """Large-scale and small-scale channel parameters; `num_taps` None means N/4."""
    carrier: float = 2e9
    pathloss_fixed_db: float = 38.0
    pathloss_slope_db: float = 30.0
    shadowing_std_db: float = 6.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    num_taps: int = None
    tap_decay_db: float = DEFAULT_TAP_DECAY_DB
    min_distance: float = 1.0

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        if self.num_taps is not None and (int(self.num_taps) != self.num_taps or self.num_taps < 1):
            errors['num_taps'] = "must be a positive integer"
        if self.shadowing_std_db < 0:
            errors['shadowing_std_db'] = "must be nonnegative"
        if self.tap_decay_db < 0:
            errors['tap_decay_db'] = "must be nonnegative"
        if not self.min_distance > 0:
            errors['min_distance'] = "must be positive"
        if not self.carrier > 0:
            errors['carrier'] = "must be positive"
        if errors:
            raise ValidationError(errors)

    def noise_power(self, bandwidth, num_subchannels):
        """Per-subchannel AWGN power in Watts: PSD + NF + 10 log10(B/N), converted from dBm."""
        dbm = self.noise_psd_dbm_hz + self.noise_figure_db + 10 * math.log10(bandwidth / num_subchannels)
        return 10 ** (dbm / 10) / 1000

    def taps_for(self, num_subchannels):
        taps = max(1, num_subchannels // 4) if self.num_taps is None else int(self.num_taps)
        if taps > num_subchannels:
            raise ValidationError({'num_taps': f"{taps} taps exceed N={num_subchannels} subchannels"})
        return taps


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to draw one network instance, apart from the seed."""
    num_rrhs: int = 5
    num_users: int = 10
    num_subchannels: int = 64
    num_contents: int = 50
    bandwidth: float = 20e6
    fronthaul_capacity: float = 80e6
    min_rate: float = 20e6
    cache_size: int = 5
    zipf_exponent: float = 0.9
    cache_strategy: str = CACHE_MOST_POPULAR
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        self.clean()

    def clean(self):
        errors = {}
        if self.cache_strategy not in CACHE_STRATEGIES:
            errors['cache_strategy'] = f"expected one of {', '.join(CACHE_STRATEGIES)}, got {self.cache_strategy!r}"
        if self.zipf_exponent < 0:
            errors['zipf_exponent'] = "must be nonnegative"
        if self.geometry.rrh_layout == LAYOUT_CUSTOM:
            if len(self.geometry.rrh_positions) != self.num_rrhs:
                errors['geometry'] = f"{len(self.geometry.rrh_positions)} custom positions for M={self.num_rrhs} RRHs"
        elif self.num_rrhs > 5:
            errors['num_rrhs'] = "the centre-plus-vertices layout holds at most 5 RRHs"
        if errors:
            raise ValidationError(errors)
        # SystemConfig carries the remaining range checks
        self.system_config()

    @property
    def noise_power(self):
        return self.channel.noise_power(self.bandwidth, self.num_subchannels)

    def system_config(self):
        return SystemConfig.uniform(
            num_rrhs=self.num_rrhs,
            num_users=self.num_users,
            num_subchannels=self.num_subchannels,
            num_contents=self.num_contents,
            bandwidth=self.bandwidth,
            noise_power=self.noise_power,
            fronthaul_capacity=self.fronthaul_capacity,
            min_rate=self.min_rate,
            cache_size=self.cache_size,
        )

    def with_changes(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Topology:
    """RRH and user positions in meters, shapes (M, 2) and (K, 2)."""
    rrh_positions: np.ndarray
    user_positions: np.ndarray

    def __post_init__(self):
        for name in ('rrh_positions', 'user_positions'):
            array = np.array(getattr(self, name), dtype=float).reshape(-1, 2)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    def distances(self, min_distance=0.0):
        """(K, M) user-RRH distances, clamped from below."""
        delta = self.user_positions[:, None, :] - self.rrh_positions[None, :, :]
        return np.maximum(np.hypot(delta[..., 0], delta[..., 1]), min_distance)

    def __eq__(self, other):
        return (isinstance(other, Topology)
                and np.array_equal(self.rrh_positions, other.rrh_positions)
                and np.array_equal(self.user_positions, other.user_positions))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    seed: int
    drop: int
    topology: Topology
    system: SystemConfig
    channel: ChannelState
    content: ContentState

    def __post_init__(self):
        check_seed(self.seed)
        self.channel.check_against(self.system)
        self.content.check_against(self.system)

    def __eq__(self, other):
        return isinstance(other, Scenario) and all(
            getattr(self, name) == getattr(other, name)
            for name in ('config', 'seed', 'drop', 'topology', 'system', 'channel', 'content'))

    __hash__ = None
