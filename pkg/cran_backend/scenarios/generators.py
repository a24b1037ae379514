"""
Random network instances: geometry, channels, requests and cache contents.
"""

import logging

import numpy as np
from django.core.exceptions import ValidationError

from core_model.models import ChannelState, ContentState

from . import seeding
from .models import (
    CACHE_MOST_POPULAR, CACHE_NONE, CACHE_PROBABILISTIC, LAYOUT_CUSTOM,
    Scenario, Topology, check_seed,
)

logger = logging.getLogger(__name__)


# ── Geometry ──────────────────────────────────────────────────

def default_rrh_layout(num_rrhs, side):
    """Centre first, then the square's vertices; the first M points are used."""
    half = side / 2
    points = [(0.0, 0.0), (-half, -half), (half, half), (half, -half), (-half, half)]
    if not 1 <= num_rrhs <= len(points):
        raise ValidationError({'num_rrhs': f"the centre-plus-vertices layout holds 1..5 RRHs, got {num_rrhs}"})
    return np.array(points[:num_rrhs])


def gen_topology(geom, num_rrhs, num_users, seed, drop=0):
    if geom.rrh_layout == LAYOUT_CUSTOM:
        rrhs = np.array(geom.rrh_positions, dtype=float).reshape(-1, 2)
        if rrhs.shape[0] != num_rrhs:
            raise ValidationError({'rrh_positions': f"{rrhs.shape[0]} positions for M={num_rrhs} RRHs"})
    else:
        rrhs = default_rrh_layout(num_rrhs, geom.rrh_region_side)
    rng = seeding.stream(seed, seeding.TOPOLOGY, drop)
    half = geom.user_region_side / 2
    users = rng.uniform(-half, half, size=(num_users, 2))
    return Topology(rrh_positions=rrhs, user_positions=users)


# ── Channel ───────────────────────────────────────────────────

def pathloss_gain(distance, shadowing_db, chan_cfg):
    """Linear large-scale gain 10^(-(PL0 + slope log10 d + X) / 10), d clamped to `min_distance`."""
    d = np.maximum(np.asarray(distance, dtype=float), chan_cfg.min_distance)
    loss_db = chan_cfg.pathloss_fixed_db + chan_cfg.pathloss_slope_db * np.log10(d) + shadowing_db
    return 10.0 ** (-loss_db / 10.0)


def power_delay_profile(num_taps, decay_db):
    """Exponentially decaying tap powers, `decay_db` from first to last, summing to one."""
    if num_taps == 1:
        return np.ones(1)
    profile = 10.0 ** (-decay_db * np.arange(num_taps) / (num_taps - 1) / 10.0)
    return profile / profile.sum()


def noise_power(chan_cfg, bandwidth, num_subchannels):
    return chan_cfg.noise_power(bandwidth, num_subchannels)


def gen_channel(topology, chan_cfg, cfg, seed, drop=0):
    """
    h[k, m, n] = sqrt(large-scale gain[k, m]) * H[k, m, n], with H the N-point
    DFT of Rayleigh taps drawn from the power delay profile.
    """
    num_users, num_rrhs = topology.user_positions.shape[0], topology.rrh_positions.shape[0]
    if (num_users, num_rrhs) != (cfg.num_users, cfg.num_rrhs):
        raise ValidationError(
            f"topology has K={num_users}, M={num_rrhs}; config expects K={cfg.num_users}, M={cfg.num_rrhs}")

    shadowing = seeding.stream(seed, seeding.SHADOWING, drop).normal(
        0.0, chan_cfg.shadowing_std_db, size=(num_users, num_rrhs))
    gain = pathloss_gain(topology.distances(), shadowing, chan_cfg)

    pdp = power_delay_profile(chan_cfg.taps_for(cfg.num_subchannels), chan_cfg.tap_decay_db)
    rng = seeding.stream(seed, seeding.FADING, drop)
    shape = (num_users, num_rrhs, pdp.size)
    taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(pdp / 2)
    response = np.fft.fft(taps, n=cfg.num_subchannels, axis=-1)
    return ChannelState(np.sqrt(gain)[:, :, None] * response)


# ── Content ───────────────────────────────────────────────────

def zipf_pmf(num_contents, exponent):
    """pi_f proportional to f^-exponent for f = 1..F."""
    if num_contents < 1 or exponent < 0:
        raise ValidationError(f"zipf needs F >= 1 and exponent >= 0, got F={num_contents}, exponent={exponent}")
    weights = np.arange(1, num_contents + 1, dtype=float) ** -exponent
    return weights / weights.sum()


def gen_requests(popularity, num_users, seed, drop=0):
    """Each user draws one content from `popularity`; returns (u as K x F, f_k)."""
    popularity = np.asarray(popularity, dtype=float)
    requested = seeding.stream(seed, seeding.REQUESTS, drop).choice(popularity.size, size=num_users, p=popularity)
    requests = np.zeros((num_users, popularity.size), dtype=np.int8)
    requests[np.arange(num_users), requested] = 1
    return requests, requested.astype(np.int64)


def cache_most_popular(popularity, cache_size, num_rrhs):
    """Every RRH stores the S most popular contents; equal popularity goes to the lower index."""
    popularity = np.asarray(popularity, dtype=float)
    ranked = np.argsort(-popularity, kind='stable')[:cache_size]
    cache = np.zeros((num_rrhs, popularity.size), dtype=np.int8)
    cache[:, ranked] = 1
    return cache


def cache_probabilistic(popularity, cache_size, num_rrhs, seed, drop=0):
    """
    Each RRH independently samples S distinct contents, weighted by
    popularity without replacement. Rows run out of positive-probability
    contents only for degenerate pmfs; the lowest free indices fill them up.
    """
    popularity = np.asarray(popularity, dtype=float)
    rng = seeding.stream(seed, seeding.CACHING, drop)
    positive = int(np.count_nonzero(popularity))
    cache = np.zeros((num_rrhs, popularity.size), dtype=np.int8)
    for m in range(num_rrhs):
        drawn = rng.choice(popularity.size, size=min(cache_size, positive), replace=False, p=popularity)
        cache[m, drawn] = 1
        missing = cache_size - drawn.size
        if missing:
            cache[m, np.flatnonzero(cache[m] == 0)[:missing]] = 1
    return cache


def cache_none(num_rrhs, num_contents):
    return np.zeros((num_rrhs, num_contents), dtype=np.int8)


def build_cache(strategy, popularity, cache_size, num_rrhs, seed, drop=0):
    if strategy == CACHE_MOST_POPULAR:
        return cache_most_popular(popularity, cache_size, num_rrhs)
    if strategy == CACHE_PROBABILISTIC:
        return cache_probabilistic(popularity, cache_size, num_rrhs, seed, drop)
    if strategy == CACHE_NONE:
        return cache_none(num_rrhs, len(popularity))
    raise ValidationError({'cache_strategy': f"unknown caching strategy {strategy!r}"})


# ── Whole scenario ────────────────────────────────────────────

def generate_scenario(config, seed, drop=0):
    """Draw drop `drop` of `config` from `seed`; channel and requests ignore the cache strategy."""
    seed = check_seed(seed)
    system = config.system_config()
    topology = gen_topology(config.geometry, config.num_rrhs, config.num_users, seed, drop)
    channel = gen_channel(topology, config.channel, system, seed, drop)
    popularity = zipf_pmf(config.num_contents, config.zipf_exponent)
    _, requested = gen_requests(popularity, config.num_users, seed, drop)
    cache = build_cache(config.cache_strategy, popularity, config.cache_size, config.num_rrhs, seed, drop)
    content = ContentState.build(requested, cache, popularity)
    logger.debug("generated scenario seed=%d drop=%d strategy=%s", seed, drop, config.cache_strategy)
    return Scenario(config=config, seed=seed, drop=drop, topology=topology, system=system,
                    channel=channel, content=content)


def cache_hit_ratio(content):
    """Fraction of (RRH, user) pairs where the RRH already stores the user's content."""
    return float(np.mean(content.cache[:, content.requested]))


def summarize(scenario):
    distances = scenario.topology.distances(scenario.config.channel.min_distance)
    return {
        'num_rrhs': scenario.system.num_rrhs,
        'num_users': scenario.system.num_users,
        'num_subchannels': scenario.system.num_subchannels,
        'num_contents': scenario.system.num_contents,
        'cache_strategy': scenario.config.cache_strategy,
        'seed': scenario.seed,
        'drop': scenario.drop,
        'noise_power_W': scenario.system.noise_power,
        'distance_min_m': float(distances.min()),
        'distance_mean_m': float(distances.mean()),
        'distance_max_m': float(distances.max()),
        'distinct_requests': int(np.unique(scenario.content.requested).size),
        'cache_hit_ratio': cache_hit_ratio(scenario.content),
    }
