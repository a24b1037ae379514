"""Small hand-built instances shared by the test suites of every app."""

import numpy as np

from .models import ChannelState, ContentState, SystemConfig


def make_config(num_rrhs=1, num_users=1, num_subchannels=1, num_contents=1, bandwidth=20e6,
                noise_power=1.0, fronthaul_capacity=80e6, min_rate=1e6, cache_size=0):
    return SystemConfig.uniform(
        num_rrhs=num_rrhs,
        num_users=num_users,
        num_subchannels=num_subchannels,
        num_contents=num_contents,
        bandwidth=bandwidth,
        noise_power=noise_power,
        fronthaul_capacity=fronthaul_capacity,
        min_rate=min_rate,
        cache_size=cache_size,
    )


def flat_channel(cfg, magnitude=1.0):
    return ChannelState(np.full((cfg.num_users, cfg.num_rrhs, cfg.num_subchannels), magnitude, dtype=complex))


def random_channel(cfg, rng, scale=1.0):
    shape = (cfg.num_users, cfg.num_rrhs, cfg.num_subchannels)
    return ChannelState(scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2))


def make_content(cfg, requested=None, cache=None):
    requested = np.zeros(cfg.num_users, dtype=int) if requested is None else requested
    cache = np.zeros((cfg.num_rrhs, cfg.num_contents), dtype=int) if cache is None else cache
    popularity = np.full(cfg.num_contents, 1.0 / cfg.num_contents)
    return ContentState.build(requested, cache, popularity)
