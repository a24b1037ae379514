"""
Domain types of the cache-enabled OFDMA CRAN.

These are plain frozen dataclasses, not ORM tables: nothing here is stored in
a database. Each type validates itself in `clean()` right after construction
and raises `ValidationError` with a field -> message dict, the same way model
`clean()` methods report bad input.

Index conventions used everywhere:
    m  RRH          0..M-1
    k  user         0..K-1
    n  subchannel   0..N-1
    f  content      0..F-1
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from django.core.exceptions import ValidationError


def _frozen(values, dtype):
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _is_binary(array):
    return bool(np.all((array == 0) | (array == 1)))


# ── System configuration ─────────────────────────────────────

@dataclass(frozen=True)
class SystemConfig:
    """
    Static problem parameters.

    Rates are bits/s and powers are Watts throughout. `noise_power` is the
    per-subchannel AWGN power sigma^2 (already integrated over B/N).
    """
    num_rrhs: int
    num_users: int
    num_subchannels: int
    num_contents: int
    bandwidth: float
    noise_power: float
    fronthaul_capacity: tuple
    min_rate: tuple
    cache_size: int

    def __post_init__(self):
        object.__setattr__(self, 'fronthaul_capacity', tuple(float(v) for v in np.ravel(self.fronthaul_capacity)))
        object.__setattr__(self, 'min_rate', tuple(float(v) for v in np.ravel(self.min_rate)))
        self.clean()

    @classmethod
    def uniform(cls, num_rrhs, num_users, num_subchannels, num_contents, bandwidth,
                noise_power, fronthaul_capacity, min_rate, cache_size):
        """Build a config where every RRH and every user share the same bound."""
        return cls(
            num_rrhs=num_rrhs,
            num_users=num_users,
            num_subchannels=num_subchannels,
            num_contents=num_contents,
            bandwidth=bandwidth,
            noise_power=noise_power,
            fronthaul_capacity=(float(fronthaul_capacity),) * num_rrhs,
            min_rate=(float(min_rate),) * num_users,
            cache_size=cache_size,
        )

    def clean(self):
        errors = {}
        for name in ('num_rrhs', 'num_users', 'num_subchannels', 'num_contents'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                errors[name] = f"must be a positive integer, got {value!r}"
        if not self.bandwidth > 0:
            errors['bandwidth'] = "must be positive"
        if not self.noise_power > 0:
            errors['noise_power'] = "must be positive"
        if len(self.fronthaul_capacity) != self.num_rrhs:
            errors['fronthaul_capacity'] = f"expected {self.num_rrhs} values, got {len(self.fronthaul_capacity)}"
        elif not all(v > 0 for v in self.fronthaul_capacity):
            errors['fronthaul_capacity'] = "every RRH needs a positive fronthaul capacity"
        if len(self.min_rate) != self.num_users:
            errors['min_rate'] = f"expected {self.num_users} values, got {len(self.min_rate)}"
        elif not all(v > 0 for v in self.min_rate):
            errors['min_rate'] = "every user needs a positive minimum rate"
        if int(self.cache_size) != self.cache_size or not 0 <= self.cache_size <= self.num_contents:
            errors['cache_size'] = f"must satisfy 0 <= S <= F={self.num_contents}, got {self.cache_size!r}"
        if errors:
            raise ValidationError(errors)

    @property
    def subchannel_bandwidth(self):
        return self.bandwidth / self.num_subchannels

    @property
    def fronthaul_array(self):
        return np.asarray(self.fronthaul_capacity, dtype=float)

    @property
    def min_rate_array(self):
        return np.asarray(self.min_rate, dtype=float)

    def with_changes(self, **changes):
        return replace(self, **changes)


# ── Channel and content state ────────────────────────────────

@dataclass(frozen=True, eq=False)
class ChannelState:
    """Complex access-channel coefficients h[k, m, n]."""
    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'coefficients', _frozen(self.coefficients, complex))
        self.clean()

    def clean(self):
        if self.coefficients.ndim != 3:
            raise ValidationError({'coefficients': f"expected a K x M x N tensor, got shape {self.coefficients.shape}"})
        if not np.all(np.isfinite(self.coefficients)):
            raise ValidationError({'coefficients': "all channel coefficients must be finite"})

    @property
    def shape(self):
        return self.coefficients.shape

    @cached_property
    def magnitudes(self):
        return np.abs(self.coefficients)

    @cached_property
    def power_gains(self):
        """|h|^2 for every (k, m, n)."""
        return self.magnitudes ** 2

    def check_against(self, cfg):
        expected = (cfg.num_users, cfg.num_rrhs, cfg.num_subchannels)
        if self.shape != expected:
            raise ValidationError({'coefficients': f"shape {self.shape} does not match K x M x N = {expected}"})

    def __eq__(self, other):
        return isinstance(other, ChannelState) and np.array_equal(self.coefficients, other.coefficients)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ContentState:
    """
    Cache indicators c[m, f], requests u[k, f], requested content f_k and the
    popularity pmf. Build it with `ContentState.build` from the requested
    indices; `requests` is derived.
    """
    cache: np.ndarray
    requests: np.ndarray
    requested: np.ndarray
    popularity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'cache', _frozen(self.cache, np.int8))
        object.__setattr__(self, 'requests', _frozen(self.requests, np.int8))
        object.__setattr__(self, 'requested', _frozen(self.requested, np.int64))
        object.__setattr__(self, 'popularity', _frozen(self.popularity, float))
        self.clean()

    @classmethod
    def build(cls, requested, cache, popularity):
        requested = np.asarray(requested, dtype=np.int64)
        num_contents = len(popularity)
        if requested.size and (requested.min() < 0 or requested.max() >= num_contents):
            raise ValidationError({'requested': "every user must request one of the F contents"})
        requests = np.zeros((requested.size, num_contents), dtype=np.int8)
        requests[np.arange(requested.size), requested] = 1
        return cls(cache=cache, requests=requests, requested=requested, popularity=popularity)

    def clean(self):
        errors = {}
        if self.cache.ndim != 2 or not _is_binary(self.cache):
            errors['cache'] = "cache must be a binary M x F matrix"
        if self.requests.ndim != 2 or not _is_binary(self.requests):
            errors['requests'] = "requests must be a binary K x F matrix"
        elif np.any(self.requests.sum(axis=1) != 1):
            # a user without a request must be removed by the caller
            errors['requests'] = "every user requests exactly one content"
        elif self.requested.shape != (self.requests.shape[0],) or np.any(
                self.requests[np.arange(self.requested.size), self.requested] != 1):
            errors['requested'] = "requested indices disagree with the request matrix"
        if self.popularity.ndim != 1 or np.any(self.popularity < 0) or abs(self.popularity.sum() - 1.0) > 1e-9:
            errors['popularity'] = "popularity must be a probability vector"
        if not errors and not (self.cache.shape[1] == self.requests.shape[1] == self.popularity.size):
            errors['cache'] = "cache, requests and popularity disagree on F"
        if errors:
            raise ValidationError(errors)

    @property
    def num_users(self):
        return self.requests.shape[0]

    @cached_property
    def uncached_for_user(self):
        """(M, K) indicator 1 - c[m, f_k]."""
        return (1 - self.cache[:, self.requested]).astype(np.int8)

    def check_against(self, cfg):
        errors = {}
        if self.cache.shape != (cfg.num_rrhs, cfg.num_contents):
            errors['cache'] = f"shape {self.cache.shape} does not match M x F = {(cfg.num_rrhs, cfg.num_contents)}"
        elif np.any(self.cache.sum(axis=1) > cfg.cache_size):
            errors['cache'] = f"an RRH stores more than S={cfg.cache_size} contents"
        if self.requests.shape != (cfg.num_users, cfg.num_contents):
            errors['requests'] = f"shape {self.requests.shape} does not match K x F = {(cfg.num_users, cfg.num_contents)}"
        if errors:
            raise ValidationError(errors)

    def with_cache(self, cache):
        return ContentState(cache=cache, requests=self.requests, requested=self.requested, popularity=self.popularity)

    def __eq__(self, other):
        return isinstance(other, ContentState) and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ('cache', 'requests', 'requested', 'popularity'))

    __hash__ = None


def check_instance(chan, content, cfg):
    """Cross-check shapes of a (channel, content, config) triple."""
    chan.check_against(cfg)
    content.check_against(cfg)


# ── Allocation and feasibility ───────────────────────────────

@dataclass(frozen=True, eq=False)
class Allocation:
    """
    Primal point: user assignment nu[k, n], RRH selection alpha[m, n], power
    p[m, n] in Watts and fronthaul shares rho[m, f].

    Construction only checks structure (shapes, binary indicators, finite
    numbers). Exclusivity, nonnegative power and idle subchannels are
    constraints, so `check_feasibility` reports them instead of refusing the
    allocation.
    """
    user_assignment: np.ndarray
    rrh_selection: np.ndarray
    power: np.ndarray
    fronthaul_share: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'user_assignment', _frozen(self.user_assignment, np.int8))
        object.__setattr__(self, 'rrh_selection', _frozen(self.rrh_selection, np.int8))
        object.__setattr__(self, 'power', _frozen(self.power, float))
        object.__setattr__(self, 'fronthaul_share', _frozen(self.fronthaul_share, float))
        self.clean()

    @classmethod
    def zeros(cls, cfg):
        return cls(
            user_assignment=np.zeros((cfg.num_users, cfg.num_subchannels)),
            rrh_selection=np.zeros((cfg.num_rrhs, cfg.num_subchannels)),
            power=np.zeros((cfg.num_rrhs, cfg.num_subchannels)),
            fronthaul_share=np.zeros((cfg.num_rrhs, cfg.num_contents)),
        )

    def clean(self):
        errors = {}
        if self.user_assignment.ndim != 2 or not _is_binary(self.user_assignment):
            errors['user_assignment'] = "must be a binary K x N matrix"
        if self.rrh_selection.ndim != 2 or not _is_binary(self.rrh_selection):
            errors['rrh_selection'] = "must be a binary M x N matrix"
        if self.power.shape != self.rrh_selection.shape:
            errors['power'] = f"shape {self.power.shape} differs from rrh_selection {self.rrh_selection.shape}"
        elif not np.all(np.isfinite(self.power)):
            errors['power'] = "power must be finite"
        if self.fronthaul_share.ndim != 2 or self.fronthaul_share.shape[0] != self.rrh_selection.shape[0]:
            errors['fronthaul_share'] = "must be an M x F matrix"
        if not errors and self.user_assignment.shape[1] != self.rrh_selection.shape[1]:
            errors['user_assignment'] = "user_assignment and rrh_selection disagree on N"
        if errors:
            raise ValidationError(errors)

    def check_against(self, cfg):
        expected = {
            'user_assignment': (cfg.num_users, cfg.num_subchannels),
            'rrh_selection': (cfg.num_rrhs, cfg.num_subchannels),
            'fronthaul_share': (cfg.num_rrhs, cfg.num_contents),
        }
        errors = {
            name: f"shape {getattr(self, name).shape} does not match {shape}"
            for name, shape in expected.items() if getattr(self, name).shape != shape
        }
        if errors:
            raise ValidationError(errors)

    @property
    def total_power(self):
        return float(np.sum(self.power))

    def assigned_user(self, n):
        users = np.flatnonzero(self.user_assignment[:, n])
        return int(users[0]) if users.size else None


@dataclass(frozen=True)
class Violation:
    """One violated constraint; `slack` is (bound - lhs) / bound, negative when violated."""
    kind: str
    index: int
    slack: float


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    user_rates: np.ndarray
    fronthaul_loads: np.ndarray
    total_power: float
    violations: tuple = field(default_factory=tuple)

    @property
    def is_feasible(self):
        return not self.violations

    def violations_of(self, kind):
        return [v for v in self.violations if v.kind == kind]
