"""
Physical-layer arithmetic: coherent-combining SNR, subchannel rate and the
minimum power that reaches a target rate.
"""

import numpy as np
from django.core.exceptions import ValidationError


def snr(h_row, alpha, power, noise_power):
    """
    SNR of a user on one subchannel when the selected RRHs transmit coherently:

        gamma = (sum_m |h_m| alpha_m sqrt(p_m))^2 / sigma^2

    Only the magnitudes of `h_row` matter.
    """
    h_row = np.asarray(h_row)
    alpha = np.asarray(alpha, dtype=float)
    power = np.asarray(power, dtype=float)
    if not (h_row.shape == alpha.shape == power.shape) or h_row.ndim != 1:
        raise ValidationError(
            f"h_row, alpha and power must be vectors of one length, got {h_row.shape}, {alpha.shape}, {power.shape}")
    if not noise_power > 0:
        raise ValidationError(f"noise power must be positive, got {noise_power!r}")
    amplitude = np.sum(np.abs(h_row) * alpha * np.sqrt(np.maximum(power, 0.0)))
    return float(amplitude ** 2 / noise_power)


def rate(gamma, cfg):
    """Achievable rate (B/N) log2(1 + gamma) in bits/s; accepts scalars or arrays."""
    gamma_array = np.asarray(gamma, dtype=float)
    if np.any(gamma_array < 0):
        raise ValidationError("SNR must be nonnegative")
    value = cfg.subchannel_bandwidth * np.log2(1.0 + gamma_array)
    return float(value) if value.ndim == 0 else value


def spectral_efficiency(target_rate, cfg):
    """Bits/s/Hz one subchannel needs to carry `target_rate` bits/s."""
    return target_rate / cfg.subchannel_bandwidth


def min_power_for_rate(h_row, alpha, target_rate, cfg):
    """
    Cheapest per-RRH power vector that delivers `target_rate` on one
    subchannel with the given selection.

    The SNR target is 2^(N r / B) - 1. Over the selected RRHs the total power
    gamma / G is split proportionally to |h_m|^2, G = sum_m alpha_m |h_m|^2 / sigma^2.
    """
    alpha = np.asarray(alpha, dtype=float)
    gains = np.abs(np.asarray(h_row)) ** 2 * alpha / cfg.noise_power
    if target_rate < 0:
        raise ValidationError(f"target rate must be nonnegative, got {target_rate!r}")
    if target_rate == 0:
        return np.zeros_like(gains)
    total_gain = gains.sum()
    if not total_gain > 0:
        raise ValidationError("a positive rate needs at least one selected RRH with a nonzero channel")
    gamma = np.expm1(np.log(2.0) * spectral_efficiency(target_rate, cfg))
    return gamma * gains / total_gain ** 2


def rate_matrix(alloc, chan, cfg):
    """
    Delivered rate of every user on every subchannel, nu[k, n] * r[k, n], as a
    K x N array. A subchannel shared by several users (an exclusivity
    violation) gives each of them the rate its own channel would allow.
    """
    amplitude = np.einsum(
        'kmn,mn->kn', chan.magnitudes, alloc.rrh_selection * np.sqrt(np.maximum(alloc.power, 0.0)))
    gamma = amplitude ** 2 / cfg.noise_power
    return alloc.user_assignment * rate(gamma, cfg)
