"""
Per-subchannel power allocation once a user and an RRH selection are fixed.

With F the net price of one bit/s for user k on the selection (its rate
multiplier over R_min minus the fronthaul multipliers of the selected RRHs
that must fetch its content, each over R_fh) and G the combined channel gain
sum_m alpha_m |h_m|^2 / sigma^2, the Lagrangian term

    L(p) = sum_m p_m - F (B/N) log2(1 + G sum_m p_m)

is minimised by total power [B F G / (N ln 2) - 1]^+ / G, split over the
selected RRHs proportionally to |h_m|^2. Nothing is transmitted when
F G <= N ln 2 / B.
"""

import numpy as np

from .problem import LN2, DualProblem


def optimal_total_power(price, gain, subchannel_bandwidth):
    """Water level solution; vectorised over any broadcastable price/gain arrays."""
    price = np.asarray(price, dtype=float)
    gain = np.asarray(gain, dtype=float)
    level = subchannel_bandwidth * price * gain / LN2 - 1.0
    with np.errstate(divide='ignore', invalid='ignore'):
        total = np.where((gain > 0) & (level > 0), level / np.where(gain > 0, gain, 1.0), 0.0)
    return total


def lagrangian_term(total_power, price, gain, subchannel_bandwidth):
    """L = P - F (B/N) log2(1 + P G) for the proportional split of total power P."""
    return total_power - price * subchannel_bandwidth * np.log2(1.0 + total_power * gain)


def cooperative_power_alloc(n, user, selection, dual, chan, content, cfg, problem=None):
    """Optimal per-RRH powers on subchannel n for `user` and the binary `selection`."""
    problem = problem or DualProblem(chan, content, cfg)
    selection = np.asarray(selection, dtype=float)
    gains = problem.gains[user, :, n] * selection
    combined = gains.sum()
    if combined <= 0:
        return np.zeros(cfg.num_rrhs)
    price = problem.price(dual, user, selection)
    total = optimal_total_power(price, combined, problem.subchannel_bandwidth)
    return total * gains / combined


def water_fill_single_rrh(price, gain, subchannel_bandwidth):
    """
    Single selected RRH: p = [(B / (N ln 2)) F - sigma^2 / |h|^2]^+, the
    classic water-filling level with water height B F / (N ln 2).
    """
    if gain <= 0:
        return 0.0
    return max(subchannel_bandwidth * price / LN2 - 1.0 / gain, 0.0)


def fixed_user_objective(n, user, selection, power, dual, chan, content, cfg, problem=None):
    """
    Lagrangian term of subchannel n for an arbitrary power vector (not
    necessarily the proportional split): sum(p) - F (B/N) log2(1 + SNR).
    """
    problem = problem or DualProblem(chan, content, cfg)
    selection = np.asarray(selection, dtype=float)
    power = np.maximum(np.asarray(power, dtype=float), 0.0)
    amplitude = np.sum(np.sqrt(problem.gains[user, :, n] * power) * selection)
    price = problem.price(dual, user, selection)
    rate = problem.subchannel_bandwidth * np.log2(1.0 + amplitude ** 2)
    return float(np.sum(power) - price * rate)
