"""
Evaluation of the dual function g(lambda, mu).

For fixed multipliers the Lagrangian separates into one problem per
subchannel (pick a user, an RRH selection and powers) and one problem in the
fronthaul shares rho, which is linear and solved by inspection.

All subchannels are solved at once with numpy broadcasting; sums that form
g use math.fsum in subchannel order so the value does not depend on how the
work is batched.
"""

import math

import numpy as np

from .models import MODE_EXHAUSTIVE, MODE_GREEDY, SubproblemSolution
from .power import lagrangian_term, optimal_total_power
from .problem import DualProblem

def _finish(problem, users, selection, price, gain, subchannels):
    """Powers, rates and L_n for the chosen (user, selection) per subchannel."""
    b = problem.subchannel_bandwidth
    assigned = users >= 0
    total = np.where(assigned, optimal_total_power(price, gain, b), 0.0)
    values = np.where(assigned, lagrangian_term(total, price, gain, b), 0.0)
    rates = np.where(assigned, b * np.log2(1.0 + total * gain), 0.0)

    # |h|^2 / sigma^2 of the chosen user on each selected RRH, (M, n)
    per_rrh = problem.gains[np.maximum(users, 0), :, subchannels].T * selection
    with np.errstate(divide='ignore', invalid='ignore'):
        share = np.where(gain > 0, per_rrh / np.where(gain > 0, gain, 1.0), 0.0)
    return share * total, values, rates


def lagrangian_table(problem, dual, subchannels):
    """
    Price, combined gain and L value of every (user, selection) pair on the
    given subchannels: price (K, S), gain and values (K, S, n), selections in
    the row order of problem.selections.
    """
    subsets = problem.selections
    gains = problem.gains[:, :, subchannels]
    price = problem.rate_weights(dual)[:, None] - (subsets @ problem.fronthaul_weights(dual)).T
    gain = np.einsum('sm,kmn->ksn', subsets, gains)
    total = optimal_total_power(price[:, :, None], gain, problem.subchannel_bandwidth)
    return price, gain, lagrangian_term(total, price[:, :, None], gain, problem.subchannel_bandwidth)


def _exhaustive(problem, dual, subchannels):
    subsets = problem.selections
    num_users, num_subsets = problem.cfg.num_users, subsets.shape[0]
    price, gain, values = lagrangian_table(problem, dual, subchannels)

    flat = values.reshape(num_users * num_subsets, -1)
    best = np.argmin(flat, axis=0)
    best_value = flat[best, np.arange(flat.shape[1])]
    assigned = best_value < 0.0

    users = np.where(assigned, best // num_subsets, -1)
    chosen = best % num_subsets
    selection = (subsets[chosen].T * assigned).astype(np.int8)
    candidates = subchannels.size * num_users * 2 ** problem.cfg.num_rrhs
    chosen_gain = gain.reshape(num_users * num_subsets, -1)[best, np.arange(flat.shape[1])]
    return users, selection, price[best // num_subsets, chosen], chosen_gain, candidates


def _greedy(problem, dual, subchannels):
    b = problem.subchannel_bandwidth
    gains = problem.gains[:, :, subchannels].transpose(0, 2, 1)        # (K, n, M)
    num_users, num_sc, num_rrhs = gains.shape
    weights = problem.fronthaul_weights(dual).T[:, None, :]            # (K, 1, M)

    chosen = np.zeros((num_users, num_sc, num_rrhs), dtype=bool)
    gain = np.zeros((num_users, num_sc))
    price = np.repeat(problem.rate_weights(dual)[:, None], num_sc, axis=1)
    current = np.zeros((num_users, num_sc))
    growing = np.ones((num_users, num_sc), dtype=bool)
    candidates = 0

    for _ in range(num_rrhs):
        cand_gain = gain[:, :, None] + gains
        cand_price = price[:, :, None] - weights
        cand_value = lagrangian_term(optimal_total_power(cand_price, cand_gain, b), cand_price, cand_gain, b)
        open_slots = ~chosen & growing[:, :, None]
        candidates += int(open_slots.sum())
        cand_value = np.where(open_slots, cand_value, np.inf)

        pick = np.argmin(cand_value, axis=2)
        pick_value = np.take_along_axis(cand_value, pick[:, :, None], axis=2)[:, :, 0]
        improves = pick_value < current
        if not improves.any():
            break
        kk, nn = np.nonzero(improves)
        mm = pick[improves]
        chosen[kk, nn, mm] = True
        gain[improves] = cand_gain[kk, nn, mm]
        price[improves] = cand_price[kk, nn, mm]
        current[improves] = pick_value[improves]
        growing = improves

    best = np.argmin(current, axis=0)
    columns = np.arange(num_sc)
    assigned = current[best, columns] < 0.0
    users = np.where(assigned, best, -1)
    selection = (chosen[best, columns, :].T * assigned).astype(np.int8)
    return users, selection, price[best, columns], gain[best, columns], candidates


def solve_subchannels(problem, dual, mode, subchannels=None):
    """Minimise every per-subchannel Lagrangian term; returns a dict of per-SC arrays."""
    subchannels = np.arange(problem.cfg.num_subchannels) if subchannels is None else np.asarray(subchannels)
    if mode == MODE_EXHAUSTIVE:
        users, selection, price, gain, candidates = _exhaustive(problem, dual, subchannels)
    elif mode == MODE_GREEDY:
        users, selection, price, gain, candidates = _greedy(problem, dual, subchannels)
    else:
        raise ValueError(f"unknown RRH selection mode {mode!r}")
    power, values, rates = _finish(problem, users, selection, price, gain, subchannels)
    return {
        'users': users,
        'selection': selection,
        'power': power,
        'values': values,
        'rates': rates,
        'candidates': candidates,
    }


def per_sc_subproblem(n, dual, mode, chan, content, cfg, problem=None):
    """
    Best (user, selection, power) on subchannel n. Returns
    (user or None, alpha_n, p_n, L_n); no user means L_n = 0.
    """
    problem = problem or DualProblem(chan, content, cfg)
    result = solve_subchannels(problem, dual, mode, subchannels=[n])
    user = int(result['users'][0])
    return (None if user < 0 else user,
            result['selection'][:, 0], result['power'][:, 0], float(result['values'][0]))


def solve_g2(dual, content, cfg):
    """
    rho-part of the dual function. Each RRH puts its whole fronthaul share on
    the uncached content whose requesters carry the largest total lambda
    (lowest index on ties), or on nothing when every such total is zero.
    """
    scores = (dual.lambda_matrix @ content.requests) * (1 - content.cache)    # (M, F)
    best = np.argmax(scores, axis=1)
    best_score = scores[np.arange(cfg.num_rrhs), best]
    rho = np.zeros((cfg.num_rrhs, cfg.num_contents))
    positive = best_score > 0
    rho[np.flatnonzero(positive), best[positive]] = 1.0
    return rho, -math.fsum(best_score[positive])


def evaluate(problem, dual, mode):
    """g(dual) and the minimisers that attain it."""
    result = solve_subchannels(problem, dual, mode)
    rho, g2 = solve_g2(dual, problem.content, problem.cfg)
    g1 = math.fsum(result['values'])
    g = math.fsum([*result['values'], g2, *dual.mu])
    return g, SubproblemSolution(
        users=result['users'],
        selection=result['selection'],
        power=result['power'],
        values=result['values'],
        rates=result['rates'],
        rho=rho,
        g1=g1,
        g2=g2,
        g=g,
        candidates=result['candidates'],
    )


def dual_value(dual, mode, chan, content, cfg, problem=None):
    problem = problem or DualProblem(chan, content, cfg)
    return evaluate(problem, dual, mode)


def supergradient(problem, dual, solution):
    """[d_lambda, d_mu] with d_lambda(m, k) = served[k, m] / R_fh[m] - rho[m, f_k], d_mu(k) = 1 - delivered_k / R_min_k."""
    cfg, content = problem.cfg, problem.content
    served = solution.served_rates(cfg.num_users)                                  # (K, M)
    fronthaul_term = served.T * problem.inv_fronthaul[:, None] - solution.rho[:, content.requested]
    delivered = served_total(solution, cfg.num_users)
    return np.concatenate([problem.index.gather(fronthaul_term), 1.0 - delivered * problem.inv_min_rate])


def served_total(solution, num_users):
    """Rate delivered to each user, summed over its subchannels."""
    return np.bincount(solution.users[solution.users >= 0], weights=solution.rates[solution.users >= 0],
                       minlength=num_users)


def subgradient(dual, sol, chan, content, cfg, problem=None):
    problem = problem or DualProblem(chan, content, cfg)
    return supergradient(problem, dual, sol)
