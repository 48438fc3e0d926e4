"""Pure-Python run loop, assembled from the library modules.

Reference implementation of one replication; the compiled kernel in
``_core.pyx`` follows the same steps on raw arrays.
"""

from __future__ import annotations

import numpy as np

from hiresim import policies as pol
from hiresim import subsidy as sub
from hiresim.estimator import GroupPosterior, conf_radius, min_eigenvalue
from hiresim.metrics import RunTrace, c2s_step, regret_step, u2s_step


def run_market(config, policy, subsidy_rule, market, schedule, radius_params) -> RunTrace:
    G, d, N = config.G, config.d, config.N
    n0 = len(schedule)
    M = N - n0
    slot_group = market.slot_group
    first_slot = [int(np.flatnonzero(slot_group == g)[0]) for g in range(G)]
    theta = [np.array(g.theta) for g in config.groups]
    sigma_x = tuple(g.sigma_x for g in config.groups)
    a = config.a_hybrid if policy.a is None else policy.a
    two_stage = policy.two_stage
    params = pol.StepParams(radius_params, a, sigma_x, config.K_F, G)

    posts = [GroupPosterior(d, config.lambda_reg) for _ in range(G)]
    covered = np.ones(G, dtype=bool)

    def observe(g: int, n: int, k: int) -> None:
        y = market.q[n, k] + market.eps[n, k]
        if two_stage:
            y += market.eta[n, k]
        posts[g].update(market.x[n, k], y)
        if posts[g].error_norm(theta[g]) > conf_radius(posts[g], radius_params):
            covered[g] = False

    initial_cost = 0.0
    for n, g in enumerate(schedule):
        k = first_slot[g]
        q_hat = pol.estimates(pol.Pool(market.x[n], slot_group), posts)
        initial_cost += float(np.max(q_hat) - q_hat[k])
        observe(g, n, k)

    regret = np.zeros(M)
    paid = np.zeros(M)
    index_paid = np.zeros(M)
    cs_paid = np.zeros(M)
    chosen_group = np.zeros(M, dtype=np.int64)
    min_eig = np.zeros((M, G))
    radius = np.zeros((M, G))
    hires = np.zeros((M, G), dtype=np.int64)
    u2s = np.zeros(M) if two_stage else None
    c2s = np.zeros(M) if two_stage else None
    failures = 0

    for t in range(M):
        n = n0 + t  # zero-based row; the round number is n + 1
        pool = pol.Pool(market.x[n], slot_group)
        q = market.q[n]
        dec = pol.policy_step(policy, n + 1, pool, posts, params, eta=market.eta[n])
        c = dec.chosen
        q_hat = dec.q_hat
        if policy.kind == "UCB":
            index_out = sub.ucb_index_subsidy(q_hat, dec.index_used, c)
        elif policy.kind == "Hybrid":
            thr = np.array([pol.hybrid_threshold(posts[g], a, sigma_x[g]) for g in slot_group])
            index_out = sub.hybrid_index_subsidy(q_hat, dec.width, thr, c)
        else:
            index_out = sub.no_subsidy(q_hat, c)
        cs_out = sub.cost_saving_subsidy(c, q_hat)
        active = {"none": index_out, "ucb_index": index_out, "hybrid_index": index_out,
                  "cost_saving": cs_out}[subsidy_rule]
        if not two_stage and not sub.verify_implements(c, active, q_hat):
            failures += 1
        index_paid[t] = index_out.paid
        cs_paid[t] = cs_out.paid
        paid[t] = active.paid
        regret[t] = regret_step(q, c)
        if two_stage:
            u2s[t] = u2s_step(q, market.eta[n], c, config.K_F)
            c2s[t] = c2s_step(q, market.eta[n], slot_group, c, config.K_F, G)
        g = int(slot_group[c])
        chosen_group[t] = g
        observe(g, n, c)
        for h in range(G):
            min_eig[t, h] = min_eigenvalue(posts[h])
            radius[t, h] = conf_radius(posts[h], radius_params)
            hires[t, h] = posts[h].n_obs

    return RunTrace(
        n0=n0, N=N, regret_inc=regret, subsidy_paid=paid, index_paid=index_paid,
        cs_paid=cs_paid, chosen_group=chosen_group, min_eig=min_eig, radius=radius,
        hires=hires, covered=covered, implements_failures=failures,
        initial_cost=initial_cost, u2s_inc=u2s, c2s_inc=c2s,
    )

