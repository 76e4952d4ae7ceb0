"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np

from cpsseq.seqdist import indel_cost, substitution_cost


def brute_force_om(A, B, scheme):
    """Minimum cost over every monotone alignment, enumerated path by path."""
    a, b = A.positions(), B.positions()
    best = [float("inf")]

    def walk(i, j, cost):
        if i == len(a) and j == len(b):
            best[0] = min(best[0], cost)
            return
        if i < len(a) and j < len(b):
            walk(i + 1, j + 1, cost + substitution_cost(a[i], b[j], scheme))
        if i < len(a):
            walk(i + 1, j, cost + indel_cost(a[i], scheme))
        if j < len(b):
            walk(i, j + 1, cost + indel_cost(b[j], scheme))

    walk(0, 0, 0.0)
    return best[0]


def levenshtein(s, t):
    prev = list(range(len(t) + 1))
    for i, x in enumerate(s, 1):
        cur = [i]
        for j, y in enumerate(t, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def path_prob(model, obs, path):
    p = model.initial[path[0]]
    for t, s in enumerate(path):
        if t:
            p *= model.transition[path[t - 1], s]
        for c, e in enumerate(model.emission):
            if obs[c, t] >= 0:
                p *= e[s, obs[c, t]]
    return p


def brute_likelihood(model, obs):
    S, T = model.n_states, obs.shape[1]
    return sum(path_prob(model, obs, p) for p in itertools.product(range(S), repeat=T))


def brute_viterbi(model, obs):
    S, T = model.n_states, obs.shape[1]
    # product() yields paths in lexicographic order, so max() keeps the lowest on ties
    return max(itertools.product(range(S), repeat=T), key=lambda p: path_prob(model, obs, p))


def random_obs(rng, sizes, T, missing=0.25):
    obs = np.array([rng.integers(0, m, T) for m in sizes])
    obs[rng.random(obs.shape) < missing] = -1
    return obs


def alpha_oracle(ratings):
    """Pair-enumeration form: alpha = 1 - (n - 1) * sum_u D_u / sum_{c != k} n_c n_k,
    where D_u counts ordered disagreeing rater pairs in unit u over (m_u - 1)."""
    units = list(zip(*ratings))
    pairable = [[v for v in u if v is not None] for u in units]
    pairable = [u for u in pairable if len(u) >= 2]
    values = [v for u in pairable for v in u]
    n = len(values)
    obs = sum(sum(a != b for a, b in itertools.permutations(u, 2)) / (len(u) - 1) for u in pairable)
    counts = {v: values.count(v) for v in set(values)}
    exp = sum(counts[a] * counts[b] for a in counts for b in counts if a != b)
    return 1 - (n - 1) * obs / exp
