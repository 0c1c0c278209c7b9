"""Shared fixtures: canonical instances, random specs, independent oracles."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from occens import (
    ChainConfig,
    Occupancy,
    build_distribution,
    entropy_exact,
    make_spec,
    threshold_energy,
)

TWO_LEVEL_ENERGIES = ["1", "2"]
TWO_LEVEL_WEIGHTS = [0.5, 0.5]


def two_level_spec(regime, energy_cap="7/5", c=1.0, weights=None):
    """The canonical m=2 instance; E=7/5 puts the maximum on the boundary."""
    kwargs = {"c": c} if regime == "proportional" else {}
    return make_spec(TWO_LEVEL_ENERGIES, weights or TWO_LEVEL_WEIGHTS,
                     energy_cap, regime, **kwargs)


def random_spec(rng, regime, m, boundary):
    """Seeded random instance with small rational energies.

    Weights are floored at 0.05 so solutions stay away from the simplex
    boundary; the cap is placed strictly between eps_1 and the interior
    threshold (boundary=True) or at/above the threshold (boundary=False).
    """
    q = int(rng.choice([1, 2, 3, 4]))
    numerators = np.sort(rng.choice(np.arange(1, 13), size=m, replace=False))
    energies = [Fraction(int(v), q) for v in numerators]
    weights = rng.dirichlet(np.ones(m))
    weights = np.clip(weights, 0.05, None)
    weights = weights / weights.sum()
    kwargs = {"c": float(rng.uniform(0.5, 3.0))} if regime == "proportional" else {}
    spec_probe = make_spec(energies, weights, float(energies[-1]) + 1.0,
                           regime, **kwargs)
    thr = threshold_energy(spec_probe)
    eps1 = float(energies[0])
    if boundary:
        cap = eps1 + float(rng.uniform(0.15, 0.85)) * (thr - eps1)
    else:
        cap = thr + float(rng.uniform(0.0, 1.0)) * (float(energies[-1]) - thr + 0.5)
    return make_spec(energies, weights, cap, regime, **kwargs)


def central_diff(fn, x, i, h):
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[i] += h
    xm[i] -= h
    return (fn(xp) - fn(xm)) / (2.0 * h)


def single_ball_moves(counts, m):
    """Neighbouring count vectors reachable by one ball move."""
    for i, j in itertools.permutations(range(m), 2):
        if counts[i] > 0:
            new = list(counts)
            new[i] -= 1
            new[j] += 1
            yield i, j, tuple(new)


def enumerated_kernel(spec, n, budget=10_000_000):
    """Transition matrix of the single-ball Metropolis kernel.

    Built from full entropy recomputation (independent of the chain's
    incremental updates): ordered pair (i, j) uniform over m*(m-1),
    reject empty sources and cap violations, accept with min(1, exp(dS)).
    """
    dist = build_distribution(spec, n, budget=budget)
    states = [tuple(int(v) for v in row) for row in dist.counts]
    index = {s: k for k, s in enumerate(states)}
    m = spec.m
    cap = spec.energy_cap_units(n)
    e = spec.energy_units
    kernel = np.zeros((len(states), len(states)))
    base = 1.0 / (m * (m - 1))
    for a, state in enumerate(states):
        s_a = entropy_exact(Occupancy(n, state), dist.degeneracy)
        for _, _, new in single_ball_moves(state, m):
            if sum(u * v for u, v in zip(new, e)) > cap:
                continue
            s_b = entropy_exact(Occupancy(n, new), dist.degeneracy)
            kernel[a, index[new]] += base * min(1.0, np.exp(s_b - s_a))
        kernel[a, a] = 1.0 - kernel[a].sum()
    return dist, states, kernel


def chain_marginal(chain, states):
    index = {s: k for k, s in enumerate(states)}
    freq = np.zeros(len(states))
    for row in chain:
        freq[index[tuple(int(v) for v in row)]] += 1
    return freq / freq.sum()


def default_chain(steps, seed, burn_in=None, thinning=None):
    return ChainConfig(steps=steps, seed=seed, burn_in=burn_in, thinning=thinning)
