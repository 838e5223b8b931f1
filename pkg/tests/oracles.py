"""Slow, definitional reference implementations used only by the tests.

Nothing here imports the code under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def dft_band_energy_ratio(x, fs, lo, hi):
    """Fraction of energy in [lo, hi] Hz, by an explicit O(N^2) DFT."""
    n = len(x)
    k = np.arange(n // 2 + 1)
    t = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, t) / n)
    spec = basis @ np.asarray(x, dtype=np.float64)
    power = np.abs(spec) ** 2
    power[1:(n + 1) // 2] *= 2  # fold negative frequencies
    f = k * fs / n
    band = (f >= lo) & (f <= hi)
    return power[band].sum() / power.sum()


def brute_xcorr(y, x):
    """R[k] = sum_n y[n + k] x[n] with zeros past the end of y, by loops."""
    y = list(map(float, y))
    x = list(map(float, x))
    out = []
    for k in range(len(y)):
        acc = 0.0
        for n, xv in enumerate(x):
            if k + n < len(y):
                acc += y[k + n] * xv
        out.append(acc)
    return np.array(out)


def brute_lof(train, query, k, guard=1e-10):
    """Local Outlier Factor straight from the definitions, with Python loops.

    Neighborhoods hold exactly k points, ties broken by training index.
    """
    train = [np.asarray(p, dtype=float) for p in train]

    def dist(a, b):
        return math.sqrt(sum((float(u) - float(v)) ** 2 for u, v in zip(a, b)))

    def neighbors(p, exclude=None):
        cands = [(dist(p, q), j) for j, q in enumerate(train) if j != exclude]
        cands.sort()
        return cands[:k]

    kdist = []
    nbrs = []
    for i, p in enumerate(train):
        nb = neighbors(p, exclude=i)
        nbrs.append(nb)
        kdist.append(nb[-1][0])

    def lrd_of(nb):
        reach = [max(kdist[j], d) for d, j in nb]
        return 1.0 / (sum(reach) / len(reach) + guard)

    lrd = [lrd_of(nb) for nb in nbrs]
    out = []
    for q in query:
        nb = neighbors(np.asarray(q, dtype=float))
        out.append(sum(lrd[j] for _, j in nb) / len(nb) / lrd_of(nb))
    return np.array(out)


def _subset_indicators(m, max_size):
    cols = [c for size in range(max_size + 1) for c in itertools.combinations(range(m), size)]
    ind = np.zeros((m, len(cols)))
    for j, c in enumerate(cols):
        ind[list(c), j] = 1.0
    return ind


def exhaustive_ocsvm_dual(q, upper, tol=1e-9, kkt_tol=1e-7):
    """Solve min 1/2 a'Qa, 0 <= a <= upper, sum a = 1 by enumerating active sets.

    Every point is assigned to {zero, free, at-upper}. For each free set the
    bordered KKT system is solved once per at-upper subset (vectorized over
    subsets), and the first assignment satisfying all KKT conditions is
    optimal because the problem is convex. Returns ``(objective, alpha)``.
    """
    n = q.shape[0]
    max_upper = min(int(math.floor(1.0 / upper + 1e-12)), n)
    cache = {}
    for n_free in range(0, n + 1):
        for free in itertools.combinations(range(n), n_free):
            f = list(free)
            rest = [i for i in range(n) if i not in free]
            key = (len(rest), min(max_upper, len(rest)))
            if key not in cache:
                cache[key] = _subset_indicators(*key)
            ind = cache[key]
            n_up = ind.sum(axis=0)
            remaining = 1.0 - n_up * upper
            alpha = np.zeros((n, ind.shape[1]))
            alpha[rest] = upper * ind
            if n_free == 0:
                ok = np.abs(remaining) < 1e-12
                g = q @ alpha
                for j in np.flatnonzero(ok):
                    is_up = ind[:, j] > 0
                    gr = g[rest, j]
                    lo = gr[is_up].max() if is_up.any() else -np.inf
                    hi = gr[~is_up].min() if (~is_up).any() else np.inf
                    if lo <= hi + kkt_tol:
                        a = alpha[:, j]
                        return 0.5 * a @ q @ a, a
                continue
            border = np.zeros((n_free + 1, n_free + 1))
            border[:n_free, :n_free] = q[np.ix_(f, f)]
            border[:n_free, n_free] = -1.0
            border[n_free, :n_free] = 1.0
            try:
                inv = np.linalg.inv(border)
            except np.linalg.LinAlgError:
                continue
            rhs = np.vstack([-upper * q[np.ix_(f, rest)] @ ind, remaining[None, :]])
            sol = inv @ rhs
            af, rho = sol[:n_free], sol[n_free]
            alpha[f] = af
            g = q @ alpha
            gr = g[rest]
            ok = ((remaining > 0) & np.all(af >= -tol, axis=0) & np.all(af <= upper + tol, axis=0)
                  & np.all((ind == 0) | (gr <= rho + kkt_tol), axis=0)
                  & np.all((ind == 1) | (gr >= rho - kkt_tol), axis=0))
            hits = np.flatnonzero(ok)
            if hits.size:
                a = alpha[:, hits[0]]
                return 0.5 * a @ q @ a, a
    raise RuntimeError("no KKT point found")
