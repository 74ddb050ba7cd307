"""Density-based clustering (DBSCAN) with permutation-invariant output."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

NOISE = -1


def dbscan(X, eps: float, min_pts: int) -> np.ndarray:
    """Label each row of ``X`` with a cluster id, or ``NOISE``.

    Core points (at least ``min_pts`` neighbours within ``eps``, the point
    itself included) that are mutually reachable form one cluster. A border
    point joins the cluster of its nearest core neighbour, so the result
    does not depend on the order of the rows. Cluster ids are assigned in
    lexicographic order of each cluster's smallest member.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    D = cdist(X, X)
    near = D <= eps
    core = near.sum(axis=1) >= min_pts

    # connected components over the core-core neighbourhood graph
    comp = np.full(n, NOISE, dtype=int)
    n_comp = 0
    for i in np.flatnonzero(core):
        if comp[i] != NOISE:
            continue
        stack = [i]
        comp[i] = n_comp
        while stack:
            j = stack.pop()
            for k in np.flatnonzero(near[j] & core):
                if comp[k] == NOISE:
                    comp[k] = n_comp
                    stack.append(k)
        n_comp += 1

    for i in np.flatnonzero(~core):
        cand = np.flatnonzero(near[i] & core)
        if cand.size:
            # nearest core point; equal distances resolved on coordinates
            order = np.lexsort(tuple(X[cand].T[::-1]) + (D[i, cand],))
            comp[i] = comp[cand[order[0]]]

    if n_comp == 0:
        return labels
    firsts = []
    for c in range(n_comp):
        members = X[comp == c]
        firsts.append(tuple(members[np.lexsort(members.T[::-1])[0]]))
    rank = {c: r for r, c in enumerate(sorted(range(n_comp), key=lambda c: firsts[c]))}
    for i in range(n):
        if comp[i] != NOISE:
            labels[i] = rank[comp[i]]
    return labels
