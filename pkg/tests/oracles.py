"""Independent reference computations used by the tests.

Nothing here shares code paths with the package beyond its plain data types.
"""

import itertools

import numpy as np

from twotype_gt.pooling import IncidenceMatrix, PoolingDesign
from twotype_gt.sim import Observations


def brute_posterior(design, obs, priors, noise):
    """Joint marginals by looping over every (x_A, x_B) configuration."""
    n = design.n_items
    fams = [(design.M_A.rows, obs.s_A, "A"), (design.M_B.rows, obs.s_B, "B"),
            (design.M_AB.rows, obs.s_AB, "AB")]
    sens, spec = noise.sensitivity, noise.specificity
    acc = np.zeros((n, 4))
    total = 0.0
    for xa in itertools.product((0, 1), repeat=n):
        for xb in itertools.product((0, 1), repeat=n):
            w = 1.0
            for j in range(n):
                w *= priors.p_A if xa[j] else 1 - priors.p_A
                w *= priors.p_B if xb[j] else 1 - priors.p_B
            for rows, s, kind in fams:
                for members, si in zip(rows, s):
                    if kind == "A":
                        z = any(xa[j] for j in members)
                    elif kind == "B":
                        z = any(xb[j] for j in members)
                    else:
                        z = any(xa[j] or xb[j] for j in members)
                    if z:
                        w *= sens if si else 1 - sens
                    else:
                        w *= (1 - spec) if si else spec
            total += w
            for j in range(n):
                acc[j, 2 * xa[j] + xb[j]] += w
    return acc / total


def rows_share_at_most_one(M):
    """Pairwise row intersections, straight from the dense matrix."""
    D = M.to_dense().astype(np.int64)
    overlap = D @ D.T
    np.fill_diagonal(overlap, 0)
    return bool((overlap <= 1).all())


def random_tree_design(rng, max_items=8, max_pool=3, max_pools=10):
    """Random design whose union item-pool graph is a forest.

    Each new pool draws its members from distinct connected components, which
    can never close a cycle.
    """
    n = int(rng.integers(1, max_items + 1))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rows = {"A": [], "B": [], "AB": []}
    for _ in range(int(rng.integers(0, max_pools + 1))):
        order = rng.permutation(n)
        members, roots = [], set()
        size = int(rng.integers(1, max_pool + 1))
        for j in order:
            r = find(int(j))
            if r not in roots:
                roots.add(r)
                members.append(int(j))
            if len(members) == size:
                break
        for j in members[1:]:
            parent[find(j)] = find(members[0])
        rows[str(rng.choice(["A", "B", "AB"]))].append(members)
    mats = [IncidenceMatrix(len(rows[k]), n, rows[k]) for k in ("A", "B", "AB")]
    return PoolingDesign(*mats)


def random_observations(design, rng):
    return Observations(rng.random(design.M_A.n_rows) < 0.5, rng.random(design.M_B.n_rows) < 0.5,
                        rng.random(design.M_AB.n_rows) < 0.5)


def random_loopy_design(rng, n, pools=6, max_pool=3):
    rows = {"A": [], "B": [], "AB": []}
    for _ in range(pools):
        size = int(rng.integers(1, min(max_pool, n) + 1))
        rows[str(rng.choice(["A", "B", "AB"]))].append(rng.choice(n, size, replace=False).tolist())
    return PoolingDesign(*(IncidenceMatrix(len(rows[k]), n, rows[k]) for k in ("A", "B", "AB")))
