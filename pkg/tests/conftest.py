import os
import random

import numpy as np
import pytest

from phzverify.gapgraph import (Clause, GapGraph, NEG_INF, UNSAT, ZERO,
                                graph_of, satisfies_valuation)

CORPUS = os.path.join(os.path.dirname(__file__), "..", "corpus")


def corpus_path(name):
    return os.path.join(CORPUS, name + ".phz")


# --- random gap graphs and the box valuation oracle -------------------------

def random_clauses(rng, max_vars=5, wlo=-5, whi=5, density=0.35):
    n = rng.randint(1, max_vars)
    vars_ = ["x%d" % i for i in range(n)]
    verts = vars_ + [ZERO]
    clauses = []
    for a in verts:
        for b in verts:
            if a == b:
                continue
            if rng.random() < density:
                clauses.append(Clause(a, b, rng.randint(wlo, whi)))
    return vars_, clauses


_GRIDS = {}


def box_grid(n, lo=-10, hi=10):
    """All integer points of [lo, hi]^n as an (m, n) int16 array, cached."""
    key = (n, lo, hi)
    if key not in _GRIDS:
        axes = [np.arange(lo, hi + 1, dtype=np.int16)] * n
        mesh = np.meshgrid(*axes, indexing="ij")
        _GRIDS[key] = np.stack([m.ravel() for m in mesh], axis=1)
    return _GRIDS[key]


def _mask_over(grid, idx, pairs):
    mask = np.ones(len(grid), dtype=bool)
    zero = np.zeros(len(grid), dtype=np.int32)
    for a, b, w in pairs:
        va = zero if a == ZERO else grid[:, idx[a]].astype(np.int32)
        vb = zero if b == ZERO else grid[:, idx[b]].astype(np.int32)
        mask &= (va - vb) >= w
    return mask


def box_mask(g, vars_, lo=-10, hi=10):
    """Boolean mask over the box: which valuations satisfy the graph."""
    grid = box_grid(len(vars_), lo, hi)
    idx = {v: i for i, v in enumerate(vars_)}
    if g is UNSAT:
        return np.zeros(len(grid), dtype=bool)
    pairs = [(a, b, w) for (a, b), w in g.edges.items() if w != NEG_INF]
    return _mask_over(grid, idx, pairs)


def box_mask_clauses(clauses, vars_, lo=-10, hi=10):
    """Mask over the box for a raw clause conjunction."""
    grid = box_grid(len(vars_), lo, hi)
    idx = {v: i for i, v in enumerate(vars_)}
    return _mask_over(grid, idx, [(c.a, c.b, c.k) for c in clauses])


def construct_model(g):
    """Build an integer model of a satisfiable closed graph by lowering
    repairs (independent of the closure code path), or None."""
    if g is UNSAT:
        return None
    verts = sorted(g.vars, key=repr)
    val = {}
    for v in verts:
        w = g.edges.get((v, ZERO), NEG_INF)
        val[v] = int(w) if w != NEG_INF else 0
    val[ZERO] = 0
    for _ in range(len(verts) + 2):
        changed = False
        for (a, b), w in g.edges.items():
            if w == NEG_INF or b == ZERO:
                continue
            if val[a] - val[b] < w:
                val[b] = val[a] - int(w)
                changed = True
        if not changed:
            break
    else:
        return None
    out = {v: val[v] for v in verts}
    return out if satisfies_valuation(g, out) else None


def bf_positive_cycle(vars_, clauses):
    """Bellman-Ford style positive-cycle detection on the raw clause graph,
    independent of the Floyd-Warshall closure."""
    verts = sorted(set(vars_), key=repr) + [ZERO]
    best = {v: {u: (0 if u == v else None) for u in verts} for v in verts}
    edges = {}
    for c in clauses:
        key = (c.a, c.b)
        if key not in edges or c.k > edges[key]:
            edges[key] = c.k
    for _ in range(len(verts) + 1):
        changed = False
        for src in verts:
            row = best[src]
            for (a, b), w in edges.items():
                if row[a] is None:
                    continue
                cand = row[a] + w
                if row[b] is None or cand > row[b]:
                    row[b] = cand
                    changed = True
        if not changed:
            break
    for v in verts:
        if best[v][v] is not None and best[v][v] > 0:
            return True
    if changed:  # still improving after |V| rounds: positive cycle
        return True
    return False


@pytest.fixture
def rng():
    return random.Random(20240817)
