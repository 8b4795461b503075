"""Gap-order constraint graphs.

A clause ``a - b >= k`` over integer variables (and the constant 0) becomes a
weighted edge a -k-> b.  A graph is a total weight assignment to ordered
vertex pairs, with -inf meaning "unconstrained".  Closure completes every
weight to the least upper bound of path weight-sums; a positive cycle makes
some weight +inf, in which case the graph has no satisfying valuation and is
replaced by the UNSAT marker.

All public operations keep graphs closed.  Weights are ints, with Python
floats -inf/+inf as the two infinities; sums saturate (+inf dominates).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

NEG_INF = float("-inf")
POS_INF = float("inf")

ZERO = 0  # the distinguished constant vertex


def wadd(a, b):
    """Saturating weight addition: +inf dominates, then -inf."""
    if a == POS_INF or b == POS_INF:
        return POS_INF
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    return a + b


@dataclass(frozen=True)
class Clause:
    """a - b >= k with finite integer k."""

    a: object
    b: object
    k: int


class _Unsat:
    """The graph with no satisfying valuation."""

    def __repr__(self):
        return "UNSAT"

    def __bool__(self):
        return False


UNSAT = _Unsat()


class GapGraph:
    """A closed gap-order graph over a finite vertex set plus the constant 0.

    ``edges`` maps (a, b) to a finite weight meaning a - b >= w; pairs absent
    from the map are unconstrained (-inf).  Instances are immutable by
    convention and hashable.
    """

    __slots__ = ("vars", "edges", "_key", "_hash")

    def __init__(self, vars_, edges):
        self.vars = frozenset(vars_)
        self.edges = edges
        self._key = (self.vars, tuple(sorted(edges.items(), key=repr)))
        self._hash = hash(self._key)

    def __eq__(self, other):
        return isinstance(other, GapGraph) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        parts = ", ".join("%s-%s>=%s" % (a, b, w)
                          for (a, b), w in sorted(self.edges.items(), key=repr))
        return "GapGraph({%s})" % parts

    def weight(self, a, b):
        if a == b:
            return self.edges.get((a, b), 0)
        return self.edges.get((a, b), NEG_INF)

    def vertices(self):
        return self.vars | {ZERO}


def _close(vars_, weights):
    """Floyd-Warshall max-plus closure; returns an edge dict or UNSAT."""
    verts = sorted(vars_, key=repr) + [ZERO]
    n = len(verts)
    idx = {v: i for i, v in enumerate(verts)}
    w = [[NEG_INF] * n for _ in range(n)]
    for i in range(n):
        w[i][i] = 0
    for (a, b), k in weights.items():
        i, j = idx[a], idx[b]
        if k > w[i][j]:
            w[i][j] = k
    for m in range(n):
        wm = w[m]
        for i in range(n):
            wim = w[i][m]
            if wim == NEG_INF:
                continue
            wi = w[i]
            for j in range(n):
                c = wadd(wim, wm[j])
                if c > wi[j]:
                    wi[j] = c
            if wi[i] > 0:
                return UNSAT
    for i in range(n):
        if w[i][i] > 0:
            return UNSAT
    edges = {}
    for i in range(n):
        for j in range(n):
            if i != j and w[i][j] != NEG_INF:
                edges[(verts[i], verts[j])] = w[i][j]
    return edges


def close(g):
    """Recompute the closure of a graph; UNSAT when a positive cycle exists."""
    if g is UNSAT:
        return UNSAT
    edges = _close(g.vars, g.edges)
    if edges is UNSAT:
        return UNSAT
    return GapGraph(g.vars, edges)


def graph_of(clauses, extra_vars=()):
    """Build the closed graph of a clause set (max weight per repeated pair)."""
    vars_ = set(extra_vars)
    weights = {}
    for c in clauses:
        if c.a != ZERO:
            vars_.add(c.a)
        if c.b != ZERO:
            vars_.add(c.b)
        key = (c.a, c.b)
        if key not in weights or c.k > weights[key]:
            weights[key] = c.k
    edges = _close(vars_, weights)
    if edges is UNSAT:
        return UNSAT
    return GapGraph(vars_, edges)


def empty_graph(vars_=()):
    return graph_of([], extra_vars=vars_)


def is_sat(g):
    """Satisfiable over the integers iff closure does not blow up."""
    if g is UNSAT:
        return False
    return _close(g.vars, g.edges) is not UNSAT


def degree(g):
    """Largest k such that some stored edge has finite weight -k; 0 if none.

    Graphs circulate closed except right after a relaxation, whose floor is
    exactly what this measures.
    """
    if g is UNSAT:
        raise ValueError("degree of UNSAT graph")
    worst = 0
    for w in g.edges.values():
        if w < 0 and w != NEG_INF and -w > worst:
            worst = -w
    return int(worst)


def conjoin(g, h):
    """Conjunction: merge vertices and edges (max per pair), then close."""
    if g is UNSAT or h is UNSAT:
        return UNSAT
    vars_ = g.vars | h.vars
    weights = dict(g.edges)
    for key, k in h.edges.items():
        if key not in weights or k > weights[key]:
            weights[key] = k
    edges = _close(vars_, weights)
    if edges is UNSAT:
        return UNSAT
    return GapGraph(vars_, edges)


def substitute(g, renaming):
    """Rename vertices by an injective map; unmentioned vertices are kept."""
    if g is UNSAT:
        return UNSAT
    def r(v):
        return renaming.get(v, v)
    new_vars = [r(v) for v in g.vars]
    if len(set(new_vars)) != len(g.vars):
        raise ValueError("renaming is not injective on %s" % sorted(g.vars, key=repr))
    edges = {(r(a), r(b)): w for (a, b), w in g.edges.items()}
    return GapGraph(new_vars, edges)


def project_away(g, ys):
    """Drop variables from a closed graph (exact existential projection)."""
    if g is UNSAT:
        return UNSAT
    ys = set(ys)
    keep = g.vars - ys
    edges = {(a, b): w for (a, b), w in g.edges.items()
             if a not in ys and b not in ys}
    return GapGraph(keep, edges)


_fresh_counter = itertools.count()


def shift(g, v, delta):
    """Translate the value of v by delta: new v = old v + delta."""
    if g is UNSAT:
        return UNSAT
    if v not in g.vars:
        raise ValueError("shift of unknown vertex %r" % (v,))
    if delta == 0:
        return g
    fresh = ("#shift", next(_fresh_counter))
    renamed = substitute(g, {v: fresh})
    link = graph_of([Clause(v, fresh, delta), Clause(fresh, v, -delta)])
    out = conjoin(renamed, link)
    if out is UNSAT:
        return UNSAT
    return project_away(out, {fresh})


def graph_entails(g, h):
    """g entails h when every edge of h weighs at least g's: Sat(h) <= Sat(g)."""
    if g.vars != h.vars:
        raise ValueError("entailment over different vertex sets")
    for key, w in g.edges.items():
        if h.edges.get(key, NEG_INF) < w:
            return False
    return True


def satisfies_valuation(g, val):
    """Check an integer valuation (ZERO is implicitly 0) against all edges."""
    if g is UNSAT:
        return False
    def v(x):
        return 0 if x == ZERO else val[x]
    for (a, b), w in g.edges.items():
        if w == NEG_INF:
            continue
        if v(a) - v(b) < w:
            return False
    return True


def to_dot(g, name="gapgraph"):
    """DOT-format dump of vertices and finite-weight edges (debug aid)."""
    if g is UNSAT:
        return "digraph %s { unsat [shape=box]; }" % name
    lines = ["digraph %s {" % name]
    for v in sorted(g.vertices(), key=repr):
        lines.append('  "%s";' % (v,))
    for (a, b), w in sorted(g.edges.items(), key=repr):
        lines.append('  "%s" -> "%s" [label="%s"];' % (a, b, w))
    lines.append("}")
    return "\n".join(lines)
