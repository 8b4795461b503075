"""Symbolic constraints over gap-order graphs.

A constraint mirrors a configuration except that each phaser carries a
gap-order graph over the wait/signal variables of its registered tasks
instead of concrete phase values.  Task t is registered on phaser p exactly
when the wait vertex ("w", t) is present in p's graph; a registered task
whose signal vertex ("s", t) is absent has signal phase +inf (WAIT-mode
registration), so premises mentioning its signal are vacuously true.

The denotation of a constraint is the set of configurations matching it up
to a renaming of task and phaser identifiers; ``satisfies`` decides
membership and ``entails`` the ordering whose larger side denotes less.
"""

from __future__ import annotations

import itertools
import json

from .gapgraph import (Clause, GapGraph, NEG_INF, UNSAT, ZERO, close, conjoin,
                       degree, graph_entails, graph_of, project_away,
                       satisfies_valuation, substitute)

INF = float("inf")


def wvar(t):
    return ("w", t)


def svar(t):
    return ("s", t)


class Constraint:
    """Symbolic state: tasks, phasers, booleans, control, bindings, graphs."""

    __slots__ = ("tasks", "phasers", "bv", "pc", "pv", "graphs", "_key", "_hash")

    def __init__(self, tasks, phasers, bv, pc, pv, graphs):
        self.tasks = tuple(sorted(tasks))
        self.phasers = tuple(sorted(phasers))
        self.bv = dict(bv)
        self.pc = dict(pc)
        self.pv = {t: dict(m) for t, m in pv.items()}
        self.graphs = dict(graphs)
        self._key = (
            self.tasks,
            self.phasers,
            tuple(sorted(self.bv.items())),
            tuple(sorted(self.pc.items(), key=lambda kv: kv[0])),
            tuple(sorted((t, tuple(sorted(m.items()))) for t, m in self.pv.items())),
            tuple((p, self.graphs[p]) for p in self.phasers),
        )
        self._hash = hash(self._key)

    def __eq__(self, other):
        return isinstance(other, Constraint) and self._key == other._key

    def __hash__(self):
        return self._hash

    def registered(self, p):
        return sorted(t for t in self.tasks if wvar(t) in self.graphs[p].vars)

    def is_registered(self, t, p):
        return wvar(t) in self.graphs[p].vars

    def infsig(self, p):
        g = self.graphs[p]
        return frozenset(t for t in self.tasks
                         if wvar(t) in g.vars and svar(t) not in g.vars)

    def describe(self):
        lines = []
        for t in self.tasks:
            binds = ", ".join("%s->%d" % (v, p) for v, p in sorted(self.pv[t].items()))
            lines.append("task %d [%s]: %s" % (t, binds, self.pc[t]))
        for p in self.phasers:
            lines.append("phaser %d: reg=%s infsig=%s %r"
                         % (p, self.registered(p), sorted(self.infsig(p)), self.graphs[p]))
        lines.append("bools: %s" % self.bv)
        return "\n".join(lines)


def registered(p, constraint):
    return constraint.registered(p)


def is_registered(t, p, constraint):
    return constraint.is_registered(t, p)


# --- strengthening ----------------------------------------------------------

def strengthen(phi):
    """Impose the wait/signal invariant on every graph.

    Raises to 0 any weight below 0 on signal->wait, signal->0 and wait->0
    edges (absent edges count as -inf and also become 0).  Returns None when
    some graph becomes unsatisfiable.
    """
    graphs = {}
    for p in phi.phasers:
        g = phi.graphs[p]
        if g is UNSAT:
            return None
        reg = [t for t in phi.tasks if wvar(t) in g.vars]
        fin = [t for t in reg if svar(t) in g.vars]
        edges = dict(g.edges)
        changed = False
        for t in fin:
            for u in reg:
                key = (svar(t), wvar(u))
                if edges.get(key, NEG_INF) < 0:
                    edges[key] = 0
                    changed = True
            key = (svar(t), ZERO)
            if edges.get(key, NEG_INF) < 0:
                edges[key] = 0
                changed = True
        for t in reg:
            key = (wvar(t), ZERO)
            if edges.get(key, NEG_INF) < 0:
                edges[key] = 0
                changed = True
        if changed:
            g = close(GapGraph(g.vars, edges))
            if g is UNSAT:
                return None
        graphs[p] = g
    return Constraint(phi.tasks, phi.phasers, phi.bv, phi.pc, phi.pv, graphs)


# --- degree, freeness, relaxation -------------------------------------------

def degree_of(phi):
    if not phi.phasers:
        return 0
    return max(degree(phi.graphs[p]) for p in phi.phasers)


def is_free(phi):
    """Only nonnegative signal->wait, signal->0 and wait->0 lower bounds."""
    for p in phi.phasers:
        for (a, b), w in phi.graphs[p].edges.items():
            if w == NEG_INF:
                continue
            if w < 0:
                return False
            if isinstance(a, tuple) and a[0] == "s":
                if b == ZERO or (isinstance(b, tuple) and b[0] == "w"):
                    continue
                return False
            if isinstance(a, tuple) and a[0] == "w" and b == ZERO:
                continue
            return False
    return True


def relax(phi, k):
    """Turn finite weights below -k into -inf (single pass, no re-closure).

    The result is deliberately left unclosed: closing could rebuild dropped
    weights from surviving edge chains, which defeats the degree bound.
    Every stored weight stays >= -k, which is what the well-quasi-order on
    constraint representations needs; satisfaction and conjunction are
    unaffected because all graph operations re-close internally, and
    pointwise entailment on any representation stays sound.
    """
    if k < 0:
        raise ValueError("relaxation bound must be nonnegative")
    graphs = {}
    for p in phi.phasers:
        g = phi.graphs[p]
        bad = [key for key, w in g.edges.items() if w != NEG_INF and w < -k]
        if bad:
            edges = {key: w for key, w in g.edges.items() if key not in bad}
            g = GapGraph(g.vars, edges)
        graphs[p] = g
    return Constraint(phi.tasks, phi.phasers, phi.bv, phi.pc, phi.pv, graphs)


# --- structure bijections ----------------------------------------------------

def _task_sig(phi, t):
    regs = sorted(p for p in phi.phasers if phi.is_registered(t, p))
    inf = sorted(p for p in phi.phasers if t in phi.infsig(p))
    return (str(phi.pc[t]), tuple(sorted(phi.pv[t].keys())),
            len(regs), len(inf))


def _grouped(a_items, b_items, sig_a, sig_b):
    """Pair up the two item lists by signature; None when shapes differ."""
    ga, gb = {}, {}
    for x in a_items:
        ga.setdefault(sig_a(x), []).append(x)
    for y in b_items:
        gb.setdefault(sig_b(y), []).append(y)
    if set(ga) != set(gb):
        return None
    groups = []
    for sig in sorted(ga, key=repr):
        if len(ga[sig]) != len(gb[sig]):
            return None
        groups.append((ga[sig], gb[sig]))
    return groups


def _assignments(groups):
    """All bijections assembled from per-group permutations."""
    per_group = []
    for xs, ys in groups:
        per_group.append([list(zip(xs, perm)) for perm in itertools.permutations(ys)])
    for combo in itertools.product(*per_group):
        m = {}
        for pairs in combo:
            m.update(pairs)
        yield m


def structure_bijections(a, b):
    """Yield (tau, pi) bijections matching bv, pc, pv and registration.

    tau maps a's tasks onto b's and pi maps a's phasers onto b's so that
    control sequences agree, phaser-variable bindings commute with pi, and
    registered/inf-signal sets correspond.  Graph weights are not compared.
    """
    if len(a.tasks) != len(b.tasks) or len(a.phasers) != len(b.phasers):
        return
    if a.bv != b.bv:
        return
    groups = _grouped(a.tasks, b.tasks, lambda t: _task_sig(a, t), lambda t: _task_sig(b, t))
    if groups is None:
        return
    for tau in _assignments(groups):
        ok = True
        pi = {}
        for t in a.tasks:
            bt = tau[t]
            if a.pv[t].keys() != b.pv[bt].keys():
                ok = False
                break
            for v, p in a.pv[t].items():
                q = b.pv[bt][v]
                if pi.get(p, q) != q:
                    ok = False
                    break
                pi[p] = q
            if not ok:
                break
        if not ok:
            continue
        if len(set(pi.values())) != len(pi):
            continue
        rest_a = [p for p in a.phasers if p not in pi]
        rest_b = [q for q in b.phasers if q not in set(pi.values())]

        def reg_ok(pi_full):
            for p in a.phasers:
                q = pi_full[p]
                if {tau[t] for t in a.registered(p)} != set(b.registered(q)):
                    return False
                if {tau[t] for t in a.infsig(p)} != set(b.infsig(q)):
                    return False
            return True

        if not rest_a:
            if reg_ok(pi):
                yield (tau, pi)
            continue
        for perm in itertools.permutations(rest_b):
            pi_full = dict(pi)
            pi_full.update(zip(rest_a, perm))
            if reg_ok(pi_full):
                yield (tau, pi_full)


def _rename_graph_to(b, q, tau):
    """Rename b.graphs[q]'s vertices into the tau-preimage task namespace."""
    inv = {bt: t for t, bt in tau.items()}
    ren = {}
    for v in b.graphs[q].vars:
        kind, bt = v
        ren[v] = (kind, inv[bt])
    return substitute(b.graphs[q], ren)


def entails(a, b):
    """a entails-below b: a is weaker, so b's denotation is contained in a's."""
    for tau, pi in structure_bijections(a, b):
        if all(graph_entails(a.graphs[p], _rename_graph_to(b, pi[p], tau))
               for p in a.phasers):
            return True
    return False


def constraints_intersect(a, b):
    """Whether some configuration satisfies both constraints."""
    for tau, pi in structure_bijections(a, b):
        ok = True
        for p in a.phasers:
            g = conjoin(a.graphs[p], _rename_graph_to(b, pi[p], tau))
            if g is UNSAT:
                ok = False
                break
        if ok:
            return True
    return False


# --- denotation membership ---------------------------------------------------

def constraint_of(c):
    """Exact singleton encoding of a configuration's phases."""
    graphs = {}
    for p in c.phasers:
        clauses = []
        for t, (w, s) in sorted(c.phi[p].items()):
            clauses.append(Clause(wvar(t), ZERO, int(w)))
            clauses.append(Clause(ZERO, wvar(t), -int(w)))
            if s != INF:
                clauses.append(Clause(svar(t), ZERO, int(s)))
                clauses.append(Clause(ZERO, svar(t), -int(s)))
        graphs[p] = graph_of(clauses)
    return Constraint(c.tasks, c.phasers, c.bv, c.pc, c.pv, graphs)


def satisfies(c, phi):
    """Denotation membership c |= phi (bijections plus valuation check)."""
    skel = constraint_of(c)
    for tau, pi in structure_bijections(skel, phi):
        ok = True
        for p in c.phasers:
            q = pi[p]
            val = {}
            for t in c.phi[p]:
                w, s = c.phi[p][t]
                val[wvar(tau[t])] = int(w)
                if s != INF:
                    val[svar(tau[t])] = int(s)
            if not satisfies_valuation(phi.graphs[q], val):
                ok = False
                break
        if ok:
            return True
    return False


# --- canonical form -----------------------------------------------------------

def _cmp_key(phi):
    """A totally ordered (primitives-only) rendering of a constraint."""
    return (
        tuple(sorted(phi.bv.items())),
        tuple((t, str(phi.pc[t])) for t in phi.tasks),
        tuple((t, tuple(sorted(phi.pv[t].items()))) for t in phi.tasks),
        tuple((p, tuple(sorted((repr(a), repr(b), w)
                               for (a, b), w in phi.graphs[p].edges.items())))
              for p in phi.phasers),
        tuple((p, tuple(sorted(map(repr, phi.graphs[p].vars)))) for p in phi.phasers),
    )


def canonicalize(phi):
    """Rename tasks and phasers to 0..n-1 picking the least canonical key.

    Tasks and phasers are grouped by structural signature; all within-group
    orderings are tried so isomorphic constraints get equal representations.
    The common case of singleton groups needs no comparisons at all.
    """
    tgroups = {}
    for t in phi.tasks:
        tgroups.setdefault(_task_sig(phi, t), []).append(t)
    pgroups = {}
    for p in phi.phasers:
        sig = (len(phi.registered(p)), len(phi.infsig(p)),
               tuple(sorted((t, v) for t in phi.tasks
                            for v, q in phi.pv[t].items() if q == p)))
        pgroups.setdefault(sig, []).append(p)

    task_orders = [list(itertools.permutations(grp)) for grp in tgroups.values()]
    phaser_orders = [list(itertools.permutations(grp)) for grp in pgroups.values()]

    best = None
    best_key = None
    single = all(len(o) == 1 for o in task_orders + phaser_orders)
    for tperm in itertools.product(*task_orders):
        tlist = [t for grp in tperm for t in grp]
        tmap = {t: i for i, t in enumerate(tlist)}
        for pperm in itertools.product(*phaser_orders):
            plist = [p for grp in pperm for p in grp]
            pmap = {p: i for i, p in enumerate(plist)}
            cand = rename(phi, tmap, pmap)
            if single:
                return cand
            key = _cmp_key(cand)
            if best_key is None or key < best_key:
                best, best_key = cand, key
    return best if best is not None else phi


def rename(phi, tmap, pmap):
    """Apply task and phaser id bijections to a constraint."""
    graphs = {}
    for p in phi.phasers:
        ren = {}
        for v in phi.graphs[p].vars:
            kind, t = v
            ren[v] = (kind, tmap[t])
        graphs[pmap[p]] = substitute(phi.graphs[p], ren)
    return Constraint(
        tasks=[tmap[t] for t in phi.tasks],
        phasers=[pmap[p] for p in phi.phasers],
        bv=phi.bv,
        pc={tmap[t]: phi.pc[t] for t in phi.tasks},
        pv={tmap[t]: {v: pmap[p] for v, p in phi.pv[t].items()} for t in phi.tasks},
        graphs=graphs,
    )


# --- serialization -------------------------------------------------------------

def to_json_dict(phi):
    out = {
        "tasks": list(phi.tasks),
        "phasers": list(phi.phasers),
        "bools": {k: v for k, v in sorted(phi.bv.items())},
        "pcs": {str(t): str(phi.pc[t]) for t in phi.tasks},
        "pvs": {str(t): {v: p for v, p in sorted(phi.pv[t].items())}
                for t in phi.tasks},
        "graphs": [
            {"phaser": p,
             "edges": [[list(a) if isinstance(a, tuple) else a,
                        list(b) if isinstance(b, tuple) else b,
                        w]
                       for (a, b), w in sorted(phi.graphs[p].edges.items(), key=repr)]}
            for p in phi.phasers
        ],
    }
    return out


def dump_json(phi):
    return json.dumps(to_json_dict(phi), sort_keys=True)


def from_json_dict(d, seq_by_str):
    """Rebuild a constraint from its JSON dict; control sequences are looked
    up by their rendering in the given program's control space."""
    graphs = {}
    for entry in d["graphs"]:
        clauses = []
        vars_ = set()
        for a, b, w in entry["edges"]:
            av = tuple(a) if isinstance(a, list) else a
            bv_ = tuple(b) if isinstance(b, list) else b
            clauses.append(Clause(av, bv_, int(w)))
            for v in (av, bv_):
                if v != ZERO:
                    vars_.add(v)
        graphs[int(entry["phaser"])] = graph_of(clauses, extra_vars=vars_)
    tasks = [int(t) for t in d["tasks"]]
    return Constraint(
        tasks=tasks,
        phasers=[int(p) for p in d["phasers"]],
        bv=dict(d["bools"]),
        pc={int(t): seq_by_str[d["pcs"][str(t)]] for t in tasks},
        pv={int(t): {v: int(p) for v, p in d["pvs"][str(t)].items()} for t in tasks},
        graphs=graphs,
    )
