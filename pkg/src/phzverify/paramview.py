"""Parameterized verification by view abstraction.

For programs spawning arbitrarily many tasks (with a fixed phaser count),
computes a least fixpoint of forward symbolic successors restricted to
"views": constraints projected onto task subsets of size at most k.  Every
successor is relaxed to a bounded degree so the view space is finite.

Phase 1 keeps whole constraints of up to k tasks and drops larger ones,
which is exact up to the relaxation: an intersection with the bad set gives
a real counterexample candidate, confirmed by concrete replay.  Phase 2 also
projects larger constraints to size-k views and closes the fixpoint under
posts of all (k+1)-task concretizations consistent with the views; emptiness
of the bad intersection then proves safety for every task count.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

from .concrete import Ok, eval_cond, initial, is_deadlock, step
from .gapgraph import (Clause, UNSAT, ZERO, conjoin, graph_of, project_away,
                       shift, substitute)
from .lang import (Asynch, Assert, Assign, ControlSpace, Drop, Exit,
                   NewPhaser, RegMode, Signal, Wait, cond_str, stmt_str)
from .preengine import _set_pc, _with
from .symconstraint import (Constraint, canonicalize, constraint_of,
                            constraints_intersect, entails, relax, satisfies,
                            strengthen, svar, wvar)
from .targets import bad_set, static_bounds, var_statuses
from .checker import _vis_key, pop_cap_from_env


def project_view(phi, tasks):
    """Restrict a constraint to a task subset (phasers are kept)."""
    keep = set(tasks)
    graphs = {}
    for p in phi.phasers:
        drop = {v for v in phi.graphs[p].vars if v[1] not in keep}
        graphs[p] = project_away(phi.graphs[p], drop)
    return Constraint(
        tasks=[t for t in phi.tasks if t in keep],
        phasers=phi.phasers,
        bv=phi.bv,
        pc={t: phi.pc[t] for t in phi.tasks if t in keep},
        pv={t: phi.pv[t] for t in phi.tasks if t in keep},
        graphs=graphs,
    )


def abstract_k(constraints, k):
    """Keep small constraints whole and project larger ones to k-task views."""
    if k < 1:
        raise ValueError("view size must be at least 1")
    out = {}
    for phi in constraints:
        if len(phi.tasks) <= k:
            out[canonicalize(phi)] = True
        else:
            for u in itertools.combinations(phi.tasks, k):
                out[canonicalize(project_view(phi, u))] = True
    return list(out)


class PostEngine:
    """Forward symbolic successors (phaser rules plus control statements)."""

    def __init__(self, prg, space=None):
        self.prg = prg
        self.space = space or ControlSpace(prg)

    def post_labeled(self, t, phi):
        out = {}
        for label, cand in self._post_raw(t, phi):
            fixed = strengthen(cand)
            if fixed is not None:
                psi = canonicalize(fixed)
                if psi not in out:
                    out[psi] = label
        return [(label, psi) for psi, label in out.items()]

    def post(self, t, phi):
        return [psi for _, psi in self.post_labeled(t, phi)]

    def _post_raw(self, t, phi):
        seq = phi.pc[t]
        if seq.done:
            return
        head = seq.head()
        for kind, payload, nxt in self.space.edges[seq]:
            if kind == "true":
                if True in eval_cond(payload, phi.bv):
                    yield ("%s [true]" % cond_str(payload), _set_pc(phi, t, nxt))
            elif kind == "false":
                if False in eval_cond(payload, phi.bv):
                    yield ("%s [false]" % cond_str(payload), _set_pc(phi, t, nxt))
            else:
                label = stmt_str(payload)
                for cand in self._post_stmt(t, phi, head, nxt):
                    yield (label, cand)

    def _post_stmt(self, t, phi, s, nxt):
        if isinstance(s, Assign):
            for val in sorted(eval_cond(s.cond, phi.bv)):
                bv2 = dict(phi.bv)
                bv2[s.var] = val
                yield _set_pc(phi, t, nxt, bv=bv2)
        elif isinstance(s, Assert):
            if True in eval_cond(s.cond, phi.bv):
                yield _set_pc(phi, t, nxt)
        elif isinstance(s, NewPhaser):
            p = (max(phi.phasers) + 1) if phi.phasers else 0
            clauses = [Clause(wvar(t), ZERO, 0), Clause(ZERO, wvar(t), 0)]
            if s.mode is not RegMode.WAIT:
                clauses.append(Clause(svar(t), ZERO, 0))
                clauses.append(Clause(ZERO, svar(t), 0))
            graphs = dict(phi.graphs)
            graphs[p] = graph_of(clauses)
            pv = {u: dict(m) for u, m in phi.pv.items()}
            pv[t][s.var] = p
            yield _set_pc(phi, t, nxt, phasers=phi.phasers + (p,), graphs=graphs, pv=pv)
        elif isinstance(s, Signal):
            p = phi.pv[t].get(s.var)
            if p is None or not phi.is_registered(t, p) or t in phi.infsig(p):
                return
            graphs = dict(phi.graphs)
            graphs[p] = shift(graphs[p], svar(t), +1)
            yield _set_pc(phi, t, nxt, graphs=graphs)
        elif isinstance(s, Wait):
            p = phi.pv[t].get(s.var)
            if p is None or not phi.is_registered(t, p):
                return
            inf = phi.infsig(p)
            clauses = [Clause(svar(u), wvar(t), 1)
                       for u in phi.registered(p) if u not in inf]
            g = conjoin(phi.graphs[p], graph_of(clauses))
            if g is UNSAT:
                return
            g = shift(g, wvar(t), +1)
            graphs = dict(phi.graphs)
            graphs[p] = g
            yield _set_pc(phi, t, nxt, graphs=graphs)
        elif isinstance(s, Drop):
            p = phi.pv[t].get(s.var)
            if p is None or not phi.is_registered(t, p):
                return
            g = phi.graphs[p]
            graphs = dict(phi.graphs)
            graphs[p] = project_away(g, {v for v in (wvar(t), svar(t)) if v in g.vars})
            yield _set_pc(phi, t, nxt, graphs=graphs)
        elif isinstance(s, Asynch):
            pmap = [phi.pv[t].get(v) for v in s.args]
            if any(p is None for p in pmap):
                return
            if any(not phi.is_registered(t, p) for p in pmap):
                return
            u = (max(phi.tasks) + 1) if phi.tasks else 0
            callee = self.prg.tasks[s.task]
            mode_by_p = {}
            for i, p in enumerate(pmap):
                mode_by_p[p] = s.modes[i]
            graphs = dict(phi.graphs)
            ok = True
            for p in sorted(set(pmap)):
                u_inf = (mode_by_p[p] is RegMode.WAIT) or (t in phi.infsig(p))
                clauses = [Clause(wvar(t), wvar(u), 0), Clause(wvar(u), wvar(t), 0)]
                if not u_inf:
                    clauses.append(Clause(svar(t), svar(u), 0))
                    clauses.append(Clause(svar(u), svar(t), 0))
                else:
                    clauses.append(Clause(wvar(u), ZERO, 0))
                g = conjoin(graphs[p], graph_of(clauses))
                if g is UNSAT:
                    ok = False
                    break
                graphs[p] = g
            if not ok:
                return
            pc = dict(phi.pc)
            pc[u] = self.space.body_seq(s.task)
            pv = {x: dict(m) for x, m in phi.pv.items()}
            pv[u] = {callee.params[i][0]: pmap[i] for i in range(len(pmap))}
            yield _set_pc(phi, t, nxt, tasks=phi.tasks + (u,), pc=pc, pv=pv,
                          graphs=graphs)
        elif isinstance(s, Exit):
            tasks = tuple(x for x in phi.tasks if x != t)
            pc = {x: phi.pc[x] for x in tasks}
            pv = {x: phi.pv[x] for x in tasks}
            graphs = {}
            for p in phi.phasers:
                g = phi.graphs[p]
                graphs[p] = project_away(g, {v for v in (wvar(t), svar(t))
                                             if v in g.vars})
            yield _with(phi, tasks=tasks, pc=pc, pv=pv, graphs=graphs)
        else:
            raise TypeError(s)


def extend(views, k):
    """Realize (k+1)-task constraints whose every k-view is covered.

    Combines a k-task view with one task column from another view under the
    weakest graphs consistent with both, then filters candidates by coverage
    of all their size-k projections.
    """
    base = [v for v in views if len(v.tasks) == k]
    out = {}
    for phi in base:
        for donor in views:
            if donor.bv != phi.bv or len(donor.phasers) != len(phi.phasers):
                continue
            for u in donor.tasks:
                col = project_view(donor, [u])
                for pperm in itertools.permutations(phi.phasers):
                    pmap = dict(zip(donor.phasers, pperm))
                    fresh = max(phi.tasks) + 1 if phi.tasks else 0
                    graphs = dict(phi.graphs)
                    ok = True
                    for p_d, p in pmap.items():
                        g_col = col.graphs[p_d]
                        ren = {v: (v[0], fresh) for v in g_col.vars}
                        g = conjoin(graphs[p], substitute(g_col, ren))
                        if g is UNSAT:
                            ok = False
                            break
                        graphs[p] = g
                    if not ok:
                        continue
                    pc = dict(phi.pc)
                    pc[fresh] = donor.pc[u]
                    pv = {x: dict(m) for x, m in phi.pv.items()}
                    pv[fresh] = {v: pmap[q] for v, q in donor.pv[u].items()}
                    cand = strengthen(Constraint(phi.tasks + (fresh,), phi.phasers,
                                                 phi.bv, pc, pv, graphs))
                    if cand is None:
                        continue
                    cand = canonicalize(cand)
                    if cand not in out:
                        out[cand] = True
    # keep only candidates all of whose size-k projections are covered
    kept = []
    for cand in out:
        good = True
        for u in itertools.combinations(cand.tasks, k):
            proj = canonicalize(project_view(cand, u))
            if not any(entails(v, proj) for v in views):
                good = False
                break
        if good:
            kept.append(cand)
    return kept


@dataclass
class SafeForAllN:
    stats: dict = field(default_factory=dict)


@dataclass
class PotentialViolation:
    view: object
    bad: object
    phase: int
    stats: dict = field(default_factory=dict)


@dataclass
class TraceViolation:
    kind: str
    constraints: list
    path: list  # concrete configurations witnessing the run
    stats: dict = field(default_factory=dict)


@dataclass
class FixpointDiverged:
    reason: str
    stats: dict = field(default_factory=dict)


class _ViewSet:
    """Entailment antichain of views with parent bookkeeping."""

    def __init__(self):
        self.entries = {}
        self.alive = {}
        self.buckets = {}
        self.queue = deque()

    def covered(self, psi):
        for vid in self.buckets.get(_vis_key(psi), ()):
            if entails(self.entries[vid][0], psi):
                return True
        return False

    def insert(self, psi, parent, task_label, stmt_label):
        if psi in self.alive or self.covered(psi):
            return False
        key = _vis_key(psi)
        for vid in list(self.buckets.get(key, ())):
            if entails(psi, self.entries[vid][0]):
                self.buckets[key].discard(vid)
                self.alive.pop(self.entries[vid][0], None)
        vid = len(self.entries)
        self.entries[vid] = (psi, parent, task_label, stmt_label)
        self.alive[psi] = vid
        self.buckets.setdefault(key, set()).add(vid)
        self.queue.append(vid)
        return True

    def views(self):
        return list(self.alive.keys())

    def chain(self, vid):
        out = []
        while vid is not None:
            phi, parent, task_label, stmt_label = self.entries[vid]
            out.append(phi)
            vid = parent
        return list(reversed(out))


def param_fixpoint(prg, k, degree_bound, phase2, space=None, phaser_cap=None,
                   pop_cap=None):
    """Least fixpoint of abstracted relaxed posts from the initial constraint.

    Returns (_ViewSet, None) on convergence or (partial, FixpointDiverged).
    """
    space = space or ControlSpace(prg)
    engine = PostEngine(prg, space)
    pop_cap = pop_cap if pop_cap is not None else pop_cap_from_env()
    if phaser_cap is None:
        phaser_cap = static_bounds(prg)[1]
        if phaser_cap is None:
            phaser_cap = 4
    vs = _ViewSet()
    init = canonicalize(constraint_of(initial(prg, space)))
    for v in abstract_k([init], k):
        vs.insert(v, None, None, None)
    pops = 0
    done_ext = set()
    while True:
        while vs.queue:
            vid = vs.queue.popleft()
            phi = vs.entries[vid][0]
            if vs.alive.get(phi) != vid:
                continue
            pops += 1
            if pops > pop_cap:
                return vs, FixpointDiverged("view pop cap %d exceeded" % pop_cap,
                                            {"pops": pops})
            for t in phi.tasks:
                for stmt_label, psi in engine.post_labeled(t, phi):
                    if len(psi.phasers) > phaser_cap:
                        continue
                    psi = canonicalize(relax(psi, degree_bound))
                    if phase2:
                        kept = abstract_k([psi], k)
                    else:
                        kept = [psi] if len(psi.tasks) <= k else []
                    for w in kept:
                        vs.insert(w, vid, t, stmt_label)
        if not phase2:
            break
        # close under posts of (k+1)-task concretizations
        progressed = False
        for cand in extend(vs.views(), k):
            if cand in done_ext:
                continue
            done_ext.add(cand)
            pops += 1
            if pops > pop_cap:
                return vs, FixpointDiverged("view pop cap %d exceeded" % pop_cap,
                                            {"pops": pops})
            for t in cand.tasks:
                for stmt_label, psi in engine.post_labeled(t, cand):
                    if len(psi.phasers) > phaser_cap:
                        continue
                    psi = canonicalize(relax(psi, degree_bound))
                    for w in abstract_k([psi], k):
                        if vs.insert(w, None, t, stmt_label):
                            progressed = True
        if not vs.queue and not progressed:
            break
    return vs, None


def _bad_cache(prg, kind, space):
    cache = {}
    statuses = var_statuses(prg, space)

    def get(n, p):
        key = (n, p)
        if key not in cache:
            cache[key] = bad_set(prg, kind, n, p, space, statuses)
        return cache[key]

    return get


def _find_hit(views, get_bad):
    for v in views:
        for bad in get_bad(len(v.tasks), len(v.phasers)):
            if constraints_intersect(v, bad):
                return v, bad
    return None


def param_check(prg, kind, k, degree_bound=1, space=None, replay_task_cap=6,
                pop_cap=None):
    """Two-phase parameterized safety check for assert or deadlock.

    Phase 1 explores constraints of at most k tasks exactly (modulo the
    degree relaxation); a bad intersection there is confirmed by bounded
    concrete replay.  Phase 2 over-approximates arbitrary task counts; an
    empty bad intersection proves the property for every number of tasks.
    """
    if kind not in ("assert", "deadlock"):
        raise ValueError("parameterized checking covers assert and deadlock")
    space = space or ControlSpace(prg)
    get_bad = _bad_cache(prg, kind, space)

    vs, diverged = param_fixpoint(prg, k, degree_bound, phase2=False,
                                  space=space, pop_cap=pop_cap)
    if diverged:
        return FixpointDiverged(diverged.reason, diverged.stats)
    hit = _find_hit(vs.views(), get_bad)
    if hit is not None:
        view, bad = hit
        vid = vs.alive[view]
        chain = vs.chain(vid)
        path = _concrete_replay(prg, space, chain, kind, replay_task_cap)
        stats = {"phase": 1, "views": len(vs.alive)}
        if path is not None:
            return TraceViolation(kind, chain, path, stats)
        return PotentialViolation(view, bad, 1, stats)

    vs2, diverged = param_fixpoint(prg, k, degree_bound, phase2=True,
                                   space=space, pop_cap=pop_cap)
    if diverged:
        return FixpointDiverged(diverged.reason, diverged.stats)
    stats = {"phase": 2, "views": len(vs2.alive)}
    hit = _find_hit(vs2.views(), get_bad)
    if hit is not None:
        return PotentialViolation(hit[0], hit[1], 2, stats)
    for cand in extend(vs2.views(), k):
        for bad in get_bad(len(cand.tasks), len(cand.phasers)):
            if constraints_intersect(cand, bad):
                return PotentialViolation(cand, bad, 2, stats)
    return SafeForAllN(stats)


def _concrete_replay(prg, space, chain, kind, task_cap):
    """Concretize a phase-1 symbolic chain; falls back to None on failure."""
    from .concrete import detect_race

    def is_bad(c):
        if kind == "deadlock":
            return is_deadlock(c) is not None
        if kind == "race":
            return detect_race(c) is not None
        if kind == "assert":
            for t in c.tasks:
                seq = c.pc[t]
                if not seq.done and isinstance(seq.head(), Assert):
                    if False in eval_cond(seq.head().cond, c.bv):
                        return True
            return False
        return False

    c0 = initial(prg, space)
    if not satisfies(c0, chain[0]):
        return None
    frontier = {c0: [c0]}
    for phi in chain[1:]:
        nxt = {}
        for c, path in frontier.items():
            if len(c.tasks) > task_cap:
                continue
            for t in sorted(c.tasks):
                for res in step(c, t, space):
                    if isinstance(res, Ok) and res.config not in nxt \
                            and satisfies(res.config, phi):
                        nxt[res.config] = path + [res.config]
        if not nxt:
            return None
        frontier = nxt
    for c, path in frontier.items():
        if is_bad(c):
            return path
    return None
