"""Finite bad-constraint sets for the four checkable properties.

For given task and phaser counts, enumerates symbolic constraints whose
denotations are exactly the assertion-failure, race, runtime-error and
deadlock configurations of those sizes.  Phase graphs take the weakest
invariant-consistent form (``top_of``); deadlock sets additionally pin each
cycle member's wait phase to its blocker's signal phase.

A static per-sequence variable-status analysis (unbound / bound-registered /
bound-unregistered, with the registration mode) prunes bindings and
registrations that no execution can produce.  For programs that never rebind
a phaser variable this loses no reachable configuration, because every
registration then keeps a live variable witness; programs with rebinding
fall back to free enumeration of ghost registrations.
"""

from __future__ import annotations

import itertools

from .concrete import eval_cond
from .gapgraph import Clause, UNSAT, conjoin, graph_of
from .lang import (Asynch, Assert, Assign, ControlSpace, Drop, If, NewPhaser,
                   RegMode, Signal, Wait, While, cond_vars)
from .symconstraint import Constraint, canonicalize, svar, wvar

KINDS = ("assert", "race", "runtime", "deadlock")

UNBOUND = "U"


class TargetOverflow(Exception):
    """Raised when bad-set enumeration exceeds the configured cap."""


def top_of(tasks, infsig=()):
    """Weakest graph registering the given tasks: sig >= wait >= 0 pairwise.

    Tasks in ``infsig`` have +inf signal phases, so only their wait vertex
    exists and no lower bound mentions their signal.
    """
    infsig = set(infsig)
    clauses = []
    for u in tasks:
        clauses.append(Clause(wvar(u), 0, 0))
        for t in tasks:
            if t not in infsig:
                clauses.append(Clause(svar(t), wvar(u), 0))
    return graph_of(clauses)


# --- static variable statuses -------------------------------------------------

def var_statuses(prg, space=None):
    """For every control sequence, the possible statuses of each variable.

    Status is UNBOUND, ("R", mode) for bound-and-registered, or ("B", mode)
    for bound-but-dropped.  Forward fixpoint from each task's body over the
    control edges; signal/wait/drop only continue from registered statuses
    (the other combinations end in a runtime error, not a successor).
    """
    space = space or ControlSpace(prg)
    out = {}
    for name in prg.tasks:
        tdef = prg.tasks[name]
        vars_ = prg.phaser_vars(name)
        init = {}
        for v in vars_:
            init[v] = frozenset({("R", tdef.param_mode(v))}) if v in tdef.param_names \
                else frozenset({UNBOUND})
        body = space.body_seq(name)
        states = {body: init}
        work = [body]
        while work:
            seq = work.pop()
            st = states[seq]
            for kind, payload, nxt in space.edges[seq]:
                new = dict(st)
                if kind == "stmt":
                    s = payload
                    if isinstance(s, NewPhaser):
                        new[s.var] = frozenset({("R", s.mode)})
                    elif isinstance(s, Drop):
                        kept = frozenset(("B", x[1]) for x in st[s.var]
                                         if x != UNBOUND and x[0] == "R")
                        if not kept:
                            continue
                        new[s.var] = kept
                    elif isinstance(s, (Signal, Wait)):
                        kept = frozenset(x for x in st[s.var]
                                         if x != UNBOUND and x[0] == "R")
                        if not kept:
                            continue
                        new[s.var] = kept
                cur = states.get(nxt)
                if cur is None:
                    states[nxt] = new
                    work.append(nxt)
                else:
                    merged = {v: cur[v] | new[v] for v in cur}
                    if merged != cur:
                        states[nxt] = merged
                        work.append(nxt)
        for seq, st in states.items():
            out[seq] = st
        # sequences never reached by the flow (dead code) allow anything
        for seq in space.of_task(name):
            if seq not in out:
                out[seq] = {v: frozenset({UNBOUND,
                                          ("R", RegMode.SIG_WAIT), ("B", RegMode.SIG_WAIT),
                                          ("R", RegMode.SIG), ("B", RegMode.SIG),
                                          ("R", RegMode.WAIT), ("B", RegMode.WAIT)})
                            for v in vars_}
    return out


def can_rebind(prg):
    """Whether any phaser variable can be bound twice in one task instance."""
    for name, tdef in prg.tasks.items():
        sites = {}
        def scan(stmts, in_loop):
            for s in stmts:
                if isinstance(s, NewPhaser):
                    sites.setdefault(s.var, []).append(in_loop)
                elif isinstance(s, While):
                    scan(s.body, True)
                elif isinstance(s, If):
                    scan(s.body, in_loop)
        scan(tdef.body, False)
        for v, occs in sites.items():
            if len(occs) > 1 or any(occs) or v in tdef.param_names:
                return True
    return False


def max_instances(prg):
    """Static bound on coexisting instances per task name (None = unbounded)."""
    INFTY = None

    def mul(a, b):
        if a is INFTY or b is INFTY:
            return INFTY
        return a * b

    def add(a, b):
        if a is INFTY or b is INFTY:
            return INFTY
        return a + b

    sites = {name: [] for name in prg.tasks}  # callee -> [(caller, in_loop)]
    for name, tdef in prg.tasks.items():
        def scan(stmts, in_loop):
            for s in stmts:
                if isinstance(s, Asynch):
                    sites[s.task].append((name, in_loop))
                elif isinstance(s, While):
                    scan(s.body, True)
                elif isinstance(s, If):
                    scan(s.body, in_loop)
        scan(tdef.body, False)

    counts = {name: (1 if name == prg.entry else 0) for name in prg.tasks}
    for _ in range(2 * len(prg.tasks) + 2):
        new = {}
        for name in prg.tasks:
            total = 1 if name == prg.entry else 0
            for caller, in_loop in sites[name]:
                total = add(total, INFTY if in_loop else counts[caller])
            if total is not INFTY and total > 10 ** 6:
                total = INFTY  # saturate cyclic spawn growth
            new[name] = total
        if new == counts:
            return counts
        counts = new
    # still growing: a productive spawn cycle keeps every changed name unbounded
    return {name: (counts[name] if counts[name] == new[name] else INFTY)
            for name in prg.tasks}


def static_bounds(prg):
    """(task bound, phaser bound) over all executions; None = unbounded."""
    inst = max_instances(prg)
    tasks = 0
    for name, k in inst.items():
        if k is None:
            return (None, _phaser_bound(prg, inst))
        tasks += k
    return (tasks, _phaser_bound(prg, inst))


def _phaser_bound(prg, inst):
    total = 0
    for name, tdef in prg.tasks.items():
        sites = [0]
        def scan(stmts, in_loop):
            for s in stmts:
                if isinstance(s, NewPhaser):
                    if in_loop:
                        sites[0] = None
                    elif sites[0] is not None:
                        sites[0] += 1
                elif isinstance(s, While):
                    scan(s.body, True)
                elif isinstance(s, If):
                    scan(s.body, in_loop)
        scan(tdef.body, False)
        if sites[0] == 0:
            continue
        if sites[0] is None or inst[name] is None:
            return None
        total += sites[0] * inst[name]
    return total


# --- enumeration ----------------------------------------------------------------

def _head(seq):
    return None if seq.done else seq.head()


def _bv_maps(prg):
    names = prg.bool_vars
    for bits in itertools.product((False, True), repeat=len(names)):
        yield dict(zip(names, bits))


def _seq_tuples(space, n, inst_bound):
    """Sorted n-tuples of control sequences respecting instance bounds."""
    seqs = sorted(space.seqs, key=str)
    for combo in itertools.combinations_with_replacement(seqs, n):
        counts = {}
        for s in combo:
            counts[s.task] = counts.get(s.task, 0) + 1
        ok = True
        for name, k in counts.items():
            bound = inst_bound.get(name)
            if bound is not None and k > bound:
                ok = False
                break
        if ok:
            yield combo


def _pv_options(statuses, seq, phasers):
    """Per-variable binding options at a sequence.

    Each option is a map var -> (phaser, registered?, mode) or None for
    unbound.  Registration without a variable witness is handled separately
    by free registration sets when rebinding is possible.
    """
    st = statuses[seq]
    per_var = []
    vars_ = sorted(st)
    for v in vars_:
        opts = []
        for status in sorted(st[v], key=repr):
            if status == UNBOUND:
                opts.append((v, None))
            else:
                tag, mode = status
                for p in phasers:
                    opts.append((v, (p, tag == "R", mode)))
        per_var.append(opts)
    for combo in itertools.product(*per_var):
        # registration consistency: all witnesses of one phaser must agree
        byp = {}
        ok = True
        for v, b in combo:
            if b is None:
                continue
            p, reg, mode = b
            if p in byp and byp[p] != (reg, mode):
                ok = False
                break
            byp[p] = (reg, mode)
        if ok:
            yield dict(combo)


def _registration(pvs, tasks, phasers, ghost_tasks):
    """Registration maps (phaser -> {task: infsig?}) derived from bindings.

    Tasks in ghost_tasks may additionally be registered anywhere, in either
    signal flavor (rebinding lost the witness).
    """
    base = {p: {} for p in phasers}
    for t in tasks:
        for v, b in pvs[t].items():
            if b is None:
                continue
            p, reg, mode = b
            if reg:
                base[p][t] = (mode is RegMode.WAIT)
    if not ghost_tasks:
        yield base
        return
    extra = []
    for t in sorted(ghost_tasks):
        for p in phasers:
            if t not in base[p]:
                extra.append((t, p))
    for flags in itertools.product((None, False, True), repeat=len(extra)):
        regs = {p: dict(m) for p, m in base.items()}
        for (t, p), flag in zip(extra, flags):
            if flag is not None:
                regs[p][t] = flag
        yield regs


def _graphs_for(regs, phasers, extra_clauses=()):
    """Weakest graphs for a registration map, plus optional extra clauses.

    Returns None when some graph is unsatisfiable (empty denotation).
    """
    graphs = {}
    by_p = {}
    for c, p in extra_clauses:
        by_p.setdefault(p, []).append(c)
    for p in phasers:
        reg = regs[p]
        tasks = sorted(reg)
        inf = {t for t in tasks if reg[t]}
        g = top_of(tasks, inf)
        if by_p.get(p):
            g = conjoin(g, graph_of(by_p[p]))
            if g is UNSAT:
                return None
        graphs[p] = g
    return graphs


def _race_pair(heads):
    for t, s in heads.items():
        if not isinstance(s, Assign):
            continue
        for u, s2 in heads.items():
            if u == t:
                continue
            if isinstance(s2, Assign) and s2.var == s.var:
                return (t, u, s.var)
            if isinstance(s2, (Assign, Assert, If, While)) and s.var in cond_vars(s2.cond):
                return (t, u, s.var)
    return None


def _runtime_witness(heads, pvs):
    for t, s in heads.items():
        vs = ()
        if isinstance(s, (Drop, Signal, Wait)):
            vs = (s.var,)
        elif isinstance(s, Asynch):
            vs = s.args
        for v in vs:
            b = pvs[t].get(v)
            if b is None or not b[1]:
                return (t, v)
    return None


def _deadlock_cycles(heads, pvs, regs):
    """All wait cycles: ordered distinct tasks, rotation-canonical."""
    waiters = []
    for t, s in sorted(heads.items()):
        if isinstance(s, Wait):
            b = pvs[t].get(s.var)
            if b is not None and b[1]:
                waiters.append((t, b[0]))
    cycles = set()
    for m in range(1, len(waiters) + 1):
        for combo in itertools.permutations(waiters, m):
            tasks = [t for t, _ in combo]
            if len(set(tasks)) != m:
                continue
            if tasks[0] != min(tasks):
                continue  # canonical rotation
            ok = True
            for i in range(m):
                t_i, p_i = combo[i]
                nxt = tasks[(i + 1) % m]
                if nxt not in regs[p_i] or regs[p_i][nxt]:
                    ok = False  # blocker must be registered with finite signal
                    break
            if ok:
                cycles.add(combo)
    return sorted(cycles)


def bad_set(prg, kind, n, p, space=None, statuses=None, cap=200000):
    """All bad constraints of the given kind with exactly n tasks, p phasers."""
    if kind not in KINDS:
        raise ValueError("unknown property kind %r" % kind)
    space = space or ControlSpace(prg)
    statuses = statuses or var_statuses(prg, space)
    inst_bound = max_instances(prg)
    ghost = can_rebind(prg)
    phasers = tuple(range(p))
    out = {}
    produced = 0

    for seqs in _seq_tuples(space, n, inst_bound):
        tasks = tuple(range(n))
        pc = dict(zip(tasks, seqs))
        heads = {t: _head(pc[t]) for t in tasks}

        if kind == "assert" and not any(isinstance(h, Assert) for h in heads.values()):
            continue
        if kind == "race" and _race_pair(heads) is None:
            continue
        if kind == "deadlock" and not any(isinstance(h, Wait) for h in heads.values()):
            continue
        if kind == "runtime" and not any(
                isinstance(h, (Drop, Signal, Wait, Asynch)) for h in heads.values()):
            continue

        pv_opt_lists = [list(_pv_options(statuses, pc[t], phasers)) for t in tasks]
        for pv_combo in itertools.product(*pv_opt_lists):
            pvs = dict(zip(tasks, pv_combo))
            if kind == "runtime" and _runtime_witness(heads, pvs) is None:
                continue
            pv_clean = {t: {v: b[0] for v, b in pvs[t].items() if b is not None}
                        for t in tasks}
            ghost_tasks = tasks if ghost else ()
            for regs in _registration(pvs, tasks, phasers, ghost_tasks):
                graph_variants = []
                if kind == "deadlock":
                    for cyc in _deadlock_cycles(heads, pvs, regs):
                        extra = []
                        m = len(cyc)
                        for i in range(m):
                            t_i, p_i = cyc[i]
                            nxt = cyc[(i + 1) % m][0]
                            # wait of t_i equals the signal of its blocker
                            extra.append((Clause(wvar(t_i), svar(nxt), 0), p_i))
                        graphs = _graphs_for(regs, phasers, extra)
                        if graphs is not None:
                            graph_variants.append(graphs)
                else:
                    graphs = _graphs_for(regs, phasers)
                    if graphs is not None:
                        graph_variants.append(graphs)
                if not graph_variants:
                    continue
                for bv in _bv_maps(prg):
                    if kind == "assert":
                        if not any(isinstance(h, Assert) and False in eval_cond(h.cond, bv)
                                   for h in heads.values()):
                            continue
                    for graphs in graph_variants:
                        phi = canonicalize(
                            Constraint(tasks, phasers, bv, pc, pv_clean, graphs))
                        out[phi] = True
                        produced += 1
                        if produced > cap:
                            raise TargetOverflow(
                                "%s target enumeration over %d" % (kind, cap))
    return list(out)


def bad_sets_up_to(prg, kind, max_tasks, max_phasers, space=None, cap=200000):
    """Union of bad sets over 1..max_tasks tasks and 0..max_phasers phasers,
    trimmed by the program's static bounds."""
    space = space or ControlSpace(prg)
    statuses = var_statuses(prg, space)
    st_tasks, st_phasers = static_bounds(prg)
    n_hi = max_tasks if st_tasks is None else min(max_tasks, st_tasks)
    p_hi = max_phasers if st_phasers is None else min(max_phasers, st_phasers)
    out = []
    for n in range(1, n_hi + 1):
        for p in range(0, p_hi + 1):
            out.extend(bad_set(prg, kind, n, p, space, statuses, cap=cap))
    return out
