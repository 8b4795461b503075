"""Exact symbolic predecessor computation.

For a constraint phi and a task t, ``pre(t, phi)`` yields constraints whose
denotations are exactly the configurations that can step, by firing t, into
the denotation of phi.  Control predecessors come from the reverse edges of
the control-sequence graph; each statement kind contributes its own graph
surgery:

* newPhaser: the phaser disappears; it must be registered by the creator
  alone, satisfiable at the creation phases, and referenced by no other
  variable.  The creating variable either becomes unbound (rule I) or is
  restored to a previously held phaser (rule II).
* signal: conjoin sig_t > wait_u >= 0 for all registered u (the state right
  after a signal), then shift sig_t down by one.
* wait: conjoin sig_u >= wait_t > 0 (skipping +inf signals), then shift
  wait_t down by one.
* drop: t must be unregistered; it is re-registered with the weakest
  invariant-consistent edges in the variable's static mode.
* asynch: the spawned task is removed after equating its phases with the
  spawner's on every passed phaser and projecting them away.
* exit (task introduction): a fresh task appears at an exit-headed sequence
  with any status-consistent bindings and registrations.

Every output is closed, strengthened, satisfiable and canonically renamed.
"""

from __future__ import annotations

import itertools

from .concrete import eval_cond
from .gapgraph import (Clause, UNSAT, ZERO, conjoin, graph_of, project_away,
                       satisfies_valuation, shift)
from .lang import (Asynch, Assert, Assign, ControlSpace, Drop, Exit,
                   NewPhaser, RegMode, Signal, Wait, cond_str, stmt_str)
from .symconstraint import Constraint, canonicalize, strengthen, svar, wvar
from .targets import _pv_options, can_rebind, var_statuses


class EnumCapExceeded(Exception):
    """Predecessor enumeration exceeded the configured cap."""


def _with(phi, **kw):
    fields = dict(tasks=phi.tasks, phasers=phi.phasers, bv=phi.bv, pc=phi.pc,
                  pv=phi.pv, graphs=phi.graphs)
    fields.update(kw)
    return Constraint(**fields)


def _set_pc(phi, t, seq, **kw):
    pc = dict(kw.pop("pc", phi.pc))
    pc[t] = seq
    return _with(phi, pc=pc, **kw)


class PreEngine:
    def __init__(self, prg, space=None, enum_cap=50000):
        self.prg = prg
        self.space = space or ControlSpace(prg)
        self.statuses = var_statuses(prg, self.space)
        self.ghost = can_rebind(prg)
        self.enum_cap = enum_cap
        self._exit_seqs = [s for s in self.space.seqs
                           if not s.done and isinstance(s.head(), Exit)]

    # -- public interface --

    def pre_labeled(self, t, phi):
        """Exact predecessors of phi under a step of t, with statement labels."""
        out = {}
        for label, cand in self._pre_raw(t, phi):
            fixed = strengthen(cand)
            if fixed is not None:
                psi = canonicalize(fixed)
                if psi not in out:
                    out[psi] = label
        return [(label, psi) for psi, label in out.items()]

    def pre(self, t, phi):
        """Exact predecessors of phi under a step of live task t."""
        return [psi for _, psi in self.pre_labeled(t, phi)]

    def exit_intros_labeled(self, phi):
        """Predecessors with one additional task about to exit."""
        fresh = (max(phi.tasks) + 1) if phi.tasks else 0
        seen = {}
        out = []
        for cand in self._exit_intros(phi, fresh):
            fixed = strengthen(cand)
            if fixed is None:
                continue
            psi = canonicalize(fixed)
            if psi not in seen:
                seen[psi] = True
                out.append((fresh, "exit", psi))
        return out

    def pre_all(self, phi, max_tasks=None):
        """Tagged predecessors over all live tasks plus exit introductions."""
        out = []
        for t in phi.tasks:
            for _, psi in self.pre_labeled(t, phi):
                out.append((t, psi))
                if len(out) > self.enum_cap:
                    raise EnumCapExceeded("pre fan-out over %d" % self.enum_cap)
        if max_tasks is None or len(phi.tasks) < max_tasks:
            for fresh, _, psi in self.exit_intros_labeled(phi):
                out.append((fresh, psi))
                if len(out) > self.enum_cap:
                    raise EnumCapExceeded("pre fan-out over %d" % self.enum_cap)
        return out

    # -- per-statement backward transformers --

    def _pre_raw(self, t, phi):
        seq = phi.pc[t]
        for kind, payload, prev in self.space.predecessors(seq):
            if kind == "true":
                if True in eval_cond(payload, phi.bv):
                    yield ("%s [true]" % cond_str(payload), _set_pc(phi, t, prev))
            elif kind == "false":
                if False in eval_cond(payload, phi.bv):
                    yield ("%s [false]" % cond_str(payload), _set_pc(phi, t, prev))
            else:
                label = stmt_str(payload)
                for cand in self._pre_stmt(t, phi, payload, prev):
                    yield (label, cand)

    def _pre_stmt(self, t, phi, s, prev):
        if isinstance(s, Assign):
            for val in (False, True):
                bv2 = dict(phi.bv)
                bv2[s.var] = val
                if phi.bv[s.var] in eval_cond(s.cond, bv2):
                    yield _set_pc(phi, t, prev, bv=bv2)
        elif isinstance(s, Assert):
            if True in eval_cond(s.cond, phi.bv):
                yield _set_pc(phi, t, prev)
        elif isinstance(s, NewPhaser):
            yield from self._pre_newphaser(t, phi, s, prev)
        elif isinstance(s, Signal):
            yield from self._pre_signal(t, phi, s, prev)
        elif isinstance(s, Wait):
            yield from self._pre_wait(t, phi, s, prev)
        elif isinstance(s, Drop):
            yield from self._pre_drop(t, phi, s, prev)
        elif isinstance(s, Asynch):
            yield from self._pre_asynch(t, phi, s, prev)
        elif isinstance(s, Exit):
            return  # exit removes the task; handled by _exit_intros
        else:
            raise TypeError(s)

    def _pre_newphaser(self, t, phi, s, prev):
        p = phi.pv[t].get(s.var)
        if p is None:
            return
        # a freshly created phaser is referenced by its creator's variable only
        for u in phi.tasks:
            for w, q in phi.pv[u].items():
                if q == p and (u, w) != (t, s.var):
                    return
        if phi.registered(p) != [t]:
            return
        inf = t in phi.infsig(p)
        if inf != (s.mode is RegMode.WAIT):
            return
        val = {wvar(t): 0}
        if not inf:
            val[svar(t)] = 0
        g = phi.graphs[p]
        if g.vars != set(val):
            return
        if not satisfies_valuation(g, val):
            return
        graphs = dict(phi.graphs)
        del graphs[p]
        phasers = tuple(q for q in phi.phasers if q != p)
        pv = {u: dict(m) for u, m in phi.pv.items()}
        del pv[t][s.var]
        yield _set_pc(phi, t, prev, phasers=phasers, graphs=graphs, pv=pv)
        for q in phasers:  # rule II: the variable previously held q
            pv2 = {u: dict(m) for u, m in pv.items()}
            pv2[t][s.var] = q
            yield _set_pc(phi, t, prev, phasers=phasers, graphs=graphs, pv=pv2)

    def _pre_signal(self, t, phi, s, prev):
        p = phi.pv[t].get(s.var)
        if p is None or not phi.is_registered(t, p) or t in phi.infsig(p):
            return
        clauses = []
        for u in phi.registered(p):
            clauses.append(Clause(svar(t), wvar(u), 1))
            clauses.append(Clause(wvar(u), ZERO, 0))
        g = conjoin(phi.graphs[p], graph_of(clauses))
        if g is UNSAT:
            return
        g = shift(g, svar(t), -1)
        if g is UNSAT:
            return
        graphs = dict(phi.graphs)
        graphs[p] = g
        yield _set_pc(phi, t, prev, graphs=graphs)

    def _pre_wait(self, t, phi, s, prev):
        p = phi.pv[t].get(s.var)
        if p is None or not phi.is_registered(t, p):
            return
        inf = phi.infsig(p)
        clauses = [Clause(wvar(t), ZERO, 1)]
        for u in phi.registered(p):
            if u not in inf:
                clauses.append(Clause(svar(u), wvar(t), 0))
        g = conjoin(phi.graphs[p], graph_of(clauses))
        if g is UNSAT:
            return
        g = shift(g, wvar(t), -1)
        if g is UNSAT:
            return
        graphs = dict(phi.graphs)
        graphs[p] = g
        yield _set_pc(phi, t, prev, graphs=graphs)

    def _pre_drop(self, t, phi, s, prev):
        p = phi.pv[t].get(s.var)
        if p is None or phi.is_registered(t, p):
            return
        for mode in sorted(self.prg.var_modes(phi.pc[t].task, s.var),
                           key=lambda m: m.value):
            clauses = [Clause(wvar(t), ZERO, 0)]
            if mode is not RegMode.WAIT:
                clauses.append(Clause(svar(t), wvar(t), 0))
            g = conjoin(phi.graphs[p], graph_of(clauses))
            if g is UNSAT:
                continue
            graphs = dict(phi.graphs)
            graphs[p] = g
            yield _set_pc(phi, t, prev, graphs=graphs)

    def _pre_asynch(self, t, phi, s, prev):
        callee = self.prg.tasks[s.task]
        body = self.space.body_seq(s.task)
        pmap = [phi.pv[t].get(v) for v in s.args]
        if any(p is None for p in pmap):
            return
        expect_pv = {callee.params[i][0]: pmap[i] for i in range(len(pmap))}
        mode_by_p = {}
        for i, p in enumerate(pmap):
            mode_by_p[p] = s.modes[i]  # duplicate registration: last one wins
        passed = set(pmap)
        for u in phi.tasks:
            if u == t or phi.pc[u] != body or phi.pv[u] != expect_pv:
                continue
            if any(phi.is_registered(u, r) != (r in passed) for r in phi.phasers):
                continue
            ok = True
            graphs = dict(phi.graphs)
            for p in sorted(passed):
                if not phi.is_registered(t, p):
                    ok = False
                    break
                u_inf = u in phi.infsig(p)
                want_inf = (mode_by_p[p] is RegMode.WAIT) or (t in phi.infsig(p))
                if u_inf != want_inf:
                    ok = False
                    break
                clauses = [Clause(wvar(t), wvar(u), 0), Clause(wvar(u), wvar(t), 0)]
                if not u_inf:
                    clauses.append(Clause(svar(t), svar(u), 0))
                    clauses.append(Clause(svar(u), svar(t), 0))
                g = conjoin(graphs[p], graph_of(clauses))
                if g is UNSAT:
                    ok = False
                    break
                drop_vs = {v for v in (wvar(u), svar(u)) if v in g.vars}
                graphs[p] = project_away(g, drop_vs)
            if not ok:
                continue
            tasks = tuple(x for x in phi.tasks if x != u)
            pc = dict(phi.pc)
            del pc[u]
            pv = {x: m for x, m in phi.pv.items() if x != u}
            yield _set_pc(phi, t, prev, tasks=tasks, pc=pc, pv=pv, graphs=graphs)

    # -- exit-rule task introduction --

    def _exit_intros(self, phi, fresh):
        """Predecessors that had one more task, about to exit.

        The new task sits at an exit-headed sequence with any bindings and
        registrations consistent with the static variable statuses there;
        it re-registers with the weakest invariant edges.
        """
        for seq in self._exit_seqs:
            for pv_opt in _pv_options(self.statuses, seq, phi.phasers):
                reg_choices = self._intro_regs(pv_opt, phi.phasers)
                for regs in reg_choices:
                    graphs = dict(phi.graphs)
                    ok = True
                    for p, is_inf in regs.items():
                        clauses = [Clause(wvar(fresh), ZERO, 0)]
                        if not is_inf:
                            clauses.append(Clause(svar(fresh), wvar(fresh), 0))
                        g = conjoin(graphs[p], graph_of(clauses))
                        if g is UNSAT:
                            ok = False
                            break
                        graphs[p] = g
                    if not ok:
                        continue
                    pv_clean = {v: b[0] for v, b in pv_opt.items() if b is not None}
                    tasks = phi.tasks + (fresh,)
                    pc = dict(phi.pc)
                    pc[fresh] = seq
                    pv = {x: m for x, m in phi.pv.items()}
                    pv[fresh] = pv_clean
                    yield _with(phi, tasks=tasks, pc=pc, pv=pv, graphs=graphs)

    def _intro_regs(self, pv_opt, phasers):
        """Registration maps {phaser: infsig?} consistent with the bindings."""
        base = {}
        for v, b in pv_opt.items():
            if b is None:
                continue
            p, reg, mode = b
            if reg:
                base[p] = (mode is RegMode.WAIT)
        if not self.ghost:
            return [base]
        out = []
        rest = [p for p in phasers if p not in base]
        for flags in itertools.product((None, False, True), repeat=len(rest)):
            regs = dict(base)
            for p, flag in zip(rest, flags):
                if flag is not None:
                    regs[p] = flag
            out.append(regs)
        return out
