"""Executable operational semantics for phaser programs.

A configuration holds the live task ids, phaser ids, shared booleans, each
task's remaining control sequence and phaser-variable bindings, and one
(wait, signal) phase pair per registered task per phaser.  WAIT-mode
registration initializes the signal phase to +inf, which never increments
and never blocks other waiters.

``step`` enumerates every outcome of firing one task (nondeterministic
conditions branch), ``explore_bounded`` runs a breadth-first search over all
interleavings up to phase/task/phaser bounds, and the blocked/deadlock/race
predicates classify configurations.  Exploration is deterministic: results
of a step are canonically ordered and a schedule of (task, branch index)
pairs replays a run exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .lang import (Asynch, Assert, Assign, ControlSpace, Drop, Exit, If,
                   NewPhaser, Ndet, BoolLit, Var, Or, And, Not, RegMode,
                   Signal, Wait, While, cond_vars, stmt_str)

INF = float("inf")


def eval_cond(cond, bv):
    """Set of possible boolean values of a condition (ndet branches both)."""
    if isinstance(cond, Ndet):
        return {True, False}
    if isinstance(cond, BoolLit):
        return {cond.value}
    if isinstance(cond, Var):
        return {bv[cond.name]}
    if isinstance(cond, Or):
        return {a or b for a in eval_cond(cond.left, bv) for b in eval_cond(cond.right, bv)}
    if isinstance(cond, And):
        return {a and b for a in eval_cond(cond.left, bv) for b in eval_cond(cond.right, bv)}
    if isinstance(cond, Not):
        return {not a for a in eval_cond(cond.arg, bv)}
    raise TypeError(cond)


class Configuration:
    """Immutable machine state; equality and hash ignore the fresh-id counters."""

    __slots__ = ("tasks", "phasers", "bv", "pc", "pv", "phi",
                 "next_task", "next_phaser", "_key", "_hash")

    def __init__(self, tasks, phasers, bv, pc, pv, phi, next_task, next_phaser):
        self.tasks = frozenset(tasks)
        self.phasers = frozenset(phasers)
        self.bv = dict(bv)
        self.pc = dict(pc)
        self.pv = {t: dict(m) for t, m in pv.items()}
        self.phi = {p: dict(m) for p, m in phi.items()}
        self.next_task = next_task
        self.next_phaser = next_phaser
        self._key = (
            self.tasks,
            self.phasers,
            tuple(sorted(self.bv.items())),
            tuple(sorted((t, s) for t, s in self.pc.items())),
            tuple(sorted((t, tuple(sorted(m.items()))) for t, m in self.pv.items())),
            tuple(sorted((p, tuple(sorted(m.items()))) for p, m in self.phi.items())),
        )
        self._hash = hash(self._key)

    def __eq__(self, other):
        return isinstance(other, Configuration) and self._key == other._key

    def __hash__(self):
        return self._hash

    def registered(self, p):
        return sorted(self.phi[p])

    def phases(self, p, t):
        return self.phi[p][t]

    def describe(self):
        lines = []
        for t in sorted(self.tasks):
            lines.append("task %d: %s" % (t, self.pc[t]))
        for p in sorted(self.phasers):
            regs = ", ".join("%d:(%s,%s)" % (t, w, s)
                             for t, (w, s) in sorted(self.phi[p].items()))
            lines.append("phaser %d: {%s}" % (p, regs))
        lines.append("bools: %s" % self.bv)
        return "\n".join(lines)


def initial(prg, space=None):
    """Single main task at its body, no phasers, all booleans false."""
    space = space or ControlSpace(prg)
    return Configuration(
        tasks={0},
        phasers=set(),
        bv={b: False for b in prg.bool_vars},
        pc={0: space.body_seq(prg.entry)},
        pv={0: {}},
        phi={},
        next_task=1,
        next_phaser=0,
    )


@dataclass(frozen=True)
class Ok:
    config: Configuration


@dataclass(frozen=True)
class Blocked:
    phaser: int
    by: int


@dataclass(frozen=True)
class BadAssert:
    task: int


@dataclass(frozen=True)
class BadRuntime:
    task: int
    var: str


def _advance(c, t, seq, **updates):
    fields = dict(tasks=c.tasks, phasers=c.phasers, bv=c.bv, pc=c.pc, pv=c.pv,
                  phi=c.phi, next_task=c.next_task, next_phaser=c.next_phaser)
    fields.update(updates)
    pc = dict(fields["pc"])
    pc[t] = seq
    fields["pc"] = pc
    return Configuration(**fields)


def step(c, t, space):
    """All outcomes of firing task t, canonically ordered.

    Ok results come from the rules newPhaser/signal/wait/drop/asynch/exit
    plus assignment, assertion and branching; a failing wait premise yields
    Blocked, a failing assert BadAssert, and an undefined variable or an
    unregistered access BadRuntime.
    """
    if t not in c.tasks:
        raise ValueError("task %r not live" % t)
    seq = c.pc[t]
    if seq.done:
        return []
    head = seq.head()
    edges = space.edges[seq]

    if isinstance(head, (While, If)):
        out = []
        vals = eval_cond(head.cond, c.bv)
        for kind, _, nxt in edges:
            if (kind == "true" and True in vals) or (kind == "false" and False in vals):
                out.append(Ok(_advance(c, t, nxt)))
        return out

    (_, _, nxt), = edges

    if isinstance(head, Assign):
        return [Ok(_advance(c, t, nxt, bv={**c.bv, head.var: val}))
                for val in sorted(eval_cond(head.cond, c.bv))]

    if isinstance(head, Assert):
        out = []
        vals = eval_cond(head.cond, c.bv)
        if False in vals:
            out.append(BadAssert(t))
        if True in vals:
            out.append(Ok(_advance(c, t, nxt)))
        return out

    if isinstance(head, NewPhaser):
        p = c.next_phaser
        sig = INF if head.mode is RegMode.WAIT else 0
        phi = dict(c.phi)
        phi[p] = {t: (0, sig)}
        pv = dict(c.pv)
        pv[t] = {**c.pv[t], head.var: p}
        return [Ok(_advance(c, t, nxt, phasers=c.phasers | {p}, phi=phi, pv=pv,
                            next_phaser=p + 1))]

    if isinstance(head, (Signal, Wait, Drop)):
        p = c.pv[t].get(head.var)
        if p is None or t not in c.phi[p]:
            return [BadRuntime(t, head.var)]
        w, s = c.phi[p][t]
        if isinstance(head, Signal):
            phi = dict(c.phi)
            phi[p] = {**c.phi[p], t: (w, s + 1)}
            return [Ok(_advance(c, t, nxt, phi=phi))]
        if isinstance(head, Drop):
            phi = dict(c.phi)
            reg = dict(c.phi[p])
            del reg[t]
            phi[p] = reg
            return [Ok(_advance(c, t, nxt, phi=phi))]
        for u in sorted(c.phi[p]):
            if c.phi[p][u][1] <= w:
                return [Blocked(p, u)]
        phi = dict(c.phi)
        phi[p] = {**c.phi[p], t: (w + 1, s)}
        return [Ok(_advance(c, t, nxt, phi=phi))]

    if isinstance(head, Asynch):
        for v in head.args:
            p = c.pv[t].get(v)
            if p is None or t not in c.phi[p]:
                return [BadRuntime(t, v)]
        u = c.next_task
        callee = space.prg.tasks[head.task]
        pv_u = {}
        phi = {p: dict(m) for p, m in c.phi.items()}
        for i, v in enumerate(head.args):
            p = c.pv[t][v]
            pv_u[callee.params[i][0]] = p
            w, s = c.phi[p][t]
            if head.modes[i] is RegMode.WAIT:
                s = INF
            phi[p][u] = (w, s)
        pc = dict(c.pc)
        pc[u] = space.body_seq(head.task)
        pv = dict(c.pv)
        pv[u] = pv_u
        return [Ok(_advance(c, t, nxt, tasks=c.tasks | {u}, pc=pc, pv=pv, phi=phi,
                            next_task=u + 1))]

    if isinstance(head, Exit):
        tasks = c.tasks - {t}
        pc = dict(c.pc)
        del pc[t]
        pv = dict(c.pv)
        del pv[t]
        phi = {}
        for p, reg in c.phi.items():
            reg = dict(reg)
            reg.pop(t, None)
            phi[p] = reg
        return [Ok(Configuration(tasks, c.phasers, c.bv, pc, pv, phi,
                                 c.next_task, c.next_phaser))]

    raise TypeError(head)


def is_blocked(c, t):
    """(phaser, blocking task) when t heads a wait whose premise fails."""
    seq = c.pc[t]
    if seq.done or not isinstance(seq.head(), Wait):
        return None
    p = c.pv[t].get(seq.head().var)
    if p is None or t not in c.phi[p]:
        return None
    w = c.phi[p][t][0]
    for u in sorted(c.phi[p]):
        if c.phi[p][u][1] <= w:
            return (p, u)
    return None


def blockers(c, t):
    """All tasks currently blocking t's wait, or None when t is not blocked."""
    seq = c.pc[t]
    if seq.done or not isinstance(seq.head(), Wait):
        return None
    p = c.pv[t].get(seq.head().var)
    if p is None or t not in c.phi[p]:
        return None
    w = c.phi[p][t][0]
    out = [u for u in sorted(c.phi[p]) if c.phi[p][u][1] <= w]
    return out or None


def is_deadlock(c):
    """A nonempty task set whose members all block each other, else None.

    Greatest fixpoint of "blocked by a member": start from all blocked tasks
    and discard tasks whose blockers all fell out.
    """
    blocked = {}
    for t in c.tasks:
        bs = blockers(c, t)
        if bs:
            blocked[t] = set(bs)
    u = set(blocked)
    changed = True
    while changed:
        changed = False
        for t in list(u):
            if not (blocked[t] & u):
                u.discard(t)
                changed = True
    if not u:
        return None
    # walk the blocked-by relation inside u until a task repeats
    t = min(u)
    seen = []
    while t not in seen:
        seen.append(t)
        t = min(blocked[t] & u)
    return tuple(seen[seen.index(t):])


def detect_race(c):
    """(writer, other, variable) when two live tasks head a write and a
    read-or-write of the same boolean."""
    heads = {}
    for t in c.tasks:
        if not c.pc[t].done:
            heads[t] = c.pc[t].head()
    for t in sorted(heads):
        s = heads[t]
        if not isinstance(s, Assign):
            continue
        for u in sorted(heads):
            if u == t:
                continue
            s2 = heads[u]
            if isinstance(s2, Assign) and s2.var == s.var:
                return (t, u, s.var)
            if isinstance(s2, (Assign, Assert, If, While)) and s.var in cond_vars(s2.cond):
                return (t, u, s.var)
    return None


@dataclass(frozen=True)
class Violation:
    kind: str  # assert | race | runtime | deadlock
    trace: tuple  # of (task, branch index)
    config: Configuration


@dataclass(frozen=True)
class Safe:
    phase_bound: int
    states: int


@dataclass(frozen=True)
class Exhausted:
    states: int


def _max_phase(c):
    worst = 0
    for reg in c.phi.values():
        for w, s in reg.values():
            if w > worst:
                worst = w
            if s != INF and s > worst:
                worst = s
    return worst


def explore_bounded(prg, phase_bound=4, max_steps=100000, task_bound=None,
                    phaser_bound=None, kind=None, space=None):
    """BFS over all interleavings and ndet branches.

    States whose phases, task count or phaser count exceed the bounds are
    still classified but not expanded.  Returns the first Violation of the
    requested kind (any kind when ``kind`` is None), Safe relative to the
    bounds, or Exhausted when max_steps expansions were not enough.
    """
    space = space or ControlSpace(prg)
    c0 = initial(prg, space)
    seen = {c0: ()}
    queue = deque([c0])
    expansions = 0

    def classify(c, trace):
        if kind in (None, "deadlock"):
            cyc = is_deadlock(c)
            if cyc:
                return Violation("deadlock", trace, c)
        if kind in (None, "race"):
            r = detect_race(c)
            if r:
                return Violation("race", trace, c)
        return None

    v = classify(c0, ())
    if v:
        return v
    while queue:
        c = queue.popleft()
        trace = seen[c]
        if _max_phase(c) > phase_bound:
            continue
        if task_bound is not None and len(c.tasks) > task_bound:
            continue
        if phaser_bound is not None and len(c.phasers) > phaser_bound:
            continue
        if expansions >= max_steps:
            return Exhausted(len(seen))
        expansions += 1
        for t in sorted(c.tasks):
            for i, res in enumerate(step(c, t, space)):
                if isinstance(res, BadAssert) and kind in (None, "assert"):
                    return Violation("assert", trace + ((t, i),), c)
                if isinstance(res, BadRuntime) and kind in (None, "runtime"):
                    return Violation("runtime", trace + ((t, i),), c)
                if isinstance(res, Ok) and res.config not in seen:
                    nxt = trace + ((t, i),)
                    seen[res.config] = nxt
                    v = classify(res.config, nxt)
                    if v:
                        return v
                    queue.append(res.config)
    return Safe(phase_bound, len(seen))


def replay(prg, schedule, space=None):
    """Re-run a (task, branch index) schedule; returns the configuration list."""
    space = space or ControlSpace(prg)
    c = initial(prg, space)
    out = [c]
    for t, i in schedule:
        results = step(c, t, space)
        if i >= len(results):
            raise ValueError("schedule branch %d out of range at task %d" % (i, t))
        res = results[i]
        if not isinstance(res, Ok):
            out.append(res)
            return out
        c = res.config
        out.append(c)
    return out


def format_schedule(schedule):
    """Line-oriented replayable schedule: one "taskId branchIndex" per step."""
    return "\n".join("%d %d" % (t, i) for t, i in schedule) + ("\n" if schedule else "")


def parse_schedule(text):
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        t, i = line.split()
        out.append((int(t), int(i)))
    return tuple(out)
