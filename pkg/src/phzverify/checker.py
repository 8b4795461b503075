"""Backward working-list reachability over symbolic constraints.

Seeds the working list with a minimized set of bad constraints and keeps
computing predecessors, skipping constraints subsumed by an already-visited
weaker one and retiring visited constraints that a new one weakens, until
either a constraint covers the initial configuration (a symbolic trace is
returned) or the list empties (the bad set is unreachable).  Size bounds
skip expansion of constraints with too many tasks or phasers; an optional
degree bound relaxes every predecessor to force termination on targets that
are not free.
"""

from __future__ import annotations

import heapq
import os
from collections import deque
from dataclasses import dataclass, field

from .concrete import Ok, initial, step
from .lang import ControlSpace
from .preengine import EnumCapExceeded, PreEngine
from .symconstraint import (Constraint, canonicalize, degree_of, entails,
                            is_free, relax, satisfies)

DEFAULT_POP_CAP = 10 ** 7


@dataclass
class Trace:
    """Forward-ordered symbolic run: constraints[0] covers the initial
    configuration and constraints[-1] is a seed bad constraint; tasks[i] is
    the (symbolic) task fired from constraints[i] and stmts[i] its label."""

    constraints: list
    tasks: list
    stmts: list

    def __len__(self):
        return len(self.tasks)


@dataclass
class Reached:
    trace: Trace
    stats: dict = field(default_factory=dict)


@dataclass
class Unreachable:
    stats: dict = field(default_factory=dict)


@dataclass
class BoundExceeded:
    reason: str
    stats: dict = field(default_factory=dict)


def _vis_key(phi):
    """Renaming-invariant bucket key for subsumption scans."""
    return (
        tuple(sorted(phi.bv.items())),
        tuple(sorted(hash(phi.pc[t]) for t in phi.tasks)),
        len(phi.phasers),
        tuple(sorted(tuple(sorted(phi.pv[t].keys())) for t in phi.tasks)),
    )


def minimize(constraints):
    """Keep only entailment-minimal elements (an antichain with the same
    denotation): anything weaker than a kept element subsumes it away."""
    buckets = {}
    order = []
    for phi in constraints:
        key = _vis_key(phi)
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append(phi)
    out = []
    for key in order:
        kept = []
        for phi in buckets[key]:
            if any(entails(psi, phi) for psi in kept):
                continue
            kept = [psi for psi in kept if not entails(phi, psi)] + [phi]
        out.extend(kept)
    return out


def _is_initial_constraint(phi, prg, space):
    """Cheap exact test for c_init |= phi (one main task, no phasers)."""
    if len(phi.tasks) != 1 or phi.phasers:
        return False
    if any(phi.bv[b] for b in prg.bool_vars):
        return False
    t = phi.tasks[0]
    return phi.pc[t] == space.body_seq(prg.entry) and not phi.pv[t]


def pop_cap_from_env():
    try:
        return int(os.environ.get("PHZ_VERIFY_CAP", ""))
    except ValueError:
        return DEFAULT_POP_CAP


def check(prg, targets, max_tasks, max_phasers, degree_bound=None,
          order="fifo", lazy_exit=False, pop_cap=None, space=None,
          engine=None):
    """Working-list backward reachability check.

    targets: bad constraints (minimized here); max_tasks/max_phasers: size
    bounds (None means unbounded); degree_bound: relax every predecessor to
    this degree; order: "fifo" or "tasks" (fewest tasks first); lazy_exit:
    postpone exit-rule task introductions until the main queue drains.
    """
    space = space or ControlSpace(prg)
    engine = engine or PreEngine(prg, space)
    pop_cap = pop_cap if pop_cap is not None else pop_cap_from_env()

    seeds = minimize([canonicalize(t) for t in targets])
    entries = {}   # id -> (phi, parent id, fired task label, stmt label)
    alive = {}     # canonical constraint -> id
    buckets = {}   # vis key -> set of alive ids
    stats = {"pops": 0, "added": 0, "subsumed": 0, "retired": 0,
             "max_degree": 0, "all_visited_free": True, "seeds": len(seeds)}

    def add(phi, parent, task_label, stmt_label):
        cid = len(entries)
        entries[cid] = (phi, parent, task_label, stmt_label)
        alive[phi] = cid
        buckets.setdefault(_vis_key(phi), set()).add(cid)
        stats["added"] += 1
        d = degree_of(phi)
        if d > stats["max_degree"]:
            stats["max_degree"] = d
        if not is_free(phi):
            stats["all_visited_free"] = False
        return cid

    working = deque()
    heap = []
    deferred = deque()

    def push(cid, phi):
        if order == "tasks":
            heapq.heappush(heap, (len(phi.tasks), cid))
        else:
            working.append(cid)

    def pop():
        if order == "tasks":
            if heap:
                return heapq.heappop(heap)[1]
            return None
        if working:
            return working.popleft()
        return None

    for phi in seeds:
        if phi in alive:
            continue
        cid = add(phi, None, None, None)
        push(cid, phi)
        if lazy_exit:
            deferred.append(("exit", cid))

    def build_trace(cid):
        constraints, tasks, stmts = [], [], []
        cur = cid
        while cur is not None:
            phi, parent, task_label, stmt_label = entries[cur]
            constraints.append(phi)
            if parent is not None:
                tasks.append(task_label)
                stmts.append(stmt_label)
            cur = parent
        return Trace(constraints, tasks, stmts)

    def covered(psi):
        for vid in buckets.get(_vis_key(psi), ()):
            phi, _, _, _ = entries[vid]
            if entails(phi, psi):
                return True
        return False

    def retire_weaker(psi):
        key = _vis_key(psi)
        for vid in list(buckets.get(key, ())):
            phi, _, _, _ = entries[vid]
            if entails(psi, phi):
                buckets[key].discard(vid)
                alive.pop(phi, None)
                stats["retired"] += 1

    def expand(cid, include_pre=True, include_exit=True):
        phi = entries[cid][0]
        try:
            if include_pre:
                new = []
                for t in phi.tasks:
                    for stmt_label, psi in engine.pre_labeled(t, phi):
                        new.append((t, stmt_label, psi))
            else:
                new = []
            if include_exit and (max_tasks is None or len(phi.tasks) < max_tasks):
                new.extend(engine.exit_intros_labeled(phi))
        except EnumCapExceeded as e:
            return str(e)
        for t, stmt_label, psi in new:
            if degree_bound is not None:
                psi = canonicalize(relax(psi, degree_bound))
            if psi in alive:
                continue
            if covered(psi):
                stats["subsumed"] += 1
                continue
            retire_weaker(psi)
            nid = add(psi, cid, t, stmt_label)
            push(nid, psi)
            if lazy_exit:
                deferred.append(("exit", nid))
        return None

    while True:
        cid = pop()
        if cid is None:
            if lazy_exit:
                # main queue drained: expand deferred exit introductions
                # until one of them produces new work
                progressed = False
                while deferred and not progressed:
                    _, did = deferred.popleft()
                    phi = entries[did][0]
                    if alive.get(phi) != did:
                        continue  # retired meanwhile
                    if max_tasks is not None and len(phi.tasks) >= max_tasks:
                        continue
                    stats["pops"] += 1
                    if stats["pops"] > pop_cap:
                        return BoundExceeded("pop cap %d exceeded" % pop_cap, stats)
                    err = expand(did, include_pre=False, include_exit=True)
                    if err:
                        return BoundExceeded(err, stats)
                    progressed = bool(working or heap)
                if progressed:
                    continue
            break
        phi, parent, _, _ = entries[cid]
        if alive.get(phi) != cid:
            continue  # retired
        stats["pops"] += 1
        if stats["pops"] > pop_cap:
            return BoundExceeded("pop cap %d exceeded" % pop_cap, stats)
        if max_tasks is not None and len(phi.tasks) > max_tasks:
            continue
        if max_phasers is not None and len(phi.phasers) > max_phasers:
            continue
        if _is_initial_constraint(phi, prg, space):
            return Reached(build_trace(cid), stats)
        err = expand(cid, include_pre=True, include_exit=not lazy_exit)
        if err:
            return BoundExceeded(err, stats)
    return Unreachable(stats)


def replay_trace(prg, trace, space=None, bad_check=None):
    """Concretize a symbolic trace with a satisfies-guided breadth search.

    Walks forward from the initial configuration, firing any task whose
    successor satisfies the next constraint.  Returns the list of concrete
    configurations on success, None on failure (possible only for traces
    produced under relaxation).
    """
    space = space or ControlSpace(prg)
    c0 = initial(prg, space)
    if not satisfies(c0, trace.constraints[0]):
        return None
    frontier = {c0: [c0]}
    for phi_next in trace.constraints[1:]:
        nxt = {}
        for c, path in frontier.items():
            for t in sorted(c.tasks):
                for res in step(c, t, space):
                    if isinstance(res, Ok) and res.config not in nxt \
                            and satisfies(res.config, phi_next):
                        nxt[res.config] = path + [res.config]
        if not nxt:
            return None
        frontier = nxt
    for c, path in frontier.items():
        if bad_check is None or bad_check(c):
            return path
    return None
