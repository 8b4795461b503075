"""Differential validation of the symbolic predecessor and successor engines.

For sampled reachable configurations c, compares the denotations of
pre_all(constraint_of(c)) and post(constraint_of(c)) against the concrete
transition relation over the explored state space: a state satisfies some
predecessor constraint exactly when one of its steps lands in the
denotation of constraint_of(c), and dually for successors.
"""

import pytest

from phzverify.concrete import Ok, _max_phase, initial, step
from phzverify.lang import ControlSpace, parse
from phzverify.paramview import PostEngine
from phzverify.preengine import PreEngine
from phzverify.symconstraint import (canonicalize, constraint_of, is_free,
                                     satisfies)

MICRO = {
    "straightline": """
        main(){ v = newPhaser(); v.signal(); v.wait(); v.drop(); }
    """,
    "drop_then_signal": """
        main(){ v = newPhaser(); v.drop(); v.signal(); }
    """,
    "handshake": """
        bool flag;
        main(){
          ph = newPhaser(SIG_WAIT);
          flag = true;
          asynch(worker, ph(SIG_WAIT));
          ph.signal();
          ph.wait();
          assert(flag);
          ph.drop();
        }
        worker(q(SIG_WAIT)){ q.signal(); q.wait(); q.drop(); }
    """,
    "loop_assign": """
        bool x;
        main(){ while(ndet()){ x = true; }; assert(x); }
    """,
    "spawn_chain": """
        main(){ p = newPhaser(); asynch(a, p(SIG_WAIT)); p.wait(); p.drop(); }
        a(q(SIG_WAIT)){ q.signal(); asynch(b, q(SIG_WAIT)); q.drop(); }
        b(r(SIG_WAIT)){ r.signal(); exit; }
    """,
    "two_phasers": """
        bool ok;
        main(){
          a = newPhaser(SIG_WAIT);
          b = newPhaser(SIG_WAIT);
          asynch(w, a(SIG), b(WAIT));
          a.wait();
          ok = true;
          b.signal();
          a.drop(); b.drop();
        }
        w(x(SIG), y(WAIT)){ x.signal(); y.wait(); assert(ok); x.drop(); y.drop(); }
    """,
    "rebind": """
        main(){ v = newPhaser(); v.signal(); v = newPhaser(); v.wait(); }
    """,
}


def explore(prg, space, phase_bound=3, cap=3000):
    """Reachable states and expanded transitions within the phase bound."""
    c0 = initial(prg, space)
    seen = {c0: None}
    trans = []
    frontier = [c0]
    while frontier and len(seen) < cap:
        nxt = []
        for c in frontier:
            if _max_phase(c) > phase_bound:
                continue
            for t in sorted(c.tasks):
                for res in step(c, t, space):
                    if isinstance(res, Ok):
                        trans.append((c, t, res.config))
                        if res.config not in seen:
                            seen[res.config] = None
                            nxt.append(res.config)
        frontier = nxt
    return list(seen), trans


def interior_samples(states, trans, limit):
    """Targets of expanded transitions, spread across the run."""
    targets = []
    seen = set()
    for _, _, c in trans:
        if c not in seen:
            seen.add(c)
            targets.append(c)
    stride = max(1, len(targets) // limit)
    return targets[::stride][:limit]


@pytest.mark.parametrize("name", sorted(MICRO))
def test_pre_matches_concrete_predecessors(name):
    prg = parse(MICRO[name])
    space = ControlSpace(prg)
    engine = PreEngine(prg, space)
    states, trans = explore(prg, space)
    hits = 0
    for c in interior_samples(states, trans, 12):
        phi = constraint_of(c)
        preds = [psi for _, psi in engine.pre_all(phi)]
        for d in states:
            symbolic = any(satisfies(d, psi) for psi in preds)
            concrete = any(
                isinstance(res, Ok) and satisfies(res.config, phi)
                for t in sorted(d.tasks) for res in step(d, t, space))
            assert symbolic == concrete, (name, c.describe(), d.describe())
            hits += symbolic
    assert hits > 0  # the comparison is not vacuous


@pytest.mark.parametrize("name", sorted(MICRO))
def test_post_matches_concrete_successors(name):
    prg = parse(MICRO[name])
    space = ControlSpace(prg)
    engine = PostEngine(prg, space)
    states, trans = explore(prg, space)
    state_class = {c: canonicalize(constraint_of(c))
                   for c in states}
    targets = list({e for _, _, e in trans})
    hits = 0
    for c in interior_samples(states, trans, 12):
        phi = constraint_of(c)
        posts = [psi for t in phi.tasks for psi in engine.post(t, phi)]
        members = [d for d in states if satisfies(d, phi)]
        succ_classes = {state_class[e] for d, _, e in trans
                        if d in members and e in state_class}
        for e in targets:
            symbolic = any(satisfies(e, psi) for psi in posts)
            concrete = state_class[e] in succ_classes
            assert symbolic == concrete, (name, c.describe(), e.describe())
            hits += symbolic
    assert hits > 0  # the comparison is not vacuous


@pytest.mark.parametrize("name", sorted(MICRO))
def test_pre_preserves_freeness(name):
    prg = parse(MICRO[name])
    space = ControlSpace(prg)
    engine = PreEngine(prg, space)
    states, trans = explore(prg, space)
    from phzverify.targets import bad_sets_up_to
    for kind in ("assert", "race", "runtime"):
        for phi in bad_sets_up_to(prg, kind, 3, 2, space)[:20]:
            assert is_free(phi)
            for _, psi in engine.pre_all(phi)[:50]:
                assert is_free(psi), (name, kind)


def test_pre_empty_when_no_rule_applies():
    prg = parse(MICRO["straightline"])
    space = ControlSpace(prg)
    engine = PreEngine(prg, space)
    c0 = initial(prg, space)
    phi = constraint_of(c0)
    # nothing precedes the initial control location of a one-task program
    assert engine.pre_all(phi) == []


def test_signal_pre_shifts_down():
    prg = parse("main(){ v = newPhaser(); v.signal(); v.wait(); }")
    space = ControlSpace(prg)
    engine = PreEngine(prg, space)
    c = initial(prg, space)
    c = step(c, 0, space)[0].config
    c = step(c, 0, space)[0].config  # after the signal: sig = 1
    phi = constraint_of(c)
    preds = engine.pre(0, phi)
    assert len(preds) == 1
    from phzverify.gapgraph import ZERO
    from phzverify.symconstraint import svar
    g = preds[0].graphs[0]
    assert g.weight(svar(0), ZERO) == 0 and g.weight(ZERO, svar(0)) == 0
