import json
import random

import pytest

from phzverify.concrete import Ok, explore_bounded, initial, step
from phzverify.gapgraph import Clause, NEG_INF, ZERO, graph_of
from phzverify.lang import ControlSpace, parse, parse_file
from phzverify.symconstraint import (Constraint, canonicalize, constraint_of,
                                     constraints_intersect, degree_of,
                                     dump_json, entails, from_json_dict,
                                     is_free, relax, satisfies, strengthen,
                                     svar, to_json_dict, wvar)
from phzverify.targets import top_of

from conftest import corpus_path


def explored_configs(prg, space, phase_bound=3, cap=4000):
    """All configurations reached by a bounded breadth-first exploration."""
    c0 = initial(prg, space)
    seen = {c0: None}
    frontier = [c0]
    while frontier and len(seen) < cap:
        nxt = []
        for c in frontier:
            from phzverify.concrete import _max_phase
            if _max_phase(c) > phase_bound:
                continue
            for t in sorted(c.tasks):
                for res in step(c, t, space):
                    if isinstance(res, Ok) and res.config not in seen:
                        seen[res.config] = None
                        nxt.append(res.config)
        frontier = nxt
    return list(seen)


@pytest.fixture(scope="module")
def loopless():
    prg = parse_file(corpus_path("loopless"))
    space = ControlSpace(prg)
    return prg, space, explored_configs(prg, space)


def test_constraint_of_initial(loopless):
    prg, space, _ = loopless
    c0 = initial(prg, space)
    phi = constraint_of(c0)
    assert len(phi.tasks) == 1 and not phi.phasers
    assert not any(phi.bv.values())
    assert satisfies(c0, phi)


def test_constraint_of_pins_phases():
    prg = parse("main(){ v = newPhaser(); v.signal(); v.signal(); }")
    space = ControlSpace(prg)
    c = initial(prg, space)
    for _ in range(3):
        c = step(c, 0, space)[0].config
    phi = constraint_of(c)
    g = phi.graphs[0]
    assert g.weight(svar(0), ZERO) == 2 and g.weight(ZERO, svar(0)) == -2
    assert g.weight(wvar(0), ZERO) == 0 and g.weight(ZERO, wvar(0)) == 0


def test_satisfies_roundtrip_on_explored(loopless):
    prg, space, configs = loopless
    for c in configs[:60]:
        assert satisfies(c, constraint_of(c))


def test_satisfies_absorbs_renaming(loopless):
    prg, space, configs = loopless
    c = next(c for c in configs if len(c.tasks) == 2)
    phi = canonicalize(constraint_of(c))
    assert satisfies(c, phi)


def test_satisfies_rejects_wrong_phase():
    prg = parse("main(){ v = newPhaser(); v.signal(); }")
    space = ControlSpace(prg)
    c0 = initial(prg, space)
    c1 = step(c0, 0, space)[0].config       # after newPhaser, sig = 0
    c2 = step(c1, 0, space)[0].config       # after signal, sig = 1
    phi_sig1 = constraint_of(c2)
    assert not satisfies(c1, phi_sig1)


def test_strengthen_floors_negative_weights():
    g = graph_of([Clause(svar(0), ZERO, -3)], extra_vars=[wvar(0)])
    phi = Constraint([0], [0], {}, {0: None}, {0: {}}, {0: g})
    out = strengthen(phi)
    assert out.graphs[0].weight(svar(0), ZERO) == 0
    assert out.graphs[0].weight(svar(0), wvar(0)) == 0
    assert out.graphs[0].weight(wvar(0), ZERO) == 0


def test_strengthen_idempotent(loopless):
    prg, space, configs = loopless
    for c in configs[:40]:
        phi = strengthen(constraint_of(c))
        assert phi is not None
        assert strengthen(phi) == phi


def test_strengthen_preserves_reachable_members(loopless):
    prg, space, configs = loopless
    for c in configs[:80]:
        phi = top_like_of(c)
        st = strengthen(phi)
        assert st is not None
        assert satisfies(c, st)


def top_like_of(c):
    """The weakest registration-matching constraint of a configuration."""
    graphs = {}
    for p in c.phasers:
        inf = {t for t, (w, s) in c.phi[p].items() if s == float("inf")}
        graphs[p] = top_of(sorted(c.phi[p]), inf)
    return Constraint(c.tasks, c.phasers, c.bv, c.pc, c.pv, graphs)


def test_entails_reflexive(loopless):
    prg, space, configs = loopless
    for c in configs[:30]:
        phi = canonicalize(constraint_of(c))
        assert entails(phi, phi)


def test_entails_pointwise_weakening(loopless):
    prg, space, configs = loopless
    c = next(c for c in configs if c.phasers and any(c.phi[p] for p in c.phasers))
    phi = constraint_of(c)
    weak = top_like_of(c)
    assert entails(weak, phi)
    assert satisfies(c, weak)


def test_entails_denotation_containment(loopless):
    """If a entails-below b then every explored member of b satisfies a."""
    prg, space, configs = loopless
    sample = configs[:40]
    reps = [canonicalize(constraint_of(c)) for c in sample[:12]]
    weaks = [canonicalize(top_like_of(c)) for c in sample[:12]]
    for a in weaks:
        for b in reps:
            if entails(a, b):
                for c in sample:
                    if satisfies(c, b):
                        assert satisfies(c, a)


def test_degree_and_freeness_of_top():
    g = top_of([0, 1])
    phi = Constraint([0, 1], [0], {}, {0: None, 1: None},
                     {0: {}, 1: {}}, {0: g})
    assert degree_of(phi) == 0
    assert is_free(phi)


def test_equal_signals_not_free():
    g = graph_of([Clause(svar(0), svar(1), 0), Clause(svar(1), svar(0), 0)],
                 extra_vars=[wvar(0), wvar(1)])
    phi = Constraint([0, 1], [0], {}, {0: None, 1: None},
                     {0: {}, 1: {}}, {0: g})
    assert not is_free(phi)


def test_deadlock_equality_degree_zero_not_free():
    base = top_of([0, 1])
    from phzverify.gapgraph import conjoin
    g = conjoin(base, graph_of([Clause(wvar(0), svar(1), 0)]))
    phi = Constraint([0, 1], [0], {}, {0: None, 1: None},
                     {0: {}, 1: {}}, {0: g})
    assert degree_of(phi) == 0
    assert not is_free(phi)


def test_relax_fixpoint_on_degree_zero():
    g = top_of([0, 1])
    phi = Constraint([0, 1], [0], {}, {0: None, 1: None}, {0: {}, 1: {}}, {0: g})
    assert relax(phi, 0) == phi


def test_relax_drops_low_weights():
    g = graph_of([Clause(wvar(0), ZERO, 0), Clause(ZERO, wvar(0), -5)])
    phi = Constraint([0], [0], {}, {0: None}, {0: {}}, {0: g})
    out = relax(phi, 2)
    assert out.graphs[0].weight(ZERO, wvar(0)) == NEG_INF
    assert degree_of(out) <= 2
    assert entails(out, phi)


def test_relax_entails_and_degree_on_randoms(loopless):
    prg, space, configs = loopless
    rng = random.Random(7)
    count = 0
    for c in configs:
        if not c.phasers:
            continue
        phi = constraint_of(c)
        k = rng.randint(0, 3)
        out = relax(phi, k)
        assert degree_of(out) <= k
        assert entails(out, phi)
        count += 1
        if count >= 50:
            break
    assert count > 0


def test_canonicalize_collapses_symmetric_tasks():
    src = """
    main(){ v = newPhaser(); asynch(w, v); asynch(w, v); v.drop(); }
    w(q){ q.signal(); q.drop(); }
    """
    prg = parse(src)
    space = ControlSpace(prg)
    c = initial(prg, space)
    for _ in range(3):
        c = step(c, 0, space)[0].config
    phi = constraint_of(c)
    # swap the two symmetric workers: canonical forms must agree
    tmap = {0: 0, 1: 2, 2: 1}
    from phzverify.symconstraint import rename
    swapped = rename(phi, tmap, {0: 0})
    assert canonicalize(phi) == canonicalize(swapped)


def test_intersects_requires_structure_and_sat():
    g = top_of([0])
    phi = Constraint([0], [0], {"x": True}, {0: None}, {0: {}}, {0: g})
    psi = Constraint([0], [0], {"x": False}, {0: None}, {0: {}}, {0: g})
    assert constraints_intersect(phi, phi)
    assert not constraints_intersect(phi, psi)


def test_json_roundtrip(loopless):
    prg, space, configs = loopless
    seq_by_str = {str(s): s for s in space.seqs}
    for c in configs[:25]:
        phi = canonicalize(constraint_of(c))
        doc = json.loads(dump_json(phi))
        again = from_json_dict(doc, seq_by_str)
        assert again == phi
