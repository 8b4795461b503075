import pytest

from phzverify.concrete import (Ok, _max_phase, eval_cond, initial,
                                is_deadlock, detect_race, step)
from phzverify.lang import Assert, ControlSpace, parse, parse_file
from phzverify.symconstraint import degree_of, is_free, satisfies
from phzverify.targets import (TargetOverflow, bad_set, bad_sets_up_to,
                               max_instances, static_bounds, top_of,
                               var_statuses)

from conftest import corpus_path


def test_top_of_empty():
    g = top_of([])
    assert not g.vars


def test_top_of_single_task():
    from phzverify.gapgraph import ZERO
    from phzverify.symconstraint import svar, wvar
    g = top_of([7])
    assert g.weight(svar(7), wvar(7)) == 0
    assert g.weight(wvar(7), ZERO) == 0


def test_top_of_is_free_up_to_four():
    from phzverify.symconstraint import Constraint
    for n in range(1, 5):
        tasks = list(range(n))
        phi = Constraint(tasks, [0], {}, {t: None for t in tasks},
                         {t: {} for t in tasks}, {0: top_of(tasks)})
        assert is_free(phi)


def test_deadlock_without_phasers_is_empty():
    prg = parse_file(corpus_path("fig1"))
    assert bad_set(prg, "deadlock", 1, 0) == []


def test_race_targets_for_two_writers():
    prg = parse_file(corpus_path("race_pair"))
    sets = bad_sets_up_to(prg, "race", 2, 1)
    assert sets
    # some target has both tasks heading the write of x
    from phzverify.lang import Assign
    found = False
    for phi in sets:
        heads = [phi.pc[t].head() for t in phi.tasks if not phi.pc[t].done]
        writers = [h for h in heads if isinstance(h, Assign) and h.var == "x"]
        if len(writers) >= 2:
            found = True
    assert found


def test_assert_targets_pin_failing_valuation():
    prg = parse_file(corpus_path("loopless"))
    for phi in bad_sets_up_to(prg, "assert", 2, 1):
        failing = False
        for t in phi.tasks:
            seq = phi.pc[t]
            if not seq.done and isinstance(seq.head(), Assert):
                if False in eval_cond(seq.head().cond, phi.bv):
                    failing = True
        assert failing


def test_control_and_freeness_shape():
    prg = parse_file(corpus_path("fig1"))
    for kind in ("assert", "race", "runtime"):
        for phi in bad_sets_up_to(prg, kind, 3, 2):
            assert is_free(phi), kind
    for phi in bad_sets_up_to(prg, "deadlock", 3, 2):
        assert degree_of(phi) == 0
        assert not is_free(phi)  # the cycle equality is a non-free edge


def test_every_explored_bad_config_is_covered():
    """Two-sided check against the interpreter: explored bad configurations
    satisfy some target, and explored members of targets are bad."""
    cases = [
        ("loopless_assert_bug", "assert"),
        ("loopless_deadlock_bug", "deadlock"),
        ("drop_then_signal", "runtime"),
        ("race_pair", "race"),
    ]
    for name, kind in cases:
        prg = parse_file(corpus_path(name))
        space = ControlSpace(prg)
        targets = bad_sets_up_to(prg, kind, 3, 2, space)
        c0 = initial(prg, space)
        seen = {c0: None}
        frontier = [c0]
        while frontier:
            nxt = []
            for c in frontier:
                if _max_phase(c) > 3:
                    continue
                for t in sorted(c.tasks):
                    for res in step(c, t, space):
                        if isinstance(res, Ok) and res.config not in seen:
                            seen[res.config] = None
                            nxt.append(res.config)
            frontier = nxt

        def is_bad(c):
            if kind == "deadlock":
                return is_deadlock(c) is not None
            if kind == "race":
                return detect_race(c) is not None
            if kind == "runtime":
                return any(type(r).__name__ == "BadRuntime"
                           for t in sorted(c.tasks) for r in step(c, t, space))
            for t in c.tasks:
                seq = c.pc[t]
                if not seq.done and isinstance(seq.head(), Assert) \
                        and False in eval_cond(seq.head().cond, c.bv):
                    return True
            return False

        for c in seen:
            bad = is_bad(c)
            covered = any(satisfies(c, phi) for phi in targets)
            assert bad == covered, (name, kind, c.describe())


def test_instance_bounds():
    prg = parse_file(corpus_path("fig1_full"))
    inst = max_instances(prg)
    assert inst == {"main": 1, "aProducer": 1, "bProducer": 1, "abConsumer": 1}
    assert static_bounds(prg) == (4, 2)
    param = parse_file(corpus_path("param_loopless"))
    assert max_instances(param)["w"] is None
    assert static_bounds(param) == (None, 1)


def test_statuses_track_registration():
    prg = parse_file(corpus_path("drop_then_signal"))
    space = ControlSpace(prg)
    st = var_statuses(prg, space)
    seq = space.body_seq("main")
    assert st[seq]["v"] == frozenset({"U"})
    after_new = seq.tail()
    (tag, mode), = st[after_new]["v"]
    assert tag == "R"
    after_drop = after_new.tail()
    (tag, mode), = st[after_drop]["v"]
    assert tag == "B"


def test_overflow_cap():
    prg = parse_file(corpus_path("fig1_full"))
    with pytest.raises(TargetOverflow):
        bad_set(prg, "assert", 4, 2, cap=10)
