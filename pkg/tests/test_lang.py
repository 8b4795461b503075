import pytest

from phzverify.lang import (Assert, Assign, ControlSpace, If, ParseError,
                            RegMode, Signal, Wait, While, control_sequences,
                            head, parse, parse_file, pretty, tail)

from conftest import corpus_path

MINIMAL = "bool x; main(){ x = true; }"


def test_parse_minimal():
    prg = parse(MINIMAL)
    assert prg.bool_vars == ("x",)
    assert list(prg.tasks) == ["main"]
    assert isinstance(prg.tasks["main"].body[0], Assign)


def test_parse_fig1_full():
    prg = parse_file(corpus_path("fig1_full"))
    assert set(prg.tasks) == {"main", "aProducer", "bProducer", "abConsumer"}
    assert prg.bool_vars == ("a", "b", "done")
    cons = prg.tasks["abConsumer"]
    assert cons.params == (("p", RegMode.WAIT), ("c", RegMode.SIG))


def test_mode_violation_rejected():
    src = """
    main(){ asynch(w, q); q = newPhaser(WAIT); }
    w(p(WAIT)){ p.signal(); }
    """
    with pytest.raises(ParseError) as err:
        parse(src)
    assert "signal" in str(err.value)


def test_wait_on_sig_mode_rejected():
    with pytest.raises(ParseError):
        parse("main(){ q = newPhaser(SIG); q.wait(); }")


def test_arity_mismatch_rejected():
    src = """
    main(){ q = newPhaser(); asynch(w, q, q); }
    w(p){ p.drop(); }
    """
    with pytest.raises(ParseError):
        parse(src)


def test_undeclared_bool_rejected():
    with pytest.raises(ParseError):
        parse("main(){ y = true; }")


def test_asynch_mode_mismatch_rejected():
    src = """
    main(){ q = newPhaser(); asynch(w, q(SIG)); }
    w(p(WAIT)){ p.wait(); }
    """
    with pytest.raises(ParseError):
        parse(src)


def test_parse_error_carries_position():
    try:
        parse("bool x;\nmain(){ x = ; }")
    except ParseError as e:
        assert e.line == 2
    else:
        raise AssertionError("expected ParseError")


def test_default_mode_is_sig_wait():
    prg = parse("main(){ v = newPhaser(); v.signal(); v.wait(); v.drop(); }")
    assert prg.tasks["main"].body[0].mode is RegMode.SIG_WAIT


def test_comments_stripped():
    prg = parse("// header\nbool x; // trailing\nmain(){ x = true; }")
    assert prg.bool_vars == ("x",)


# --- control sequences -------------------------------------------------------

def test_control_sequences_simple_suffixes():
    prg = parse("bool b; main(){ b = true; }")
    seqs = control_sequences(prg)
    strs = {str(s) for s in seqs}
    assert "main:b = true" in strs
    assert "main:<done>" in strs


def test_while_expansion_in_sequence_set():
    prg = parse("bool c; main(){ while(c){ c = false; }; }")
    strs = {str(s) for s in control_sequences(prg)}
    # the loop body followed by the loop itself
    assert any(s.startswith("main:c = false; while(c)") for s in strs)


def test_if_expansion_in_sequence_set():
    prg = parse("bool c, d; main(){ if(c){ c = false; }; d = true; }")
    strs = {str(s) for s in control_sequences(prg)}
    assert "main:c = false; d = true" in strs
    assert "main:d = true" in strs


def test_head_tail():
    prg = parse("bool a, b; main(){ a = true; b = true; }")
    space = ControlSpace(prg)
    seq = space.body_seq("main")
    assert isinstance(head(seq), Assign) and head(seq).var == "a"
    assert str(tail(seq)) == "main:b = true"
    with pytest.raises(ValueError):
        head(tail(tail(seq)))


def test_while_head_is_the_loop_node():
    prg = parse("bool c; main(){ while(c){ c = false; }; c = true; }")
    space = ControlSpace(prg)
    seq = space.body_seq("main")
    assert isinstance(head(seq), While)


def test_head_tail_stay_in_set():
    prg = parse_file(corpus_path("fig1_full"))
    seqs = control_sequences(prg)
    for s in seqs:
        if not s.done:
            assert tail(s) in seqs


def test_sequences_finite_on_corpus():
    for name in ("fig1", "iterative_averaging", "param_loopless"):
        prg = parse_file(corpus_path(name))
        assert len(control_sequences(prg)) < 200


def test_pretty_roundtrip_on_corpus():
    import glob
    import os
    from conftest import CORPUS
    paths = sorted(glob.glob(os.path.join(CORPUS, "*.phz")))
    assert len(paths) >= 20
    for path in paths:
        with open(path) as fh:
            prg = parse(fh.read())
        again = parse(pretty(prg))
        assert again == prg, path
        assert parse(pretty(again)) == again, path
