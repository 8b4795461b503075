"""Concrete syntax, AST and control-sequence machinery for phaser programs.

Grammar (``.phz`` files, ``//`` comments):

    prg   ::= "bool" b1 "," ... "," bn ";"  task1 ... taskm
    task  ::= name "(" [param ("," param)*] ")" "{" stmts "}"
    param ::= v | v "(" mode ")"
    mode  ::= "SIG_WAIT" | "SIG" | "WAIT"
    stmt  ::= v "=" "newPhaser" "(" [mode] ")"
            | "asynch" "(" task ("," v ["(" mode ")"])* ")"
            | v ".drop()" | v ".signal()" | v ".wait()" | "exit"
            | b "=" cond | "assert" "(" cond ")"
            | "while" "(" cond ")" "{" stmts "}"
            | "if" "(" cond ")" "{" stmts "}"
    cond  ::= "ndet()" | "true" | "false" | b
            | cond "||" cond | cond "&&" cond | "!" cond | "(" cond ")"

Statements are separated/terminated by ";".  A parameter or newPhaser
without a mode annotation defaults to SIG_WAIT.  The mode attached to an
asynch argument, when present, must match the callee's parameter mode.

Statement sequences are kept flattened as tuples, which is the canonical
right-associated form.  A control sequence is such a tuple tagged with the
task it belongs to; the finite set of control sequences of a program is
closed under taking tails and under expanding while/if heads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class RegMode(enum.Enum):
    SIG_WAIT = "SIG_WAIT"
    SIG = "SIG"
    WAIT = "WAIT"

    def allows_wait(self):
        return self is not RegMode.SIG

    def allows_signal(self):
        return self is not RegMode.WAIT


# --- conditions ------------------------------------------------------------

class Cond:
    """Base class for boolean conditions."""

    __slots__ = ()


@dataclass(frozen=True)
class Ndet(Cond):
    pass


@dataclass(frozen=True)
class BoolLit(Cond):
    value: bool


@dataclass(frozen=True)
class Var(Cond):
    name: str


@dataclass(frozen=True)
class Or(Cond):
    left: Cond
    right: Cond


@dataclass(frozen=True)
class And(Cond):
    left: Cond
    right: Cond


@dataclass(frozen=True)
class Not(Cond):
    arg: Cond


def cond_vars(cond):
    """Set of boolean variable names read by a condition."""
    if isinstance(cond, Var):
        return {cond.name}
    if isinstance(cond, (Or, And)):
        return cond_vars(cond.left) | cond_vars(cond.right)
    if isinstance(cond, Not):
        return cond_vars(cond.arg)
    return set()


def cond_str(cond):
    if isinstance(cond, Ndet):
        return "ndet()"
    if isinstance(cond, BoolLit):
        return "true" if cond.value else "false"
    if isinstance(cond, Var):
        return cond.name
    if isinstance(cond, Or):
        return "(%s || %s)" % (cond_str(cond.left), cond_str(cond.right))
    if isinstance(cond, And):
        return "(%s && %s)" % (cond_str(cond.left), cond_str(cond.right))
    if isinstance(cond, Not):
        return "!%s" % cond_str(cond.arg)
    raise TypeError(cond)


# --- statements ------------------------------------------------------------

class Stmt:
    """Base class for statements."""

    __slots__ = ()


@dataclass(frozen=True)
class NewPhaser(Stmt):
    var: str
    mode: RegMode = RegMode.SIG_WAIT


@dataclass(frozen=True)
class Asynch(Stmt):
    task: str
    args: tuple  # phaser variable names at the call site
    modes: tuple  # registration mode per argument (resolved at parse time)


@dataclass(frozen=True)
class Drop(Stmt):
    var: str


@dataclass(frozen=True)
class Signal(Stmt):
    var: str


@dataclass(frozen=True)
class Wait(Stmt):
    var: str


@dataclass(frozen=True)
class Exit(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    cond: Cond


@dataclass(frozen=True)
class Assert(Stmt):
    cond: Cond


@dataclass(frozen=True)
class While(Stmt):
    cond: Cond
    body: tuple


@dataclass(frozen=True)
class If(Stmt):
    cond: Cond
    body: tuple


def stmt_str(stmt):
    if isinstance(stmt, NewPhaser):
        return "%s = newPhaser(%s)" % (stmt.var, stmt.mode.value)
    if isinstance(stmt, Asynch):
        args = ", ".join("%s(%s)" % (v, m.value) for v, m in zip(stmt.args, stmt.modes))
        return "asynch(%s%s)" % (stmt.task, ", " + args if args else "")
    if isinstance(stmt, Drop):
        return "%s.drop()" % stmt.var
    if isinstance(stmt, Signal):
        return "%s.signal()" % stmt.var
    if isinstance(stmt, Wait):
        return "%s.wait()" % stmt.var
    if isinstance(stmt, Exit):
        return "exit"
    if isinstance(stmt, Assign):
        return "%s = %s" % (stmt.var, cond_str(stmt.cond))
    if isinstance(stmt, Assert):
        return "assert(%s)" % cond_str(stmt.cond)
    if isinstance(stmt, While):
        return "while(%s){ %s }" % (cond_str(stmt.cond), "; ".join(stmt_str(s) for s in stmt.body))
    if isinstance(stmt, If):
        return "if(%s){ %s }" % (cond_str(stmt.cond), "; ".join(stmt_str(s) for s in stmt.body))
    raise TypeError(stmt)


# --- program ---------------------------------------------------------------

@dataclass(frozen=True)
class TaskDef:
    name: str
    params: tuple  # of (var name, RegMode)
    body: tuple  # of Stmt

    @property
    def param_names(self):
        return tuple(v for v, _ in self.params)

    def param_mode(self, var):
        for v, m in self.params:
            if v == var:
                return m
        raise KeyError(var)


@dataclass
class Program:
    bool_vars: tuple
    tasks: dict
    task_order: tuple = ()
    entry: str = "main"

    def task(self, name):
        return self.tasks[name]

    def phaser_vars(self, taskname):
        """Phaser variables a task can refer to: parameters plus newPhaser targets."""
        t = self.tasks[taskname]
        out = list(t.param_names)
        def scan(stmts):
            for s in stmts:
                if isinstance(s, NewPhaser) and s.var not in out:
                    out.append(s.var)
                elif isinstance(s, (While, If)):
                    scan(s.body)
        scan(t.body)
        return tuple(out)

    def var_modes(self, taskname, var):
        """Set of registration modes a phaser variable can carry in a task."""
        t = self.tasks[taskname]
        modes = set()
        for v, m in t.params:
            if v == var:
                modes.add(m)
        def scan(stmts):
            for s in stmts:
                if isinstance(s, NewPhaser) and s.var == var:
                    modes.add(s.mode)
                elif isinstance(s, (While, If)):
                    scan(s.body)
        scan(t.body)
        return modes


# --- parsing ---------------------------------------------------------------

class ParseError(Exception):
    def __init__(self, message, line, col):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.line = line
        self.col = col


_KEYWORDS = {"bool", "asynch", "exit", "assert", "while", "if", "true",
             "false", "ndet", "newPhaser", "SIG_WAIT", "SIG", "WAIT"}

_SYMBOLS = ("&&", "||", "(", ")", "{", "}", ";", ",", "=", "!", ".")


@dataclass
class _Token:
    kind: str  # "ident", "kw", "sym"
    text: str
    line: int
    col: int


def _tokenize(text):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(_Token("kw" if word in _KEYWORDS else "ident", word, line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError("unexpected character %r" % c, line, col)
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0
        self.marks = []  # (token, taskname, stmt) for post-pass checks

    def _err(self, msg):
        if self.pos < len(self.toks):
            t = self.toks[self.pos]
            raise ParseError(msg, t.line, t.col)
        last = self.toks[-1] if self.toks else _Token("sym", "", 1, 1)
        raise ParseError(msg + " (at end of input)", last.line, last.col)

    def peek(self, text=None):
        if self.pos >= len(self.toks):
            return None
        t = self.toks[self.pos]
        if text is not None:
            return t.text == text
        return t

    def take(self, text=None, kind=None):
        if self.pos >= len(self.toks):
            self._err("unexpected end of input")
        t = self.toks[self.pos]
        if text is not None and t.text != text:
            self._err("expected %r, found %r" % (text, t.text))
        if kind is not None and t.kind != kind:
            self._err("expected %s, found %r" % (kind, t.text))
        self.pos += 1
        return t

    def at_end(self):
        return self.pos >= len(self.toks)

    # -- grammar productions --

    def program(self):
        bools = []
        if self.peek("bool"):
            self.take("bool")
            bools.append(self.take(kind="ident").text)
            while self.peek(","):
                self.take(",")
                bools.append(self.take(kind="ident").text)
            self.take(";")
        if len(set(bools)) != len(bools):
            self._err("duplicate bool variable")
        tasks = {}
        order = []
        while not self.at_end():
            t = self.task_def(bools)
            if t.name in tasks:
                self._err("duplicate task %r" % t.name)
            tasks[t.name] = t
            order.append(t.name)
        prg = Program(bool_vars=tuple(bools), tasks=tasks, task_order=tuple(order))
        _check_program(prg, self)
        return prg

    def task_def(self, bools):
        name_tok = self.take(kind="ident")
        self.take("(")
        params = []
        if not self.peek(")"):
            while True:
                v = self.take(kind="ident").text
                mode = RegMode.SIG_WAIT
                if self.peek("("):
                    self.take("(")
                    mode = self.mode()
                    self.take(")")
                params.append((v, mode))
                if self.peek(","):
                    self.take(",")
                else:
                    break
        self.take(")")
        if len(set(v for v, _ in params)) != len(params):
            self._err("duplicate parameter in task %r" % name_tok.text)
        for v, _ in params:
            if v in bools:
                self._err("parameter %r shadows a bool variable" % v)
        body = self.block(bools, name_tok.text)
        return TaskDef(name=name_tok.text, params=tuple(params), body=body)

    def mode(self):
        t = self.take()
        try:
            return RegMode(t.text)
        except ValueError:
            raise ParseError("unknown registration mode %r" % t.text, t.line, t.col)

    def block(self, bools, tname):
        self.take("{")
        stmts = []
        while not self.peek("}"):
            stmts.append(self.stmt(bools, tname))
            while self.peek(";"):
                self.take(";")
        self.take("}")
        return tuple(stmts)

    def stmt(self, bools, tname):
        t = self.peek()
        if t is None:
            self._err("unexpected end of input")
        if t.text == "exit":
            self.take()
            return Exit()
        if t.text == "assert":
            self.take()
            self.take("(")
            c = self.cond(bools)
            self.take(")")
            return Assert(c)
        if t.text == "while":
            self.take()
            self.take("(")
            c = self.cond(bools)
            self.take(")")
            return While(c, self.block(bools, tname))
        if t.text == "if":
            self.take()
            self.take("(")
            c = self.cond(bools)
            self.take(")")
            return If(c, self.block(bools, tname))
        if t.text == "asynch":
            self.take()
            self.take("(")
            task = self.take(kind="ident").text
            args = []
            while self.peek(","):
                self.take(",")
                v = self.take(kind="ident").text
                mode = None
                if self.peek("("):
                    self.take("(")
                    mode = self.mode()
                    self.take(")")
                args.append((v, mode))
            self.take(")")
            s = Asynch(task, tuple(v for v, _ in args), tuple(m for _, m in args))
            self.marks.append((t, tname, s))
            return s
        if t.kind == "ident":
            name = self.take().text
            nxt = self.peek()
            if nxt is not None and nxt.text == ".":
                self.take(".")
                op = self.take()
                self.take("(")
                self.take(")")
                if op.text == "drop":
                    return Drop(name)
                if op.text == "signal":
                    s = Signal(name)
                elif op.text == "wait":
                    s = Wait(name)
                else:
                    raise ParseError("unknown phaser operation %r" % op.text, op.line, op.col)
                self.marks.append((t, tname, s))
                return s
            self.take("=")
            if self.peek("newPhaser"):
                self.take("newPhaser")
                self.take("(")
                mode = RegMode.SIG_WAIT
                if not self.peek(")"):
                    mode = self.mode()
                self.take(")")
                if name in bools:
                    self._err("newPhaser target %r is a bool variable" % name)
                return NewPhaser(name, mode)
            if name not in bools:
                self._err("assignment to undeclared bool %r" % name)
            return Assign(name, self.cond(bools))
        self._err("expected a statement, found %r" % t.text)

    def cond(self, bools):
        left = self.cond_and(bools)
        while self.peek("||"):
            self.take("||")
            left = Or(left, self.cond_and(bools))
        return left

    def cond_and(self, bools):
        left = self.cond_atom(bools)
        while self.peek("&&"):
            self.take("&&")
            left = And(left, self.cond_atom(bools))
        return left

    def cond_atom(self, bools):
        t = self.peek()
        if t is None:
            self._err("unexpected end of condition")
        if t.text == "!":
            self.take()
            return Not(self.cond_atom(bools))
        if t.text == "(":
            self.take()
            c = self.cond(bools)
            self.take(")")
            return c
        if t.text == "true":
            self.take()
            return BoolLit(True)
        if t.text == "false":
            self.take()
            return BoolLit(False)
        if t.text == "ndet":
            self.take()
            self.take("(")
            self.take(")")
            return Ndet()
        if t.kind == "ident":
            self.take()
            if t.text not in bools:
                raise ParseError("undeclared bool variable %r" % t.text, t.line, t.col)
            return Var(t.text)
        self._err("expected a condition, found %r" % t.text)


def _check_program(prg, parser):
    """Arity, declaration and static registration-mode checks.

    Runs after all tasks are parsed so asynch can reference later tasks; the
    parser's marks carry token positions for the error messages.
    """
    if prg.entry not in prg.tasks:
        parser._err("missing %r task" % prg.entry)
    if prg.tasks[prg.entry].params:
        parser._err("task %r must take no parameters" % prg.entry)

    def fail(tok, msg):
        raise ParseError(msg, tok.line, tok.col)

    for tok, tname, s in parser.marks:
        declared = set(prg.phaser_vars(tname))
        if isinstance(s, (Signal, Wait)) and s.var not in declared:
            fail(tok, "undeclared phaser variable %r in %r" % (s.var, tname))
        if isinstance(s, Wait):
            if any(not m.allows_wait() for m in prg.var_modes(tname, s.var)):
                fail(tok, "wait on SIG-mode variable %r in %r" % (s.var, tname))
        if isinstance(s, Signal):
            if any(not m.allows_signal() for m in prg.var_modes(tname, s.var)):
                fail(tok, "signal on WAIT-mode variable %r in %r" % (s.var, tname))
        if isinstance(s, Asynch):
            if s.task not in prg.tasks:
                fail(tok, "asynch target %r is not a task" % s.task)
            callee = prg.tasks[s.task]
            if len(s.args) != len(callee.params):
                fail(tok, "asynch(%s) arity mismatch: %d args, %d params"
                     % (s.task, len(s.args), len(callee.params)))
            for i, v in enumerate(s.args):
                if v not in declared:
                    fail(tok, "undeclared phaser variable %r in %r" % (v, tname))
                want = callee.params[i][1]
                given = s.modes[i]
                if given is not None and given != want:
                    fail(tok, "asynch(%s) argument %r mode %s does not match parameter mode %s"
                         % (s.task, v, given.value, want.value))
                for m in prg.var_modes(tname, v):
                    if m != want and m != RegMode.SIG_WAIT:
                        fail(tok, "variable %r registered in mode %s cannot register %s-mode tasks"
                             % (v, m.value, want.value))

    # Drop statements only need the declaration check.
    def walk(stmts):
        for s in stmts:
            yield s
            if isinstance(s, (While, If)):
                yield from walk(s.body)

    for tname, tdef in prg.tasks.items():
        declared = set(prg.phaser_vars(tname))
        for s in walk(tdef.body):
            if isinstance(s, Drop) and s.var not in declared:
                parser._err("undeclared phaser variable %r in %r" % (s.var, tname))


def _resolve_asynch_modes(prg):
    """Fill in omitted asynch argument modes from the callee's parameters."""
    def fix(stmts):
        out = []
        for s in stmts:
            if isinstance(s, Asynch):
                callee = prg.tasks[s.task]
                modes = tuple(callee.params[i][1] for i in range(len(s.args)))
                out.append(Asynch(s.task, s.args, modes))
            elif isinstance(s, While):
                out.append(While(s.cond, fix(s.body)))
            elif isinstance(s, If):
                out.append(If(s.cond, fix(s.body)))
            else:
                out.append(s)
        return tuple(out)

    tasks = {}
    for tname, tdef in prg.tasks.items():
        tasks[tname] = TaskDef(tdef.name, tdef.params, fix(tdef.body))
    return Program(prg.bool_vars, tasks, prg.task_order, prg.entry)


def parse(text):
    """Parse a program source string into a Program, raising ParseError."""
    toks = _tokenize(text)
    prg = _Parser(toks).program()
    return _resolve_asynch_modes(prg)


def parse_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def pretty(prg):
    """Render a Program back to concrete syntax (parse(pretty(p)) == p)."""
    lines = []
    if prg.bool_vars:
        lines.append("bool %s;" % ", ".join(prg.bool_vars))

    def emit(stmts, indent):
        pad = "  " * indent
        for s in stmts:
            if isinstance(s, While):
                lines.append("%swhile(%s){" % (pad, cond_str(s.cond)))
                emit(s.body, indent + 1)
                lines.append("%s};" % pad)
            elif isinstance(s, If):
                lines.append("%sif(%s){" % (pad, cond_str(s.cond)))
                emit(s.body, indent + 1)
                lines.append("%s};" % pad)
            else:
                lines.append("%s%s;" % (pad, stmt_str(s)))

    for name in prg.task_order:
        tdef = prg.tasks[name]
        params = ", ".join("%s(%s)" % (v, m.value) for v, m in tdef.params)
        lines.append("%s(%s)" % (name, params))
        lines.append("{")
        emit(tdef.body, 1)
        lines.append("}")
        lines.append("")
    return "\n".join(lines)


# --- control sequences -----------------------------------------------------

@dataclass(frozen=True)
class ControlSeq:
    """A remaining-statement sequence of a given task; empty means terminated."""

    task: str
    stmts: tuple

    @property
    def done(self):
        return not self.stmts

    def head(self):
        if not self.stmts:
            raise ValueError("head of terminated sequence")
        return self.stmts[0]

    def tail(self):
        if not self.stmts:
            raise ValueError("tail of terminated sequence")
        return ControlSeq(self.task, self.stmts[1:])

    def __str__(self):
        if not self.stmts:
            return "%s:<done>" % self.task
        return "%s:%s" % (self.task, "; ".join(stmt_str(s) for s in self.stmts))


class ControlSpace:
    """The finite control-sequence set of a program with its step edges.

    For each sequence, ``edges`` holds the control successors:
    ("stmt", stmt, next) for an atomic head, and ("true", cond, next) /
    ("false", cond, next) for a while/if head.  ``rev`` indexes the same
    edges by successor, which drives the backward engine.
    """

    def __init__(self, prg):
        self.prg = prg
        self.seqs = set()
        self.edges = {}
        self.rev = {}
        for name, tdef in prg.tasks.items():
            self._add(ControlSeq(name, tdef.body))
            self._add(ControlSeq(name, ()))  # terminated
        for seq in sorted(self.seqs, key=str):
            for edge in self.edges[seq]:
                self.rev.setdefault(edge[-1], []).append((edge[0], edge[1], seq))

    def _add(self, seq):
        if seq in self.seqs:
            return
        self.seqs.add(seq)
        self.edges[seq] = []
        if seq.done:
            return
        head, rest = seq.stmts[0], seq.stmts[1:]
        tail = ControlSeq(seq.task, rest)
        if isinstance(head, While):
            enter = ControlSeq(seq.task, head.body + seq.stmts)
            self.edges[seq].append(("true", head.cond, enter))
            self.edges[seq].append(("false", head.cond, tail))
            self._add(enter)
            self._add(tail)
        elif isinstance(head, If):
            enter = ControlSeq(seq.task, head.body + rest)
            self.edges[seq].append(("true", head.cond, enter))
            self.edges[seq].append(("false", head.cond, tail))
            self._add(enter)
            self._add(tail)
        else:
            self.edges[seq].append(("stmt", head, tail))
            self._add(tail)

    def body_seq(self, taskname):
        return ControlSeq(taskname, self.prg.tasks[taskname].body)

    def predecessors(self, seq):
        """Edges (kind, payload, predecessor-seq) leading into seq."""
        return self.rev.get(seq, [])

    def of_task(self, taskname):
        return [s for s in self.seqs if s.task == taskname]


def control_sequences(prg):
    """The finite set S of control sequences of a program."""
    return frozenset(ControlSpace(prg).seqs)


def head(seq):
    return seq.head()


def tail(seq):
    return seq.tail()
