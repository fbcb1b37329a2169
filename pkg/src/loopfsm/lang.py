"""Frontend for the parser-state language (.psl) and its concrete semantics.

A program is a set of integer constants, extern predicate declarations, a
straight-line ``init`` section, and exactly one top-level parsing loop::

    const DONE = 1;
    extern pred iskey/1;
    init { state = 0; tok = empty; }
    loop {
      if (state == DONE) { exit; }
      b = read();
      if (b == ':') { k = iskey(tok); if (k) { state = DONE; } else { fail; } }
      else { if (b == '^') { tok = empty; } else { tok = tok . b; } }
    }

``do { ... } while(1);`` is accepted as a synonym for a program that is
just a loop.  ``switch`` is surface sugar for an if/else chain.  Branches
get globally unique labels in source order, so parsing is deterministic.

Semantics: integers are unsigned 32-bit with wraparound; ``read()`` takes
the next message byte and rejects on exhaustion; ``exit`` accepts iff the
whole message has been consumed; ``fail`` rejects immediately.  A loop
that runs more than ``guard * (len + 2)`` iterations rejects with a
nontermination flag.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    BudgetExceeded,
    DuplicateConstError,
    MissingPredicateImpl,
    NestedLoopError,
    ParseError,
    SortError,
    UndefinedVariableError,
)

GUARD_FACTOR = 4
MASK = (1 << 32) - 1


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Lit(Expr):
    value: int


@dataclass(frozen=True)
class EmptyLit(Expr):
    pass


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Expr


@dataclass(frozen=True)
class ReadStmt(Stmt):
    var: str


@dataclass(frozen=True)
class PredCall(Stmt):
    var: str
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Exit(Stmt):
    pass


@dataclass(frozen=True)
class Fail(Stmt):
    pass


@dataclass(frozen=True)
class If(Stmt):
    kappa: int
    cond: Expr
    then: tuple[Stmt, ...]
    els: tuple[Stmt, ...]


@dataclass(frozen=True)
class Program:
    consts: dict[str, int]
    extern_preds: dict[str, int]  # name -> arity
    init_stmts: tuple[Stmt, ...]
    loop_body: tuple[Stmt, ...]
    kappa_count: int
    stream_vars: frozenset[str] = frozenset()

    def syntactic_paths(self) -> int:
        """Number of root-to-leaf decision vectors in the loop body."""

        def paths(stmts: list[Stmt]) -> int:
            if not stmts:
                return 1
            head, rest = stmts[0], stmts[1:]
            if isinstance(head, (Exit, Fail)):
                return 1
            if isinstance(head, If):
                return paths(list(head.then) + rest) + paths(list(head.els) + rest)
            return paths(rest)

        return paths(list(self.loop_body))


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_KEYWORDS = {
    "const", "extern", "pred", "init", "loop", "do", "while", "if", "else",
    "switch", "case", "default", "break", "exit", "fail", "read", "empty",
}

_TWO = {"==", "!=", "<=", ">=", "&&", "||", "<<", ">>"}
_ONE = set("+-*%<>=(){};,./:")


@dataclass
class _Tok:
    kind: str  # name|int|op|eof
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i) or c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if src.startswith("/*", i):
            j = src.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated comment", line, col)
            seg = src[i:j + 2]
            line += seg.count("\n")
            i = j + 2
            continue
        if c == "'":
            j = i + 1
            if j < n and src[j] == "\\":
                esc = {"n": 10, "t": 9, "r": 13, "0": 0, "\\": 92, "'": 39}
                if j + 1 >= n or src[j + 1] not in esc:
                    raise ParseError("bad escape", line, col)
                val, j = esc[src[j + 1]], j + 2
            elif j < n:
                val, j = ord(src[j]), j + 1
            else:
                raise ParseError("unterminated char literal", line, col)
            if j >= n or src[j] != "'":
                raise ParseError("unterminated char literal", line, col)
            toks.append(_Tok("int", str(val), line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c == "0" and src.startswith("0x", i)):
            j = i
            if src.startswith("0x", i):
                j = i + 2
                while j < n and src[j] in "0123456789abcdefABCDEF":
                    j += 1
                toks.append(_Tok("int", str(int(src[i:j], 16)), line, col))
            else:
                while j < n and src[j].isdigit():
                    j += 1
                toks.append(_Tok("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if src[i:i + 2] in _TWO:
            toks.append(_Tok("op", src[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if c in _ONE:
            toks.append(_Tok("op", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0
        self.kappa = itertools.count(0)
        self.consts: dict[str, int] = {}
        self.preds: dict[str, int] = {}

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def err(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            self.err(f"expected {text!r}, found {t.text!r}", t)
        return t

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    # -- grammar -----------------------------------------------------------

    def program(self) -> Program:
        init: tuple[Stmt, ...] = ()
        body: Optional[tuple[Stmt, ...]] = None
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "const":
                self.next()
                name = self.next()
                if name.kind != "name" or name.text in _KEYWORDS:
                    self.err("expected constant name", name)
                if name.text in self.consts:
                    raise DuplicateConstError(f"duplicate const {name.text}", name.line, name.col)
                self.expect("=")
                v = self.next()
                if v.kind != "int":
                    self.err("expected integer", v)
                self.consts[name.text] = int(v.text) & MASK
                self.expect(";")
            elif t.text == "extern":
                self.next()
                self.expect("pred")
                name = self.next()
                self.expect("/")
                ar = self.next()
                if ar.kind != "int":
                    self.err("expected arity", ar)
                if name.text in self.preds:
                    raise DuplicateConstError(f"duplicate pred {name.text}", name.line, name.col)
                self.preds[name.text] = int(ar.text)
                self.expect(";")
            elif t.text == "init":
                self.next()
                init = tuple(self.block(in_loop=False))
            elif t.text in ("loop", "do"):
                if body is not None:
                    self.err("more than one top-level loop", t)
                if t.text == "loop":
                    self.next()
                    body = tuple(self.block(in_loop=True))
                else:
                    self.next()
                    body = tuple(self.block(in_loop=True))
                    self.expect("while")
                    self.expect("(")
                    one = self.next()
                    if one.text != "1":
                        self.err("loop condition must be 1", one)
                    self.expect(")")
                    self.expect(";")
            else:
                self.err(f"unexpected {t.text!r}")
        if body is None:
            self.err("program has no parsing loop")
        return _validate(Program(
            consts=self.consts,
            extern_preds=self.preds,
            init_stmts=init,
            loop_body=body,
            kappa_count=next(self.kappa),
        ))

    def block(self, in_loop: bool) -> list[Stmt]:
        self.expect("{")
        out: list[Stmt] = []
        while not self.accept("}"):
            out.extend(self.stmt(in_loop))
        return out

    def stmt(self, in_loop: bool) -> list[Stmt]:
        t = self.peek()
        if t.text in ("do", "loop", "while"):
            raise NestedLoopError("nested loops are not supported", t.line, t.col)
        if t.text == "exit":
            self.next()
            if self.accept("("):
                self.expect(")")
            self.expect(";")
            if not in_loop:
                self.err("exit outside the loop", t)
            return [Exit()]
        if t.text == "fail":
            self.next()
            if self.accept("("):
                self.expect(")")
            self.expect(";")
            if not in_loop:
                self.err("fail outside the loop", t)
            return [Fail()]
        if t.text == "if":
            return [self.if_stmt(in_loop)]
        if t.text == "switch":
            return self.switch_stmt(in_loop)
        if t.kind == "name":
            name = self.next().text
            self.expect("=")
            nxt = self.peek()
            if nxt.text == "read":
                self.next()
                self.expect("(")
                self.expect(")")
                self.expect(";")
                if not in_loop:
                    self.err("read outside the loop", t)
                return [ReadStmt(name)]
            if nxt.kind == "name" and nxt.text in self.preds and self.toks[self.pos + 1].text == "(":
                self.next()
                self.expect("(")
                args: list[Expr] = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.expect(")")
                self.expect(";")
                if len(args) != self.preds[nxt.text]:
                    self.err(f"{nxt.text} expects {self.preds[nxt.text]} argument(s)", nxt)
                return [PredCall(name, nxt.text, tuple(args))]
            e = self.expr()
            self.expect(";")
            return [Assign(name, e)]
        self.err(f"unexpected {t.text!r}")

    def if_stmt(self, in_loop: bool) -> If:
        self.expect("if")
        kap = next(self.kappa)
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then = self.block(in_loop)
        els: list[Stmt] = []
        if self.accept("else"):
            if self.peek().text == "if":
                els = [self.if_stmt(in_loop)]
            else:
                els = self.block(in_loop)
        return If(kap, cond, tuple(then), tuple(els))

    def switch_stmt(self, in_loop: bool) -> list[Stmt]:
        t = self.expect("switch")
        self.expect("(")
        scrut = self.expr()
        self.expect(")")
        self.expect("{")
        arms: list[tuple[Optional[Expr], list[Stmt]]] = []
        while not self.accept("}"):
            if self.accept("case"):
                label = self.expr()
                self.expect(":")
                body = self.case_body(in_loop)
                arms.append((label, body))
            elif self.accept("default"):
                self.expect(":")
                body = self.case_body(in_loop)
                arms.append((None, body))
            else:
                self.err("expected case or default")
        # desugar: cases become an if/else chain in source order; a missing
        # default is an empty trailing arm
        chain: list[Stmt] = []
        default_body: list[Stmt] = []
        cases = []
        for label, body in arms:
            if label is None:
                default_body = body
            else:
                cases.append((label, body))
        if not cases:
            return default_body
        out = default_body
        fresh = [next(self.kappa) for _ in cases]
        # the chain is built innermost-first; hand labels out so the first
        # case carries the smallest, keeping source order
        for (label, body), kap in zip(reversed(cases), reversed(fresh)):
            out = [If(kap, Bin("eq", scrut, label), tuple(body), tuple(out))]
        return out

    def case_body(self, in_loop: bool) -> list[Stmt]:
        out: list[Stmt] = []
        while self.peek().text not in ("case", "default", "}"):
            if self.accept("break"):
                self.expect(";")
                break
            out.extend(self.stmt(in_loop))
        return out

    # precedence: || < && < comparisons < add/sub/concat < mul/mod/shift
    def expr(self) -> Expr:
        e = self.and_()
        while self.peek().text == "||":
            self.next()
            e = Bin("or", e, self.and_())
        return e

    def and_(self) -> Expr:
        e = self.cmp()
        while self.peek().text == "&&":
            self.next()
            e = Bin("and", e, self.cmp())
        return e

    def cmp(self) -> Expr:
        e = self.add()
        ops = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}
        while self.peek().text in ops:
            op = ops[self.next().text]
            e = Bin(op, e, self.add())
        return e

    def add(self) -> Expr:
        e = self.mul()
        while self.peek().text in ("+", "-", "."):
            op = {"+": "add", "-": "sub", ".": "concat"}[self.next().text]
            e = Bin(op, e, self.mul())
        return e

    def mul(self) -> Expr:
        e = self.primary()
        while self.peek().text in ("*", "%", "<<", ">>"):
            op = {"*": "mul", "%": "mod", "<<": "shl", ">>": "shr"}[self.next().text]
            e = Bin(op, e, self.primary())
        return e

    def primary(self) -> Expr:
        t = self.next()
        if t.kind == "int":
            return Lit(int(t.text) & MASK)
        if t.text == "empty":
            return EmptyLit()
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name" and t.text not in _KEYWORDS:
            return Var(t.text)
        self.err(f"unexpected {t.text!r} in expression", t)


# ---------------------------------------------------------------------------
# Validation passes
# ---------------------------------------------------------------------------


def _validate(p: Program) -> Program:
    names: set[int] = set()

    def walk_stmts(stmts, fn):
        for s in stmts:
            fn(s)
            if isinstance(s, If):
                walk_stmts(s.then, fn)
                walk_stmts(s.els, fn)

    def check_unique(s: Stmt):
        if isinstance(s, If):
            if s.kappa in names:
                raise ParseError(f"duplicate branch label {s.kappa}", 0, 0)
            names.add(s.kappa)

    walk_stmts(p.init_stmts, check_unique)
    walk_stmts(p.loop_body, check_unique)

    for s in p.init_stmts:
        if isinstance(s, (ReadStmt, Exit, Fail)):
            raise ParseError("init section must be straight-line assignments", 0, 0)
        if isinstance(s, If):
            raise ParseError("init section must be straight-line assignments", 0, 0)

    _check_definite_assignment(p)
    streams = _infer_sorts(p)
    return Program(p.consts, p.extern_preds, p.init_stmts, p.loop_body,
                   p.kappa_count, frozenset(streams))


def _expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Bin):
        return _expr_vars(e.lhs) | _expr_vars(e.rhs)
    return set()


def _check_definite_assignment(p: Program):
    TOP = None  # set of definitely-assigned vars; None = unreachable

    def use(e: Expr, defined: set[str]):
        for v in _expr_vars(e):
            if v not in defined and v not in p.consts:
                raise UndefinedVariableError(f"variable {v!r} used before assignment")

    def go(stmts, defined: Optional[set[str]]) -> Optional[set[str]]:
        for s in stmts:
            if defined is None:
                return None
            if isinstance(s, Assign):
                use(s.expr, defined)
                defined = defined | {s.var}
            elif isinstance(s, ReadStmt):
                defined = defined | {s.var}
            elif isinstance(s, PredCall):
                for a in s.args:
                    use(a, defined)
                defined = defined | {s.var}
            elif isinstance(s, (Exit, Fail)):
                return None
            elif isinstance(s, If):
                use(s.cond, defined)
                d1 = go(s.then, set(defined))
                d2 = go(s.els, set(defined))
                if d1 is None and d2 is None:
                    return None
                defined = d1 if d2 is None else d2 if d1 is None else (d1 & d2)
        return defined

    after_init = go(p.init_stmts, set())
    # loop-carried state: variables assigned on every path of init plus the
    # loop body must dominate uses in the next round; we require body-safety
    # with only init-defined vars available at entry, which is stricter on
    # the first iteration and therefore sound for all of them
    go(p.loop_body, set(after_init or set()))


def _infer_sorts(p: Program) -> set[str]:
    streams: set[str] = set()
    changed = True

    def expr_is_stream(e: Expr) -> bool:
        if isinstance(e, EmptyLit):
            return True
        if isinstance(e, Var):
            return e.name in streams
        if isinstance(e, Bin):
            if e.op == "concat":
                return True
            return False
        return False

    def check(e: Expr, line_hint: str):
        if isinstance(e, Bin):
            check(e.lhs, line_hint)
            check(e.rhs, line_hint)
            ls, rs = expr_is_stream(e.lhs), expr_is_stream(e.rhs)
            if e.op == "concat":
                return
            if ls or rs:
                raise SortError(f"stream operand in integer operation {e.op}", 0, 0)

    def scan(stmts):
        nonlocal changed
        for s in stmts:
            if isinstance(s, Assign):
                if expr_is_stream(s.expr) and s.var not in streams:
                    streams.add(s.var)
                    changed = True
            if isinstance(s, If):
                scan(s.then)
                scan(s.els)

    while changed:
        changed = False
        scan(p.init_stmts)
        scan(p.loop_body)

    def verify(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                check(s.expr, "")
                if not expr_is_stream(s.expr) and s.var in streams:
                    raise SortError(f"stream variable {s.var} assigned an integer", 0, 0)
            elif isinstance(s, If):
                if expr_is_stream(s.cond):
                    raise SortError("branch condition must be an integer", 0, 0)
                check(s.cond, "")
                verify(s.then)
                verify(s.els)

    verify(p.init_stmts)
    verify(p.loop_body)
    return streams


def parse_program(text: str) -> Program:
    """Parse .psl source into a Program with stable branch labels."""
    return _Parser(text).program()


# ---------------------------------------------------------------------------
# Pretty printer (round-trips through parse_program)
# ---------------------------------------------------------------------------


def _expr_str(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, EmptyLit):
        return "empty"
    if isinstance(e, Bin):
        sym = {"add": "+", "sub": "-", "mul": "*", "mod": "%", "shl": "<<",
               "shr": ">>", "eq": "==", "ne": "!=", "lt": "<", "le": "<=",
               "gt": ">", "ge": ">=", "and": "&&", "or": "||", "concat": "."}[e.op]
        return f"({_expr_str(e.lhs)} {sym} {_expr_str(e.rhs)})"
    raise AssertionError(e)


def pretty_print(p: Program) -> str:
    out: list[str] = []
    for name, v in p.consts.items():
        out.append(f"const {name} = {v};")
    for name, ar in p.extern_preds.items():
        out.append(f"extern pred {name}/{ar};")

    def stmts(ss, ind) -> list[str]:
        pad = "  " * ind
        lines = []
        for s in ss:
            if isinstance(s, Assign):
                lines.append(f"{pad}{s.var} = {_expr_str(s.expr)};")
            elif isinstance(s, ReadStmt):
                lines.append(f"{pad}{s.var} = read();")
            elif isinstance(s, PredCall):
                args = ", ".join(_expr_str(a) for a in s.args)
                lines.append(f"{pad}{s.var} = {s.name}({args});")
            elif isinstance(s, Exit):
                lines.append(f"{pad}exit;")
            elif isinstance(s, Fail):
                lines.append(f"{pad}fail;")
            elif isinstance(s, If):
                lines.append(f"{pad}if ({_expr_str(s.cond)}) {{")
                lines += stmts(s.then, ind + 1)
                if s.els:
                    lines.append(f"{pad}}} else {{")
                    lines += stmts(s.els, ind + 1)
                lines.append(f"{pad}}}")
        return lines

    if p.init_stmts:
        out.append("init {")
        out += stmts(p.init_stmts, 1)
        out.append("}")
    out.append("loop {")
    out += stmts(p.loop_body, 1)
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Concrete interpreter
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    accepted: bool
    bytes_consumed: int
    exited: bool
    nonterminated: bool
    iteration_paths: list[tuple[tuple[int, bool], ...]]


def _eval_expr(e: Expr, env: dict, consts: dict[str, int]):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, EmptyLit):
        return b""
    if isinstance(e, Var):
        if e.name in consts:
            return consts[e.name]
        if e.name not in env:
            raise UndefinedVariableError(e.name)
        return env[e.name]
    if isinstance(e, Bin):
        a = _eval_expr(e.lhs, env, consts)
        b = _eval_expr(e.rhs, env, consts)
        if e.op == "concat":
            ab = a if isinstance(a, bytes) else bytes([a & 0xFF])
            bb = b if isinstance(b, bytes) else bytes([b & 0xFF])
            return ab + bb
        if e.op == "and":
            return 1 if (a and b) else 0
        if e.op == "or":
            return 1 if (a or b) else 0
        if e.op == "add":
            return (a + b) & MASK
        if e.op == "sub":
            return (a - b) & MASK
        if e.op == "mul":
            return (a * b) & MASK
        if e.op == "mod":
            return a % b if b else 0
        if e.op == "shl":
            return (a << (b & 31)) & MASK
        if e.op == "shr":
            return (a >> (b & 31)) & MASK
        return 1 if {"eq": a == b, "ne": a != b, "lt": a < b,
                     "le": a <= b, "gt": a > b, "ge": a >= b}[e.op] else 0
    raise AssertionError(e)


class _Rejected(Exception):
    pass


class _Exited(Exception):
    pass


def concrete_run(
    p: Program,
    msg: bytes,
    preds: Optional[dict[str, Callable]] = None,
    guard: int = GUARD_FACTOR,
) -> RunResult:
    """Run the loop on a message.  Acceptance means the loop exited having
    consumed the message exactly."""
    preds = preds or {}
    for name in p.extern_preds:
        if name not in preds:
            raise MissingPredicateImpl(name)

    env: dict = {}
    for s in p.init_stmts:
        if isinstance(s, Assign):
            env[s.var] = _eval_expr(s.expr, env, p.consts)
        elif isinstance(s, PredCall):
            args = [_eval_expr(a, env, p.consts) for a in s.args]
            env[s.var] = 1 if preds[s.name](*args) else 0

    pos = 0
    paths: list[tuple[tuple[int, bool], ...]] = []
    limit = guard * (len(msg) + 2)
    iters = 0
    exited = False
    nonterm = False

    def run_stmts(stmts, trace: list):
        nonlocal pos
        for s in stmts:
            if isinstance(s, Assign):
                env[s.var] = _eval_expr(s.expr, env, p.consts)
            elif isinstance(s, ReadStmt):
                if pos >= len(msg):
                    raise _Rejected()
                env[s.var] = msg[pos]
                pos += 1
            elif isinstance(s, PredCall):
                args = [_eval_expr(a, env, p.consts) for a in s.args]
                env[s.var] = 1 if preds[s.name](*args) else 0
            elif isinstance(s, Exit):
                raise _Exited()
            elif isinstance(s, Fail):
                raise _Rejected()
            elif isinstance(s, If):
                c = _eval_expr(s.cond, env, p.consts)
                taken = bool(c)
                trace.append((s.kappa, taken))
                run_stmts(s.then if taken else s.els, trace)

    try:
        while True:
            if iters >= limit:
                nonterm = True
                break
            iters += 1
            trace: list = []
            run_stmts(p.loop_body, trace)
            paths.append(tuple(trace))
    except _Exited:
        exited = True
    except _Rejected:
        pass

    accepted = exited and pos == len(msg)
    return RunResult(accepted, pos, exited, nonterm, paths)


def enumerate_accepted(
    p: Program,
    alphabet: bytes,
    max_len: int,
    preds: Optional[dict[str, Callable]] = None,
    budget: int = 2_000_000,
) -> set[bytes]:
    """Brute-force the accepted language up to max_len."""
    total = sum(len(alphabet) ** l for l in range(max_len + 1))
    if total > budget:
        raise BudgetExceeded(f"{total} strings exceeds budget {budget}")
    out: set[bytes] = set()
    for l in range(max_len + 1):
        for combo in itertools.product(alphabet, repeat=l):
            m = bytes(combo)
            if concrete_run(p, m, preds).accepted:
                out.add(m)
    return out


def parse_message(text: str) -> bytes:
    """CLI message syntax: 0x-prefixed hex or ASCII."""
    if text.startswith("0x") or text.startswith("0X"):
        hx = text[2:]
        if len(hx) % 2:
            raise ValueError("odd-length hex message")
        return bytes.fromhex(hx)
    return text.encode("latin-1")
