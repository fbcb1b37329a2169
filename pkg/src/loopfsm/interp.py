"""Abstract interpretation of a single loop iteration.

Interpretation is vector-wise: at every branch whose condition is not
decided by the entry facts, execution forks, and each surviving leaf is
one decision vector with its own output bindings.  ``fail`` leaves are
pruned (they can never contribute an accepted message); ``exit`` leaves
are flagged so the engine can isolate them into final states.

For each vector we also record the variables whose new value still builds
on their own entry value while that entry depends on prior input.  Those
are the recursive definitions that must not share a state with resetting
paths, or the iterate sequence stops being summarizable.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import absdom as A
from . import lang as L
from .solver import Solver


@dataclass
class VectorOutcome:
    decisions: A.Vector
    values: dict[str, A.Term]
    kappa: dict[int, A.Term]
    reads: int
    exited: bool
    recursive: frozenset[str]

    def constraint(self) -> A.Term:
        return A.vector_constraint(self.decisions, self.kappa)


@dataclass
class IterationResult:
    vectors: list[VectorOutcome]
    entry: dict[str, A.Term]

    def skeleton(self) -> A.Skeleton:
        return A.Skeleton.of(v.decisions for v in self.vectors)


def init_env(p: L.Program) -> dict[str, A.Term]:
    """Bindings established by the init section (before any input)."""
    values: dict[str, A.Term] = {}
    for s in p.init_stmts:
        if isinstance(s, L.Assign):
            values[s.var] = _eval(s.expr, values, p, entry=True)
        elif isinstance(s, L.PredCall):
            args = tuple(_eval(a, values, p, entry=True) for a in s.args)
            values[s.var] = A.PredApp(s.name, args)
    return values


def advance_frame(values: dict[str, A.Term], reads: int) -> dict[str, A.Term]:
    """Reanchor an iteration's output as the next iteration's entry."""
    return {v: A.shift_to_prev(t, reads) for v, t in values.items()}


def _eval(e: L.Expr, env: dict[str, A.Term], p: L.Program, entry: bool = False) -> A.Term:
    if isinstance(e, L.Lit):
        return A.Const(e.value)
    if isinstance(e, L.EmptyLit):
        # a reset is anchored at the current read position; entry-time
        # empties stand for "nothing consumed yet"
        return A.EmptyPrev() if entry else A.EmptyCur()
    if isinstance(e, L.Var):
        if e.name in p.consts:
            return A.Const(p.consts[e.name])
        return env[e.name]
    if isinstance(e, L.Bin):
        return A.simplify_term(
            A.Binary(e.op, _eval(e.lhs, env, p, entry), _eval(e.rhs, env, p, entry))
        )
    raise AssertionError(e)


def _eval_raw(e: L.Expr, env: dict[str, A.Term], p: L.Program) -> A.Term:
    """Like _eval but without canonicalization at concat nodes, so the
    recursion test can see entry values before empty prefixes collapse."""
    if isinstance(e, L.Bin):
        lhs = _eval_raw(e.lhs, env, p)
        rhs = _eval_raw(e.rhs, env, p)
        if e.op == "concat":
            return A.Concat((lhs, rhs))
        return A.Binary(e.op, lhs, rhs)
    return _eval(e, env, p)


class _Frame:
    __slots__ = ("values", "reads", "decisions", "kappa", "path", "recent")

    def __init__(self, values, reads, decisions, kappa, path, recent):
        self.values = values
        self.reads = reads
        self.decisions = decisions  # list[(kappa, bool)]
        self.kappa = kappa  # {kappa: cond term}
        self.path = path  # list of realized literals so far
        self.recent = recent  # {var: last assignment rebuilt on tau entry}

    def fork(self) -> "_Frame":
        return _Frame(dict(self.values), self.reads, list(self.decisions),
                      dict(self.kappa), list(self.path), dict(self.recent))


def abstract_iteration(
    entry: dict[str, A.Term],
    p: L.Program,
    solver: Solver,
    vector_limit: int = 4096,
) -> IterationResult:
    """Interpret the loop body once from the given entry bindings."""
    out: list[VectorOutcome] = []

    def finish(fr: _Frame, exited: bool):
        rec = set()
        for v, t in fr.values.items():
            ent = entry.get(v)
            if ent is None or not A.references_tau(ent):
                continue
            if v not in fr.recent or fr.recent[v] or A.structurally_contains(t, ent):
                rec.add(v)
        out.append(VectorOutcome(
            decisions=tuple(fr.decisions),
            values=dict(fr.values),
            kappa=dict(fr.kappa),
            reads=fr.reads,
            exited=exited,
            recursive=frozenset(rec),
        ))

    def assign(fr: _Frame, var: str, rhs_raw: A.Term):
        ent = entry.get(var)
        fr.recent[var] = bool(
            ent is not None and A.references_tau(ent)
            and A.structurally_contains(rhs_raw, ent)
        )
        fr.values[var] = A.simplify_term(rhs_raw)

    def go(stmts: tuple[L.Stmt, ...], idx: int, fr: _Frame, rest: list):
        while True:
            if idx >= len(stmts):
                if rest:
                    stmts, idx = rest.pop()
                    continue
                finish(fr, exited=False)
                return
            s = stmts[idx]
            idx += 1
            if isinstance(s, L.Assign):
                assign(fr, s.var, _eval_raw(s.expr, fr.values, p))
            elif isinstance(s, L.ReadStmt):
                fr.values[s.var] = A.SByte(fr.reads)
                fr.recent[s.var] = False
                fr.reads += 1
            elif isinstance(s, L.PredCall):
                args = tuple(_eval(a, fr.values, p) for a in s.args)
                assign(fr, s.var, A.PredApp(s.name, args))
            elif isinstance(s, L.Exit):
                finish(fr, exited=True)
                return
            elif isinstance(s, L.Fail):
                return  # pruned: this path can never accept
            elif isinstance(s, L.If):
                cond = _eval(s.cond, fr.values, p)
                path_c = A.conj(fr.path)
                then_ok = not solver.is_unsat(A.conj([path_c, cond]))
                else_ok = not solver.is_unsat(A.conj([path_c, A.negate(cond)]))
                if then_ok and else_ok and len(out) < vector_limit:
                    other = fr.fork()
                    other.decisions.append((s.kappa, False))
                    other.kappa[s.kappa] = cond
                    other.path.append(A.negate(cond))
                    go(s.els + tuple(stmts[idx:]), 0, other, list(rest))
                    fr.decisions.append((s.kappa, True))
                    fr.kappa[s.kappa] = cond
                    fr.path.append(cond)
                    rest.append((stmts, idx))
                    stmts, idx = s.then, 0
                elif then_ok or else_ok:
                    taken = then_ok
                    fr.decisions.append((s.kappa, taken))
                    fr.kappa[s.kappa] = cond
                    fr.path.append(cond if taken else A.negate(cond))
                    rest.append((stmts, idx))
                    stmts, idx = (s.then if taken else s.els), 0
                else:
                    return  # contradictory prefix
            else:
                raise AssertionError(s)

    root = _Frame(dict(entry), 0, [], {}, [], {})
    go(p.loop_body, 0, root, [])
    out.sort(key=lambda v: v.decisions)
    return IterationResult(out, dict(entry))
