"""Decision and optimization procedures for byte-stream constraints.

The constraints this package produces are tiny: a handful of free bytes,
an optional induction variable, ground applications of uninterpreted
predicates, and widened interval cells.  The solver favours exactness
over cleverness:

* a query is split into DNF cubes and each cube is solved by staged
  backtracking, assigning unknowns in order and rejecting as soon as a
  decided atom fails;
* byte variables get candidate domains narrowed from their comparison
  atoms (with all region boundaries represented), falling back to the
  full 0..255 range when they take part in arithmetic;
* ground predicate applications are independent free booleans, shared by
  structural identity of their arguments;
* the induction variable is existentially quantified over ``0..k_max``;
* atoms are compiled to Python closures once per query.

``unsat`` is only reported after the finite domain is exhausted, so
callers may rely on it; if the domain exceeds the budget the answer is
``unknown`` and callers treat that as possibly satisfiable.
"""

from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import absdom as A
from .errors import UnsatPath

DEFAULT_BUDGET = 400_000


def _env_budget_ms() -> Optional[int]:
    raw = os.environ.get("STATELIFT_SOLVER_BUDGET_MS")
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


@dataclass
class SatResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"


def _pred_key(t: A.PredApp) -> tuple:
    return (t.name, tuple(A.fmt(a) for a in t.args))


# ---------------------------------------------------------------------------
# Term compilation
# ---------------------------------------------------------------------------

_HELPERS = {
    "MASK": A.MASK,
    "_mod": lambda a, b: a % b if b else 0,
    "_shl": lambda a, b: (a << (b & 31)) & A.MASK,
    "_shr": lambda a, b: a >> (b & 31),
}


class _NotCompilable(Exception):
    pass


def _compile_expr(t: A.Term, key_index: dict) -> str:
    def go(t: A.Term) -> str:
        if isinstance(t, A.Const):
            return str(t.value)
        if isinstance(t, A.SByte):
            if not A.lin_is_ground(t.index):
                raise _NotCompilable()
            return f"V[{key_index[('s', t.index)]}]"
        if isinstance(t, A.TByte):
            if not A.lin_is_ground(t.depth):
                raise _NotCompilable()
            return f"V[{key_index[('t', t.depth)]}]"
        if isinstance(t, A.Interval):
            return f"V[{key_index[('iv', t.nonce)]}]"
        if isinstance(t, A.PredApp):
            return f"V[{key_index[('p',) + _pred_key(t)]}]"
        if isinstance(t, A.KVar):
            return "K"
        if isinstance(t, A.AffineK):
            return f"(({t.coef}*K+{t.const})&MASK)"
        if isinstance(t, A.Binary):
            l, r = go(t.lhs), go(t.rhs)
            op = t.op
            if op == "add":
                return f"(({l}+{r})&MASK)"
            if op == "sub":
                return f"(({l}-{r})&MASK)"
            if op == "mul":
                return f"(({l}*{r})&MASK)"
            if op == "mod":
                return f"_mod({l},{r})"
            if op == "shl":
                return f"_shl({l},{r})"
            if op == "shr":
                return f"_shr({l},{r})"
            if op == "and":
                return f"(1 if ({l} and {r}) else 0)"
            if op == "or":
                return f"(1 if ({l} or {r}) else 0)"
            sym = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=",
                   "gt": ">", "ge": ">="}[op]
            return f"({l}{sym}{r})"
        if isinstance(t, A.Ite):
            return f"({go(t.then)} if {go(t.cond)} else {go(t.els)})"
        raise _NotCompilable()

    return go(t)


def _compile(t: A.Term, key_index: dict) -> Callable:
    expr = _compile_expr(t, key_index)
    return eval(f"lambda V,K: {expr}", dict(_HELPERS))  # noqa: S307


# ---------------------------------------------------------------------------
# Unknown collection and byte domains
# ---------------------------------------------------------------------------


def _unknowns(ts: list[A.Term]):
    keys: list[tuple] = []
    seen = set()
    ivs: dict[tuple, A.Interval] = {}
    has_k = False

    def note(key):
        if key not in seen:
            seen.add(key)
            keys.append(key)

    for t in ts:
        for s in A.walk(t):
            if isinstance(s, A.SByte) and A.lin_is_ground(s.index):
                note(("s", s.index))
            elif isinstance(s, A.TByte) and A.lin_is_ground(s.depth):
                note(("t", s.depth))
            elif isinstance(s, A.PredApp):
                note(("p",) + _pred_key(s))
            elif isinstance(s, A.Interval):
                key = ("iv", s.nonce)
                note(key)
                ivs[key] = s
            elif isinstance(s, (A.KVar, A.AffineK)):
                has_k = True
            if isinstance(s, (A.SByte, A.TByte, A.SWindow, A.TWindow)):
                for f in A._lin_fields(s):
                    if isinstance(f, A.KForm):
                        has_k = True
    return keys, ivs, has_k


def _byte_domains(atoms: list[A.Term], keys: list[tuple]) -> dict[tuple, list[int]]:
    """Candidate values per byte: complete for comparison-only bytes, full
    range for bytes used in arithmetic or compared to non-constants."""
    byte_keys = [k for k in keys if k[0] in ("s", "t")]
    cands: dict[tuple, set] = {k: set() for k in byte_keys}
    full: set[tuple] = set()

    def ref_key(t: A.Term):
        if isinstance(t, A.SByte) and A.lin_is_ground(t.index):
            return ("s", t.index)
        if isinstance(t, A.TByte) and A.lin_is_ground(t.depth):
            return ("t", t.depth)
        return None

    def scan(t: A.Term, under_arith: bool):
        if isinstance(t, A.Binary):
            if t.op in A.CMP_OPS:
                lk, rk = ref_key(t.lhs), ref_key(t.rhs)
                if lk is not None and isinstance(t.rhs, A.Const):
                    c = t.rhs.value
                    cands[lk].update(x for x in (c - 1, c, c + 1) if 0 <= x <= 255)
                elif rk is not None and isinstance(t.lhs, A.Const):
                    c = t.lhs.value
                    cands[rk].update(x for x in (c - 1, c, c + 1) if 0 <= x <= 255)
                else:
                    scan(t.lhs, True)
                    scan(t.rhs, True)
                return
            arith = t.op in A.ARITH_OPS
            scan(t.lhs, under_arith or arith)
            scan(t.rhs, under_arith or arith)
            return
        if isinstance(t, A.Ite):
            scan(t.cond, under_arith)
            scan(t.then, under_arith)
            scan(t.els, under_arith)
            return
        k = ref_key(t)
        if k is not None and under_arith:
            full.add(k)
        for c in t.children():
            scan(c, under_arith)

    for a in atoms:
        scan(a, False)
    out = {}
    for k in byte_keys:
        if k in full or not cands[k]:
            out[k] = list(range(256))
        else:
            out[k] = sorted(cands[k] | {0, 255})
    return out


def _cubes(t: A.Term, cap: int = 128) -> Optional[list[list[A.Term]]]:
    if isinstance(t, A.Binary) and t.op == "or":
        left = _cubes(t.lhs, cap)
        right = _cubes(t.rhs, cap)
        if left is None or right is None or len(left) + len(right) > cap:
            return None
        return left + right
    if isinstance(t, A.Binary) and t.op == "and":
        left = _cubes(t.lhs, cap)
        right = _cubes(t.rhs, cap)
        if left is None or right is None or len(left) * len(right) > cap:
            return None
        return [l + r for l in left for r in right]
    return [[t]]


# ---------------------------------------------------------------------------
# The solver proper
# ---------------------------------------------------------------------------


class Solver:
    """A per-thread decision oracle with a result cache."""

    def __init__(self, budget: int = DEFAULT_BUDGET, k_max: int = 16):
        self.budget = budget
        self.k_max = k_max
        self._cache: dict[str, SatResult] = {}
        self.deadline_ms = _env_budget_ms()

    # -- core ---------------------------------------------------------------

    def sat(self, c: A.Term) -> SatResult:
        c = A.simplify_term(c)
        if c == A.TRUE:
            return SatResult("sat")
        if c == A.FALSE:
            return SatResult("unsat")
        key = A.fmt(c)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        res = self._query(c, objective=None, mode="sat")
        if len(self._cache) > 100_000:
            self._cache.clear()
        self._cache[key] = res
        return res

    def _query(self, c: A.Term, objective: Optional[A.Term], mode: str) -> SatResult:
        has_k = A.references_k(c) or (objective is not None and A.references_k(objective))
        ks = range(self.k_max + 1) if has_k else (0,)
        t0 = time.monotonic()
        best_lo = best_hi = None
        best_model = None
        unknown = False
        for k in ks:
            ck = A.simplify_term(A.subst_k(c, k)) if has_k else c
            if ck == A.FALSE:
                continue
            obj = objective
            if objective is not None and has_k:
                obj = A.simplify_term(A.subst_k(objective, k))
            cubes = _cubes(ck)
            if cubes is None:
                cubes = [[ck]]
            for cube in cubes:
                r = self._solve_cube(cube, obj, mode, k, t0)
                if r is None:
                    unknown = True
                    continue
                status, model, lo, hi = r
                if status == "sat":
                    if mode == "sat":
                        model["k"] = k
                        return SatResult("sat", model)
                    if best_lo is None or lo < best_lo:
                        best_lo = lo
                    if best_hi is None or hi > best_hi:
                        best_hi = hi
                    best_model = model
            if self.deadline_ms is not None and \
                    (time.monotonic() - t0) * 1000 > self.deadline_ms:
                unknown = True
                break
        if best_model is not None:
            res = SatResult("unknown" if unknown else "sat", best_model)
            res.range = (best_lo, best_hi)
            return res
        return SatResult("unknown", reason="budget") if unknown else SatResult("unsat")

    def _solve_cube(self, atoms: list[A.Term], objective: Optional[A.Term],
                    mode: str, k: int, t0: float):
        """Backtracking over the cube's unknowns.

        Returns (status, model, obj_lo, obj_hi) or None for budget misses.
        """
        atoms = [a for a in atoms if a != A.TRUE]
        if any(a == A.FALSE for a in atoms):
            return ("unsat", {}, 0, 0)
        terms = atoms + ([objective] if objective is not None else [])
        keys, ivs, _ = _unknowns(terms)
        domains: dict[tuple, list] = _byte_domains(atoms, keys)
        for key in keys:
            if key[0] == "p":
                domains[key] = [False, True]
            elif key[0] == "iv":
                node = ivs[key]
                lo = 0 if node.lo is None else max(0, node.lo)
                hi = node.hi
                if hi is None or hi - lo > 300:
                    return None  # unbounded widened cell: give up exactness
                domains[key] = list(range(lo, hi + 1))
        order = sorted(keys, key=lambda key: len(domains[key]))
        total = 1
        for key in order:
            total *= len(domains[key])
        if total > self.budget:
            # try to find some model cheaply, but never claim unsat
            order = order[:]
            trimmed = {key: domains[key][:8] for key in order}
            model = self._backtrack(atoms, objective, order, trimmed, mode="sat")
            if model is not None and mode == "sat":
                m, _lo, _hi = model
                return ("sat", m, _lo, _hi)
            return None
        key_index = {key: i for i, key in enumerate(order)}
        try:
            result = self._backtrack(atoms, objective, order, domains,
                                     mode=mode, key_index=key_index, kval=k)
        except _NotCompilable:
            return None
        if result is None:
            return ("unsat", {}, 0, 0)
        model, lo, hi = result
        return ("sat", model, lo, hi)

    def _backtrack(self, atoms, objective, order, domains, mode,
                   key_index=None, kval: int = 0):
        if key_index is None:
            key_index = {key: i for i, key in enumerate(order)}
        # compile each atom and bind it to the first level where its
        # unknowns are all assigned
        level_checks: list[list[Callable]] = [[] for _ in range(len(order) + 1)]
        try:
            for a in atoms:
                keys, _ivs, _k = _unknowns([a])
                lvl = 0
                for key in keys:
                    lvl = max(lvl, key_index[key] + 1)
                level_checks[lvl].append(_compile(a, key_index))
        except _NotCompilable:
            raise
        obj_fn = _compile(objective, key_index) if objective is not None else None

        V = [0] * len(order)
        found = []
        best = [None, None, None]  # model, lo, hi

        def rec(i: int) -> bool:
            if i == len(order):
                if obj_fn is None:
                    best[0] = {key: V[key_index[key]] for key in order}
                    best[1] = best[2] = 0
                    return True
                val = obj_fn(V, kval)
                if best[0] is None or val < best[1]:
                    best[1] = val
                    best[0] = {key: V[key_index[key]] for key in order}
                if best[2] is None or val > best[2]:
                    best[2] = val
                return False  # keep enumerating for the optimum
            for v in domains[order[i]]:
                V[i] = v
                ok = True
                for chk in level_checks[i + 1]:
                    if not chk(V, kval):
                        ok = False
                        break
                if ok and rec(i + 1):
                    return True
            return False

        for chk in level_checks[0]:
            if not chk(V, kval):
                return None
        hit = rec(0)
        if best[0] is None:
            return None
        if mode == "sat" and not hit and obj_fn is not None:
            pass
        return (best[0], best[1] if best[1] is not None else 0,
                best[2] if best[2] is not None else 0)

    # -- derived queries ------------------------------------------------------

    def is_unsat(self, c: A.Term) -> bool:
        return self.sat(c).is_unsat

    def implies(self, a: A.Term, b: A.Term) -> bool:
        """True iff a => b over the finite domain (unknown counts as no)."""
        return self.is_unsat(A.conj([a, A.negate(b)]))

    def equivalent(self, a: A.Term, b: A.Term) -> bool:
        return self.implies(a, b) and self.implies(b, a)

    def minimize(self, v: A.Term, c: A.Term) -> Optional[int]:
        """Least value of v over models of c; None when unknown/unsat."""
        res = self._query(A.simplify_term(c), v, mode="opt")
        if res.status == "sat":
            return res.range[0]
        return None

    def maximize(self, v: A.Term, c: A.Term) -> Optional[int]:
        res = self._query(A.simplify_term(c), v, mode="opt")
        if res.status == "sat":
            return res.range[1]
        return None

    # -- simplification under a context ----------------------------------------

    def simplify(self, phi1: A.Term, phi2: A.Term) -> A.Term:
        """Return phi1' with phi2 => (phi1 <=> phi1'), by validated pruning.

        Conjuncts implied by the context plus the remaining conjuncts are
        dropped; disjuncts unsatisfiable under the context are dropped; ite
        branches infeasible under the context collapse.  Every step is
        justified by an unsat query, and the result is verified, so a
        budget miss just keeps the input.
        """
        phi1 = A.simplify_term(phi1)

        def simp(t: A.Term, ctx: A.Term) -> A.Term:
            t = A.simplify_term(t)
            if isinstance(t, A.Binary) and t.op == "and":
                parts = [simp(p, ctx) for p in _flatten(t, "and")]
                kept: list[A.Term] = []
                for i, p in enumerate(parts):
                    rest = kept + parts[i + 1:]
                    if self.is_unsat(A.conj([ctx] + rest + [A.negate(p)])):
                        continue  # implied by context and the others
                    kept.append(p)
                return A.conj(kept)
            if isinstance(t, A.Binary) and t.op == "or":
                kept = []
                seen = set()
                for p in _flatten(t, "or"):
                    if self.is_unsat(A.conj([ctx, p])):
                        continue
                    p = simp(p, ctx)
                    f = A.fmt(p)
                    if f not in seen:
                        seen.add(f)
                        kept.append(p)
                return A.disj(kept)
            if isinstance(t, A.Ite):
                if self.is_unsat(A.conj([ctx, t.cond])):
                    return simp(t.els, ctx)
                if self.is_unsat(A.conj([ctx, A.negate(t.cond)])):
                    return simp(t.then, ctx)
            return t

        out = A.simplify_term(simp(phi1, phi2))
        if not self.equivalent(A.conj([phi2, phi1]), A.conj([phi2, out])):
            return phi1
        return out

    def simplify_value(self, v: A.Term, ctx: A.Term) -> A.Term:
        """Prune ite branches of a value that are infeasible under ctx."""

        def go(t: A.Term) -> A.Term:
            if isinstance(t, A.Ite):
                if self.is_unsat(A.conj([ctx, t.cond])):
                    return go(t.els)
                if self.is_unsat(A.conj([ctx, A.negate(t.cond)])):
                    return go(t.then)
                return A.Ite(t.cond, go(t.then), go(t.els))
            if isinstance(t, A.Binary):
                return A.Binary(t.op, go(t.lhs), go(t.rhs))
            if isinstance(t, A.Concat):
                return A.Concat(tuple(go(p) for p in t.parts))
            if isinstance(t, A.PredApp):
                return A.PredApp(t.name, tuple(go(a) for a in t.args))
            return t

        return A.simplify_term(go(A.simplify_term(v)))


def _flatten(t: A.Term, op: str) -> list[A.Term]:
    if isinstance(t, A.Binary) and t.op == op:
        return _flatten(t.lhs, op) + _flatten(t.rhs, op)
    return [t]


# ---------------------------------------------------------------------------
# Message construction
# ---------------------------------------------------------------------------


def solve_message(
    steps: list[tuple[A.Term, int, int]],
    preds: Optional[dict] = None,
    seed: int = 0,
    budget: int = 200_000,
) -> bytes:
    """Find bytes satisfying a sequence of (constraint, offset, window)
    steps.

    Each constraint is evaluated with its iteration's bytes at
    ``offset .. offset+window`` and prior references resolved against the
    already-chosen prefix.  Predicates are evaluated through ``preds`` once
    their argument windows are fully determined.  Deterministic for a given
    seed; raises UnsatPath when no assignment exists within the budget.
    """
    preds = preds or {}
    total = max((off + w for _, off, w in steps), default=0)

    import random

    rng = random.Random(seed)

    def order(dom: list[int]) -> list[int]:
        if seed == 0:
            return dom
        dom = list(dom)
        rng.shuffle(dom)
        return dom

    msg: list[Optional[int]] = [None] * total
    attempts = [0]

    def eval_step(term: A.Term, off: int) -> Optional[bool]:
        def bval(pos: int) -> Optional[int]:
            if pos < 0 or pos >= total:
                return None
            return msg[pos]

        def go(t: A.Term):
            if isinstance(t, A.Const):
                return t.value
            if isinstance(t, A.SByte):
                if not A.lin_is_ground(t.index):
                    return None
                return bval(off + t.index)
            if isinstance(t, A.TByte):
                if not A.lin_is_ground(t.depth):
                    return None
                return bval(off - t.depth)
            if isinstance(t, (A.SWindow, A.TWindow)):
                if isinstance(t, A.SWindow):
                    if not (A.lin_is_ground(t.lo) and A.lin_is_ground(t.hi)):
                        return None
                    rng_ = range(off + t.lo, off + t.hi)
                else:
                    if not (A.lin_is_ground(t.depth) and A.lin_is_ground(t.length)):
                        return None
                    rng_ = range(off - t.depth, off - t.depth + t.length)
                vals = [bval(p) for p in rng_]
                if any(v is None for v in vals):
                    return None
                return bytes(vals)  # type: ignore[arg-type]
            if isinstance(t, (A.EmptyPrev, A.EmptyCur)):
                return b""
            if isinstance(t, A.Concat):
                parts = [go(p) for p in t.parts]
                if any(p is None for p in parts):
                    return None
                out = b""
                for p in parts:
                    out += bytes([p & 0xFF]) if isinstance(p, int) else p
                return out
            if isinstance(t, A.PredApp):
                args = [go(a) for a in t.args]
                if any(a is None for a in args):
                    return None
                impl = preds.get(t.name)
                if impl is None:
                    return None
                return 1 if impl(*args) else 0
            if isinstance(t, A.Binary):
                a = go(t.lhs)
                if t.op == "and":
                    if a == 0:
                        return 0
                    b = go(t.rhs)
                    if a is None or b is None:
                        return None
                    return 1 if (a and b) else 0
                if t.op == "or":
                    if a == 1:
                        return 1
                    b = go(t.rhs)
                    if a is None or b is None:
                        return None
                    return 1 if (a or b) else 0
                b = go(t.rhs)
                if a is None or b is None:
                    return None
                if t.op in A.ARITH_OPS:
                    return A._fold_arith(t.op, a, b)
                return 1 if A._fold_cmp(t.op, a, b) else 0
            if isinstance(t, A.Ite):
                c = go(t.cond)
                if c is None:
                    return None
                return go(t.then if c else t.els)
            if isinstance(t, A.Interval):
                return t.lo if t.lo is not None else 0
            return None

        v = go(term)
        if v is None:
            return None
        return bool(v)

    def backtrack(i: int) -> bool:
        if i == len(steps):
            return True
        term, off, w = steps[i]
        positions = [p for p in range(off, off + w) if msg[p] is None]
        doms = []
        keys, _ivs, _k = _unknowns([term])
        dommap = _byte_domains([term], keys)
        for p in positions:
            doms.append(order(dommap.get(("s", p - off), list(range(256)))))
        for combo in itertools.product(*doms) if positions else [()]:
            attempts[0] += 1
            if attempts[0] > budget:
                raise UnsatPath("message search budget exhausted")
            for p, v in zip(positions, combo):
                msg[p] = v
            ok = eval_step(term, off)
            if ok is not False and all(
                eval_step(steps[j][0], steps[j][1]) is not False for j in range(i)
            ):
                if backtrack(i + 1):
                    return True
            for p in positions:
                msg[p] = None
        return False

    if not backtrack(0):
        raise UnsatPath("no message satisfies the given path constraints")
    return bytes(0 if b is None else b for b in msg)
