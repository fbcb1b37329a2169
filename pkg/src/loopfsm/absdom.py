"""Symbolic values over byte streams, path skeletons, and environments.

The analysis talks about two byte streams relative to the loop iteration
currently being interpreted:

* bytes read *in* the current iteration, addressed from its start
  (``SByte(0)`` is the first byte the iteration reads), and
* bytes consumed by *prior* iterations, addressed backwards from the point
  where the current iteration starts (``TByte(1)`` is the byte immediately
  before it).

Anchoring prior bytes by their distance from the current read pointer keeps
values comparable across iterations: after an iteration that read ``r``
bytes, ``SByte(i)`` becomes ``TByte(r - i)`` and every ``TByte(d)`` becomes
``TByte(d + r)``.  Contiguous runs are expressed as windows; a window whose
depth equals its length is exactly the suffix of everything consumed so
far, which is how token accumulators normally look.

Integer positions and window sizes may be linear in a single induction
variable ``k`` (``KForm``), which is how summarized self-loops describe the
k-th iterate.

Terms are immutable and hashable; structural equality is the canonical
equality everywhere.  All arithmetic is unsigned 32-bit with wraparound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .errors import UnboundBranchLabel

WIDTH = 32
MASK = (1 << WIDTH) - 1

# Binary operators. Comparisons and logicals return 0/1.
ARITH_OPS = {"add", "sub", "mul", "mod", "shl", "shr"}
CMP_OPS = {"eq", "ne", "lt", "le", "gt", "ge"}
BOOL_OPS = {"and", "or"}
ALL_OPS = ARITH_OPS | CMP_OPS | BOOL_OPS | {"concat"}

OP_SYMBOL = {
    "add": "+", "sub": "-", "mul": "*", "mod": "%", "shl": "<<", "shr": ">>",
    "eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
    "and": "&&", "or": "||", "concat": ".",
}

NEG_CMP = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}


# ---------------------------------------------------------------------------
# Linear forms in the induction variable k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KForm:
    """``coef * k + const`` with integer coefficients."""

    coef: int
    const: int

    def __str__(self) -> str:
        if self.coef == 0:
            return str(self.const)
        head = "k" if self.coef == 1 else f"{self.coef}*k"
        if self.const == 0:
            return head
        return f"{head}{'+' if self.const >= 0 else '-'}{abs(self.const)}"


Lin = Union[int, KForm]


def lin(coef: int, const: int) -> Lin:
    return const if coef == 0 else KForm(coef, const)


def lin_add(a: Lin, b: int) -> Lin:
    if isinstance(a, KForm):
        return KForm(a.coef, a.const + b)
    return a + b


def lin_inst(a: Lin, k: int) -> int:
    if isinstance(a, KForm):
        return a.coef * k + a.const
    return a


def lin_shift_k(a: Lin, delta: int) -> Lin:
    """Substitute k := k + delta."""
    if isinstance(a, KForm):
        return KForm(a.coef, a.const + a.coef * delta)
    return a


def lin_is_ground(a: Lin) -> bool:
    return not isinstance(a, KForm)


def lin_fit(values: list[int]) -> Optional[Lin]:
    """Fit an affine sequence anchored at k=0, or None."""
    step = values[1] - values[0]
    if all(values[i + 1] - values[i] == step for i in range(len(values) - 1)):
        return lin(step, values[0])
    return None


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


class Term:
    """Base class; concrete terms are frozen dataclasses below."""

    __slots__ = ()

    def children(self) -> tuple["Term", ...]:
        return ()


@dataclass(frozen=True)
class Const(Term):
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value & MASK)


TRUE = Const(1)
FALSE = Const(0)


@dataclass(frozen=True)
class SByte(Term):
    """Byte ``index`` read by the current iteration (0-based)."""

    index: Lin


@dataclass(frozen=True)
class TByte(Term):
    """Byte at ``depth`` positions before the current iteration (depth >= 1)."""

    depth: Lin


@dataclass(frozen=True)
class SWindow(Term):
    """Bytes ``lo .. hi-1`` of the current iteration, as a stream."""

    lo: Lin
    hi: Lin


@dataclass(frozen=True)
class TWindow(Term):
    """``length`` prior bytes whose deepest byte is ``depth`` back.

    ``TWindow(m, m)`` is the suffix of all prior input of length m.
    """

    depth: Lin
    length: Lin


@dataclass(frozen=True)
class EmptyPrev(Term):
    """The empty stream anchored before the current iteration."""


@dataclass(frozen=True)
class EmptyCur(Term):
    """The empty stream anchored at the current read pointer (a reset)."""


@dataclass(frozen=True)
class Concat(Term):
    parts: tuple[Term, ...]

    def children(self):
        return self.parts


@dataclass(frozen=True)
class Binary(Term):
    op: str
    lhs: Term
    rhs: Term

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Ite(Term):
    cond: Term
    then: Term
    els: Term

    def children(self):
        return (self.cond, self.then, self.els)


_interval_counter = [0]


@dataclass(frozen=True)
class Interval(Term):
    """A value known only to lie in ``[lo, hi]`` (None = unbounded side).

    Each instance carries a nonce so that two occurrences of the same
    widened cell denote the same unknown.
    """

    lo: Optional[int]
    hi: Optional[int]
    nonce: int = field(default=0)

    @staticmethod
    def fresh(lo: Optional[int], hi: Optional[int]) -> "Interval":
        _interval_counter[0] += 1
        return Interval(lo, hi, _interval_counter[0])


@dataclass(frozen=True)
class PredApp(Term):
    """Application of a declared uninterpreted predicate."""

    name: str
    args: tuple[Term, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class KVar(Term):
    """The induction variable of a summarized state family."""


@dataclass(frozen=True)
class AffineK(Term):
    """Integer value ``coef * k + const``."""

    coef: int
    const: int


STREAM_TYPES = (SWindow, TWindow, EmptyPrev, EmptyCur, Concat)


def is_stream(t: Term) -> bool:
    if isinstance(t, STREAM_TYPES):
        return True
    if isinstance(t, Ite):
        return is_stream(t.then) or is_stream(t.els)
    return False


# ---------------------------------------------------------------------------
# Walks and predicates over terms
# ---------------------------------------------------------------------------


def walk(t: Term) -> Iterator[Term]:
    yield t
    for c in t.children():
        yield from walk(c)


def references_tau(t: Term) -> bool:
    return any(isinstance(s, (TByte, TWindow, EmptyPrev)) for s in walk(t))


def references_sigma(t: Term) -> bool:
    return any(isinstance(s, (SByte, SWindow, EmptyCur)) for s in walk(t))


def references_k(t: Term) -> bool:
    for s in walk(t):
        if isinstance(s, (KVar, AffineK)):
            return True
        for f in _lin_fields(s):
            if isinstance(f, KForm):
                return True
    return False


def contains_pred(t: Term) -> bool:
    return any(isinstance(s, PredApp) for s in walk(t))


def contains_interval(t: Term) -> bool:
    return any(isinstance(s, Interval) for s in walk(t))


def _lin_fields(t: Term) -> tuple[Lin, ...]:
    if isinstance(t, SByte):
        return (t.index,)
    if isinstance(t, TByte):
        return (t.depth,)
    if isinstance(t, SWindow):
        return (t.lo, t.hi)
    if isinstance(t, TWindow):
        return (t.depth, t.length)
    return ()


def max_tau_depth(t: Term) -> int:
    """Largest ground prior-byte distance referenced (0 if none/ground-free)."""
    best = 0
    for s in walk(t):
        if isinstance(s, TByte) and lin_is_ground(s.depth):
            best = max(best, s.depth)
        elif isinstance(s, TWindow) and lin_is_ground(s.depth):
            best = max(best, s.depth)
    return best


def structurally_contains(outer: Term, inner: Term) -> bool:
    """True iff ``inner`` occurs as a subterm of ``outer`` (reflexive)."""
    return any(s == inner for s in walk(outer))


# ---------------------------------------------------------------------------
# Substitutions / reindexing
# ---------------------------------------------------------------------------


def transform(t: Term, fn) -> Term:
    """Bottom-up rebuild; ``fn`` maps each rebuilt node to a replacement."""
    if isinstance(t, Concat):
        t2 = Concat(tuple(transform(p, fn) for p in t.parts))
    elif isinstance(t, Binary):
        t2 = Binary(t.op, transform(t.lhs, fn), transform(t.rhs, fn))
    elif isinstance(t, Ite):
        t2 = Ite(transform(t.cond, fn), transform(t.then, fn), transform(t.els, fn))
    elif isinstance(t, PredApp):
        t2 = PredApp(t.name, tuple(transform(a, fn) for a in t.args))
    else:
        t2 = t
    return fn(t2)


def shift_to_prev(t: Term, reads: int) -> Term:
    """Reanchor an iteration-output value as the next iteration's entry.

    Current bytes become prior bytes at their distance from the new read
    pointer; prior bytes recede by ``reads``.
    """

    def fn(s: Term) -> Term:
        if isinstance(s, SByte):
            if isinstance(s.index, KForm):
                return TByte(KForm(-s.index.coef, reads - s.index.const))
            return TByte(reads - s.index)
        if isinstance(s, TByte):
            return TByte(lin_add(s.depth, reads))
        if isinstance(s, SWindow):
            if isinstance(s.lo, KForm) or isinstance(s.hi, KForm):
                lo, hi = s.lo, s.hi
                d = _lin_sub_from(reads, lo)
                ln = _lin_diff(hi, lo)
                return TWindow(d, ln)
            return TWindow(reads - s.lo, s.hi - s.lo)
        if isinstance(s, TWindow):
            return TWindow(lin_add(s.depth, reads), s.length)
        if isinstance(s, EmptyCur):
            return EmptyPrev()
        return s

    return simplify_term(transform(t, fn))


def _lin_sub_from(c: int, a: Lin) -> Lin:
    if isinstance(a, KForm):
        return KForm(-a.coef, c - a.const)
    return c - a


def _lin_diff(a: Lin, b: Lin) -> Lin:
    ac, a0 = (a.coef, a.const) if isinstance(a, KForm) else (0, a)
    bc, b0 = (b.coef, b.const) if isinstance(b, KForm) else (0, b)
    return lin(ac - bc, a0 - b0)


def pull_to_pred(t: Term, pred_reads: int) -> Optional[Term]:
    """Re-express a successor-entry value in the predecessor's frame.

    Prior bytes within the predecessor's own reads become its current
    bytes; deeper ones stay prior.  Returns None when a reference cannot
    be relocated exactly (parametric windows that straddle the boundary).
    """
    bad = []

    def fn(s: Term) -> Term:
        if isinstance(s, TByte):
            if not lin_is_ground(s.depth):
                bad.append(s)
                return s
            if s.depth <= pred_reads:
                return SByte(pred_reads - s.depth)
            return TByte(s.depth - pred_reads)
        if isinstance(s, TWindow):
            if not (lin_is_ground(s.depth) and lin_is_ground(s.length)):
                bad.append(s)
                return s
            d, ln = s.depth, s.length
            if ln == 0:
                return EmptyPrev()
            if d <= pred_reads:
                lo = pred_reads - d
                return SWindow(lo, lo + ln)
            if d - ln >= pred_reads:
                return TWindow(d - pred_reads, ln)
            prev_len = d - pred_reads
            return Concat((TWindow(prev_len, prev_len), SWindow(0, pred_reads - (d - ln))))
        if isinstance(s, EmptyPrev):
            return s
        if isinstance(s, SByte) or isinstance(s, SWindow) or isinstance(s, EmptyCur):
            bad.append(s)  # successor's own bytes have no predecessor name
            return s
        return s

    out = transform(t, fn)
    if bad:
        return None
    return simplify_term(out)


def subst_k(t: Term, k: int) -> Term:
    """Instantiate the induction variable."""

    def fix(a: Lin) -> Lin:
        return lin_inst(a, k)

    def fn(s: Term) -> Term:
        if isinstance(s, KVar):
            return Const(k)
        if isinstance(s, AffineK):
            return Const(s.coef * k + s.const)
        if isinstance(s, SByte):
            return SByte(fix(s.index))
        if isinstance(s, TByte):
            return TByte(fix(s.depth))
        if isinstance(s, SWindow):
            return SWindow(fix(s.lo), fix(s.hi))
        if isinstance(s, TWindow):
            return TWindow(fix(s.depth), fix(s.length))
        return s

    return simplify_term(transform(t, fn))


def shift_k(t: Term, delta: int) -> Term:
    """Substitute k := k + delta, keeping the result parametric."""

    def fix(a: Lin) -> Lin:
        return lin_shift_k(a, delta)

    def fn(s: Term) -> Term:
        if isinstance(s, KVar):
            return AffineK(1, delta) if delta else s
        if isinstance(s, AffineK):
            return AffineK(s.coef, s.const + s.coef * delta)
        if isinstance(s, SByte):
            return SByte(fix(s.index))
        if isinstance(s, TByte):
            return TByte(fix(s.depth))
        if isinstance(s, SWindow):
            return SWindow(fix(s.lo), fix(s.hi))
        if isinstance(s, TWindow):
            return TWindow(fix(s.depth), fix(s.length))
        return s

    return simplify_term(transform(t, fn))


def reindex_shift(t: Term, schema: str, reads: int = 0, k: Optional[int] = None) -> Term:
    """Apply one of the supported stream renaming schemas.

    ``schema`` is ``"advance"`` (iteration output -> next entry),
    ``"pull"`` (successor entry -> predecessor frame) or ``"inst_k"``.
    """
    if schema == "advance":
        return shift_to_prev(t, reads)
    if schema == "pull":
        out = pull_to_pred(t, reads)
        if out is None:
            raise ValueError("reference cannot be relocated under this schema")
        return out
    if schema == "inst_k":
        assert k is not None
        return subst_k(t, k)
    raise ValueError(f"unknown renaming schema {schema!r}")


# ---------------------------------------------------------------------------
# Local simplification (pure rewriting; no solver)
# ---------------------------------------------------------------------------


def negate(t: Term) -> Term:
    if isinstance(t, Const):
        return FALSE if t.value else TRUE
    if isinstance(t, Binary):
        if t.op in NEG_CMP:
            return Binary(NEG_CMP[t.op], t.lhs, t.rhs)
        if t.op == "and":
            return Binary("or", negate(t.lhs), negate(t.rhs))
        if t.op == "or":
            return Binary("and", negate(t.lhs), negate(t.rhs))
    if isinstance(t, Ite):
        return Ite(t.cond, negate(t.then), negate(t.els))
    return Binary("eq", t, FALSE)


def conj(parts: Iterable[Term]) -> Term:
    out: Optional[Term] = None
    for p in parts:
        if p == TRUE:
            continue
        if p == FALSE:
            return FALSE
        out = p if out is None else Binary("and", out, p)
    return TRUE if out is None else out


def disj(parts: Iterable[Term]) -> Term:
    out: Optional[Term] = None
    for p in parts:
        if p == FALSE:
            continue
        if p == TRUE:
            return TRUE
        out = p if out is None else Binary("or", out, p)
    return FALSE if out is None else out


def _fold_arith(op: str, a: int, b: int) -> int:
    if op == "add":
        return (a + b) & MASK
    if op == "sub":
        return (a - b) & MASK
    if op == "mul":
        return (a * b) & MASK
    if op == "mod":
        return a % b if b else 0
    if op == "shl":
        return (a << (b & 31)) & MASK
    if op == "shr":
        return (a >> (b & 31)) & MASK
    raise AssertionError(op)


def _fold_cmp(op: str, a: int, b: int) -> bool:
    return {
        "eq": a == b, "ne": a != b, "lt": a < b,
        "le": a <= b, "gt": a > b, "ge": a >= b,
    }[op]


def _boolish(t: Term) -> bool:
    """Conservatively: the term always evaluates to 0 or 1."""
    if isinstance(t, Binary):
        return t.op in CMP_OPS or t.op in BOOL_OPS
    if isinstance(t, PredApp):
        return True
    if isinstance(t, Const):
        return t.value in (0, 1)
    if isinstance(t, Ite):
        return _boolish(t.then) and _boolish(t.els)
    return False


def _as_affine(t: Term) -> Optional[tuple[int, int]]:
    if isinstance(t, AffineK):
        return (t.coef, t.const)
    if isinstance(t, KVar):
        return (1, 0)
    if isinstance(t, Const):
        return (0, t.value)
    return None


def _mk_affine(coef: int, const: int) -> Term:
    if coef == 0:
        return Const(const)
    if coef == 1 and const == 0:
        return KVar()
    return AffineK(coef, const)


def simplify_term(t: Term) -> Term:
    """Canonicalize: constant folding, ite collapse, stream coalescing."""

    def fn(s: Term) -> Term:
        if isinstance(s, Binary):
            l, r = s.lhs, s.rhs
            if s.op in ("add", "sub", "mul") and not (
                isinstance(l, Const) and isinstance(r, Const)
            ):
                la, ra = _as_affine(l), _as_affine(r)
                if la is not None and ra is not None:
                    if s.op == "add":
                        return _mk_affine(la[0] + ra[0], la[1] + ra[1])
                    if s.op == "sub":
                        return _mk_affine(la[0] - ra[0], la[1] - ra[1])
                    if la[0] == 0:
                        return _mk_affine(la[1] * ra[0], la[1] * ra[1])
                    if ra[0] == 0:
                        return _mk_affine(la[0] * ra[1], la[1] * ra[1])
            if isinstance(l, Const) and isinstance(r, Const):
                if s.op in ARITH_OPS:
                    return Const(_fold_arith(s.op, l.value, r.value))
                if s.op in CMP_OPS:
                    return TRUE if _fold_cmp(s.op, l.value, r.value) else FALSE
                if s.op == "and":
                    return TRUE if (l.value and r.value) else FALSE
                if s.op == "or":
                    return TRUE if (l.value or r.value) else FALSE
            if s.op == "and":
                if l == FALSE or r == FALSE:
                    return FALSE
                if l == TRUE:
                    return r
                if r == TRUE:
                    return l
                if l == r:
                    return l
            if s.op == "or":
                if l == TRUE or r == TRUE:
                    return TRUE
                if l == FALSE:
                    return r
                if r == FALSE:
                    return l
                if l == r:
                    return l
            if s.op == "eq" and l == r and not contains_interval(s):
                return TRUE
            if s.op == "ne" and l == r and not contains_interval(s):
                return FALSE
            if s.op == "concat":
                return _coalesce(Concat((l, r)))
            # distribute comparisons over a constant-leaf ite so branch
            # conditions over state variables fold to byte tests
            if s.op in CMP_OPS and isinstance(l, Ite) and isinstance(r, Const):
                return fn(Ite(l.cond, fn(Binary(s.op, l.then, r)), fn(Binary(s.op, l.els, r))))
            if s.op in CMP_OPS and isinstance(r, Ite) and isinstance(l, Const):
                return fn(Ite(r.cond, fn(Binary(s.op, l, r.then)), fn(Binary(s.op, l, r.els))))
            return s
        if isinstance(s, Ite):
            if s.cond == TRUE:
                return s.then
            if s.cond == FALSE:
                return s.els
            if s.then == s.els:
                return s.then
            # boolean-shaped ite flattens to a formula; safe only when the
            # non-constant branch is itself 0/1-valued
            if s.then == TRUE and s.els == FALSE:
                return s.cond
            if s.then == FALSE and s.els == TRUE:
                return negate(s.cond)
            if s.then == TRUE and _boolish(s.els):
                return fn(Binary("or", s.cond, s.els))
            if s.then == FALSE and _boolish(s.els):
                return fn(Binary("and", negate(s.cond), s.els))
            if s.els == TRUE and _boolish(s.then):
                return fn(Binary("or", negate(s.cond), s.then))
            if s.els == FALSE and _boolish(s.then):
                return fn(Binary("and", s.cond, s.then))
            return s
        if isinstance(s, Concat):
            return _coalesce(s)
        if isinstance(s, SWindow) and s.lo == s.hi:
            return EmptyCur()
        if isinstance(s, TWindow) and s.length == 0:
            return EmptyPrev()
        return s

    return transform(t, fn)


def _coalesce(c: Concat) -> Term:
    """Flatten nested concats, drop empties, pack single bytes, merge
    adjacent windows of the same stream."""
    flat: list[Term] = []
    for p in c.parts:
        if isinstance(p, Concat):
            flat.extend(p.parts)
        elif isinstance(p, (EmptyPrev, EmptyCur)):
            continue
        else:
            flat.append(p)
    norm: list[Term] = []
    for p in flat:
        if isinstance(p, SByte):
            p = SWindow(p.index, lin_add(p.index, 1))
        elif isinstance(p, TByte):
            p = TWindow(p.depth, 1)
        if norm:
            q = norm[-1]
            if isinstance(q, TWindow) and isinstance(p, TWindow):
                if _lin_diff(q.depth, q.length) == _lin_diff(p.depth, 0):
                    norm[-1] = TWindow(q.depth, _lin_sum(q.length, p.length))
                    continue
            if isinstance(q, SWindow) and isinstance(p, SWindow) and q.hi == p.lo:
                norm[-1] = SWindow(q.lo, p.hi)
                continue
        norm.append(p)
    if not norm:
        return EmptyCur()
    if len(norm) == 1:
        return norm[0]
    return Concat(tuple(norm))


def _lin_sum(a: Lin, b: Lin) -> Lin:
    ac, a0 = (a.coef, a.const) if isinstance(a, KForm) else (0, a)
    bc, b0 = (b.coef, b.const) if isinstance(b, KForm) else (0, b)
    return lin(ac + bc, a0 + b0)


# ---------------------------------------------------------------------------
# Pretty-printing (ASCII rendering of the stream notation)
# ---------------------------------------------------------------------------


def _fmt_lin(a: Lin) -> str:
    return str(a)


def fmt(t: Term) -> str:
    if isinstance(t, Const):
        v = t.value
        if 32 <= v < 127 and v not in (39, 92):
            return f"'{chr(v)}'"
        return str(v)
    if isinstance(t, SByte):
        return f"s[{_fmt_lin(t.index)}]"
    if isinstance(t, TByte):
        return f"t[{_fmt_lin(t.depth)}]"
    if isinstance(t, SWindow):
        return f"s[{_fmt_lin(t.lo)}..{_fmt_lin(t.hi)})"
    if isinstance(t, TWindow):
        if t.depth == t.length:
            return f"tau^{_fmt_lin(t.length)}"
        return f"t[{_fmt_lin(t.depth)}:{_fmt_lin(t.length)}]"
    if isinstance(t, EmptyPrev):
        return "tau^0"
    if isinstance(t, EmptyCur):
        return "eps"
    if isinstance(t, Concat):
        return "(" + " . ".join(fmt(p) for p in t.parts) + ")"
    if isinstance(t, Binary):
        return f"({fmt(t.lhs)} {OP_SYMBOL[t.op]} {fmt(t.rhs)})"
    if isinstance(t, Ite):
        return f"ite({fmt(t.cond)}, {fmt(t.then)}, {fmt(t.els)})"
    if isinstance(t, Interval):
        lo = "-inf" if t.lo is None else str(t.lo)
        hi = "+inf" if t.hi is None else str(t.hi)
        return f"int({lo},{hi})"
    if isinstance(t, PredApp):
        return f"{t.name}(" + ", ".join(fmt(a) for a in t.args) + ")"
    if isinstance(t, KVar):
        return "k"
    if isinstance(t, AffineK):
        return str(KForm(t.coef, t.const))
    raise AssertionError(type(t))


# ---------------------------------------------------------------------------
# Skeletal path constraints
# ---------------------------------------------------------------------------

Decision = tuple[int, bool]
Vector = tuple[Decision, ...]


@dataclass(frozen=True)
class Skeleton:
    """A set of branch-decision vectors in canonical (sorted) form.

    Each vector lists ``(kappa, taken)`` in the order branches were met;
    set equality over vectors decides path-set equality.
    """

    vectors: frozenset[Vector]

    @staticmethod
    def of(vectors: Iterable[Vector]) -> "Skeleton":
        return Skeleton(frozenset(vectors))

    def __iter__(self) -> Iterator[Vector]:
        return iter(sorted(self.vectors))

    def __len__(self) -> int:
        return len(self.vectors)

    def __bool__(self) -> bool:
        return bool(self.vectors)

    def intersect(self, other: "Skeleton") -> "Skeleton":
        return Skeleton(self.vectors & other.vectors)

    def minus(self, other: "Skeleton") -> "Skeleton":
        return Skeleton(self.vectors - other.vectors)

    def union(self, other: "Skeleton") -> "Skeleton":
        return Skeleton(self.vectors | other.vectors)

    def label(self) -> str:
        bits = []
        for vec in sorted(self.vectors):
            bits.append("".join(f"{'+' if b else '-'}{k}" for k, b in vec))
        return "{" + ",".join(bits) + "}"


def sr1_partition(s1: Skeleton, s2: Skeleton) -> list[Skeleton]:
    """Split two path sets into the nonempty members of
    (only-first, shared, only-second)."""
    out = [s1.minus(s2), s1.intersect(s2), s2.minus(s1)]
    return [s for s in out if s]


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Environment:
    """Variable bindings plus the skeletal constraint of one iteration.

    ``values`` maps program variables to terms.  ``kappa`` maps branch
    labels (per decision vector) to the realized branch condition; it is
    keyed ``(vector, label)`` because the same branch can evaluate
    differently along different prefixes.  ``sigma_len`` is how many bytes
    the iteration read (uniform across the vectors of one state).
    """

    values: tuple[tuple[str, Term], ...]
    phi: Skeleton
    kappa: tuple[tuple[Vector, tuple[tuple[int, Term], ...]], ...]
    sigma_len: int

    @staticmethod
    def make(values: dict[str, Term], phi: Skeleton,
             kappa: dict[Vector, dict[int, Term]], sigma_len: int) -> "Environment":
        return Environment(
            tuple(sorted(values.items())),
            phi,
            tuple(sorted((v, tuple(sorted(m.items()))) for v, m in kappa.items())),
            sigma_len,
        )

    def value_map(self) -> dict[str, Term]:
        return dict(self.values)

    def kappa_map(self) -> dict[Vector, dict[int, Term]]:
        return {v: dict(m) for v, m in self.kappa}

    def key(self) -> str:
        """Canonical identity used for worklist duplicate suppression."""
        vals = ";".join(f"{n}={fmt(t)}" for n, t in self.values)
        return f"{self.phi.label()}|{vals}|r{self.sigma_len}"


def vector_constraint(vec: Vector, kmap: dict[int, Term]) -> Term:
    """Realize one decision vector: conjunction of (negated) conditions."""
    lits = []
    for kap, taken in vec:
        if kap not in kmap:
            raise UnboundBranchLabel(f"branch {kap} not bound on vector {vec}")
        cond = kmap[kap]
        lits.append(cond if taken else negate(cond))
    return simplify_term(conj(lits))


def realize(env: Environment) -> Term:
    """The real path constraint: substitute branch conditions into phi.

    Built over the decision trie so that sibling subtrees with identical
    residual constraints merge (``(a and X) or (not a and X)`` drops a).
    """
    kmaps = env.kappa_map()
    vecs = sorted(env.phi.vectors)
    if not vecs:
        return TRUE

    def build(vecs: list[Vector], depth: int) -> Term:
        if len(vecs) == 1:
            vec = vecs[0]
            return vector_constraint(vec[depth:], kmaps.get(vec, {}))
        # all vectors share decisions below `depth` up to their first split
        head = vecs[0][depth][0]
        taken = [v for v in vecs if v[depth][1]]
        nottaken = [v for v in vecs if not v[depth][1]]
        if not nottaken or not taken:
            sub = build(vecs, depth + 1)
            cond = kmaps[vecs[0]][head]
            lit = cond if taken else negate(cond)
            return simplify_term(conj([lit, sub]))
        lt = build(taken, depth + 1)
        lf = build(nottaken, depth + 1)
        if lt == lf:
            return lt
        cond = kmaps[taken[0]][head]
        return simplify_term(disj([conj([cond, lt]), conj([negate(cond), lf])]))

    return simplify_term(build(vecs, 0))
