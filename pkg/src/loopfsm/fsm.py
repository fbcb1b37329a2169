"""FSM model: nondeterministic acceptance, normalization, generation, I/O.

A state consumes a fixed window of bytes per visit (its iteration's
reads); an edge's guard constrains the source state's window, with prior
references resolved against bytes already consumed on the walk.  Edges
into final states may carry an extra guard over the final state's own
window.  States summarized by induction carry self-loops whose traversal
index binds the induction variable k; constraints downstream refer to the
most recently bound k.

Acceptance demands exact consumption: a message is accepted iff some walk
from a start to a final state partitions it completely into satisfied
windows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from . import absdom as A
from .errors import JsonSchemaError, MissingPredicateImpl

SCHEMA_VERSION = 1


@dataclass
class State:
    name: str
    start: bool = False
    final: bool = False
    reads: int = 0
    k_param: bool = False
    final_guard: Optional[A.Term] = None  # for states that are start and final
    label: str = ""


@dataclass
class Edge:
    src: str
    dst: str
    guard: A.Term
    window: int
    final_guard: Optional[A.Term] = None
    k_param: bool = False


class Fsm:
    def __init__(self):
        self.states: dict[str, State] = {}
        self.edges: list[Edge] = []
        self.stats: dict = {}

    def add_state(self, st: State):
        self.states[st.name] = st

    def add_edge(self, e: Edge):
        self.edges.append(e)

    @property
    def starts(self) -> list[State]:
        return [s for s in self.states.values() if s.start]

    @property
    def finals(self) -> list[State]:
        return [s for s in self.states.values() if s.final]

    def out_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.src == name]

    def refresh_residual_flag(self):
        res = False
        for e in self.edges:
            for g in (e.guard, e.final_guard):
                if g is None:
                    continue
                for atom in _atoms(g):
                    if A.contains_pred(atom):
                        continue
                    if A.references_tau(atom):
                        res = True
        self.stats["tau_residual"] = res

    def structurally_equal(self, other: "Fsm") -> bool:
        return _doc(self) == _doc(other)


def _atoms(t: A.Term) -> Iterator[A.Term]:
    if isinstance(t, A.Binary) and t.op in ("and", "or"):
        yield from _atoms(t.lhs)
        yield from _atoms(t.rhs)
    else:
        yield t


# ---------------------------------------------------------------------------
# Ground evaluation against a message
# ---------------------------------------------------------------------------


class _Eval:
    def __init__(self, msg: bytes, preds: dict[str, Callable], k_max: int):
        self.msg = msg
        self.preds = preds
        self.k_max = k_max
        self.out_of_range = False

    def ev(self, t: A.Term, origin: int, k: Optional[int]):
        m = self.msg

        def lin(x: A.Lin) -> Optional[int]:
            if isinstance(x, A.KForm):
                if k is None:
                    return None
                return x.coef * k + x.const
            return x

        def go(t: A.Term):
            if isinstance(t, A.Const):
                return t.value
            if isinstance(t, A.SByte):
                i = lin(t.index)
                if i is None:
                    return None
                p = origin + i
                if p < 0 or p >= len(m):
                    self.out_of_range = True
                    return None
                return m[p]
            if isinstance(t, A.TByte):
                d = lin(t.depth)
                if d is None:
                    return None
                p = origin - d
                if p < 0 or p >= len(m):
                    self.out_of_range = True
                    return None
                return m[p]
            if isinstance(t, A.SWindow):
                lo, hi = lin(t.lo), lin(t.hi)
                if lo is None or hi is None:
                    return None
                if origin + lo < 0 or origin + hi > len(m) or lo > hi:
                    self.out_of_range = True
                    return None
                return m[origin + lo:origin + hi]
            if isinstance(t, A.TWindow):
                d, ln = lin(t.depth), lin(t.length)
                if d is None or ln is None:
                    return None
                s = origin - d
                if s < 0 or ln < 0 or s + ln > len(m):
                    self.out_of_range = True
                    return None
                return m[s:s + ln]
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
            if isinstance(t, A.KVar):
                return k
            if isinstance(t, A.AffineK):
                if k is None:
                    return None
                return (t.coef * k + t.const) & A.MASK
            if isinstance(t, A.PredApp):
                args = [go(a) for a in t.args]
                if any(a is None for a in args):
                    return None
                impl = self.preds.get(t.name)
                if impl is None:
                    raise MissingPredicateImpl(t.name)
                return 1 if impl(*args) else 0
            if isinstance(t, A.Interval):
                return ("iv", t.nonce, t.lo, t.hi)
            if isinstance(t, A.Binary):
                a = go(t.lhs)
                b = go(t.rhs)
                if a is None or b is None:
                    return None
                if isinstance(a, tuple) or isinstance(b, tuple):
                    return self._interval_cmp(t.op, a, b)
                if t.op == "and":
                    return 1 if (a and b) else 0
                if t.op == "or":
                    return 1 if (a or b) else 0
                if t.op in A.ARITH_OPS:
                    return A._fold_arith(t.op, a, b)
                return 1 if A._fold_cmp(t.op, a, b) else 0
            if isinstance(t, A.Ite):
                c = go(t.cond)
                if c is None:
                    return None
                return go(t.then if c else t.els)
            return None

        return go(t)

    def _interval_cmp(self, op: str, a, b):
        """Existential comparison against a widened cell; uncertainty is
        resolved permissively, which keeps the machine an over-approximation."""
        def rng(x):
            if isinstance(x, tuple):
                lo = 0 if x[2] is None else x[2]
                hi = (1 << 32) - 1 if x[3] is None else x[3]
                return lo, hi
            return x, x

        (alo, ahi), (blo, bhi) = rng(a), rng(b)
        if op in A.ARITH_OPS:
            return ("iv", -1, None, None)
        table = {
            "eq": alo <= bhi and blo <= ahi,
            "ne": not (alo == ahi == blo == bhi),
            "lt": alo < bhi,
            "le": alo <= bhi,
            "gt": ahi > blo,
            "ge": ahi >= blo,
        }
        return 1 if table[op] else 0

    def check(self, t: A.Term, origin: int, k: Optional[int]) -> bool:
        if t is None:
            return True
        if A.references_k(t) and k is None:
            # no binding in scope: any count in range may witness it
            return any(self.ev(t, origin, kk) == 1 for kk in range(self.k_max + 1))
        v = self.ev(t, origin, k)
        if v is None:
            return False
        if isinstance(v, tuple):
            return True  # widened cell survived to the top: stay permissive
        return bool(v)


# ---------------------------------------------------------------------------
# The edge view used by simulation, generation, and evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ViewEdge:
    src: str
    dst: str
    window: int
    guard: object  # A.Term
    is_self: bool
    k_state: bool  # source is k-parameterized
    ordinal: int


@dataclass
class _View:
    states: dict[str, State]
    edges: list[ViewEdge]
    starts: list[str]
    finals: set[str]
    zero_start_finals: list[tuple[str, Optional[A.Term], int]]
    alias: dict[str, Optional[str]] = field(default_factory=dict)


def _edge_view(f: Fsm) -> _View:
    """Fold state windows into edges; materialize final windows as extra
    sink states so every constraint sits on an edge."""
    states = dict(f.states)
    edges: list[ViewEdge] = []
    finals: set[str] = set()
    alias: dict[str, Optional[str]] = {}
    ordinal = 0
    sink_cache: dict[tuple[str, str], str] = {}

    def sink_for(final_state: State, guard: Optional[A.Term]) -> str:
        gkey = A.fmt(guard) if guard is not None else "true"
        key = (final_state.name, gkey)
        if key in sink_cache:
            return sink_cache[key]
        name = f"{final_state.name}#acc{len(sink_cache)}"
        states[name] = State(name=name, final=True, reads=0)
        finals.add(name)
        alias[name] = None
        sink_cache[key] = name
        return name

    for e in f.edges:
        src = f.states[e.src]
        dst = f.states[e.dst]
        if dst.final:
            mid = f"{e.src}->{e.dst}@{ordinal}"
            states[mid] = State(name=mid, reads=dst.reads, k_param=dst.k_param)
            alias[mid] = dst.name
            edges.append(ViewEdge(e.src, mid, src.reads, e.guard,
                                  e.src == e.dst, src.k_param, ordinal))
            ordinal += 1
            sink = sink_for(dst, e.final_guard)
            edges.append(ViewEdge(mid, sink, dst.reads,
                                  e.final_guard if e.final_guard is not None else A.TRUE,
                                  False, False, ordinal))
            ordinal += 1
        else:
            edges.append(ViewEdge(e.src, e.dst, src.reads, e.guard,
                                  e.src == e.dst, src.k_param, ordinal))
            ordinal += 1

    zero_sf = []
    for s in f.states.values():
        if s.start and s.final:
            zero_sf.append((s.name, s.final_guard, s.reads))

    return _View(states, edges,
                 [s.name for s in f.states.values() if s.start],
                 finals, zero_sf, alias)


# ---------------------------------------------------------------------------
# Acceptance
# ---------------------------------------------------------------------------


def accepts(f: Fsm, msg: bytes, preds: Optional[dict[str, Callable]] = None,
            k_max: int = 16) -> bool:
    return accepts_path(f, msg, preds, k_max) is not None


def accepts_path(f: Fsm, msg: bytes, preds: Optional[dict[str, Callable]] = None,
                 k_max: int = 16) -> Optional[list[str]]:
    """Return the visited state names of the first accepting walk, or None.

    Self-loop traversals on a summarized state bind the induction variable
    to the running traversal index; leaving the state fixes it at the total
    count, and later constraints see the latest bound value.
    """
    preds = preds or {}
    ev = _Eval(msg, preds, k_max)
    view = _edge_view(f)

    for name, guard, reads in view.zero_start_finals:
        if reads == len(msg) and ev.check(guard, 0, None):
            return [name]

    by_src: dict[str, list[ViewEdge]] = {}
    for e in view.edges:
        by_src.setdefault(e.src, []).append(e)

    seen: set = set()

    def logical(name: str) -> list[str]:
        if name in view.alias:
            t = view.alias[name]
            return [t] if t is not None else []
        return [name]

    def dfs(state: str, pos: int, run: int, last_k: Optional[int],
            trail: list[str]) -> Optional[list[str]]:
        key = (state, pos, run, last_k)
        if key in seen:
            return None
        seen.add(key)
        for e in by_src.get(state, []):
            if pos + e.window > len(msg):
                continue
            kv = run if e.k_state else last_k
            if not ev.check(e.guard, pos, kv):
                continue
            npos = pos + e.window
            if e.is_self and e.k_state:
                if run + 1 > k_max:
                    continue
                r = dfs(e.dst, npos, run + 1, last_k, trail + logical(e.dst))
                if r is not None:
                    return r
                continue
            nk = run if e.k_state else last_k
            if e.dst in view.finals:
                if npos == len(msg):
                    return trail + logical(e.dst)
                continue
            r = dfs(e.dst, npos, 0, nk, trail + logical(e.dst))
            if r is not None:
                return r
        return None

    for start in sorted(view.starts):
        r = dfs(start, 0, 0, None, [start])
        if r is not None:
            return r
    return None


# ---------------------------------------------------------------------------
# Normalization (for fine-grained transition comparison)
# ---------------------------------------------------------------------------


def normalize(f: Fsm) -> "NormalFsm":
    """Edge-consuming form with disjunctions split into parallel edges and
    window-separable conjunctions split into chained edges."""
    view = _edge_view(f)
    out = NormalFsm()
    out.states = {s: State(name=s, start=(s in view.starts),
                           final=(s in view.finals),
                           k_param=view.states[s].k_param)
                  for s in view.states}
    for name, guard, reads in view.zero_start_finals:
        acc = f"{name}#acc"
        out.states[acc] = State(name=acc, final=True)
        out.edges.append(Edge(name, acc, guard if guard is not None else A.TRUE, reads))

    fresh = [0]

    def emit(src: str, dst: str, guard: A.Term, window: int):
        for dis in _split_or(guard):
            for chain in _split_window_chain(dis, window):
                cur = src
                for i, (g, w) in enumerate(chain):
                    nxt = dst
                    if i + 1 < len(chain):
                        nxt = f"n{fresh[0]}"
                        fresh[0] += 1
                        out.states[nxt] = State(name=nxt)
                    out.edges.append(Edge(cur, nxt, g, w))
                    cur = nxt

    for e in view.edges:
        emit(e.src, e.dst, e.guard, e.window)
    return out


def _split_or(t: A.Term) -> list[A.Term]:
    if isinstance(t, A.Binary) and t.op == "or":
        return _split_or(t.lhs) + _split_or(t.rhs)
    return [t]


def _split_window_chain(t: A.Term, window: int) -> list[list[tuple[A.Term, int]]]:
    """Split a conjunction over disjoint consecutive byte ranges into
    consecutive single-range constraints; fall back to one segment."""
    if window <= 1 or t == A.TRUE:
        return [[(t, window)]]
    atoms = []
    for a in _atoms_conj(t):
        rng = _sbyte_range(a)
        if rng is None:
            return [[(t, window)]]
        atoms.append((a, rng))
    if not atoms:
        return [[(t, window)]]
    # merge overlapping atom ranges into maximal bands
    bands: list[tuple[int, int]] = []
    for _a, (lo, hi) in sorted(atoms, key=lambda x: x[1]):
        if bands and lo <= bands[-1][1]:
            bands[-1] = (bands[-1][0], max(bands[-1][1], hi))
        else:
            bands.append((lo, hi))
    if len(bands) <= 1:
        return [[(t, window)]]
    segs: list[tuple[A.Term, int]] = []
    pos = 0
    for lo, hi in bands:
        if lo != pos:
            segs.append((A.TRUE, lo - pos))
        here = [a for a, (alo, ahi) in atoms if lo <= alo and ahi <= hi]
        segs.append((A.conj([_shift_sbytes(a, -lo) for a in here]), hi - lo + 1))
        pos = hi + 1
    if pos < window:
        segs.append((A.TRUE, window - pos))
    return [segs]


def _atoms_conj(t: A.Term) -> list[A.Term]:
    if isinstance(t, A.Binary) and t.op == "and":
        return _atoms_conj(t.lhs) + _atoms_conj(t.rhs)
    return [] if t == A.TRUE else [t]


def _sbyte_range(a: A.Term) -> Optional[tuple[int, int]]:
    lo, hi = None, None
    for s in A.walk(a):
        if isinstance(s, A.SByte) and A.lin_is_ground(s.index):
            lo = s.index if lo is None else min(lo, s.index)
            hi = s.index if hi is None else max(hi, s.index)
        elif isinstance(s, (A.TByte, A.TWindow, A.SWindow, A.KVar, A.AffineK, A.PredApp)):
            return None
    if lo is None:
        return None
    return (lo, hi)


def _shift_sbytes(t: A.Term, delta: int) -> A.Term:
    def fn(s: A.Term) -> A.Term:
        if isinstance(s, A.SByte) and A.lin_is_ground(s.index):
            return A.SByte(s.index + delta)
        return s

    return A.transform(t, fn)


class NormalFsm(Fsm):
    """Edge-consuming machine produced by normalize(); every final state
    has a zero window and every constraint sits on an edge."""

    def accepts(self, msg: bytes, preds=None, k_max: int = 16) -> bool:
        return self.first_path(msg, preds, k_max) is not None

    def first_path(self, msg: bytes, preds=None, k_max: int = 16) -> Optional[list[Edge]]:
        preds = preds or {}
        ev = _Eval(msg, preds, k_max)
        by_src: dict[str, list[tuple[int, Edge]]] = {}
        for i, e in enumerate(self.edges):
            by_src.setdefault(e.src, []).append((i, e))
        seen: set = set()

        def dfs(state: str, pos: int, path: list[Edge]) -> Optional[list[Edge]]:
            st = self.states[state]
            if st.final and pos == len(msg):
                return path
            key = (state, pos)
            if key in seen:
                return None
            seen.add(key)
            for _i, e in by_src.get(state, []):
                if pos + e.window > len(msg):
                    continue
                if not ev.check(e.guard, pos, None):
                    if A.references_k(e.guard):
                        pass  # ev.check already tried all bindings
                    continue
                r = dfs(e.dst, pos + e.window, path + [e])
                if r is not None:
                    return r
            return None

        for s in sorted(n for n, st in self.states.items() if st.start):
            r = dfs(s, 0, [])
            if r is not None:
                return r
        return None

    def paths(self, max_len: int) -> Iterator[list[Edge]]:
        """Start-to-final edge paths by increasing byte length, then by
        edge ordinal; cycles are cut off by the byte budget."""
        by_src: dict[str, list[tuple[int, Edge]]] = {}
        for i, e in enumerate(self.edges):
            by_src.setdefault(e.src, []).append((i, e))
        from heapq import heappush, heappop

        heap: list = []
        count = 0
        for s in sorted(n for n, st in self.states.items() if st.start):
            heappush(heap, (0, count, s, []))
            count += 1
        while heap:
            ln, _c, state, path = heappop(heap)
            if self.states[state].final:
                yield path
            if ln >= max_len:
                continue
            for _i, e in by_src.get(state, []):
                if ln + e.window <= max_len:
                    heappush(heap, (ln + e.window, count, e.dst, path + [e]))
                    count += 1


# ---------------------------------------------------------------------------
# Message generation
# ---------------------------------------------------------------------------


def generate_messages(f: Fsm, max_count: int, max_len: int,
                      preds: Optional[dict[str, Callable]] = None,
                      k_max: int = 16, seed: int = 0) -> list[bytes]:
    """Breadth-first path enumeration with per-path constraint solving.

    Every returned message is accepted by the machine; unsolvable paths
    are skipped.  Deterministic for a fixed seed.
    """
    from .solver import solve_message
    from .errors import UnsatPath

    preds = preds or {}
    if max_count <= 0:
        return []
    view = _edge_view(f)
    by_src: dict[str, list[ViewEdge]] = {}
    for e in view.edges:
        by_src.setdefault(e.src, []).append(e)

    out: list[bytes] = []
    seen: set[bytes] = set()

    for name, guard, reads in view.zero_start_finals:
        if reads <= max_len:
            try:
                m = solve_message([(guard if guard is not None else A.TRUE, 0, reads)],
                                  preds, seed)
                if len(m) == reads and accepts(f, m, preds, k_max) and m not in seen:
                    seen.add(m)
                    out.append(m)
            except UnsatPath:
                pass

    from collections import deque

    queue = deque()
    for s in sorted(view.starts):
        queue.append((s, 0, [], 0, None))  # state, bytes, steps, run, last_k
    hop_cap = max_len + len(view.states) + k_max + 4

    while queue and len(out) < max_count:
        state, ln, steps, run, last_k = queue.popleft()
        if state in view.finals:
            try:
                m = solve_message(steps, preds, seed)
            except UnsatPath:
                continue
            if len(m) == ln and m not in seen and accepts(f, m, preds, k_max):
                seen.add(m)
                out.append(m)
            continue
        if len(steps) >= hop_cap:
            continue
        for e in sorted(by_src.get(state, []), key=lambda e: e.ordinal):
            if ln + e.window > max_len:
                continue
            kv = run if e.k_state else last_k
            guard = e.guard
            if A.references_k(guard):
                guard = A.subst_k(guard, kv if kv is not None else 0)
            nsteps = steps + [(guard, ln, e.window)]
            if e.is_self and e.k_state:
                if run + 1 > k_max:
                    continue
                queue.append((e.dst, ln + e.window, nsteps, run + 1, last_k))
            else:
                nk = run if e.k_state else last_k
                queue.append((e.dst, ln + e.window, nsteps, 0, nk))
    return sorted(out, key=lambda m: (len(m), m))[:max_count]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _term_to_json(t: Optional[A.Term]):
    if t is None:
        return None

    def lin(x):
        return {"k": x.coef, "c": x.const} if isinstance(x, A.KForm) else x

    if isinstance(t, A.Const):
        return {"t": "const", "v": t.value}
    if isinstance(t, A.SByte):
        return {"t": "s", "i": lin(t.index)}
    if isinstance(t, A.TByte):
        return {"t": "p", "d": lin(t.depth)}
    if isinstance(t, A.SWindow):
        return {"t": "sw", "lo": lin(t.lo), "hi": lin(t.hi)}
    if isinstance(t, A.TWindow):
        return {"t": "pw", "d": lin(t.depth), "n": lin(t.length)}
    if isinstance(t, A.EmptyPrev):
        return {"t": "eps_p"}
    if isinstance(t, A.EmptyCur):
        return {"t": "eps_c"}
    if isinstance(t, A.Concat):
        return {"t": "cat", "parts": [_term_to_json(p) for p in t.parts]}
    if isinstance(t, A.Binary):
        return {"t": "bin", "op": t.op,
                "l": _term_to_json(t.lhs), "r": _term_to_json(t.rhs)}
    if isinstance(t, A.Ite):
        return {"t": "ite", "c": _term_to_json(t.cond),
                "then": _term_to_json(t.then), "else": _term_to_json(t.els)}
    if isinstance(t, A.Interval):
        return {"t": "int", "lo": t.lo, "hi": t.hi, "n": t.nonce}
    if isinstance(t, A.PredApp):
        return {"t": "pred", "name": t.name,
                "args": [_term_to_json(a) for a in t.args]}
    if isinstance(t, A.KVar):
        return {"t": "k"}
    if isinstance(t, A.AffineK):
        return {"t": "affk", "a": t.coef, "b": t.const}
    raise JsonSchemaError(f"unserializable term {t!r}")


def _term_from_json(d) -> Optional[A.Term]:
    if d is None:
        return None

    def lin(x):
        return A.KForm(x["k"], x["c"]) if isinstance(x, dict) else x

    try:
        tag = d["t"]
        if tag == "const":
            return A.Const(d["v"])
        if tag == "s":
            return A.SByte(lin(d["i"]))
        if tag == "p":
            return A.TByte(lin(d["d"]))
        if tag == "sw":
            return A.SWindow(lin(d["lo"]), lin(d["hi"]))
        if tag == "pw":
            return A.TWindow(lin(d["d"]), lin(d["n"]))
        if tag == "eps_p":
            return A.EmptyPrev()
        if tag == "eps_c":
            return A.EmptyCur()
        if tag == "cat":
            return A.Concat(tuple(_term_from_json(p) for p in d["parts"]))
        if tag == "bin":
            return A.Binary(d["op"], _term_from_json(d["l"]), _term_from_json(d["r"]))
        if tag == "ite":
            return A.Ite(_term_from_json(d["c"]), _term_from_json(d["then"]),
                         _term_from_json(d["else"]))
        if tag == "int":
            return A.Interval(d["lo"], d["hi"], d["n"])
        if tag == "pred":
            return A.PredApp(d["name"], tuple(_term_from_json(a) for a in d["args"]))
        if tag == "k":
            return A.KVar()
        if tag == "affk":
            return A.AffineK(d["a"], d["b"])
    except (KeyError, TypeError) as exc:
        raise JsonSchemaError(f"malformed term: {exc}") from exc
    raise JsonSchemaError(f"unknown term tag {d.get('t')!r}")


def _doc(f: Fsm) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "states": [
            {
                "name": s.name,
                "start": s.start,
                "final": s.final,
                "reads": s.reads,
                "k_param": s.k_param,
                "final_guard": _term_to_json(s.final_guard),
                "final_guard_str": A.fmt(s.final_guard) if s.final_guard is not None else None,
                "label": s.label,
            }
            for s in sorted(f.states.values(), key=lambda s: s.name)
        ],
        "transitions": [
            {
                "from": e.src,
                "to": e.dst,
                "window": e.window,
                "guard": _term_to_json(e.guard),
                "guard_str": A.fmt(e.guard),
                "final_guard": _term_to_json(e.final_guard),
                "final_guard_str": A.fmt(e.final_guard) if e.final_guard is not None else None,
                "k_param": e.k_param,
            }
            for e in f.edges
        ],
        "metadata": dict(f.stats),
    }


def export_json(f: Fsm) -> str:
    return json.dumps(_doc(f), indent=2, sort_keys=True)


def import_json(text: str) -> Fsm:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonSchemaError(str(exc)) from exc
    if not isinstance(doc, dict) or doc.get("version") != SCHEMA_VERSION:
        raise JsonSchemaError("missing or unsupported schema version")
    if "states" not in doc or "transitions" not in doc:
        raise JsonSchemaError("missing states/transitions")
    f = Fsm()
    for s in doc["states"]:
        f.add_state(State(
            name=s["name"], start=s["start"], final=s["final"],
            reads=s["reads"], k_param=s.get("k_param", False),
            final_guard=_term_from_json(s.get("final_guard")),
            label=s.get("label", ""),
        ))
    for e in doc["transitions"]:
        if e["from"] not in f.states or e["to"] not in f.states:
            raise JsonSchemaError("transition endpoint not a state")
        f.add_edge(Edge(
            src=e["from"], dst=e["to"],
            guard=_term_from_json(e["guard"]),
            window=e["window"],
            final_guard=_term_from_json(e.get("final_guard")),
            k_param=e.get("k_param", False),
        ))
    f.stats = dict(doc.get("metadata", {}))
    return f


def export_dot(f: Fsm) -> str:
    def q(s: str) -> str:
        return '"' + s.replace('"', '\\"') + '"'

    lines = ["digraph fsm {", "  rankdir=LR;"]
    for s in sorted(f.states.values(), key=lambda s: s.name):
        shape = "doublecircle" if s.final else "circle"
        extra = ""
        if s.k_param:
            extra = f"\\n(k, w={s.reads})"
        elif s.reads != 1:
            extra = f"\\nw={s.reads}"
        lines.append(f"  {q(s.name)} [shape={shape} label={q(s.name + extra)}];")
        if s.start:
            lines.append(f"  {q('entry_' + s.name)} [shape=point];")
            lines.append(f"  {q('entry_' + s.name)} -> {q(s.name)};")
    for e in f.edges:
        label = A.fmt(e.guard)
        if e.final_guard is not None and e.final_guard != A.TRUE:
            label += " / " + A.fmt(e.final_guard)
        lines.append(f"  {q(e.src)} -> {q(e.dst)} [label={q(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def program_hash(source: str) -> str:
    return hashlib.sha256(source.encode()).hexdigest()[:16]
