"""Worklist inference of a constraint-labeled FSM from a parsing loop.

Each analyzed loop iteration contributes a state identified by the set of
decision vectors it covered.  The worklist carries (state, output
environment) pairs; analyzing the next iteration from such a pair yields
successor path sets, which are split so that

* exiting vectors form final states,
* vectors with different read counts or recursive-definition signatures
  are kept apart, and
* overlaps with existing states are resolved into disjoint path sets,

and then merged so that

* states with the same path set are one state (environments are deduped),
* families of parallel transitions between a pair of states are
  summarized, by guess-and-check induction over the environment sequence
  when possible and by interval widening otherwise, and
* transition constraints end up over each state's own byte window, prior
  references being hoisted backwards where that is exactly possible.

The result is deliberately nondeterministic and uncompressed beyond these
rules: no determinization or minimization is attempted.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import absdom as A
from . import lang as L
from .errors import ConfigError
from .fsm import Edge, Fsm, State
from .interp import (
    IterationResult,
    VectorOutcome,
    abstract_iteration,
    advance_frame,
    init_env,
)
from .solver import Solver


@dataclass
class EngineConfig:
    induction_delay: int = 3
    k_max: int = 16
    solver_budget: int = 400_000
    guard: int = 4
    max_steps: int = 600
    vector_limit: int = 4096
    seed: int = 0

    def validate(self):
        if self.induction_delay < 2:
            raise ConfigError("induction_delay must be at least 2")
        if self.k_max < 1 or self.max_steps < 1:
            raise ConfigError("k_max and max_steps must be positive")


@dataclass
class _StateRec:
    sid: int
    skeleton: A.Skeleton
    reads: int
    start: bool = False
    final: bool = False
    k_param: bool = False
    start_final_guard: Optional[A.Term] = None


def _instance_keys(env: A.Environment, k_max: int) -> set[str]:
    """Worklist keys of the ground instances of a parametric environment."""
    out = set()
    for k in range(k_max + 1):
        values = {n: A.subst_k(t, k) for n, t in env.value_map().items()}
        inst = A.Environment.make(values, env.phi, {}, env.sigma_len)
        out.add(inst.key())
    return out


@dataclass
class _EdgeRec:
    src: int
    dst: int
    env: Optional[A.Environment]  # source-side output environment
    tgt_vectors: list[VectorOutcome]
    order: int
    k_param: bool = False
    guard_override: Optional[A.Term] = None  # set by widening
    final_vector: Optional[VectorOutcome] = None  # for edges into finals

    def env_key(self) -> str:
        return self.env.key() if self.env is not None else f"widened#{self.order}"


@dataclass
class _Part:
    skeleton: A.Skeleton
    vectors: list[VectorOutcome]
    final: bool
    reads: int


def _merge_values(vectors: list[VectorOutcome]) -> dict[str, A.Term]:
    """Join vector bindings over the decision trie with ite nodes."""
    common = set(vectors[0].values)
    for v in vectors[1:]:
        common &= set(v.values)

    def build(vecs: list[VectorOutcome], depth: int, var: str) -> A.Term:
        if len(vecs) == 1:
            return vecs[0].values[var]
        kap = vecs[0].decisions[depth][0]
        taken = [v for v in vecs if v.decisions[depth][1]]
        nottaken = [v for v in vecs if not v.decisions[depth][1]]
        if not taken or not nottaken:
            return build(vecs, depth + 1, var)
        lt = build(taken, depth + 1, var)
        lf = build(nottaken, depth + 1, var)
        if lt == lf:
            return lt
        return A.simplify_term(A.Ite(taken[0].kappa[kap], lt, lf))

    vecs = sorted(vectors, key=lambda v: v.decisions)
    return {var: build(vecs, 0, var) for var in sorted(common)}


def _part_env(part: _Part) -> A.Environment:
    values = _merge_values(part.vectors)
    kappa = {v.decisions: v.kappa for v in part.vectors}
    return A.Environment.make(values, part.skeleton, kappa, part.reads)


def _flat_and(t: A.Term) -> list[A.Term]:
    if isinstance(t, A.Binary) and t.op == "and":
        return _flat_and(t.lhs) + _flat_and(t.rhs)
    return [t]


def _flat_or(t: A.Term) -> list[A.Term]:
    if isinstance(t, A.Binary) and t.op == "or":
        return _flat_or(t.lhs) + _flat_or(t.rhs)
    return [t]


def _is_prior_only(atom: A.Term) -> bool:
    return (
        A.references_tau(atom)
        and not A.references_sigma(atom)
        and not A.contains_pred(atom)
        and not A.references_k(atom)
    )


def _atom_split(constraint: A.Term):
    """Split a conjunction into (prior-only atoms, everything else)."""
    tau, rest = [], []
    for atom in _flat_and(constraint):
        if atom == A.TRUE:
            continue
        (tau if _is_prior_only(atom) else rest).append(atom)
    return tau, rest


def _to_dnf(t: A.Term, cap: int = 64) -> Optional[list[list[A.Term]]]:
    """Expand to a list of conjunctions of atoms, or None if it blows up."""
    if isinstance(t, A.Binary) and t.op == "or":
        out = []
        for d in _flat_or(t):
            sub = _to_dnf(d, cap)
            if sub is None:
                return None
            out.extend(sub)
            if len(out) > cap:
                return None
        return out
    if isinstance(t, A.Binary) and t.op == "and":
        left = _to_dnf(t.lhs, cap)
        right = _to_dnf(t.rhs, cap)
        if left is None or right is None or len(left) * len(right) > cap:
            return None
        return [l + r for l in left for r in right]
    return [[t]]


class Engine:
    def __init__(self, program: L.Program, cfg: Optional[EngineConfig] = None):
        self.p = program
        self.cfg = cfg or EngineConfig()
        self.cfg.validate()
        self.solver = Solver(self.cfg.solver_budget, self.cfg.k_max)
        self.states: dict[A.Skeleton, _StateRec] = {}
        self.by_sid: dict[int, _StateRec] = {}
        self.split_map: dict[int, list[int]] = {}
        self.edges: list[_EdgeRec] = []
        self.worklist: deque[tuple[int, A.Environment]] = deque()
        self.seen: set[tuple[int, str]] = set()
        self.suppressed: set[tuple[int, str]] = set()
        self.next_sid = 0
        self.next_order = 0
        self.widening_used = False
        self.approximate = False
        self.iterations = 0
        self.feasible_vectors: set[A.Vector] = set()
        self.override_guards: dict[str, A.Term] = {}

    # -- state bookkeeping ---------------------------------------------------

    def _new_state(self, skel: A.Skeleton, reads: int, final: bool) -> _StateRec:
        st = _StateRec(self.next_sid, skel, reads, final=final)
        self.next_sid += 1
        self.states[skel] = st
        self.by_sid[st.sid] = st
        return st

    def _ensure_state(self, part: _Part) -> _StateRec:
        st = self.states.get(part.skeleton)
        if st is None:
            st = self._new_state(part.skeleton, part.reads, part.final)
        return st

    def _split_existing(self, st: _StateRec, pieces: list[A.Skeleton]) -> list[_StateRec]:
        """Replace st with disjoint sub-states, rewiring edges and pending
        work; incoming edges are duplicated, outgoing environments are
        restricted and their values simplified under the piece constraint."""
        del self.states[st.skeleton]
        del self.by_sid[st.sid]
        subs: list[_StateRec] = []
        for skel in pieces:
            sub = self._new_state(skel, st.reads, st.final)
            sub.start = st.start
            sub.k_param = st.k_param
            sub.start_final_guard = st.start_final_guard
            subs.append(sub)
        self.split_map[st.sid] = [s.sid for s in subs]
        new_edges: list[_EdgeRec] = []
        for e in self.edges:
            stage = [e]
            if e.dst == st.sid:
                stage = []
                for sub in subs:
                    kept = [v for v in e.tgt_vectors if v.decisions in sub.skeleton.vectors]
                    if not kept:
                        if e.guard_override is None:
                            continue
                        kept = []  # widened edge: keep an over-approximate copy
                    fv = e.final_vector
                    if fv is not None and fv.decisions not in sub.skeleton.vectors:
                        continue
                    stage.append(_EdgeRec(e.src, sub.sid, e.env, kept, e.order,
                                          e.k_param, e.guard_override, fv))
            out = []
            for e2 in stage:
                if e2.src == st.sid:
                    for sub in subs:
                        env2 = self._restrict_env(e2.env, sub.skeleton)
                        if env2 is None and e2.env is not None:
                            continue
                        out.append(_EdgeRec(sub.sid, e2.dst, env2, e2.tgt_vectors,
                                            e2.order, e2.k_param, e2.guard_override,
                                            e2.final_vector))
                else:
                    out.append(e2)
            new_edges.extend(out)
        self.edges = new_edges
        items = list(self.worklist)
        self.worklist.clear()
        for sid, env in items:
            if sid != st.sid:
                self.worklist.append((sid, env))
                continue
            for sub in subs:
                env2 = self._restrict_env(env, sub.skeleton)
                if env2 is not None:
                    self.seen.add((sub.sid, env2.key()))
                    self.worklist.append((sub.sid, env2))
        return subs

    def _resolve_sid(self, sid: int) -> list[int]:
        if sid in self.by_sid:
            return [sid]
        out: list[int] = []
        for child in self.split_map.get(sid, []):
            out.extend(self._resolve_sid(child))
        return out

    def _restrict_env(self, env: Optional[A.Environment], skel: A.Skeleton) -> Optional[A.Environment]:
        if env is None:
            return None
        kappa = {v: m for v, m in env.kappa_map().items() if v in skel.vectors}
        if not kappa:
            return None
        sub = A.Environment.make(env.value_map(), skel, kappa, env.sigma_len)
        phi = A.realize(sub)
        values = {n: self.solver.simplify_value(t, phi) for n, t in sub.value_map().items()}
        return A.Environment.make(values, skel, kappa, env.sigma_len)

    # -- splitting -------------------------------------------------------------

    def _group(self, res: IterationResult) -> list[_Part]:
        groups: dict[tuple, list[VectorOutcome]] = {}
        for v in res.vectors:
            key = (v.exited, v.reads, None if v.exited else v.recursive)
            groups.setdefault(key, []).append(v)
        return [
            _Part(A.Skeleton.of(v.decisions for v in vecs), vecs, exited, reads)
            for (exited, reads, _r), vecs in sorted(
                groups.items(), key=lambda kv: (kv[0][0], kv[0][1], str(kv[0][2]))
            )
        ]

    def _make_parts(self, res: IterationResult) -> list[_Part]:
        """Group vectors, then resolve overlaps against existing states,
        splitting either side until all path sets are disjoint."""
        for v in res.vectors:
            self.feasible_vectors.add(v.decisions)
        out: list[_Part] = []
        for part in self._group(res):
            frags = [part]
            stable = False
            while not stable:
                stable = True
                for st in list(self.states.values()):
                    nxt: list[_Part] = []
                    changed = False
                    for f in frags:
                        inter = f.skeleton.intersect(st.skeleton)
                        if not inter or (
                            inter.vectors == st.skeleton.vectors
                            and inter.vectors == f.skeleton.vectors
                        ):
                            nxt.append(f)
                            continue
                        if inter.vectors != st.skeleton.vectors:
                            self._split_existing(st, [inter, st.skeleton.minus(inter)])
                            changed = True
                        if inter.vectors != f.skeleton.vectors:
                            inside = [v for v in f.vectors if v.decisions in inter.vectors]
                            outside = [v for v in f.vectors if v.decisions not in inter.vectors]
                            nxt.append(_Part(inter, inside, f.final, f.reads))
                            nxt.append(_Part(f.skeleton.minus(inter), outside, f.final, f.reads))
                            changed = True
                        else:
                            nxt.append(f)
                    frags = nxt
                    if changed:
                        stable = False
                        break
            out.extend(frags)
        return out

    # -- transitions and the worklist ---------------------------------------------

    def _add_edge(self, src: _StateRec, env: A.Environment, part: _Part,
                  tgt: _StateRec, k_param: bool,
                  override: Optional[A.Term] = None) -> None:
        if tgt.final:
            for v in part.vectors:
                rec = _EdgeRec(src.sid, tgt.sid, env, [v], self.next_order,
                               k_param, guard_override=override, final_vector=v)
                if not self._dup_edge(rec):
                    self.edges.append(rec)
                    self.next_order += 1
        else:
            rec = _EdgeRec(src.sid, tgt.sid, env, list(part.vectors),
                           self.next_order, k_param, guard_override=override)
            if not self._dup_edge(rec):
                self.edges.append(rec)
                self.next_order += 1

    def _dup_edge(self, rec: _EdgeRec) -> bool:
        rv = rec.final_vector.decisions if rec.final_vector else None
        for e in self.edges:
            ev = e.final_vector.decisions if e.final_vector else None
            if e.src == rec.src and e.dst == rec.dst and ev == rv \
                    and e.env_key() == rec.env_key():
                return True
        return False

    def _enqueue(self, st: _StateRec, env: A.Environment):
        key = (st.sid, env.key())
        if key in self.seen or key in self.suppressed:
            return
        self.seen.add(key)
        self.worklist.append((st.sid, env))

    # -- main loop -------------------------------------------------------------------

    def run(self) -> Fsm:
        entry0 = init_env(self.p)
        res0 = abstract_iteration(entry0, self.p, self.solver, self.cfg.vector_limit)
        self.iterations += 1
        for part in self._make_parts(res0):
            st = self._ensure_state(part)
            st.start = True
            if part.final:
                guards = []
                for v in part.vectors:
                    guards.append(A.simplify_term(v.constraint()))
                g = A.simplify_term(A.disj(guards))
                st.start_final_guard = (
                    g if st.start_final_guard is None
                    else A.simplify_term(A.disj([st.start_final_guard, g]))
                )
            else:
                self._enqueue(st, _part_env(part))

        steps = 0
        while True:
            if not self.worklist:
                if not self._merge_pass():
                    break
                continue
            steps += 1
            if steps > self.cfg.max_steps:
                self.approximate = True
                break
            sid, env = self.worklist.popleft()
            if (sid, env.key()) in self.suppressed:
                continue
            self._process(sid, env)
            self._merge_pass()

        return self._finish()

    def _requeue_restricted(self, sid: int, env: A.Environment):
        for sub_sid in self._resolve_sid(sid):
            sub = self.by_sid[sub_sid]
            env2 = self._restrict_env(env, sub.skeleton)
            if env2 is not None:
                self.seen.discard((sub.sid, env2.key()))
                self._enqueue(sub, env2)

    def _process(self, sid: int, env: A.Environment):
        if sid not in self.by_sid:
            self._requeue_restricted(sid, env)
            return
        entry = advance_frame(env.value_map(), env.sigma_len)
        res = abstract_iteration(entry, self.p, self.solver, self.cfg.vector_limit)
        self.iterations += 1
        parts = self._make_parts(res)
        if sid not in self.by_sid:
            # the source itself was split while resolving overlaps; redo the
            # analysis from the restricted environments
            self._requeue_restricted(sid, env)
            return
        src = self.by_sid[sid]
        has_k = _env_has_k(env)
        override = self.override_guards.get(env.key())
        for part in parts:
            tgt = self._ensure_state(part)
            self._add_edge(src, env, part, tgt, k_param=has_k, override=override)
            if part.final:
                continue
            out_env = _part_env(part)
            if src.k_param and tgt.sid == src.sid:
                continue  # the summarized family is already closed
            self._enqueue(tgt, out_env)

    # -- merging -----------------------------------------------------------------------

    def _pending_family(self):
        delay = self.cfg.induction_delay
        by_pair: dict[tuple[int, int], list[_EdgeRec]] = {}
        for e in self.edges:
            if e.guard_override is None and e.env is not None and not e.k_param:
                by_pair.setdefault((e.src, e.dst), []).append(e)
        for (s, d), recs in sorted(by_pair.items()):
            if s not in self.by_sid:
                continue
            keys: list[str] = []
            for e in sorted(recs, key=lambda e: e.order):
                if e.env_key() not in keys:
                    keys.append(e.env_key())
            if len(keys) >= delay:
                return s, keys[-delay:]
        return None

    def _merge_pass(self) -> bool:
        found = self._pending_family()
        if found is None:
            return False
        sid, keys = found
        src = self.by_sid[sid]
        family = self._env_family(sid, keys)
        if family is None:
            return False
        if not self._try_induction(src, family):
            self._widen(src, family)
        return True

    def _env_family(self, sid: int, keys: list[str]) -> Optional[list[A.Environment]]:
        envs: dict[str, A.Environment] = {}
        for e in self.edges:
            if e.src == sid and e.env is not None:
                envs.setdefault(e.env.key(), e.env)
        if any(k not in envs for k in keys):
            return None
        return [envs[k] for k in keys]

    # -- merging rule: induction ----------------------------------------------------

    def _refine_pure(self, parts: list[_Part]) -> list[_Part]:
        """SR1-style refinement against existing states without mutating them."""
        out: list[_Part] = []
        for part in parts:
            frags = [part]
            for st in self.states.values():
                nxt: list[_Part] = []
                for f in frags:
                    inter = f.skeleton.intersect(st.skeleton)
                    if not inter or inter.vectors == f.skeleton.vectors:
                        nxt.append(f)
                        continue
                    inside = [v for v in f.vectors if v.decisions in inter.vectors]
                    outside = [v for v in f.vectors if v.decisions not in inter.vectors]
                    nxt.append(_Part(inter, inside, f.final, f.reads))
                    nxt.append(_Part(f.skeleton.minus(inter), outside, f.final, f.reads))
                frags = nxt
            out.extend(frags)
        return out

    def _try_induction(self, src: _StateRec, family: list[A.Environment]) -> bool:
        entries = [advance_frame(e.value_map(), e.sigma_len) for e in family]
        guessed = guess_induction(entries)
        if guessed is None:
            return False
        param_res = abstract_iteration(guessed, self.p, self.solver, self.cfg.vector_limit)
        self.iterations += 1
        parts = self._refine_pure(self._group(param_res))
        closed = False
        for part in parts:
            if part.final:
                continue
            if part.skeleton.vectors == src.skeleton.vectors:
                out_entry = advance_frame(_merge_values(part.vectors), part.reads)
                expect = {v: A.shift_k(t, 1) for v, t in guessed.items()}
                if _values_equal(out_entry, expect):
                    closed = True
            elif self.states.get(part.skeleton) is None:
                return False  # summary would spawn unexplored shapes: refuse
        if not closed:
            return False

        fam_keys = {e.key() for e in family}
        self.edges = [e for e in self.edges
                      if not (e.src == src.sid and e.env is not None
                              and e.env.key() in fam_keys)]
        for key in fam_keys:
            self.suppressed.add((src.sid, key))
        src.k_param = True

        parts = self._make_parts(param_res)
        param_env = None
        for part in parts:
            if part.skeleton.vectors == src.skeleton.vectors:
                param_env = _part_env(part)
        if param_env is None:
            return False
        for part in parts:
            tgt = self._ensure_state(part)
            out_env = _part_env(part)
            if _env_has_k(out_env):
                # ground iterates of the summary are subsumed; retire
                # pending work and edges that carry them
                inst = _instance_keys(out_env, self.cfg.k_max)
                for key in inst:
                    self.suppressed.add((tgt.sid, key))
                self.edges = [e for e in self.edges
                              if not (e.src == tgt.sid and e.env is not None
                                      and e.env.key() in inst)]
            self._add_edge(src, param_env, part, tgt, k_param=True)
            if not part.final and tgt.sid != src.sid:
                self._enqueue(tgt, out_env)
        return True

    # -- merging rule: widening -------------------------------------------------------

    def _widen(self, src: _StateRec, family: list[A.Environment]):
        self.widening_used = True
        names = set(family[0].value_map())
        for env in family[1:]:
            names &= set(env.value_map())
        folded: dict[str, tuple[Optional[int], Optional[int]]] = {}
        for env in family:
            phi = A.realize(env)
            for name in names:
                iv = self._interval_of(env.value_map()[name], phi)
                folded[name] = iv if name not in folded else _widen_iv(folded[name], iv)
        intervals: dict[str, A.Term] = {}
        for name in sorted(names):
            lo, hi = folded[name]
            if lo is not None and lo == hi:
                intervals[name] = A.Const(lo)
            else:
                intervals[name] = A.Interval.fresh(lo, hi)

        guard = self._widened_guard(family)
        merged = A.Environment.make(intervals, src.skeleton,
                                    {v: {} for v in src.skeleton.vectors},
                                    family[0].sigma_len)
        self.override_guards[merged.key()] = guard
        fam_keys = {e.key() for e in family}
        kept_dst: set[int] = set()
        new_edges = []
        for e in self.edges:
            if e.src == src.sid and e.env is not None and e.env.key() in fam_keys:
                if e.dst not in kept_dst:
                    kept_dst.add(e.dst)
                    new_edges.append(_EdgeRec(e.src, e.dst, merged, e.tgt_vectors,
                                              e.order, False, guard, e.final_vector))
                continue
            new_edges.append(e)
        self.edges = new_edges
        for key in fam_keys:
            self.suppressed.add((src.sid, key))
        if merged.key() not in fam_keys:
            self._enqueue(src, merged)

    def _interval_of(self, val: A.Term, phi: A.Term) -> tuple[Optional[int], Optional[int]]:
        if A.is_stream(val) or A.contains_pred(val):
            return (None, None)
        return (self.solver.minimize(val, phi), self.solver.maximize(val, phi))

    def _widened_guard(self, family: list[A.Environment]) -> A.Term:
        """Per-position byte intervals folded over the family constraints."""
        reads = family[0].sigma_len
        parts = []
        for i in range(reads):
            lo = hi = None
            ok = True
            for env in family:
                phi = A.realize(env)
                l = self.solver.minimize(A.SByte(i), phi)
                h = self.solver.maximize(A.SByte(i), phi)
                if l is None or h is None:
                    ok = False
                    break
                lo = l if lo is None else min(lo, l)
                hi = h if hi is None else max(hi, h)
            if ok and (lo, hi) != (0, 255):
                atoms = []
                if lo > 0:
                    atoms.append(A.Binary("ge", A.SByte(i), A.Const(lo)))
                if hi < 255:
                    atoms.append(A.Binary("le", A.SByte(i), A.Const(hi)))
                parts.append(A.conj(atoms))
        return A.conj(parts)

    # -- assembling the machine ----------------------------------------------------------

    def _finish(self) -> Fsm:
        fsm = Fsm()
        fsm.stats.update(
            widening_used=self.widening_used,
            approximate=self.approximate,
            iterations=self.iterations,
            feasible_vectors=len(self.feasible_vectors),
            syntactic_paths=self.p.syntactic_paths(),
        )
        live = set()
        incoming = {e.dst for e in self.edges}
        for st in self.by_sid.values():
            if st.start or st.sid in incoming:
                live.add(st.sid)
        name_of: dict[int, str] = {}
        for st in sorted(self.by_sid.values(), key=lambda s: s.sid):
            if st.sid not in live:
                continue
            name = f"S{st.sid}"
            name_of[st.sid] = name
            fsm.add_state(State(
                name=name,
                start=st.start,
                final=st.final,
                reads=st.reads,
                k_param=st.k_param,
                final_guard=st.start_final_guard if (st.start and st.final) else None,
                label=st.skeleton.label(),
            ))
        for e in sorted(self.edges, key=lambda e: e.order):
            if e.src not in name_of or e.dst not in name_of:
                continue
            guard, final_guard = self._edge_guards(e)
            fsm.add_edge(Edge(
                src=name_of[e.src],
                dst=name_of[e.dst],
                guard=guard,
                window=self.by_sid[e.src].reads,
                final_guard=final_guard,
                k_param=e.k_param or A.references_k(guard)
                or (final_guard is not None and A.references_k(final_guard)),
            ))
        _hoist_entry_facts(fsm, self.solver)
        for e in fsm.edges:
            e.guard = self.solver.simplify(e.guard, A.TRUE)
        fsm.refresh_residual_flag()
        return fsm

    def _edge_guards(self, e: _EdgeRec) -> tuple[A.Term, Optional[A.Term]]:
        src = self.by_sid[e.src]
        if e.guard_override is not None:
            # widened family: target-entry refinements no longer apply
            g = A.simplify_term(e.guard_override)
            fg = A.TRUE if e.final_vector is not None else None
            return g, fg
        base = A.realize(e.env)
        pulls: list[A.Term] = []
        final_guard: Optional[A.Term] = None
        if e.final_vector is not None:
            tau, rest = _atom_split(e.final_vector.constraint())
            keep = list(rest)
            for a in tau:
                pulled = A.pull_to_pred(a, src.reads)
                if pulled is None:
                    keep.append(a)  # stays in the target frame
                else:
                    pulls.append(pulled)
            final_guard = A.simplify_term(A.conj(keep))
        else:
            per_vec = []
            for v in e.tgt_vectors:
                tau, _rest = _atom_split(v.constraint())
                pulled = [A.pull_to_pred(a, src.reads) for a in tau]
                if any(x is None for x in pulled):
                    per_vec = []
                    break
                per_vec.append(A.conj(pulled))
            if per_vec:
                pulls = [A.disj(per_vec)]
        guard = self.solver.simplify(A.simplify_term(A.conj([base] + pulls)), A.TRUE)
        if final_guard is not None:
            final_guard = self.solver.simplify(final_guard, A.TRUE)
        return guard, final_guard


def _env_has_k(env: A.Environment) -> bool:
    return any(A.references_k(t) for _n, t in env.values)


def _values_equal(a: dict[str, A.Term], b: dict[str, A.Term]) -> bool:
    names = set(a) | set(b)
    for n in names:
        ta, tb = a.get(n), b.get(n)
        if ta is None or tb is None:
            return False
        if A.simplify_term(ta) != A.simplify_term(tb):
            return False
    return True


# ---------------------------------------------------------------------------
# Induction guessing / checking
# ---------------------------------------------------------------------------


def guess_induction(entries: list[dict[str, A.Term]]) -> Optional[dict[str, A.Term]]:
    """Guess a k-parametric environment from an ordered iterate sequence.

    Recognizes constants affine in the iterate index, stream windows whose
    depth and length grow affinely, and congruent structure over those.
    The first member anchors k = 0.  Returns None when some variable does
    not fit, in which case the caller falls back to widening.
    """
    names = set(entries[0])
    for e in entries[1:]:
        if set(e) != names:
            return None
    out: dict[str, A.Term] = {}
    for n in sorted(names):
        u = _unify([e[n] for e in entries])
        if u is None:
            return None
        out[n] = u
    return out


def _unify(seq: list[A.Term]) -> Optional[A.Term]:
    first = seq[0]
    if all(t == first for t in seq[1:]):
        return first
    if len({type(t) for t in seq}) != 1:
        return None
    if isinstance(first, A.Const):
        fit = A.lin_fit([t.value for t in seq])
        if fit is None:
            return None
        return A.AffineK(fit.coef, fit.const) if isinstance(fit, A.KForm) else A.Const(fit)
    if isinstance(first, A.TByte):
        d = _unify_lin([t.depth for t in seq])
        return A.TByte(d) if d is not None else None
    if isinstance(first, A.SByte):
        d = _unify_lin([t.index for t in seq])
        return A.SByte(d) if d is not None else None
    if isinstance(first, A.TWindow):
        d = _unify_lin([t.depth for t in seq])
        ln = _unify_lin([t.length for t in seq])
        return A.TWindow(d, ln) if d is not None and ln is not None else None
    if isinstance(first, A.SWindow):
        lo = _unify_lin([t.lo for t in seq])
        hi = _unify_lin([t.hi for t in seq])
        return A.SWindow(lo, hi) if lo is not None and hi is not None else None
    if isinstance(first, A.Binary):
        if any(t.op != first.op for t in seq):
            return None
        l = _unify([t.lhs for t in seq])
        r = _unify([t.rhs for t in seq])
        return A.Binary(first.op, l, r) if l is not None and r is not None else None
    if isinstance(first, A.Ite):
        c = _unify([t.cond for t in seq])
        th = _unify([t.then for t in seq])
        el = _unify([t.els for t in seq])
        if c is None or th is None or el is None:
            return None
        return A.Ite(c, th, el)
    if isinstance(first, A.Concat):
        if any(len(t.parts) != len(first.parts) for t in seq):
            return None
        parts = []
        for i in range(len(first.parts)):
            u = _unify([t.parts[i] for t in seq])
            if u is None:
                return None
            parts.append(u)
        return A.Concat(tuple(parts))
    if isinstance(first, A.PredApp):
        if any(t.name != first.name or len(t.args) != len(first.args) for t in seq):
            return None
        args = []
        for i in range(len(first.args)):
            u = _unify([t.args[i] for t in seq])
            if u is None:
                return None
            args.append(u)
        return A.PredApp(first.name, tuple(args))
    return None


def _unify_lin(seq: list[A.Lin]) -> Optional[A.Lin]:
    if any(isinstance(x, A.KForm) for x in seq):
        return None
    return A.lin_fit(list(seq))


def check_induction(param_entry: dict[str, A.Term], p: L.Program,
                    solver: Solver, skeleton: A.Skeleton,
                    vector_limit: int = 4096) -> bool:
    """Re-run the iteration from a parametric entry: the hypothesis holds
    iff the vectors of the given path set reappear and their joint output,
    advanced one frame, equals the entry with k shifted by one."""
    res = abstract_iteration(param_entry, p, solver, vector_limit)
    self_vecs = [v for v in res.vectors if v.decisions in skeleton.vectors]
    if A.Skeleton.of(v.decisions for v in self_vecs).vectors != skeleton.vectors:
        return False
    if not self_vecs:
        return False
    out_entry = advance_frame(_merge_values(self_vecs), self_vecs[0].reads)
    expect = {v: A.shift_k(t, 1) for v, t in param_entry.items()}
    return _values_equal(out_entry, expect)


def _widen_iv(a: tuple[Optional[int], Optional[int]],
              b: tuple[Optional[int], Optional[int]]):
    """int(a1,b1) widened by int(a2,b2): bounds that grew become infinite."""
    a1, b1 = a
    a2, b2 = b
    lo = None if (a1 is None or a2 is None or a1 > a2) else a1
    hi = None if (b1 is None or b2 is None or b1 < b2) else b1
    return (lo, hi)


# ---------------------------------------------------------------------------
# Prior-reference elimination on the finished machine
# ---------------------------------------------------------------------------


def _factor_prior(guard: A.Term, solver: Solver):
    """Factor a guard into (prior-only, rest) verified equivalent, or None."""
    dnf = _to_dnf(A.simplify_term(guard))
    if dnf is None:
        return None
    hs, gs = [], []
    for cube in dnf:
        h_atoms = [a for a in cube if _is_prior_only(a)]
        g_atoms = [a for a in cube if not _is_prior_only(a)]
        hs.append(A.conj(h_atoms))
        gs.append(A.conj(g_atoms))
    h = A.simplify_term(A.disj(hs))
    g = A.simplify_term(A.disj(gs))
    if h == A.TRUE:
        return (A.TRUE, guard)
    if not solver.equivalent(guard, A.conj([h, g])):
        return None
    return (h, g)


def _hoist_entry_facts(fsm: Fsm, solver: Solver, rounds: int = 3):
    """Move a state's entry facts off its outgoing guards onto its incoming
    edges, where they constrain the predecessor's own bytes.

    Applied only when every outgoing guard factors with the same prior-only
    fact (so the fact is an entry invariant of the state) and the pulled
    form is prior-free for every predecessor; window predicates under an
    induction variable are untouched by construction.
    """
    for _ in range(rounds):
        changed = False
        for state in list(fsm.states.values()):
            out_edges = [e for e in fsm.edges if e.src == state.name]
            in_edges = [e for e in fsm.edges if e.dst == state.name]
            if not out_edges or not in_edges or state.start:
                continue
            factored = []
            facts = []
            ok = True
            for e in out_edges:
                fac = _factor_prior(e.guard, solver)
                if fac is None:
                    ok = False
                    break
                factored.append((e, fac))
                facts.append(fac[0])
            if not ok:
                continue
            if all(f == A.TRUE for f in facts):
                continue
            fact0 = facts[0]
            if not all(solver.equivalent(f, fact0) for f in facts[1:]):
                continue
            moves = []
            for e in in_edges:
                pred = fsm.states[e.src]
                pulled = A.pull_to_pred(fact0, pred.reads)
                if pulled is None or A.references_tau(pulled):
                    moves = None
                    break
                moves.append((e, pulled))
            if moves is None:
                continue
            for e, (h, g) in factored:
                e.guard = A.simplify_term(g)
            for e, pulled in moves:
                e.guard = A.simplify_term(A.conj([e.guard, pulled]))
            changed = True
        if not changed:
            break


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def infer_fsm(p: L.Program, cfg: Optional[EngineConfig] = None) -> Fsm:
    """Run the full inference pipeline on a parsed program."""
    return Engine(p, cfg).run()
