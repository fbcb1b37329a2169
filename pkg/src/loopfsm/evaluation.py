"""Ground-truth comparison: transition-level precision and recall, plus
brute-force language equivalence between a loop and its inferred machine.

Both machines are normalized first so that disjunctive constraints become
parallel transitions and window-separable conjunctions become chains;
correctness of a transition is then judged in the context of a full
start-to-final path.  For each ground-truth path we solve its constraints
to a witness message, parse the message with the machine under evaluation,
and compare the two paths position by position:

* a parsed transition counts as correct when its constraint is equivalent
  to the aligned ground-truth constraint (precision side);
* a ground-truth transition counts as covered when it implies the aligned
  parsed constraint (recall side), so looser-but-compatible transitions
  cost precision, not recall;
* an unparsable witness counts every ground-truth transition on that path
  as missed and none as false.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import absdom as A
from . import fsm as F
from . import lang as L
from .errors import BudgetExceeded, UnsatPath
from .solver import Solver, solve_message


@dataclass
class PathDetail:
    message: bytes
    gt_len: int
    parsed_len: Optional[int]
    correct: int
    false: int
    covered: int
    ambiguous: bool = False


@dataclass
class EvalReport:
    precision: float
    recall: float
    paths_compared: int
    unparsable: int
    ambiguity_count: int
    details: list[PathDetail] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "paths_compared": self.paths_compared,
            "unparsable": self.unparsable,
            "ambiguity_count": self.ambiguity_count,
        }

    def table(self) -> str:
        lines = [
            f"{'paths':>10} {'precision':>10} {'recall':>10} {'unparsable':>11}",
            f"{self.paths_compared:>10} {self.precision:>10.3f} "
            f"{self.recall:>10.3f} {self.unparsable:>11}",
        ]
        return "\n".join(lines)


def enumerate_gt_paths(gt: F.NormalFsm, cap: int, max_len: int = 16):
    """Start-to-final paths of the normalized ground truth, shortest byte
    length first, in deterministic order, at most ``cap`` of them."""
    out = []
    for path in gt.paths(max_len):
        out.append(path)
        if len(out) >= cap:
            break
    return out


def _rebase(t: A.Term) -> A.Term:
    """Strip window positions so constraints compare as byte patterns."""
    lo = None
    for s in A.walk(t):
        if isinstance(s, A.SByte) and A.lin_is_ground(s.index):
            lo = s.index if lo is None else min(lo, s.index)
    if lo:
        return F._shift_sbytes(t, -lo)
    return t


def _solve_path(path: list[F.Edge], preds, seed: int = 0) -> Optional[bytes]:
    steps = []
    off = 0
    for e in path:
        g = e.guard
        if A.references_k(g):
            g = A.subst_k(g, 1)
        steps.append((g, off, e.window))
        off += e.window
    try:
        return solve_message(steps, preds, seed)
    except UnsatPath:
        return None


def precision_recall(
    inferred: F.Fsm,
    gt: F.Fsm,
    cap: int = 10_000,
    preds: Optional[dict[str, Callable]] = None,
    max_len: int = 16,
    k_max: int = 16,
) -> EvalReport:
    preds = preds or {}
    solver = Solver()
    ninf = inferred if isinstance(inferred, F.NormalFsm) else F.normalize(inferred)
    ngt = gt if isinstance(gt, F.NormalFsm) else F.normalize(gt)

    details: list[PathDetail] = []
    sum_correct = sum_false = sum_covered = sum_gt = 0
    unparsable = 0
    ambiguity = 0

    for path in enumerate_gt_paths(ngt, cap, max_len):
        msg = _solve_path(path, preds)
        gt_real = [e for e in path if e.window > 0]
        sum_gt += len(gt_real)
        if msg is None:
            continue  # the ground-truth path itself has no witness: skip
        parsed = ninf.first_path(msg, preds, k_max)
        if parsed is None:
            unparsable += 1
            details.append(PathDetail(msg, len(gt_real), None, 0, 0, 0))
            continue
        parsed_real = [e for e in parsed if e.window > 0]
        correct = false = covered = 0
        for i, pe in enumerate(parsed_real):
            pg = _ground_guard(pe, msg, parsed_real, i, k_max, preds)
            if i < len(gt_real):
                gg = _ground_guard(gt_real[i], msg, gt_real, i, k_max, preds)
                if gt_real[i].window == pe.window and solver.equivalent(pg, gg):
                    correct += 1
                else:
                    false += 1
            else:
                false += 1
        for i, ge in enumerate(gt_real):
            if i < len(parsed_real):
                pg = _ground_guard(parsed_real[i], msg, parsed_real, i, k_max, preds)
                gg = _ground_guard(ge, msg, gt_real, i, k_max, preds)
                if ge.window == parsed_real[i].window and solver.implies(gg, pg):
                    covered += 1
        sum_correct += correct
        sum_false += false
        sum_covered += covered
        details.append(PathDetail(msg, len(gt_real), len(parsed_real),
                                  correct, false, covered))

    denom_p = sum_correct + sum_false
    precision = (sum_correct / denom_p) if denom_p else 1.0
    recall = (sum_covered / sum_gt) if sum_gt else 1.0
    return EvalReport(precision, recall, len(details) + 0,
                      unparsable, ambiguity, details)


def _ground_guard(e: F.Edge, msg: bytes, path: list[F.Edge], idx: int,
                  k_max: int, preds) -> A.Term:
    """The edge guard as a rebased byte-pattern; prior references and
    predicates are resolved against the witness so patterns stay comparable."""
    g = e.guard
    if A.references_k(g):
        # pick the binding that the witness satisfies
        off = sum(p.window for p in path[:idx])
        ev = F._Eval(msg, preds, k_max)
        for k in range(k_max + 1):
            if ev.check(A.subst_k(g, k), off, None):
                g = A.subst_k(g, k)
                break
        else:
            g = A.subst_k(g, 0)
    if A.references_tau(g) or A.contains_pred(g):
        off = sum(p.window for p in path[:idx])
        ev = F._Eval(msg, preds, k_max)
        g = _resolve_nonlocal(g, ev, off)
    return _rebase(A.simplify_term(g))


def _resolve_nonlocal(t: A.Term, ev: F._Eval, origin: int) -> A.Term:
    """Replace prior-byte references and predicate applications by the
    constants they take on the witness message."""

    def fn(s: A.Term) -> A.Term:
        if isinstance(s, (A.TByte,)) and A.lin_is_ground(s.depth):
            v = ev.ev(s, origin, None)
            return A.Const(v) if isinstance(v, int) else s
        if isinstance(s, A.PredApp):
            v = ev.ev(s, origin, None)
            return A.Const(v) if isinstance(v, int) else s
        return s

    return A.transform(t, fn)


# ---------------------------------------------------------------------------
# Language equivalence at desk scale
# ---------------------------------------------------------------------------


@dataclass
class Disagreement:
    message: bytes
    kind: str  # "soundness-violation" | "completeness-gap"


@dataclass
class EquivReport:
    checked: int
    disagreements: list[Disagreement]
    widening_used: bool

    @property
    def sound(self) -> bool:
        return not any(d.kind == "soundness-violation" for d in self.disagreements)

    @property
    def complete(self) -> bool:
        return not any(d.kind == "completeness-gap" for d in self.disagreements)

    def to_json(self) -> dict:
        return {
            "checked": self.checked,
            "sound": self.sound,
            "complete": self.complete,
            "widening_used": self.widening_used,
            "disagreements": [
                {"message": d.message.hex(), "kind": d.kind}
                for d in self.disagreements[:50]
            ],
        }


def language_equiv(
    p: L.Program,
    f: F.Fsm,
    alphabet: bytes,
    max_len: int,
    preds: Optional[dict[str, Callable]] = None,
    k_max: int = 16,
    budget: int = 2_000_000,
) -> EquivReport:
    """Exhaustively compare loop acceptance and machine acceptance."""
    import itertools

    preds = preds or {}
    total = sum(len(alphabet) ** l for l in range(max_len + 1))
    if total > budget:
        raise BudgetExceeded(f"{total} strings exceeds budget {budget}")
    out: list[Disagreement] = []
    checked = 0
    for l in range(max_len + 1):
        for combo in itertools.product(alphabet, repeat=l):
            m = bytes(combo)
            checked += 1
            loop_ok = L.concrete_run(p, m, preds).accepted
            fsm_ok = F.accepts(f, m, preds, k_max)
            if loop_ok and not fsm_ok:
                out.append(Disagreement(m, "soundness-violation"))
            elif fsm_ok and not loop_ok:
                out.append(Disagreement(m, "completeness-gap"))
    return EquivReport(checked, out, bool(f.stats.get("widening_used")))
