"""Command-line interface.

Subcommands: infer, run, gen, eval, check.  Exit codes: 0 success,
1 usage or frontend error, 2 result flagged approximate (widening or
solver-budget misses), 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import absdom as A
from . import evaluation as E
from . import fsm as F
from . import lang as L
from .engine import EngineConfig, infer_fsm
from .errors import LoopFsmError


def _engine_flags(sp: argparse.ArgumentParser):
    sp.add_argument("--induction-delay", type=int, default=3)
    sp.add_argument("--k-max", type=int, default=16)
    sp.add_argument("--solver-budget", type=int, default=400_000)
    sp.add_argument("--guard", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)


def _cfg(args) -> EngineConfig:
    return EngineConfig(
        induction_delay=args.induction_delay,
        k_max=args.k_max,
        solver_budget=args.solver_budget,
        guard=args.guard,
        seed=args.seed,
    )


def _load_program(path: str) -> L.Program:
    with open(path, "r", encoding="utf-8") as fh:
        return L.parse_program(fh.read())


def _load_fsm(path: str) -> F.Fsm:
    with open(path, "r", encoding="utf-8") as fh:
        return F.import_json(fh.read())


def cmd_infer(args) -> int:
    p = _load_program(args.program)
    t0 = time.monotonic()
    machine = infer_fsm(p, _cfg(args))
    dt = time.monotonic() - t0
    with open(args.program, "r", encoding="utf-8") as fh:
        machine.stats["source_hash"] = F.program_hash(fh.read())
    machine.stats["config"] = vars(_cfg(args))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(F.export_json(machine))
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(F.export_dot(machine))
    summary = {
        "states": len(machine.states),
        "transitions": len(machine.edges),
        "widening_used": bool(machine.stats.get("widening_used")),
        "approximate": bool(machine.stats.get("approximate")),
        "wall_time_s": round(dt, 3),
    }
    print(json.dumps(summary))
    return 2 if summary["widening_used"] or summary["approximate"] else 0


def cmd_run(args) -> int:
    p = _load_program(args.program)
    msg = L.parse_message(args.input)
    preds = _trivial_preds(p)
    res = L.concrete_run(p, msg, preds, guard=args.guard)
    verdict = "accepted" if res.accepted else "rejected"
    if args.json_out:
        print(json.dumps({"verdict": verdict, "consumed": res.bytes_consumed,
                          "nonterminated": res.nonterminated}))
    else:
        print(verdict)
    return 0


def cmd_gen(args) -> int:
    machine = _load_fsm(args.fsm)
    preds = {}
    for name in _pred_names(machine):
        preds[name] = lambda *a: True
    msgs = F.generate_messages(machine, args.count, args.max_len, preds,
                               k_max=args.k_max, seed=args.seed)
    for m in msgs:
        print(m.hex())
    return 0


def cmd_eval(args) -> int:
    inferred = _load_fsm(args.inferred)
    gt = _load_fsm(args.ground_truth)
    preds = {name: (lambda *a: True) for name in _pred_names(gt) | _pred_names(inferred)}
    report = E.precision_recall(inferred, gt, cap=args.cap, preds=preds)
    if args.json_out:
        print(json.dumps(report.to_json()))
    else:
        print(report.table())
    return 0


def cmd_check(args) -> int:
    p = _load_program(args.program)
    machine = infer_fsm(p, _cfg(args))
    preds = _trivial_preds(p)
    alphabet = L.parse_message(args.alphabet)
    report = E.language_equiv(p, machine, alphabet, args.max_len, preds,
                              k_max=args.k_max)
    print(json.dumps(report.to_json()))
    if not report.sound:
        return 3
    if not report.complete and not report.widening_used:
        return 3
    return 2 if report.widening_used else 0


def _trivial_preds(p: L.Program):
    return {name: (lambda *a: True) for name in p.extern_preds}


def _pred_names(machine: F.Fsm) -> set[str]:
    names: set[str] = set()
    for e in machine.edges:
        for g in (e.guard, e.final_guard):
            if g is None:
                continue
            for s in A.walk(g):
                if isinstance(s, A.PredApp):
                    names.add(s.name)
    return names


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="loopfsm",
                                 description="Lift parsing loops to state machines")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("infer", help="infer an FSM from a .psl program")
    sp.add_argument("program")
    sp.add_argument("--json", help="write the FSM as JSON")
    sp.add_argument("--dot", help="write the FSM as DOT")
    _engine_flags(sp)
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("run", help="run a message through the loop")
    sp.add_argument("program")
    sp.add_argument("--input", required=True, help="ASCII or 0x-prefixed hex")
    sp.add_argument("--guard", type=int, default=4)
    sp.add_argument("--json", dest="json_out", action="store_true")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("gen", help="generate accepted messages from an FSM")
    sp.add_argument("fsm")
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--max-len", type=int, default=8)
    sp.add_argument("--k-max", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_gen)

    sp = sub.add_parser("eval", help="precision/recall against a ground truth")
    sp.add_argument("inferred")
    sp.add_argument("ground_truth")
    sp.add_argument("--cap", type=int, default=10_000)
    sp.add_argument("--json", dest="json_out", action="store_true")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("check", help="compare loop and inferred FSM languages")
    sp.add_argument("program")
    sp.add_argument("--alphabet", required=True, help="ASCII or 0x-prefixed hex")
    sp.add_argument("--max-len", type=int, default=5)
    _engine_flags(sp)
    sp.set_defaults(fn=cmd_check)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except LoopFsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
