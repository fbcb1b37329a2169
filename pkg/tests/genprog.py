"""Seeded random generator of small parsing-loop programs.

The emitted programs stay inside the analyzed language: integer variables,
one top-level loop, at most two reads per iteration, branching on
comparisons between the read byte, the state variables, and small
constants.  Exit and fail leaves are sprinkled so most programs accept a
nonempty, nontrivial language over a small alphabet.
"""

from __future__ import annotations

import random

ALPHABET = bytes([0, 1, 2, 3])


def _expr(rng: random.Random, vars_: list[str]) -> str:
    r = rng.random()
    if r < 0.35:
        return str(rng.randint(0, 4))
    if r < 0.6:
        return rng.choice(vars_)
    a, b = rng.choice(vars_), rng.choice(vars_ + [str(rng.randint(1, 3))])
    op = rng.choice(["+", "+", "-", "%"])
    if op == "%":
        b = str(rng.randint(2, 5))
    return f"({a} {op} {b})"


def _cond(rng: random.Random, vars_: list[str]) -> str:
    a = rng.choice(vars_)
    op = rng.choice(["==", "==", "!=", "<", "<=", ">", ">="])
    if rng.random() < 0.6:
        b = str(rng.randint(0, 4))
    else:
        b = rng.choice([v for v in vars_ if v != a] or ["1"])
    return f"{a} {op} {b}"


def _leaf(rng: random.Random, vars_: list[str], allow_exit: bool) -> list[str]:
    out = []
    r = rng.random()
    if r < 0.12:
        out.append("fail;")
        return out
    if allow_exit and r < 0.24:
        out.append("exit;")
        return out
    for _ in range(rng.randint(0, 2)):
        v = rng.choice(["s", "t"])
        out.append(f"{v} = {_expr(rng, vars_)};")
    return out


def generate_program(seed: int) -> str:
    rng = random.Random(seed)
    lines = []
    lines.append(f"init {{ s = {rng.randint(0, 3)}; t = {rng.randint(0, 3)}; }}")
    body: list[str] = []
    branches = [0]
    max_branches = 8

    def brace(stmts: list[str]) -> str:
        return "{ " + " ".join(stmts) + " }" if stmts else "{ }"

    def tree(depth: int, vars_: list[str], allow_exit: bool) -> list[str]:
        if depth <= 0 or branches[0] >= max_branches or rng.random() < 0.3:
            return _leaf(rng, vars_, allow_exit)
        branches[0] += 1
        then = tree(depth - 1, vars_, allow_exit)
        els = tree(depth - 1, vars_, allow_exit)
        return [f"if ({_cond(rng, vars_)}) {brace(then)} else {brace(els)}"]

    # an exit guard before any read keeps acceptance decidable byte-exactly
    if rng.random() < 0.75 and branches[0] < max_branches:
        branches[0] += 1
        body.append(f"if (s == {rng.randint(0, 4)}) {{ exit; }}")
    body.append("b = read();")
    vars_ = ["s", "t", "b"]
    body += tree(2, vars_, allow_exit=False)
    if rng.random() < 0.4 and branches[0] < max_branches:
        # a second, conditioned read exercises unequal read counts
        branches[0] += 1
        inner = _leaf(rng, vars_ + ["c"], allow_exit=False)
        body.append(
            f"if ({_cond(rng, vars_)}) {{ c = read(); "
            + " ".join(inner) + " } else { }"
        )
    body += tree(1, vars_, allow_exit=True)
    lines.append("loop {")
    lines += ["  " + b for b in body]
    lines.append("}")
    return "\n".join(lines) + "\n"
