"""Concrete bounded interpreter and randomized verdict cross-validation.

The interpreter runs a deterministic loop from an exact state until the
guard fails or a fuel budget runs out. Cross-validation samples integer
states from every certified region of an analysis report and checks the
verdicts against real runs: a run from a TERMINATING region that exhausts
its fuel, or a run from a NON_TERMINATING region that stops, is reported
as a contradiction. The oracle refutes; it never certifies.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .linarith import Conj, Dnf, Rat, VarId, conj_and
from .loopspec import Deterministic, LoopSpec, RelationalUnsupported, Semantics

if TYPE_CHECKING:  # pragma: no cover - import cycle guard
    from .analyzer import AnalysisReport, CaseNode

SAMPLE_BOX = 64
_ATTEMPT_FACTOR = 64
_INT64_LIMIT = 2**62


@dataclass(frozen=True)
class Terminated:
    steps: int


@dataclass(frozen=True)
class FuelExhausted:
    fuel: int


RunOutcome = Terminated | FuelExhausted


@dataclass(frozen=True)
class Contradiction:
    region: Conj
    expected: str  # "TERMINATING" | "NON_TERMINATING"
    state: tuple[tuple[VarId, Rat], ...]
    outcome: RunOutcome


def _check_state(spec: LoopSpec, state: Mapping[VarId, Rat]) -> dict[VarId, Rat]:
    env: dict[VarId, Rat] = {}
    for v in spec.vars:
        if v not in state:
            raise ValueError(f"state missing variable {v}")
        val = Rat(state[v])
        if spec.semantics is Semantics.INT and val.denominator != 1:
            raise ValueError(f"non-integral value {val} for {v} under int semantics")
        env[v] = val
    return env


def run_concrete(spec: LoopSpec, state: Mapping[VarId, Rat], fuel: int) -> RunOutcome:
    """Iterate the loop from an exact state; deterministic updates only."""
    if not isinstance(spec.updates, Deterministic):
        raise RelationalUnsupported("concrete execution needs deterministic updates")
    env = _check_state(spec, state)
    updates = spec.updates.as_map()

    # Fast path: integral program and state run on machine integers.
    integral = all(v.denominator == 1 for v in env.values()) and all(
        t.constant.denominator == 1 and all(c.denominator == 1 for _, c in t.coeffs)
        for t in updates.values()
    )
    if integral:
        return _run_int(spec, env, fuel)

    for step in range(fuel):
        if not spec.guard.satisfied_by(env):
            return Terminated(step)
        env = {v: updates[v].evaluate(env) for v in spec.vars}
    return FuelExhausted(fuel)


def _compile_guard(spec: LoopSpec, index: dict[VarId, int]):
    # Atom constants may be fractional; scale by the (positive) denominator
    # so the check stays in exact integer arithmetic.
    compiled = []
    for disjunct in spec.guard.disjuncts:
        atoms = []
        for a in disjunct.atoms:
            coeffs = tuple((index[v], int(c)) for v, c in a.term.coeffs)
            const = a.term.constant
            atoms.append((coeffs, const.numerator, const.denominator, a.op.value))
        compiled.append(atoms)
    return compiled


def _guard_holds(compiled, vals: list) -> bool:
    for atoms in compiled:
        ok = True
        for coeffs, num, den, op in atoms:
            total = num
            for i, c in coeffs:
                total += c * vals[i] * den
            if op == "<=":
                ok = total <= 0
            elif op == "<":
                ok = total < 0
            else:
                ok = total == 0
            if not ok:
                break
        if ok:
            return True
    return False


def _run_int(spec: LoopSpec, env: dict[VarId, Rat], fuel: int) -> RunOutcome:
    index = {v: i for i, v in enumerate(spec.vars)}
    guard = _compile_guard(spec, index)
    updates = spec.updates.as_map()  # type: ignore[union-attr]
    rules = [
        (tuple((index[v2], int(c)) for v2, c in updates[v].coeffs), int(updates[v].constant))
        for v in spec.vars
    ]
    vals = [int(env[v]) for v in spec.vars]
    for step in range(fuel):
        if not _guard_holds(guard, vals):
            return Terminated(step)
        vals = [sum(c * vals[i] for i, c in coeffs) + const for coeffs, const in rules]
    return FuelExhausted(fuel)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


def _sample_region(
    spec: LoopSpec, region: Conj, samples: int, rng: random.Random
) -> list[dict[VarId, Rat]]:
    """Rejection-sample up to `samples` integer states of region /\ guard."""
    out: list[dict[VarId, Rat]] = []
    attempts = samples * _ATTEMPT_FACTOR
    for _ in range(attempts):
        if len(out) >= samples:
            break
        env = {v: Rat(rng.randint(-SAMPLE_BOX, SAMPLE_BOX)) for v in spec.vars}
        if region.satisfied_by(env) and spec.guard.satisfied_by(env):
            out.append(env)
    return out


def _batch_exhausts(spec: LoopSpec, states: list[dict[VarId, Rat]], fuel: int) -> list[int]:
    """Indices of states that terminate within fuel (vectorized run).

    All sampled states advance in lockstep on an int64 matrix; rows whose
    guard fails are frozen and reported. Values nearing the int64 range
    fall back to the exact per-state interpreter.
    """
    n = len(spec.vars)
    index = {v: i for i, v in enumerate(spec.vars)}
    updates = spec.updates.as_map()  # type: ignore[union-attr]
    matrix = np.zeros((n, n), dtype=np.int64)
    shift = np.zeros(n, dtype=np.int64)
    for r, v in enumerate(spec.vars):
        term = updates[v]
        if term.constant.denominator != 1 or any(c.denominator != 1 for _, c in term.coeffs):
            return [i for i, st in enumerate(states) if isinstance(run_concrete(spec, st, fuel), Terminated)]
        shift[r] = int(term.constant)
        for v2, c in term.coeffs:
            matrix[r, index[v2]] = int(c)

    from .linarith import RelOp

    guard_rows = []
    for disjunct in spec.guard.disjuncts:
        rows = []
        for a in disjunct.atoms:
            vec = np.zeros(n, dtype=np.int64)
            for v2, c in a.term.coeffs:
                vec[index[v2]] = int(c)
            const = a.term.constant
            rows.append((vec, int(const.numerator), int(const.denominator), a.op))
        guard_rows.append(rows)

    state = np.array([[int(st[v]) for v in spec.vars] for st in states], dtype=np.int64)
    active = np.ones(len(states), dtype=bool)
    terminated: list[int] = []

    def guard_mask(mat: np.ndarray) -> np.ndarray:
        hold = np.zeros(mat.shape[0], dtype=bool)
        for rows in guard_rows:
            disj = np.ones(mat.shape[0], dtype=bool)
            for vec, num, den, op in rows:
                val = (mat @ vec) * den + num  # exact given the overflow guard
                if op is RelOp.LE:
                    disj &= val <= 0
                elif op is RelOp.LT:
                    disj &= val < 0
                else:
                    disj &= val == 0
            hold |= disj
        return hold

    for _ in range(fuel):
        if not active.any():
            break
        holds = guard_mask(state[active])
        if not holds.all():
            idx = np.flatnonzero(active)
            stopped = idx[~holds]
            terminated.extend(int(i) for i in stopped)
            active[stopped] = False
            if not active.any():
                break
        live = state[active]
        nxt = live @ matrix.T + shift
        if np.abs(nxt).max(initial=0) > _INT64_LIMIT:
            # Exact fallback for the remaining live rows.
            for i in np.flatnonzero(active):
                if isinstance(run_concrete(spec, states[int(i)], fuel), Terminated):
                    terminated.append(int(i))
            return sorted(terminated)
        state[active] = nxt
    return sorted(terminated)


def cross_validate(
    spec: LoopSpec,
    report: AnalysisReport,
    samples: int,
    fuel: int,
    seed: int,
) -> list[Contradiction]:
    """Check certified report regions against concrete runs.

    Samples integer states in [-64, 64]^n from every TERMINATING and
    NON_TERMINATING leaf region (conjoined with the guard). The returned
    list is empty exactly when no sampled run contradicts its verdict.
    """
    if not isinstance(spec.updates, Deterministic):
        raise RelationalUnsupported("cross-validation needs deterministic updates")
    from .analyzer import CaseStatus, iter_leaves

    rng = random.Random(seed)
    contradictions: list[Contradiction] = []
    for leaf in iter_leaves(report.root):
        if leaf.status not in (CaseStatus.TERMINATING, CaseStatus.NON_TERMINATING):
            continue
        states = _sample_region(spec, leaf.pre, samples, rng)
        if not states:
            continue
        if leaf.status is CaseStatus.TERMINATING:
            for st in states:
                outcome = run_concrete(spec, st, fuel)
                if isinstance(outcome, FuelExhausted):
                    contradictions.append(
                        Contradiction(
                            leaf.pre,
                            "TERMINATING",
                            tuple((v, st[v]) for v in spec.vars),
                            outcome,
                        )
                    )
        else:
            for i in _batch_exhausts(spec, states, fuel):
                st = states[i]
                outcome = run_concrete(spec, st, fuel)
                contradictions.append(
                    Contradiction(
                        leaf.pre,
                        "NON_TERMINATING",
                        tuple((v, st[v]) for v in spec.vars),
                        outcome,
                    )
                )
    return contradictions
