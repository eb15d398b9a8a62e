"""Exact linear rational arithmetic over named variables.

Terms, atomic constraints, polyhedral conjunctions and disjunctive normal
forms, with satisfiability, entailment, substitution and Fourier-Motzkin
variable elimination. All values are immutable and every operation is
deterministic: variables are ordered by (name, primed), disjuncts keep
construction order, and atoms are normalized on construction so that
formula equality is syntactic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Rat = Fraction

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class InternalInvariantError(RuntimeError):
    """A solver postcondition failed; results downstream cannot be trusted."""


# Observational counters, read by the analyzer for report statistics.
counters = {"fm_eliminations": 0, "entailment_checks": 0}


def snapshot_counters() -> dict[str, int]:
    return dict(counters)


class RelOp(Enum):
    """Relation of a normalized atom against zero: term <op> 0."""

    LE = "<="
    LT = "<"
    EQ = "="


@dataclass(frozen=True, order=True)
class VarId:
    """A program variable, optionally in its post-state (primed) form."""

    name: str
    primed: bool = False

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")

    def primed_var(self) -> VarId:
        return VarId(self.name, True)

    def base_var(self) -> VarId:
        return VarId(self.name, False)

    def __str__(self) -> str:
        return self.name + ("'" if self.primed else "")


def _fmt_rat(q: Rat) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class LinTerm:
    """A linear expression sum(coeff * var) + constant with rational coefficients.

    Zero coefficients are never stored and entries are kept sorted by
    variable, so structural equality coincides with semantic equality.
    """

    coeffs: tuple[tuple[VarId, Rat], ...] = ()
    constant: Rat = Rat(0)

    @staticmethod
    def of(coeffs: Mapping[VarId, Rat | int] | None = None, constant: Rat | int = 0) -> LinTerm:
        items = sorted((v, Rat(c)) for v, c in (coeffs or {}).items() if c != 0)
        return LinTerm(tuple(items), Rat(constant))

    @staticmethod
    def var(v: VarId, coeff: Rat | int = 1) -> LinTerm:
        return LinTerm.of({v: Rat(coeff)})

    @staticmethod
    def const(c: Rat | int) -> LinTerm:
        return LinTerm((), Rat(c))

    def coeff(self, v: VarId) -> Rat:
        for var, c in self.coeffs:
            if var == v:
                return c
        return Rat(0)

    def variables(self) -> tuple[VarId, ...]:
        return tuple(v for v, _ in self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def _as_dict(self) -> dict[VarId, Rat]:
        return dict(self.coeffs)

    def __add__(self, other: LinTerm) -> LinTerm:
        acc = self._as_dict()
        for v, c in other.coeffs:
            acc[v] = acc.get(v, Rat(0)) + c
        return LinTerm.of(acc, self.constant + other.constant)

    def __sub__(self, other: LinTerm) -> LinTerm:
        return self + other.scale(Rat(-1))

    def __neg__(self) -> LinTerm:
        return self.scale(Rat(-1))

    def scale(self, k: Rat | int) -> LinTerm:
        k = Rat(k)
        if k == 0:
            return LinTerm.const(0)
        return LinTerm(tuple((v, c * k) for v, c in self.coeffs), self.constant * k)

    def drop(self, v: VarId) -> LinTerm:
        return LinTerm(tuple((u, c) for u, c in self.coeffs if u != v), self.constant)

    def evaluate(self, env: Mapping[VarId, Rat]) -> Rat:
        total = self.constant
        for v, c in self.coeffs:
            total += c * env[v]
        return total

    def substitute(self, subst: Mapping[VarId, LinTerm]) -> LinTerm:
        acc: dict[VarId, Rat] = {}
        constant = self.constant
        for v, c in self.coeffs:
            rep = subst.get(v)
            if rep is None:
                acc[v] = acc.get(v, Rat(0)) + c
            else:
                for u, d in rep.coeffs:
                    acc[u] = acc.get(u, Rat(0)) + c * d
                constant += c * rep.constant
        return LinTerm.of(acc, constant)

    def render(self) -> str:
        if not self.coeffs:
            return _fmt_rat(self.constant)
        parts: list[str] = []
        for v, c in self.coeffs:
            mag = abs(c)
            body = str(v) if mag == 1 else f"{_fmt_rat(mag)}*{v}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        if self.constant != 0:
            c = self.constant
            parts.append(f"+ {_fmt_rat(c)}" if c > 0 else f"- {_fmt_rat(-c)}")
        return " ".join(parts)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Atom:
    """A normalized atomic constraint: term <= 0, term < 0 or term = 0.

    Construction scales the term so that all variable coefficients are
    integers with gcd 1 (the constant may stay fractional) and flips
    equalities so the first nonzero coefficient in variable order is
    positive. Normalizing a normalized atom is the identity.
    """

    term: LinTerm
    op: RelOp

    def __post_init__(self) -> None:
        term = self.term
        if term.coeffs:
            denom_lcm = math.lcm(*(c.denominator for _, c in term.coeffs))
            num_gcd = math.gcd(*(abs(c.numerator * (denom_lcm // c.denominator)) for _, c in term.coeffs))
            scale = Rat(denom_lcm, num_gcd)
            if self.op is RelOp.EQ and term.coeffs[0][1] < 0:
                scale = -scale
            if scale != 1:
                object.__setattr__(self, "term", term.scale(scale))

    def satisfied_by(self, env: Mapping[VarId, Rat]) -> bool:
        val = self.term.evaluate(env)
        if self.op is RelOp.LE:
            return val <= 0
        if self.op is RelOp.LT:
            return val < 0
        return val == 0

    def is_trivially_true(self) -> bool:
        if self.term.coeffs:
            return False
        c = self.term.constant
        if self.op is RelOp.LE:
            return c <= 0
        if self.op is RelOp.LT:
            return c < 0
        return c == 0

    def is_trivially_false(self) -> bool:
        return not self.term.coeffs and not self.is_trivially_true()

    def negated(self) -> tuple[Atom, ...]:
        if self.op is RelOp.LE:
            return (Atom(-self.term, RelOp.LT),)
        if self.op is RelOp.LT:
            return (Atom(-self.term, RelOp.LE),)
        return (Atom(self.term, RelOp.LT), Atom(-self.term, RelOp.LT))

    def substitute(self, subst: Mapping[VarId, LinTerm]) -> Atom:
        return Atom(self.term.substitute(subst), self.op)

    def variables(self) -> tuple[VarId, ...]:
        return self.term.variables()

    def render(self) -> str:
        pos: dict[VarId, Rat] = {}
        neg: dict[VarId, Rat] = {}
        for v, c in self.term.coeffs:
            (pos if c > 0 else neg)[v] = abs(c)
        const = self.term.constant
        sym = {RelOp.LE: "<=", RelOp.LT: "<", RelOp.EQ: "="}[self.op]
        if pos:
            left = LinTerm.of(pos)
            right = LinTerm.of(neg, -const)
            return f"{left.render()} {sym} {right.render()}"
        if neg:
            # Only negated variables: flip so a variable leads,
            # "-x + 1 <= 0" renders as "x >= 1".
            flipped = {RelOp.LE: ">=", RelOp.LT: ">", RelOp.EQ: "="}[self.op]
            return f"{LinTerm.of(neg).render()} {flipped} {LinTerm.const(const).render()}"
        return f"{LinTerm.const(const).render()} {sym} 0"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Conj:
    """A conjunction of atoms (a convex polyhedron). Empty means true."""

    atoms: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        seen: list[Atom] = []
        for a in self.atoms:
            if a not in seen:
                seen.append(a)
        if len(seen) != len(self.atoms):
            object.__setattr__(self, "atoms", tuple(seen))

    def is_true(self) -> bool:
        return not self.atoms

    def variables(self) -> tuple[VarId, ...]:
        out: set[VarId] = set()
        for a in self.atoms:
            out.update(a.variables())
        return tuple(sorted(out))

    def satisfied_by(self, env: Mapping[VarId, Rat]) -> bool:
        return all(a.satisfied_by(env) for a in self.atoms)

    def substitute(self, subst: Mapping[VarId, LinTerm]) -> Conj:
        return Conj(tuple(a.substitute(subst) for a in self.atoms))

    def render(self) -> str:
        return " and ".join(a.render() for a in self.atoms) if self.atoms else "true"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Dnf:
    """A disjunction of conjunctions. Empty means false."""

    disjuncts: tuple[Conj, ...] = ()

    @staticmethod
    def of(*conjs: Conj) -> Dnf:
        return Dnf(tuple(conjs))

    def is_false(self) -> bool:
        return not self.disjuncts

    def is_trivially_true(self) -> bool:
        return any(c.is_true() for c in self.disjuncts)

    def variables(self) -> tuple[VarId, ...]:
        out: set[VarId] = set()
        for c in self.disjuncts:
            out.update(c.variables())
        return tuple(sorted(out))

    def satisfied_by(self, env: Mapping[VarId, Rat]) -> bool:
        return any(c.satisfied_by(env) for c in self.disjuncts)

    def substitute(self, subst: Mapping[VarId, LinTerm]) -> Dnf:
        return Dnf(tuple(c.substitute(subst) for c in self.disjuncts))

    def render(self) -> str:
        if not self.disjuncts:
            return "false"
        return " or ".join(c.render() for c in self.disjuncts)

    def __str__(self) -> str:
        return self.render()


TRUE = Conj(())
DNF_TRUE = Dnf((TRUE,))
DNF_FALSE = Dnf(())


def conj_and(*parts: Conj | Atom) -> Conj:
    atoms: list[Atom] = []
    for p in parts:
        if isinstance(p, Atom):
            atoms.append(p)
        else:
            atoms.extend(p.atoms)
    return Conj(tuple(atoms))


@dataclass(frozen=True)
class SatResult:
    """Either Sat with a rational model or Unsat (witness is None)."""

    witness: Mapping[VarId, Rat] | None

    @property
    def is_sat(self) -> bool:
        return self.witness is not None

    @staticmethod
    def sat(witness: Mapping[VarId, Rat]) -> SatResult:
        return SatResult(witness)

    @staticmethod
    def unsat() -> SatResult:
        return SatResult(None)

    def __bool__(self) -> bool:
        return self.is_sat


# ---------------------------------------------------------------------------
# Fourier-Motzkin elimination
# ---------------------------------------------------------------------------

# Reconstruction stages: ("subst", v, solution_term) when an equality was
# used as a substitution, ("bounds", v, lowers, uppers) for an inequality
# combination step. Bounds are (LinTerm, strict) pairs meaning v >/>= term
# (lowers) and v </<= term (uppers).
_Stage = tuple


def _prune(atoms: Iterable[Atom]) -> tuple[list[Atom], bool]:
    """Drop trivially-true atoms and duplicates; report a trivial falsehood."""
    out: list[Atom] = []
    seen: set[Atom] = set()
    for a in atoms:
        if a.is_trivially_false():
            return [a], True
        if a.is_trivially_true() or a in seen:
            continue
        seen.add(a)
        out.append(a)
    return out, False


def _eliminate_one(atoms: list[Atom], v: VarId) -> tuple[list[Atom], _Stage, bool]:
    """Eliminate v from atoms, returning (new_atoms, stage, trivially_false)."""
    counters["fm_eliminations"] += 1
    for a in atoms:
        if a.op is RelOp.EQ:
            c = a.term.coeff(v)
            if c != 0:
                solution = a.term.drop(v).scale(Rat(-1) / c)
                subst = {v: solution}
                rest = [b.substitute(subst) for b in atoms if b is not a]
                pruned, false = _prune(rest)
                return pruned, ("subst", v, solution), false

    untouched: list[Atom] = []
    lowers: list[tuple[LinTerm, bool]] = []
    uppers: list[tuple[LinTerm, bool]] = []
    for a in atoms:
        c = a.term.coeff(v)
        if c == 0:
            untouched.append(a)
            continue
        bound = a.term.drop(v).scale(Rat(-1) / c)
        strict = a.op is RelOp.LT
        if c > 0:
            uppers.append((bound, strict))
        else:
            lowers.append((bound, strict))
    combined: list[Atom] = []
    for lo, lo_strict in lowers:
        for up, up_strict in uppers:
            op = RelOp.LT if (lo_strict or up_strict) else RelOp.LE
            combined.append(Atom(lo - up, op))
    pruned, false = _prune(untouched + combined)
    return pruned, ("bounds", v, lowers, uppers), false


def _pick_variable(atoms: list[Atom], candidates: set[VarId]) -> VarId:
    """Prefer variables solvable by an equality, then the cheapest FM product."""
    eq_vars = sorted(
        v for a in atoms if a.op is RelOp.EQ for v in a.variables() if v in candidates
    )
    if eq_vars:
        return eq_vars[0]
    best: tuple[int, VarId] | None = None
    for v in sorted(candidates):
        nlo = nup = 0
        for a in atoms:
            c = a.term.coeff(v)
            if c > 0:
                nup += 1
            elif c < 0:
                nlo += 1
        key = (nlo * nup, v)
        if best is None or key < best:
            best = key
    assert best is not None
    return best[1]


def _fm_run(atoms: list[Atom], vars_to_eliminate: set[VarId]) -> tuple[list[Atom], list[_Stage], bool]:
    atoms, false = _prune(atoms)
    stages: list[_Stage] = []
    remaining = set(vars_to_eliminate)
    while remaining and not false:
        present = {v for a in atoms for v in a.variables() if v in remaining}
        if not present:
            break
        v = _pick_variable(atoms, present)
        atoms, stage, false = _eliminate_one(atoms, v)
        stages.append(stage)
        remaining.discard(v)
    return atoms, stages, false


def _rebuild_witness(stages: list[_Stage], env: dict[VarId, Rat]) -> dict[VarId, Rat]:
    for stage in reversed(stages):
        if stage[0] == "subst":
            _, v, solution = stage
            env[v] = solution.evaluate(env)
            continue
        _, v, lowers, uppers = stage
        lo_vals = [t.evaluate(env) for t, _ in lowers]
        up_vals = [t.evaluate(env) for t, _ in uppers]
        if not lo_vals and not up_vals:
            env[v] = Rat(0)
        elif not up_vals:
            env[v] = max(lo_vals) + 1
        elif not lo_vals:
            env[v] = min(up_vals) - 1
        else:
            lo, up = max(lo_vals), min(up_vals)
            env[v] = lo if lo == up else (lo + up) / 2
    return env


def conj_sat(c: Conj) -> SatResult:
    """Decide emptiness of the rational polyhedron; Sat carries an exact model.

    Equalities are used as substitutions, the remaining variables fall to
    Fourier-Motzkin (a combined atom is strict iff either parent is), and a
    model is rebuilt by back-substitution through the elimination stages.
    """
    all_vars = set(c.variables())
    residual, stages, false = _fm_run(list(c.atoms), all_vars)
    if false or any(a.is_trivially_false() for a in residual):
        return SatResult.unsat()
    # Every atom is now variable-free and trivially true. Variables that
    # dropped out of all atoms before their turn have no stage; they are
    # unconstrained and must be fixed before back-substitution.
    staged = {stage[1] for stage in stages}
    witness = _rebuild_witness(stages, {v: Rat(0) for v in all_vars - staged})
    for atom in c.atoms:
        if not atom.satisfied_by(witness):
            raise InternalInvariantError(f"sat witness violates {atom.render()}")
    return SatResult.sat(witness)


def dnf_sat(d: Dnf) -> SatResult:
    """Sat iff some disjunct is Sat; the first Sat disjunct's model is returned."""
    for conj in d.disjuncts:
        res = conj_sat(conj)
        if res.is_sat:
            return res
    return SatResult.unsat()


def eliminate(c: Conj, vars_to_eliminate: Iterable[VarId]) -> Conj:
    """Project the conjunction onto the remaining vocabulary (exists-elimination)."""
    residual, _, _ = _fm_run(list(c.atoms), set(vars_to_eliminate))
    return Conj(tuple(residual))


def negate_conj(c: Conj) -> tuple[Conj, ...]:
    """Complement of a conjunction as pairwise-disjoint branches.

    not(a1 and a2 and ...) expands to (not a1) or (a1 and not a2) or ...,
    so the branches partition the complement.
    """
    branches: list[Conj] = []
    prefix: list[Atom] = []
    for atom in c.atoms:
        for neg in atom.negated():
            branches.append(Conj(tuple(prefix) + (neg,)))
        prefix.append(atom)
    return tuple(branches)


def negate(d: Dnf) -> Dnf:
    """Logical complement as a Dnf; branches stay pairwise disjoint."""
    acc: list[Conj] = [TRUE]
    for conj in d.disjuncts:
        parts = negate_conj(conj)
        acc = [conj_and(base, p) for base in acc for p in parts]
    return Dnf(tuple(acc))


def entails(gamma: Conj, goal: Dnf) -> bool:
    """True iff gamma and not(goal) is unsatisfiable."""
    counters["entailment_checks"] += 1
    for branch in negate(goal).disjuncts:
        if conj_sat(conj_and(gamma, branch)).is_sat:
            return False
    return True


def substitute(f: Conj | Dnf, subst: Mapping[VarId, LinTerm]) -> Conj | Dnf:
    """Simultaneous substitution with re-normalized atoms."""
    return f.substitute(subst)


def prime(f: Conj | Dnf) -> Conj | Dnf:
    """Rename every unprimed variable to its primed counterpart."""
    mapping = {v: LinTerm.var(v.primed_var()) for v in f.variables() if not v.primed}
    return f.substitute(mapping)


def simplify_dnf(d: Dnf) -> Dnf:
    """Drop unsatisfiable disjuncts (each survivor is individually satisfiable)."""
    return Dnf(tuple(c for c in d.disjuncts if conj_sat(c).is_sat))


# ---------------------------------------------------------------------------
# Integer tightening
# ---------------------------------------------------------------------------


def tighten_atom(a: Atom) -> Atom:
    """Sharpen an atom under integer semantics.

    Coefficients are integral by normalization, so over integer-valued
    variables t < c becomes t <= ceil(c)-1 and a fractional bound of t <= c
    becomes t <= floor(c). Equalities are left alone.
    """
    if a.op is RelOp.EQ or not a.term.coeffs:
        return a
    c = a.term.constant
    if a.op is RelOp.LT:
        bound = -c - 1 if c.denominator == 1 else Rat(math.floor(-c))
    else:
        if c.denominator == 1:
            return a
        bound = Rat(math.floor(-c))
    body = LinTerm(a.term.coeffs, Rat(0))
    return Atom(body - LinTerm.const(bound), RelOp.LE)


def tighten_conj(c: Conj) -> Conj:
    return Conj(tuple(tighten_atom(a) for a in c.atoms))


def tighten_dnf(d: Dnf) -> Dnf:
    return Dnf(tuple(tighten_conj(c) for c in d.disjuncts))
