"""Complete linear ranking-function synthesis with an independent verifier.

A linear ranking function r certifies termination of a transition relation
when r(x) is bounded below over the relation and decreases by at least a
fixed positive amount on every step. Both conditions are turned into a
linear feasibility problem over nonnegative row multipliers: with the
relation written as A(x, x') <= b, a multiplier row proves an affine
consequence, so

    bounded:    l1 >= 0,  l1*A = (-r, 0),   l1*b <= -d0
    decreasing: l2 >= 0,  l2*A = (-r, +r),  l2*b <= -1

is satisfiable exactly when some r works over the rational relaxation of
the relation (the decrease is normalized to 1, without loss of generality
by scaling). The system is decided with the exact elimination engine and
the witness read off its model.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .linarith import (
    Atom,
    Conj,
    Dnf,
    LinTerm,
    Rat,
    RelOp,
    VarId,
    conj_sat,
    entails,
)


@dataclass(frozen=True)
class RankingWitness:
    """Coefficients r with a lower bound d0 and per-step decrease delta."""

    coeffs: tuple[tuple[VarId, Rat], ...]
    bound: Rat
    decrease: Rat

    def term(self) -> LinTerm:
        return LinTerm.of(dict(self.coeffs))

    def scaled(self, k: Rat | int) -> RankingWitness:
        k = Rat(k)
        return RankingWitness(
            tuple((v, c * k) for v, c in self.coeffs), self.bound * k, self.decrease * k
        )

    def render(self) -> str:
        r = self.term().render()
        return f"r = {r}, bound {self.bound}, decrease {self.decrease}"


_Row = tuple[dict[VarId, Rat], Rat]  # coefficient row over (x, x'), rhs


def _rows_of(rho: Conj) -> list[_Row]:
    """Relation atoms as rows of A(x,x') <= b; equalities split, strict relaxed."""
    rows: list[_Row] = []
    for atom in rho.atoms:
        coeffs = dict(atom.term.coeffs)
        rhs = -atom.term.constant
        rows.append((coeffs, rhs))
        if atom.op is RelOp.EQ:
            rows.append(({v: -c for v, c in coeffs.items()}, -rhs))
    return rows


def _fresh_prefix(taken: set[str]) -> str:
    prefix = "_fk"
    while any(name.startswith(prefix) for name in taken):
        prefix = "_" + prefix
    return prefix


def synthesize_linear_rf(rho: Conj | Sequence[Conj]) -> RankingWitness | None:
    """Search for a shared linear ranking function; None when infeasible.

    Accepts a single relation or one relation per guard disjunct; the
    coefficient vector and bound are shared across disjuncts while each
    disjunct gets its own multiplier rows. Unsatisfiable disjuncts impose
    no constraint and are skipped.
    """
    rhos = [rho] if isinstance(rho, Conj) else list(rho)
    rhos = [r for r in rhos if conj_sat(r).is_sat]
    if not rhos:
        return RankingWitness(tuple(), Rat(0), Rat(1))

    unprimed: set[VarId] = set()
    taken: set[str] = set()
    for r in rhos:
        for v in r.variables():
            taken.add(v.name)
            unprimed.add(v.base_var())
    xs = sorted(unprimed)

    prefix = _fresh_prefix(taken)
    r_vars = {v: VarId(f"{prefix}_r_{v.name}") for v in xs}
    d0_var = VarId(f"{prefix}_d0")

    atoms: list[Atom] = []
    for k, relation in enumerate(rhos):
        rows = _rows_of(relation)
        lam1 = [VarId(f"{prefix}_l1_{k}_{i}") for i in range(len(rows))]
        lam2 = [VarId(f"{prefix}_l2_{k}_{i}") for i in range(len(rows))]
        for lam in (*lam1, *lam2):
            atoms.append(Atom(LinTerm.var(lam, -1), RelOp.LE))  # lam >= 0

        def column(lams: list[VarId], col: VarId) -> dict[VarId, Rat]:
            out: dict[VarId, Rat] = {}
            for i, (coeffs, _) in enumerate(rows):
                c = coeffs.get(col)
                if c:
                    out[lams[i]] = c
            return out

        # A variable column absent from every row leaves that variable
        # unconstrained by this disjunct, which forces its r coefficient
        # to zero through the same equations.
        for v in xs:
            rv = r_vars[v]
            p = v.primed_var()
            atoms.append(Atom(LinTerm.of(column(lam1, v) | {rv: Rat(1)}), RelOp.EQ))
            atoms.append(Atom(LinTerm.of(column(lam2, v) | {rv: Rat(1)}), RelOp.EQ))
            c1 = column(lam1, p)
            if c1:
                atoms.append(Atom(LinTerm.of(c1), RelOp.EQ))
            c2 = column(lam2, p)
            c2[rv] = c2.get(rv, Rat(0)) - 1
            atoms.append(Atom(LinTerm.of(c2), RelOp.EQ))

        rhs_l1 = LinTerm.of(
            {lam1[i]: rows[i][1] for i in range(len(rows)) if rows[i][1] != 0} | {d0_var: Rat(1)}
        )
        atoms.append(Atom(rhs_l1, RelOp.LE))  # l1*b + d0 <= 0
        rhs_l2 = LinTerm.of(
            {lam2[i]: rows[i][1] for i in range(len(rows)) if rows[i][1] != 0}, Rat(1)
        )
        atoms.append(Atom(rhs_l2, RelOp.LE))  # l2*b + 1 <= 0

    result = conj_sat(Conj(tuple(atoms)))
    if not result.is_sat:
        return None
    model = result.witness
    assert model is not None
    coeffs = tuple(
        (v, model.get(r_vars[v], Rat(0))) for v in xs if model.get(r_vars[v], Rat(0)) != 0
    )
    return RankingWitness(coeffs, model.get(d0_var, Rat(0)), Rat(1))


def verify_rf(rho: Conj, witness: RankingWitness) -> bool:
    """Independent check of a ranking witness against one relation disjunct.

    Uses only entailment: rho must imply r(x) >= bound and
    r(x) - r(x') >= decrease, with a strictly positive decrease. Synthesis
    bugs therefore cannot leak unsound TERMINATING verdicts.
    """
    if witness.decrease <= 0:
        return False
    r = witness.term()
    bounded = Atom(LinTerm.const(witness.bound) - r, RelOp.LE)
    r_primed = LinTerm.of({v.primed_var(): c for v, c in witness.coeffs})
    decreasing = Atom(LinTerm.const(witness.decrease) - r + r_primed, RelOp.LE)
    return entails(rho, Dnf((Conj((bounded,)),))) and entails(rho, Dnf((Conj((decreasing,)),)))
