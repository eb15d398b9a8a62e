"""Lightweight abduction of potential non-terminating conditions.

Given a transition relation rho and a goal psi' over post-state variables,
a potential non-terminating condition is a pre-state constraint phi with
rho /\ phi |- psi': one more iteration is guaranteed not to leave the
guard. Candidates are found by universal projection onto small variable
subsets: for a subset S, project rho /\ not(psi') onto S by eliminating
everything else, then negate. Subsets are enumerated by ascending size and
declaration order, results are ranked by support size, atom count and
rendering, and the weakest precondition itself is appended last as the
trivial candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .linarith import (
    Atom,
    Conj,
    Dnf,
    LinTerm,
    RelOp,
    VarId,
    conj_and,
    conj_sat,
    eliminate,
    entails,
    negate,
    tighten_conj,
)
from itertools import combinations


@dataclass(frozen=True)
class AbductionCandidate:
    """A candidate condition phi together with its used variables."""

    condition: Conj
    support_vars: tuple[VarId, ...]
    trivial: bool = False

    def render(self) -> str:
        return self.condition.render()


def _as_rhos(rho: Conj | Sequence[Conj]) -> list[Conj]:
    return [rho] if isinstance(rho, Conj) else list(rho)


def _as_dnf(f: Conj | Dnf) -> Dnf:
    return Dnf((f,)) if isinstance(f, Conj) else f


def _deterministic_substitution(rhos: list[Conj]) -> dict[VarId, LinTerm] | None:
    """Extract x' -> update(x) from defining equalities, when every primed
    variable has exactly one and the updates agree across disjuncts."""
    subst: dict[VarId, LinTerm] = {}
    primed = {v for r in rhos for v in r.variables() if v.primed}
    for p in sorted(primed):
        solution: LinTerm | None = None
        for r in rhos:
            found = None
            for atom in r.atoms:
                if atom.op is not RelOp.EQ:
                    continue
                c = atom.term.coeff(p)
                if c == 0:
                    continue
                candidate = atom.term.drop(p).scale(-1 / c)
                if any(v.primed for v in candidate.variables()):
                    continue
                found = candidate
                break
            if found is None:
                return None
            if solution is None:
                solution = found
            elif solution != found:
                return None
        subst[p] = solution  # type: ignore[assignment]
    return subst


def weakest_guard_pre(rho: Conj | Sequence[Conj], psi_primed: Dnf) -> Dnf:
    """The weakest phi over pre-state variables with rho /\ phi |- psi'.

    For deterministic relations this is psi' with every primed variable
    replaced by its update term. In general it is the universal projection
    not(exists X'. rho /\ not(psi')) restricted to unprimed variables;
    the two agree wherever the relation applies.
    """
    rhos = _as_rhos(rho)
    subst = _deterministic_substitution(rhos)
    if subst is not None:
        return psi_primed.substitute(subst)
    projected: list[Conj] = []
    for r in rhos:
        primed = {v for v in r.variables() if v.primed}
        for branch in negate(psi_primed).disjuncts:
            body = conj_and(r, branch)
            vanish = primed | {v for v in branch.variables() if v.primed}
            proj = eliminate(body, vanish)
            if not any(a.is_trivially_false() for a in proj.atoms):
                projected.append(proj)
    return negate(Dnf(tuple(projected)))


def abduce(
    rho: Conj | Sequence[Conj],
    guard: Conj | Dnf,
    psi_primed: Dnf,
    max_support: int,
    *,
    variables: Sequence[VarId] | None = None,
    integral: bool = False,
) -> list[AbductionCandidate]:
    """Enumerate valid abduction candidates, strongest ranking first.

    Every returned candidate phi satisfies: rho /\ phi |- psi' (for every
    relation disjunct), rho /\ phi is satisfiable, and guard /\ not(phi) is
    satisfiable (the split is proper, which also rules out conditions the
    guard already entails). With integral=True, strict inequalities arising
    from negation are sharpened to integer bounds first. An empty result
    signals abduction failure.
    """
    if max_support < 1:
        raise ValueError("max_support must be >= 1")
    rhos = _as_rhos(rho)
    guard_dnf = _as_dnf(guard)

    if variables is None:
        pool = sorted({v.base_var() for r in rhos for v in r.variables()})
    else:
        pool = [v for v in variables if not v.primed]

    neg_goal = [tighten_conj(b) if integral else b for b in negate(psi_primed).disjuncts]
    bad_parts = [conj_and(r, b) for r in rhos for b in neg_goal]

    def usable(phi: Conj) -> bool:
        if any(a.is_trivially_false() for a in phi.atoms):
            return False
        if not any(conj_sat(conj_and(r, phi)).is_sat for r in rhos):
            return False  # inconsistent with the relation
        if not all(entails(conj_and(r, phi), psi_primed) for r in rhos):
            return False
        # Proper split: some guarded state falls outside phi.
        for g in guard_dnf.disjuncts:
            for nb in negate(Dnf((phi,))).disjuncts:
                if conj_sat(conj_and(g, nb)).is_sat:
                    return True
        return False

    candidates: list[AbductionCandidate] = []
    seen: set[Conj] = set()

    def consider(phi: Conj, trivial: bool) -> None:
        if integral:
            phi = tighten_conj(phi)
        phi = Conj(tuple(a for a in phi.atoms if not a.is_trivially_true()))
        if phi in seen or not usable(phi):
            return
        seen.add(phi)
        support = tuple(sorted({v for v in phi.variables()}))
        candidates.append(AbductionCandidate(phi, support, trivial))

    for size in range(1, min(max_support, len(pool)) + 1):
        for subset in combinations(pool, size):
            keep = set(subset)
            projections: list[Conj] = []
            for part in bad_parts:
                vanish = {v for v in part.variables() if v not in keep}
                proj = eliminate(part, vanish)
                if any(a.is_trivially_false() for a in proj.atoms):
                    continue  # this branch is impossible; contributes nothing
                projections.append(proj)
            phi_dnf = negate(Dnf(tuple(projections)))
            for branch in phi_dnf.disjuncts:
                consider(branch, trivial=False)

    candidates.sort(key=lambda c: (len(c.support_vars), len(c.condition.atoms), c.render()))

    for branch in weakest_guard_pre(rhos, psi_primed).disjuncts:
        consider(branch, trivial=True)

    return candidates
