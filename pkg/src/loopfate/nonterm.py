"""Direct non-termination and trivial-termination checks.

Three checks drive the analysis before any synthesis is attempted:
exit-point unreachability (no guarded state can violate the guard after
one step), immediate exit (every guarded state violates it), and
recurrent-set verification, which certifies a condition phi as an actual
non-termination precondition by showing it is nonempty under the guard
and closed under every transition disjunct.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator, Mapping

from .linarith import (
    Conj,
    Dnf,
    Rat,
    VarId,
    conj_and,
    conj_sat,
    dnf_sat,
    entails,
    negate,
    prime,
    tighten_conj,
)
from .loopspec import Deterministic, LoopSpec, RelationalUnsupported, Semantics, rho_of

GRID_BOUND = 64


@dataclass(frozen=True)
class RecurrentWitness:
    """A condition proven nonempty inside the guard and closed under rho."""

    condition: Conj
    nonempty_witness: tuple[tuple[VarId, Rat], ...]
    closure_certified: bool

    def witness_map(self) -> dict[VarId, Rat]:
        return dict(self.nonempty_witness)

    def render(self) -> str:
        state = ", ".join(f"{v}={_fmt(c)}" for v, c in self.nonempty_witness)
        return f"recurrent {self.condition.render()} (witness {state})"


def _fmt(q: Rat) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def exit_unreachable(rho: Conj, psi: Dnf, pre: Conj) -> bool:
    """True iff pre /\ rho /\ not(psi') is unsatisfiable on every branch.

    Every guarded state satisfying pre then has a guarded successor. This
    certifies non-termination of the whole region only when pre itself is
    preserved by rho; the analyzer checks that separately.
    """
    psi_primed = prime(psi)
    for branch in negate(psi_primed).disjuncts:
        if conj_sat(conj_and(pre, rho, branch)).is_sat:
            return False
    return True


def immediate_exit(rho: Conj, psi: Dnf, pre: Conj) -> bool:
    """True iff pre /\ rho entails not(psi'): every iteration is the last."""
    psi_primed = prime(psi)
    return entails(conj_and(pre, rho), negate(psi_primed))


def _centered_values(bound: int) -> Iterator[int]:
    yield 0
    for k in range(1, bound + 1):
        yield k
        yield -k


def _integer_point(condition: Conj, psi: Dnf, variables: tuple[VarId, ...], bound: int) -> dict[VarId, Rat] | None:
    """First integer point of condition /\ psi in [-bound, bound]^n.

    Axes are scanned outward from zero, so witnesses stay small. The
    caller has already established rational feasibility.
    """
    axes = [list(_centered_values(bound)) for _ in variables]
    for point in product(*axes):
        env = {v: Rat(k) for v, k in zip(variables, point)}
        if condition.satisfied_by(env) and psi.satisfied_by(env):
            return env
    return None


def verify_recurrent(spec: LoopSpec, phi: Conj) -> RecurrentWitness | None:
    """Certify phi as a recurrent condition, or refute it (None).

    Requires deterministic updates: totality on the guard then makes
    closure sufficient for non-termination. phi must be (i) satisfiable
    inside the guard, with an integer witness under Int semantics, and
    (ii) closed: phi /\ rho entails phi' /\ psi' for every guard disjunct.
    """
    if not isinstance(spec.updates, Deterministic):
        raise RelationalUnsupported("recurrent-set closure needs deterministic updates")

    integral = spec.semantics is Semantics.INT
    phi_eff = tighten_conj(phi) if integral else phi
    psi = spec.guard

    region = Dnf(tuple(conj_and(phi_eff, g) for g in psi.disjuncts))
    rational = dnf_sat(region)
    if not rational.is_sat:
        return None

    if integral:
        witness_env = _integer_point(phi, psi, spec.vars, GRID_BOUND)
        if witness_env is None:
            return None
    else:
        model = rational.witness
        assert model is not None
        witness_env = {v: model.get(v, Rat(0)) for v in spec.vars}

    phi_primed = prime(phi)
    psi_primed = prime(psi)
    closure_goal = Dnf(tuple(conj_and(phi_primed, d) for d in psi_primed.disjuncts))
    for rho in rho_of(spec):
        premise = conj_and(phi_eff, tighten_conj(rho.conj) if integral else rho.conj)
        if not entails(premise, closure_goal):
            return None

    ordered = tuple((v, witness_env[v]) for v in spec.vars)
    return RecurrentWitness(phi, ordered, True)
