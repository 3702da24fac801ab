"""Satisfiability oracle over finite integer domains.

Decides satisfiability of a constraint set (propagation + backtracking
search with nogood learning), returns a verified model or an unsat core over
the retractable assumptions. BudgetExceeded is a result, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .engine import Engine
from .errors import BudgetExceededError
from .model import (
    AtomicConstraint,
    Constraint,
    Disjunction,
    Domain,
    Expr,
    TRUE,
    VarId,
    as_expr,
    clause_of,
    eval_expr,
    negate_expr,
)

DEFAULT_BUDGET = 10**6

ConstraintLike = Union[Expr, Constraint]


@dataclass(frozen=True)
class OracleProblem:
    vars: tuple[tuple[VarId, Domain], ...]
    hard: tuple[ConstraintLike, ...] = ()
    assumptions: tuple[ConstraintLike, ...] = ()
    budget: int = DEFAULT_BUDGET


@dataclass
class Sat:
    assignment: dict[VarId, int]


@dataclass
class Unsat:
    core: tuple[ConstraintLike, ...] = ()


@dataclass
class BudgetExceeded:
    conflicts: int = 0


OracleResult = Union[Sat, Unsat, BudgetExceeded]


def solve(problem: OracleProblem) -> OracleResult:
    """Complete within budget; Sat assignments are re-checked by eval before return."""
    eng = Engine(problem.vars, budget=problem.budget)
    for i, c in enumerate(problem.hard):
        eng.add_constraint(f"h{i}", as_expr(c))
    for i, c in enumerate(problem.assumptions):
        eng.add_constraint(f"a{i}", as_expr(c))
    res = eng.solve()
    if res.status == "budget":
        return BudgetExceeded(res.conflicts)
    if res.status == "unsat":
        core = tuple(c for i, c in enumerate(problem.assumptions)
                     if f"a{i}" in res.used_cids)
        if not problem.assumptions:
            core = ()
        return Unsat(core)
    slots = {s: v for s, v in res.assignment.items()}
    assignment = {v: slots[eng.slot_of[v]] for v, _ in problem.vars}
    for c in tuple(problem.hard) + tuple(problem.assumptions):
        if not eval_expr(as_expr(c), assignment):
            raise AssertionError(f"engine returned a non-model (violates {c})")
    return Sat(assignment)


class Oracle:
    """Oracle bound to a fixed variable set, with an invocation counter.

    The counter is the pipeline's "NP-call" count: one per engine solve.
    """

    def __init__(self, vars_domains: Sequence[tuple[VarId, Domain]],
                 budget: int = DEFAULT_BUDGET):
        self.vars = tuple(vars_domains)
        self.budget = budget
        self.calls = 0

    def solve(self, hard: Sequence[ConstraintLike] = (),
              assumptions: Sequence[ConstraintLike] = ()) -> OracleResult:
        self.calls += 1
        return solve(OracleProblem(self.vars, tuple(hard), tuple(assumptions), self.budget))

    def satisfiable(self, constraints: Sequence[ConstraintLike]) -> bool:
        res = self.solve(hard=tuple(constraints))
        if isinstance(res, BudgetExceeded):
            raise BudgetExceededError(f"oracle budget exhausted after {res.conflicts} conflicts")
        return isinstance(res, Sat)

    def model_of(self, constraints: Sequence[ConstraintLike]) -> Optional[dict[VarId, int]]:
        res = self.solve(hard=tuple(constraints))
        if isinstance(res, BudgetExceeded):
            raise BudgetExceededError(f"oracle budget exhausted after {res.conflicts} conflicts")
        return res.assignment if isinstance(res, Sat) else None


def negate_conjunction(cs: Sequence[ConstraintLike]) -> Expr:
    """Constraint true exactly when at least one member of cs is violated.

    Supports atoms, clauses, linear comparisons, half-reified linears and
    and/or combinations thereof. With several members the result is a
    disjunction of the individual negations (the engine introduces its own
    selector variables when it compiles one).
    """
    negs = [negate_expr(as_expr(c)) for c in cs]
    if any(n == TRUE for n in negs):
        return TRUE
    if not negs:
        return clause_of(())  # nothing can be violated
    if len(negs) == 1:
        return negs[0]
    if all(isinstance(n, AtomicConstraint) for n in negs):
        return clause_of(negs)
    return Disjunction(tuple(negs))
