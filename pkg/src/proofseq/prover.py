"""Proof-logging solver for flattened models.

Runs the engine over a solver-level model and, on unsatisfiability, turns its
logged steps into a parseable, fully checkable proof: every propagation that
participates in a conflict becomes an inference line, conflict analysis
contributes nogood lines, and the root conflict concludes with UNSAT. With
log_all=True every propagation is logged, which leaves plenty of unused
steps for trimming to remove.
"""

from __future__ import annotations

from typing import Union

from .engine import Engine
from .errors import BudgetExceededError, FlattenError
from .flatten import SolverModel
from .model import (
    AtomicConstraint,
    Conjunction,
    Disjunction,
    FALSE,
    eval_expr,
    clause_of,
)
from .oracle import Sat, Unsat
from .proofcore import (
    AbstractProof,
    INFERENCE,
    InputRef,
    NOGOOD,
    OTHER,
    ProofStep,
    SOLVER_LEVEL,
    StepRef,
    serialize_proof,
)
from .instances import generate_instance  # noqa: F401  (re-export; see instances module)


def solve_with_proof(s: SolverModel, budget: int = 10**6,
                     log_all: bool = False) -> tuple[Union[Sat, Unsat], str]:
    """Solve a flattened model; returns (Sat(assignment) | Unsat, proof text).

    A satisfiable run returns an empty proof body (header only). Budget
    exhaustion raises BudgetExceededError.
    """
    for c in s.constraints:
        if isinstance(c.expr, (Disjunction, Conjunction)):
            raise FlattenError(f"constraint {c.id} is not solver-level; flatten it first")
    eng = Engine(s.vars, budget=budget, log_all=log_all)
    for c in s.constraints:
        eng.add_constraint(c.id, c.expr)
    res = eng.solve()
    if res.status == "budget":
        raise BudgetExceededError(f"prover budget exhausted after {res.conflicts} conflicts")
    if res.status == "sat":
        assignment = {v: res.assignment[eng.slot_of[v]] for v, _ in s.vars}
        for c in s.constraints:
            if not eval_expr(c.expr, assignment):
                raise AssertionError(f"prover returned a non-model (violates {c.id})")
        return Sat(assignment), serialize_proof(AbstractProof(SOLVER_LEVEL, ()))

    by_slot = {eng.slot_of[v]: v for v, _ in s.vars}

    def atom(t) -> AtomicConstraint:
        slot, op, val = t
        return AtomicConstraint(by_slot[slot], op, val)

    steps: list[ProofStep] = []
    for st in res.steps:
        if st.kind == "i":
            steps.append(ProofStep((clause_of(atom(a) for a in st.atoms),),
                                   (InputRef(st.cid),), INFERENCE))
        elif st.kind == "n":
            steps.append(ProofStep((clause_of(atom(a) for a in st.atoms),),
                                   tuple(StepRef(r) for r in st.reasons), NOGOOD))
        else:
            refs = tuple(StepRef(r) for r in st.reasons)
            refs += tuple(InputRef(c) for c in st.cid_reasons)
            steps.append(ProofStep((FALSE,), refs, OTHER))
    proof = AbstractProof(SOLVER_LEVEL, tuple(steps))
    return Unsat(), serialize_proof(proof)
