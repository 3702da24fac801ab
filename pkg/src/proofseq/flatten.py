"""Lower a user model to solver form, tracking provenance and auxiliaries.

Solver-level constraints are restricted to atoms, clauses, linear
comparisons, half-reified linears and (optionally decomposed) alldifferent.
Every emitted constraint maps back to exactly one user constraint.

Disjunctions are reified with fresh 0-1 selector variables:

* two members use a single selector s with ``s == 1 => m1`` and
  ``s == 0 => m2`` (no cover clause needed);
* three or more members get one selector each plus a cover clause
  ``s1 >= 1 | s2 >= 1 | ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import FlattenError
from .model import (
    AllDifferent,
    AtomicConstraint,
    Clause,
    Conjunction,
    Constraint,
    Disjunction,
    Domain,
    Expr,
    HalfReified,
    Linear,
    UserModel,
    VarId,
    eval_expr,
    iter_assignments,
)


@dataclass(frozen=True)
class ProvenanceMap:
    """solver constraint id -> user constraint id (total over solver constraints)."""

    solver_to_user: dict[str, str]

    def user_id(self, solver_id: str) -> str:
        return self.solver_to_user[solver_id]

    def __len__(self) -> int:
        return len(self.solver_to_user)


@dataclass(frozen=True)
class SolverModel:
    vars: tuple[tuple[VarId, Domain], ...]
    constraints: tuple[Constraint, ...]
    aux_vars: frozenset[VarId]
    provenance: ProvenanceMap

    def var_by_name(self, name: str) -> VarId:
        for v, _ in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def domain_of(self, var: VarId) -> Domain:
        for v, d in self.vars:
            if v == var:
                return d
        raise KeyError(var)

    def constraint_by_id(self, cid: str) -> Constraint:
        return self.constraint_map[cid]

    @property
    def constraint_map(self) -> dict[str, Constraint]:
        return {c.id: c for c in self.constraints}


@dataclass
class _Flattener:
    model: UserModel
    decompose_alldiff: bool = False
    vars: list = field(default_factory=list)
    out: list = field(default_factory=list)
    aux: list = field(default_factory=list)
    prov: dict = field(default_factory=dict)
    aux_count: int = 0

    def fresh_bool(self) -> VarId:
        self.aux_count += 1
        v = VarId(len(self.vars), f"_x{self.aux_count}")
        self.vars.append((v, Domain(0, 1)))
        self.aux.append(v)
        return v

    def emit(self, solver_id: str, expr: Expr, user_id: str):
        if solver_id in self.prov:
            raise FlattenError(f"solver constraint id collision: {solver_id!r} "
                               f"(user ids that look like flattening output can clash)")
        self.out.append(Constraint(solver_id, expr))
        self.prov[solver_id] = user_id

    def run(self) -> SolverModel:
        self.vars = list(self.model.vars)
        for c in self.model.constraints:
            self.flatten_constraint(c)
        return SolverModel(
            vars=tuple(self.vars),
            constraints=tuple(self.out),
            aux_vars=frozenset(self.aux),
            provenance=ProvenanceMap(dict(self.prov)),
        )

    def flatten_constraint(self, c: Constraint):
        expr = c.expr
        if isinstance(expr, (AtomicConstraint, Clause, Linear)):
            self.emit(c.id, expr, c.id)
        elif isinstance(expr, AllDifferent):
            if not self.decompose_alldiff:
                self.emit(c.id, expr, c.id)
            else:
                k = 0
                for i, x in enumerate(expr.vars):
                    for y in expr.vars[i + 1:]:
                        k += 1
                        self.emit(f"{c.id}/{k}", Linear(((1, x), (-1, y)), "!=", 0), c.id)
        elif isinstance(expr, Disjunction):
            self.flatten_disjunction(c.id, expr)
        else:
            raise FlattenError(f"constraint {c.id}: unsupported body {type(expr).__name__}")

    def flatten_disjunction(self, cid: str, expr: Disjunction):
        members = _flatten_or_tree(expr)
        if not members:
            raise FlattenError(f"constraint {cid}: empty disjunction")
        if len(members) == 1:
            self.emit(f"{cid}/1", members[0], cid)
            return
        if len(members) == 2:
            s = self.fresh_bool()
            self.emit_guarded(f"{cid}/1", AtomicConstraint(s, "==", 1), members[0], cid)
            self.emit_guarded(f"{cid}/2", AtomicConstraint(s, "==", 0), members[1], cid)
            return
        sels = [self.fresh_bool() for _ in members]
        for i, (s, m) in enumerate(zip(sels, members), start=1):
            self.emit_guarded(f"{cid}/{i}", AtomicConstraint(s, "==", 1), m, cid)
        cover = Clause(tuple(AtomicConstraint(s, ">=", 1) for s in sels))
        self.emit(f"{cid}/g", cover, cid)

    def emit_guarded(self, solver_id: str, guard: AtomicConstraint, member: Expr, user_id: str):
        if isinstance(member, Linear):
            self.emit(solver_id, HalfReified(guard, member), user_id)
        elif isinstance(member, AtomicConstraint):
            self.emit(solver_id, HalfReified(guard, _atom_to_linear(member)), user_id)
        elif isinstance(member, Clause):
            # guard => clause is itself a clause with the negated guard added
            self.emit(solver_id, Clause((guard.negated(),) + member.atoms), user_id)
        elif isinstance(member, Conjunction):
            for j, part in enumerate(member.members, start=1):
                self.emit_guarded(f"{solver_id}.{j}", guard, part, user_id)
        else:
            raise FlattenError(f"cannot reify {type(member).__name__} under a guard")


def _flatten_or_tree(expr: Disjunction) -> list[Expr]:
    members: list[Expr] = []
    for m in expr.members:
        if isinstance(m, Disjunction):
            members.extend(_flatten_or_tree(m))
        else:
            members.append(m)
    return members


def _atom_to_linear(a: AtomicConstraint) -> Linear:
    return Linear(((1, a.var),), a.op, a.value)


def flatten(m: UserModel, decompose_alldiff: bool = False) -> SolverModel:
    """Flatten a user model. Auxiliary selectors are named _x1, _x2, ... in emission order."""
    return _Flattener(m, decompose_alldiff).run()


def check_projection_equivalence(m: UserModel, s: SolverModel, cap: int = 10**6) -> bool:
    """Decide by enumeration whether solver solutions projected to user variables
    coincide with user-model solutions. The product of user domain sizes must
    stay within cap (auxiliaries are 0-1 and enumerated on top)."""
    count = 1
    for _, d in m.vars:
        count *= d.size()
    if count > cap:
        raise ValueError(f"{count} user assignments exceed cap {cap}")

    aux = [(v, d) for v, d in s.vars if v in s.aux_vars]
    for alpha in iter_assignments(m.vars):
        user_sat = all(eval_expr(c, alpha) for c in m.constraints)
        solver_sat = False
        for beta in iter_assignments(aux):
            full = {**alpha, **beta}
            if all(eval_expr(c, full) for c in s.constraints):
                solver_sat = True
                break
        if user_sat != solver_sat:
            return False
    return True
