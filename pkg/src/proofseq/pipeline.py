"""Proof-to-explanation pipeline: property-based simplification, user-level
lifting, reason minimization and step merging, plus the seven run variants.

Stage order (the optional minimizations give the variants):

    parse -> simplify_aux_vars -> lift_to_user_level
          -> [trim | minimize_reasons(local|global)]
          -> simplify_to_domain_reductions
          -> [minimize_reasons(local|global)]
          -> merge_steps

Global minimization at the end excludes an earlier minimization (it would
ignore whatever the first pass uncovered), which leaves exactly seven legal
variants.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import ProofShapeError, LiftBeforeSimplifyError, SatInputError
from .flatten import SolverModel
from .model import (
    Expr,
    FALSE,
    UserModel,
    canonical_key,
    scope,
)
from .mus import MusQuery, SMALLEST_WEIGHTED, SUBSET_MINIMAL, extract_mus_indices
from .oracle import Oracle, negate_conjunction
from .proofcore import (
    AbstractProof,
    INFERENCE,
    InputRef,
    NOGOOD,
    OTHER,
    ProofStep,
    ReasonRef,
    StepRef,
    USER_LEVEL,
    check_proof,
    trim,
)
from .sequence import (
    BOT,
    Bottom,
    DomainFact,
    ExplanationSequence,
    ExplanationStep,
)

LOCAL = "local"
GLOBAL = "global"


@dataclass(frozen=True)
class PipelineVariant:
    name: str
    first_min: Optional[str]   # None | "local" | "global"
    second_min: Optional[str]

    def __post_init__(self):
        if self.second_min == GLOBAL and self.first_min is not None:
            raise ValueError("global minimization at the end excludes a first minimization")


VARIANTS: dict[str, PipelineVariant] = {
    "trim": PipelineVariant("trim", None, None),
    "trim+minloc": PipelineVariant("trim+minloc", None, LOCAL),
    "trim+minglob": PipelineVariant("trim+minglob", None, GLOBAL),
    "minloc": PipelineVariant("minloc", LOCAL, None),
    "minglob": PipelineVariant("minglob", GLOBAL, None),
    "minloc+minloc": PipelineVariant("minloc+minloc", LOCAL, LOCAL),
    "minglob+minloc": PipelineVariant("minglob+minloc", GLOBAL, LOCAL),
}


def variant(name: str) -> PipelineVariant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose one of {', '.join(VARIANTS)}") from None


# --- property-based simplification -------------------------------------------


def simplify(p: AbstractProof, pred: Callable[[ProofStep], bool]) -> AbstractProof:
    """Remove every step violating pred, substituting its reasons into all
    later steps that referenced its derivations (transitively, front to back)."""
    if not p.steps:
        return p
    if not pred(p.steps[-1]):
        raise ProofShapeError("the property fails on the final step")
    subst: dict[int, tuple[ReasonRef, ...]] = {}
    kept: list[ProofStep] = []
    new_id: dict[int, int] = {}
    for i, step in enumerate(p.steps, start=1):
        reasons: list[ReasonRef] = []
        for ref in step.reasons:
            if isinstance(ref, StepRef) and ref.step in subst:
                reasons.extend(subst[ref.step])
            else:
                reasons.append(ref)
        reasons = list(dict.fromkeys(reasons))
        if pred(step):
            new_id[i] = len(kept) + 1
            kept.append(ProofStep(step.derived, tuple(reasons), _infer_kind(reasons, step)))
        else:
            subst[i] = tuple(reasons)
    steps = tuple(
        ProofStep(s.derived,
                  tuple(StepRef(new_id[r.step], r.idx) if isinstance(r, StepRef) else r
                        for r in s.reasons),
                  s.kind)
        for s in kept)
    return AbstractProof(p.level, steps)


def _infer_kind(reasons, step: ProofStep) -> str:
    if tuple(reasons) == step.reasons:
        return step.kind
    if len(reasons) == 1 and isinstance(reasons[0], InputRef):
        return INFERENCE
    if reasons and all(isinstance(r, StepRef) for r in reasons):
        return NOGOOD
    return OTHER


def simplify_aux_vars(p: AbstractProof, solver_model: SolverModel) -> AbstractProof:
    """Drop every step whose derived constraints mention auxiliary variables."""
    aux = solver_model.aux_vars

    def no_aux(step: ProofStep) -> bool:
        return not (scope(step.derived) & aux)

    return simplify(p, no_aux)


def simplify_to_domain_reductions(p: AbstractProof,
                                  model: Optional[UserModel] = None) -> AbstractProof:
    """Keep only steps whose derived constraints talk about at most one
    variable. When a model is given, surviving unary clauses are normalized
    to canonical domain statements over the declared domains."""

    def unary(step: ProofStep) -> bool:
        return all(len(scope(d)) <= 1 for d in step.derived)

    out = simplify(p, unary)
    if model is None:
        return out
    steps = []
    for step in out.steps:
        derived = tuple(_normalize_unary(d, model) for d in step.derived)
        steps.append(ProofStep(derived, step.reasons, step.kind))
    return AbstractProof(out.level, tuple(steps))


def _normalize_unary(d: Expr, model: UserModel) -> Expr:
    sc = scope(d)
    if d == FALSE or not sc:
        return d
    (var,) = sc
    return DomainFact.from_expr(d, model.domain_of(var)).to_expr(model.domain_of(var))


# --- lifting -------------------------------------------------------------------


def lift_to_user_level(p: AbstractProof, solver_model: SolverModel) -> AbstractProof:
    """Replace each solver-level input reason with the user constraint it was
    flattened from (duplicates collapse). Sound only once no derived
    constraint mentions auxiliaries: a user constraint restricted to the
    user variables is at least as strong as any constraint flattened from it,
    so implication of aux-free derivations is preserved."""
    for i, step in enumerate(p.steps, start=1):
        bad = scope(step.derived) & solver_model.aux_vars
        if bad:
            names = ", ".join(sorted(v.name for v in bad))
            raise LiftBeforeSimplifyError(
                f"step {i} derives a constraint over auxiliaries ({names}); simplify first")
    prov = solver_model.provenance
    steps = []
    for step in p.steps:
        reasons = tuple(dict.fromkeys(
            InputRef(prov.user_id(r.cid)) if isinstance(r, InputRef) else r
            for r in step.reasons))
        steps.append(ProofStep(step.derived, reasons, step.kind))
    return AbstractProof(USER_LEVEL, tuple(steps), p.deletions)


# --- reason minimization ----------------------------------------------------------


def minimize_reasons(p: AbstractProof, mode: str, user_model: UserModel,
                     oracle: Oracle) -> AbstractProof:
    """Back-to-front pass: drop steps none of whose derivations are still
    required, and replace each kept step's reasons by a minimal unsatisfiable
    subset of its candidate reasons against the negated derivation.

    local mode: candidates are the step's own reasons, subset-minimal MUS.
    global mode: candidates are all user constraints plus everything derived
    earlier; a smallest-MUS weighted to count user constraints first (weight
    F+1 for a user constraint, 1 for a derived fact, F = number of candidate
    facts) so steps cite as few user constraints as possible.
    """
    if mode not in (LOCAL, GLOBAL):
        raise ValueError(f"unknown minimization mode {mode!r}")
    if not p.is_refutation():
        raise ProofShapeError("reason minimization needs a refutation")
    n = len(p.steps)
    req = {canonical_key(d) for d in p.steps[-1].derived}
    kept_rev: list[tuple[int, ProofStep]] = []
    for i in range(n, 0, -1):
        step = p.steps[i - 1]
        if not any(canonical_key(d) in req for d in step.derived):
            continue
        cand = _candidates(p, i, step, mode, user_model)
        hard = negate_conjunction(step.derived)
        soft = tuple(expr for _, expr in cand)
        if mode == LOCAL:
            query = MusQuery(soft, (hard,), mode=SUBSET_MINIMAL)
        else:
            nfacts = sum(1 for ref, _ in cand if isinstance(ref, StepRef))
            weights = tuple(1 if isinstance(ref, StepRef) else nfacts + 1 for ref, _ in cand)
            query = MusQuery(soft, (hard,), weights=weights, mode=SMALLEST_WEIGHTED)
        try:
            chosen = extract_mus_indices(query, oracle)
        except SatInputError:
            raise SatInputError(f"step {i} is not implied by its candidate reasons") from None
        reasons = tuple(cand[k][0] for k in chosen)
        req.update(canonical_key(cand[k][1]) for k in chosen)
        kept_rev.append((i, ProofStep(step.derived, reasons, OTHER)))
    kept = list(reversed(kept_rev))
    new_id = {old: new for new, (old, _) in enumerate(kept, start=1)}
    steps = tuple(
        ProofStep(s.derived,
                  tuple(StepRef(new_id[r.step], r.idx) if isinstance(r, StepRef) else r
                        for r in s.reasons),
                  s.kind)
        for _, s in kept)
    # duplicate derivations can leave a kept step unreferenced (the candidate
    # table points every reason at the earliest deriver); a final reachability
    # pass restores the trimmed-proof property without changing anything else
    return trim(AbstractProof(p.level, steps))


def _candidates(p: AbstractProof, i: int, step: ProofStep, mode: str,
                user_model: UserModel) -> list[tuple[ReasonRef, Expr]]:
    if mode == LOCAL:
        out: dict = {}
        for ref in step.reasons:
            expr = p.resolve(ref, user_model)
            out.setdefault(canonical_key(expr), (ref, expr))
        return list(out.values())
    # global: every user constraint, then every earlier derivation; when the
    # same constraint exists both ways the derived-fact identity wins (it is
    # the cheaper reason under the stepsize objective)
    out = {}
    for c in user_model.constraints:
        out[canonical_key(c.expr)] = (InputRef(c.id), c.expr)
    for j in range(1, i):
        for k, d in enumerate(p.steps[j - 1].derived):
            key = canonical_key(d)
            if key not in out or isinstance(out[key][0], InputRef):
                out[key] = (StepRef(j, k), d)
    return list(out.values())


# --- merging ---------------------------------------------------------------------


def merge_steps(p: AbstractProof, user_model: UserModel) -> ExplanationSequence:
    """Merge steps with identical reason sets at the earliest such position.

    Expects a user-level refutation whose non-final steps derive
    single-variable facts. The final false step never merges, so the
    sequence always ends in false.
    """
    if not p.is_refutation():
        raise ProofShapeError("merging needs a refutation")
    facts_of: list[tuple] = []
    reasons_of: list[tuple[tuple[str, ...], tuple[DomainFact, ...]]] = []
    for idx, step in enumerate(p.steps, start=1):
        facts = []
        for d in step.derived:
            if d == FALSE:
                facts.append(BOT)
            else:
                sc = scope(d)
                if len(sc) != 1:
                    raise ProofShapeError(
                        f"step {idx} derives a multi-variable constraint; simplify first")
                (var,) = sc
                facts.append(DomainFact.from_expr(d, user_model.domain_of(var)))
        users: list[str] = []
        fact_reasons: list[DomainFact] = []
        for ref in step.reasons:
            if isinstance(ref, InputRef):
                users.append(ref.cid)
            else:
                f = facts_of[ref.step - 1][ref.idx]
                if isinstance(f, Bottom):
                    raise ProofShapeError("a step references a false derivation")
                fact_reasons.append(f)
        facts_of.append(tuple(facts))
        reasons_of.append((tuple(dict.fromkeys(users)), tuple(dict.fromkeys(fact_reasons))))

    groups: dict = {}
    order: list = []
    for idx in range(len(p.steps) - 1):
        users, fact_reasons = reasons_of[idx]
        key = (frozenset(users), frozenset(fact_reasons))
        if key in groups:
            groups[key][1].extend(facts_of[idx])
        else:
            groups[key] = (idx, list(facts_of[idx]))
            order.append(key)

    steps = []
    for key in order:
        _, facts = groups[key]
        users, fact_reasons = reasons_of[groups[key][0]]
        steps.append(ExplanationStep(tuple(dict.fromkeys(facts)), users, fact_reasons))
    last_users, last_fact_reasons = reasons_of[-1]
    steps.append(ExplanationStep(tuple(dict.fromkeys(facts_of[-1])),
                                 last_users, last_fact_reasons))
    return ExplanationSequence(tuple(steps))


# --- the full pipeline ---------------------------------------------------------------


@dataclass
class StageStat:
    name: str
    steps: int
    ms: float


@dataclass
class PipelineResult:
    sequence: ExplanationSequence
    stages: list[StageStat] = field(default_factory=list)
    oracle_calls: int = 0

    def stage_sizes(self) -> dict[str, int]:
        return {s.name: s.steps for s in self.stages}


def run_pipeline(user_model: UserModel, proof: AbstractProof, var: PipelineVariant | str,
                 solver_model: SolverModel, budget: int = 10**6,
                 debug: bool = False) -> PipelineResult:
    """Execute one pipeline variant on a parsed solver-level proof.

    With debug=True every intermediate proof is oracle-checked step by step
    (these calls are counted separately from the pipeline's own oracle use).
    """
    if isinstance(var, str):
        var = variant(var)
    oracle = Oracle(user_model.vars, budget=budget)
    stages: list[StageStat] = []
    result = PipelineResult(ExplanationSequence(()), stages)

    def record(name: str, value, t0: float):
        stages.append(StageStat(name, len(value.steps), (time.perf_counter() - t0) * 1000.0))
        return value

    def checked(stage_proof: AbstractProof, model) -> AbstractProof:
        if debug:
            bad = check_proof(stage_proof, model)
            if bad:
                raise ProofShapeError(f"invalid steps after a pipeline stage: {bad}")
        return stage_proof

    stages.append(StageStat("proof", len(proof.steps), 0.0))
    t = time.perf_counter()
    p = record("no_aux", simplify_aux_vars(proof, solver_model), t)
    checked(p, solver_model)
    t = time.perf_counter()
    p = record("user_cons", lift_to_user_level(p, solver_model), t)
    checked(p, user_model)
    t = time.perf_counter()
    if var.first_min is None:
        p = record("min1", trim(p), t)
    else:
        p = record("min1", minimize_reasons(p, var.first_min, user_model, oracle), t)
    checked(p, user_model)
    t = time.perf_counter()
    p = record("domain_red", simplify_to_domain_reductions(p, user_model), t)
    checked(p, user_model)
    t = time.perf_counter()
    if var.second_min is None:
        stages.append(StageStat("min2", len(p.steps), 0.0))
    else:
        p = record("min2", minimize_reasons(p, var.second_min, user_model, oracle), t)
        checked(p, user_model)
    t = time.perf_counter()
    seq = merge_steps(p, user_model)
    stages.append(StageStat("merged", len(seq.steps), (time.perf_counter() - t) * 1000.0))
    result.sequence = seq
    result.oracle_calls = oracle.calls
    return result
