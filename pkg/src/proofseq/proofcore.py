"""Abstract proofs: ordered steps deriving constraint sets from reason sets.

A proof step derives a set of constraints from reasons that are either input
constraints (by id) or constraints derived by strictly earlier steps. The
concrete file format is line-oriented:

    # comment
    i <atom>[|<atom>...] c:<constraint-id>     inference from one constraint
    n <atom>[|<atom>...] s:<id>[,s:<id>...]    nogood from earlier steps
    d s:<id>                                   deletion hint (kept, ignored)
    c UNSAT s:<id>[,s:<id>...][,c:<id>...]     conclusion, derives false

Atoms are written compactly as <var><op><int> with op in {<=, >=, ==, !=}.
Step ids are 1-based in file order; the conclusion is itself a step (the
last one). Deletion hints never remove steps; trimming is an explicit
backward-reachability pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import (
    BudgetExceededError,
    DanglingReferenceError,
    ForwardReferenceError,
    ProofParseError,
    ProofSerializeError,
    ProofShapeError,
    UnknownConstraintError,
)
from .model import (
    AtomicConstraint,
    Clause,
    Expr,
    FALSE,
    clause_of,
)
from .oracle import BudgetExceeded, Oracle, Sat, negate_conjunction

INFERENCE = "inference"
NOGOOD = "nogood"
OTHER = "other"

SOLVER_LEVEL = "solver"
USER_LEVEL = "user"


@dataclass(frozen=True)
class InputRef:
    cid: str

    def __str__(self) -> str:
        return f"c:{self.cid}"


@dataclass(frozen=True)
class StepRef:
    step: int       # 1-based step id
    idx: int = 0    # index into that step's derived tuple

    def __str__(self) -> str:
        return f"s:{self.step}" if self.idx == 0 else f"s:{self.step}.{self.idx}"


ReasonRef = Union[InputRef, StepRef]


@dataclass(frozen=True)
class ProofStep:
    derived: tuple[Expr, ...]
    reasons: tuple[ReasonRef, ...]
    kind: str = OTHER


@dataclass(frozen=True)
class AbstractProof:
    level: str
    steps: tuple[ProofStep, ...]
    # deletion hints: (number of steps already emitted when the hint occurs, step id)
    deletions: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def is_refutation(self) -> bool:
        return bool(self.steps) and any(d == FALSE for d in self.steps[-1].derived)

    def resolve(self, ref: ReasonRef, model) -> Expr:
        """The constraint a reason reference denotes; model supplies input ids."""
        if isinstance(ref, InputRef):
            return model.constraint_by_id(ref.cid).expr
        return self.steps[ref.step - 1].derived[ref.idx]


def validate_refs(p: AbstractProof):
    """Check that every step reference points strictly backwards and in range."""
    for i, step in enumerate(p.steps, start=1):
        for ref in step.reasons:
            if isinstance(ref, StepRef):
                if ref.step >= i:
                    raise ForwardReferenceError(f"step {i} references step {ref.step}")
                if ref.step < 1:
                    raise DanglingReferenceError(f"step {i} references step {ref.step}")
                if ref.idx >= len(p.steps[ref.step - 1].derived):
                    raise DanglingReferenceError(
                        f"step {i} references missing constraint {ref.idx} of step {ref.step}")


# --- concrete syntax -------------------------------------------------------

_ATOM_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(<=|>=|==|!=)(-?\d+)$")
_SREF_RE = re.compile(r"^s:(\d+)$")
_CREF_RE = re.compile(r"^c:(\S+)$")


def _parse_atom(tok: str, var_by_name, lineno: int) -> AtomicConstraint:
    m = _ATOM_RE.match(tok)
    if not m:
        raise ProofParseError(f"malformed atom {tok!r}", lineno)
    name, op, val = m.group(1), m.group(2), int(m.group(3))
    try:
        var = var_by_name(name)
    except KeyError:
        raise ProofParseError(f"unknown variable {name!r}", lineno) from None
    return AtomicConstraint(var, op, val)


def _parse_refs(text: str, nsteps: int, constraint_ids, lineno: int,
                steps_only: bool) -> tuple[ReasonRef, ...]:
    refs: list[ReasonRef] = []
    for tok in text.split(","):
        tok = tok.strip()
        m = _SREF_RE.match(tok)
        if m:
            sid = int(m.group(1))
            if sid > nsteps:
                raise ForwardReferenceError(f"reference to step {sid} before it exists", lineno)
            if sid < 1:
                raise DanglingReferenceError(f"reference to step {sid}", lineno)
            refs.append(StepRef(sid))
            continue
        m = _CREF_RE.match(tok)
        if m and not steps_only:
            cid = m.group(1)
            if cid not in constraint_ids:
                raise UnknownConstraintError(f"unknown constraint id {cid!r}", lineno)
            refs.append(InputRef(cid))
            continue
        raise ProofParseError(f"malformed reference {tok!r}", lineno)
    return tuple(refs)


def parse_drcp(text: str, solver_model) -> AbstractProof:
    """Parse a proof against a solver model (atoms and c: refs must resolve).

    A proof with no UNSAT conclusion is accepted; is_refutation() is then False.
    """
    var_names = {v.name: v for v, _ in solver_model.vars}
    cids = set(solver_model.constraint_map)
    steps: list[ProofStep] = []
    deletions: list[tuple[int, int]] = []
    concluded = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if concluded:
            raise ProofParseError("content after the UNSAT conclusion", lineno)
        tag, _, rest = line.partition(" ")
        rest = rest.strip()
        if tag == "i":
            atoms_text, _, ref_text = rest.rpartition(" ")
            if not atoms_text:
                raise ProofParseError("inference step needs atoms and a constraint ref", lineno)
            atoms = tuple(_parse_atom(t.strip(), var_names.__getitem__, lineno)
                          for t in atoms_text.split("|"))
            refs = _parse_refs(ref_text, len(steps), cids, lineno, steps_only=False)
            if len(refs) != 1 or not isinstance(refs[0], InputRef):
                raise ProofParseError("inference step needs exactly one c:<id> reason", lineno)
            steps.append(ProofStep((clause_of(atoms),), refs, INFERENCE))
        elif tag == "n":
            atoms_text, _, ref_text = rest.rpartition(" ")
            if not atoms_text:
                raise ProofParseError("nogood step needs atoms and step refs", lineno)
            atoms = tuple(_parse_atom(t.strip(), var_names.__getitem__, lineno)
                          for t in atoms_text.split("|"))
            refs = _parse_refs(ref_text, len(steps), cids, lineno, steps_only=True)
            steps.append(ProofStep((clause_of(atoms),), refs, NOGOOD))
        elif tag == "d":
            refs = _parse_refs(rest, len(steps), cids, lineno, steps_only=True)
            if len(refs) != 1:
                raise ProofParseError("deletion hint takes exactly one s:<id>", lineno)
            deletions.append((len(steps), refs[0].step))
        elif tag == "c":
            kw, _, ref_text = rest.partition(" ")
            if kw != "UNSAT":
                raise ProofParseError(f"unknown conclusion {kw!r}", lineno)
            refs = ()
            if ref_text.strip():
                refs = _parse_refs(ref_text.strip(), len(steps), cids, lineno, steps_only=False)
            steps.append(ProofStep((FALSE,), refs, OTHER))
            concluded = True
        else:
            raise ProofParseError(f"unknown line tag {tag!r}", lineno)
    proof = AbstractProof(SOLVER_LEVEL, tuple(steps), tuple(deletions))
    validate_refs(proof)
    return proof


def _format_atom(a: AtomicConstraint) -> str:
    return f"{a.var.name}{a.op}{a.value}"


def serialize_proof(p: AbstractProof) -> str:
    """Render a proof in the concrete syntax; parse_drcp(serialize_proof(p)) == p.

    Only single-derived clause steps fit the format (which is all that parsing
    or the prover produce); anything else raises ProofSerializeError.
    """
    lines = ["# drcp 1"]
    hints = sorted(p.deletions, key=lambda t: t[0])
    h = 0
    for i, step in enumerate(p.steps, start=1):
        while h < len(hints) and hints[h][0] < i:
            lines.append(f"d s:{hints[h][1]}")
            h += 1
        if len(step.derived) != 1:
            raise ProofSerializeError(f"step {i} derives {len(step.derived)} constraints")
        d = step.derived[0]
        refs = ",".join(str(r) for r in step.reasons)
        if d == FALSE:
            if i != len(p.steps):
                raise ProofSerializeError(f"step {i} derives false before the conclusion")
            lines.append(f"c UNSAT {refs}".rstrip())
            continue
        if isinstance(d, AtomicConstraint):
            atoms: tuple[AtomicConstraint, ...] = (d,)
        elif isinstance(d, Clause):
            atoms = d.atoms
        else:
            raise ProofSerializeError(f"step {i} derives a non-clause {type(d).__name__}")
        body = "|".join(_format_atom(a) for a in atoms)
        if step.kind == INFERENCE:
            lines.append(f"i {body} {refs}")
        elif step.kind == NOGOOD:
            lines.append(f"n {body} {refs}")
        else:
            raise ProofSerializeError(f"step {i} has kind {step.kind!r}")
    while h < len(hints):
        lines.append(f"d s:{hints[h][1]}")
        h += 1
    return "\n".join(lines) + "\n"


# --- trimming ----------------------------------------------------------------


def trim(p: AbstractProof) -> AbstractProof:
    """Backward reachability from the final false step.

    Keeps exactly the steps (and the individual derived constraints) that feed
    the conclusion; reindexes references. Deletion hints are dropped.
    """
    if not p.is_refutation():
        raise ProofShapeError("cannot trim: final step does not derive false")
    n = len(p.steps)
    needed: list[set[int]] = [set() for _ in range(n)]
    false_idx = next(k for k, d in enumerate(p.steps[-1].derived) if d == FALSE)
    needed[n - 1].add(false_idx)
    seen_steps = {n - 1}
    stack = [n - 1]
    while stack:
        i = stack.pop()
        for ref in p.steps[i].reasons:
            if isinstance(ref, StepRef):
                j = ref.step - 1
                needed[j].add(ref.idx)
                if j not in seen_steps:
                    seen_steps.add(j)
                    stack.append(j)

    kept = sorted(seen_steps)
    new_id = {old: new for new, old in enumerate(kept, start=1)}
    idx_map: dict[int, dict[int, int]] = {}
    new_steps: list[ProofStep] = []
    for old in kept:
        step = p.steps[old]
        keep_idx = sorted(needed[old])
        idx_map[old] = {k: pos for pos, k in enumerate(keep_idx)}
        derived = tuple(step.derived[k] for k in keep_idx)
        reasons = tuple(
            StepRef(new_id[r.step - 1], idx_map[r.step - 1][r.idx]) if isinstance(r, StepRef) else r
            for r in step.reasons)
        new_steps.append(ProofStep(derived, reasons, step.kind))
    return AbstractProof(p.level, tuple(new_steps))


def is_trimmed(p: AbstractProof) -> bool:
    """The literal trimmed-proof predicate: every derived constraint of every
    non-final step is referenced by a later step, and the final step derives
    exactly false."""
    if not p.steps or p.steps[-1].derived != (FALSE,):
        return False
    n = len(p.steps)
    used: list[set[int]] = [set() for _ in range(n)]
    for step in p.steps:
        for ref in step.reasons:
            if isinstance(ref, StepRef):
                used[ref.step - 1].add(ref.idx)
    for i, step in enumerate(p.steps[:-1]):
        if set(range(len(step.derived))) - used[i]:
            return False
    return True


# --- semantic validity ----------------------------------------------------------


@dataclass
class StepCheck:
    valid: bool
    witness: Optional[dict] = None


def check_step(p: AbstractProof, index: int, model, oracle: Optional[Oracle] = None,
               budget: int = 10**6) -> StepCheck:
    """Is step `index` (1-based) implied by its reasons over the model's domains?

    Valid iff reasons plus the negated derived conjunction are unsatisfiable;
    an Invalid result carries a witness assignment satisfying the reasons and
    violating some derived constraint. Budget exhaustion raises, it is not a
    verdict.
    """
    step = p.steps[index - 1]
    if oracle is None:
        oracle = Oracle(model.vars, budget=budget)
    hard = [p.resolve(r, model) for r in step.reasons]
    hard.append(negate_conjunction(step.derived))
    res = oracle.solve(hard=hard)
    if isinstance(res, BudgetExceeded):
        raise BudgetExceededError(f"step {index}: oracle budget exhausted")
    if isinstance(res, Sat):
        return StepCheck(False, res.assignment)
    return StepCheck(True)


def check_proof(p: AbstractProof, model, oracle: Optional[Oracle] = None,
                budget: int = 10**6) -> list[int]:
    """Indices (1-based) of invalid steps; empty means fully valid."""
    if oracle is None:
        oracle = Oracle(model.vars, budget=budget)
    return [i for i in range(1, len(p.steps) + 1)
            if not check_step(p, i, model, oracle=oracle).valid]
