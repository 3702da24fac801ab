"""Finite-domain search engine: propagation, chronological backtracking and
nogood learning over atomic constraints, with optional proof logging.

One Engine instance runs one solve. The trail records every domain event as
an atomic constraint together with the trail entries that premised it, so
conflict analysis can resolve backwards and emit inference/nogood steps on
demand. Only conflict-participating propagations are logged unless log_all
is set.

Propagation strength: bounds reasoning for linear sums, unit propagation for
clauses, value-based pairwise pruning for alldifferent, guard/body reasoning
for half-reified linears. Search is complete, so weak propagation only costs
nodes, never soundness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

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
    VarId,
    as_expr,
)

OK = 0
NOOP = 1

Atom = tuple  # (var slot, op, value)


@dataclass
class EngineStep:
    """One logged proof step: an inference ('i'), a nogood ('n') or the conclusion ('c')."""

    kind: str
    atoms: tuple[Atom, ...]
    cid: Optional[str] = None      # inference source constraint
    reasons: tuple[int, ...] = ()  # 1-based step ids (nogood / conclusion)
    cid_reasons: tuple[str, ...] = ()  # conclusion only: directly cited constraints


@dataclass
class EngineResult:
    status: str                                   # "sat" | "unsat" | "budget"
    assignment: Optional[dict[int, int]] = None   # var slot -> value (sat only)
    steps: list[EngineStep] = field(default_factory=list)
    used_cids: frozenset = frozenset()            # constraint ids reachable from the conclusion
    conflicts: int = 0


class Conflict:
    """A violated clause: `entries` falsify every literal of `step_atoms`."""

    __slots__ = ("entries", "source", "step_atoms")

    def __init__(self, entries, source, step_atoms):
        self.entries = entries          # trail indices
        self.source = source            # ("c", cid) or ("g", nogood index)
        self.step_atoms = step_atoms    # literals of the violated clause


class Engine:
    def __init__(self, vars_domains: Sequence[tuple[VarId, Domain]], budget: int = 10**6,
                 log_all: bool = False):
        self.names: list[str] = []
        self.root_lb: list[int] = []
        self.root_ub: list[int] = []
        self.root_holes: list[frozenset[int]] = []
        self.slot_of: dict[VarId, int] = {}
        self.internal: set[int] = set()
        for v, d in vars_domains:
            self.slot_of[v] = self._add_slot(v.name, d)
        self.budget = budget
        self.log_all = log_all

        n = len(self.names)
        self.lb = list(self.root_lb)
        self.ub = list(self.root_ub)
        self.holes: list[dict[int, int]] = [dict.fromkeys(h, -1) for h in self.root_holes]
        # bound histories, newest first: ("b", value, entry) for an applied bound atom,
        # ("s", value, entry) for a one-step slide over the hole removed by `entry`
        self.lb_hist: list[list[tuple[str, int, int]]] = [[] for _ in range(n)]
        self.ub_hist: list[list[tuple[str, int, int]]] = [[] for _ in range(n)]

        self.t_atom: list[Atom] = []
        self.t_level: list[int] = []
        self.t_reason: list[Optional[tuple]] = []  # None=decision, ("c",cid,entries) or ("g",gid,entries)
        self.t_effects: list[list[tuple]] = []
        self.level = 0
        self.level_start: list[int] = [0]

        self.props: list[tuple] = []
        self.watch: list[list[int]] = [[] for _ in range(n)]
        self.queue: list[int] = []
        self.qhead = 0
        self.in_queue: list[bool] = []
        self.nogoods: list[tuple] = []  # (atoms, n-step id)

        self.steps: list[EngineStep] = []
        self.entry_step: dict[int, int] = {}
        self.conflicts = 0
        self.empty_at_root = any(self.root_lb[i] > self.root_ub[i] for i in range(n))

    # --- setup -----------------------------------------------------------

    def _add_slot(self, name: str, d: Domain) -> int:
        self.names.append(name)
        self.root_lb.append(d.lower)
        self.root_ub.append(d.upper)
        self.root_holes.append(d.holes)
        return len(self.names) - 1

    def _fresh_internal(self) -> int:
        s = self._add_slot(f"_sel{len(self.names)}", Domain(0, 1))
        self.lb.append(0)
        self.ub.append(1)
        self.holes.append({})
        self.lb_hist.append([])
        self.ub_hist.append([])
        self.watch.append([])
        self.internal.add(s)
        return s

    def atom_of(self, a: AtomicConstraint) -> Atom:
        return (self.slot_of[a.var], a.op, a.value)

    def add_constraint(self, cid: str, c: Union[Expr, Constraint]):
        """Compile an expression into primitive propagators registered under cid."""
        self._compile(cid, as_expr(c))

    def _register(self, prop: tuple, var_slots):
        idx = len(self.props)
        self.props.append(prop)
        self.in_queue.append(False)
        for s in set(var_slots):
            self.watch[s].append(idx)
        self._enqueue(idx)

    def _enqueue(self, idx: int):
        if not self.in_queue[idx]:
            self.in_queue[idx] = True
            self.queue.append(idx)

    def _compile(self, cid: str, e: Expr):
        if isinstance(e, AtomicConstraint):
            a = self.atom_of(e)
            self._register(("atomic", cid, a), (a[0],))
        elif isinstance(e, Clause):
            atoms = tuple(dict.fromkeys(self.atom_of(a) for a in e.atoms))
            self._register(("clause", ("c", cid), atoms), (a[0] for a in atoms))
        elif isinstance(e, Linear):
            self._compile_linear(cid, e, guard=None)
        elif isinstance(e, AllDifferent):
            slots = tuple(self.slot_of[v] for v in e.vars)
            self._register(("alldiff", cid, slots), slots)
        elif isinstance(e, HalfReified):
            self._compile_linear(cid, e.then, guard=self.atom_of(e.guard))
        elif isinstance(e, Conjunction):
            for m in e.members:
                self._compile(cid, m)
        elif isinstance(e, Disjunction):
            self._compile_disjunction(cid, e)
        else:
            raise FlattenError(f"engine cannot compile {type(e).__name__}")

    def _compile_linear(self, cid: str, lin: Linear, guard: Optional[Atom]):
        terms = tuple((coef, self.slot_of[v]) for coef, v in lin.terms if coef != 0)
        slots = [s for _, s in terms] + ([guard[0]] if guard else [])
        if lin.op in ("<=", "=="):
            self._register(("lin", cid, guard, terms, lin.rhs), slots)
        if lin.op in (">=", "=="):
            neg = tuple((-c, s) for c, s in terms)
            self._register(("lin", cid, guard, neg, -lin.rhs), slots)
        if lin.op == "!=":
            self._register(("linne", cid, guard, terms, lin.rhs), slots)

    def _compile_disjunction(self, cid: str, e: Disjunction):
        members: list[Expr] = []
        stack = list(e.members)
        while stack:
            m = stack.pop(0)
            if isinstance(m, Disjunction):
                stack = list(m.members) + stack
            elif isinstance(m, HalfReified):
                stack = [m.guard.negated(), m.then] + stack
            else:
                members.append(m)
        if len(members) == 1:
            self._compile(cid, members[0])
            return
        if all(isinstance(m, AtomicConstraint) for m in members):
            atoms = tuple(dict.fromkeys(self.atom_of(m) for m in members))
            self._register(("clause", ("c", cid), atoms), (a[0] for a in atoms))
            return
        sels = []
        for m in members:
            s = self._fresh_internal()
            sels.append(s)
            self._compile_guarded(cid, (s, "==", 1), m)
        cover = tuple((s, ">=", 1) for s in sels)
        self._register(("clause", ("c", cid), cover), sels)

    def _compile_guarded(self, cid: str, guard: Atom, m: Expr):
        neg_guard = _negate_atom(guard)
        if isinstance(m, AtomicConstraint):
            a = self.atom_of(m)
            self._register(("clause", ("c", cid), (neg_guard, a)), (guard[0], a[0]))
        elif isinstance(m, Linear):
            terms = tuple((coef, self.slot_of[v]) for coef, v in m.terms if coef != 0)
            slots = [s for _, s in terms] + [guard[0]]
            if m.op in ("<=", "=="):
                self._register(("lin", cid, guard, terms, m.rhs), slots)
            if m.op in (">=", "=="):
                neg = tuple((-c, s) for c, s in terms)
                self._register(("lin", cid, guard, neg, -m.rhs), slots)
            if m.op == "!=":
                self._register(("linne", cid, guard, terms, m.rhs), slots)
        elif isinstance(m, Clause):
            atoms = (neg_guard,) + tuple(self.atom_of(a) for a in m.atoms)
            atoms = tuple(dict.fromkeys(atoms))
            self._register(("clause", ("c", cid), atoms), (a[0] for a in atoms))
        elif isinstance(m, Conjunction):
            for part in m.members:
                self._compile_guarded(cid, guard, part)
        else:
            raise FlattenError(f"cannot guard {type(m).__name__} inside a disjunction")

    # --- domain state ------------------------------------------------------

    def status(self, atom: Atom) -> Optional[bool]:
        vi, op, val = atom
        lb, ub = self.lb[vi], self.ub[vi]
        if op == ">=":
            return True if lb >= val else (False if ub < val else None)
        if op == "<=":
            return True if ub <= val else (False if lb > val else None)
        in_dom = lb <= val <= ub and val not in self.holes[vi]
        if op == "==":
            return True if lb == ub == val else (None if in_dom else False)
        return False if lb == ub == val else (True if not in_dom else None)

    def justify_ge(self, vi: int, t: int) -> list[int]:
        """Entries entailing vi >= t; t must hold under the current domain."""
        if t <= self.root_lb[vi]:
            return []
        hist = self.lb_hist[vi]
        k = len(hist) - 1
        while hist[k][1] < t:
            k -= 1
        out = []
        while k < len(hist):
            kind, _, e = hist[k]
            if e >= 0:
                out.append(e)
            if kind == "b":
                break
            k += 1
        return out

    def justify_le(self, vi: int, t: int) -> list[int]:
        if t >= self.root_ub[vi]:
            return []
        hist = self.ub_hist[vi]
        k = len(hist) - 1
        while hist[k][1] > t:
            k -= 1
        out = []
        while k < len(hist):
            kind, _, e = hist[k]
            if e >= 0:
                out.append(e)
            if kind == "b":
                break
            k += 1
        return out

    def justify_ne(self, vi: int, v: int) -> list[int]:
        """Entries entailing v not in dom(vi)."""
        if v < self.root_lb[vi] or v > self.root_ub[vi]:
            return []
        if v < self.lb[vi]:
            return self.justify_ge(vi, v + 1)
        if v > self.ub[vi]:
            return self.justify_le(vi, v - 1)
        e = self.holes[vi][v]
        return [] if e < 0 else [e]

    def justify_false(self, atom: Atom) -> list[int]:
        vi, op, val = atom
        if op == ">=":
            return self.justify_le(vi, val - 1)
        if op == "<=":
            return self.justify_ge(vi, val + 1)
        if op == "==":
            return self.justify_ne(vi, val)
        return self.justify_ge(vi, val) + self.justify_le(vi, val)

    def justify_true(self, atom: Atom) -> list[int]:
        vi, op, val = atom
        if op == ">=":
            return self.justify_ge(vi, val)
        if op == "<=":
            return self.justify_le(vi, val)
        if op == "==":
            return self.justify_ge(vi, val) + self.justify_le(vi, val)
        return self.justify_ne(vi, val)

    # --- trail -------------------------------------------------------------

    def apply(self, atom: Atom, reason: Optional[tuple]):
        """Apply an atomic domain change; returns OK, NOOP or a Conflict."""
        vi, op, val = atom
        st = self.status(atom)
        if st is True:
            return NOOP
        if st is False:
            if reason is None:
                raise AssertionError("decision on a falsified atom")
            kind, key, premises = reason
            step_atoms = (atom,) + tuple(
                _negate_atom(self.t_atom[q]) for q in _stable_unique(premises))
            entries = list(premises) + self.justify_false(atom)
            return Conflict(_stable_unique(entries), (kind, key), step_atoms)
        e = len(self.t_atom)
        self.t_atom.append(atom)
        self.t_level.append(self.level)
        self.t_reason.append(reason)
        self.t_effects.append([])
        for idx in self.watch[vi]:
            self._enqueue(idx)
        if op == ">=":
            v = val
            while v in self.holes[vi]:
                v += 1
            recs = [("b", val, e)] + [("s", h + 1, self.holes[vi][h]) for h in range(val, v)]
            self._record_lb(vi, e, recs)
        elif op == "<=":
            v = val
            while v in self.holes[vi]:
                v -= 1
            recs = [("b", val, e)] + [("s", h - 1, self.holes[vi][h]) for h in range(val, v, -1)]
            self._record_ub(vi, e, recs)
        elif op == "==":
            self._record_lb(vi, e, [("b", val, e)])
            self._record_ub(vi, e, [("b", val, e)])
        else:  # !=
            if val == self.lb[vi]:
                v = val + 1
                while v in self.holes[vi]:
                    v += 1
                recs = [("s", val + 1, e)] + [("s", h + 1, self.holes[vi][h]) for h in range(val + 1, v)]
                self._record_lb(vi, e, recs)
            elif val == self.ub[vi]:
                v = val - 1
                while v in self.holes[vi]:
                    v -= 1
                recs = [("s", val - 1, e)] + [("s", h - 1, self.holes[vi][h]) for h in range(val - 1, v, -1)]
                self._record_ub(vi, e, recs)
            else:
                self.t_effects[e].append(("hole", vi, val))
                self.holes[vi][val] = e
        if self.log_all and reason is not None:
            self._step_for_entry(e)
        return OK

    def _record_lb(self, vi, entry, recs):
        self.t_effects[entry].append(("lb", vi, self.lb[vi], len(self.lb_hist[vi])))
        for rec in recs:
            self.lb_hist[vi].insert(0, rec)
        self.lb[vi] = recs[-1][1]

    def _record_ub(self, vi, entry, recs):
        self.t_effects[entry].append(("ub", vi, self.ub[vi], len(self.ub_hist[vi])))
        for rec in recs:
            self.ub_hist[vi].insert(0, rec)
        self.ub[vi] = recs[-1][1]

    def backtrack_to(self, level: int):
        target = self.level_start[level + 1]
        while len(self.t_atom) > target:
            e = len(self.t_atom) - 1
            for eff in reversed(self.t_effects[e]):
                if eff[0] == "lb":
                    _, vi, old, histlen = eff
                    del self.lb_hist[vi][0:len(self.lb_hist[vi]) - histlen]
                    self.lb[vi] = old
                elif eff[0] == "ub":
                    _, vi, old, histlen = eff
                    del self.ub_hist[vi][0:len(self.ub_hist[vi]) - histlen]
                    self.ub[vi] = old
                else:
                    _, vi, val = eff
                    del self.holes[vi][val]
            self.entry_step.pop(e, None)
            self.t_atom.pop()
            self.t_level.pop()
            self.t_reason.pop()
            self.t_effects.pop()
        del self.level_start[level + 1:]
        self.level = level
        self.queue.clear()
        self.qhead = 0
        for i in range(len(self.in_queue)):
            self.in_queue[i] = False

    # --- propagators ---------------------------------------------------------

    def _propagate(self) -> Optional[Conflict]:
        while self.qhead < len(self.queue):
            idx = self.queue[self.qhead]
            self.qhead += 1
            self.in_queue[idx] = False
            conflict = self._run_prop(idx)
            if conflict is not None:
                return conflict
        self.queue.clear()
        self.qhead = 0
        return None

    def _run_prop(self, idx: int) -> Optional[Conflict]:
        p = self.props[idx]
        tag = p[0]
        if tag == "clause":
            return self._prop_clause(p)
        if tag == "lin":
            return self._prop_lin(p)
        if tag == "atomic":
            _, cid, atom = p
            r = self.apply(atom, ("c", cid, ()))
            return r if isinstance(r, Conflict) else None
        if tag == "linne":
            return self._prop_linne(p)
        if tag == "alldiff":
            return self._prop_alldiff(p)
        raise AssertionError(tag)

    def _prop_clause(self, p) -> Optional[Conflict]:
        _, source, atoms = p
        unit = None
        nundec = 0
        for a in atoms:
            st = self.status(a)
            if st is True:
                return None
            if st is None:
                nundec += 1
                if nundec > 1:
                    return None
                unit = a
        if unit is None:
            entries = []
            for a in atoms:
                entries.extend(self.justify_false(a))
            return Conflict(_stable_unique(entries), source, atoms)
        premises = []
        for a in atoms:
            if a != unit:
                premises.extend(self.justify_false(a))
        r = self.apply(unit, (source[0], source[1], tuple(_stable_unique(premises))))
        return r if isinstance(r, Conflict) else None

    def _prop_lin(self, p) -> Optional[Conflict]:
        # sum(coef*var) <= rhs, optionally under an atomic guard
        _, cid, guard, terms, rhs = p
        gst = True if guard is None else self.status(guard)
        if gst is False:
            return None
        smin = 0
        for coef, s in terms:
            smin += coef * (self.lb[s] if coef > 0 else self.ub[s])
        if smin > rhs:
            premises = self._lin_premises(terms, None)
            if gst is not True:
                r = self.apply(_negate_atom(guard), ("c", cid, tuple(_stable_unique(premises))))
                return r if isinstance(r, Conflict) else None
            if not terms:
                # degenerate constant constraint: cite it from the conclusion
                return Conflict((), ("c", cid), ())
            # pivot on the first term so the violated step derives an atom
            # (keeps inference clauses nonempty even with all-root premises)
            coef, s = terms[0]
            contrib = coef * (self.lb[s] if coef > 0 else self.ub[s])
            slack = rhs - (smin - contrib)
            pivot = (s, "<=", slack // coef) if coef > 0 else (s, ">=", -(slack // -coef))
            r = self.apply(pivot, self._lin_reason(cid, guard, terms, s))
            if not isinstance(r, Conflict):
                raise AssertionError("pivot bound unexpectedly applied")
            return r
        if gst is not True:
            return None
        for coef, s in terms:
            contrib = coef * (self.lb[s] if coef > 0 else self.ub[s])
            slack = rhs - (smin - contrib)
            if coef > 0:
                bound = slack // coef
                if bound < self.ub[s]:
                    r = self.apply((s, "<=", bound), self._lin_reason(cid, guard, terms, s))
                    if isinstance(r, Conflict):
                        return r
            else:
                bound = -(slack // -coef)
                if bound > self.lb[s]:
                    r = self.apply((s, ">=", bound), self._lin_reason(cid, guard, terms, s))
                    if isinstance(r, Conflict):
                        return r
        return None

    def _lin_reason(self, cid, guard, terms, skip):
        premises = self._lin_premises(terms, skip)
        if guard is not None:
            premises = self.justify_true(guard) + premises
        return ("c", cid, tuple(_stable_unique(premises)))

    def _lin_premises(self, terms, skip) -> list[int]:
        out: list[int] = []
        for coef, s in terms:
            if s == skip:
                continue
            if coef > 0:
                out.extend(self.justify_ge(s, self.lb[s]))
            else:
                out.extend(self.justify_le(s, self.ub[s]))
        return out

    def _prop_linne(self, p) -> Optional[Conflict]:
        _, cid, guard, terms, rhs = p
        gst = True if guard is None else self.status(guard)
        if gst is False:
            return None
        unfixed = [(coef, s) for coef, s in terms if self.lb[s] != self.ub[s]]
        if len(unfixed) > 1:
            return None
        fixed_sum = sum(coef * self.lb[s] for coef, s in terms if self.lb[s] == self.ub[s])
        premises: list[int] = []
        for coef, s in terms:
            if self.lb[s] == self.ub[s]:
                premises.extend(self.justify_ge(s, self.lb[s]))
                premises.extend(self.justify_le(s, self.ub[s]))
        if not unfixed:
            if fixed_sum != rhs:
                return None
            if gst is not True:
                r = self.apply(_negate_atom(guard), ("c", cid, tuple(_stable_unique(premises))))
                return r if isinstance(r, Conflict) else None
            if not terms:
                return Conflict((), ("c", cid), ())
            # pivot as in the inequality case: derive the first variable's
            # exclusion so the violated step is a nonempty clause
            coef, s = terms[0]
            others: list[int] = []
            for c2, s2 in terms[1:]:
                others.extend(self.justify_ge(s2, self.lb[s2]))
                others.extend(self.justify_le(s2, self.ub[s2]))
            if guard is not None:
                others = self.justify_true(guard) + others
            r = self.apply((s, "!=", self.lb[s]), ("c", cid, tuple(_stable_unique(others))))
            if not isinstance(r, Conflict):
                raise AssertionError("pivot exclusion unexpectedly applied")
            return r
        if gst is not True:
            return None
        coef, s = unfixed[0]
        rem = rhs - fixed_sum
        if rem % coef != 0:
            return None
        if guard is not None:
            premises = self.justify_true(guard) + premises
        r = self.apply((s, "!=", rem // coef), ("c", cid, tuple(_stable_unique(premises))))
        return r if isinstance(r, Conflict) else None

    def _prop_alldiff(self, p) -> Optional[Conflict]:
        _, cid, slots = p
        for s in slots:
            if self.lb[s] != self.ub[s]:
                continue
            v = self.lb[s]
            premises = tuple(_stable_unique(self.justify_ge(s, v) + self.justify_le(s, v)))
            for t in slots:
                if t == s:
                    continue
                r = self.apply((t, "!=", v), ("c", cid, premises))
                if isinstance(r, Conflict):
                    return r
        return None

    # --- proof logging -------------------------------------------------------

    def _step_for_entry(self, e: int) -> int:
        """Emit (once) the inference step justifying trail entry e; returns its 1-based id."""
        if e in self.entry_step:
            return self.entry_step[e]
        reason = self.t_reason[e]
        if reason is None:
            raise AssertionError("decisions have no justifying step")
        kind, key, premises = reason
        if kind == "g":
            sid = self.nogoods[key][1]
        else:
            atoms = (self.t_atom[e],) + tuple(
                _negate_atom(self.t_atom[q]) for q in _stable_unique(premises))
            self.steps.append(EngineStep("i", atoms, cid=key))
            sid = len(self.steps)
        self.entry_step[e] = sid
        return sid

    def _step_for_source(self, conflict: Conflict):
        kind, key = conflict.source
        if kind == "g":
            return self.nogoods[key][1]
        if not conflict.step_atoms:
            # an input constraint false on its own: the conclusion cites it
            # directly rather than through an empty-clause inference
            return ("cid", key)
        self.steps.append(EngineStep("i", conflict.step_atoms, cid=key))
        return len(self.steps)

    # --- conflict analysis -----------------------------------------------------

    def _analyze(self, conflict: Conflict):
        first = self._step_for_source(conflict)
        reasons: list[int] = []
        cid_reasons: list[str] = []
        if isinstance(first, tuple):
            cid_reasons.append(first[1])
        else:
            reasons.append(first)
        cc: dict[int, None] = dict.fromkeys(conflict.entries)

        def expand(e: int):
            del cc[e]
            sid = self._step_for_entry(e)
            if sid not in reasons:
                reasons.append(sid)
            for q in self.t_reason[e][2]:
                cc.setdefault(q)

        while True:
            if not cc:
                return ("root", reasons, cid_reasons)
            clevel = max(self.t_level[e] for e in cc)
            if clevel == 0:
                expandable = [e for e in cc if self.t_reason[e] is not None]
                while expandable:
                    expand(max(expandable))
                    expandable = [e for e in cc if self.t_reason[e] is not None]
                if cc:
                    raise AssertionError("unexpandable root entries")
                return ("root", reasons, cid_reasons)
            if cid_reasons:
                raise AssertionError("constraint-only conflicts are root conflicts")
            at_level = [e for e in cc if self.t_level[e] == clevel]
            while len(at_level) > 1:
                expand(max(at_level))
                at_level = [e for e in cc if self.t_level[e] == clevel]
            return ("learn", clevel, sorted(cc), reasons)

    # --- search ------------------------------------------------------------------

    def solve(self) -> EngineResult:
        if self.empty_at_root:
            self.steps.append(EngineStep("c", ()))
            return EngineResult("unsat", steps=self.steps, used_cids=frozenset(),
                                conflicts=self.conflicts)
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                if self.conflicts > self.budget:
                    return EngineResult("budget", conflicts=self.conflicts)
                outcome = self._analyze(conflict)
                if outcome[0] == "root":
                    self.steps.append(EngineStep("c", (), reasons=tuple(outcome[1]),
                                                 cid_reasons=tuple(outcome[2])))
                    return EngineResult("unsat", steps=self.steps,
                                        used_cids=self._used_cids(), conflicts=self.conflicts)
                _, clevel, cc_entries, reasons = outcome
                nogood_atoms = tuple(_negate_atom(self.t_atom[e]) for e in cc_entries)
                self.steps.append(EngineStep("n", nogood_atoms, reasons=tuple(reasons)))
                gid = len(self.nogoods)
                self.nogoods.append((nogood_atoms, len(self.steps)))
                self.backtrack_to(max(clevel - 1, 0))
                self._register(("clause", ("g", gid), nogood_atoms),
                               (a[0] for a in nogood_atoms))
                continue
            vi = self._pick_var()
            if vi is None:
                assignment = {s: self.lb[s] for s in range(len(self.names))
                              if s not in self.internal}
                return EngineResult("sat", assignment=assignment, steps=self.steps,
                                    conflicts=self.conflicts)
            self.level += 1
            self.level_start.append(len(self.t_atom))
            self.apply((vi, "==", self.lb[vi]), None)

    def _pick_var(self) -> Optional[int]:
        for s in range(len(self.names)):
            if self.lb[s] != self.ub[s]:
                return s
        return None

    def _used_cids(self) -> frozenset:
        used: set = set(self.steps[-1].cid_reasons)
        seen: set[int] = set()
        stack = list(self.steps[-1].reasons)
        while stack:
            sid = stack.pop()
            if sid in seen:
                continue
            seen.add(sid)
            step = self.steps[sid - 1]
            if step.kind == "i":
                used.add(step.cid)
            stack.extend(step.reasons)
        return frozenset(used)


def _negate_atom(atom: Atom) -> Atom:
    vi, op, val = atom
    if op == "<=":
        return (vi, ">=", val + 1)
    if op == ">=":
        return (vi, "<=", val - 1)
    return (vi, "!=" if op == "==" else "==", val)


def _stable_unique(seq) -> list:
    return list(dict.fromkeys(seq))
