"""Weakly fair execution: unit enumeration with inhibition filtering,
reactive fixed points, transaction semantics, the two schedulers and the
trace recorder.

One engine step is the full atomic unit: the chosen statement (for a
transaction, its sub-assignments each followed by a reactive fixed point)
plus a final reactive fixed point.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .instantiate import CompiledSystem, FamilyDef, ReactiveDef, UnitDef
from .nodes import Assign, Quantified, Transaction
from .semantics import (
    EvalContext, SystemState, apply_assignment, canonical_state, default_value,
    eval_expr,
)
from .values import BOTTOM, EvalError, Loc, Value


class ExecError(Exception):
    pass


class ReactionDivergence(ExecError):
    def __init__(self, last_changed: str, iters: int):
        super().__init__(f"reaction divergence after {iters} sweeps; last "
                         f"change by {last_changed}")
        self.last_changed = last_changed
        self.iters = iters


@dataclass
class SchedulerConfig:
    """mode 'random': pick a priority block by weight (renormalized over the
    blocks that currently hold enabled units), then uniformly inside it.
    mode 'deficit': deterministic; statements left unserved long enough
    become overdue and preempt, which bounds the service gap of every
    continuously enabled statement by fairness_window * unit count."""

    mode: str = "random"
    block_weights: Optional[Dict[int, Fraction]] = None
    fairness_window: int = 4
    max_reaction_iters: int = 10_000
    seed: int = 0
    interaction_priority: Optional[int] = None
    store_full_states: bool = False

    def validate(self):
        if self.mode not in ("random", "deficit"):
            raise ValueError(f"unknown scheduler mode '{self.mode}'")
        if self.fairness_window < 1:
            raise ValueError("fairness_window must be positive")
        if self.max_reaction_iters < 1:
            raise ValueError("max_reaction_iters must be positive")
        if self.block_weights is not None:
            for p, w in self.block_weights.items():
                if w <= 0:
                    raise ValueError(f"block weight for priority {p} must be "
                                     f"strictly positive")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "block_weights": {str(k): str(v) for k, v in self.block_weights.items()}
                             if self.block_weights else None,
            "fairness_window": self.fairness_window,
            "max_reaction_iters": self.max_reaction_iters,
            "seed": self.seed,
            "interaction_priority": self.interaction_priority,
        }


def default_weights(priorities: List[int]) -> Dict[int, Fraction]:
    """Weight 2^rank by ascending priority, normalized; two blocks get the
    1/3 - 2/3 split."""
    ps = sorted(set(priorities))
    total = Fraction(2 ** len(ps) - 1)
    return {p: Fraction(2 ** i) / total for i, p in enumerate(ps)}


@dataclass
class EnabledUnit:
    key: str
    stmt: object  # Assign | Transaction
    scope: object
    binding: Dict[str, Value]
    priority: int
    order: int


@dataclass
class StepRecord:
    index: int
    unit: Optional[str]  # None for an idle step waiting on env events
    reactions: int
    digest: str
    error: Optional[str] = None


@dataclass
class Trace:
    system: str
    seed: int
    config: dict
    initial_digest: str
    records: List[StepRecord] = field(default_factory=list)
    states: Optional[List[SystemState]] = None  # incl. initial, when captured
    stop_reason: str = "max-steps"


def state_digest(state: SystemState) -> str:
    return hashlib.sha256(
        canonical_state(state).encode()).hexdigest()[:16]


class Engine:
    def __init__(self, compiled: CompiledSystem, hooks, config: SchedulerConfig):
        config.validate()
        self.compiled = compiled
        self.hooks = hooks
        self.config = config
        inter_prio = (config.interaction_priority
                      if config.interaction_priority is not None else None)
        self.slots = []
        for s in compiled.slots:
            if s.scope is None and inter_prio is not None:
                s = replace(s, priority=inter_prio)
            self.slots.append(s)
        prios = sorted({s.priority for s in self.slots}) or [1]
        if config.block_weights is None:
            self.weights = default_weights(prios)
        else:
            missing = [p for p in prios if p not in config.block_weights]
            if missing:
                raise ValueError(f"no weight configured for priority "
                                 f"block(s) {missing}")
            self.weights = dict(config.block_weights)
        provided = set(hooks.provides) if hooks is not None else set()
        self.active_slots = [s for s in self.slots
                             if s.required_hooks <= provided]
        self.active_reactive = [r for r in compiled.reactive
                                if r.required_hooks <= provided]

    # --- state construction ---

    def init_state(self, connectivity: frozenset = frozenset()) -> SystemState:
        stores: Dict[str, Dict[str, Value]] = {}
        for name, scope in self.compiled.scopes.items():
            store: Dict[str, Value] = {}
            for var, rt in scope.decls.items():
                store[var] = default_value(rt)
            store["self_addr"] = scope.addr
            at = self.compiled.at_locations[name]
            store["lambda"] = Loc(at) if at else BOTTOM
            stores[name] = store
        state = SystemState(stores, 0, connectivity)
        for name, scope in self.compiled.scopes.items():
            plan = self.compiled.init_plans[name]
            for var, expr in plan:
                ctx = self.compiled.ctx(state, self.hooks, scope)
                val = eval_expr(expr, ctx)
                stores = dict(state.stores)
                store = dict(stores[name])
                if var != "lambda" and var not in scope.decls:
                    raise ExecError(f"initially entry for undeclared variable "
                                    f"'{name}.{var}'")
                store[var] = val
                stores[name] = store
                state = SystemState(stores, 0, connectivity)
        return state

    # --- unit enumeration ---

    def enabled_units(self, state: SystemState) -> List[EnabledUnit]:
        """Units whose guard holds and which no inhibition disables; reactive
        statements never appear here."""
        out: List[EnabledUnit] = []
        for slot in self.active_slots:
            if isinstance(slot, UnitDef):
                self._check_unit(state, slot, slot.stmt, slot.binding,
                                 slot.key, out)
            else:
                self._expand_family(state, slot, out)
        return out

    def _check_unit(self, state, slot, stmt, binding, key, out):
        ctx = self.compiled.ctx(state, self.hooks, slot.scope, binding)
        if stmt.guard is not None:
            g = eval_expr(stmt.guard, ctx)
            if g is not True:
                if g is False:
                    return
                raise ExecError(f"guard of {key} is not boolean")
        label = getattr(slot, "label", None) or key
        inst = slot.scope.instance if slot.scope else None
        for pred, pbinding in self.compiled.inhibitions.get((inst, label), ()):
            ictx = self.compiled.ctx(state, self.hooks, None, pbinding)
            if eval_expr(pred, ictx) is True:
                return
        out.append(EnabledUnit(key, stmt, slot.scope, binding, slot.priority,
                               slot.order))

    def _expand_family(self, state, fam: FamilyDef, out,
                       collect: Optional[list] = None):
        """Instantiate a dynamic family against the current state, one unit
        per in-range binding."""
        q = fam.quantified

        def expand(binders, binding):
            if not binders:
                for st in q.body:
                    label = getattr(st, "label", None) or fam.label
                    key = (f"{fam.scope.instance if fam.scope else 'interaction'}"
                           f".{label}[" +
                           ",".join(f"{k}={v}" for k, v in binding.items()) + "]")
                    if collect is not None:
                        collect.append((key, st, binding))
                    else:
                        self._check_unit(state, fam, st, binding, key, out)
                return
            b = binders[0]
            ctx = self.compiled.ctx(state, self.hooks, fam.scope, binding)
            lo = eval_expr(b.lo, ctx)
            hi = eval_expr(b.hi, ctx)
            if isinstance(lo, bool) or not isinstance(lo, int) \
                    or isinstance(hi, bool) or not isinstance(hi, int):
                raise ExecError(f"family range of {fam.key_base} is not "
                                f"an integer")
            for v in range(lo, hi):
                inner = dict(binding)
                inner[b.var] = v
                expand(binders[1:], inner)

        expand(list(q.binders), dict(fam.binding))

    # --- reactions ---

    def reactive_fixed_point(self, state: SystemState) -> Tuple[SystemState, int]:
        """Sweep the reactive set in deterministic order until a full sweep
        changes nothing.  Raises ReactionDivergence past the iteration cap."""
        iters = 0
        last_changed = "<none>"
        max_iters = self.config.max_reaction_iters
        while True:
            iters += 1
            if iters > max_iters:
                raise ReactionDivergence(last_changed, iters - 1)
            changed_any = False
            for rdef in self.active_reactive:
                items: List[tuple]
                if isinstance(rdef, FamilyDef):
                    items = []
                    self._expand_family(state, rdef, None, collect=items)
                else:
                    items = [(rdef.key, rdef.stmt, rdef.binding)]
                for key, stmt, binding in items:
                    ctx = self.compiled.ctx(state, self.hooks, rdef.scope,
                                            binding)
                    if stmt.guard is not None and \
                            eval_expr(stmt.guard, ctx) is not True:
                        continue
                    state, changed = apply_assignment(state, stmt, ctx)
                    if changed:
                        changed_any = True
                        last_changed = key
            if not changed_any:
                return state, iters

    # --- execution ---

    def execute_unit(self, state: SystemState, eu: EnabledUnit
                     ) -> Tuple[SystemState, int]:
        """Run the full atomic step of one chosen unit (guard already
        known to hold); the step counter is not advanced here."""
        iters = 0
        if isinstance(eu.stmt, Transaction):
            for sub in eu.stmt.subs:
                ctx = self.compiled.ctx(state, self.hooks, eu.scope, eu.binding)
                if sub.guard is None or eval_expr(sub.guard, ctx) is True:
                    state, _ = apply_assignment(state, sub, ctx)
                state, it = self.reactive_fixed_point(state)
                iters += it
        else:
            ctx = self.compiled.ctx(state, self.hooks, eu.scope, eu.binding)
            state, _ = apply_assignment(state, eu.stmt, ctx)
        state, it = self.reactive_fixed_point(state)
        return state, iters + it

    def select_unit(self, units: List[EnabledUnit], rng: random.Random,
                    deficits: Optional[Dict[str, int]] = None) -> EnabledUnit:
        if not units:
            raise ExecError("no enabled units to select from")
        if len(units) == 1 and self.config.mode == "random":
            return units[0]
        if self.config.mode == "random":
            occupied = sorted({u.priority for u in units})
            weights = [float(self.weights[p]) for p in occupied]
            total = sum(weights)
            r = rng.random() * total
            acc = 0.0
            chosen_p = occupied[-1]
            for p, w in zip(occupied, weights):
                acc += w
                if r < acc:
                    chosen_p = p
                    break
            block = [u for u in units if u.priority == chosen_p]
            return block[rng.randrange(len(block))]
        # deficit mode
        assert deficits is not None
        for u in units:
            deficits[u.key] = deficits.get(u.key, 0) + 1
        k = len(units)
        threshold = (self.config.fairness_window - 1) * k + 1
        overdue = [u for u in units if deficits[u.key] >= threshold]
        if overdue:
            pool = overdue
        else:
            best = max(u.priority for u in units)
            pool = [u for u in units if u.priority == best]
        chosen = max(pool, key=lambda u: (deficits[u.key], -u.order))
        deficits[chosen.key] = 0
        return chosen

    def step(self, state: SystemState, rng: random.Random,
             deficits: Optional[Dict[str, int]] = None
             ) -> Optional[Tuple[SystemState, StepRecord]]:
        """One scheduling step; None at quiescence."""
        units = self.enabled_units(state)
        if not units:
            return None
        if deficits is None:
            deficits = {}
        eu = self.select_unit(units, rng, deficits)
        post, iters = self.execute_unit(state, eu)
        post = SystemState(post.stores, state.step + 1, post.connectivity)
        rec = StepRecord(state.step, eu.key, iters, state_digest(post))
        return post, rec

    def apply_events(self, state: SystemState) -> Tuple[SystemState, bool]:
        events = self.hooks.events(state.step)
        for ev in events:
            state = ev.apply(state, self.compiled)
        return state, bool(events)

    def run(self, max_steps: int,
            initial_connectivity: frozenset = frozenset()) -> Trace:
        """Seed-reproducible run of at most max_steps steps; stops early at
        quiescence (no enabled units and no future environment events)."""
        rng = random.Random(self.config.seed)
        deficits: Dict[str, int] = {}
        state = self.init_state(initial_connectivity)
        state, _ = self.apply_events(state)
        trace = Trace(self.compiled.sysdef.name, self.config.seed,
                      self.config.to_dict(), state_digest(state))
        if self.config.store_full_states:
            trace.states = [state]
        last_event = self.hooks.last_event_step()
        while len(trace.records) < max_steps:
            try:
                result = self.step(state, rng, deficits)
            except ExecError as exc:
                trace.records.append(StepRecord(state.step, None, 0,
                                                state_digest(state), str(exc)))
                trace.stop_reason = "error"
                return trace
            if result is None:
                if state.step < last_event:
                    # idle step: nothing enabled until scripted events arrive
                    state = SystemState(state.stores, state.step + 1,
                                        state.connectivity)
                    state, _ = self.apply_events(state)
                    trace.records.append(StepRecord(state.step - 1, None, 0,
                                                    state_digest(state)))
                    if trace.states is not None:
                        trace.states.append(state)
                    continue
                trace.stop_reason = "quiescent"
                return trace
            state, rec = result
            state, applied = self.apply_events(state)
            if applied:
                rec.digest = state_digest(state)
            trace.records.append(rec)
            if trace.states is not None:
                trace.states.append(state)
        return trace
