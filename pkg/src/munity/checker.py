"""Safety and progress relation checking.

Exact checks run over an explored transition system; a truncated or
error-tainted exploration can report violations but never certifies that a
relation holds.  Trace-based checks give the run-time approximation for
systems too large to explore, including leads-to with an open-obligation
scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .engine import Engine, Trace
from .explore import TransitionSystem, is_env_edge
from .nodes import Binary, Expr, Lit, Unary
from .semantics import SystemState
from .values import EvalError

from . import semantics


class CheckError(Exception):
    pass


@dataclass
class Verdict:
    status: str  # 'holds' | 'violated' | 'unknown'
    detail: str = ""
    counterexample: Optional[List[Tuple[Optional[str], str]]] = None
    witness: Optional[str] = None  # transient: the uniformly enabled statement

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def __str__(self):
        extra = f" ({self.detail})" if self.detail else ""
        return self.status + extra


class PredicateEvaluator:
    """Evaluates a named state predicate; evaluation faults surface as
    CheckError rather than as false."""

    def __init__(self, engine: Engine, expr: Expr, name: str = "<pred>"):
        self.engine = engine
        self.expr = expr
        self.name = name
        self._cache: Dict[int, bool] = {}

    def __call__(self, state: SystemState) -> bool:
        key = id(state)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ctx = self.engine.compiled.ctx(state, self.engine.hooks)
        try:
            v = semantics.eval_expr(self.expr, ctx)
        except EvalError as exc:
            raise CheckError(f"predicate {self.name}: {exc}")
        if not isinstance(v, bool):
            raise CheckError(f"predicate {self.name} is not boolean")
        self._cache[key] = v
        return v


def _unknown_if_incomplete(ts: TransitionSystem, detail: str) -> Optional[Verdict]:
    if ts.tainted:
        return Verdict("unknown", f"exploration tainted by errors; {detail}")
    if ts.truncated:
        reasons = ",".join(ts.truncate_reasons)
        return Verdict("unknown", f"exploration truncated ({reasons}); {detail}")
    return None


def check_co(ts: TransitionSystem, engine: Engine, p: Expr, q: Expr,
             name: str = "co") -> Verdict:
    """p co q: from every state satisfying p, each successor satisfies q.
    Environment edges count as successors."""
    pe = PredicateEvaluator(engine, p, f"{name}.lhs")
    qe = PredicateEvaluator(engine, q, f"{name}.rhs")
    for key, succs in ts.adjacency.items():
        if not pe(ts.states[key]):
            continue
        for unit, skey in succs:
            if not qe(ts.states[skey]):
                path = ts.path_to(key)
                path.append((unit, skey))
                return Verdict("violated", f"edge {unit} leaves q",
                               counterexample=path)
    incomplete = _unknown_if_incomplete(ts, "no violation found")
    return incomplete or Verdict("holds")


def check_invariant(ts: TransitionSystem, engine: Engine, inv: Expr,
                    name: str = "invariant") -> Verdict:
    """Holds iff the predicate is true in every initial state and is
    preserved by every edge (inv co inv)."""
    pe = PredicateEvaluator(engine, inv, name)
    for key in ts.initial:
        if not pe(ts.states[key]):
            return Verdict("violated", "false in an initial state",
                           counterexample=[(None, key)])
    verdict = check_co(ts, engine, inv, inv, name)
    if verdict.status == "violated":
        return verdict
    # any reachable falsifying state also witnesses a violation
    for key, state in ts.states.items():
        if not pe(state):
            return Verdict("violated", "reachable state falsifies invariant",
                           counterexample=ts.path_to(key))
    return verdict


def check_transient(ts: TransitionSystem, engine: Engine, p: Expr,
                    name: str = "transient") -> Verdict:
    """transient p: one single statement is enabled in every reachable
    p-state and its execution falsifies p.  The witness must be uniform; a
    different statement per state does not qualify."""
    pe = PredicateEvaluator(engine, p, name)
    p_states = [k for k in ts.states if pe(ts.states[k])]
    if not p_states:
        incomplete = _unknown_if_incomplete(ts, "p unreachable")
        return incomplete or Verdict("holds", "vacuous: no reachable p-state")
    expanded_p = [k for k in p_states if k in ts.expanded]
    unexpanded = len(expanded_p) != len(p_states)
    candidates: List[str] = []
    for k in expanded_p:
        for unit, _ in ts.adjacency[k]:
            if not is_env_edge(unit) and unit not in candidates:
                candidates.append(unit)
    for unit in candidates:
        ok = True
        for k in expanded_p:
            succ = [skey for u, skey in ts.adjacency[k] if u == unit]
            if not succ or pe(ts.states[succ[0]]):
                ok = False
                break
        if ok:
            if unexpanded or ts.truncated or ts.tainted:
                return Verdict("unknown",
                               f"candidate witness {unit} works on explored "
                               f"p-states but exploration is incomplete")
            return Verdict("holds", witness=unit)
    # failing on the explored subset already refutes uniform falsification
    return Verdict("violated", "no single statement uniformly falsifies p "
                   f"over {len(expanded_p)} p-state(s)",
                   counterexample=ts.path_to(expanded_p[0]))


def check_ensures(ts: TransitionSystem, engine: Engine, p: Expr, q: Expr,
                  name: str = "ensures") -> Verdict:
    """p ensures q: (p and not q co p or q) and transient(p and not q)."""
    p_and_not_q = Binary("and", p, Unary("not", q))
    p_or_q = Binary("or", p, q)
    co_v = check_co(ts, engine, p_and_not_q, p_or_q, name)
    if co_v.status == "violated":
        return Verdict("violated", f"co conjunct failed: {co_v.detail}",
                       counterexample=co_v.counterexample)
    tr_v = check_transient(ts, engine, p_and_not_q, name)
    if tr_v.status == "violated":
        return Verdict("violated", f"transient conjunct failed: {tr_v.detail}",
                       counterexample=tr_v.counterexample)
    if co_v.status == "unknown" or tr_v.status == "unknown":
        return Verdict("unknown", co_v.detail or tr_v.detail)
    return Verdict("holds", witness=tr_v.witness)


# --- trace-based approximations ---------------------------------------------------


def _trace_states(trace: Trace) -> List[SystemState]:
    if trace.states is None:
        raise CheckError("trace does not carry full states; rerun with "
                         "store_full_states")
    return trace.states


def check_trace_invariant(trace: Trace, engine: Engine, inv: Expr,
                          name: str = "invariant") -> Verdict:
    pe = PredicateEvaluator(engine, inv, name)
    for i, st in enumerate(_trace_states(trace)):
        if not pe(st):
            return Verdict("violated", f"false at step {i}")
    return Verdict("holds", "over the observed trace")


def check_trace_co(trace: Trace, engine: Engine, p: Expr, q: Expr,
                   name: str = "co") -> Verdict:
    states = _trace_states(trace)
    pe = PredicateEvaluator(engine, p, f"{name}.lhs")
    qe = PredicateEvaluator(engine, q, f"{name}.rhs")
    for i in range(len(states) - 1):
        if pe(states[i]) and not qe(states[i + 1]):
            return Verdict("violated", f"step {i} -> {i + 1}")
    return Verdict("holds", "over the observed trace")


def check_trace_leadsto(trace: Trace, engine: Engine, p: Expr, q: Expr,
                        name: str = "leadsto") -> Verdict:
    """p leads-to q on a trace: every step satisfying p is followed (then or
    later) by a step satisfying q; obligations still open at the end of the
    trace give an unknown verdict."""
    states = _trace_states(trace)
    pe = PredicateEvaluator(engine, p, f"{name}.lhs")
    qe = PredicateEvaluator(engine, q, f"{name}.rhs")
    open_since: Optional[int] = None
    for i, st in enumerate(states):
        if qe(st):
            open_since = None
        elif open_since is None and pe(st):
            open_since = i
    if open_since is not None:
        return Verdict("unknown", f"obligation open since step {open_since}")
    return Verdict("holds", "all obligations closed")
