"""Bounded exhaustive exploration of the reachable state graph.

Each edge is a full atomic step of one enabled unit.  With the branching
environment policy, additional environment edges switch the connectivity
relation, so runs under any connectivity script are covered by the graph.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Dict, List, Optional, Tuple

from .engine import Engine, ExecError, ReactionDivergence
from .semantics import SystemState, canonical_state
from .values import Value


@dataclass
class ExploreBounds:
    max_states: int = 100_000
    max_queue: int = 64
    env_policy: str = "static"  # 'static' | 'branch'
    branch_pairs: Tuple[Tuple[str, str], ...] = ()
    initial_connectivity: frozenset = frozenset()
    initial_domains: Optional[Dict[Tuple[str, str], List[Value]]] = None
    # (instance, var) -> candidate initial values, explored as a product


@dataclass
class TransitionSystem:
    states: Dict[str, SystemState]
    initial: List[str]
    adjacency: Dict[str, List[Tuple[str, str]]]  # key -> [(unit, succ key)]
    parent: Dict[str, Optional[Tuple[str, str]]]  # key -> (parent, unit)
    expanded: set
    truncated: bool = False
    truncate_reasons: List[str] = field(default_factory=list)
    tainted: bool = False
    error_edges: List[Tuple[str, str, str]] = field(default_factory=list)

    def path_to(self, key: str) -> List[Tuple[Optional[str], str]]:
        """Replayable path [(unit or None, state key), ...] from an initial
        state; the first entry carries no unit."""
        path = []
        cur: Optional[str] = key
        while cur is not None:
            link = self.parent[cur]
            if link is None:
                path.append((None, cur))
                cur = None
            else:
                parent_key, unit = link
                path.append((unit, cur))
                cur = parent_key
        path.reverse()
        return path


def _relations(pairs):
    items = list(pairs)
    for r in range(len(items) + 1):
        for combo in combinations(items, r):
            yield frozenset(combo)


def explore(engine: Engine, bounds: ExploreBounds) -> TransitionSystem:
    compiled = engine.compiled
    queue_vars = compiled.queue_vars

    def over_bound(state: SystemState) -> bool:
        for inst, qvars in queue_vars.items():
            store = state.stores[inst]
            for v in qvars:
                val = store[v]
                if isinstance(val, tuple) and len(val) > bounds.max_queue:
                    return True
        return False

    base = engine.init_state(bounds.initial_connectivity)
    initial_states = [base]
    if bounds.initial_domains:
        for (inst, var), values in bounds.initial_domains.items():
            next_states = []
            for st in initial_states:
                for v in values:
                    stores = dict(st.stores)
                    stores[inst] = dict(stores[inst])
                    stores[inst][var] = v
                    next_states.append(SystemState(stores, 0, st.connectivity))
            initial_states = next_states

    ts = TransitionSystem({}, [], {}, {}, set())
    work: deque = deque()
    for st in initial_states:
        key = canonical_state(st)
        if key not in ts.states:
            ts.states[key] = st
            ts.parent[key] = None
            ts.initial.append(key)
            work.append(key)

    branch_relations = (list(_relations(bounds.branch_pairs))
                        if bounds.env_policy == "branch" else [])

    while work:
        key = work.popleft()
        state = ts.states[key]
        succs: List[Tuple[str, str]] = []
        ts.adjacency[key] = succs
        ts.expanded.add(key)
        for eu in engine.enabled_units(state):
            try:
                post, _iters = engine.execute_unit(state, eu)
            except ReactionDivergence as exc:
                ts.tainted = True
                ts.error_edges.append((key, eu.key, str(exc)))
                continue
            except ExecError as exc:
                ts.tainted = True
                ts.error_edges.append((key, eu.key, str(exc)))
                continue
            if over_bound(post):
                ts.truncated = True
                if "queue bound" not in ts.truncate_reasons:
                    ts.truncate_reasons.append("queue bound")
                continue
            skey = canonical_state(post)
            succs.append((eu.key, skey))
            if skey not in ts.states:
                if len(ts.states) >= bounds.max_states:
                    ts.truncated = True
                    if "state cap" not in ts.truncate_reasons:
                        ts.truncate_reasons.append("state cap")
                    continue
                ts.states[skey] = post
                ts.parent[skey] = (key, eu.key)
                work.append(skey)
        for rel in branch_relations:
            if rel == state.connectivity:
                continue
            post = SystemState(state.stores, state.step, rel)
            ukey = "env[" + ",".join(f"{a}>{b}" for a, b in sorted(rel)) + "]"
            skey = canonical_state(post)
            succs.append((ukey, skey))
            if skey not in ts.states:
                if len(ts.states) >= bounds.max_states:
                    ts.truncated = True
                    if "state cap" not in ts.truncate_reasons:
                        ts.truncate_reasons.append("state cap")
                    continue
                ts.states[skey] = post
                ts.parent[skey] = (key, ukey)
                work.append(skey)
    return ts


def is_env_edge(unit_key: str) -> bool:
    return unit_key.startswith("env[")


def replay_path(engine: Engine, ts: TransitionSystem,
                path: List[Tuple[Optional[str], str]]) -> bool:
    """Feed a counterexample path back through the step machinery and check
    each edge reproduces the recorded successor state."""
    if not path:
        return False
    first_unit, first_key = path[0]
    if first_unit is not None or first_key not in ts.initial:
        return False
    state = ts.states[first_key]
    for unit_key, skey in path[1:]:
        if unit_key is None:
            return False
        if is_env_edge(unit_key):
            state = ts.states[skey]
            continue
        match = [eu for eu in engine.enabled_units(state) if eu.key == unit_key]
        if len(match) != 1:
            return False
        state, _ = engine.execute_unit(state, match[0])
        if canonical_state(state) != skey:
            return False
    return True
