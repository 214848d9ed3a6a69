"""Environment harness: connectivity, mobility and application hooks.

The language's environment functions (can_send, send delivery, update,
new_word, valid_loc) are resolved against an EnvHooks object.  Statements
that call a hook the harness does not provide are never scheduled, so a
system degrades gracefully when a capability is absent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .values import Addr, BOTTOM, EvalError, Loc, Value


class Event:
    """State injection applied at the start of a step.  Subclasses implement
    apply(state, compiled) -> new state."""

    def apply(self, state, compiled):
        raise NotImplementedError


@dataclass
class SetVarEvent(Event):
    instance: str
    var: str
    value: Value

    def apply(self, state, compiled):
        from .semantics import SystemState
        stores = dict(state.stores)
        store = dict(stores[self.instance])
        if self.var not in store:
            raise EvalError(f"env event targets unknown variable "
                            f"{self.instance}.{self.var}")
        store[self.var] = self.value
        stores[self.instance] = store
        return SystemState(stores, state.step, state.connectivity)


@dataclass
class MoveEvent(Event):
    instance: str
    location: str

    def apply(self, state, compiled):
        from .semantics import SystemState
        stores = dict(state.stores)
        store = dict(stores[self.instance])
        store["lambda"] = Loc(self.location)
        stores[self.instance] = store
        return SystemState(stores, state.step, state.connectivity)


@dataclass
class ConnectivityEvent(Event):
    pairs: frozenset  # directed (src, dst) instance-name pairs

    def apply(self, state, compiled):
        from .semantics import SystemState
        return SystemState(state.stores, state.step, frozenset(self.pairs))


class EnvHooks:
    """Harness-side behavior.

    all_connected: when True, can_send always holds; otherwise the current
    state's connectivity relation decides.
    table: hook name -> callable(args, ctx) implementing that hook.
    events_by_step: step -> list of Event applied before unit selection.
    """

    def __init__(self, all_connected: bool = True,
                 table: Optional[Dict[str, Callable]] = None,
                 events_by_step: Optional[Dict[int, List[Event]]] = None):
        self.all_connected = all_connected
        self.table = dict(table or {})
        self.events_by_step = dict(events_by_step or {})

    @property
    def provides(self):
        return self.table.keys()

    def call(self, name: str, args, ctx) -> Value:
        return self.table[name](args, ctx)

    def can_send(self, a: Addr, b: Addr, state) -> bool:
        if self.all_connected:
            return True
        return (repr(a), repr(b)) in state.connectivity

    def events(self, step: int) -> List[Event]:
        return self.events_by_step.get(step, [])

    def last_event_step(self) -> int:
        return max(self.events_by_step, default=-1)

    def add_event(self, step: int, event: Event):
        self.events_by_step.setdefault(step, []).append(event)


def default_new_word(args, ctx):
    """Deterministic word source for the transfer corpus: a 4-bit word
    derived from the current step, first bit always set."""
    s = ctx.state.step
    return (True, (s // 2) % 2 == 0, (s // 3) % 2 == 0, s % 2 == 0)


def default_run_hooks() -> EnvHooks:
    """Hooks used by the CLI run command when no scenario supplies any:
    everything reachable, deterministic word regeneration."""
    return EnvHooks(all_connected=True, table={"new_word": default_new_word})


@dataclass
class ConnectivityScript:
    """Step-ranged connectivity timeline with optional location overrides.
    Ranges are half-open [lo, hi) and must not overlap."""

    timeline: List[tuple] = field(default_factory=list)
    # entries: (lo, hi, pairs frozenset[(src, dst)], locations dict inst->loc)

    def add(self, lo: int, hi: int, pairs, locations=None, bidirectional=True):
        ps = set()
        for a, b in pairs:
            ps.add((a, b))
            if bidirectional:
                ps.add((b, a))
        for (xlo, xhi, _, _) in self.timeline:
            if lo < xhi and xlo < hi:
                raise ValueError(f"overlapping connectivity ranges "
                                 f"[{lo},{hi}) and [{xlo},{xhi})")
        self.timeline.append((lo, hi, frozenset(ps), dict(locations or {})))
        self.timeline.sort()

    def install(self, hooks: EnvHooks):
        """Register connect/move events at each range start and make
        can_send read the scripted relation."""
        hooks.all_connected = False
        for lo, _hi, pairs, locations in self.timeline:
            hooks.add_event(lo, ConnectivityEvent(pairs))
            for inst, loc in locations.items():
                hooks.add_event(lo, MoveEvent(inst, loc))
