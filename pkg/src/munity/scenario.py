"""Scenario harness: scripted connectivity, mobility, publications and the
suite's correctness checks over recorded runs.

Published messages carry a record content {msg_type, tag, data} with a
unique tag per fan-out copy; the accounting scan proves conservation (every
tag is exactly once in flight or already delivered), absence of duplicates
and exactly-once delivery, including across handoffs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import yaml

from .engine import Engine, SchedulerConfig, Trace
from .ens import build_ens_system
from .env import ConnectivityScript, EnvHooks, Event, MoveEvent, SetVarEvent
from .instantiate import compile_system
from .semantics import SystemState
from .values import Addr, BOTTOM, Msg, Rec, Sym, Value, value_eq


@dataclass
class PublishRecord:
    tag: int
    step: int
    server: str
    topic: int
    destination: str  # instance name of the subscriber


class TagRegistry:
    def __init__(self):
        self.next_tag = 1
        self.records: List[PublishRecord] = []

    def fresh(self, step, server, topic, destination) -> int:
        tag = self.next_tag
        self.next_tag += 1
        self.records.append(PublishRecord(tag, step, server, topic,
                                          destination))
        return tag


@dataclass
class PublishEvent(Event):
    """Fan one publication out to the current subscribers of the topic at
    the given server (snapshot at the publish step)."""

    server: str
    topic: int
    payload: Value
    registry: TagRegistry

    def apply(self, state: SystemState, compiled):
        store = state.stores[self.server]
        subscr = store["subscr"]
        if self.topic < 0 or self.topic >= len(subscr):
            raise ValueError(f"publish: topic {self.topic} out of range")
        subscribers = subscr[self.topic]
        if not isinstance(subscribers, tuple):
            subscribers = ()
        out = store["out"]
        if not isinstance(out, tuple):
            out = ()
        src = store["self_addr"]
        for sub in subscribers:
            tag = self.registry.fresh(state.step, self.server, self.topic,
                                      repr(sub))
            content = Rec.make([("msg_type", self.topic), ("tag", tag),
                                ("data", self.payload)])
            out = out + (Msg(False, src, sub, Sym("M"), None, content),)
        stores = dict(state.stores)
        new_store = dict(store)
        new_store["out"] = out
        stores[self.server] = new_store
        return SystemState(stores, state.step, state.connectivity)


@dataclass
class EnsScenario:
    name: str
    num_clients: int
    num_servers: int
    num_topics: int = 2
    max_steps: int = 1000
    seed: int = 0
    mode: str = "deficit"
    connectivity: Optional[ConnectivityScript] = None
    publishes: List[tuple] = field(default_factory=list)
    # (step, server instance, topic, payload)
    mobility: List[tuple] = field(default_factory=list)
    # (step, instance, location name)
    actions: List[tuple] = field(default_factory=list)
    # (step, instance, var, value)

    def validate_refs(self):
        insts = {f"client({i})" for i in range(self.num_clients)}
        insts |= {f"server({j})" for j in range(self.num_servers)}
        for step, server, topic, _ in self.publishes:
            if server not in insts:
                raise ValueError(f"publish at {step} names unknown {server}")
            if not 0 <= topic < self.num_topics:
                raise ValueError(f"publish at {step}: topic {topic} out of "
                                 f"range")
        for step, inst, _loc in self.mobility:
            if inst not in insts:
                raise ValueError(f"mobility at {step} names unknown {inst}")
        for step, inst, _v, _val in self.actions:
            if inst not in insts:
                raise ValueError(f"action at {step} names unknown {inst}")


def scenario_from_dict(d: dict) -> EnsScenario:
    sc = EnsScenario(
        name=d.get("scenario", "scenario"),
        num_clients=int(d["clients"]),
        num_servers=int(d["servers"]),
        num_topics=int(d.get("topics", 2)),
        max_steps=int(d.get("maxSteps", 1000)),
        seed=int(d.get("seed", 0)),
        mode=d.get("mode", "deficit"),
    )
    if "connectivity" in d:
        script = ConnectivityScript()
        for entry in d["connectivity"]:
            pairs = [tuple(p) for p in entry.get("pairs", [])]
            script.add(int(entry["from"]), int(entry["to"]), pairs,
                       locations=entry.get("locations"),
                       bidirectional=entry.get("bidirectional", True))
        sc.connectivity = script
    for e in d.get("publish", []):
        sc.publishes.append((int(e["step"]), e["server"], int(e["topic"]),
                             e.get("payload", 0)))
    for e in d.get("mobility", []):
        sc.mobility.append((int(e["step"]), e["instance"], e["location"]))
    for e in d.get("actions", []):
        sc.actions.append((int(e["step"]), e["instance"], e["var"],
                           e["value"]))
    sc.validate_refs()
    return sc


def load_scenario(path: str) -> EnsScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(yaml.safe_load(fh))


def _server_mesh(num_clients: int, num_servers: int) -> List[Tuple[str, str]]:
    pairs = []
    for a in range(num_servers):
        for b in range(num_servers):
            if a != b:
                pairs.append((f"server({a})", f"server({b})"))
    return pairs


def scenario_hooks(sc: EnsScenario, registry: TagRegistry) -> EnvHooks:
    hooks = EnvHooks(all_connected=sc.connectivity is None)
    if sc.connectivity is not None:
        # the wired backbone: servers always reach each other
        mesh = frozenset(_server_mesh(sc.num_clients, sc.num_servers))
        timeline = [(lo, hi, pairs | mesh, locs)
                    for lo, hi, pairs, locs in sc.connectivity.timeline]
        script = ConnectivityScript()
        script.timeline = timeline
        script.install(hooks)
    for step, server, topic, payload in sc.publishes:
        hooks.add_event(step, PublishEvent(server, topic, payload, registry))
    for step, inst, loc in sc.mobility:
        hooks.add_event(step, MoveEvent(inst, loc))
    for step, inst, var, value in sc.actions:
        hooks.add_event(step, SetVarEvent(inst, var, value))
    return hooks


# --- message accounting ------------------------------------------------------------


def _live_tags(state: SystemState) -> Dict[int, List[str]]:
    """Locations of every undelivered tagged message: tag -> list of
    'instance.queue' positions.  Wrapped relay messages count as the inner
    message."""
    found: Dict[int, List[str]] = {}
    for inst, store in state.stores.items():
        for qname in ("interface", "in", "out"):
            q = store.get(qname)
            if not isinstance(q, tuple):
                continue
            for m in q:
                if not isinstance(m, Msg) or m.status:
                    continue
                tag = _tag_of(m)
                if tag is not None:
                    found.setdefault(tag, []).append(f"{inst}.{qname}")
    return found


def _tag_of(m: Msg) -> Optional[int]:
    c = m.content
    if isinstance(c, Rec):
        try:
            t = c.get("tag")
        except Exception:
            return None
        return t if isinstance(t, int) and not isinstance(t, bool) else None
    if isinstance(c, Msg):
        # a forwarded message wraps the original whole
        return _tag_of(c)
    return None


def _delivered_now(state: SystemState, rec: PublishRecord) -> bool:
    store = state.stores.get(rec.destination)
    if store is None:
        return False
    q = store.get("in")
    if not isinstance(q, tuple):
        return False
    for m in q:
        if isinstance(m, Msg) and _tag_of(m) == rec.tag:
            return True
    return False


@dataclass
class Accounting:
    conserved: bool = True
    no_duplicates: bool = True
    failures: List[str] = field(default_factory=list)
    delivered_step: Dict[int, int] = field(default_factory=dict)

    def ok(self) -> bool:
        return self.conserved and self.no_duplicates


def scan_conservation(trace: Trace, registry: TagRegistry) -> Accounting:
    """Per-tag lifecycle over the recorded states: absent before the
    publication, then exactly one live copy until it reaches the
    destination's in queue, then absent for good.  Anything else is a loss,
    a duplicate or a resurrection."""
    acc = Accounting()
    if trace.states is None:
        raise ValueError("conservation scan needs full states")
    phase: Dict[int, str] = {rec.tag: "pre" for rec in registry.records}
    for idx, state in enumerate(trace.states):
        live = _live_tags(state)
        for rec in registry.records:
            tag = rec.tag
            positions = live.get(tag, [])
            if len(positions) > 1:
                acc.no_duplicates = False
                acc.failures.append(
                    f"state {idx}: tag {tag} duplicated at {positions}")
            if phase[tag] == "pre":
                if positions:
                    phase[tag] = "live"
                elif state.step > rec.step:
                    acc.conserved = False
                    acc.failures.append(
                        f"state {idx}: tag {tag} never materialized")
                    phase[tag] = "gone"
            if phase[tag] == "live":
                if tag not in acc.delivered_step and _delivered_now(state, rec):
                    acc.delivered_step[tag] = idx
                if not positions:
                    if tag in acc.delivered_step:
                        phase[tag] = "gone"
                    else:
                        acc.conserved = False
                        acc.failures.append(
                            f"state {idx}: tag {tag} lost before delivery")
                        phase[tag] = "gone"
            elif phase[tag] == "gone" and positions:
                acc.no_duplicates = False
                acc.failures.append(
                    f"state {idx}: tag {tag} reappeared at {positions}")
    return acc


# --- scenario execution -------------------------------------------------------------


def run_scenario(sc: EnsScenario, store_full_states: bool = True
                 ) -> Tuple[Trace, dict]:
    """Build the system, wire the scripts, run, and evaluate the suite's
    properties; returns the trace and a JSON-ready report."""
    registry = TagRegistry()
    sysdef = build_ens_system(sc.num_clients, sc.num_servers, sc.num_topics)
    compiled = compile_system(sysdef)
    hooks = scenario_hooks(sc, registry)
    config = SchedulerConfig(mode=sc.mode, seed=sc.seed,
                             store_full_states=store_full_states)
    engine = Engine(compiled, hooks, config)
    trace = engine.run(sc.max_steps)

    report: dict = {
        "scenario": sc.name,
        "clients": sc.num_clients,
        "servers": sc.num_servers,
        "seed": sc.seed,
        "steps": len(trace.records),
        "stop_reason": trace.stop_reason,
        "verdicts": {},
        "accounting": [],
    }
    if not store_full_states:
        return trace, report

    acc = scan_conservation(trace, registry)
    report["verdicts"]["message-conservation"] = \
        "holds" if acc.conserved else "violated"
    report["verdicts"]["no-duplication"] = \
        "holds" if acc.no_duplicates else "violated"
    if acc.failures:
        report["accounting_failures"] = acc.failures[:20]

    final = trace.states[-1]
    for i in range(sc.num_clients):
        inst = f"client({i})"
        registered = any(st.stores[inst]["registered"] is True
                         for st in trace.states)
        subscribed = any(st.stores[inst]["subscribed"] is True
                         for st in trace.states)
        report["verdicts"][f"{inst}-registration"] = \
            "holds" if registered else "unknown"
        report["verdicts"][f"{inst}-subscription"] = \
            "holds" if subscribed else "unknown"

    undelivered = []
    for rec in registry.records:
        entry = {
            "tag": rec.tag,
            "published_step": rec.step,
            "server": rec.server,
            "topic": rec.topic,
            "destination": rec.destination,
            "delivered_step": acc.delivered_step.get(rec.tag),
        }
        report["accounting"].append(entry)
        if rec.tag not in acc.delivered_step:
            undelivered.append(rec.tag)
    report["verdicts"]["all-publications-delivered"] = \
        "holds" if not undelivered else "unknown"
    if undelivered:
        report["undelivered_tags"] = undelivered
    return trace, report
