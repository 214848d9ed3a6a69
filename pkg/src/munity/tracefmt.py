"""Line-delimited JSON trace files.

One header record (format version, seed, config hash), one record for the
initial state, then one record per step: step index, chosen unit, reaction
sweep count, post-state digest, and with full-state capture the changed
variables plus the complete state.  Identical runs produce byte-identical
files.
"""
from __future__ import annotations

import hashlib
import json
from typing import Optional

from .engine import Trace
from .semantics import SystemState
from .values import value_eq, value_to_json

FORMAT_VERSION = 1


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _state_json(state: SystemState) -> dict:
    return {inst: {var: value_to_json(val) for var, val in sorted(st.items())}
            for inst, st in state.stores.items()}


def _delta_json(prev: SystemState, cur: SystemState) -> dict:
    delta: dict = {}
    for inst, store in cur.stores.items():
        before = prev.stores[inst]
        changed = {var: value_to_json(val) for var, val in sorted(store.items())
                   if not value_eq(before[var], val)}
        if changed:
            delta[inst] = changed
    return delta


def write_trace(trace: Trace, path: str, full_states: bool = False):
    with open(path, "w", encoding="utf-8") as fh:
        def emit(obj):
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")))
            fh.write("\n")

        emit({"format": FORMAT_VERSION, "kind": "header",
              "system": trace.system, "seed": trace.seed,
              "config_hash": config_hash(trace.config),
              "config": trace.config})
        init = {"kind": "initial", "digest": trace.initial_digest}
        if full_states and trace.states:
            init["state"] = _state_json(trace.states[0])
        emit(init)
        for i, rec in enumerate(trace.records):
            row = {"kind": "step", "step": rec.index, "unit": rec.unit,
                   "reactions": rec.reactions, "digest": rec.digest}
            if rec.error:
                row["error"] = rec.error
            if trace.states is not None and i + 1 < len(trace.states):
                row["delta"] = _delta_json(trace.states[i],
                                           trace.states[i + 1])
                if full_states:
                    row["state"] = _state_json(trace.states[i + 1])
            emit(row)
        emit({"kind": "end", "stop_reason": trace.stop_reason,
              "steps": len(trace.records)})


def read_trace_records(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
