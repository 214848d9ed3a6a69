"""Structural validation of a system definition.

Diagnostics carry a stable rule id; the list is deterministic and sorted by
source position.  An empty list means the system satisfies every structural
invariant the engine relies on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from .nodes import (
    Assign, Call, Inhibition, Pos, ProgramDef, QualifiedVar, Quantified,
    QuantifiedInhibition, Statement, SystemDef, Transaction, statement_exprs,
    statement_labels, walk_expr,
)


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    severity: str  # 'error' | 'warning'
    message: str
    pos: Pos

    def __str__(self):
        return f"{self.pos}: {self.severity}: {self.rule}: {self.message}"


def _reactive_labels(prog: ProgramDef):
    for st in prog.reactive:
        yield from statement_labels(st)


def validate(sysdef: SystemDef) -> List[Diagnostic]:
    out: List[Diagnostic] = []

    def emit(rule, severity, message, pos):
        out.append(Diagnostic(rule, severity, message, pos))

    prog_names = set()
    for prog in sysdef.programs:
        if prog.name in prog_names:
            emit("RULE-DUP-PROGRAM", "error",
                 f"program '{prog.name}' defined twice", prog.pos)
        prog_names.add(prog.name)
        seen_prio = set()
        for blk in prog.blocks:
            if blk.priority in seen_prio:
                emit("RULE-PRIORITY-DUP", "error",
                     f"{prog.name}: duplicate priority {blk.priority}",
                     prog.pos)
            seen_prio.add(blk.priority)
        labels = set()
        for st in _all_statements(prog):
            for lab in statement_labels(st):
                if lab in labels:
                    emit("RULE-DUP-LABEL", "error",
                         f"{prog.name}: duplicate label '{lab}'",
                         _pos(st))
                labels.add(lab)
        for st in prog.reactive:
            for s in _leaf_statements(st):
                if not isinstance(s, Assign):
                    emit("RULE-REACT-SIMPLE", "error",
                         f"{prog.name}: reactive statements must be simple "
                         f"assignments", _pos(s))
        # alias cycle detection over the always section
        alias_names = {n for n, _ in prog.always}
        deps = {}
        for n, e in prog.always:
            deps[n] = {v.name for v in walk_expr(e)
                       if hasattr(v, "name") and getattr(v, "name") in alias_names}
        state: dict = {}

        def dfs(n):
            state[n] = "visiting"
            for d in sorted(deps.get(n, ())):
                if state.get(d) == "visiting":
                    return True
                if d not in state and dfs(d):
                    return True
            state[n] = "done"
            return False

        for n, _ in prog.always:
            if n not in state and dfs(n):
                emit("RULE-ALWAYS-CYCLE", "error",
                     f"{prog.name}: cyclic derived-name definition "
                     f"involving '{n}'", prog.pos)
                break
        # send() must not occur in guards
        for st in _all_statements(prog):
            for g in _guards_of(st):
                for e in walk_expr(g):
                    if isinstance(e, Call) and e.name == "send":
                        emit("RULE-SEND-GUARD", "error",
                             f"{prog.name}: send() is not allowed in a guard",
                             _pos(st))
        # qualified references are a system-level construct
        for st in _all_statements(prog):
            for e in statement_exprs(st):
                if isinstance(e, QualifiedVar):
                    emit("RULE-QUALIFIED-IN-PROGRAM", "error",
                         f"{prog.name}: qualified variable reference inside "
                         f"a program statement", _pos(st))
                    break

    # components
    lambda_initialized = {}
    for comp in sysdef.components:
        if comp.program not in prog_names:
            emit("RULE-COMPONENT-PROGRAM", "error",
                 f"component references undefined program '{comp.program}'",
                 comp.pos)
            continue
        prog = sysdef.program(comp.program)
        has_lambda_init = any(n == "lambda" for n, _ in prog.initially)
        if comp.at is None and not has_lambda_init:
            inner = ",".join(str(a) for a in comp.args)
            emit("RULE-LAMBDA-INIT", "warning",
                 f"component {comp.program}({inner}) has no location: "
                 f"lambda defaults to null", comp.pos)
    if not sysdef.components:
        emit("RULE-NO-COMPONENTS", "error", "system declares no components",
             sysdef.pos)

    # inhibitions: targets must exist and must not be reactive
    reactive_by_prog = {p.name: set(_reactive_labels(p))
                        for p in sysdef.programs}
    inter_labels = set()
    for st in sysdef.interactions:
        inter_labels.update(statement_labels(st))
    reactive_inter = set()
    for st in sysdef.interactions:
        for s in _leaf_statements(st):
            if isinstance(s, Assign) and s.reactive and s.label:
                reactive_inter.add(s.label)

    def check_inhibition(ih: Inhibition):
        if ih.target_instance is not None:
            pname = ih.target_instance.program
            if pname not in prog_names:
                emit("RULE-INHIBIT-TARGET", "error",
                     f"inhibition targets unknown program '{pname}'", ih.pos)
                return
            prog = sysdef.program(pname)
            all_labels = set()
            for st in _all_statements(prog):
                all_labels.update(statement_labels(st))
            if ih.target_label not in all_labels:
                emit("RULE-INHIBIT-TARGET", "error",
                     f"inhibition targets unknown label "
                     f"'{pname}.{ih.target_label}'", ih.pos)
            elif ih.target_label in reactive_by_prog[pname]:
                emit("RULE-REACT-INHIBIT", "error",
                     f"reactive statement '{pname}.{ih.target_label}' must "
                     f"not be inhibited", ih.pos)
        else:
            if ih.target_label not in inter_labels:
                emit("RULE-INHIBIT-TARGET", "error",
                     f"inhibition targets unknown interaction label "
                     f"'{ih.target_label}'", ih.pos)
            elif ih.target_label in reactive_inter:
                emit("RULE-REACT-INHIBIT", "error",
                     f"reactive interaction '{ih.target_label}' must not be "
                     f"inhibited", ih.pos)
        for e in walk_expr(ih.pred):
            if isinstance(e, Call) and e.name == "send":
                emit("RULE-SEND-GUARD", "error",
                     "send() is not allowed in an inhibition predicate",
                     ih.pos)

    for ih in sysdef.inhibitions:
        if isinstance(ih, QuantifiedInhibition):
            for sub in ih.body:
                check_inhibition(sub)
        else:
            check_inhibition(ih)

    out.sort(key=lambda d: (d.pos.line, d.pos.col, d.rule, d.message))
    return out


def _all_statements(prog: ProgramDef):
    for blk in prog.blocks:
        yield from blk.statements
    yield from prog.reactive


def _leaf_statements(st: Statement):
    if isinstance(st, Quantified):
        for s in st.body:
            yield from _leaf_statements(s)
    else:
        yield st


def _guards_of(st: Statement):
    if isinstance(st, Assign):
        if st.guard is not None:
            yield st.guard
    elif isinstance(st, Transaction):
        if st.guard is not None:
            yield st.guard
        for sub in st.subs:
            yield from _guards_of(sub)
    elif isinstance(st, Quantified):
        for s in st.body:
            yield from _guards_of(s)


def _pos(st: Statement) -> Pos:
    return getattr(st, "pos", Pos(0, 0))
