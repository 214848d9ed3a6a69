"""Program transforms: reacts-to elimination.

The elimination heuristic turns every reactive statement `a reacts-to p`
into the guarded statement `a if p` and places all of them, per program, in
one new block whose priority exceeds every block in the system.  Reactive
interaction statements become plain guarded interactions.  The transform is
idempotent and its output contains no reactive statements.
"""
from __future__ import annotations

from typing import List, Tuple

from .nodes import (
    Assign, PriorityBlock, ProgramDef, Quantified, Statement, SystemDef,
)


def _deactivate(st: Statement) -> Statement:
    if isinstance(st, Assign):
        return Assign(st.label, st.targets, st.exprs, st.guard, False,
                      pos=st.pos)
    if isinstance(st, Quantified):
        return Quantified(st.binders, tuple(_deactivate(s) for s in st.body),
                          pos=st.pos)
    raise ValueError(f"unexpected reactive statement {st!r}")


def count_reactive(sysdef: SystemDef) -> int:
    """Number of reactive statements (families counted once), interactions
    included; the independent oracle for the transform tests."""
    n = 0
    for prog in sysdef.programs:
        n += len(prog.reactive)
    for st in sysdef.interactions:
        if _is_reactive(st):
            n += 1
    return n


def _is_reactive(st: Statement) -> bool:
    if isinstance(st, Assign):
        return st.reactive
    if isinstance(st, Quantified):
        return any(_is_reactive(s) for s in st.body)
    return False


def eliminate_reacts_to(sysdef: SystemDef) -> SystemDef:
    priorities = [blk.priority for p in sysdef.programs for blk in p.blocks]
    top = (max(priorities) if priorities else 0) + 1
    new_programs: List[ProgramDef] = []
    for prog in sysdef.programs:
        if not prog.reactive:
            new_programs.append(prog)
            continue
        moved = tuple(_deactivate(s) for s in prog.reactive)
        blocks = tuple(prog.blocks) + (PriorityBlock(top, moved),)
        new_programs.append(ProgramDef(prog.name, prog.params, prog.declare,
                                       prog.always, prog.initially, blocks,
                                       (), pos=prog.pos))
    new_interactions = tuple(
        _deactivate(st) if _is_reactive(st) else st
        for st in sysdef.interactions)
    return SystemDef(sysdef.name, tuple(new_programs), sysdef.components,
                     new_interactions, sysdef.inhibitions, pos=sysdef.pos)
