"""Property files: named predicates and relation declarations.

    invariant NAME: expr
    co NAME: expr => expr
    ensures NAME: expr => expr
    leadsto NAME: expr => expr
    transient NAME: expr

Expressions use the system grammar; instance-qualified variables are
resolved against the system's program names, bare names against the unique
instance declaring them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .nodes import Expr, SystemDef
from .parser import ParseError, Parser, resolve_expr

KINDS = ("invariant", "co", "ensures", "leadsto", "transient")


@dataclass(frozen=True)
class Property:
    kind: str
    name: str
    lhs: Expr
    rhs: Optional[Expr]  # None for invariant / transient


def parse_properties(text: str, sysdef: Optional[SystemDef] = None
                     ) -> List[Property]:
    prog_names = {p.name for p in sysdef.programs} if sysdef else set()
    p = Parser(text)
    props: List[Property] = []
    while not p.at("eof"):
        t = p.peek()
        if t.kind != "ident" or t.text not in KINDS:
            raise ParseError(
                f"expected one of {', '.join(KINDS)}, found '{t.text}'", t.pos)
        kind = p.next().text
        name = p.expect("ident").text
        p.expect(":")
        lhs = p.parse_expr()
        rhs = None
        if kind in ("co", "ensures", "leadsto"):
            p.expect("=>")
            rhs = p.parse_expr()
        if prog_names:
            lhs = resolve_expr(lhs, prog_names)
            rhs = resolve_expr(rhs, prog_names) if rhs is not None else None
        if any(q.name == name for q in props):
            raise ParseError(f"duplicate property name '{name}'", t.pos)
        props.append(Property(kind, name, lhs, rhs))
    return props
