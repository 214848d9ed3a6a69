"""Abstract syntax for programs, systems and expressions.

Source positions are carried for diagnostics but excluded from equality, so
parse(pretty_print(x)) compares structurally equal to x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __repr__(self):
        return f"{self.line}:{self.col}"


NOPOS = Pos(0, 0)


# --- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Lit(Expr):
    value: object  # bool | int | BOTTOM
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class SymLit(Expr):
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class LocLit(Expr):
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class InstanceRef(Expr):
    """Reference to a component instance, e.g. server(j).  In expression
    position it denotes the instance's address."""

    program: str
    args: Tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class QualifiedVar(Expr):
    """instance.var reference; only legal in system-level statements and
    property predicates."""

    instance: InstanceRef
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # 'not' | '-'
    operand: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * / % = != < <= > >= and or
    left: Expr
    right: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Call(Expr):
    """Builtin or environment-hook call."""

    name: str
    args: Tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class FieldAcc(Expr):
    obj: Expr
    name: str
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Index(Expr):
    obj: Expr
    index: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class SeqLit(Expr):
    items: Tuple[Expr, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class RecLit(Expr):
    fields: Tuple[Tuple[str, Expr], ...]
    pos: Pos = field(default=NOPOS, compare=False)


# --- types -------------------------------------------------------------------

@dataclass(frozen=True)
class Type:
    pass


@dataclass(frozen=True)
class TBool(Type):
    pass


@dataclass(frozen=True)
class TInt(Type):
    pass


@dataclass(frozen=True)
class TLoc(Type):
    pass


@dataclass(frozen=True)
class TAddr(Type):
    pass


@dataclass(frozen=True)
class TMsg(Type):
    pass


@dataclass(frozen=True)
class TQueue(Type):
    elem: Type


@dataclass(frozen=True)
class TArray(Type):
    size: Expr  # evaluated from program parameters at instantiation
    elem: Type


# --- statements ---------------------------------------------------------------

@dataclass(frozen=True)
class Statement:
    pass


@dataclass(frozen=True)
class Assign(Statement):
    """Guarded multiple assignment.  reactive is true for reacts-to
    statements; their predicate lives in `guard`."""

    label: Optional[str]
    targets: Tuple[Expr, ...]
    exprs: Tuple[Expr, ...]
    guard: Optional[Expr]
    reactive: bool = False
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Transaction(Statement):
    """Bracketed assignment sequence executed without interleaving; only
    reactions may fire between the sub-assignments."""

    label: Optional[str]
    subs: Tuple[Assign, ...]
    guard: Optional[Expr]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Binder:
    var: str
    lo: Expr
    hi: Expr  # half-open range lo <= var < hi


@dataclass(frozen=True)
class Quantified(Statement):
    """Statement family <[] i : lo <= i < hi :: stmts >.  Ranges evaluable
    from parameters expand at instantiation; ranges over run-time state
    expand per scheduling step."""

    binders: Tuple[Binder, ...]
    body: Tuple[Statement, ...]
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Inhibition:
    """inhibit <target> when <pred>; disables the labeled statement while
    the predicate holds."""

    target_instance: Optional[InstanceRef]
    target_label: str
    pred: Expr
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class QuantifiedInhibition:
    binders: Tuple[Binder, ...]
    body: Tuple[Inhibition, ...]
    pos: Pos = field(default=NOPOS, compare=False)


# --- program / system ----------------------------------------------------------

@dataclass(frozen=True)
class PriorityBlock:
    priority: int  # larger = higher
    statements: Tuple[Statement, ...]


@dataclass(frozen=True)
class ProgramDef:
    name: str
    params: Tuple[str, ...]
    declare: Tuple[Tuple[str, Type], ...]
    always: Tuple[Tuple[str, Expr], ...]
    initially: Tuple[Tuple[str, Expr], ...]
    blocks: Tuple[PriorityBlock, ...]
    reactive: Tuple[Statement, ...]  # reacts-to statements (incl. families)
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class Component:
    program: str
    args: Tuple[int, ...]
    at: Optional[str]  # location literal name
    pos: Pos = field(default=NOPOS, compare=False)


@dataclass(frozen=True)
class SystemDef:
    name: str
    programs: Tuple[ProgramDef, ...]
    components: Tuple[Component, ...]
    interactions: Tuple[Statement, ...]
    inhibitions: Tuple[object, ...]  # Inhibition | QuantifiedInhibition
    pos: Pos = field(default=NOPOS, compare=False)

    def program(self, name: str) -> ProgramDef:
        for p in self.programs:
            if p.name == name:
                return p
        raise KeyError(name)


def walk_expr(e: Expr):
    """Yield e and every sub-expression."""
    yield e
    if isinstance(e, Unary):
        yield from walk_expr(e.operand)
    elif isinstance(e, Binary):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk_expr(a)
    elif isinstance(e, FieldAcc):
        yield from walk_expr(e.obj)
    elif isinstance(e, Index):
        yield from walk_expr(e.obj)
        yield from walk_expr(e.index)
    elif isinstance(e, SeqLit):
        for a in e.items:
            yield from walk_expr(a)
    elif isinstance(e, RecLit):
        for _, a in e.fields:
            yield from walk_expr(a)
    elif isinstance(e, QualifiedVar):
        for a in e.instance.args:
            yield from walk_expr(a)
    elif isinstance(e, InstanceRef):
        for a in e.args:
            yield from walk_expr(a)


def statement_exprs(st: Statement):
    """Yield every expression appearing in a statement (guards, targets,
    right-hand sides, binder ranges)."""
    if isinstance(st, Assign):
        for t in st.targets:
            yield from walk_expr(t)
        for e in st.exprs:
            yield from walk_expr(e)
        if st.guard is not None:
            yield from walk_expr(st.guard)
    elif isinstance(st, Transaction):
        if st.guard is not None:
            yield from walk_expr(st.guard)
        for sub in st.subs:
            yield from statement_exprs(sub)
    elif isinstance(st, Quantified):
        for b in st.binders:
            yield from walk_expr(b.lo)
            yield from walk_expr(b.hi)
        for s in st.body:
            yield from statement_exprs(s)


def statement_labels(st: Statement):
    if isinstance(st, (Assign, Transaction)):
        if st.label:
            yield st.label
    elif isinstance(st, Quantified):
        for s in st.body:
            yield from statement_labels(s)
