"""Canonical pretty-printer.  parse(pretty_print(x)) is structurally equal
to x; comments are not preserved."""
from __future__ import annotations

from typing import List

from .nodes import (
    Assign, Binary, Call, Expr, FieldAcc, Index, Inhibition, InstanceRef, Lit,
    LocLit, PriorityBlock, ProgramDef, QualifiedVar, Quantified,
    QuantifiedInhibition, RecLit, SeqLit, Statement, SymLit, SystemDef,
    TAddr, TArray, TBool, TInt, TLoc, TMsg, TQueue, Transaction, Unary, Var,
)
from .values import BOTTOM

_PREC = {
    "or": 1, "and": 2,
    "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "++": 5,
    "*": 6, "/": 6, "%": 6,
}


def print_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Lit):
        if e.value is BOTTOM:
            return "null"
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, SymLit):
        return f"#{e.name}"
    if isinstance(e, LocLit):
        return f"@{e.name}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, InstanceRef):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{e.program}({args})"
    if isinstance(e, QualifiedVar):
        return f"{print_expr(e.instance)}.{e.name}"
    if isinstance(e, Unary):
        if e.op == "not":
            inner = print_expr(e.operand, 3)
            return f"not {inner}"
        return f"-{print_expr(e.operand, 7)}"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        left = print_expr(e.left, prec)
        # comparisons are non-associative; additive/multiplicative chains are
        # left-associative, so the right operand needs the next level up
        right = print_expr(e.right, prec + 1 if prec >= 4 else prec)
        text = f"{left} {e.op} {right}"
        return f"({text})" if prec < parent else text
    if isinstance(e, Call):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{e.name}({args})"
    if isinstance(e, FieldAcc):
        return f"{print_expr(e.obj, 8)}.{e.name}"
    if isinstance(e, Index):
        return f"{print_expr(e.obj, 8)}[{print_expr(e.index)}]"
    if isinstance(e, SeqLit):
        return "[" + ", ".join(print_expr(a) for a in e.items) + "]"
    if isinstance(e, RecLit):
        inner = ", ".join(f"{k} = {print_expr(v)}" for k, v in e.fields)
        return f"rec({inner})"
    raise ValueError(f"cannot print {e!r}")


def print_type(t) -> str:
    if isinstance(t, TBool):
        return "boolean"
    if isinstance(t, TInt):
        return "integer"
    if isinstance(t, TLoc):
        return "location"
    if isinstance(t, TAddr):
        return "address"
    if isinstance(t, TMsg):
        return "message"
    if isinstance(t, TQueue):
        return f"queue of {print_type(t.elem)}"
    if isinstance(t, TArray):
        return f"array[{print_expr(t.size)}] of {print_type(t.elem)}"
    raise ValueError(f"cannot print type {t!r}")


def _print_statement(st: Statement, indent: str) -> str:
    if isinstance(st, Assign):
        targets = ", ".join(print_expr(t) for t in st.targets)
        exprs = ", ".join(print_expr(e) for e in st.exprs)
        text = f"{targets} := {exprs}"
        if st.guard is not None:
            kw = "reacts-to" if st.reactive else "if"
            text += f" {kw} {print_expr(st.guard)}"
        if st.label:
            text = f"{st.label} :: {text}"
        return indent + text
    if isinstance(st, Transaction):
        subs = "; ".join(_print_statement(s, "") for s in st.subs)
        text = f"< {subs} >"
        if st.guard is not None:
            text += f" if {print_expr(st.guard)}"
        if st.label:
            text = f"{st.label} :: {text}"
        return indent + text
    if isinstance(st, Quantified):
        binders = ", ".join(
            f"{b.var} : {print_expr(b.lo)} <= {b.var} < {print_expr(b.hi)}"
            for b in st.binders)
        inner = f"\n{indent}|| ".join(
            _print_statement(s, "").lstrip() for s in st.body)
        return f"{indent}<[] {binders} ::\n{indent}   {inner}\n{indent}>"
    raise ValueError(f"cannot print {st!r}")


def _print_sep_list(items: List[str], indent: str = "  ") -> str:
    out = []
    for i, item in enumerate(items):
        prefix = f"{indent}   " if i == 0 else f"{indent}|| "
        out.append(prefix + item)
    return "\n".join(out)


def print_program(prog: ProgramDef) -> str:
    lines = []
    header = f"Program {prog.name}"
    if prog.params:
        header += "(" + ", ".join(prog.params) + ")"
    lines.append(header)
    if prog.declare:
        lines.append("declare")
        lines.append(_print_sep_list(
            [f"{n} : {print_type(t)}" for n, t in prog.declare]))
    if prog.always:
        lines.append("always")
        lines.append(_print_sep_list(
            [f"{n} = {print_expr(e)}" for n, e in prog.always]))
    if prog.initially:
        lines.append("initially")
        lines.append(_print_sep_list(
            [f"{n} = {print_expr(e)}" for n, e in prog.initially]))
    if prog.blocks or prog.reactive:
        lines.append("assign")
        blocks = list(prog.blocks)
        reactive = list(prog.reactive)
        if not blocks:
            stmts = [_print_statement(s, "  ").lstrip() for s in reactive]
            lines.append(_print_sep_list(stmts))
        else:
            for bi, blk in enumerate(blocks):
                lines.append(f"priority {blk.priority}:")
                stmts = [_print_statement(s, "  ").lstrip()
                         for s in blk.statements]
                if bi == len(blocks) - 1 and reactive:
                    stmts += [_print_statement(s, "  ").lstrip()
                              for s in reactive]
                lines.append(_print_sep_list(stmts))
    lines.append("end")
    return "\n".join(lines)


def _print_inhibition(ih: Inhibition) -> str:
    if ih.target_instance is not None:
        target = f"{print_expr(ih.target_instance)}.{ih.target_label}"
    else:
        target = ih.target_label
    return f"inhibit {target} when {print_expr(ih.pred)}"


def pretty_print(sysdef: SystemDef) -> str:
    """Render a system back to concrete syntax."""
    lines = [f"System {sysdef.name}", ""]
    for prog in sysdef.programs:
        lines.append(print_program(prog))
        lines.append("")
    lines.append("Components")
    comps = []
    for c in sysdef.components:
        text = c.program + "(" + ", ".join(str(a) for a in c.args) + ")"
        if c.at:
            text += f" at @{c.at}"
        comps.append(text)
    lines.append(_print_sep_list(comps))
    entries = []
    for st in sysdef.interactions:
        entries.append(("s", st))
    for ih in sysdef.inhibitions:
        entries.append(("i", ih))
    if entries:
        lines.append("")
        lines.append("Interactions")
        rendered = []
        for kind, node in entries:
            if kind == "s":
                rendered.append(_print_statement(node, "  ").lstrip())
            elif isinstance(node, QuantifiedInhibition):
                binders = ", ".join(
                    f"{b.var} : {print_expr(b.lo)} <= {b.var} < "
                    f"{print_expr(b.hi)}" for b in node.binders)
                inner = "\n  || ".join(_print_inhibition(s) for s in node.body)
                rendered.append(f"<[] {binders} ::\n     {inner}\n  >")
            else:
                rendered.append(_print_inhibition(node))
        lines.append(_print_sep_list(rendered))
    lines.append("end")
    return "\n".join(lines) + "\n"
