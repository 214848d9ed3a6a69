"""Compilation of a parsed system into a runnable form: component scopes,
schedule slots (statements and quantified families), the reactive sweep
list and the inhibition table.

Quantified families whose ranges are computable from program parameters
expand here; families ranging over run-time state (e.g. over the current
length of a queue) stay as templates and expand at each scheduling step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .nodes import (
    Assign, Binary, Binder, Call, Expr, FieldAcc, Index, Inhibition,
    InstanceRef, Lit, LocLit, ProgramDef, QualifiedVar, Quantified,
    QuantifiedInhibition, RecLit, SeqLit, Statement, SystemDef, TArray, TBool,
    TInt, TLoc, TAddr, TMsg, TQueue, Transaction, Type, Unary, Var,
    statement_exprs,
)
from .semantics import EvalContext, Scope, SystemState, default_value, eval_expr
from .values import Addr, BOTTOM, EvalError, Loc, Value

BUILTINS = frozenset({
    "head", "tail", "append", "at", "length", "delete", "member", "is_seq",
    "index_of", "ite", "msg", "can_send", "send",
})


class CompileError(Exception):
    pass


@dataclass
class UnitDef:
    """One concrete schedulable statement."""

    key: str
    scope: Optional[Scope]  # None for interaction statements
    stmt: Statement  # Assign | Transaction
    priority: int
    binding: Dict[str, Value]
    label: str
    required_hooks: frozenset
    order: int = 0


@dataclass
class FamilyDef:
    """Quantified family whose range depends on run-time state; expanded at
    each scheduling step (and each reactive sweep if reactive)."""

    key_base: str
    scope: Optional[Scope]
    quantified: Quantified
    priority: int
    binding: Dict[str, Value]
    label: str
    required_hooks: frozenset
    order: int = 0


@dataclass
class ReactiveDef:
    key: str
    scope: Optional[Scope]
    stmt: Assign
    binding: Dict[str, Value]
    required_hooks: frozenset


@dataclass
class CompiledSystem:
    sysdef: SystemDef
    scopes: Dict[str, Scope]  # declaration order
    instances_by_key: Dict[Tuple[str, Tuple[int, ...]], Scope]
    slots: List[object]  # UnitDef | FamilyDef in deterministic order
    reactive: List[object]  # ReactiveDef | FamilyDef (reactive) sweep order
    inhibitions: Dict[Tuple[Optional[str], str], List[tuple]]
    # (instance or None, label) -> [(pred, binding)]
    max_priority: int
    init_plans: Dict[str, list]  # instance -> ordered (var, expr) pairs
    at_locations: Dict[str, Optional[str]]
    queue_vars: Dict[str, List[str]]  # instance -> declared queue variables

    def ctx(self, state: SystemState, hooks, scope: Optional[Scope] = None,
            binding: Optional[Dict[str, Value]] = None) -> EvalContext:
        return EvalContext(state, self.scopes, self.instances_by_key, hooks,
                           scope, binding)


def _const_ctx(params: Dict[str, int]) -> EvalContext:
    state = SystemState({})
    return EvalContext(state, {}, {}, None, None, dict(params))


def materialize_type(t: Type, params: Dict[str, int]) -> tuple:
    if isinstance(t, TBool):
        return ("bool",)
    if isinstance(t, TInt):
        return ("int",)
    if isinstance(t, TLoc):
        return ("loc",)
    if isinstance(t, TAddr):
        return ("addr",)
    if isinstance(t, TMsg):
        return ("msg",)
    if isinstance(t, TQueue):
        return ("queue", materialize_type(t.elem, params))
    if isinstance(t, TArray):
        try:
            n = eval_expr(t.size, _const_ctx(params))
        except EvalError as exc:
            raise CompileError(f"array size is not computable from "
                               f"parameters: {exc}")
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise CompileError(f"array size must be a non-negative integer, "
                               f"got {n!r}")
        return ("array", n, materialize_type(t.elem, params))
    raise CompileError(f"unknown type {t!r}")


def required_hooks(st: Statement) -> frozenset:
    names = set()
    for e in statement_exprs(st):
        if isinstance(e, Call) and e.name not in BUILTINS:
            names.add(e.name)
    return frozenset(names)


def subst_expr(e: Expr, binding: Dict[str, Value]) -> Expr:
    """Substitute bound quantifier variables by literals; used when folding
    inhibitions into guards."""
    if isinstance(e, Var) and e.name in binding:
        return Lit(binding[e.name], pos=e.pos)
    if isinstance(e, Unary):
        return Unary(e.op, subst_expr(e.operand, binding), pos=e.pos)
    if isinstance(e, Binary):
        return Binary(e.op, subst_expr(e.left, binding),
                      subst_expr(e.right, binding), pos=e.pos)
    if isinstance(e, Call):
        return Call(e.name, tuple(subst_expr(a, binding) for a in e.args),
                    pos=e.pos)
    if isinstance(e, FieldAcc):
        return FieldAcc(subst_expr(e.obj, binding), e.name, pos=e.pos)
    if isinstance(e, Index):
        return Index(subst_expr(e.obj, binding), subst_expr(e.index, binding),
                     pos=e.pos)
    if isinstance(e, SeqLit):
        return SeqLit(tuple(subst_expr(a, binding) for a in e.items), pos=e.pos)
    if isinstance(e, RecLit):
        return RecLit(tuple((k, subst_expr(v, binding)) for k, v in e.fields),
                      pos=e.pos)
    if isinstance(e, QualifiedVar):
        inst = InstanceRef(e.instance.program,
                           tuple(subst_expr(a, binding) for a in e.instance.args),
                           pos=e.instance.pos)
        return QualifiedVar(inst, e.name, pos=e.pos)
    if isinstance(e, InstanceRef):
        return InstanceRef(e.program,
                           tuple(subst_expr(a, binding) for a in e.args),
                           pos=e.pos)
    return e


def _binding_suffix(binding: Dict[str, Value]) -> str:
    if not binding:
        return ""
    return "[" + ",".join(f"{k}={v}" for k, v in binding.items()) + "]"


def compile_system(sysdef: SystemDef, fold_inhibitions: bool = False
                   ) -> CompiledSystem:
    scopes: Dict[str, Scope] = {}
    by_key: Dict[Tuple[str, Tuple[int, ...]], Scope] = {}
    at_locations: Dict[str, Optional[str]] = {}
    queue_vars: Dict[str, List[str]] = {}

    for ordinal, comp in enumerate(sysdef.components):
        prog = sysdef.program(comp.program)
        params = dict(zip(prog.params, comp.args))
        addr = Addr(comp.program, tuple(comp.args), ordinal)
        name = repr(addr)
        if name in scopes:
            raise CompileError(f"duplicate component {name}")
        decls = {n: materialize_type(t, params) for n, t in prog.declare}
        decls.setdefault("lambda", ("loc",))
        decls.setdefault("self_addr", ("addr",))
        scope = Scope(name, comp.program, addr, params, dict(prog.always), decls)
        scopes[name] = scope
        by_key[(comp.program, tuple(comp.args))] = scope
        at_locations[name] = comp.at
        queue_vars[name] = [n for n, rt in decls.items() if rt[0] == "queue"]

    # inhibition table, expanded over quantifier bindings
    inhibitions: Dict[Tuple[Optional[str], str], List[tuple]] = {}

    def add_inhibition(ih: Inhibition, binding: Dict[str, Value]):
        pred = subst_expr(ih.pred, binding) if binding else ih.pred
        if ih.target_instance is None:
            key = (None, ih.target_label)
        else:
            cctx = _const_ctx({})
            cctx.binding = dict(binding)
            args = tuple(eval_expr(a, cctx) for a in ih.target_instance.args)
            sc = by_key.get((ih.target_instance.program, args))
            if sc is None:
                raise CompileError(
                    f"inhibition targets missing instance "
                    f"{ih.target_instance.program}{args}")
            key = (sc.instance, ih.target_label)
        inhibitions.setdefault(key, []).append((pred, dict(binding)))

    def expand_inhib(node, binding: Dict[str, Value]):
        if isinstance(node, QuantifiedInhibition):
            for combo in _static_combos(node.binders, binding, {}):
                for sub in node.body:
                    expand_inhib(sub, combo)
        else:
            add_inhibition(node, binding)

    for node in sysdef.inhibitions:
        expand_inhib(node, {})

    slots: List[object] = []
    reactive: List[object] = []
    order = [0]
    auto = [0]

    def label_of(st) -> str:
        if getattr(st, "label", None):
            return st.label
        auto[0] += 1
        return f"stmt{auto[0]}"

    def guard_with_inhibitions(scope, label, stmt, binding):
        """In folded mode rewrite the guard to conjoin the negated inhibition
        predicates; otherwise leave the statement alone."""
        if not fold_inhibitions:
            return stmt
        key = (scope.instance if scope else None, label)
        preds = inhibitions.get(key, [])
        if not preds:
            return stmt
        guard = stmt.guard if stmt.guard is not None else Lit(True)
        for pred, pbinding in preds:
            guard = Binary("and", guard,
                           Unary("not", subst_expr(pred, pbinding)))
        if isinstance(stmt, Assign):
            return Assign(stmt.label, stmt.targets, stmt.exprs, guard,
                          stmt.reactive, pos=stmt.pos)
        return Transaction(stmt.label, stmt.subs, guard, pos=stmt.pos)

    def emit_unit(scope, st, priority, binding):
        label = label_of(st)
        st = guard_with_inhibitions(scope, label, st, binding)
        prefix = f"{scope.instance}." if scope else "interaction."
        key = f"{prefix}{label}{_binding_suffix(binding)}"
        slots.append(UnitDef(key, scope, st, priority, dict(binding), label,
                             required_hooks(st), order[0]))
        order[0] += 1

    def emit_family(scope, q: Quantified, priority, binding):
        labels = [label_of(s) for s in q.body]
        prefix = f"{scope.instance}." if scope else "interaction."
        key_base = f"{prefix}{'/'.join(labels)}"
        slots.append(FamilyDef(key_base, scope, q, priority, dict(binding),
                               labels[0], required_hooks(q), order[0]))
        order[0] += 1

    def expand_statement(scope, st: Statement, priority,
                         binding: Dict[str, Value], params: Dict[str, int]):
        if isinstance(st, Quantified):
            combos = _try_static_combos(st.binders, binding, params)
            if combos is None:
                emit_family(scope, st, priority, binding)
                return
            for combo in combos:
                for s in st.body:
                    expand_statement(scope, s, priority, combo, params)
        else:
            emit_unit(scope, st, priority, binding)

    for comp_name, scope in scopes.items():
        prog = sysdef.program(scope.program)
        for blk in prog.blocks:
            for st in blk.statements:
                expand_statement(scope, st, blk.priority, {}, scope.params)

    priorities = sorted({s.priority for s in slots}) or [1]
    max_priority = priorities[-1]

    # interactions run at the highest priority present unless reconfigured
    for st in sysdef.interactions:
        if _is_reactive(st):
            continue
        expand_statement(None, st, max_priority, {}, {})

    # reactive sweep order: program statements in declaration/text order,
    # then reactive interactions
    def expand_reactive(scope, st: Statement, binding, params):
        if isinstance(st, Quantified):
            combos = _try_static_combos(st.binders, binding, params)
            if combos is None:
                prefix = f"{scope.instance}." if scope else "interaction."
                labels = [getattr(s, "label", None) or "reaction" for s in st.body]
                reactive.append(FamilyDef(f"{prefix}{'/'.join(labels)}", scope,
                                          st, 0, dict(binding), labels[0],
                                          required_hooks(st)))
                return
            for combo in combos:
                for s in st.body:
                    expand_reactive(scope, s, combo, params)
        else:
            assert isinstance(st, Assign)
            label = st.label or "reaction"
            prefix = f"{scope.instance}." if scope else "interaction."
            key = f"{prefix}{label}{_binding_suffix(binding)}"
            reactive.append(ReactiveDef(key, scope, st, dict(binding),
                                        required_hooks(st)))

    for comp_name, scope in scopes.items():
        prog = sysdef.program(scope.program)
        for st in prog.reactive:
            expand_reactive(scope, st, {}, scope.params)
    for st in sysdef.interactions:
        if _is_reactive(st):
            expand_reactive(None, st, {}, {})

    init_plans = {name: _init_plan(sysdef.program(s.program))
                  for name, s in scopes.items()}

    return CompiledSystem(sysdef, scopes, by_key, slots, reactive,
                          {} if fold_inhibitions else inhibitions,
                          max_priority, init_plans, at_locations, queue_vars)


def _is_reactive(st: Statement) -> bool:
    if isinstance(st, Assign):
        return st.reactive
    if isinstance(st, Quantified):
        return any(_is_reactive(s) for s in st.body)
    return False


def _static_combos(binders, outer: Dict[str, Value], params: Dict[str, int]):
    combos = _try_static_combos(binders, outer, params)
    if combos is None:
        raise CompileError("quantifier range must be computable here")
    return combos


def _try_static_combos(binders: Tuple[Binder, ...], outer: Dict[str, Value],
                       params: Dict[str, int]):
    """Expand binder ranges using only parameters and outer bindings;
    returns None when a range depends on run-time state."""
    combos = [dict(outer)]
    for b in binders:
        new_combos = []
        for c in combos:
            cctx = _const_ctx(params)
            cctx.binding.update(c)
            try:
                lo = eval_expr(b.lo, cctx)
                hi = eval_expr(b.hi, cctx)
            except EvalError:
                return None
            if not isinstance(lo, int) or not isinstance(hi, int):
                return None
            for v in range(lo, hi):
                d = dict(c)
                d[b.var] = v
                new_combos.append(d)
        combos = new_combos
    return combos


def _init_plan(prog: ProgramDef) -> list:
    """Order the initially entries so definitions precede their uses; a
    dependency cycle is a compile error."""
    entries = list(prog.initially)
    names = {n for n, _ in entries}
    deps = {}
    for n, e in entries:
        from .nodes import walk_expr
        deps[n] = {v.name for v in walk_expr(e)
                   if isinstance(v, Var) and v.name in names and v.name != n}
    ordered = []
    done: set = set()
    visiting: set = set()

    def visit(n):
        if n in done:
            return
        if n in visiting:
            raise CompileError(f"cyclic initialization involving '{n}'")
        visiting.add(n)
        for d in sorted(deps[n]):
            visit(d)
        visiting.discard(n)
        done.add(n)
        for name, e in entries:
            if name == n:
                ordered.append((name, e))
                return

    for n, _ in entries:
        visit(n)
    return ordered
