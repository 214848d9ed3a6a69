"""Semantic kernel: system states, expression evaluation and atomic
execution of a single multiple-assignment.

Evaluation is pure except for the `send` builtin, which accumulates pending
deliveries on the evaluation context; apply_assignment applies them after
the simultaneous target writes, all within one atomic statement.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .nodes import (
    Assign, Binary, Call, Expr, FieldAcc, Index, InstanceRef, Lit, LocLit,
    QualifiedVar, RecLit, SeqLit, SymLit, Unary, Var,
)
from .values import (
    BOTTOM, Addr, EvalError, Loc, Msg, Rec, Sym, Value, canon, check_int,
    is_null, seq_append, seq_at, seq_delete, seq_head, seq_length, seq_member,
    seq_tail, value_eq,
)


@dataclass(frozen=True)
class SystemState:
    """Immutable snapshot: one variable store per component instance, the
    global step counter and the current connectivity relation."""

    stores: Dict[str, Dict[str, Value]]
    step: int = 0
    connectivity: frozenset = frozenset()  # directed (src, dst) instance names

    def store(self, instance: str) -> Dict[str, Value]:
        try:
            return self.stores[instance]
        except KeyError:
            raise EvalError(f"unknown component instance '{instance}'")

    def get(self, instance: str, var: str) -> Value:
        st = self.store(instance)
        try:
            return st[var]
        except KeyError:
            raise EvalError(f"unbound variable '{instance}.{var}'")


def canonical_state(state: SystemState, with_connectivity: bool = True) -> str:
    """Canonical text form; the step counter is excluded so exploration can
    merge revisited states."""
    parts = []
    for inst in state.stores:
        st = state.stores[inst]
        inner = ",".join(f"{v}={canon(st[v])}" for v in sorted(st))
        parts.append(f"{inst}{{{inner}}}")
    text = ";".join(parts)
    if with_connectivity:
        conn = ",".join(f"{a}>{b}" for a, b in sorted(state.connectivity))
        text += f"|conn:{conn}"
    return text


@dataclass
class Scope:
    """Static evaluation context of one component instance."""

    instance: str
    program: str
    addr: Addr
    params: Dict[str, int]
    aliases: Dict[str, Expr]
    decls: Dict[str, tuple]  # materialized runtime types


class EvalContext:
    """Dynamic evaluation context: current state, instance scope (None at
    system level), quantifier bindings and pending send effects."""

    __slots__ = ("state", "scopes", "scope", "hooks", "binding",
                 "allow_send", "sends", "_alias_guard", "instances_by_key")

    def __init__(self, state: SystemState, scopes: Dict[str, Scope],
                 instances_by_key: Dict[Tuple[str, Tuple[int, ...]], Scope],
                 hooks, scope: Optional[Scope] = None,
                 binding: Optional[Dict[str, Value]] = None,
                 allow_send: bool = False):
        self.state = state
        self.scopes = scopes
        self.instances_by_key = instances_by_key
        self.hooks = hooks
        self.scope = scope
        self.binding = binding or {}
        self.allow_send = allow_send
        self.sends: List[Msg] = []
        self._alias_guard: set = set()

    def with_state(self, state: SystemState) -> "EvalContext":
        ctx = EvalContext(state, self.scopes, self.instances_by_key, self.hooks,
                          self.scope, self.binding, self.allow_send)
        return ctx

    # --- name resolution ---

    def lookup(self, name: str) -> Value:
        b = self.binding
        if name in b:
            return b[name]
        sc = self.scope
        if sc is not None:
            st = self.state.stores[sc.instance]
            if name in st:
                return st[name]
            if name in sc.params:
                return sc.params[name]
            if name in sc.aliases:
                return self._eval_alias(sc, name)
            raise EvalError(f"unbound variable '{name}' in {sc.instance}")
        # system/property scope: a bare name must have a unique owner
        owner = None
        for inst, scope in self.scopes.items():
            st = self.state.stores[inst]
            if name in st or name in scope.aliases or name in scope.params:
                if owner is not None:
                    raise EvalError(f"variable '{name}' is ambiguous between "
                                    f"{owner.instance} and {inst}; qualify it")
                owner = scope
        if owner is None:
            raise EvalError(f"unbound variable '{name}'")
        return self.qualified_lookup(owner, name)

    def qualified_lookup(self, scope: Scope, name: str) -> Value:
        st = self.state.stores[scope.instance]
        if name in st:
            return st[name]
        if name in scope.params:
            return scope.params[name]
        if name in scope.aliases:
            return self._eval_alias(scope, name)
        raise EvalError(f"unbound variable '{scope.instance}.{name}'")

    def _eval_alias(self, scope: Scope, name: str) -> Value:
        key = (scope.instance, name)
        if key in self._alias_guard:
            raise EvalError(f"cyclic derived-name definition involving '{name}'")
        self._alias_guard.add(key)
        saved = self.scope
        self.scope = scope
        try:
            return eval_expr(scope.aliases[name], self)
        finally:
            self.scope = saved
            self._alias_guard.discard(key)

    def resolve_instance(self, program: str, args: Tuple[int, ...]) -> Scope:
        try:
            return self.instances_by_key[(program, args)]
        except KeyError:
            raise EvalError(f"no component instance {program}{tuple(args)}")


# --- expression evaluation -------------------------------------------------------


def _need_int(v: Value, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"{what}: integer expected, got {canon(v)}")
    return v


def _need_bool(v: Value, what: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"{what}: boolean expected, got {canon(v)}")
    return v


def eval_expr(e: Expr, ctx: EvalContext) -> Value:
    """Evaluate an expression.  Pure in the produced value; `send` calls
    additionally record pending deliveries on the context."""
    kind = e.__class__
    if kind is Lit:
        return e.value
    if kind is Var:
        return ctx.lookup(e.name)
    if kind is Binary:
        return _eval_binary(e, ctx)
    if kind is Call:
        return _eval_call(e, ctx)
    if kind is FieldAcc:
        obj = eval_expr(e.obj, ctx)
        if isinstance(obj, Msg):
            return obj.field(e.name)
        if isinstance(obj, Rec):
            return obj.get(e.name)
        raise EvalError(f"field access .{e.name} on non-record {canon(obj)}")
    if kind is Index:
        return seq_at(eval_expr(e.obj, ctx), eval_expr(e.index, ctx))
    if kind is Unary:
        v = eval_expr(e.operand, ctx)
        if e.op == "not":
            return not _need_bool(v, "not")
        return check_int(-_need_int(v, "negation"))
    if kind is SymLit:
        return Sym(e.name)
    if kind is LocLit:
        return Loc(e.name)
    if kind is SeqLit:
        return tuple(eval_expr(x, ctx) for x in e.items)
    if kind is RecLit:
        return Rec.make([(k, eval_expr(v, ctx)) for k, v in e.fields])
    if kind is QualifiedVar:
        scope = _instance_scope(e.instance, ctx)
        return ctx.qualified_lookup(scope, e.name)
    if kind is InstanceRef:
        return _instance_scope(e, ctx).addr
    raise EvalError(f"cannot evaluate {e!r}")


def _instance_scope(ref: InstanceRef, ctx: EvalContext) -> Scope:
    args = tuple(_need_int(eval_expr(a, ctx), "instance argument")
                 for a in ref.args)
    return ctx.resolve_instance(ref.program, args)


def _eval_binary(e: Binary, ctx: EvalContext) -> Value:
    op = e.op
    if op == "and":
        return (_need_bool(eval_expr(e.left, ctx), "and")
                and _need_bool(eval_expr(e.right, ctx), "and"))
    if op == "or":
        return (_need_bool(eval_expr(e.left, ctx), "or")
                or _need_bool(eval_expr(e.right, ctx), "or"))
    lv = eval_expr(e.left, ctx)
    rv = eval_expr(e.right, ctx)
    if op == "=":
        return value_eq(lv, rv)
    if op == "!=":
        return not value_eq(lv, rv)
    if op == "++":
        return seq_append(lv, rv)
    li = _need_int(lv, f"'{op}'")
    ri = _need_int(rv, f"'{op}'")
    if op == "+":
        return check_int(li + ri)
    if op == "-":
        return check_int(li - ri)
    if op == "*":
        return check_int(li * ri)
    if op == "/":
        if ri == 0:
            raise EvalError("division by zero")
        return check_int(li // ri)
    if op == "%":
        if ri == 0:
            raise EvalError("modulo by zero")
        return li % ri
    if op == "<":
        return li < ri
    if op == "<=":
        return li <= ri
    if op == ">":
        return li > ri
    if op == ">=":
        return li >= ri
    raise EvalError(f"unknown operator '{op}'")


def _eval_call(e: Call, ctx: EvalContext) -> Value:
    name = e.name
    if name == "ite":
        if len(e.args) != 3:
            raise EvalError("ite takes (condition, then, else)")
        c = _need_bool(eval_expr(e.args[0], ctx), "ite condition")
        return eval_expr(e.args[1] if c else e.args[2], ctx)
    args = [eval_expr(a, ctx) for a in e.args]
    if name == "head":
        _arity(e, args, 1)
        return seq_head(args[0])
    if name == "tail":
        _arity(e, args, 1)
        return seq_tail(args[0])
    if name == "append":
        _arity(e, args, 2)
        return seq_append(args[0], args[1])
    if name == "at":
        _arity(e, args, 2)
        return seq_at(args[0], args[1])
    if name == "length":
        _arity(e, args, 1)
        return seq_length(args[0])
    if name == "delete":
        _arity(e, args, 2)
        return seq_delete(args[0], args[1])
    if name == "member":
        _arity(e, args, 2)
        return seq_member(args[0], args[1])
    if name == "is_seq":
        _arity(e, args, 1)
        return is_null(args[0]) or isinstance(args[0], tuple)
    if name == "index_of":
        _arity(e, args, 1)
        if not isinstance(args[0], Addr):
            raise EvalError(f"index_of: address expected, got {canon(args[0])}")
        return args[0].ordinal
    if name == "msg":
        if len(args) == 5:
            status, src, dst, mtype, content = args
            reply = None
        elif len(args) == 6:
            status, src, dst, mtype, reply, content = args
            if not isinstance(reply, Sym):
                raise EvalError("msg: reply must be a #symbol")
        else:
            raise EvalError("msg takes (status, source, destination, type, "
                            "[reply,] content)")
        if not isinstance(mtype, Sym):
            raise EvalError("msg: type must be a #symbol")
        return Msg(_need_bool(status, "msg status"), src, dst, mtype, reply,
                   content)
    if name == "can_send":
        _arity(e, args, 2)
        return _can_send(args[0], args[1], ctx)
    if name == "send":
        _arity(e, args, 1)
        if not ctx.allow_send:
            raise EvalError("send is only allowed on the right-hand side of "
                            "an assignment")
        m = args[0]
        if not isinstance(m, Msg):
            raise EvalError(f"send: message expected, got {canon(m)}")
        ok = _can_send(m.source, m.destination, ctx)
        if ok:
            ctx.sends.append(dataclasses.replace(m, status=False))
        return ok
    if ctx.hooks is not None and name in ctx.hooks.provides:
        return ctx.hooks.call(name, args, ctx)
    raise EvalError(f"unknown function '{name}'")


def _arity(e: Call, args, n: int):
    if len(args) != n:
        raise EvalError(f"{e.name} takes {n} argument(s), got {len(args)}")


def _can_send(a: Value, b: Value, ctx: EvalContext) -> bool:
    if is_null(a) or is_null(b):
        return False
    if not isinstance(a, Addr) or not isinstance(b, Addr):
        raise EvalError("can_send: addresses expected")
    if ctx.hooks is None:
        return True
    return ctx.hooks.can_send(a, b, ctx.state)


# --- assignment application -------------------------------------------------------

# A target path is (instance, var, ops) with ops a tuple of
# ('i', index) and ('f', fieldname) steps.


def resolve_target(e: Expr, ctx: EvalContext):
    ops: List[tuple] = []
    cur = e
    while True:
        if isinstance(cur, Index):
            ops.append(("i", _need_int(eval_expr(cur.index, ctx), "index")))
            cur = cur.obj
        elif isinstance(cur, FieldAcc):
            ops.append(("f", cur.name))
            cur = cur.obj
        elif isinstance(cur, Call) and cur.name == "head" and len(cur.args) == 1:
            ops.append(("i", 0))
            cur = cur.args[0]
        elif isinstance(cur, Call) and cur.name == "at" and len(cur.args) == 2:
            ops.append(("i", _need_int(eval_expr(cur.args[1], ctx), "at index")))
            cur = cur.args[0]
        elif isinstance(cur, Var):
            sc = ctx.scope
            if sc is None:
                raise EvalError(f"unqualified assignment target '{cur.name}' "
                                f"outside a component")
            _check_writable(sc, cur.name)
            return sc.instance, cur.name, tuple(reversed(ops))
        elif isinstance(cur, QualifiedVar):
            sc = _instance_scope(cur.instance, ctx)
            _check_writable(sc, cur.name)
            return sc.instance, cur.name, tuple(reversed(ops))
        else:
            raise EvalError(f"not an assignable target: {cur!r}")


def _check_writable(scope: Scope, name: str):
    if name == "self_addr":
        raise EvalError("self_addr is read-only")
    if name in scope.aliases:
        raise EvalError(f"'{name}' is a derived name and cannot be assigned")
    if name != "lambda" and name not in scope.decls:
        raise EvalError(f"write to undeclared variable '{scope.instance}.{name}'")


def _set_path(container: Value, ops: tuple, depth: int, newval: Value) -> Value:
    if depth == len(ops):
        return newval
    op, arg = ops[depth]
    if op == "i":
        if container is BOTTOM:
            container = ()
        if not isinstance(container, tuple):
            raise EvalError(f"indexed write into non-sequence {canon(container)}")
        if arg < 0 or arg >= len(container):
            raise EvalError(f"write index {arg} out of range "
                            f"(length {len(container)})")
        inner = _set_path(container[arg], ops, depth + 1, newval)
        return container[:arg] + (inner,) + container[arg + 1:]
    # field write
    if isinstance(container, Msg):
        fieldmap = {"status": "status", "source": "source",
                    "destination": "destination", "type": "mtype",
                    "reply": "reply", "content": "content"}
        if arg not in fieldmap:
            raise EvalError(f"message has no field '{arg}'")
        inner = _set_path(getattr(container, fieldmap[arg]), ops, depth + 1,
                          newval)
        if arg == "status":
            inner = _need_bool(inner, "status")
        return dataclasses.replace(container, **{fieldmap[arg]: inner})
    if isinstance(container, Rec):
        fields = dict(container.fields)
        if arg not in fields:
            raise EvalError(f"record has no field '{arg}'")
        fields[arg] = _set_path(fields[arg], ops, depth + 1, newval)
        return Rec.make(fields.items())
    raise EvalError(f"field write .{arg} into non-record {canon(container)}")


def apply_assignment(state: SystemState, st: Assign, ctx: EvalContext
                     ) -> Tuple[SystemState, bool]:
    """Execute one multiple assignment atomically: all right-hand sides read
    the pre-state, then all targets are written simultaneously, then any
    pending sends are delivered.  Returns (post-state, changed)."""
    if len(st.targets) != len(st.exprs):
        raise EvalError(f"{len(st.targets)} target(s) but {len(st.exprs)} "
                        f"expression(s)")
    ctx.sends = []
    ctx.allow_send = True
    try:
        values = [eval_expr(e, ctx) for e in st.exprs]
    finally:
        ctx.allow_send = False
    paths = [resolve_target(t, ctx) for t in st.targets]
    for i, p in enumerate(paths):
        for q in paths[i + 1:]:
            if _paths_conflict(p, q):
                raise EvalError(f"conflicting assignment targets "
                                f"{p[0]}.{p[1]} / {q[0]}.{q[1]}")
    new_stores = dict(state.stores)
    touched: set = set()
    changed = False

    def writable(inst: str) -> Dict[str, Value]:
        if inst not in touched:
            new_stores[inst] = dict(new_stores[inst])
            touched.add(inst)
        return new_stores[inst]

    for (inst, var, ops), val in zip(paths, values):
        store = writable(inst)
        old_whole = store.get(var, BOTTOM)
        new_whole = _set_path(old_whole, ops, 0, val)
        _check_shape(ctx.scopes[inst], var, new_whole, bool(ops))
        if not changed and not value_eq(old_whole, new_whole):
            changed = True
        store[var] = new_whole
    for m in ctx.sends:
        dst = m.destination
        inst = _addr_instance(dst, ctx)
        store = writable(inst)
        if "interface" not in store:
            raise EvalError(f"send: destination {inst} has no interface queue")
        store["interface"] = seq_append(store["interface"], m)
        changed = True
    ctx.sends = []
    return SystemState(new_stores, state.step, state.connectivity), changed


def _addr_instance(dst: Value, ctx: EvalContext) -> str:
    if not isinstance(dst, Addr):
        raise EvalError(f"send: destination is not an address: {canon(dst)}")
    return ctx.resolve_instance(dst.program, dst.args).instance


def _check_shape(scope: Scope, var: str, value: Value, partial: bool):
    """Whole-variable writes into a declared array must preserve its length."""
    if partial:
        return
    rt = scope.decls.get(var)
    if rt is not None and rt[0] == "array":
        if not isinstance(value, tuple) or len(value) != rt[1]:
            raise EvalError(f"array '{var}' expects length {rt[1]}, got "
                            f"{canon(value)}")


def _paths_conflict(p, q) -> bool:
    if p[0] != q[0] or p[1] != q[1]:
        return False
    ops_p, ops_q = p[2], q[2]
    for a, b in zip(ops_p, ops_q):
        if a != b:
            return False
    return True  # one path is a prefix of the other


def run_guarded(state: SystemState, st: Assign, ctx: EvalContext
                ) -> Tuple[SystemState, bool]:
    """Skip-or-execute helper: evaluates the guard against `state` and
    applies the assignment when it holds."""
    ctx = ctx.with_state(state)
    if st.guard is not None and not _need_bool(eval_expr(st.guard, ctx), "guard"):
        return state, False
    return apply_assignment(state, st, ctx)


# --- runtime types and defaults -----------------------------------------------------


def default_value(rt: tuple) -> Value:
    kind = rt[0]
    if kind == "bool":
        return False
    if kind == "int":
        return 0
    if kind in ("loc", "addr", "msg"):
        return BOTTOM
    if kind == "queue":
        return ()
    if kind == "array":
        return tuple(default_value(rt[2]) for _ in range(rt[1]))
    raise EvalError(f"unknown runtime type {rt!r}")
