"""Lexer and recursive-descent parser for the .unity concrete syntax.

The notation is line-insensitive: `||` separates section entries and
statements, comments sit in braces, quantified statement families are
written `<[] i : lo <= i < hi :: ... >` and transactions `< a ; b >`.
See docs/grammar.md for the full EBNF.
"""
from __future__ import annotations

import re
from typing import List, Optional, Tuple

from .nodes import (
    Assign, Binary, Binder, Call, Component, Expr, FieldAcc, Index, Inhibition,
    InstanceRef, Lit, LocLit, Pos, PriorityBlock, ProgramDef, QualifiedVar,
    Quantified, QuantifiedInhibition, RecLit, SeqLit, Statement, SymLit,
    SystemDef, TAddr, TArray, TBool, TInt, TLoc, TMsg, TQueue, Transaction,
    Type, Unary, Var, statement_exprs, statement_labels, walk_expr,
)
from .values import BOTTOM


class ParseError(Exception):
    def __init__(self, msg: str, pos: Pos):
        super().__init__(f"{pos}: {msg}")
        self.msg = msg
        self.pos = pos


KEYWORDS = {
    "Program", "System", "Components", "Interactions",
    "declare", "always", "initially", "assign", "end", "priority",
    "inhibit", "when", "if", "reacts-to",
    "true", "false", "null", "and", "or", "not",
    "at", "of", "rec",
    "boolean", "integer", "location", "address", "message", "queue", "array",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\{[^}]*\})
  | (?P<reacts>reacts-to\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<sym>\#[A-Za-z_][A-Za-z0-9_]*)
  | (?P<loc>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\|\||\+\+|:=|::|<=|>=|!=|=>|[=<>+\-*/%,;:()\[\].])
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: Pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"{self.kind}({self.text})@{self.pos}"


def tokenize(text: str) -> List[Token]:
    toks: List[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", Pos(line, col))
        pos = Pos(line, col)
        chunk = m.group(0)
        kind = m.lastgroup
        if kind == "reacts":
            toks.append(Token("kw", "reacts-to", pos))
        elif kind == "ident":
            toks.append(Token("kw" if chunk in KEYWORDS else "ident", chunk, pos))
        elif kind == "int":
            toks.append(Token("int", chunk, pos))
        elif kind == "sym":
            toks.append(Token("sym", chunk[1:], pos))
        elif kind == "loc":
            toks.append(Token("loc", chunk[1:], pos))
        elif kind == "op":
            toks.append(Token(chunk, chunk, pos))
        # ws / comment skipped
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        i = m.end()
    toks.append(Token("eof", "", Pos(line, col)))
    return toks


_CMP_OPS = {"=", "!=", "<", "<=", ">", ">="}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # --- token helpers ---

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected '{want}', found '{t.text or t.kind}'", t.pos)
        return self.next()

    def kw(self, word: str) -> Token:
        return self.expect("kw", word)

    def at_kw(self, word: str, ahead: int = 0) -> bool:
        return self.at("kw", word, ahead)

    # --- entry points ---

    def parse_file(self):
        if self.at_kw("System"):
            return self.parse_system()
        return self.parse_program()

    def parse_system(self) -> SystemDef:
        pos = self.kw("System").pos
        name = self.expect("ident").text
        programs = []
        while self.at_kw("Program"):
            programs.append(self.parse_program())
        self.kw("Components")
        components = [self.parse_component()]
        while self.at("||"):
            self.next()
            components.append(self.parse_component())
        interactions: List[Statement] = []
        inhibitions: list = []
        if self.at_kw("Interactions"):
            self.next()
            if not self.at_kw("end"):
                self.parse_interaction_entry(interactions, inhibitions)
                while self.at("||"):
                    self.next()
                    self.parse_interaction_entry(interactions, inhibitions)
        self.kw("end")
        sysdef = SystemDef(name, tuple(programs), tuple(components),
                           tuple(interactions), tuple(inhibitions), pos=pos)
        _resolve_system(sysdef)
        return sysdef

    def parse_component(self) -> Component:
        t = self.expect("ident")
        args: Tuple[int, ...] = ()
        if self.at("("):
            self.next()
            lst = []
            if not self.at(")"):
                lst.append(int(self.expect("int").text))
                while self.at(","):
                    self.next()
                    lst.append(int(self.expect("int").text))
            self.expect(")")
            args = tuple(lst)
        at_loc = None
        if self.at_kw("at"):
            self.next()
            at_loc = self.expect("loc").text
        return Component(t.text, args, at_loc, pos=t.pos)

    def parse_interaction_entry(self, interactions: list, inhibitions: list):
        if self.at_kw("inhibit"):
            inhibitions.append(self.parse_inhibition())
        elif self.at("<") and self.at("[", ahead=1):
            # quantified entry: statements and inhibitions both allowed
            pos = self.next().pos
            self.expect("[")
            self.expect("]")
            binders = self.parse_binders()
            self.expect("::")
            inner_stmts: List[Statement] = []
            inner_inhib: list = []
            self.parse_interaction_entry(inner_stmts, inner_inhib)
            while self.at("||"):
                self.next()
                self.parse_interaction_entry(inner_stmts, inner_inhib)
            self.expect(">")
            if inner_stmts:
                interactions.append(Quantified(binders, tuple(inner_stmts), pos=pos))
            if inner_inhib:
                inhibitions.append(QuantifiedInhibition(binders, tuple(inner_inhib), pos=pos))
        else:
            interactions.append(self.parse_statement())

    def parse_inhibition(self) -> Inhibition:
        pos = self.kw("inhibit").pos
        name = self.expect("ident")
        inst: Optional[InstanceRef] = None
        label: str
        if self.at("("):
            self.next()
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.next()
                    args.append(self.parse_expr())
            self.expect(")")
            self.expect(".")
            label = self.expect("ident").text
            inst = InstanceRef(name.text, tuple(args), pos=name.pos)
        elif self.at("."):
            self.next()
            label = self.expect("ident").text
            inst = InstanceRef(name.text, (), pos=name.pos)
        else:
            label = name.text
        self.kw("when")
        pred = self.parse_expr()
        return Inhibition(inst, label, pred, pos=pos)

    # --- programs ---

    def parse_program(self) -> ProgramDef:
        pos = self.kw("Program").pos
        name = self.expect("ident").text
        params: Tuple[str, ...] = ()
        if self.at("("):
            self.next()
            ps = []
            if not self.at(")"):
                ps.append(self.expect("ident").text)
                while self.at(","):
                    self.next()
                    ps.append(self.expect("ident").text)
            self.expect(")")
            params = tuple(ps)
        declare: List[Tuple[str, Type]] = []
        always: List[Tuple[str, Expr]] = []
        initially: List[Tuple[str, Expr]] = []
        blocks: List[PriorityBlock] = []
        if self.at_kw("declare"):
            self.next()
            declare.append(self.parse_decl())
            while self.at("||"):
                self.next()
                declare.append(self.parse_decl())
        if self.at_kw("always"):
            self.next()
            always.append(self.parse_def())
            while self.at("||"):
                self.next()
                always.append(self.parse_def())
        if self.at_kw("initially"):
            self.next()
            initially.append(self.parse_def())
            while self.at("||"):
                self.next()
                initially.append(self.parse_def())
        if self.at_kw("assign"):
            self.next()
            if self.at_kw("priority"):
                while self.at_kw("priority"):
                    self.next()
                    prio = int(self.expect("int").text)
                    self.expect(":")
                    blocks.append(PriorityBlock(prio, tuple(self.parse_stmtlist())))
            elif not self.at_kw("end"):
                blocks.append(PriorityBlock(1, tuple(self.parse_stmtlist())))
        self.kw("end")
        prog = _split_reactive(name, params, declare, always, initially, blocks, pos)
        _check_program(prog)
        return prog

    def parse_decl(self) -> Tuple[str, Type]:
        name = self.expect("ident").text
        self.expect(":")
        return name, self.parse_type()

    def parse_type(self) -> Type:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "boolean":
                self.next()
                return TBool()
            if t.text == "integer":
                self.next()
                return TInt()
            if t.text == "location":
                self.next()
                return TLoc()
            if t.text == "address":
                self.next()
                return TAddr()
            if t.text == "message":
                self.next()
                return TMsg()
            if t.text == "queue":
                self.next()
                self.kw("of")
                return TQueue(self.parse_type())
            if t.text == "array":
                self.next()
                self.expect("[")
                size = self.parse_expr()
                self.expect("]")
                self.kw("of")
                return TArray(size, self.parse_type())
        raise ParseError(f"expected a type, found '{t.text}'", t.pos)

    def parse_def(self) -> Tuple[str, Expr]:
        name = self.expect("ident").text
        self.expect("=")
        return name, self.parse_expr()

    # --- statements ---

    def parse_stmtlist(self) -> List[Statement]:
        stmts = [self.parse_statement()]
        while self.at("||"):
            self.next()
            stmts.append(self.parse_statement())
        return stmts

    def parse_statement(self) -> Statement:
        label = None
        pos = self.peek().pos
        if self.at("ident") and self.at("::", ahead=1):
            label = self.next().text
            self.next()
        if self.at("<"):
            if self.at("[", ahead=1):
                q = self.parse_quantified()
                if label is not None:
                    # a label on a one-statement family names that statement
                    if len(q.body) != 1 or getattr(q.body[0], "label", None):
                        raise ParseError(
                            "a label on a quantified family requires exactly "
                            "one unlabeled body statement", pos)
                    inner = q.body[0]
                    if isinstance(inner, Assign):
                        inner = Assign(label, inner.targets, inner.exprs,
                                       inner.guard, inner.reactive,
                                       pos=inner.pos)
                    elif isinstance(inner, Transaction):
                        inner = Transaction(label, inner.subs, inner.guard,
                                            pos=inner.pos)
                    else:
                        raise ParseError("cannot label a nested family", pos)
                    q = Quantified(q.binders, (inner,), pos=q.pos)
                return q
            return self.parse_transaction(label, pos)
        return self.parse_assignment(label, pos)

    def parse_quantified(self) -> Quantified:
        pos = self.expect("<").pos
        self.expect("[")
        self.expect("]")
        binders = self.parse_binders()
        self.expect("::")
        body = self.parse_stmtlist()
        self.expect(">")
        return Quantified(binders, tuple(body), pos=pos)

    def parse_binders(self) -> Tuple[Binder, ...]:
        binders = [self.parse_binder()]
        while self.at(","):
            self.next()
            binders.append(self.parse_binder())
        return tuple(binders)

    def parse_binder(self) -> Binder:
        var = self.expect("ident")
        self.expect(":")
        lo = self.parse_add()
        self.expect("<=")
        mid = self.expect("ident")
        if mid.text != var.text:
            raise ParseError(f"range must bound '{var.text}', found '{mid.text}'",
                             mid.pos)
        self.expect("<")
        hi = self.parse_add()
        return Binder(var.text, lo, hi)

    def parse_transaction(self, label, pos) -> Transaction:
        self.expect("<")
        subs = [self.parse_sub_assignment()]
        while self.at(";"):
            self.next()
            subs.append(self.parse_sub_assignment())
        self.expect(">")
        guard = None
        if self.at_kw("if"):
            self.next()
            guard = self.parse_expr()
        return Transaction(label, tuple(subs), guard, pos=pos)

    def parse_sub_assignment(self) -> Assign:
        pos = self.peek().pos
        st = self.parse_assignment(None, pos)
        if st.reactive:
            raise ParseError("reacts-to is not allowed inside a transaction", pos)
        return st

    def parse_assignment(self, label, pos) -> Assign:
        targets = [self.parse_expr()]
        while self.at(","):
            self.next()
            targets.append(self.parse_expr())
        self.expect(":=")
        exprs = [self.parse_expr()]
        while self.at(","):
            self.next()
            exprs.append(self.parse_expr())
        if len(targets) != len(exprs):
            raise ParseError(
                f"{len(targets)} target(s) but {len(exprs)} expression(s)", pos)
        for t in targets:
            if not _is_lvalue(t):
                raise ParseError("not an assignable target", _pos_of(t))
        guard = None
        reactive = False
        if self.at_kw("if"):
            self.next()
            guard = self.parse_expr()
        elif self.at_kw("reacts-to"):
            self.next()
            guard = self.parse_expr()
            reactive = True
        return Assign(label, tuple(targets), tuple(exprs), guard, reactive, pos=pos)

    # --- expressions (precedence climbing) ---

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        e = self.parse_and()
        while self.at_kw("or"):
            pos = self.next().pos
            e = Binary("or", e, self.parse_and(), pos=pos)
        return e

    def parse_and(self) -> Expr:
        e = self.parse_not()
        while self.at_kw("and"):
            pos = self.next().pos
            e = Binary("and", e, self.parse_not(), pos=pos)
        return e

    def parse_not(self) -> Expr:
        if self.at_kw("not"):
            pos = self.next().pos
            return Unary("not", self.parse_not(), pos=pos)
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        e = self.parse_add()
        t = self.peek()
        if t.kind in _CMP_OPS:
            # a '>' not followed by an expression closes the enclosing
            # quantifier or transaction rather than comparing
            if t.kind == ">" and not self._starts_expr(self.peek(1)):
                return e
            self.next()
            right = self.parse_add()
            return Binary(t.text, e, right, pos=t.pos)  # non-associative
        return e

    @staticmethod
    def _starts_expr(t: Token) -> bool:
        if t.kind in ("int", "ident", "sym", "loc", "(", "[", "-"):
            return True
        return t.kind == "kw" and t.text in ("true", "false", "null", "rec",
                                             "at", "not")

    def parse_add(self) -> Expr:
        e = self.parse_mul()
        while self.peek().kind in ("+", "-", "++"):
            t = self.next()
            e = Binary(t.text, e, self.parse_mul(), pos=t.pos)
        return e

    def parse_mul(self) -> Expr:
        e = self.parse_unary()
        while self.peek().kind in ("*", "/", "%"):
            t = self.next()
            e = Binary(t.text, e, self.parse_unary(), pos=t.pos)
        return e

    def parse_unary(self) -> Expr:
        if self.at("-"):
            pos = self.next().pos
            return Unary("-", self.parse_unary(), pos=pos)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_primary()
        while True:
            if self.at("."):
                pos = self.next().pos
                name = self.expect("ident").text
                e = FieldAcc(e, name, pos=pos)
            elif self.at("["):
                pos = self.next().pos
                idx = self.parse_expr()
                self.expect("]")
                e = Index(e, idx, pos=pos)
            else:
                return e

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Lit(int(t.text), pos=t.pos)
        if t.kind == "sym":
            self.next()
            return SymLit(t.text, pos=t.pos)
        if t.kind == "loc":
            self.next()
            return LocLit(t.text, pos=t.pos)
        if t.kind == "kw":
            if t.text == "true":
                self.next()
                return Lit(True, pos=t.pos)
            if t.text == "false":
                self.next()
                return Lit(False, pos=t.pos)
            if t.text == "null":
                self.next()
                return Lit(BOTTOM, pos=t.pos)
            if t.text == "rec":
                self.next()
                self.expect("(")
                fields = []
                if not self.at(")"):
                    fields.append(self.parse_recfield())
                    while self.at(","):
                        self.next()
                        fields.append(self.parse_recfield())
                self.expect(")")
                return RecLit(tuple(fields), pos=t.pos)
            if t.text == "at" and self.at("(", ahead=1):
                # builtin at(q, i); 'at' is otherwise a keyword
                self.next()
                return self.finish_call("at", t.pos)
        if t.kind == "ident":
            self.next()
            if self.at("("):
                return self.finish_call(t.text, t.pos)
            return Var(t.text, pos=t.pos)
        if t.kind == "(":
            self.next()
            items = [self.parse_expr()]
            while self.at(","):
                self.next()
                items.append(self.parse_expr())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return SeqLit(tuple(items), pos=t.pos)
        if t.kind == "[":
            self.next()
            items = []
            if not self.at("]"):
                items.append(self.parse_expr())
                while self.at(","):
                    self.next()
                    items.append(self.parse_expr())
            self.expect("]")
            return SeqLit(tuple(items), pos=t.pos)
        raise ParseError(f"expected an expression, found '{t.text or t.kind}'", t.pos)

    def finish_call(self, name: str, pos: Pos) -> Call:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        return Call(name, tuple(args), pos=pos)

    def parse_recfield(self) -> Tuple[str, Expr]:
        name = self.expect("ident").text
        self.expect("=")
        return name, self.parse_expr()


def _pos_of(e: Expr) -> Pos:
    return getattr(e, "pos", Pos(0, 0))


def _is_lvalue(e: Expr) -> bool:
    if isinstance(e, (Var, QualifiedVar)):
        return True
    if isinstance(e, Index):
        return _is_lvalue(e.obj)
    if isinstance(e, FieldAcc):
        # prog(i).var parses as FieldAcc(Call(...)) and resolves to a
        # QualifiedVar once program names are known
        if isinstance(e.obj, Call) and e.obj.name not in ("head", "at"):
            return True
        return _is_lvalue(e.obj)
    if isinstance(e, Call) and e.name == "head" and len(e.args) == 1:
        return _is_lvalue(e.args[0])
    if isinstance(e, Call) and e.name == "at" and len(e.args) == 2:
        return _is_lvalue(e.args[0])
    return False


def _split_reactive(name, params, declare, always, initially, blocks, pos) -> ProgramDef:
    """Separate reacts-to statements from the scheduled blocks; the source
    notation intermixes them in the assign section."""
    plain_blocks: List[PriorityBlock] = []
    reactive: List[Statement] = []

    def split_stmts(stmts):
        kept, reac = [], []
        for st in stmts:
            if isinstance(st, Assign) and st.reactive:
                reac.append(st)
            elif isinstance(st, Quantified):
                ik, ir = split_stmts(st.body)
                if ik:
                    kept.append(Quantified(st.binders, tuple(ik), pos=st.pos))
                if ir:
                    reac.append(Quantified(st.binders, tuple(ir), pos=st.pos))
            else:
                kept.append(st)
        return kept, reac

    for blk in blocks:
        kept, reac = split_stmts(blk.statements)
        reactive.extend(reac)
        if kept:
            plain_blocks.append(PriorityBlock(blk.priority, tuple(kept)))
    return ProgramDef(name, params, tuple(declare), tuple(always),
                      tuple(initially), tuple(plain_blocks), tuple(reactive),
                      pos=pos)


_IMPLICIT_VARS = {"lambda", "self_addr"}


def _check_program(prog: ProgramDef):
    """Parse-time structural checks: unique labels, unique priorities,
    declared variables, binder scoping."""
    decl = {n for n, _ in prog.declare}
    aliases = {n for n, _ in prog.always}
    labels: set = set()
    prios: set = set()
    for blk in prog.blocks:
        if blk.priority in prios:
            raise ParseError(f"duplicate priority {blk.priority}", prog.pos)
        prios.add(blk.priority)

    def check_stmt(st: Statement, bound: frozenset):
        lab = getattr(st, "label", None)
        if lab is not None:
            if lab in labels:
                raise ParseError(f"duplicate label '{lab}'", _stmt_pos(st))
            labels.add(lab)
        if isinstance(st, Quantified):
            inner = bound
            for b in st.binders:
                check_expr_vars(b.lo, inner, st)
                check_expr_vars(b.hi, inner, st)
                inner = inner | {b.var}
            for s in st.body:
                check_stmt(s, inner)
            return
        if isinstance(st, Transaction):
            if st.guard is not None:
                check_expr_vars(st.guard, bound, st)
            for sub in st.subs:
                check_stmt(sub, bound)
            return
        assert isinstance(st, Assign)
        for t in st.targets:
            root = _target_root(t)
            if isinstance(root, Var):
                if root.name == "self_addr":
                    raise ParseError("self_addr is read-only", root.pos)
                if root.name not in decl and root.name != "lambda":
                    raise ParseError(f"assignment to undeclared variable "
                                     f"'{root.name}'", root.pos)
                if root.name in aliases:
                    raise ParseError(f"'{root.name}' is a derived name and "
                                     f"cannot be assigned", root.pos)
            check_expr_vars(t, bound, st)
        for e in st.exprs:
            check_expr_vars(e, bound, st)
        if st.guard is not None:
            check_expr_vars(st.guard, bound, st)

    def check_expr_vars(e: Expr, bound: frozenset, st):
        for sub in walk_expr(e):
            if isinstance(sub, Var):
                n = sub.name
                if (n not in decl and n not in aliases and n not in prog.params
                        and n not in bound and n not in _IMPLICIT_VARS):
                    raise ParseError(f"undeclared variable '{n}'", sub.pos)

    for blk in prog.blocks:
        for st in blk.statements:
            check_stmt(st, frozenset())
    for st in prog.reactive:
        check_stmt(st, frozenset())
    for name, e in list(prog.always) + list(prog.initially):
        for sub in walk_expr(e):
            if isinstance(sub, Var):
                n = sub.name
                if (n not in decl and n not in aliases and n not in prog.params
                        and n not in _IMPLICIT_VARS):
                    raise ParseError(f"undeclared variable '{n}'", sub.pos)


def _target_root(e: Expr) -> Expr:
    while True:
        if isinstance(e, (Index, FieldAcc)):
            e = e.obj
        elif isinstance(e, Call) and e.name in ("head", "at"):
            e = e.args[0]
        else:
            return e


def _stmt_pos(st: Statement) -> Pos:
    return getattr(st, "pos", Pos(0, 0))


# --- qualified-name resolution ------------------------------------------------

def _resolve_system(sysdef: SystemDef):
    """Rewrite Call(program, args) / FieldAcc(Call(...)) nodes inside
    interaction statements, inhibition predicates and property expressions
    into InstanceRef / QualifiedVar, then run cross-reference checks."""
    prog_names = {p.name for p in sysdef.programs}
    for c in sysdef.components:
        if c.program not in prog_names:
            raise ParseError(f"component references undefined program "
                             f"'{c.program}'", c.pos)
        prog = sysdef.program(c.program)
        if len(c.args) != len(prog.params):
            raise ParseError(
                f"component {c.program}{c.args} supplies {len(c.args)} "
                f"argument(s); program has {len(prog.params)} parameter(s)", c.pos)

    def resolve(e: Expr) -> Expr:
        return resolve_expr(e, prog_names)

    new_inter = tuple(_resolve_stmt(st, resolve) for st in sysdef.interactions)
    new_inhib = tuple(_resolve_inhib(ih, resolve) for ih in sysdef.inhibitions)
    object.__setattr__(sysdef, "interactions", new_inter)
    object.__setattr__(sysdef, "inhibitions", new_inhib)

    # inhibition targets must exist
    label_owner = {}
    for p in sysdef.programs:
        for blk in p.blocks:
            for st in blk.statements:
                for lab in statement_labels(st):
                    label_owner[(p.name, lab)] = p.name
        for st in p.reactive:
            for lab in statement_labels(st):
                label_owner[(p.name, lab)] = p.name
    inter_labels = set()
    for st in sysdef.interactions:
        for lab in statement_labels(st):
            inter_labels.add(lab)

    def check_target(ih: Inhibition):
        if ih.target_instance is not None:
            prog = ih.target_instance.program
            if prog not in prog_names:
                raise ParseError(f"inhibition targets unknown program '{prog}'",
                                 ih.pos)
            if (prog, ih.target_label) not in label_owner:
                raise ParseError(f"inhibition targets unknown label "
                                 f"'{prog}.{ih.target_label}'", ih.pos)
        else:
            if ih.target_label not in inter_labels:
                raise ParseError(f"inhibition targets unknown interaction label "
                                 f"'{ih.target_label}'", ih.pos)

    for ih in sysdef.inhibitions:
        if isinstance(ih, QuantifiedInhibition):
            for sub in ih.body:
                check_target(sub)
        else:
            check_target(ih)


def resolve_expr(e: Expr, prog_names: set) -> Expr:
    """Recursively convert program-name calls into instance references."""
    if isinstance(e, FieldAcc):
        obj = resolve_expr(e.obj, prog_names)
        if isinstance(obj, InstanceRef):
            return QualifiedVar(obj, e.name, pos=e.pos)
        return FieldAcc(obj, e.name, pos=e.pos)
    if isinstance(e, Call):
        if e.name in prog_names:
            return InstanceRef(e.name,
                               tuple(resolve_expr(a, prog_names) for a in e.args),
                               pos=e.pos)
        return Call(e.name, tuple(resolve_expr(a, prog_names) for a in e.args),
                    pos=e.pos)
    if isinstance(e, Unary):
        return Unary(e.op, resolve_expr(e.operand, prog_names), pos=e.pos)
    if isinstance(e, Binary):
        return Binary(e.op, resolve_expr(e.left, prog_names),
                      resolve_expr(e.right, prog_names), pos=e.pos)
    if isinstance(e, Index):
        return Index(resolve_expr(e.obj, prog_names),
                     resolve_expr(e.index, prog_names), pos=e.pos)
    if isinstance(e, SeqLit):
        return SeqLit(tuple(resolve_expr(a, prog_names) for a in e.items), pos=e.pos)
    if isinstance(e, RecLit):
        return RecLit(tuple((k, resolve_expr(v, prog_names)) for k, v in e.fields),
                      pos=e.pos)
    return e


def _resolve_stmt(st: Statement, resolve) -> Statement:
    if isinstance(st, Assign):
        return Assign(st.label, tuple(resolve(t) for t in st.targets),
                      tuple(resolve(e) for e in st.exprs),
                      resolve(st.guard) if st.guard is not None else None,
                      st.reactive, pos=st.pos)
    if isinstance(st, Transaction):
        return Transaction(st.label,
                           tuple(_resolve_stmt(s, resolve) for s in st.subs),
                           resolve(st.guard) if st.guard is not None else None,
                           pos=st.pos)
    if isinstance(st, Quantified):
        binders = tuple(Binder(b.var, resolve(b.lo), resolve(b.hi))
                        for b in st.binders)
        return Quantified(binders,
                          tuple(_resolve_stmt(s, resolve) for s in st.body),
                          pos=st.pos)
    return st


def _resolve_inhib(ih, resolve):
    if isinstance(ih, QuantifiedInhibition):
        binders = tuple(Binder(b.var, resolve(b.lo), resolve(b.hi))
                        for b in ih.binders)
        return QuantifiedInhibition(
            binders, tuple(_resolve_inhib(s, resolve) for s in ih.body), pos=ih.pos)
    inst = ih.target_instance
    if inst is not None:
        inst = InstanceRef(inst.program, tuple(resolve(a) for a in inst.args),
                           pos=inst.pos)
    return Inhibition(inst, ih.target_label, resolve(ih.pred), pos=ih.pos)


# --- public API -----------------------------------------------------------------

def parse_program(text: str) -> ProgramDef:
    p = Parser(text)
    prog = p.parse_program()
    p.expect("eof")
    return prog


def parse_system(text: str) -> SystemDef:
    p = Parser(text)
    node = p.parse_file()
    p.expect("eof")
    if isinstance(node, ProgramDef):
        # a bare program runs as a single-component system
        args = tuple(0 for _ in node.params)
        return SystemDef(node.name, (node,),
                         (Component(node.name, args, None),), (), ())
    return node


def parse_expression(text: str, prog_names: Optional[set] = None) -> Expr:
    p = Parser(text)
    e = p.parse_expr()
    p.expect("eof")
    if prog_names:
        e = resolve_expr(e, prog_names)
    return e
