"""Runtime value domain: booleans, integers, locations, addresses, symbols,
messages, sequences, records and the null value.

Values are immutable and compared structurally.  The null value doubles as
the empty sequence in comparisons and in the queue builtins, because system
specifications initialize queues to null and grow them by appending.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union


class EvalError(Exception):
    """Raised for runtime evaluation faults: unbound names, type mismatches,
    bad indices, arithmetic overflow."""


class _Bottom:
    """The null value.  A single shared instance exists."""

    __slots__ = ()

    def __repr__(self):
        return "null"


BOTTOM = _Bottom()

# Arithmetic is fixed-width: 64-bit signed, overflow raises.
INT_MAX = 2**63 - 1
INT_MIN = -(2**63)


@dataclass(frozen=True, slots=True)
class Sym:
    """Symbolic constant, written #NAME in source.  Message types and reply
    markers are symbols."""

    name: str

    def __repr__(self):
        return f"#{self.name}"


@dataclass(frozen=True, slots=True)
class Loc:
    """Named location literal, written @NAME in source.  The location
    variable itself may hold any value."""

    name: str

    def __repr__(self):
        return f"@{self.name}"


@dataclass(frozen=True, slots=True)
class Addr:
    """Address of a component instance.  `ordinal` is the instance's
    position in system declaration order and is what index_of exposes."""

    program: str
    args: Tuple[int, ...]
    ordinal: int

    def __repr__(self):
        inner = ",".join(str(a) for a in self.args)
        return f"{self.program}({inner})"


@dataclass(frozen=True, slots=True)
class Rec:
    """Record value with named fields, written rec(a = 1, b = 2)."""

    fields: Tuple[Tuple[str, "Value"], ...]  # sorted by field name

    @staticmethod
    def make(pairs) -> "Rec":
        return Rec(tuple(sorted(pairs, key=lambda kv: kv[0])))

    def get(self, name: str) -> "Value":
        for k, v in self.fields:
            if k == name:
                return v
        raise EvalError(f"record has no field '{name}'")

    def __repr__(self):
        inner = ", ".join(f"{k} = {v!r}" for k, v in self.fields)
        return f"rec({inner})"


@dataclass(frozen=True, slots=True)
class Msg:
    """Message record.  `reply` is None on requests, #Y or #N on responses.
    Freshly constructed messages carry status = False."""

    status: bool
    source: "Value"
    destination: "Value"
    mtype: Sym
    reply: Optional[Sym]
    content: "Value"

    def field(self, name: str) -> "Value":
        if name == "status":
            return self.status
        if name == "source":
            return self.source
        if name == "destination":
            return self.destination
        if name == "type":
            return self.mtype
        if name == "reply":
            return BOTTOM if self.reply is None else self.reply
        if name == "content":
            return self.content
        raise EvalError(f"message has no field '{name}'")

    def __repr__(self):
        rp = "none" if self.reply is None else repr(self.reply)
        return (f"msg({str(self.status).lower()}, {self.source!r}, "
                f"{self.destination!r}, {self.mtype!r}, {rp}, {self.content!r})")


Value = Union[bool, int, _Bottom, Sym, Loc, Addr, Rec, Msg, tuple]


def is_null(v: Value) -> bool:
    """Null test used by the language's `= null` comparison: the empty
    sequence counts as null."""
    return v is BOTTOM or (isinstance(v, tuple) and len(v) == 0)


def value_eq(a: Value, b: Value) -> bool:
    """Structural equality.  Distinguishes booleans from integers (Python
    would conflate True and 1) and identifies null with the empty sequence."""
    if is_null(a) or is_null(b):
        return is_null(a) and is_null(b)
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(value_eq(x, y) for x, y in zip(a, b))
    if isinstance(a, Msg) and isinstance(b, Msg):
        return (a.status == b.status and a.mtype == b.mtype and a.reply == b.reply
                and value_eq(a.source, b.source)
                and value_eq(a.destination, b.destination)
                and value_eq(a.content, b.content))
    if isinstance(a, Rec) and isinstance(b, Rec):
        if len(a.fields) != len(b.fields):
            return False
        return all(ka == kb and value_eq(va, vb)
                   for (ka, va), (kb, vb) in zip(a.fields, b.fields))
    if type(a) is type(b):
        return a == b
    return False


def check_int(v: int) -> int:
    if v > INT_MAX or v < INT_MIN:
        raise EvalError(f"integer overflow: {v}")
    return v


def canon(v: Value) -> str:
    """Canonical text form of a value.  Used for state digests; null and the
    empty sequence share the form 'null' so indistinguishable states merge."""
    if is_null(v):
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, tuple):
        return "[" + ",".join(canon(x) for x in v) + "]"
    if isinstance(v, (Sym, Loc, Addr)):
        return repr(v)
    if isinstance(v, Rec):
        return "rec{" + ",".join(f"{k}={canon(x)}" for k, x in v.fields) + "}"
    if isinstance(v, Msg):
        rp = "none" if v.reply is None else repr(v.reply)
        return (f"msg({'t' if v.status else 'f'},{canon(v.source)},"
                f"{canon(v.destination)},{v.mtype!r},{rp},{canon(v.content)})")
    raise EvalError(f"unknown value {v!r}")


def value_to_json(v: Value):
    """JSON-encodable form for trace files; single-letter tags keep lines
    compact and decoding unambiguous."""
    if v is BOTTOM:
        return None
    if isinstance(v, bool) or isinstance(v, int):
        return v
    if isinstance(v, tuple):
        return {"q": [value_to_json(x) for x in v]}
    if isinstance(v, Sym):
        return {"s": v.name}
    if isinstance(v, Loc):
        return {"l": v.name}
    if isinstance(v, Addr):
        return {"a": repr(v)}
    if isinstance(v, Rec):
        return {"r": {k: value_to_json(x) for k, x in v.fields}}
    if isinstance(v, Msg):
        return {"m": [v.status, value_to_json(v.source), value_to_json(v.destination),
                      v.mtype.name, v.reply.name if v.reply else None,
                      value_to_json(v.content)]}
    raise EvalError(f"unknown value {v!r}")


# --- sequence builtins ------------------------------------------------------

def as_seq(v: Value, what: str = "sequence") -> tuple:
    if v is BOTTOM:
        return ()
    if isinstance(v, tuple):
        return v
    raise EvalError(f"{what} expected, got {canon(v)}")


def seq_head(q: Value) -> Value:
    s = as_seq(q, "head: sequence")
    if not s:
        raise EvalError("head of empty/null sequence")
    return s[0]


def seq_tail(q: Value) -> tuple:
    s = as_seq(q, "tail: sequence")
    if not s:
        raise EvalError("tail of empty/null sequence")
    return s[1:]


def seq_append(q: Value, v: Value) -> tuple:
    return as_seq(q, "append: sequence") + (v,)


def seq_at(q: Value, i: Value) -> Value:
    s = as_seq(q, "at: sequence")
    if not isinstance(i, int) or isinstance(i, bool):
        raise EvalError("at: index must be an integer")
    if i < 0 or i >= len(s):
        raise EvalError(f"at: index {i} out of range (length {len(s)})")
    return s[i]


def seq_length(q: Value) -> int:
    return len(as_seq(q, "length: sequence"))


def seq_delete(q: Value, v: Value) -> tuple:
    """Remove exactly the first occurrence of v; unchanged when absent."""
    s = as_seq(q, "delete: sequence")
    for i, x in enumerate(s):
        if value_eq(x, v):
            return s[:i] + s[i + 1:]
    return s


def seq_member(v: Value, q: Value) -> bool:
    return any(value_eq(x, v) for x in as_seq(q, "member: sequence"))
