"""AST for MiniSol contracts and for specification expressions.

Dataclass nodes, structural equality. Source locations and resolved types are
carried on the nodes but excluded from comparison so a pretty-print/reparse
round trip compares equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

MAX_UINT = 2**256 - 1


@dataclass(frozen=True)
class Loc:
    line: int = 0
    col: int = 0


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class TypeExpr:
    """Structural type. kind is one of: uint256, bool, address, bytes32,
    bytes, string, mapping, array. `uint` is normalized to uint256 at parse
    time so comparisons never see the short spelling."""
    kind: str
    key: Optional["TypeExpr"] = None    # mapping key (elementary)
    value: Optional["TypeExpr"] = None  # mapping value
    elem: Optional["TypeExpr"] = None   # array element

    def render(self) -> str:
        if self.kind == "mapping":
            return f"mapping ({self.key.render()} => {self.value.render()})"
        if self.kind == "array":
            return f"{self.elem.render()}[]"
        return self.kind

    @property
    def is_elementary(self) -> bool:
        return self.kind not in ("mapping", "array")


T_UINT = TypeExpr("uint256")
T_BOOL = TypeExpr("bool")
T_ADDRESS = TypeExpr("address")
T_BYTES32 = TypeExpr("bytes32")
T_BYTES = TypeExpr("bytes")
T_STRING = TypeExpr("string")


def zero_value(ty: TypeExpr):
    """Default (all-zero) value of a storage slot of this type."""
    if ty.kind == "bool":
        return False
    if ty.kind == "mapping":
        return {}
    if ty.kind == "array":
        return []
    if ty.kind in ("bytes", "string"):
        return b"" if ty.kind == "bytes" else ""
    return 0


# ---------------------------------------------------------------------------
# Expressions

@dataclass
class Expr:
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)
    ty: Optional[TypeExpr] = field(default=None, compare=False, repr=False)


@dataclass
class NumberLit(Expr):
    value: int = 0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class StringLit(Expr):
    value: str = ""


@dataclass
class MaxUintExpr(Expr):
    """uint(-1), i.e. 2**256 - 1. Kept as its own node so it prints back."""


@dataclass
class Ident(Expr):
    name: str = ""


@dataclass
class ThisExpr(Expr):
    """Bare `this`; only legal under an address(...) cast."""


@dataclass
class MsgSender(Expr):
    pass


@dataclass
class MsgValue(Expr):
    pass


@dataclass
class CastExpr(Expr):
    """address(x) / uint256(x) / bytes32(x). target is the result type."""
    target: TypeExpr = T_UINT
    operand: Expr = None


@dataclass
class BalanceExpr(Expr):
    """addr.balance"""
    operand: Expr = None


@dataclass
class LengthExpr(Expr):
    """arr.length / b.length"""
    operand: Expr = None


@dataclass
class IndexExpr(Expr):
    base: Expr = None
    index: Expr = None


@dataclass
class BinaryExpr(Expr):
    op: str = ""
    left: Expr = None
    right: Expr = None


@dataclass
class UnaryExpr(Expr):
    op: str = ""
    operand: Expr = None


@dataclass
class CallExpr(Expr):
    """Internal (same-contract) function call."""
    name: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class SendExpr(Expr):
    """to.send(amount) -> bool. Pure transfer; runs no code."""
    to: Expr = None
    amount: Expr = None


@dataclass
class CallValueExpr(Expr):
    """target.call.value(amount)(sig, args...) -> (bool, rets...).
    sig "" invokes the fallback."""
    target: Expr = None
    amount: Expr = None
    sig: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class DelegatecallExpr(Expr):
    """target.delegatecall(sig, args...) -> (bool, rets...)."""
    target: Expr = None
    sig: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class CheckedSubExpr(Expr):
    """a.sub(b): subtraction that reverts on underflow."""
    base: Expr = None
    arg: Expr = None


@dataclass
class NewArrayExpr(Expr):
    """new T[](length)"""
    elem: TypeExpr = T_UINT
    length: Expr = None


# --- spec-only expressions -------------------------------------------------

@dataclass
class OldExpr(Expr):
    """__verifier_old_uint(e) / __verifier_old_bool(e): e in the pre-state."""
    kind: str = "uint"  # uint | bool
    operand: Expr = None


@dataclass
class SumExpr(Expr):
    """__verifier_sum_uint(m): exact sum of mapping m over tracked keys."""
    mapping: str = ""


@dataclass
class QuantExpr(Expr):
    """forall (T x) body / exists (T x) body."""
    quant: str = "forall"
    var_ty: TypeExpr = T_ADDRESS
    var: str = ""
    body: Expr = None


# ---------------------------------------------------------------------------
# Statements

@dataclass
class Stmt:
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)


@dataclass
class Block(Stmt):
    stmts: list[Stmt] = field(default_factory=list)


@dataclass
class VarDeclStmt(Stmt):
    ty: TypeExpr = T_UINT
    name: str = ""
    init: Optional[Expr] = None


@dataclass
class AssignStmt(Stmt):
    target: Expr = None          # Ident or IndexExpr chain
    op: str = "="                # =, +=, -=
    value: Expr = None


@dataclass
class TupleAssignStmt(Stmt):
    """(a, b) = call-like expr; empty slots allowed: (ok,) discards extras."""
    targets: list[Optional[str]] = field(default_factory=list)
    value: Expr = None


@dataclass
class IfStmt(Stmt):
    cond: Expr = None
    then: Block = None
    otherwise: Optional[Block] = None


@dataclass
class ForStmt(Stmt):
    init: Optional[Stmt] = None   # VarDeclStmt or AssignStmt
    cond: Optional[Expr] = None
    update: Optional[Stmt] = None  # AssignStmt
    body: Block = None


@dataclass
class RequireStmt(Stmt):
    cond: Expr = None
    message: Optional[str] = None


@dataclass
class EmitStmt(Stmt):
    event: str = ""
    args: list[Expr] = field(default_factory=list)


@dataclass
class ReturnStmt(Stmt):
    value: Optional[Expr] = None


@dataclass
class ExprStmt(Stmt):
    expr: Expr = None


# ---------------------------------------------------------------------------
# Declarations

@dataclass
class DocComment:
    raw: str = ""
    loc: Loc = field(default_factory=Loc, compare=False)

    def content_lines(self) -> list[str]:
        """Annotation payload lines with comment furniture stripped."""
        text = self.raw
        if text.startswith("/**"):
            text = text[3:]
            if text.endswith("*/"):
                text = text[:-2]
            out = []
            for ln in text.splitlines():
                ln = ln.strip()
                if ln.startswith("*"):
                    ln = ln[1:].strip()
                if ln:
                    out.append(ln)
            return out
        out = []
        for ln in text.splitlines():
            ln = ln.strip()
            if ln.startswith("///"):
                ln = ln[3:].strip()
            if ln:
                out.append(ln)
        return out


@dataclass
class Param:
    name: str = ""
    ty: TypeExpr = T_UINT
    location: Optional[str] = None  # memory | calldata
    indexed: bool = False           # event params only
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)


@dataclass
class VarDecl:
    name: str = ""
    ty: TypeExpr = T_UINT
    visibility: str = "internal"
    ordinal: int = 0
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)


@dataclass
class EventDecl:
    name: str = ""
    params: list[Param] = field(default_factory=list)
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)


@dataclass
class FunctionDecl:
    name: str = ""                     # "" for fallback
    params: list[Param] = field(default_factory=list)
    returns: list[Param] = field(default_factory=list)  # names optional
    visibility: str = "public"
    payable: bool = False
    view: bool = False
    is_constructor: bool = False
    is_fallback: bool = False
    implicit: bool = False             # synthesized constructor
    body: Optional[Block] = None       # None in spec files
    docs: list[DocComment] = field(default_factory=list, compare=False)
    loc: Loc = field(default_factory=Loc, compare=False, repr=False)

    @property
    def is_public(self) -> bool:
        return self.visibility in ("public", "external")


@dataclass
class ContractUnit:
    name: str = ""
    vars: list[VarDecl] = field(default_factory=list)
    functions: list[FunctionDecl] = field(default_factory=list)
    events: list[EventDecl] = field(default_factory=list)
    docs: list[DocComment] = field(default_factory=list, compare=False)
    orphan_docs: list[DocComment] = field(default_factory=list, compare=False)
    origin: str = field(default="<string>", compare=False)
    source_text: str = field(default="", compare=False, repr=False)

    def function(self, name: str) -> Optional[FunctionDecl]:
        for f in self.functions:
            if f.name == name and not f.is_constructor:
                return f
        return None

    @property
    def constructor(self) -> Optional[FunctionDecl]:
        for f in self.functions:
            if f.is_constructor:
                return f
        return None

    @property
    def fallback(self) -> Optional[FunctionDecl]:
        for f in self.functions:
            if f.is_fallback:
                return f
        return None

    def event(self, name: str) -> Optional[EventDecl]:
        for e in self.events:
            if e.name == name:
                return e
        return None

    def var(self, name: str) -> Optional[VarDecl]:
        for v in self.vars:
            if v.name == name:
                return v
        return None


SpecExprNode = Union[OldExpr, SumExpr, QuantExpr]
