"""Behavioral contract model: doc-comment annotations, canonical text, spec ids.

A contract's behavioral spec lives in `/// @notice ...` annotations: invariants
on the contract, postconditions and expected events on functions.  This module
extracts those into a ContractSpec, canonicalizes the whole thing into a stable
text form, and derives the spec id as the SHA-256 of that text.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .frontend import canonical_signature, parse_spec_expression
from .nodes import (
    CallExpr,
    CallValueExpr,
    ContractUnit,
    DelegatecallExpr,
    DocComment,
    Expr,
    FunctionDecl,
    MsgSender,
    MsgValue,
    NewArrayExpr,
    OldExpr,
    SendExpr,
)

_EFFECTFUL = (CallExpr, CallValueExpr, DelegatecallExpr, SendExpr, NewArrayExpr)
from .parser import ParseError
from .printer import print_expr
from .tokens import LexError
from .typecheck import Checker, Scope, TypeCheckError

ZERO_DIGEST = "0" * 64

_ANNOT_RE = re.compile(r"@notice\s+(\S+)\s*(.*)$")


class SpecError(Exception):
    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class SpecSyntaxError(SpecError):
    """Annotation line that does not parse."""


class SpecScopeError(SpecError):
    """Annotation expression that refers to names not visible at its site."""


class SpecPlacementError(SpecError):
    """Annotation attached to a site where its kind is not allowed."""


@dataclass(frozen=True)
class Obligation:
    kind: str            # "invariant" | "postcondition"
    text: str            # canonical expression text
    expr: Expr = field(compare=False, repr=False, default=None)
    site: str = ""       # "ContractName invariant 0" or "sig postcondition 2"


@dataclass
class FunctionSpec:
    signature: str
    decl: FunctionDecl
    postconditions: list[Obligation] = field(default_factory=list)
    emits: list[str] = field(default_factory=list)


@dataclass
class ContractSpec:
    name: str
    unit: ContractUnit
    invariants: list[Obligation] = field(default_factory=list)
    functions: dict[str, FunctionSpec] = field(default_factory=dict)
    canonical_text: str = ""
    spec_id: str = ""

    def function_spec(self, signature: str) -> FunctionSpec | None:
        return self.functions.get(signature)


def _annotations(docs: list[DocComment]) -> list[tuple[str, str, str]]:
    """Yield (kind, payload, where) triples from a doc-comment run."""
    out = []
    for doc in docs:
        for line in doc.content_lines():
            stripped = line.strip()
            if "@notice" not in stripped:
                continue
            m = _ANNOT_RE.search(stripped)
            if not m:
                raise SpecSyntaxError("malformed @notice annotation", _doc_where(doc))
            kind, payload = m.group(1), m.group(2).strip()
            if kind not in ("invariant", "postcondition", "emits"):
                raise SpecSyntaxError(f"unknown annotation kind {kind!r}", _doc_where(doc))
            if not payload:
                raise SpecSyntaxError(f"{kind} annotation has no expression", _doc_where(doc))
            out.append((kind, payload, _doc_where(doc)))
    return out


def _doc_where(doc: DocComment) -> str:
    return f"line {doc.loc.line}"


def _parse_expr(payload: str, where: str) -> Expr:
    try:
        return parse_spec_expression(payload)
    except (ParseError, LexError) as exc:
        raise SpecSyntaxError(f"cannot parse spec expression: {exc}", where) from exc


def _walk(expr) -> list:
    """All sub-expressions of a spec expression, including itself."""
    seen = []
    stack = [expr]
    while stack:
        node = stack.pop()
        if not isinstance(node, Expr):
            continue
        seen.append(node)
        for name in getattr(node, "__dataclass_fields__", {}):
            value = getattr(node, name)
            if isinstance(value, Expr):
                stack.append(value)
            elif isinstance(value, list):
                stack.extend(v for v in value if isinstance(v, Expr))
    return seen


class _SpecChecker:
    """Types spec expressions against the spec unit's storage/params/returns."""

    def __init__(self, unit: ContractUnit):
        self.unit = unit
        self.storage = Scope()
        for var in unit.vars:
            self.storage.declare(var.name, var.ty)

    def check(self, expr: Expr, fn: FunctionDecl | None, where: str) -> None:
        scope = Scope(self.storage)
        if fn is not None:
            for p in fn.params:
                scope.declare(p.name, p.ty)
            for r in fn.returns:
                if r.name:
                    scope.declare(r.name, r.ty)
        checker = Checker(self.unit)
        ty = checker.check_expr(expr, scope)
        if checker.errors:
            raise SpecScopeError("; ".join(checker.errors), where)
        if ty is None or ty.kind != "bool":
            got = ty.render() if ty is not None else "nothing"
            raise SpecScopeError(f"spec expression must be bool, got {got}", where)


def _forbid(expr: Expr, kinds: tuple, what: str, where: str) -> None:
    for node in _walk(expr):
        if isinstance(node, kinds):
            raise SpecScopeError(f"{type(node).__name__} is not allowed in {what}", where)


def build_spec(unit: ContractUnit) -> ContractSpec:
    """Extract the behavioral spec carried by a contract's annotations.

    Works on any type-checked unit: a signatures-only spec file, or a full
    implementation that carries annotations (a merged contract does).
    """
    checker = _SpecChecker(unit)
    spec = ContractSpec(name=unit.name, unit=unit)

    for kind, payload, where in _annotations(unit.docs):
        if kind != "invariant":
            raise SpecPlacementError(f"{kind} annotation is not allowed on a contract", where)
        expr = _parse_expr(payload, where)
        _forbid(expr, _EFFECTFUL + (OldExpr, MsgSender, MsgValue), "an invariant", where)
        checker.check(expr, None, where)
        text = print_expr(expr)
        site = f"{unit.name} invariant {len(spec.invariants)}"
        spec.invariants.append(Obligation("invariant", text, expr, site))

    if unit.orphan_docs and _annotations(unit.orphan_docs):
        raise SpecPlacementError(
            "annotation is not attached to a contract or function",
            _doc_where(unit.orphan_docs[0]),
        )

    for fn in unit.functions:
        if not (fn.is_public or fn.is_constructor or fn.is_fallback):
            # Internal helpers are implementation detail: they never form a
            # call frame at the contract boundary, so obligations on them
            # could never be checked — reject rather than silently ignore.
            if _annotations(fn.docs):
                raise SpecPlacementError(
                    "annotations on internal functions are never checked",
                    _doc_where(fn.docs[0]))
            continue
        sig = canonical_signature(fn)
        fspec = FunctionSpec(signature=sig, decl=fn)
        for kind, payload, where in _annotations(fn.docs):
            if kind == "invariant":
                raise SpecPlacementError("invariant annotation is not allowed on a function", where)
            if kind == "emits":
                if unit.event(payload) is None:
                    raise SpecScopeError(f"emits names undeclared event {payload!r}", where)
                fspec.emits.append(payload)
                continue
            expr = _parse_expr(payload, where)
            _forbid(expr, _EFFECTFUL, "a postcondition", where)
            checker.check(expr, fn, where)
            text = print_expr(expr)
            site = f"{sig} postcondition {len(fspec.postconditions)}"
            fspec.postconditions.append(Obligation("postcondition", text, expr, site))
        spec.functions[sig] = fspec

    spec.canonical_text = canonical_spec_text(spec)
    spec.spec_id = spec_id_of(spec.canonical_text)
    return spec


def _canonical_header(fn: FunctionDecl) -> str:
    params = ", ".join(f"{p.ty.render()} {p.name}".rstrip() for p in fn.params)
    if fn.is_constructor:
        head = f"constructor({params})"
    elif fn.is_fallback:
        head = "function()"
    else:
        head = f"function {fn.name}({params})"
    if fn.payable:
        head += " payable"
    if fn.returns:
        rets = ", ".join(f"{r.ty.render()} {r.name}".rstrip() for r in fn.returns)
        head += f" returns ({rets})"
    return head


def canonical_spec_text(spec: ContractSpec) -> str:
    """Stable text form of a spec; the spec id is the SHA-256 of this.

    Storage variables keep declaration order (layout is semantic).  Events and
    functions are sorted so cosmetic reordering does not change the id.
    Obligations keep declaration order (finding sites index into it).
    """
    lines = [f"contract {spec.name}"]
    for inv in spec.invariants:
        lines.append(f"invariant {inv.text}")
    for var in spec.unit.vars:
        lines.append(f"var {var.name} {var.ty.render()}")
    for event in sorted(spec.unit.events, key=lambda e: e.name):
        params = ",".join(p.ty.render().replace(" ", "") for p in event.params)
        lines.append(f"event {event.name}({params})")
    for sig in sorted(spec.functions):
        fspec = spec.functions[sig]
        lines.append(_canonical_header(fspec.decl))
        for ob in fspec.postconditions:
            lines.append(f"  postcondition {ob.text}")
        for name in fspec.emits:
            lines.append(f"  emits {name}")
    return "\n".join(lines) + "\n"


def spec_id_of(canonical_text: str) -> str:
    digest = hashlib.sha256(canonical_text.encode("utf-8")).hexdigest()
    if digest == ZERO_DIGEST:
        raise SpecError("spec id collides with the reserved zero digest")
    return digest


def spec_from_source(source: str, origin: str = "<spec>"):
    """Parse + typecheck + extract in one step."""
    from .frontend import parse_unit

    return build_spec(parse_unit(source, origin=origin))
