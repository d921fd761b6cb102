"""Frontend entry points: source text in, resolved ContractUnit out.

parse_unit lexes, parses, synthesizes the implicit constructor when a
contract declares none, and type-checks. Contracts in spec files (bodiless
functions) skip body checking naturally since there are no bodies to check.
"""
from __future__ import annotations

import dataclasses
from typing import Any

from .nodes import Block, ContractUnit, FunctionDecl, Loc, TypeExpr
from .parser import ParseError, Parser, parse_spec_expression  # noqa: F401 (re-export)
from .tokens import LexError, tokenize  # noqa: F401 (re-export)
from .typecheck import TypeCheckError, check_unit  # noqa: F401 (re-export)


def parse_unit(source: str, origin: str = "<string>") -> ContractUnit:
    """Parse and resolve one contract. Raises LexError, ParseError or
    TypeCheckError; locations refer to `origin`."""
    unit = Parser(tokenize(source)).parse_unit(origin)
    unit.source_text = source
    if unit.constructor is None:
        has_bodies = any(f.body is not None for f in unit.functions)
        bodiless_unit = unit.functions and not has_bodies
        unit.functions.insert(0, FunctionDecl(
            is_constructor=True, visibility="public", implicit=True,
            body=None if bodiless_unit else Block(stmts=[]),
        ))
    check_unit(unit)
    return unit


def canonical_signature(fn: FunctionDecl) -> str:
    """name(type1,type2,...) with normalized types; data location is not part
    of the signature. Constructors canonicalize as constructor(...), the
    fallback as ()."""
    types = ",".join(p.ty.render().replace(" ", "") for p in fn.params)
    if fn.is_constructor:
        return f"constructor({types})"
    if fn.is_fallback:
        return "()"
    return f"{fn.name}({types})"


# ---------------------------------------------------------------------------
# AST -> JSON (debugging surface for --dump-ast)

def _jsonify(value: Any) -> Any:
    if isinstance(value, TypeExpr):
        return value.render()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        node: dict[str, Any] = {"node": type(value).__name__}
        for f in dataclasses.fields(value):
            if f.name in ("loc", "ty"):
                continue
            node[f.name] = _jsonify(getattr(value, f.name))
        return node
    if isinstance(value, Loc):
        return [value.line, value.col]
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, int) and not isinstance(value, bool):
        return value if -(2**53) < value < 2**53 else str(value)
    return value


def ast_to_json(unit: ContractUnit) -> dict:
    return _jsonify(unit)
