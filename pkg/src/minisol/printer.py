"""Pretty-printer for MiniSol ASTs.

print_unit(parse_source(s)) reparses to a structurally identical unit; the
same expression renderer backs canonical spec text and generated sources, so
its output is deterministic.
"""
from __future__ import annotations

from .nodes import (
    AssignStmt, BalanceExpr, BinaryExpr, Block, BoolLit, CallExpr,
    CallValueExpr, CastExpr, CheckedSubExpr, ContractUnit, DelegatecallExpr,
    EmitStmt, EventDecl, Expr, ExprStmt, ForStmt, FunctionDecl, Ident, IfStmt,
    IndexExpr, LengthExpr, MaxUintExpr, MsgSender, MsgValue, NewArrayExpr,
    NumberLit, OldExpr, QuantExpr, RequireStmt, ReturnStmt, SendExpr, Stmt,
    StringLit, SumExpr, ThisExpr, TupleAssignStmt, TypeExpr, UnaryExpr,
    VarDecl, VarDeclStmt,
)

INDENT = "    "

_BIN_PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6,
}
_UNARY_PREC = 7
_POSTFIX_PREC = 8


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def print_expr(expr: Expr) -> str:
    return _expr(expr, 0)


def _expr(expr: Expr, parent_prec: int, right: bool = False) -> str:
    if isinstance(expr, NumberLit):
        return str(expr.value)
    if isinstance(expr, MaxUintExpr):
        return "uint(-1)"
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, StringLit):
        return f'"{_escape(expr.value)}"'
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, ThisExpr):
        return "this"
    if isinstance(expr, MsgSender):
        return "msg.sender"
    if isinstance(expr, MsgValue):
        return "msg.value"
    if isinstance(expr, CastExpr):
        kind = expr.target.kind
        return f"{kind}({_expr(expr.operand, 0)})"
    if isinstance(expr, BalanceExpr):
        return f"{_expr(expr.operand, _POSTFIX_PREC)}.balance"
    if isinstance(expr, LengthExpr):
        return f"{_expr(expr.operand, _POSTFIX_PREC)}.length"
    if isinstance(expr, IndexExpr):
        return f"{_expr(expr.base, _POSTFIX_PREC)}[{_expr(expr.index, 0)}]"
    if isinstance(expr, SendExpr):
        return f"{_expr(expr.to, _POSTFIX_PREC)}.send({_expr(expr.amount, 0)})"
    if isinstance(expr, CheckedSubExpr):
        return f"{_expr(expr.base, _POSTFIX_PREC)}.sub({_expr(expr.arg, 0)})"
    if isinstance(expr, CallValueExpr):
        payload = ", ".join([f'"{_escape(expr.sig)}"'] + [_expr(a, 0) for a in expr.args])
        return (f"{_expr(expr.target, _POSTFIX_PREC)}.call.value"
                f"({_expr(expr.amount, 0)})({payload})")
    if isinstance(expr, DelegatecallExpr):
        payload = ", ".join([f'"{_escape(expr.sig)}"'] + [_expr(a, 0) for a in expr.args])
        return f"{_expr(expr.target, _POSTFIX_PREC)}.delegatecall({payload})"
    if isinstance(expr, NewArrayExpr):
        return f"new {expr.elem.render()}[]({_expr(expr.length, 0)})"
    if isinstance(expr, CallExpr):
        return f"{expr.name}({', '.join(_expr(a, 0) for a in expr.args)})"
    if isinstance(expr, OldExpr):
        return f"__verifier_old_{expr.kind}({_expr(expr.operand, 0)})"
    if isinstance(expr, SumExpr):
        return f"__verifier_sum_uint({expr.mapping})"
    if isinstance(expr, QuantExpr):
        text = f"{expr.quant} ({expr.var_ty.render()} {expr.var}) {_expr(expr.body, 0)}"
        return f"({text})" if parent_prec > 0 else text
    if isinstance(expr, UnaryExpr):
        inner = _expr(expr.operand, _UNARY_PREC)
        text = f"{expr.op}{inner}"
        return f"({text})" if parent_prec > _UNARY_PREC else text
    if isinstance(expr, BinaryExpr):
        prec = _BIN_PREC[expr.op]
        left = _expr(expr.left, prec, right=False)
        rhs = _expr(expr.right, prec + 1, right=True)
        text = f"{left} {expr.op} {rhs}"
        needs = prec < parent_prec
        return f"({text})" if needs else text
    raise ValueError(f"cannot print {type(expr).__name__}")


# ---------------------------------------------------------------------------
# Statements

def _stmt_inline(stmt: Stmt) -> str:
    """Statement text without trailing semicolon (for for-headers)."""
    if isinstance(stmt, VarDeclStmt):
        text = f"{stmt.ty.render()} {stmt.name}"
        if stmt.init is not None:
            text += f" = {print_expr(stmt.init)}"
        return text
    if isinstance(stmt, AssignStmt):
        return f"{print_expr(stmt.target)} {stmt.op} {print_expr(stmt.value)}"
    raise ValueError(f"cannot inline {type(stmt).__name__}")


def _tuple_pattern(targets: list[str | None]) -> str:
    out = "("
    for i, t in enumerate(targets):
        if i:
            out += "," if t is None else ", "
        if t is not None:
            out += t
    return out + ")"


def _stmt(stmt: Stmt, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    if isinstance(stmt, VarDeclStmt) or isinstance(stmt, AssignStmt):
        out.append(f"{pad}{_stmt_inline(stmt)};")
    elif isinstance(stmt, TupleAssignStmt):
        out.append(f"{pad}{_tuple_pattern(stmt.targets)} = {print_expr(stmt.value)};")
    elif isinstance(stmt, IfStmt):
        out.append(f"{pad}if ({print_expr(stmt.cond)}) {{")
        for s in stmt.then.stmts:
            _stmt(s, depth + 1, out)
        if stmt.otherwise is not None:
            out.append(f"{pad}}} else {{")
            for s in stmt.otherwise.stmts:
                _stmt(s, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, ForStmt):
        init = _stmt_inline(stmt.init) if stmt.init is not None else ""
        cond = print_expr(stmt.cond) if stmt.cond is not None else ""
        update = _stmt_inline(stmt.update) if stmt.update is not None else ""
        out.append(f"{pad}for ({init}; {cond}; {update}) {{")
        for s in stmt.body.stmts:
            _stmt(s, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, RequireStmt):
        if stmt.message is not None:
            out.append(f'{pad}require({print_expr(stmt.cond)}, "{_escape(stmt.message)}");')
        else:
            out.append(f"{pad}require({print_expr(stmt.cond)});")
    elif isinstance(stmt, EmitStmt):
        args = ", ".join(print_expr(a) for a in stmt.args)
        out.append(f"{pad}emit {stmt.event}({args});")
    elif isinstance(stmt, ReturnStmt):
        if stmt.value is None:
            out.append(f"{pad}return;")
        else:
            out.append(f"{pad}return {print_expr(stmt.value)};")
    elif isinstance(stmt, ExprStmt):
        out.append(f"{pad}{print_expr(stmt.expr)};")
    elif isinstance(stmt, Block):
        out.append(f"{pad}{{")
        for s in stmt.stmts:
            _stmt(s, depth + 1, out)
        out.append(f"{pad}}}")
    else:
        raise ValueError(f"cannot print {type(stmt).__name__}")


# ---------------------------------------------------------------------------
# Declarations

def _param(p) -> str:
    parts = [p.ty.render()]
    if p.indexed:
        parts.append("indexed")
    if p.location:
        parts.append(p.location)
    if p.name:
        parts.append(p.name)
    return " ".join(parts)


def print_function_header(fn: FunctionDecl) -> str:
    params = ", ".join(_param(p) for p in fn.params)
    if fn.is_constructor:
        head = f"constructor({params})"
    elif fn.is_fallback:
        head = f"function({params})"
    else:
        head = f"function {fn.name}({params})"
    parts = [head, fn.visibility]
    if fn.payable:
        parts.append("payable")
    if fn.view:
        parts.append("view")
    if fn.returns:
        rets = ", ".join(_param(r) for r in fn.returns)
        parts.append(f"returns ({rets})")
    return " ".join(parts)


def _docs(docs, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    for doc in docs:
        for i, line in enumerate(doc.raw.splitlines()):
            line = line.strip()
            if i and line.startswith("*"):
                line = " " + line
            out.append(f"{pad}{line}")


def print_var(v: VarDecl) -> str:
    vis = "" if v.visibility == "internal" else f" {v.visibility}"
    return f"{v.ty.render()}{vis} {v.name};"


def print_event(e: EventDecl) -> str:
    params = ", ".join(_param(p) for p in e.params)
    return f"event {e.name}({params});"


def print_unit(unit: ContractUnit) -> str:
    out: list[str] = []
    _docs(unit.docs, 0, out)
    out.append(f"contract {unit.name} {{")
    for v in unit.vars:
        out.append(f"{INDENT}{print_var(v)}")
    if unit.vars and (unit.events or any(not f.implicit for f in unit.functions)):
        out.append("")
    for e in unit.events:
        out.append(f"{INDENT}{print_event(e)}")
    if unit.events and any(not f.implicit for f in unit.functions):
        out.append("")
    first = True
    for fn in unit.functions:
        if fn.implicit:
            continue
        if not first:
            out.append("")
        first = False
        _docs(fn.docs, 1, out)
        header = f"{INDENT}{print_function_header(fn)}"
        if fn.body is None:
            out.append(f"{header};")
        else:
            out.append(f"{header} {{")
            for s in fn.body.stmts:
                _stmt(s, 2, out)
            out.append(f"{INDENT}}}")
    out.append("}")
    return "\n".join(out) + "\n"
