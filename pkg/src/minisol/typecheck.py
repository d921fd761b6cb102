"""Name resolution and type checking for MiniSol units.

Annotates every expression node with its resolved TypeExpr. Variables and
functions live in separate namespaces, so a contract may declare both a
`balanceOf` mapping and a `balanceOf(address)` accessor; identifiers resolve
to values, call targets resolve to functions.

Errors are collected per function and raised together as TypeCheckError.
"""
from __future__ import annotations

from .nodes import (
    AssignStmt, BalanceExpr, BinaryExpr, Block, BoolLit, CallExpr,
    CallValueExpr, CastExpr, CheckedSubExpr, ContractUnit, DelegatecallExpr,
    EmitStmt, Expr, ExprStmt, ForStmt, FunctionDecl, Ident, IfStmt, IndexExpr,
    LengthExpr, Loc, MaxUintExpr, MsgSender, MsgValue, NewArrayExpr,
    NumberLit, OldExpr, QuantExpr, RequireStmt, ReturnStmt, SendExpr, Stmt,
    StringLit, SumExpr, ThisExpr, TupleAssignStmt, TypeExpr, UnaryExpr,
    VarDeclStmt, T_ADDRESS, T_BOOL, T_BYTES32, T_STRING, T_UINT,
)

NUMERIC_KINDS = ("uint256", "address", "bytes32")


class TypeCheckError(Exception):
    """One or more resolution/typing failures; .errors holds all messages."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class Scope:
    def __init__(self, parent: "Scope | None" = None):
        self.parent = parent
        self.names: dict[str, TypeExpr] = {}

    def declare(self, name: str, ty: TypeExpr) -> bool:
        if name in self.names:
            return self.names[name] == ty  # re-declaration of the same binding
        self.names[name] = ty
        return True

    def lookup(self, name: str) -> TypeExpr | None:
        scope: Scope | None = self
        while scope is not None:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None


class Checker:
    def __init__(self, unit: ContractUnit):
        self.unit = unit
        self.errors: list[str] = []
        self.fn_returns: list[TypeExpr] = []

    def fail(self, loc: Loc, message: str) -> None:
        self.errors.append(f"{self.unit.origin}:{loc.line}:{loc.col}: {message}")

    # -- entry -------------------------------------------------------------

    def check_unit(self) -> None:
        seen_vars: set[str] = set()
        for v in self.unit.vars:
            if v.name in seen_vars:
                self.fail(v.loc, f"duplicate state variable {v.name!r}")
            seen_vars.add(v.name)
        seen_fns: set[str] = set()
        ctors = 0
        for f in self.unit.functions:
            if f.is_constructor:
                ctors += 1
                if ctors > 1:
                    self.fail(f.loc, "duplicate constructor")
                continue
            key = f.name if not f.is_fallback else "()"
            if key in seen_fns:
                self.fail(f.loc, f"duplicate function {f.name or 'fallback'!r}")
            seen_fns.add(key)
            if f.is_fallback and (f.params or f.returns):
                self.fail(f.loc, "fallback takes no parameters and returns nothing")
        seen_events: set[str] = set()
        for e in self.unit.events:
            if e.name in seen_events:
                self.fail(e.loc, f"duplicate event {e.name!r}")
            seen_events.add(e.name)
        for f in self.unit.functions:
            if f.body is not None:
                self.check_function(f)
        if self.errors:
            raise TypeCheckError(self.errors)

    def check_function(self, fn: FunctionDecl) -> None:
        scope = Scope()
        for v in self.unit.vars:
            scope.declare(v.name, v.ty)
        inner = Scope(scope)
        for p in fn.params:
            if not p.name:
                self.fail(p.loc, "function parameters must be named")
                continue
            if not inner.declare(p.name, p.ty):
                self.fail(p.loc, f"duplicate parameter {p.name!r}")
        for r in fn.returns:
            if r.name and not inner.declare(r.name, r.ty):
                self.fail(r.loc, f"return name {r.name!r} collides")
        self.fn_returns = [r.ty for r in fn.returns]
        self.check_block(fn.body, Scope(inner))

    # -- statements --------------------------------------------------------

    def check_block(self, block: Block, scope: Scope) -> None:
        for stmt in block.stmts:
            self.check_stmt(stmt, scope)

    def check_stmt(self, stmt: Stmt, scope: Scope) -> None:
        if isinstance(stmt, VarDeclStmt):
            if not scope.declare(stmt.name, stmt.ty):
                self.fail(stmt.loc, f"conflicting declaration of {stmt.name!r}")
            if stmt.init is not None:
                ty = self.check_expr(stmt.init, scope)
                self.require_assignable(stmt.loc, stmt.ty, ty, stmt.name)
        elif isinstance(stmt, AssignStmt):
            target_ty = self.check_expr(stmt.target, scope)
            if not isinstance(stmt.target, (Ident, IndexExpr)):
                self.fail(stmt.loc, "invalid assignment target")
            value_ty = self.check_expr(stmt.value, scope)
            if stmt.op in ("+=", "-="):
                if target_ty is not None and target_ty.kind != "uint256":
                    self.fail(stmt.loc, f"{stmt.op} requires uint256, got {target_ty.render()}")
                if value_ty is not None and value_ty.kind != "uint256":
                    self.fail(stmt.loc, f"{stmt.op} requires uint256 value")
            else:
                self.require_assignable(stmt.loc, target_ty, value_ty, "assignment")
        elif isinstance(stmt, TupleAssignStmt):
            self.check_expr(stmt.value, scope, allow_dynamic=True)
            for idx, name in enumerate(stmt.targets):
                if name is None:
                    continue
                ty = scope.lookup(name)
                if ty is None:
                    self.fail(stmt.loc, f"unknown identifier {name!r}")
                elif idx == 0 and ty.kind != "bool":
                    self.fail(stmt.loc, "first destructuring target receives the success bool")
        elif isinstance(stmt, IfStmt):
            self.require_bool(stmt.cond, scope, "if condition")
            self.check_block(stmt.then, Scope(scope))
            if stmt.otherwise is not None:
                self.check_block(stmt.otherwise, Scope(scope))
        elif isinstance(stmt, ForStmt):
            body_scope = Scope(scope)
            if stmt.init is not None:
                self.check_stmt(stmt.init, body_scope)
            if stmt.cond is not None:
                self.require_bool(stmt.cond, body_scope, "loop condition")
            if stmt.update is not None:
                self.check_stmt(stmt.update, body_scope)
            self.check_block(stmt.body, Scope(body_scope))
        elif isinstance(stmt, RequireStmt):
            self.require_bool(stmt.cond, scope, "require condition")
        elif isinstance(stmt, EmitStmt):
            event = self.unit.event(stmt.event)
            if event is None:
                self.fail(stmt.loc, f"unknown event {stmt.event!r}")
                for a in stmt.args:
                    self.check_expr(a, scope)
                return
            if len(stmt.args) != len(event.params):
                self.fail(stmt.loc, f"event {stmt.event} takes {len(event.params)} arguments")
            for a, p in zip(stmt.args, event.params):
                ty = self.check_expr(a, scope)
                self.require_assignable(stmt.loc, p.ty, ty, f"event argument {p.name or '?'}")
        elif isinstance(stmt, ReturnStmt):
            if stmt.value is None:
                return
            if len(self.fn_returns) != 1:
                self.fail(stmt.loc, "return with a value requires exactly one return slot")
                self.check_expr(stmt.value, scope)
                return
            ty = self.check_expr(stmt.value, scope)
            self.require_assignable(stmt.loc, self.fn_returns[0], ty, "return value")
        elif isinstance(stmt, ExprStmt):
            self.check_expr(stmt.expr, scope, allow_dynamic=True)
            if not isinstance(stmt.expr, (CallExpr, CallValueExpr, DelegatecallExpr, SendExpr)):
                self.fail(stmt.loc, "expression statement has no effect")
        elif isinstance(stmt, Block):
            self.check_block(stmt, Scope(scope))
        else:
            self.fail(stmt.loc, f"unsupported statement {type(stmt).__name__}")

    # -- helpers -----------------------------------------------------------

    def require_bool(self, expr: Expr, scope: Scope, what: str) -> None:
        ty = self.check_expr(expr, scope)
        if ty is not None and ty.kind != "bool":
            self.fail(expr.loc, f"{what} must be bool, got {ty.render()}")

    def require_assignable(self, loc: Loc, want: TypeExpr | None, got: TypeExpr | None, what) -> None:
        if want is None or got is None:
            return
        if want != got:
            self.fail(loc, f"type mismatch for {what}: expected {want.render()}, got {got.render()}")

    # -- expressions -------------------------------------------------------

    def check_expr(self, expr: Expr, scope: Scope, allow_dynamic: bool = False) -> TypeExpr | None:
        ty = self._infer(expr, scope, allow_dynamic)
        expr.ty = ty
        return ty

    def _infer(self, expr: Expr, scope: Scope, allow_dynamic: bool) -> TypeExpr | None:
        if isinstance(expr, NumberLit):
            return T_UINT
        if isinstance(expr, MaxUintExpr):
            return T_UINT
        if isinstance(expr, BoolLit):
            return T_BOOL
        if isinstance(expr, StringLit):
            return T_STRING
        if isinstance(expr, MsgSender):
            return T_ADDRESS
        if isinstance(expr, MsgValue):
            return T_UINT
        if isinstance(expr, ThisExpr):
            self.fail(expr.loc, "bare `this` is only legal inside address(this)")
            return T_ADDRESS
        if isinstance(expr, Ident):
            ty = scope.lookup(expr.name)
            if ty is None:
                self.fail(expr.loc, f"unknown identifier {expr.name!r}")
            return ty
        if isinstance(expr, CastExpr):
            if isinstance(expr.operand, ThisExpr):
                if expr.target.kind != "address":
                    self.fail(expr.loc, "`this` can only be cast to address")
                expr.operand.ty = T_ADDRESS
                return expr.target
            ty = self.check_expr(expr.operand, scope)
            if ty is not None and ty.kind not in NUMERIC_KINDS:
                self.fail(expr.loc, f"cannot cast {ty.render()} to {expr.target.render()}")
            return expr.target
        if isinstance(expr, BalanceExpr):
            ty = self.check_expr(expr.operand, scope)
            if ty is not None and ty.kind != "address":
                self.fail(expr.loc, ".balance requires an address")
            return T_UINT
        if isinstance(expr, LengthExpr):
            ty = self.check_expr(expr.operand, scope)
            if ty is not None and ty.kind not in ("array", "bytes"):
                self.fail(expr.loc, ".length requires an array or bytes")
            return T_UINT
        if isinstance(expr, IndexExpr):
            base_ty = self.check_expr(expr.base, scope)
            index_ty = self.check_expr(expr.index, scope)
            if base_ty is None:
                return None
            if base_ty.kind == "mapping":
                self.require_assignable(expr.loc, base_ty.key, index_ty, "mapping key")
                return base_ty.value
            if base_ty.kind == "array":
                self.require_assignable(expr.loc, T_UINT, index_ty, "array index")
                return base_ty.elem
            self.fail(expr.loc, f"cannot index {base_ty.render()}")
            return None
        if isinstance(expr, UnaryExpr):
            ty = self.check_expr(expr.operand, scope)
            if expr.op == "!":
                if ty is not None and ty.kind != "bool":
                    self.fail(expr.loc, "! requires bool")
                return T_BOOL
            self.fail(expr.loc, "unary minus is not supported outside uint(-1)")
            return T_UINT
        if isinstance(expr, BinaryExpr):
            lt = self.check_expr(expr.left, scope)
            rt = self.check_expr(expr.right, scope)
            op = expr.op
            if op in ("&&", "||"):
                for side, t in (("left", lt), ("right", rt)):
                    if t is not None and t.kind != "bool":
                        self.fail(expr.loc, f"{op} requires bool operands ({side} is {t.render()})")
                return T_BOOL
            if op in ("==", "!="):
                if lt is not None and rt is not None and lt != rt:
                    self.fail(expr.loc, f"cannot compare {lt.render()} with {rt.render()}")
                if lt is not None and not lt.is_elementary:
                    self.fail(expr.loc, f"cannot compare {lt.render()} values")
                return T_BOOL
            if op in ("<", "<=", ">", ">="):
                for t in (lt, rt):
                    if t is not None and t.kind != "uint256":
                        self.fail(expr.loc, f"{op} requires uint256 operands")
                return T_BOOL
            # + - * / %
            for t in (lt, rt):
                if t is not None and t.kind != "uint256":
                    self.fail(expr.loc, f"{op} requires uint256 operands, got {t.render()}")
            return T_UINT
        if isinstance(expr, CheckedSubExpr):
            for part in (expr.base, expr.arg):
                t = self.check_expr(part, scope)
                if t is not None and t.kind != "uint256":
                    self.fail(expr.loc, ".sub requires uint256 operands")
            return T_UINT
        if isinstance(expr, SendExpr):
            t = self.check_expr(expr.to, scope)
            if t is not None and t.kind != "address":
                self.fail(expr.loc, ".send requires an address target")
            t = self.check_expr(expr.amount, scope)
            if t is not None and t.kind != "uint256":
                self.fail(expr.loc, ".send amount must be uint256")
            return T_BOOL
        if isinstance(expr, CallValueExpr):
            t = self.check_expr(expr.target, scope)
            if t is not None and t.kind != "address":
                self.fail(expr.loc, "call target must be an address")
            t = self.check_expr(expr.amount, scope)
            if t is not None and t.kind != "uint256":
                self.fail(expr.loc, "call value must be uint256")
            for a in expr.args:
                self.check_expr(a, scope)
            if not allow_dynamic:
                self.fail(expr.loc, "call results must be consumed by tuple destructuring")
            return None
        if isinstance(expr, DelegatecallExpr):
            t = self.check_expr(expr.target, scope)
            if t is not None and t.kind != "address":
                self.fail(expr.loc, "delegatecall target must be an address")
            for a in expr.args:
                self.check_expr(a, scope)
            if not allow_dynamic:
                self.fail(expr.loc, "delegatecall results must be consumed by tuple destructuring")
            return None
        if isinstance(expr, NewArrayExpr):
            t = self.check_expr(expr.length, scope)
            if t is not None and t.kind != "uint256":
                self.fail(expr.loc, "array length must be uint256")
            return TypeExpr("array", elem=expr.elem)
        if isinstance(expr, CallExpr):
            target = None
            for f in self.unit.functions:
                if not f.is_constructor and not f.is_fallback and f.name == expr.name:
                    target = f
                    break
            if target is None:
                self.fail(expr.loc, f"unknown function {expr.name!r}")
                for a in expr.args:
                    self.check_expr(a, scope)
                return None
            if len(expr.args) != len(target.params):
                self.fail(expr.loc, f"{expr.name} takes {len(target.params)} arguments")
            for a, p in zip(expr.args, target.params):
                ty = self.check_expr(a, scope)
                self.require_assignable(expr.loc, p.ty, ty, f"argument {p.name}")
            if len(target.returns) == 1:
                return target.returns[0].ty
            return None
        # Spec-only nodes; reachable when the same checker types spec exprs.
        if isinstance(expr, OldExpr):
            ty = self.check_expr(expr.operand, scope)
            want = "uint256" if expr.kind == "uint" else "bool"
            if ty is not None and ty.kind != want:
                self.fail(expr.loc, f"__verifier_old_{expr.kind} requires a {want} expression")
            return T_UINT if expr.kind == "uint" else T_BOOL
        if isinstance(expr, SumExpr):
            ty = scope.lookup(expr.mapping)
            if ty is None:
                self.fail(expr.loc, f"unknown mapping {expr.mapping!r}")
            elif ty.kind != "mapping" or ty.value.kind != "uint256":
                self.fail(expr.loc, "__verifier_sum_uint requires a mapping to uint256")
            return T_UINT
        if isinstance(expr, QuantExpr):
            inner = Scope(scope)
            inner.declare(expr.var, expr.var_ty)
            ty = self.check_expr(expr.body, inner)
            if ty is not None and ty.kind != "bool":
                self.fail(expr.loc, "quantifier body must be bool")
            return T_BOOL
        self.fail(getattr(expr, "loc", Loc()), f"unsupported expression {type(expr).__name__}")
        return None


def check_unit(unit: ContractUnit) -> ContractUnit:
    """Type-check in place; returns the unit. Raises TypeCheckError."""
    Checker(unit).check_unit()
    return unit
