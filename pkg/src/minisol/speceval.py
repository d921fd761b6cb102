"""Exact evaluation of spec expressions against chain states.

Spec arithmetic is unbounded: `old(x) - value` is the true integer, never a
wrapped one.  An implementation whose arithmetic silently wrapped will
therefore disagree with its spec here, which is precisely how wrap-related
violations become visible.

Quantifiers and sums range over finite support: the keys a mapping actually
holds (absent keys are zero everywhere, so any key outside the support
satisfies frame conditions trivially), plus the values in scope: the
transaction's sender, this contract, argument and return values, and the
index range of every array in scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .chain import ChainState
from .nodes import (
    BalanceExpr,
    BinaryExpr,
    BoolLit,
    CastExpr,
    CheckedSubExpr,
    ContractUnit,
    Expr,
    FunctionDecl,
    Ident,
    IndexExpr,
    LengthExpr,
    MaxUintExpr,
    MsgSender,
    MsgValue,
    NumberLit,
    OldExpr,
    QuantExpr,
    SumExpr,
    ThisExpr,
    TypeExpr,
    UnaryExpr,
    zero_value,
)

ADDR_SPACE = 2**160
WORD = 2**256
DOMAIN_CAP = 4096


class SpecEvalError(Exception):
    pass


@dataclass
class EvalContext:
    """Everything a spec expression can observe about one function execution."""

    unit: ContractUnit            # implementation unit (for storage var types)
    self_addr: int
    pre: ChainState
    post: ChainState
    sender: int = 0
    value: int = 0
    bindings: dict[str, tuple[TypeExpr, Any]] = field(default_factory=dict)

    def storage(self, use_pre: bool):
        state = self.pre if use_pre else self.post
        acct = state.accounts.get(self_addr := self.self_addr)
        return acct.storage if acct is not None else {}

    def state(self, use_pre: bool) -> ChainState:
        return self.pre if use_pre else self.post


def context_for_call(
    spec_fn: FunctionDecl,
    impl_unit: ContractUnit,
    self_addr: int,
    pre: ChainState,
    post: ChainState,
    sender: int,
    value: int,
    args: tuple,
    returns: tuple = (),
) -> EvalContext:
    """Bind a frame's arguments and returns to the spec's parameter names.

    Binding is positional: the spec names parameters for its own expressions,
    and an implementation is free to use different names."""
    bindings: dict[str, tuple[TypeExpr, Any]] = {}
    if len(args) != len(spec_fn.params):
        raise SpecEvalError(
            f"argument arity mismatch for {spec_fn.name or 'constructor'}: "
            f"{len(args)} given, spec declares {len(spec_fn.params)}"
        )
    for param, arg in zip(spec_fn.params, args):
        bindings[param.name] = (param.ty, arg)
    for decl, val in zip(spec_fn.returns, returns):
        if decl.name:
            bindings[decl.name] = (decl.ty, val)
    return EvalContext(
        unit=impl_unit, self_addr=self_addr, pre=pre, post=post,
        sender=sender, value=value, bindings=bindings,
    )


def context_for_state(unit: ContractUnit, self_addr: int, state: ChainState) -> EvalContext:
    """Context for invariant evaluation: one state, no transaction."""
    return EvalContext(unit=unit, self_addr=self_addr, pre=state, post=state)


def evaluate(expr: Expr, ctx: EvalContext, use_pre: bool = False):
    return _eval(expr, ctx, use_pre, {})


def holds(expr: Expr, ctx: EvalContext) -> bool:
    result = evaluate(expr, ctx)
    if not isinstance(result, bool):
        raise SpecEvalError(f"spec expression evaluated to {type(result).__name__}, not bool")
    return result


def _eval(expr, ctx: EvalContext, pre: bool, env: dict):
    if isinstance(expr, NumberLit):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, MaxUintExpr):
        return WORD - 1
    if isinstance(expr, MsgSender):
        return ctx.sender
    if isinstance(expr, MsgValue):
        return ctx.value
    if isinstance(expr, ThisExpr):
        return ctx.self_addr
    if isinstance(expr, Ident):
        name = expr.name
        if name in env:
            return env[name]
        if name in ctx.bindings:
            return ctx.bindings[name][1]
        var = ctx.unit.var(name)
        if var is not None:
            storage = ctx.storage(pre)
            if name in storage:
                return storage[name]
            return zero_value(var.ty) if var.ty.kind != "mapping" else {}
        raise SpecEvalError(f"unresolved name {name!r} in spec expression")
    if isinstance(expr, OldExpr):
        return _eval(expr.operand, ctx, True, env)
    if isinstance(expr, CastExpr):
        value = _eval(expr.operand, ctx, pre, env)
        if isinstance(value, bool):
            value = int(value)
        if expr.target.kind == "address":
            return value % ADDR_SPACE
        return value % WORD
    if isinstance(expr, BalanceExpr):
        addr = _eval(expr.operand, ctx, pre, env)
        acct = ctx.state(pre).accounts.get(addr)
        return acct.balance if acct is not None else 0
    if isinstance(expr, LengthExpr):
        value = _eval(expr.operand, ctx, pre, env)
        return len(value)
    if isinstance(expr, IndexExpr):
        base = _eval(expr.base, ctx, pre, env)
        key = _eval(expr.index, ctx, pre, env)
        if isinstance(base, list):
            if not isinstance(key, int) or not 0 <= key < len(base):
                raise SpecEvalError("array index out of range in spec expression")
            return base[key]
        if isinstance(base, dict):
            found = base.get(key)
            if found is not None:
                return found
            ty = getattr(expr, "ty", None)
            if ty is None:
                return 0
            return zero_value(ty) if ty.kind != "mapping" else {}
        raise SpecEvalError(f"cannot index {type(base).__name__} in spec expression")
    if isinstance(expr, UnaryExpr):
        return not _eval(expr.operand, ctx, pre, env)
    if isinstance(expr, BinaryExpr):
        op = expr.op
        if op == "&&":
            return bool(_eval(expr.left, ctx, pre, env)) and bool(_eval(expr.right, ctx, pre, env))
        if op == "||":
            return bool(_eval(expr.left, ctx, pre, env)) or bool(_eval(expr.right, ctx, pre, env))
        left = _eval(expr.left, ctx, pre, env)
        right = _eval(expr.right, ctx, pre, env)
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise SpecEvalError("division by zero in spec expression")
            return left // right
        if op == "%":
            if right == 0:
                raise SpecEvalError("modulo by zero in spec expression")
            return left % right
        raise SpecEvalError(f"unknown operator {op}")
    if isinstance(expr, CheckedSubExpr):
        return _eval(expr.base, ctx, pre, env) - _eval(expr.arg, ctx, pre, env)
    if isinstance(expr, SumExpr):
        storage = ctx.storage(pre)
        mapping = storage.get(expr.mapping, {})
        if not isinstance(mapping, dict):
            raise SpecEvalError(f"__verifier_sum_uint target {expr.mapping!r} is not a mapping")
        return sum(mapping.values())
    if isinstance(expr, QuantExpr):
        domain = _domain(expr.var_ty, ctx, env)
        if expr.quant == "forall":
            return all(
                bool(_eval(expr.body, ctx, pre, {**env, expr.var: v})) for v in domain
            )
        return any(bool(_eval(expr.body, ctx, pre, {**env, expr.var: v})) for v in domain)
    raise SpecEvalError(f"cannot evaluate {type(expr).__name__} in a spec expression")


def _domain(var_ty: TypeExpr, ctx: EvalContext, env: dict) -> list:
    if var_ty.kind == "bool":
        return [False, True]
    addrs: set = set()
    uints: set = set()
    other: set = set()
    addrs.update((0, ctx.self_addr, ctx.sender))
    uints.add(0)

    def take(ty: TypeExpr, value):
        if ty is None:
            return
        if ty.kind == "address" and isinstance(value, int):
            addrs.add(value)
        elif ty.kind == "uint256" and isinstance(value, int):
            uints.add(value)
        elif ty.kind == "bytes32" and isinstance(value, int):
            other.add(value)
        elif ty.kind == "array" and isinstance(value, list):
            uints.update(range(len(value) + 1))
            for item in value:
                take(ty.elem, item)
        elif ty.kind == "mapping" and isinstance(value, dict):
            for key, sub in value.items():
                take(ty.key, key)
                take(ty.value, sub)

    for ty, value in ctx.bindings.values():
        take(ty, value)
    for use_pre in (True, False):
        storage = ctx.storage(use_pre)
        for var in ctx.unit.vars:
            if var.name in storage:
                take(var.ty, storage[var.name])

    if var_ty.kind == "address":
        out = addrs
    elif var_ty.kind == "uint256":
        out = uints
    else:
        out = other | {0}
    if len(out) > DOMAIN_CAP:
        raise SpecEvalError(f"quantifier domain exceeds {DOMAIN_CAP} values")
    return sorted(out)
