"""MiniSol interpreter: message calls, delegatecall, reverts, wrap tracking.

Contract arithmetic wraps modulo 2**256 and every wrap is recorded with its
source position; spec evaluation elsewhere uses exact integers, which is what
makes silent wraps observable as violations.  Wei balances are exact ints.

Every top-level operation is atomic: a snapshot is taken first and restored on
revert, including the address counter and staged events.  Inner message calls
snapshot the same way, so a failed sub-call rolls back its own effects (value
transfer included) and surfaces as `(false, ...)` to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chain import Account, ChainState, encode_value, fresh_storage, storage_read
from .frontend import canonical_signature
from .nodes import (
    MAX_UINT,
    AssignStmt,
    BalanceExpr,
    BinaryExpr,
    Block,
    BoolLit,
    CallExpr,
    CallValueExpr,
    CastExpr,
    CheckedSubExpr,
    ContractUnit,
    DelegatecallExpr,
    EmitStmt,
    Expr,
    ExprStmt,
    ForStmt,
    FunctionDecl,
    Ident,
    IfStmt,
    IndexExpr,
    LengthExpr,
    MaxUintExpr,
    MsgSender,
    MsgValue,
    NewArrayExpr,
    NumberLit,
    RequireStmt,
    ReturnStmt,
    SendExpr,
    StringLit,
    ThisExpr,
    TupleAssignStmt,
    UnaryExpr,
    VarDeclStmt,
    zero_value,
)

WORD = 2**256
ADDR_SPACE = 2**160
DEFAULT_STEP_BUDGET = 10**6


class SimError(Exception):
    """Malformed operation or broken internal invariant; not a revert."""


class StepBudgetExceeded(SimError):
    pass


class Revert(Exception):
    def __init__(self, reason: str = "revert"):
        self.reason = reason
        super().__init__(reason)


class _ReturnSignal(Exception):
    def __init__(self, values: tuple):
        self.values = values


@dataclass
class WrapEvent:
    site: str
    op: str
    operands: tuple


@dataclass
class FrameEntry:
    """One message-call entry into the watched contract that succeeded."""

    sig: str
    args: tuple
    sender: int
    value: int
    pre: ChainState
    post: ChainState | None = None
    returns: tuple = ()
    events: list = field(default_factory=list)
    wraps: list = field(default_factory=list)


@dataclass
class TxReceipt:
    status: str                  # "success" | "reverted"
    returns: tuple = ()
    events: list = field(default_factory=list)
    wraps: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    error: str = ""


@dataclass
class _Frame:
    code: ContractUnit          # code being executed
    self_addr: int              # storage and balance target
    sender: int
    value: int


def dispatch_table(unit: ContractUnit) -> dict[str, FunctionDecl]:
    table = {}
    for fn in unit.functions:
        if fn.is_constructor or fn.is_fallback:
            continue
        if fn.is_public:
            table[canonical_signature(fn)] = fn
    return table


class Runner:
    """Executes top-level operations against a ChainState."""

    def __init__(self, state: ChainState, step_budget: int = DEFAULT_STEP_BUDGET,
                 watch_addr: int | None = None, record: bool = True):
        self.state = state
        self.step_budget = step_budget
        self.watch_addr = watch_addr
        self.record = record
        self.steps = 0
        self.tx_events: list[dict] = []
        self.tx_wraps: list[WrapEvent] = []
        self.frames: list[FrameEntry] = []

    # -- top-level operations ----------------------------------------------

    def run_create(self, unit: ContractUnit, args: list, sender: int, value: int = 0):
        """Deploy a contract; returns (address, receipt).  Address is None on
        revert."""
        ctor = unit.constructor
        if ctor is None or ctor.body is None:
            raise SimError(f"{unit.name} has no deployable constructor")
        if len(args) != len(ctor.params):
            raise SimError(
                f"{unit.name} constructor takes {len(ctor.params)} arguments, got {len(args)}"
            )
        self._begin_op()
        before = self.state.total_wei()
        snap = self._snap()
        addr = self.state.next_address()
        try:
            if value:
                if not ctor.payable:
                    raise Revert("constructor is not payable")
                self._debit(sender, value)
            self.state.accounts[addr] = Account(balance=value, storage=fresh_storage(unit), code=unit)
            token = self._enter_watch(addr, canonical_signature(ctor), tuple(args), sender, value, snap[0])
            frame = _Frame(code=unit, self_addr=addr, sender=sender, value=value)
            self._exec_function(frame, ctor, list(args))
            self._exit_watch(token)
        except Revert as exc:
            self._restore(snap)
            receipt = TxReceipt(status="reverted", error=exc.reason, wraps=list(self.tx_wraps))
            self._finish_op("create", before, receipt, address=None,
                            source=getattr(unit, "source_text", ""), args=args,
                            sender=sender, value=value)
            return None, receipt
        except Exception:
            self._restore(snap)
            raise
        receipt = TxReceipt(status="success", events=list(self.tx_events),
                            wraps=list(self.tx_wraps), frames=list(self.frames))
        self.state.events.extend(self.tx_events)
        self._finish_op("create", before, receipt, address=addr,
                        source=getattr(unit, "source_text", ""), args=args,
                        sender=sender, value=value)
        return addr, receipt

    def run_call(self, addr: int, sig: str, args: list, sender: int, value: int = 0) -> TxReceipt:
        acct = self.state.accounts.get(addr)
        if acct is None or acct.code is None:
            raise SimError(f"no contract at {hex(addr)}")
        fn = dispatch_table(acct.code).get(sig)
        if fn is None:
            raise SimError(f"{acct.code.name} has no public function {sig!r}")
        if len(args) != len(fn.params):
            raise SimError(f"{sig} takes {len(fn.params)} arguments, got {len(args)}")
        self._begin_op()
        before = self.state.total_wei()
        snap = self._snap()
        try:
            if value and not fn.payable:
                raise Revert(f"{sig} is not payable")
            if value:
                self._debit(sender, value)
            token = self._enter_watch(addr, sig, tuple(args), sender, value, snap[0])
            if value:
                self.state.account(addr).balance += value
            frame = _Frame(code=acct.code, self_addr=addr, sender=sender, value=value)
            returns = self._exec_function(frame, fn, list(args))
            self._exit_watch(token, returns)
        except Revert as exc:
            self._restore(snap)
            receipt = TxReceipt(status="reverted", error=exc.reason, wraps=list(self.tx_wraps))
            self._finish_op("call", before, receipt, address=addr, sig=sig,
                            args=args, sender=sender, value=value)
            return receipt
        except Exception:
            self._restore(snap)
            raise
        receipt = TxReceipt(status="success", returns=returns, events=list(self.tx_events),
                            wraps=list(self.tx_wraps), frames=list(self.frames))
        self.state.events.extend(self.tx_events)
        self._finish_op("call", before, receipt, address=addr, sig=sig,
                        args=args, sender=sender, value=value)
        return receipt

    # -- bookkeeping --------------------------------------------------------

    def _begin_op(self):
        self.steps = 0
        self.tx_events = []
        self.tx_wraps = []
        self.frames = []

    def _finish_op(self, op: str, wei_before: int, receipt: TxReceipt, **fields):
        after = self.state.total_wei()
        if after != wei_before:
            raise SimError(f"wei conservation broken: {wei_before} -> {after}")
        if self.record:
            entry = {"op": op, "status": receipt.status}
            for key, val in fields.items():
                if key in ("sender", "value"):
                    entry[key] = hex(val)
                elif key == "address":
                    entry[key] = hex(val) if val is not None else None
                elif key == "args":
                    entry[key] = [encode_value(v) for v in val]
                else:
                    entry[key] = val
            self.state.transactions.append(entry)

    def _debit(self, sender: int, value: int):
        acct = self.state.account(sender)
        if acct.balance < value:
            raise Revert("insufficient balance for value transfer")
        acct.balance -= value

    def _snap(self):
        return (self.state.clone(), len(self.tx_events), len(self.tx_wraps), len(self.frames))

    def _restore(self, snap):
        clone, ev, wr, fr = snap
        self.state.restore(clone)
        del self.tx_events[ev:]
        del self.tx_wraps[wr:]
        del self.frames[fr:]

    def _enter_watch(self, target: int, sig: str, args: tuple, sender: int, value: int, pre: ChainState):
        if self.watch_addr is None or target != self.watch_addr:
            return None
        entry = FrameEntry(sig=sig, args=args, sender=sender, value=value, pre=pre)
        return (entry, len(self.tx_events), len(self.tx_wraps))

    def _exit_watch(self, token, returns: tuple = ()):
        if token is None:
            return
        entry, ev0, wr0 = token
        entry.post = self.state.clone()
        entry.returns = returns
        entry.events = [e for e in self.tx_events[ev0:] if e["address"] == self.watch_addr]
        entry.wraps = list(self.tx_wraps[wr0:])
        self.frames.append(entry)

    def _tick(self, loc=None):
        self.steps += 1
        if self.steps > self.step_budget:
            raise StepBudgetExceeded(f"step budget of {self.step_budget} exhausted")

    def _wrap(self, raw: int, expr) -> int:
        if 0 <= raw < WORD:
            return raw
        loc = getattr(expr, "loc", None)
        site = f"{getattr(loc, 'line', 0)}:{getattr(loc, 'col', 0)}"
        op = getattr(expr, "op", type(expr).__name__)
        self.tx_wraps.append(WrapEvent(site=site, op=op, operands=(raw,)))
        return raw % WORD

    # -- function execution -------------------------------------------------

    def _exec_function(self, frame: _Frame, fn: FunctionDecl, args: list) -> tuple:
        env: dict = {}
        for param, arg in zip(fn.params, args):
            env[param.name] = arg
        for ret in fn.returns:
            if ret.name:
                env[ret.name] = zero_value(ret.ty)
        explicit = None
        try:
            self._exec_block(frame, env, fn.body)
        except _ReturnSignal as sig:
            explicit = sig.values
        if explicit is not None and explicit != ():
            return explicit
        out = []
        for ret in fn.returns:
            out.append(env[ret.name] if ret.name else zero_value(ret.ty))
        return tuple(out)

    def _exec_block(self, frame, env, block: Block):
        for stmt in block.stmts:
            self._exec_stmt(frame, env, stmt)

    def _exec_stmt(self, frame, env, stmt):
        self._tick()
        if isinstance(stmt, VarDeclStmt):
            env[stmt.name] = self._eval(frame, env, stmt.init) if stmt.init else zero_value(stmt.ty)
            return
        if isinstance(stmt, AssignStmt):
            self._assign(frame, env, stmt)
            return
        if isinstance(stmt, TupleAssignStmt):
            values = self._eval(frame, env, stmt.value)
            for i, name in enumerate(stmt.targets):
                if name is None:
                    continue
                if i >= len(values):
                    raise Revert("tuple destructuring arity mismatch")
                env_or_storage_write(self, frame, env, name, values[i])
            return
        if isinstance(stmt, IfStmt):
            if self._eval(frame, env, stmt.cond):
                self._exec_block(frame, env, stmt.then)
            elif stmt.otherwise is not None:
                self._exec_block(frame, env, stmt.otherwise)
            return
        if isinstance(stmt, ForStmt):
            if stmt.init is not None:
                self._exec_stmt(frame, env, stmt.init)
            while True:
                self._tick()
                if stmt.cond is not None and not self._eval(frame, env, stmt.cond):
                    break
                self._exec_block(frame, env, stmt.body)
                if stmt.update is not None:
                    self._exec_stmt(frame, env, stmt.update)
            return
        if isinstance(stmt, RequireStmt):
            if not self._eval(frame, env, stmt.cond):
                raise Revert(stmt.message or "require failed")
            return
        if isinstance(stmt, EmitStmt):
            args = [self._eval(frame, env, a) for a in stmt.args]
            args = [list(a) if isinstance(a, list) else a for a in args]
            self.tx_events.append({"address": frame.self_addr, "event": stmt.event, "args": args})
            return
        if isinstance(stmt, ReturnStmt):
            if stmt.value is None:
                raise _ReturnSignal(())
            raise _ReturnSignal((self._eval(frame, env, stmt.value),))
        if isinstance(stmt, ExprStmt):
            self._eval(frame, env, stmt.expr, allow_dynamic=True)
            return
        raise SimError(f"cannot execute {type(stmt).__name__}")

    def _assign(self, frame, env, stmt: AssignStmt):
        value = self._eval(frame, env, stmt.value)
        target = stmt.target
        if isinstance(target, Ident):
            if stmt.op != "=":
                current = self._read_name(frame, env, target.name)
                value = self._wrap(current + value if stmt.op == "+=" else current - value, stmt.value)
            env_or_storage_write(self, frame, env, target.name, value)
            return
        if isinstance(target, IndexExpr):
            container, key = self._locate(frame, env, target)
            if stmt.op != "=":
                current = _container_read(container, key, target)
                value = self._wrap(current + value if stmt.op == "+=" else current - value, stmt.value)
            if isinstance(container, list):
                if not isinstance(key, int) or not 0 <= key < len(container):
                    raise Revert("array index out of range")
                container[key] = value
            else:
                container[key] = value
            return
        raise SimError(f"cannot assign to {type(target).__name__}")

    def _locate(self, frame, env, target: IndexExpr):
        """Resolve an index-assignment target to (container, final_key),
        materializing intermediate mapping levels."""
        keys = []
        node = target
        while isinstance(node, IndexExpr):
            keys.append(self._eval(frame, env, node.index))
            node = node.base
        keys.reverse()
        if not isinstance(node, Ident):
            raise SimError("assignment target must be a named variable")
        if node.name in env:
            container = env[node.name]
        else:
            storage = self.state.account(frame.self_addr).storage
            container = storage_read(storage, frame.code, node.name)
        for key in keys[:-1]:
            if isinstance(container, list):
                if not isinstance(key, int) or not 0 <= key < len(container):
                    raise Revert("array index out of range")
                container = container[key]
            else:
                nxt = container.get(key)
                if nxt is None:
                    nxt = {}
                    container[key] = nxt
                container = nxt
        return container, keys[-1]

    def _read_name(self, frame, env, name: str):
        if name in env:
            return env[name]
        storage = self.state.account(frame.self_addr).storage
        return storage_read(storage, frame.code, name)

    # -- expressions ---------------------------------------------------------

    def _eval(self, frame, env, expr, allow_dynamic: bool = False):
        self._tick()
        if isinstance(expr, NumberLit):
            return expr.value
        if isinstance(expr, BoolLit):
            return expr.value
        if isinstance(expr, StringLit):
            return expr.value
        if isinstance(expr, MaxUintExpr):
            return MAX_UINT
        if isinstance(expr, MsgSender):
            return frame.sender
        if isinstance(expr, MsgValue):
            return frame.value
        if isinstance(expr, ThisExpr):
            return frame.self_addr
        if isinstance(expr, Ident):
            return self._read_name(frame, env, expr.name)
        if isinstance(expr, CastExpr):
            value = self._eval(frame, env, expr.operand)
            if isinstance(value, bool):
                value = int(value)
            if expr.target.kind == "address":
                return value % ADDR_SPACE
            return value % WORD
        if isinstance(expr, BalanceExpr):
            addr = self._eval(frame, env, expr.operand)
            acct = self.state.accounts.get(addr)
            return acct.balance if acct else 0
        if isinstance(expr, LengthExpr):
            return len(self._eval(frame, env, expr.operand))
        if isinstance(expr, IndexExpr):
            base = self._eval(frame, env, expr.base)
            key = self._eval(frame, env, expr.index)
            return _container_read(base, key, expr)
        if isinstance(expr, UnaryExpr):
            return not self._eval(frame, env, expr.operand)
        if isinstance(expr, BinaryExpr):
            return self._binary(frame, env, expr)
        if isinstance(expr, CheckedSubExpr):
            base = self._eval(frame, env, expr.base)
            arg = self._eval(frame, env, expr.arg)
            if arg > base:
                raise Revert("checked subtraction underflow")
            return base - arg
        if isinstance(expr, NewArrayExpr):
            length = self._eval(frame, env, expr.length)
            if length > 10**6:
                raise Revert("array allocation too large")
            return [zero_value(expr.elem) for _ in range(length)]
        if isinstance(expr, SendExpr):
            return self._send(frame, env, expr)
        if isinstance(expr, CallValueExpr):
            return self._message_call(frame, env, expr)
        if isinstance(expr, DelegatecallExpr):
            return self._delegatecall(frame, env, expr)
        if isinstance(expr, CallExpr):
            return self._internal_call(frame, env, expr)
        raise SimError(f"cannot evaluate {type(expr).__name__}")

    def _binary(self, frame, env, expr: BinaryExpr):
        op = expr.op
        if op == "&&":
            return bool(self._eval(frame, env, expr.left)) and bool(self._eval(frame, env, expr.right))
        if op == "||":
            return bool(self._eval(frame, env, expr.left)) or bool(self._eval(frame, env, expr.right))
        left = self._eval(frame, env, expr.left)
        right = self._eval(frame, env, expr.right)
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
            return self._wrap(left + right, expr)
        if op == "-":
            return self._wrap(left - right, expr)
        if op == "*":
            return self._wrap(left * right, expr)
        if op == "/":
            if right == 0:
                raise Revert("division by zero")
            return left // right
        if op == "%":
            if right == 0:
                raise Revert("modulo by zero")
            return left % right
        raise SimError(f"unknown operator {op}")

    def _send(self, frame, env, expr: SendExpr) -> bool:
        to = self._eval(frame, env, expr.to)
        amount = self._eval(frame, env, expr.amount)
        self_acct = self.state.account(frame.self_addr)
        if self_acct.balance < amount:
            return False
        self_acct.balance -= amount
        self.state.account(to).balance += amount
        return True

    def _message_call(self, frame, env, expr: CallValueExpr) -> tuple:
        target = self._eval(frame, env, expr.target)
        amount = self._eval(frame, env, expr.amount)
        args = [self._eval(frame, env, a) for a in expr.args]
        self_acct = self.state.account(frame.self_addr)
        if self_acct.balance < amount:
            return (False,)
        snap = self._snap()
        self_acct.balance -= amount
        callee = self.state.account(target)
        token = None
        try:
            if callee.code is None:
                callee.balance += amount
                return (True,)
            if expr.sig == "":
                fn = callee.code.fallback
                if fn is None:
                    raise Revert("no fallback function")
            else:
                fn = dispatch_table(callee.code).get(expr.sig)
                if fn is None:
                    raise Revert(f"no public function {expr.sig!r}")
            if amount and not fn.payable:
                raise Revert(f"{expr.sig or 'fallback'} is not payable")
            if not fn.is_fallback and len(args) != len(fn.params):
                raise Revert("call argument arity mismatch")
            token = self._enter_watch(target, canonical_signature(fn),
                                      tuple(args), frame.self_addr, amount, snap[0])
            callee.balance += amount
            inner = _Frame(code=callee.code, self_addr=target, sender=frame.self_addr, value=amount)
            returns = self._exec_function(inner, fn, args if not fn.is_fallback else [])
            self._exit_watch(token, returns)
            return (True,) + returns
        except Revert:
            self._restore(snap)
            return (False,)

    def _delegatecall(self, frame, env, expr: DelegatecallExpr) -> tuple:
        target = self._eval(frame, env, expr.target)
        args = [self._eval(frame, env, a) for a in expr.args]
        impl = self.state.accounts.get(target)
        if impl is None or impl.code is None:
            return (False,)
        if expr.sig == "":
            fn = impl.code.fallback
        else:
            fn = dispatch_table(impl.code).get(expr.sig)
        if fn is None:
            return (False,)
        if not fn.is_fallback and len(args) != len(fn.params):
            return (False,)
        snap = self._snap()
        try:
            inner = _Frame(code=impl.code, self_addr=frame.self_addr,
                           sender=frame.sender, value=frame.value)
            returns = self._exec_function(inner, fn, args if not fn.is_fallback else [])
            return (True,) + returns
        except Revert:
            self._restore(snap)
            return (False,)

    def _internal_call(self, frame, env, expr: CallExpr):
        fn = None
        for candidate in frame.code.functions:
            if not candidate.is_constructor and not candidate.is_fallback and candidate.name == expr.name:
                fn = candidate
                break
        if fn is None:
            raise SimError(f"unknown internal function {expr.name!r}")
        args = [self._eval(frame, env, a) for a in expr.args]
        returns = self._exec_function(frame, fn, args)
        return returns[0] if returns else None


def env_or_storage_write(runner: Runner, frame, env, name: str, value):
    if name in env:
        env[name] = value
        return
    storage = runner.state.account(frame.self_addr).storage
    if frame.code.var(name) is None:
        raise SimError(f"unknown variable {name!r}")
    storage[name] = value


def _container_read(container, key, expr):
    if isinstance(container, list):
        if not isinstance(key, int) or isinstance(key, bool) or not 0 <= key < len(container):
            raise Revert("array index out of range")
        return container[key]
    if isinstance(container, dict):
        value = container.get(key)
        if value is None:
            ty = getattr(expr, "ty", None)
            return zero_value(ty) if ty is not None else 0
        return value
    raise Revert(f"cannot index value of type {type(container).__name__}")


def replay_transactions(genesis: dict[int, int], transactions: list[dict]) -> ChainState:
    """Re-execute a recorded transaction log from genesis."""
    from .chain import decode_value
    from .frontend import parse_unit

    state = ChainState()
    for addr, funds in genesis.items():
        state.genesis[addr] = funds
        state.accounts[addr] = Account(balance=funds)
    runner = Runner(state)
    units: dict[str, ContractUnit] = {}
    for entry in transactions:
        args = [decode_value(a) for a in entry["args"]]
        sender = int(entry["sender"], 16)
        value = int(entry["value"], 16)
        if entry["op"] == "create":
            source = entry["source"]
            unit = units.get(source)
            if unit is None:
                unit = parse_unit(source, origin="replay")
                units[source] = unit
            addr, receipt = runner.run_create(unit, args, sender, value)
        else:
            receipt = runner.run_call(int(entry["address"], 16), entry["sig"], args, sender, value)
        if receipt.status != entry["status"]:
            raise SimError(
                f"replay diverged: recorded {entry['status']}, got {receipt.status}"
            )
    return state
