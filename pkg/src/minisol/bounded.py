"""Exhaustive conformance checking over finite value domains.

Every input dimension is finitized — the addresses, integers, and array
lengths that may appear in transaction arguments, and the number of
transactions in a scenario — and the reachable behaviors of the merged
contract are enumerated exhaustively within those bounds.  Each
specification obligation is evaluated on every successful call frame the
simulator produces; reverted transactions discharge nothing (partial
correctness) and are simply not part of any scenario.  A clean sweep
means no violation exists *within the bounds*; it is evidence, not proof.
The first violating scenario found for each obligation is reported with a
replayable trace.

Two modes mirror the two moments a contract's conformance is questioned:

* ``create`` — scenario roots are freshly constructed instances, one per
  constructor argument/sender/value combination, so constructor
  obligations are checked on the way in.
* ``upgrade`` — the contract is adopted mid-life with state it did not
  build.  Roots are synthetic states enumerated over the storage domains
  and filtered by the contract's invariants (nothing stronger may be
  assumed about inherited state), and constructor obligations do not
  apply.

Budgets cap how much of the bounded space is actually enumerated.  When a
budget truncates the sweep and nothing conclusive was found, the result
is a single inconclusive finding rather than a hollow pass.

Every enumeration below runs in a fixed, documented order: two runs over
the same inputs visit the same scenarios and produce identical findings.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass

from .chain import (
    BASE_ADDRESS,
    GENESIS_FUNDS,
    Account,
    ChainState,
    canonical_storage,
    encode_value,
    fresh_storage,
)
from .frontend import canonical_signature
from .interp import Runner, SimError, StepBudgetExceeded
from .nodes import ContractUnit, FunctionDecl, TypeExpr
from .report import IOU, SPV, VRE, Finding
from .specmodel import ContractSpec, FunctionSpec, Obligation, build_spec
from .speceval import SpecEvalError, context_for_call, context_for_state, holds

WORD_MAX = 2**256 - 1

#: The checked contract always sits at the simulator's first allocated
#: address, whether deployed by a constructor or materialized as a seeded
#: root, so traces from either mode replay against the same address.
CONTRACT_ADDRESS = BASE_ADDRESS


@dataclass(frozen=True)
class BoundedConfig:
    """Domains and budgets for the bounded sweep.

    The domains (``address_domain``, ``uint_domain``, ``sequence_depth``,
    ``array_len_bound``) define the meaning of a bounded verdict and
    default to: four distinct externally-owned addresses plus the zero
    address (the contract's own address joins at check time), the integers
    {0, 1, 2, 10, 2**256 - 1}, scenarios of at most three transactions
    (the root construction or seed counts as the first), and arrays of
    length at most two.

    The budgets (``max_seed_states``, ``max_calls_per_state``,
    ``max_transitions``, ``step_budget``) only cap how much of that space
    is enumerated before giving up; exceeding one is reported as an
    inconclusive truncation, never as a silent pass.
    """

    address_domain: tuple[int, ...] = (0xA1, 0xA2, 0xA3, 0xA4, 0x0)
    uint_domain: tuple[int, ...] = (0, 1, 2, 10, WORD_MAX)
    sequence_depth: int = 3
    array_len_bound: int = 2
    max_seed_states: int = 256
    max_calls_per_state: int = 128
    max_transitions: int = 80_000
    step_budget: int = 10**6

    def __post_init__(self):
        if not self.address_domain:
            raise ValueError("address domain must not be empty")
        if not self.uint_domain:
            raise ValueError("uint domain must not be empty")
        if self.sequence_depth < 1:
            raise ValueError("sequence depth must be at least 1")
        if self.array_len_bound < 0:
            raise ValueError("array length bound must not be negative")
        for name in ("max_seed_states", "max_calls_per_state",
                     "max_transitions", "step_budget"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    def senders(self) -> list[int]:
        """Externally-owned accounts that send transactions: the nonzero
        domain addresses, in domain order."""
        return [a for a in dict.fromkeys(self.address_domain) if a != 0]


@dataclass
class ObligationSet:
    """The obligations a given mode actually checks.

    ``upgrade`` drops constructor obligations: an upgraded-in contract
    never runs its constructor inside the scenarios being explored, so
    they are unverifiable there by construction rather than by budget.
    """

    mode: str
    invariants: list[Obligation]
    functions: dict[str, FunctionSpec]

    @classmethod
    def for_mode(cls, spec: ContractSpec, mode: str) -> "ObligationSet":
        functions = {
            sig: fspec
            for sig, fspec in spec.functions.items()
            if not (mode == "upgrade" and fspec.decl.is_constructor)
        }
        return cls(mode=mode, invariants=list(spec.invariants), functions=functions)

    def site_order(self) -> dict[str, int]:
        """Declaration-order ordinal for every obligation site; findings
        are sorted by this so reports read in spec order."""
        sites = [ob.site for ob in self.invariants]
        for sig in sorted(self.functions):
            fspec = self.functions[sig]
            sites.extend(ob.site for ob in fspec.postconditions)
            sites.extend(f"{sig} emits {name}" for name in fspec.emits)
        return {site: i for i, site in enumerate(sites)}


# ---------------------------------------------------------------------------
# Deterministic enumeration orders.
#
# These orders are part of the checker's observable behavior (they pick
# which witness gets reported), so they are fixed rather than incidental:
#
# * uint arguments: extremes first (2**256-1, then the rest ascending),
#   because boundary values are the likeliest witnesses;
# * address arguments: the domain rotated so the transaction sender's own
#   address comes last, putting sender-distinct (harder) cases first;
# * per state, candidate calls are drawn round-robin across one stream per
#   (function, sender) pair — functions in canonical-signature order — so
#   a call cap starves every function equally instead of exhausting the
#   alphabetically-first one;
# * argument tuples within a stream iterate with the last parameter
#   varying fastest; the transaction value, when payable, varies fastest
#   of all.


def _uint_args(cfg: BoundedConfig) -> list[int]:
    vals = [v for v in dict.fromkeys(cfg.uint_domain) if v != WORD_MAX]
    return ([WORD_MAX] if WORD_MAX in cfg.uint_domain else []) + vals


def _addr_args(cfg: BoundedConfig, sender: int) -> list[int]:
    domain = list(dict.fromkeys(list(cfg.address_domain) + [CONTRACT_ADDRESS]))
    return [a for a in domain if a != sender] + ([sender] if sender in domain else [])


def _tx_values(cfg: BoundedConfig, fn: FunctionDecl) -> list[int]:
    if not fn.payable:
        return [0]
    affordable = {v for v in cfg.uint_domain if v < GENESIS_FUNDS}
    return sorted(affordable | {0})


def _arg_values(ty: TypeExpr, cfg: BoundedConfig, sender: int) -> list:
    if ty.kind == "uint256":
        return _uint_args(cfg)
    if ty.kind == "address":
        return _addr_args(cfg, sender)
    if ty.kind == "bool":
        return [True, False]
    if ty.kind == "bytes32":
        return [0, 1, WORD_MAX]
    if ty.kind == "bytes":
        return [b""]
    if ty.kind == "string":
        return [""]
    if ty.kind == "array":
        elems = _arg_values(ty.elem, cfg, sender)
        out: list = [[]]
        for n in range(1, cfg.array_len_bound + 1):
            out.extend(list(combo) for combo in itertools.product(elems, repeat=n))
        return out
    raise SimError(f"cannot enumerate argument values of type {ty.render()}")


def _call_stream(fn: FunctionDecl, cfg: BoundedConfig, sender: int):
    domains = [_arg_values(p.ty, cfg, sender) for p in fn.params]
    for combo in itertools.product(*domains, _tx_values(cfg, fn)):
        yield list(combo[:-1]), combo[-1]


def _round_robin(streams: list):
    """Yield one item from each stream in turn until all are exhausted."""
    streams = [iter(s) for s in streams]
    while streams:
        alive = []
        for stream in streams:
            try:
                yield next(stream)
            except StopIteration:
                continue
            alive.append(stream)
        streams = alive


def _callable_functions(unit: ContractUnit) -> list[FunctionDecl]:
    fns = [
        fn for fn in unit.functions
        if fn.is_public and not fn.is_constructor and not fn.is_fallback
    ]
    return sorted(fns, key=canonical_signature)


def _labeled_stream(sig: str, sender: int, stream):
    for args, value in stream:
        yield sig, sender, args, value


def _call_plan(unit: ContractUnit, cfg: BoundedConfig) -> tuple[list, bool]:
    """The fixed schedule of calls attempted from every explored state:
    up to max_calls_per_state (sig, sender, args, value) tuples.  The
    domains do not depend on state, so one schedule serves all states.
    """
    streams = []
    for fn in _callable_functions(unit):
        sig = canonical_signature(fn)
        for sender in cfg.senders():
            streams.append(_labeled_stream(sig, sender, _call_stream(fn, cfg, sender)))
    plan = list(itertools.islice(_round_robin(streams), cfg.max_calls_per_state + 1))
    clipped = len(plan) > cfg.max_calls_per_state
    return plan[: cfg.max_calls_per_state], clipped


# ---------------------------------------------------------------------------
# Seed-state enumeration (upgrade mode).
#
# A seed assigns a nonzero value to some subset of the contract's state
# variables (its "shape"), one domain value per variable, with every
# other slot zero; the contract balance participates as one more
# pseudo-variable.  Seeds are enumerated in ascending shape size — the
# all-zero state first, then single-variable seeds, then pairs, and so on
# — with round-robin interleaving both across the size tiers and across
# the shapes inside a tier, so small, diverse states come before deep
# combinations of any single variable.  Each candidate must satisfy every
# contract invariant to become a root.


def _seed_uint_values(cfg: BoundedConfig) -> list[int]:
    # Nonzero, non-extreme: zero is represented by the slot being absent
    # from the shape, and the extreme would make near-every arithmetic
    # operation wrap, drowning genuine overflow findings in seeded ones.
    return [v for v in dict.fromkeys(cfg.uint_domain) if v not in (0, WORD_MAX)]


def _seed_addr_values(cfg: BoundedConfig) -> list[int]:
    domain = list(dict.fromkeys(list(cfg.address_domain) + [CONTRACT_ADDRESS]))
    return [a for a in domain if a != 0]


def _mapping_keys(ty: TypeExpr, cfg: BoundedConfig) -> list:
    if ty.kind == "address":
        return list(dict.fromkeys(list(cfg.address_domain) + [CONTRACT_ADDRESS]))
    if ty.kind == "uint256":
        return list(dict.fromkeys(cfg.uint_domain))
    if ty.kind == "bytes32":
        return [0, 1, WORD_MAX]
    if ty.kind == "bool":
        return [False, True]
    return []


def _seed_options(ty: TypeExpr, cfg: BoundedConfig) -> list:
    """Single-nonzero-leaf values for one variable of the given type."""
    if ty.kind == "uint256":
        return _seed_uint_values(cfg)
    if ty.kind == "bool":
        return [True]
    if ty.kind == "address":
        return _seed_addr_values(cfg)
    if ty.kind == "bytes32":
        return [1]
    if ty.kind == "mapping":
        keys = _mapping_keys(ty.key, cfg)
        leaves = _seed_options(ty.value, cfg)
        return [{key: leaf} for key, leaf in itertools.product(keys, leaves)]
    if ty.kind == "array":
        return [[leaf] for leaf in _seed_options(ty.elem, cfg)]
    return []  # bytes/string storage has no bounded nonzero seed


_BALANCE_SLOT = "__balance__"


def _seed_assignments(unit: ContractUnit, cfg: BoundedConfig):
    """Yield {var-name: value} assignments (``__balance__`` keys the
    contract's wei balance) in the tier/shape round-robin order."""
    slots = [(var.name, _seed_options(var.ty, cfg)) for var in unit.vars]
    slots.append((_BALANCE_SLOT, _seed_uint_values(cfg)))
    slots = [(name, options) for name, options in slots if options]

    def shape_stream(shape):
        option_lists = [options for _name, options in shape]
        names = [name for name, _options in shape]
        for combo in itertools.product(*option_lists):
            yield dict(zip(names, combo))

    tiers = []
    for width in range(len(slots) + 1):
        shapes = list(itertools.combinations(slots, width))
        tiers.append(_round_robin([shape_stream(s) for s in shapes]))
    yield from _round_robin(tiers)


def _materialize_seed(unit: ContractUnit, cfg: BoundedConfig, assignment: dict) -> ChainState:
    state = ChainState.with_genesis(cfg.senders())
    storage = fresh_storage(unit)
    balance = 0
    for name, value in assignment.items():
        if name == _BALANCE_SLOT:
            balance = value
        else:
            storage[name] = copy.deepcopy(value)
    state.accounts[CONTRACT_ADDRESS] = Account(balance=balance, storage=storage, code=unit)
    state.counter = 1  # the contract's slot in the address sequence is taken
    return state


# ---------------------------------------------------------------------------
# The sweep.


class _Search:
    def __init__(self, unit: ContractUnit, spec: ContractSpec,
                 obligations: ObligationSet, cfg: BoundedConfig):
        self.unit = unit
        self.spec = spec
        self.obligations = obligations
        self.cfg = cfg
        self.findings: dict[str, Finding] = {}
        self.ordinals = obligations.site_order()
        self.truncations: list[str] = []
        self.transitions = 0
        self.visited: set[str] = set()
        self.frontier: list[tuple[ChainState, list[dict]]] = []
        self.plan, plan_clipped = _call_plan(unit, cfg)
        if plan_clipped and cfg.sequence_depth > 1:
            # At depth 1 no calls are ever driven, so a clipped call
            # schedule does not truncate the space actually swept.
            self._truncate(
                f"call enumeration clipped at {cfg.max_calls_per_state} calls per state")
        for sig, fspec in obligations.functions.items():
            if fspec.decl.is_fallback and (fspec.postconditions or fspec.emits):
                self._truncate(
                    "obligations on the fallback function are not driven by this checker")

    # -- bookkeeping -------------------------------------------------------

    def _truncate(self, reason: str):
        if reason not in self.truncations:
            self.truncations.append(reason)

    def _spent(self) -> bool:
        if self.transitions >= self.cfg.max_transitions:
            self._truncate(f"transition budget of {self.cfg.max_transitions} exhausted")
            return True
        return False

    def _state_key(self, state: ChainState) -> str:
        acct = state.accounts[CONTRACT_ADDRESS]
        return json.dumps(
            [canonical_storage(acct.storage), acct.balance],
            sort_keys=True, separators=(",", ":"),
        )

    def _record(self, category: str, site: str, message: str, trace: list[dict],
                cause: str = ""):
        if site not in self.findings:
            self.findings[site] = Finding(
                category, site=site, message=message, trace=list(trace),
                suspected_cause=cause)

    # -- obligation evaluation --------------------------------------------

    def _check_receipt(self, receipt, trace: list[dict]):
        """Evaluate every applicable obligation on each successful frame of
        a successful transaction.  Frames arrive innermost-first, so an
        inner violation is attributed before the outer call that caused it.
        """
        for frame in receipt.frames:
            fspec = self.obligations.functions.get(frame.sig)
            if fspec is None:
                continue
            category = IOU if frame.wraps else SPV
            try:
                ctx = context_for_call(
                    fspec.decl, self.unit, CONTRACT_ADDRESS, frame.pre, frame.post,
                    frame.sender, frame.value, list(frame.args), tuple(frame.returns))
            except SpecEvalError as exc:
                self._record(VRE, f"{frame.sig} frame",
                             f"could not build evaluation context: {exc}", trace)
                continue
            for ob in fspec.postconditions:
                self._evaluate(ob, ctx, category, trace,
                               f"postcondition violated on {frame.sig}: {ob.text}")
            for ob in self.obligations.invariants:
                self._evaluate(ob, ctx, category, trace,
                               f"invariant violated after {frame.sig}: {ob.text}")
            for name in fspec.emits:
                site = f"{frame.sig} emits {name}"
                if any(ev.get("event") == name for ev in frame.events):
                    continue
                self._record(category, site,
                             f"{frame.sig} completed without emitting {name}", trace)

    def _evaluate(self, ob: Obligation, ctx, category: str, trace: list[dict],
                  message: str):
        if ob.site in self.findings:
            return
        try:
            ok = holds(ob.expr, ctx)
        except SpecEvalError as exc:
            self._record(VRE, ob.site, f"spec expression could not be evaluated: {exc}",
                         trace)
            return
        if not ok:
            cause = ("arithmetic wrapped around during this scenario"
                     if category == IOU else "")
            self._record(category, ob.site, message, trace, cause)

    # -- transition execution ---------------------------------------------

    def _transition_step(self, sig: str, args: list, sender: int, value: int,
                         receipt) -> dict:
        step = {
            "op": "call", "sig": sig,
            "args": [encode_value(a) for a in args],
            "sender": hex(sender), "value": hex(value),
        }
        if receipt.wraps:
            step["wraps"] = [
                {"site": w.site, "op": w.op,
                 "operands": [encode_value(o) for o in w.operands]}
                for w in receipt.wraps
            ]
        return step

    def _apply_calls(self, state: ChainState, trace: list[dict], expand: bool,
                     out_frontier: list):
        for sig, sender, args, value in self.plan:
            if self._spent():
                return
            call_args = [copy.deepcopy(a) if isinstance(a, list) else a for a in args]
            work = state.clone()
            runner = Runner(work, step_budget=self.cfg.step_budget,
                            watch_addr=CONTRACT_ADDRESS, record=False)
            self.transitions += 1
            try:
                receipt = runner.run_call(CONTRACT_ADDRESS, sig, call_args, sender, value)
            except StepBudgetExceeded:
                self._truncate(f"a transaction exceeded the step budget of "
                               f"{self.cfg.step_budget}")
                continue
            except SimError as exc:
                self._record(VRE, "simulator", f"simulation failed on {sig}: {exc}",
                             trace)
                continue
            if receipt.status != "success":
                continue
            step = self._transition_step(sig, args, sender, value, receipt)
            next_trace = trace + [step]
            self._check_receipt(receipt, next_trace)
            if expand:
                key = self._state_key(work)
                if key not in self.visited:
                    self.visited.add(key)
                    out_frontier.append((work, next_trace))

    # -- roots -------------------------------------------------------------

    def construction_roots(self):
        """create mode: every bounded constructor invocation that succeeds
        becomes a scenario root, and its frame discharges constructor
        obligations."""
        ctor = self.unit.constructor
        if ctor is None or ctor.body is None:
            self._truncate(f"{self.unit.name} has no deployable constructor")
            return
        streams = [
            _labeled_stream("", sender, _call_stream(ctor, self.cfg, sender))
            for sender in self.cfg.senders()
        ]
        roots = list(itertools.islice(_round_robin(streams),
                                      self.cfg.max_calls_per_state + 1))
        if len(roots) > self.cfg.max_calls_per_state:
            roots = roots[: self.cfg.max_calls_per_state]
            self._truncate(f"constructor enumeration clipped at "
                           f"{self.cfg.max_calls_per_state} instantiations")
        for _sig, sender, args, value in roots:
            if self._spent():
                return
            state = ChainState.with_genesis(self.cfg.senders())
            runner = Runner(state, step_budget=self.cfg.step_budget,
                            watch_addr=CONTRACT_ADDRESS, record=False)
            self.transitions += 1
            try:
                addr, receipt = runner.run_create(self.unit, list(args), sender, value)
            except StepBudgetExceeded:
                self._truncate(f"a transaction exceeded the step budget of "
                               f"{self.cfg.step_budget}")
                continue
            except SimError as exc:
                self._record(VRE, "simulator",
                             f"construction failed to simulate: {exc}", [])
                continue
            if receipt.status != "success":
                continue
            step = {
                "op": "create", "contract": self.unit.name,
                "args": [encode_value(a) for a in args],
                "sender": hex(sender), "value": hex(value),
            }
            if receipt.wraps:
                step["wraps"] = [
                    {"site": w.site, "op": w.op,
                     "operands": [encode_value(o) for o in w.operands]}
                    for w in receipt.wraps
                ]
            trace = [step]
            self._check_receipt(receipt, trace)
            key = self._state_key(state)
            if key not in self.visited:
                self.visited.add(key)
                self.frontier.append((state, trace))

    def seeded_roots(self):
        """upgrade mode: enumerate invariant-satisfying storage/balance
        assignments as scenario roots."""
        kept = 0
        eval_errors = 0
        candidates = 0
        candidate_budget = 64 * self.cfg.max_seed_states
        for assignment in _seed_assignments(self.unit, self.cfg):
            if kept >= self.cfg.max_seed_states:
                self._truncate(f"seed enumeration stopped at "
                               f"{self.cfg.max_seed_states} states")
                break
            candidates += 1
            if candidates > candidate_budget:
                self._truncate("seed candidate enumeration exceeded its budget "
                               "before filling the seed set")
                break
            state = _materialize_seed(self.unit, self.cfg, assignment)
            try:
                ctx = context_for_state(self.unit, CONTRACT_ADDRESS, state)
                if not all(holds(inv.expr, ctx) for inv in self.spec.invariants):
                    continue
            except SpecEvalError:
                eval_errors += 1
                continue
            key = self._state_key(state)
            if key in self.visited:
                continue
            self.visited.add(key)
            acct = state.accounts[CONTRACT_ADDRESS]
            trace = [{
                "op": "seed", "contract": self.unit.name,
                "address": hex(CONTRACT_ADDRESS),
                "storage": canonical_storage(acct.storage),
                "balance": hex(acct.balance),
            }]
            self.frontier.append((state, trace))
            kept += 1
        if eval_errors:
            self._truncate(f"{eval_errors} seed candidates could not be "
                           f"invariant-checked and were dropped")

    # -- driver ------------------------------------------------------------

    def explore(self):
        depth = self.cfg.sequence_depth - 1  # the root consumed one step
        frontier = self.frontier
        for level in range(depth):
            if not frontier:
                break
            next_frontier: list = []
            expand = level < depth - 1
            for state, trace in frontier:
                if self._spent():
                    return
                self._apply_calls(state, trace, expand, next_frontier)
            frontier = next_frontier

    def results(self) -> list[Finding]:
        ordered = sorted(
            self.findings.values(),
            key=lambda f: (self.ordinals.get(f.site, 1 << 30), f.site),
        )
        conclusive = any(f.category in (SPV, IOU) for f in ordered)
        if self.truncations and not conclusive:
            ordered.append(Finding(
                VRE, site="budget",
                message="bounded exploration was truncated before covering the "
                        "configured space: " + "; ".join(self.truncations),
                suspected_cause="raise the exploration budgets, or treat the "
                                "result as inconclusive at these bounds",
            ))
        return ordered


def bounded_check(merged, cfg: BoundedConfig | None = None,
                  mode: str = "create") -> list[Finding]:
    """Sweep the merged contract's bounded behavior space in the given
    mode and return the findings (empty means clean at these bounds)."""
    if mode not in ("create", "upgrade"):
        raise ValueError(f"unknown verification mode {mode!r}")
    cfg = cfg or BoundedConfig()
    spec = build_spec(merged.unit)
    obligations = ObligationSet.for_mode(spec, mode)
    search = _Search(merged.unit, spec, obligations, cfg)
    if mode == "create":
        search.construction_roots()
    else:
        search.seeded_roots()
    search.explore()
    return search.results()


class BoundedBackend:
    """Conformance backend that runs the bounded exhaustive sweep."""

    name = "bounded"

    def __init__(self, cfg: BoundedConfig | None = None):
        self.cfg = cfg or BoundedConfig()

    def check(self, merged, mode: str) -> list[Finding]:
        return bounded_check(merged, self.cfg, mode)
