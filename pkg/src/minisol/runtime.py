"""Runtime conformance checking: drive a transaction scenario, judge frames.

The runtime backend executes a concrete transaction script against the
simulator and evaluates the merged contract's obligations on every
successful call frame that enters the target contract — including frames
produced by other contracts calling in, which is what makes reentrancy
visible: the attack shows up as an outer frame whose pre/post span the
nested withdrawals, and the balance postcondition fails on it.

Scenario scripts are JSON objects, one per step (JSONL on disk):

* ``{"op": "create-target", "args": [...], "sender": ..., "value": ...}``
  deploys the merged contract and binds ``$target``.  A ``create`` step
  without a ``"code"`` field means the same thing (exhaustive-sweep traces
  use that spelling, carrying the contract name instead).
* ``{"op": "create", "code": "file.sol", "args": [...], "sender": ...,
  "value": ..., "as": "name"}`` deploys an auxiliary contract parsed from
  ``file.sol`` (resolved against the scenario's directory, then its
  parent) and binds ``$name``.
* ``{"op": "call", "addr": "$name", "sig": "f(uint256)", "args": [...],
  "sender": ..., "value": ...}`` sends a transaction; ``addr`` defaults
  to ``$target``.
* ``{"op": "seed", "address": ..., "storage": {...}, "balance": ...}``
  materializes the target contract directly at a state, without running
  its constructor — the replay form of an upgrade-mode root.

Argument and value literals may be plain integers, ``0x`` strings,
booleans, ``{"b": hex}`` byte strings, lists, or ``$name`` references to
earlier bindings.

Partial correctness: a reverted transaction leaves no frames, so it
discharges no obligations and produces no findings.  Violations are
reported per (frame, obligation) — the same obligation failing in two
frames is two findings — and each finding carries the executed step
prefix that reproduces it.  Simulator and script errors abort the
scenario with a VRE finding; whatever was found before the abort is kept.
"""

from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass, field

from .chain import (
    BASE_ADDRESS,
    Account,
    ChainState,
    decode_value,
    encode_value,
    fresh_storage,
)
from .frontend import parse_unit
from .interp import Runner, SimError
from .report import IOU, SPV, VRE, Finding
from .specmodel import ContractSpec, build_spec
from .speceval import SpecEvalError, context_for_call, holds

DEFAULT_SENDERS = (0xA1, 0xA2, 0xA3, 0xA4)


class ScenarioError(Exception):
    """The scenario script itself is unusable (bad JSON, bad op, unbound
    reference)."""


@dataclass
class Scenario:
    steps: list[dict]
    code_root: pathlib.Path | None = None


def parse_scenario(text: str, code_root: pathlib.Path | None = None,
                   origin: str = "<scenario>") -> Scenario:
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            step = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{origin}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(step, dict):
            raise ScenarioError(f"{origin}:{lineno}: each step must be an object")
        steps.append(step)
    return Scenario(steps=steps, code_root=code_root)


def load_scenario(path) -> Scenario:
    path = pathlib.Path(path)
    return parse_scenario(path.read_text(), code_root=path.parent, origin=str(path))


def scenario_senders(scenario) -> list[int]:
    """The externally-owned accounts a scenario transacts from, for genesis
    funding; the default quartet when the script names none."""
    steps = scenario.steps if isinstance(scenario, Scenario) else list(scenario)
    senders = []
    for step in steps:
        raw = step.get("sender")
        if raw is None:
            continue
        try:
            sender = _decode(raw, {})
        except ScenarioError:
            continue
        if isinstance(sender, int) and sender not in senders:
            senders.append(sender)
    return senders or list(DEFAULT_SENDERS)


def _decode(value, env: dict):
    if isinstance(value, (bool, int)):
        return value
    if isinstance(value, str):
        if value.startswith("$"):
            name = value[1:]
            if name not in env:
                raise ScenarioError(f"undefined binding {value!r}")
            return env[name]
        try:
            return int(value, 0)
        except ValueError as exc:
            raise ScenarioError(f"cannot decode literal {value!r}") from exc
    if isinstance(value, list):
        return [_decode(v, env) for v in value]
    if isinstance(value, dict):
        try:
            return decode_value(value)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"cannot decode literal {value!r}") from exc
    raise ScenarioError(f"cannot decode literal {value!r}")


class _Session:
    def __init__(self, merged, scenario, sim: ChainState):
        self.merged = merged
        self.spec: ContractSpec = build_spec(merged.unit)
        self.sim = sim
        self.env: dict[str, int] = {}
        self.executed: list[dict] = []
        self.findings: list[Finding] = []
        self.aux_units: dict[str, object] = {}
        if isinstance(scenario, Scenario):
            self.steps = list(scenario.steps)
            self.code_root = scenario.code_root
        else:
            self.steps = list(scenario)
            self.code_root = None
        # A target already deployed in the supplied state can be addressed
        # without a create step, as long as it is unambiguous.
        deployed = [addr for addr, acct in sorted(sim.accounts.items())
                    if acct.code is not None and acct.code.name == merged.unit.name]
        if len(deployed) == 1:
            self.env["target"] = deployed[0]

    # -- helpers -----------------------------------------------------------

    def _trace(self) -> list[dict]:
        return [dict(step) for step in self.executed]

    def _aux_unit(self, name: str):
        if name not in self.aux_units:
            roots = []
            if self.code_root is not None:
                roots = [self.code_root, self.code_root.parent]
            for root in roots:
                candidate = root / name
                if candidate.is_file():
                    self.aux_units[name] = parse_unit(candidate.read_text(), str(candidate))
                    break
            else:
                raise ScenarioError(f"auxiliary contract source {name!r} not found")
        return self.aux_units[name]

    def _check_frames(self, receipt):
        target = self.env.get("target")
        trace = self._trace()
        if receipt.wraps:
            # annotate the step that wrapped so every IOU finding's trace
            # visibly carries its wrap events
            trace[-1]["wraps"] = [
                {"site": w.site, "op": w.op,
                 "operands": [encode_value(o) for o in w.operands]}
                for w in receipt.wraps
            ]
        for frame in receipt.frames:
            fspec = self.spec.functions.get(frame.sig)
            if fspec is None:
                continue
            category = IOU if frame.wraps else SPV
            cause = ("arithmetic wrapped around during this scenario"
                     if category == IOU else "")
            try:
                ctx = context_for_call(
                    fspec.decl, self.merged.unit, target, frame.pre, frame.post,
                    frame.sender, frame.value, list(frame.args), tuple(frame.returns))
            except SpecEvalError as exc:
                self.findings.append(Finding(
                    VRE, site=f"{frame.sig} frame",
                    message=f"could not build evaluation context: {exc}", trace=trace))
                continue
            obligations = (
                [(ob, f"postcondition violated on {frame.sig}: {ob.text}")
                 for ob in fspec.postconditions]
                + [(ob, f"invariant violated after {frame.sig}: {ob.text}")
                   for ob in self.spec.invariants]
            )
            for ob, message in obligations:
                try:
                    ok = holds(ob.expr, ctx)
                except SpecEvalError as exc:
                    self.findings.append(Finding(
                        VRE, site=ob.site,
                        message=f"spec expression could not be evaluated: {exc}",
                        trace=trace))
                    continue
                if not ok:
                    self.findings.append(Finding(
                        category, site=ob.site, message=message, trace=trace,
                        suspected_cause=cause))
            for name in fspec.emits:
                if not any(ev.get("event") == name for ev in frame.events):
                    self.findings.append(Finding(
                        category, site=f"{frame.sig} emits {name}",
                        message=f"{frame.sig} completed without emitting {name}",
                        trace=trace, suspected_cause=cause))

    # -- step execution ----------------------------------------------------

    def _runner(self) -> Runner:
        return Runner(self.sim, watch_addr=self.env.get("target"), record=False)

    def _do_seed(self, step):
        addr = _decode(step.get("address", BASE_ADDRESS + self.sim.counter), self.env)
        storage = fresh_storage(self.merged.unit)
        for name, blob in step.get("storage", {}).items():
            if name not in storage:
                raise ScenarioError(f"seed names unknown state variable {name!r}")
            try:
                storage[name] = decode_value(blob)
            except (TypeError, ValueError) as exc:
                raise ScenarioError(
                    f"cannot decode seed value for {name!r}: {exc}") from exc
        balance = _decode(step.get("balance", 0), self.env)
        self.sim.accounts[addr] = Account(
            balance=balance, storage=storage, code=self.merged.unit)
        if addr >= BASE_ADDRESS:
            self.sim.counter = max(self.sim.counter, addr - BASE_ADDRESS + 1)
        self.env["target"] = addr

    def _do_create_target(self, step):
        args = _decode(step.get("args", []), self.env)
        sender = _decode(step.get("sender", DEFAULT_SENDERS[0]), self.env)
        value = _decode(step.get("value", 0), self.env)
        predicted = BASE_ADDRESS + self.sim.counter
        runner = Runner(self.sim, watch_addr=predicted, record=False)
        addr, receipt = runner.run_create(self.merged.unit, args, sender, value)
        if addr is not None:
            self.env["target"] = addr
        if receipt.status == "success":
            self._check_frames(receipt)

    def _do_create_aux(self, step):
        unit = self._aux_unit(step["code"])
        args = _decode(step.get("args", []), self.env)
        sender = _decode(step.get("sender", DEFAULT_SENDERS[0]), self.env)
        value = _decode(step.get("value", 0), self.env)
        runner = self._runner()
        addr, receipt = runner.run_create(unit, args, sender, value)
        if addr is not None and step.get("as"):
            self.env[step["as"]] = addr
        if receipt.status == "success":
            # an auxiliary constructor may itself call into the target
            self._check_frames(receipt)

    def _do_call(self, step):
        if "sig" not in step:
            raise ScenarioError("call step is missing its 'sig'")
        addr = _decode(step.get("addr", "$target"), self.env)
        args = _decode(step.get("args", []), self.env)
        sender = _decode(step.get("sender", DEFAULT_SENDERS[0]), self.env)
        value = _decode(step.get("value", 0), self.env)
        receipt = self._runner().run_call(addr, step["sig"], args, sender, value)
        if receipt.status == "success":
            self._check_frames(receipt)

    def run(self) -> list[Finding]:
        for step in self.steps:
            self.executed.append(step)
            op = step.get("op")
            try:
                if op == "seed":
                    self._do_seed(step)
                elif op == "create-target" or (op == "create" and "code" not in step):
                    self._do_create_target(step)
                elif op == "create":
                    self._do_create_aux(step)
                elif op == "call":
                    self._do_call(step)
                else:
                    raise ScenarioError(f"unknown scenario op {op!r}")
            except ScenarioError as exc:
                self.findings.append(Finding(
                    VRE, site="scenario", message=str(exc), trace=self._trace()))
                break
            except SimError as exc:
                self.findings.append(Finding(
                    VRE, site="simulator", message=str(exc), trace=self._trace()))
                break
        return self.findings


def runtime_check(merged, scenario, sim: ChainState | None = None) -> list[Finding]:
    """Execute the scenario against sim (a fresh genesis state funded for
    the scenario's senders when None) and return one finding per violated
    (frame, obligation), in execution order."""
    if sim is None:
        sim = ChainState.with_genesis(scenario_senders(scenario))
    return _Session(merged, scenario, sim).run()


class RuntimeBackend:
    """Conformance backend that judges one concrete transaction scenario."""

    name = "runtime"

    def __init__(self, scenario, sim: ChainState | None = None):
        self.scenario = scenario
        self.sim = sim

    def check(self, merged, mode: str) -> list[Finding]:
        sim = self.sim.clone() if self.sim is not None else None
        return runtime_check(merged, self.scenario, sim)
