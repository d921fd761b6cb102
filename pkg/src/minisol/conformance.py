"""Interface conformance and verification orchestration.

An implementation conforms to a spec contract syntactically when

  * its state variables match the spec's declarations exactly — same names,
    same types, same order (storage layout is observable through
    delegatecall, so order is semantic), and
  * its set of externally callable functions equals the spec's, comparing
    canonical signatures, return types and payability. ``public`` and
    ``external`` are interchangeable, as are ``view`` and plain
    ``nonpayable``; a contract that declares no constructor is compared
    through its synthesized zero-argument one.

Internal/private helpers and event declarations are the implementation's
own business. Any mismatch yields an NTI finding and blocks the semantic
backends: there is no point checking behavior against obligations that
talk about storage the implementation does not have.

`merge_spec` re-attaches the spec's annotation comments to a conforming
implementation, producing a single annotated source — the form in which a
deployed contract can carry its own specification.
"""

from __future__ import annotations

import copy
import dataclasses
import time
from dataclasses import dataclass
from typing import Optional, Protocol

from .frontend import canonical_signature, parse_unit
from .nodes import (
    Block, ContractUnit, FunctionDecl, Ident, TupleAssignStmt, VarDeclStmt,
)
from .chain import code_hash
from .printer import print_unit
from .report import Finding, NTI, VRE, VerificationReport, make_report
from .specmodel import ContractSpec, FunctionSpec, build_spec

MODES = ("create", "upgrade")


class ConformanceError(Exception):
    pass


class MergePreconditionError(ConformanceError):
    """Merge attempted on a pair that fails the syntactic check."""


class Backend(Protocol):
    """A semantic checker.

    Backends receive the merged contract — implementation bodies carrying
    the spec's obligations — so they run only after the syntactic gate
    passes and the merge succeeds."""

    name: str

    def check(self, merged: "MergedContract", mode: str) -> list[Finding]: ...


# ---------------------------------------------------------------------------
# Syntactic comparison

def _interface(unit: ContractUnit) -> dict[str, FunctionDecl]:
    """Externally callable surface: public/external functions, the
    constructor (explicit or synthesized) and the fallback, keyed by
    canonical signature."""
    surface: dict[str, FunctionDecl] = {}
    for fn in unit.functions:
        if fn.is_constructor or fn.is_fallback or fn.is_public:
            surface[canonical_signature(fn)] = fn
    return surface


def _return_types(fn: FunctionDecl) -> tuple[str, ...]:
    return tuple(r.ty.render().replace(" ", "") for r in fn.returns)


def check_syntactic(spec_unit: ContractUnit,
                    impl_unit: ContractUnit) -> list[Finding]:
    """Definition of interface equality; every deviation is one NTI finding."""
    findings: list[Finding] = []

    svars, ivars = spec_unit.vars, impl_unit.vars
    if len(svars) != len(ivars):
        findings.append(Finding(
            category=NTI, site="storage",
            message=(f"state variable count mismatch: spec declares "
                     f"{len(svars)}, implementation declares {len(ivars)}"),
        ))
    for i, (sv, iv) in enumerate(zip(svars, ivars)):
        if sv.name != iv.name or sv.ty.render() != iv.ty.render():
            findings.append(Finding(
                category=NTI, site=f"storage[{i}]",
                message=(f"state variable mismatch at slot {i}: spec declares "
                         f"`{sv.ty.render()} {sv.name}`, implementation "
                         f"declares `{iv.ty.render()} {iv.name}`"),
            ))

    spec_iface = _interface(spec_unit)
    impl_iface = _interface(impl_unit)
    for sig in sorted(spec_iface.keys() - impl_iface.keys()):
        findings.append(Finding(
            category=NTI, site=sig,
            message=f"public function {sig} is missing from the implementation",
        ))
    for sig in sorted(impl_iface.keys() - spec_iface.keys()):
        findings.append(Finding(
            category=NTI, site=sig,
            message=f"public function {sig} is not declared by the spec",
        ))
    for sig in sorted(spec_iface.keys() & impl_iface.keys()):
        sfn, ifn = spec_iface[sig], impl_iface[sig]
        if _return_types(sfn) != _return_types(ifn):
            findings.append(Finding(
                category=NTI, site=sig,
                message=(f"return type mismatch for {sig}: spec returns "
                         f"({','.join(_return_types(sfn))}), implementation "
                         f"returns ({','.join(_return_types(ifn))})"),
            ))
        if sfn.payable != ifn.payable:
            which = "payable" if sfn.payable else "nonpayable"
            other = "nonpayable" if sfn.payable else "payable"
            findings.append(Finding(
                category=NTI, site=sig,
                message=(f"payability mismatch for {sig}: spec declares "
                         f"{which}, implementation declares {other}"),
            ))
    return findings


# ---------------------------------------------------------------------------
# Spec/implementation merge

@dataclass
class MergedContract:
    unit: ContractUnit      # annotated implementation, reparsed from `source`
    source: str             # pretty-printed annotated source text
    spec_id: str            # id of the spec whose annotations were applied
    impl_source_hash: str = ""   # sha256 of the implementation source text


def _walk_nodes(root):
    """Every dataclass node reachable from `root`, including itself."""
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, (list, tuple)):
            stack.extend(node)
            continue
        if not dataclasses.is_dataclass(node) or isinstance(node, type):
            continue
        yield node
        for f in dataclasses.fields(node):
            if f.name == "loc":
                continue
            stack.append(getattr(node, f.name))


def _body_names(body: Optional[Block]) -> tuple[set[str], set[str]]:
    """(identifiers used, local names declared) inside a function body."""
    used: set[str] = set()
    declared: set[str] = set()
    if body is None:
        return used, declared
    for node in _walk_nodes(body):
        if isinstance(node, Ident):
            used.add(node.name)
        elif isinstance(node, VarDeclStmt):
            declared.add(node.name)
        elif isinstance(node, TupleAssignStmt):
            used.update(t for t in node.targets if t)
    return used, declared


def _rename_to_spec_names(fn: FunctionDecl, fspec: FunctionSpec,
                          storage_names: set[str]) -> FunctionDecl:
    """Return `fn` with parameters and named returns renamed to the spec's
    names, body occurrences rewritten to match. Spec obligations are bound
    to implementation arguments positionally, so the merged text must use
    the spec's names for the annotations to read correctly.

    Renaming is a simultaneous substitution (parameter swaps are fine), and
    refuses any rename that would change what an identifier refers to.
    """
    pairs = list(zip(fspec.decl.params, fn.params)) + \
        list(zip(fspec.decl.returns, fn.returns))
    mapping: dict[str, str] = {}
    dropped: list[str] = []
    for spec_p, impl_p in pairs:
        if spec_p.name == impl_p.name:
            continue
        if impl_p.name and not spec_p.name:
            dropped.append(impl_p.name)
        elif impl_p.name:
            mapping[impl_p.name] = spec_p.name
    used, declared = _body_names(fn.body)
    sig = fspec.signature
    for name in dropped:
        if name in used or name in declared:
            raise ConformanceError(
                f"cannot merge {sig}: the spec leaves parameter "
                f"`{name}` unnamed but the implementation body uses it")
    for shadow in declared & mapping.keys():
        raise ConformanceError(
            f"cannot merge {sig}: local variable `{shadow}` shadows a "
            f"parameter that must be renamed")
    fixed = {p.name for _, p in pairs if p.name and p.name not in mapping}
    for src, dst in mapping.items():
        if dst in storage_names or dst in fixed or \
                (dst in (used | declared) and dst not in mapping):
            raise ConformanceError(
                f"cannot merge {sig}: renaming `{src}` to `{dst}` would "
                f"capture an existing name")

    body = copy.deepcopy(fn.body)
    if body is not None and (mapping or dropped):
        for node in _walk_nodes(body):
            if isinstance(node, Ident) and node.name in mapping:
                node.name = mapping[node.name]
            elif isinstance(node, TupleAssignStmt):
                node.targets = [
                    mapping.get(t, t) if t else t for t in node.targets]
    params = [dataclasses.replace(p, name=sp.name)
              for sp, p in zip(fspec.decl.params, fn.params)]
    returns = [dataclasses.replace(r, name=sr.name)
               for sr, r in zip(fspec.decl.returns, fn.returns)]
    return dataclasses.replace(fn, params=params, returns=returns, body=body)


def merge_spec(spec: ContractSpec, impl: ContractUnit) -> MergedContract:
    """Copy the spec's annotation comments onto a conforming implementation.

    The merged contract takes the spec's name (the implementation file may
    use its own), keeps the implementation's bodies, events and helpers,
    renames parameters to the spec's names (obligations bind positionally,
    so the implementation is free to call them something else), and carries
    every obligation where the spec declared it. Raises ConformanceError
    when the pair does not pass the syntactic check or a parameter rename
    would capture an existing name.
    """
    findings = check_syntactic(spec.unit, impl)
    if findings:
        raise MergePreconditionError(
            f"cannot merge non-conforming implementation: {findings[0].message}")

    storage_names = {v.name for v in impl.vars}
    functions: list[FunctionDecl] = []
    for fn in impl.functions:
        fspec = spec.function_spec(canonical_signature(fn))
        if fspec is None:
            # Annotations in the implementation file carry no authority: the
            # merged contract's obligations come from the spec alone.
            functions.append(dataclasses.replace(fn, docs=[]))
            continue
        merged_fn = _rename_to_spec_names(fn, fspec, storage_names)
        merged_fn.docs = list(fspec.decl.docs)
        if merged_fn.is_constructor and merged_fn.implicit and merged_fn.docs:
            # A synthesized constructor is invisible to the printer; give it
            # an explicit empty declaration so its obligations survive the
            # round-trip through source text.
            merged_fn = dataclasses.replace(merged_fn, implicit=False)
        functions.append(merged_fn)

    merged = dataclasses.replace(
        impl, name=spec.name, docs=list(spec.unit.docs), functions=functions,
        orphan_docs=[])
    source = print_unit(merged)
    unit = parse_unit(source, origin=f"<merged {spec.name}>")
    return MergedContract(unit=unit, source=source, spec_id=spec.spec_id,
                          impl_source_hash=code_hash(impl))


# ---------------------------------------------------------------------------
# Orchestration

def verify(spec: ContractSpec, impl: ContractUnit, mode: str,
           backend: Optional[Backend] = None) -> VerificationReport:
    """Run the syntactic gate, then the semantic backend if the gate passes.

    In create mode constructor obligations are in force; in upgrade mode
    the constructor of the new implementation is never executed behind the
    proxy, so backends skip its obligations. The interface comparison is
    identical in both modes.

    A conforming pair whose merge nevertheless fails (a parameter rename
    would capture an implementation name) yields a VRE finding: the
    semantic check could not be carried out, which is inconclusive, and
    inconclusive blocks deployment just as a violation does.
    """
    if mode not in MODES:
        raise ValueError(f"unknown verification mode {mode!r}")
    started = time.monotonic()
    findings = check_syntactic(spec.unit, impl)
    backend_name = "syntactic"
    if not findings and backend is not None:
        backend_name = backend.name
        try:
            merged = merge_spec(spec, impl)
        except ConformanceError as exc:
            findings = [Finding(VRE, site="merge", message=str(exc))]
        else:
            findings = backend.check(merged, mode)
    duration_ms = int((time.monotonic() - started) * 1000)
    return make_report(mode=mode, spec_id=spec.spec_id, backend=backend_name,
                       findings=findings, duration_ms=duration_ms)


def verify_creation(spec: ContractSpec, impl: ContractUnit,
                    backend: Optional[Backend] = None) -> VerificationReport:
    return verify(spec, impl, "create", backend)


def verify_upgrade(spec: ContractSpec, impl: ContractUnit,
                   backend: Optional[Backend] = None) -> VerificationReport:
    return verify(spec, impl, "upgrade", backend)


def merged_spec_id(merged: MergedContract) -> str:
    """Spec id recomputed from the merged source. When the implementation
    declares exactly the events the spec declares (the common case), this
    equals the original spec id — the annotated artifact is self-describing."""
    return build_spec(merged.unit).spec_id
