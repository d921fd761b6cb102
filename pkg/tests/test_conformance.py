"""Interface comparison, spec/impl merging, and report orchestration."""

import json

import pytest

from minisol.conformance import (
    ConformanceError,
    MergedContract,
    check_syntactic,
    merge_spec,
    merged_spec_id,
    verify,
    verify_creation,
    verify_upgrade,
)
from minisol.frontend import parse_unit
from minisol.report import IOU, NTI, SPV, VRE, Finding, make_report
from minisol.specmodel import SpecPlacementError, build_spec, spec_from_source

from conftest import corpus_text

CONFORMING_PAIRS = [
    ("toywallet.spec.sol", "toywallet.sol"),
    ("toywallet.spec.sol", "toywallet_v2.sol"),
    ("toywallet.spec.sol", "toywallet_reentrant.sol"),
    ("erc20.spec.sol", "erc20.sol"),
    ("erc20.spec.sol", "erc20_wop_transferfrom.sol"),
    ("erc20.spec.sol", "erc20_allowance_cap.sol"),
    ("erc20.spec.sol", "erc20_unchecked_transfer.sol"),
    ("erc1155.spec.sol", "erc1155.sol"),
    ("erc1155.spec.sol", "erc1155_batch_wop.sol"),
]


def load_pair(spec_name, impl_name):
    spec = spec_from_source(corpus_text(spec_name), spec_name)
    impl = parse_unit(corpus_text(impl_name), impl_name)
    return spec, impl


# ---------------------------------------------------------------------------
# Syntactic comparison

@pytest.mark.parametrize("spec_name,impl_name", CONFORMING_PAIRS)
def test_corpus_pairs_conform_syntactically(spec_name, impl_name):
    spec, impl = load_pair(spec_name, impl_name)
    assert check_syntactic(spec.unit, impl) == []


def test_missing_public_function_is_reported():
    spec, impl = load_pair("erc20.spec.sol", "erc20_missing_allowance.sol")
    findings = check_syntactic(spec.unit, impl)
    assert len(findings) == 1
    f = findings[0]
    assert f.category == NTI
    assert f.site == "allowance(address,address)"
    assert "missing" in f.message


def test_extra_public_function_is_reported():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").rstrip()
    assert source.endswith("}")
    source = source[:-1] + "    function sweep() public { }\n}\n"
    impl = parse_unit(source, "extra.sol")
    findings = check_syntactic(spec.unit, impl)
    assert [f.site for f in findings] == ["sweep()"]
    assert "not declared by the spec" in findings[0].message


def test_extra_internal_helper_is_not_reported():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").rstrip()[:-1] + (
        "    function helper(uint256 x) internal {\n"
        "        require(x >= 0);\n"
        "    }\n}\n")
    impl = parse_unit(source, "helper.sol")
    assert check_syntactic(spec.unit, impl) == []


def test_variable_rename_is_reported():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").replace("accs", "balances")
    impl = parse_unit(source, "renamed.sol")
    findings = check_syntactic(spec.unit, impl)
    assert [f.site for f in findings] == ["storage[0]"]
    assert "accs" in findings[0].message and "balances" in findings[0].message


def test_variable_type_change_is_reported():
    spec, _ = load_pair("erc20.spec.sol", "erc20.sol")
    source = corpus_text("erc20.sol").replace(
        "uint256 totalSupply;", "address totalSupply;")
    source = source.replace("totalSupply = initial;",
                            "totalSupply = msg.sender;")
    impl = parse_unit(source, "retyped.sol")
    findings = check_syntactic(spec.unit, impl)
    assert any(f.site == "storage[0]" and "address" in f.message
               for f in findings)


def test_variable_order_swap_is_reported():
    spec, _ = load_pair("erc20.spec.sol", "erc20.sol")
    source = corpus_text("erc20.sol")
    a = "uint256 totalSupply;"
    b = "mapping (address => uint256) balanceOf;"
    assert source.index(a) < source.index(b)
    source = source.replace(a, "@@TMP@@").replace(b, a).replace("@@TMP@@", b)
    impl = parse_unit(source, "swapped.sol")
    sites = {f.site for f in check_syntactic(spec.unit, impl)}
    assert sites == {"storage[0]", "storage[1]"}


def test_missing_variable_is_reported_as_count_mismatch():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").replace(
        "mapping (address => uint) accs;", "mapping (address => uint) accs;\n    uint extra;")
    impl = parse_unit(source, "extra_var.sol")
    findings = check_syntactic(spec.unit, impl)
    assert any(f.site == "storage" and "count mismatch" in f.message
               for f in findings)


def test_payability_mismatch_is_reported():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").replace(
        "function deposit() payable public", "function deposit() public")
    impl = parse_unit(source, "nonpayable.sol")
    findings = check_syntactic(spec.unit, impl)
    assert [f.site for f in findings] == ["deposit()"]
    assert "payability" in findings[0].message


def test_return_type_mismatch_is_reported():
    spec, _ = load_pair("erc20.spec.sol", "erc20.sol")
    source = corpus_text("erc20.sol").replace(
        "function balanceOf(address _owner) public view returns (uint256 balance)",
        "function balanceOf(address _owner) public view returns (bool balance)")
    source = source.replace("return balanceOf[_owner];",
                            "return balanceOf[_owner] >= 1;")
    impl = parse_unit(source, "badret.sol")
    findings = check_syntactic(spec.unit, impl)
    assert [f.site for f in findings] == ["balanceOf(address)"]
    assert "return type" in findings[0].message


def test_public_and_external_are_interchangeable():
    spec, _ = load_pair("erc20.spec.sol", "erc20.sol")
    source = corpus_text("erc20.sol").replace(
        "function transfer(address _to, uint256 _value) public",
        "function transfer(address _to, uint256 _value) external")
    impl = parse_unit(source, "external.sol")
    assert check_syntactic(spec.unit, impl) == []


def test_view_and_nonpayable_are_interchangeable():
    # erc20_allowance_cap drops `view` from allowance(); already covered by
    # the conforming-pairs test, asserted here explicitly for one function.
    spec, impl = load_pair("erc20.spec.sol", "erc20_allowance_cap.sol")
    cap_allowance = impl.function("allowance")
    spec_allowance = spec.unit.function("allowance")
    assert spec_allowance.view and not cap_allowance.view
    assert check_syntactic(spec.unit, impl) == []


def test_constructor_signature_mismatch_is_reported():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    source = corpus_text("toywallet.sol").rstrip()[:-1] + (
        "    constructor(uint256 seed) public {\n"
        "        accs[msg.sender] = seed;\n"
        "    }\n}\n")
    impl = parse_unit(source, "ctor.sol")
    sites = {f.site for f in check_syntactic(spec.unit, impl)}
    assert sites == {"constructor()", "constructor(uint256)"}


def test_renamed_parameters_still_conform():
    # Parameter names are not part of the canonical signature; obligations
    # bind positionally.
    spec, impl = load_pair("erc20.spec.sol", "erc20_wop_transferfrom.sol")
    wop = impl.function("transferFrom")
    assert [p.name for p in wop.params] == ["from", "to", "value"]
    assert check_syntactic(spec.unit, impl) == []


# ---------------------------------------------------------------------------
# Merge

def test_merged_toywallet_matches_golden():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet.sol")
    merged = merge_spec(spec, impl)
    assert merged.source == corpus_text("golden/toywallet_merged.sol")


def test_merged_unit_reparses_and_typechecks():
    spec, impl = load_pair("erc20.spec.sol", "erc20.sol")
    merged = merge_spec(spec, impl)
    assert isinstance(merged, MergedContract)
    assert merged.unit.name == "ERC20"
    assert merged.spec_id == spec.spec_id
    # The merged unit still carries the implementation's bodies.
    assert merged.unit.function("transfer").body is not None


@pytest.mark.parametrize("spec_name,impl_name", CONFORMING_PAIRS)
def test_merged_contract_recomputes_its_own_spec_id(spec_name, impl_name):
    spec, impl = load_pair(spec_name, impl_name)
    merged = merge_spec(spec, impl)
    assert merged_spec_id(merged) == spec.spec_id


def test_merge_renames_parameters_to_spec_names():
    spec, impl = load_pair("erc20.spec.sol", "erc20_wop_transferfrom.sol")
    merged = merge_spec(spec, impl)
    fn = merged.unit.function("transferFrom")
    assert [p.name for p in fn.params] == ["_from", "_to", "_value"]
    # Body occurrences were rewritten with the parameters.
    assert "allowance[_from][msg.sender]" in merged.source
    assert "allowance[from]" not in merged.source


def test_merge_materializes_implicit_constructor_with_obligations():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet.sol")
    assert impl.constructor.implicit
    merged = merge_spec(spec, impl)
    ctor = merged.unit.constructor
    assert not ctor.implicit
    assert "constructor() public {" in merged.source
    merged_ctor_spec = build_spec(merged.unit).function_spec("constructor()")
    assert len(merged_ctor_spec.postconditions) == 1


def test_merge_refuses_nonconforming_pair():
    spec, impl = load_pair("erc20.spec.sol", "erc20_missing_allowance.sol")
    with pytest.raises(ConformanceError, match="missing"):
        merge_spec(spec, impl)


def test_merge_refuses_capturing_rename():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    # Rename the parameter and introduce a local with the spec's name: the
    # rename `amount` -> `value` would capture the local.
    source = corpus_text("toywallet.sol").replace(
        "function withdraw(uint value) public {",
        "function withdraw(uint amount) public {\n        uint value = 0;")
    source = source.replace("accs[msg.sender] >= value", "accs[msg.sender] >= amount")
    source = source.replace("msg.sender.send(value)", "msg.sender.send(amount)")
    source = source.replace("accs[msg.sender] - value", "accs[msg.sender] - amount + value")
    impl = parse_unit(source, "capture.sol")
    assert check_syntactic(spec.unit, impl) == []
    with pytest.raises(ConformanceError, match="capture"):
        merge_spec(spec, impl)


def test_merge_refuses_shadowing_local():
    spec, _ = load_pair("toywallet.spec.sol", "toywallet.sol")
    # The implementation names its parameter differently and also declares a
    # local reusing the parameter's name further down.
    source = corpus_text("toywallet.sol").replace(
        "function withdraw(uint value) public {",
        "function withdraw(uint amount) public {\n        uint amount2 = amount;")
    source = source.replace("accs[msg.sender] >= value", "accs[msg.sender] >= amount2")
    source = source.replace("msg.sender.send(value)", "msg.sender.send(amount2)")
    source = source.replace("accs[msg.sender] - value", "accs[msg.sender] - amount2")
    impl = parse_unit(source, "shadow_free.sol")
    merged = merge_spec(spec, impl)  # renames amount -> value, amount2 stays
    fn = merged.unit.function("withdraw")
    assert [p.name for p in fn.params] == ["value"]
    assert "uint256 amount2 = value;" in merged.source


def test_annotations_on_internal_functions_are_rejected():
    source = """
contract C {
    uint x;

    /// @notice postcondition x == 0
    function helper() internal {
        x = 0;
    }
}
"""
    unit = parse_unit(source, "internal_annot.sol")
    with pytest.raises(SpecPlacementError, match="internal"):
        build_spec(unit)


# ---------------------------------------------------------------------------
# Orchestration and reports

class RecordingBackend:
    def __init__(self, findings=None, name="recording"):
        self.name = name
        self.findings = findings or []
        self.calls = []

    def check(self, merged, mode):
        self.calls.append((merged.spec_id, merged.unit.name, mode))
        return list(self.findings)


def test_verify_passes_clean_pair_through_backend():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet.sol")
    backend = RecordingBackend()
    report = verify_creation(spec, impl, backend)
    assert report.verdict == "PASS"
    assert report.ok
    assert report.mode == "create"
    assert report.backend == "recording"
    assert report.spec_id == spec.spec_id
    assert backend.calls == [(spec.spec_id, "ToyWallet", "create")]


def test_verify_upgrade_sets_mode():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet_v2.sol")
    backend = RecordingBackend()
    report = verify_upgrade(spec, impl, backend)
    assert report.mode == "upgrade"
    assert backend.calls[0][2] == "upgrade"


def test_backend_findings_fail_the_report():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet_reentrant.sol")
    finding = Finding(category=SPV, site="withdraw(uint256) postcondition 0",
                      message="balance did not decrease by value")
    report = verify_creation(spec, impl, RecordingBackend([finding]))
    assert report.verdict == "FAIL"
    assert not report.ok
    assert report.categories() == [SPV]


def test_syntactic_findings_gate_the_backend():
    spec, impl = load_pair("erc20.spec.sol", "erc20_missing_allowance.sol")
    backend = RecordingBackend()
    report = verify_creation(spec, impl, backend)
    assert report.verdict == "FAIL"
    assert report.backend == "syntactic"
    assert report.categories() == [NTI]
    assert backend.calls == []  # semantic stage never ran


def test_verify_without_backend_is_interface_only():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet.sol")
    report = verify_creation(spec, impl)
    assert report.verdict == "PASS"
    assert report.backend == "syntactic"


def test_verify_rejects_unknown_mode():
    spec, impl = load_pair("toywallet.spec.sol", "toywallet.sol")
    with pytest.raises(ValueError, match="mode"):
        verify(spec, impl, "audit")


def test_report_json_shape():
    spec, impl = load_pair("erc20.spec.sol", "erc20_missing_allowance.sol")
    report = verify_upgrade(spec, impl, RecordingBackend())
    doc = report.to_json()
    assert doc["schema"] == 1
    assert doc["verdict"] == "FAIL"
    assert doc["mode"] == "upgrade"
    assert doc["spec_id"] == spec.spec_id
    assert doc["backend"] == "syntactic"
    assert isinstance(doc["duration_ms"], int)
    assert len(doc["findings"]) == 1
    f = doc["findings"][0]
    # NTI findings carry no trace, and an absent trace is an absent key.
    assert set(f) == {"category", "site", "message", "suspected_cause"}
    json.dumps(doc)  # serializable as-is


def test_make_report_rejects_unknown_category():
    with pytest.raises(ValueError, match="category"):
        make_report("create", "0" * 64, "syntactic",
                    [Finding(category="BOGUS", site="x", message="y")])


def test_all_finding_categories_round_trip():
    findings = [Finding(category=c, site="s", message="m")
                for c in (NTI, SPV, IOU, VRE)]
    report = make_report("create", "ab" * 32, "recording", findings)
    assert report.categories() == sorted([NTI, SPV, IOU, VRE])
    assert [f["category"] for f in report.to_json()["findings"]] == \
        [NTI, SPV, IOU, VRE]
