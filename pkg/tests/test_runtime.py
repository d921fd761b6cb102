"""Runtime scenario checking: script execution, frame judging, reentrancy."""

import json
import time

import pytest

from minisol.chain import BASE_ADDRESS, ChainState
from minisol.conformance import verify_creation
from minisol.frontend import parse_unit
from minisol.report import IOU, SPV, VRE
from minisol.runtime import (
    DEFAULT_SENDERS,
    RuntimeBackend,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
    runtime_check,
    scenario_senders,
)
from minisol.specmodel import spec_from_source

from conftest import BOUNDED_PAIRS, categories, corpus_path, corpus_text, merged_pair

WALLET = "toywallet.spec.sol"
BALANCE_POST = "withdraw(uint256) postcondition 0"
ACCOUNT_POST = "withdraw(uint256) postcondition 1"


def scenario_steps(name):
    text = corpus_path(f"scenarios/{name}.jsonl").read_text()
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def attack_scenario(attacker="attacker_once.sol"):
    steps = scenario_steps("reentrancy_once")
    steps[2]["code"] = attacker
    return Scenario(steps=steps, code_root=corpus_path("scenarios"))


# -- scenario loading -------------------------------------------------------


def test_load_scenario_reads_jsonl():
    sc = load_scenario(corpus_path("scenarios/reentrancy_once.jsonl"))
    assert [s["op"] for s in sc.steps] == [
        "create-target", "call", "create", "call", "call"]
    assert sc.code_root == corpus_path("scenarios")


@pytest.mark.parametrize("text,complaint", [
    ('{"op": "call"\nnot json', "not valid JSON"),
    ('[1, 2, 3]', "must be an object"),
])
def test_malformed_scenario_text_is_rejected(text, complaint):
    with pytest.raises(ScenarioError, match=complaint):
        parse_scenario(text)


def test_scenario_senders_are_collected_in_order():
    sc = load_scenario(corpus_path("scenarios/reentrancy_once.jsonl"))
    assert scenario_senders(sc) == [0xA1, 0xA2, 0xA3]


def test_scenario_without_senders_gets_default_accounts():
    assert scenario_senders(Scenario(steps=[])) == list(DEFAULT_SENDERS)


# -- the reentrancy scenario ------------------------------------------------


def test_reentrancy_scenario_flags_the_balance_postcondition():
    merged = merged_pair(WALLET, "toywallet_reentrant.sol")
    started = time.monotonic()
    findings = runtime_check(merged, attack_scenario())
    elapsed = time.monotonic() - started
    sites = categories(findings)
    assert (SPV, BALANCE_POST) in sites
    assert elapsed < 5.0


def test_reentrancy_findings_are_exactly_the_outer_frame_violations():
    merged = merged_pair(WALLET, "toywallet_reentrant.sol")
    findings = runtime_check(merged, attack_scenario())
    # the nested withdraw satisfies its own contract; only the outer frame
    # lies about the balance delta and the account decrement, wrap-free
    assert categories(findings) == {(SPV, BALANCE_POST), (SPV, ACCOUNT_POST)}
    assert len(findings) == 2
    for finding in findings:
        assert len(finding.trace) == 5
        assert finding.trace[-1]["sig"] == "attack(uint256)"


def test_original_wallet_is_clean_under_the_identical_scenario():
    merged = merged_pair(WALLET, "toywallet.sol")
    assert runtime_check(merged, attack_scenario()) == []


def test_draining_attacker_is_caught_on_every_violating_frame():
    merged = merged_pair(WALLET, "toywallet_reentrant.sol")
    findings = runtime_check(merged, attack_scenario("attacker_drain.sol"))
    sites = {f.site for f in findings}
    assert sites == {BALANCE_POST, ACCOUNT_POST}
    # the drain re-enters until the wallet is empty: four of the five
    # frames violate both postconditions, and the later unwinding
    # subtractions wrap, so the frames that span them are IOU
    assert len(findings) == 8
    assert {f.category for f in findings} == {SPV, IOU}
    for finding in findings:
        if finding.category == IOU:
            assert any("wraps" in step for step in finding.trace)


@pytest.mark.parametrize("impl", ["toywallet.sol", "toywallet_v2.sol"])
def test_clean_scenario_is_clean_on_conforming_wallets(impl):
    merged = merged_pair(WALLET, impl)
    sc = load_scenario(corpus_path("scenarios/toywallet_clean.jsonl"))
    assert runtime_check(merged, sc) == []


# -- partial correctness and step failures ----------------------------------


def test_reverted_transactions_discharge_nothing():
    merged = merged_pair(WALLET, "toywallet_reentrant.sol")
    steps = [
        {"op": "create-target", "sender": "0xa1"},
        # no deposits: every withdrawal fails its require and reverts
        {"op": "call", "sig": "withdraw(uint256)", "args": [5], "sender": "0xa1"},
        {"op": "call", "sig": "withdraw(uint256)", "args": [1], "sender": "0xa2"},
    ]
    assert runtime_check(merged, steps) == []


def test_scenario_continues_past_a_reverted_step():
    merged = merged_pair(WALLET, "toywallet.sol")
    sim = ChainState.with_genesis([0xA1])
    steps = [
        {"op": "create-target", "sender": "0xa1"},
        {"op": "call", "sig": "withdraw(uint256)", "args": [3], "sender": "0xa1"},
        {"op": "call", "sig": "deposit()", "sender": "0xa1", "value": 9},
    ]
    assert runtime_check(merged, steps, sim) == []
    assert sim.accounts[BASE_ADDRESS].balance == 9


def test_unknown_op_aborts_with_a_script_finding():
    merged = merged_pair(WALLET, "toywallet.sol")
    sim = ChainState.with_genesis([0xA1])
    steps = [
        {"op": "create-target", "sender": "0xa1"},
        {"op": "frobnicate"},
        {"op": "call", "sig": "deposit()", "sender": "0xa1", "value": 9},
    ]
    findings = runtime_check(merged, steps, sim)
    assert [(f.category, f.site) for f in findings] == [(VRE, "scenario")]
    assert len(findings[0].trace) == 2
    assert sim.accounts[BASE_ADDRESS].balance == 0  # the deposit never ran


def test_undefined_binding_aborts_with_a_script_finding():
    merged = merged_pair(WALLET, "toywallet.sol")
    steps = [
        {"op": "create-target", "sender": "0xa1"},
        {"op": "call", "addr": "$nobody", "sig": "deposit()", "sender": "0xa1"},
    ]
    findings = runtime_check(merged, steps)
    assert [(f.category, f.site) for f in findings] == [(VRE, "scenario")]
    assert "$nobody" in findings[0].message


def test_call_without_signature_is_a_script_finding():
    merged = merged_pair(WALLET, "toywallet.sol")
    findings = runtime_check(merged, [{"op": "call", "args": []}])
    assert [(f.category, f.site) for f in findings] == [(VRE, "scenario")]


def test_simulator_error_aborts_with_a_simulator_finding():
    merged = merged_pair(WALLET, "toywallet.sol")
    steps = [
        {"op": "create-target", "sender": "0xa1"},
        {"op": "call", "sig": "nosuch()", "sender": "0xa1"},
        {"op": "call", "sig": "deposit()", "sender": "0xa1", "value": 1},
    ]
    findings = runtime_check(merged, steps)
    assert [(f.category, f.site) for f in findings] == [(VRE, "simulator")]
    assert len(findings[0].trace) == 2


# -- seeded states ----------------------------------------------------------


def test_seed_step_materializes_the_target_without_a_constructor():
    merged = merged_pair(WALLET, "toywallet.sol")
    sim = ChainState.with_genesis([0xA1])
    steps = [
        {"op": "seed", "storage": {"accs": {"0xa1": "0x7"}}, "balance": "0x7"},
        {"op": "call", "sig": "withdraw(uint256)", "args": [7], "sender": "0xa1"},
    ]
    assert runtime_check(merged, steps, sim) == []
    assert sim.accounts[BASE_ADDRESS].balance == 0
    assert sim.accounts[0xA1].balance > 0


def test_seed_naming_an_unknown_variable_is_a_script_finding():
    merged = merged_pair(WALLET, "toywallet.sol")
    findings = runtime_check(merged, [{"op": "seed", "storage": {"bogus": "0x1"}}])
    assert [(f.category, f.site) for f in findings] == [(VRE, "scenario")]


def test_predeployed_target_is_bound_without_a_create_step():
    merged = merged_pair(WALLET, "toywallet.sol")
    sim = ChainState.with_genesis([0xA1])
    from minisol.interp import Runner

    Runner(sim).run_create(merged.unit, [], 0xA1)
    findings = runtime_check(
        merged, [{"op": "call", "sig": "deposit()", "sender": "0xa1", "value": 4}], sim)
    assert findings == []
    assert sim.accounts[BASE_ADDRESS].balance == 4


# -- backend adapter --------------------------------------------------------


def test_runtime_backend_reports_pass_for_the_original_wallet():
    spec = spec_from_source(corpus_text(WALLET), WALLET)
    impl = parse_unit(corpus_text("toywallet.sol"), "toywallet.sol")
    backend = RuntimeBackend(attack_scenario())
    report = verify_creation(spec, impl, backend=backend)
    assert report.verdict == "PASS"
    assert report.backend == "runtime"


def test_runtime_backend_reports_fail_for_the_reentrant_wallet():
    spec = spec_from_source(corpus_text(WALLET), WALLET)
    impl = parse_unit(corpus_text("toywallet_reentrant.sol"), "toywallet_reentrant.sol")
    report = verify_creation(spec, impl, backend=RuntimeBackend(attack_scenario()))
    assert report.verdict == "FAIL"
    assert (SPV, BALANCE_POST) in categories(report.findings)


def test_runtime_backend_reuses_its_supplied_state_without_mutating_it():
    merged = merged_pair(WALLET, "toywallet.sol")
    spec = spec_from_source(corpus_text(WALLET), WALLET)
    impl = parse_unit(corpus_text("toywallet.sol"), "toywallet.sol")
    sim = ChainState.with_genesis([0xA1, 0xA2, 0xA3])
    backend = RuntimeBackend(attack_scenario(), sim=sim)
    first = verify_creation(spec, impl, backend=backend)
    second = verify_creation(spec, impl, backend=backend)
    assert first.verdict == second.verdict == "PASS"
    assert sim.accounts.keys() == {0xA1, 0xA2, 0xA3}  # untouched original


# -- oracle agreement with the exhaustive backend ---------------------------


def test_runtime_confirms_every_bounded_witness(sweep):
    """Every trace the bounded sweep attaches to a conclusive finding is a
    runnable scenario, and replaying it flags the same obligation — with no
    obligations flagged that the sweep did not also flag for that pair."""
    spec_of = dict((impl, spec) for spec, impl in BOUNDED_PAIRS)
    replayed = 0
    for (impl_name, mode), findings in sweep.items():
        conclusive = [f for f in findings if f.category in (SPV, IOU)]
        if not conclusive:
            continue
        merged = merged_pair(spec_of[impl_name], impl_name)
        bounded_sites = {(f.category, f.site) for f in conclusive}
        for finding in conclusive:
            assert finding.trace, f"{impl_name} [{mode}] {finding.site}: no trace"
            runtime_findings = runtime_check(merged, Scenario(steps=finding.trace))
            runtime_sites = {
                (f.category, f.site)
                for f in runtime_findings if f.category in (SPV, IOU)
            }
            assert (finding.category, finding.site) in runtime_sites
            assert runtime_sites <= bounded_sites
            replayed += 1
    assert replayed >= 8  # the corpus carries broken tokens in both modes
