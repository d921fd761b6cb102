import pytest

from minisol import parse_unit
from minisol.chain import ChainState
from minisol.interp import Runner
from minisol.specmodel import spec_from_source
from minisol.speceval import (
    SpecEvalError,
    context_for_call,
    context_for_state,
    evaluate,
    holds,
)

from conftest import corpus_text

A1, A2, A3 = 0xA1, 0xA2, 0xA3


@pytest.fixture(scope="module")
def wallet_spec():
    return spec_from_source(corpus_text("toywallet.spec.sol"), origin="spec")


def deploy(source_name, args=(), funded=(A1, A2, A3)):
    state = ChainState.with_genesis(list(funded))
    runner = Runner(state)
    unit = parse_unit(corpus_text(source_name), origin=source_name)
    addr, receipt = runner.run_create(unit, list(args), sender=A1)
    assert receipt.status == "success"
    return state, unit, addr


def watch_call(state, unit, addr, sig, args, sender, value=0):
    runner = Runner(state, watch_addr=addr)
    receipt = runner.run_call(addr, sig, args, sender=sender, value=value)
    assert receipt.status == "success"
    return receipt.frames


def frame_context(spec, unit, addr, frame):
    spec_fn = spec.functions[frame.sig].decl
    return context_for_call(
        spec_fn, unit, addr, frame.pre, frame.post,
        frame.sender, frame.value, frame.args, frame.returns,
    )


def test_clean_withdraw_satisfies_all_postconditions(wallet_spec):
    state, unit, addr = deploy("toywallet.sol")
    Runner(state).run_call(addr, "deposit()", [], sender=A1, value=10)
    frames = watch_call(state, unit, addr, "withdraw(uint256)", [4], sender=A1)
    ctx = frame_context(wallet_spec, unit, addr, frames[0])
    for ob in wallet_spec.functions["withdraw(uint256)"].postconditions:
        assert holds(ob.expr, ctx), ob.text


def test_deposit_frame_condition_protects_other_accounts(wallet_spec):
    state, unit, addr = deploy("toywallet.sol")
    Runner(state).run_call(addr, "deposit()", [], sender=A2, value=7)
    frames = watch_call(state, unit, addr, "deposit()", [], sender=A1, value=10)
    ctx = frame_context(wallet_spec, unit, addr, frames[0])
    for ob in wallet_spec.functions["deposit()"].postconditions:
        assert holds(ob.expr, ctx), ob.text


def test_reentrant_outer_frame_violates_balance_postcondition(wallet_spec):
    state, unit, addr = deploy("toywallet_reentrant.sol")
    runner = Runner(state)
    runner.run_call(addr, "deposit()", [], sender=A2, value=30)
    att_unit = parse_unit(corpus_text("attacker_once.sol"), origin="a")
    att, _ = runner.run_create(att_unit, [addr], sender=A3)
    runner.run_call(att, "prime()", [], sender=A3, value=20)
    watch = Runner(state, watch_addr=addr)
    receipt = watch.run_call(att, "attack(uint256)", [10], sender=A3)
    inner, outer = receipt.frames

    posts = wallet_spec.functions["withdraw(uint256)"].postconditions
    inner_ctx = frame_context(wallet_spec, unit, addr, inner)
    assert all(holds(ob.expr, inner_ctx) for ob in posts)

    outer_ctx = frame_context(wallet_spec, unit, addr, outer)
    verdicts = [holds(ob.expr, outer_ctx) for ob in posts]
    # Balance dropped 50 -> 30 while the spec allows only old - value = 40;
    # the account postcondition breaks the same way.  The frame condition
    # (other accounts untouched) still holds.
    assert verdicts == [False, False, True]
    assert not outer.wraps


def test_invariant_evaluation(wallet_spec):
    state, unit, addr = deploy("toywallet.sol")
    inv = wallet_spec.invariants[0]
    assert holds(inv.expr, context_for_state(unit, addr, state))
    state.accounts[addr].storage["accs"] = {addr: 5}
    assert not holds(inv.expr, context_for_state(unit, addr, state))


def test_exact_arithmetic_sees_through_wrapped_subtraction():
    spec = spec_from_source(corpus_text("erc20.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc20_unchecked_transfer.sol", args=[100])
    frames = watch_call(state, unit, addr, "transfer(address,uint256)", [A2, 1], sender=A3)
    assert frames[0].wraps  # 0 - 1 wrapped in the implementation
    ctx = frame_context(spec, unit, addr, frames[0])
    first = spec.functions["transfer(address,uint256)"].postconditions[0]
    # Exact reading: old(balance) - value = -1, which the wrapped 2**256-1
    # cannot equal.
    assert not holds(first.expr, ctx)


def test_sum_over_tracked_keys():
    spec = spec_from_source(corpus_text("erc20.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc20.sol", args=[100])
    runner = Runner(state)
    runner.run_call(addr, "transfer(address,uint256)", [A2, 30], sender=A1)
    inv = spec.invariants[0]
    assert holds(inv.expr, context_for_state(unit, addr, state))
    # Tampering with one balance breaks the sum.
    state.accounts[addr].storage["balanceOf"][A2] = 31
    assert not holds(inv.expr, context_for_state(unit, addr, state))


def test_old_reads_pre_state():
    spec = spec_from_source(corpus_text("erc20.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc20.sol", args=[100])
    frames = watch_call(state, unit, addr, "transfer(address,uint256)", [A2, 30], sender=A1)
    ctx = frame_context(spec, unit, addr, frames[0])
    posts = spec.functions["transfer(address,uint256)"].postconditions
    assert all(holds(ob.expr, ctx) for ob in posts)
    assert frames[0].pre.accounts[addr].storage["balanceOf"] == {A1: 100}
    assert frames[0].post.accounts[addr].storage["balanceOf"] == {A1: 70, A2: 30}


def test_array_quantifier_over_batch_balances():
    spec = spec_from_source(corpus_text("erc1155.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc1155.sol")
    state.accounts[addr].storage["_balances"] = {1: {A1: 10}, 2: {A1: 4}}
    frames = watch_call(
        state, unit, addr, "balanceOfBatch(address[],uint256[])", [[A1, A1, A2], [1, 2, 1]], sender=A2
    )
    ctx = frame_context(spec, unit, addr, frames[0])
    for ob in spec.functions["balanceOfBatch(address[],uint256[])"].postconditions:
        assert holds(ob.expr, ctx), ob.text
    assert frames[0].returns == ([10, 4, 0],)


def test_self_transfer_escape_clause():
    spec = spec_from_source(corpus_text("erc20.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc20.sol", args=[100])
    frames = watch_call(state, unit, addr, "transfer(address,uint256)", [A1, 40], sender=A1)
    ctx = frame_context(spec, unit, addr, frames[0])
    posts = spec.functions["transfer(address,uint256)"].postconditions
    assert all(holds(ob.expr, ctx) for ob in posts)


def test_quantifier_domain_stability_under_unrelated_accounts(wallet_spec):
    # Seeding extra untouched accounts must not flip any verdict: absent keys
    # read as zero in both states, so frame conditions hold for them.
    def run(extra_accounts):
        state, unit, addr = deploy("toywallet.sol")
        runner = Runner(state)
        for i, acct in enumerate(extra_accounts):
            state.accounts[addr].storage.setdefault("accs", {})
            runner.run_call(addr, "deposit()", [], sender=acct, value=1 + i)
        frames = watch_call(state, unit, addr, "withdraw(uint256)", [1], sender=extra_accounts[0])
        ctx = frame_context(wallet_spec, unit, addr, frames[0])
        return [holds(ob.expr, ctx) for ob in wallet_spec.functions["withdraw(uint256)"].postconditions]

    few = run([A1, A2])
    many = run([A1, A2, A3, 0xB1, 0xB2, 0xB3])
    assert few == many == [True, True, True]


def test_non_bool_result_rejected():
    from minisol.frontend import parse_spec_expression

    unit = parse_unit("contract C { uint x; function f() public { x = 0; } }", origin="t")
    state = ChainState.with_genesis([A1])
    ctx = context_for_state(unit, 0x1000, state)
    expr = parse_spec_expression("x + 1")
    assert evaluate(expr, ctx) == 1
    with pytest.raises(SpecEvalError):
        holds(expr, ctx)


def test_probe_set_doubling_preserves_verdicts(wallet_spec):
    # Quantifier probe sets are finite (tracked keys, bindings, sentinels).
    # Enlarging them with keys whose value is zero — semantically the very
    # same state — must not flip any obligation verdict.
    state, unit, addr = deploy("toywallet.sol")
    Runner(state).run_call(addr, "deposit()", [], sender=A1, value=10)
    frames = watch_call(state, unit, addr, "withdraw(uint256)", [4], sender=A1)
    frame = frames[0]
    obligations = (wallet_spec.functions["withdraw(uint256)"].postconditions
                   + wallet_spec.invariants)
    before = [holds(ob.expr, frame_context(wallet_spec, unit, addr, frame))
              for ob in obligations]
    for extra in (0xF00D, 0xBEEF, 0xCAFE, 0xD00D):
        for snap in (frame.pre, frame.post):
            snap.accounts[addr].storage["accs"][extra] = 0
    after = [holds(ob.expr, frame_context(wallet_spec, unit, addr, frame))
             for ob in obligations]
    assert after == before


def test_probe_set_doubling_preserves_sum_verdicts():
    spec = spec_from_source(corpus_text("erc20.spec.sol"), origin="spec")
    state, unit, addr = deploy("erc20.sol", args=[100])
    frames = watch_call(state, unit, addr, "transfer(address,uint256)",
                        [A2, 30], sender=A1)
    frame = frames[0]
    obligations = (spec.functions["transfer(address,uint256)"].postconditions
                   + spec.invariants)
    before = [holds(ob.expr, frame_context(spec, unit, addr, frame))
              for ob in obligations]
    for extra in (0xF00D, 0xBEEF):
        for snap in (frame.pre, frame.post):
            snap.accounts[addr].storage["balanceOf"][extra] = 0
            snap.accounts[addr].storage["allowance"][extra] = {0xCAFE: 0}
    after = [holds(ob.expr, frame_context(spec, unit, addr, frame))
             for ob in obligations]
    assert after == before
