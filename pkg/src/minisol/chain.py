"""Chain state: accounts, balances, typed storage, event log, persistence.

Balances are plain Python ints.  Genesis funds each named account with
2**252 wei, so any realistic number of funded accounts keeps the total
supply below 2**256 and balance arithmetic never needs to wrap; value
conservation is checked exactly after every top-level operation.

The state hash covers accounts (balance, storage, code), the address
counter, and the committed event log.  The transaction log is persisted
for replay but excluded from the hash: replaying it must reproduce the
hash, so including it would be circular.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .nodes import ContractUnit, TypeExpr, zero_value

GENESIS_FUNDS = 2**252
BASE_ADDRESS = 0x1000


@dataclass
class Account:
    balance: int = 0
    storage: dict = field(default_factory=dict)
    code: ContractUnit | None = None


class ChainState:
    def __init__(self):
        self.accounts: dict[int, Account] = {}
        self.counter = 0
        self.events: list[dict] = []
        self.transactions: list[dict] = []
        self.genesis: dict[int, int] = {}

    @classmethod
    def with_genesis(cls, funded: list[int]) -> "ChainState":
        state = cls()
        for addr in funded:
            state.genesis[addr] = GENESIS_FUNDS
            state.accounts[addr] = Account(balance=GENESIS_FUNDS)
        return state

    def account(self, addr: int) -> Account:
        acct = self.accounts.get(addr)
        if acct is None:
            acct = Account()
            self.accounts[addr] = acct
        return acct

    def next_address(self) -> int:
        addr = BASE_ADDRESS + self.counter
        self.counter += 1
        return addr

    def total_wei(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    def clone(self) -> "ChainState":
        other = ChainState()
        other.counter = self.counter
        other.genesis = dict(self.genesis)
        other.events = list(self.events)
        other.transactions = list(self.transactions)
        other.accounts = {
            addr: Account(a.balance, _copy_storage(a.storage), a.code)
            for addr, a in self.accounts.items()
        }
        return other

    def restore(self, snapshot: "ChainState") -> None:
        self.accounts = snapshot.accounts
        self.counter = snapshot.counter
        self.events = snapshot.events
        self.transactions = snapshot.transactions
        self.genesis = snapshot.genesis

    def state_hash(self) -> str:
        blob = json.dumps(self._hash_view(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _hash_view(self) -> dict:
        accounts = {}
        for addr in sorted(self.accounts):
            acct = self.accounts[addr]
            storage = canonical_storage(acct.storage)
            code = code_hash(acct.code) if acct.code is not None else None
            if acct.balance == 0 and not storage and code is None:
                continue
            accounts[hex(addr)] = {
                "balance": hex(acct.balance),
                "storage": storage,
                "code": code,
            }
        return {
            "accounts": accounts,
            "counter": self.counter,
            "events": [_encode_event(e) for e in self.events],
        }


def _copy_storage(storage):
    if isinstance(storage, dict):
        return {k: _copy_storage(v) for k, v in storage.items()}
    if isinstance(storage, list):
        return [_copy_storage(v) for v in storage]
    return storage


def code_hash(unit: ContractUnit) -> str:
    source = getattr(unit, "source_text", "") or ""
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


# --- canonical value encoding (storage, event args, tx args) ---------------


def encode_value(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return hex(value)
    if isinstance(value, bytes):
        return {"b": value.hex()}
    if isinstance(value, str):
        return {"s": value}
    if isinstance(value, list):
        return [encode_value(v) for v in value]
    if isinstance(value, dict):
        return {hex(k) if isinstance(k, int) else str(k): encode_value(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    raise TypeError(f"cannot encode {type(value).__name__}")


def decode_value(blob):
    if isinstance(blob, bool):
        return blob
    if isinstance(blob, str):
        return int(blob, 16)
    if isinstance(blob, dict):
        if set(blob) == {"b"}:
            return bytes.fromhex(blob["b"])
        if set(blob) == {"s"}:
            return blob["s"]
        return {int(k, 16): decode_value(v) for k, v in blob.items()}
    if isinstance(blob, list):
        return [decode_value(v) for v in blob]
    raise TypeError(f"cannot decode {blob!r}")


def _is_zero(value) -> bool:
    if isinstance(value, bool):
        return value is False
    if isinstance(value, int):
        return value == 0
    if isinstance(value, (bytes, str, list)):
        return len(value) == 0
    if isinstance(value, dict):
        return all(_is_zero(v) for v in value.values())
    return False


def canonical_storage(storage: dict) -> dict:
    """Storage with zero entries canonicalized away, so an explicit zero
    write hashes the same as an untouched slot. Two logically equal storages
    (differing only in explicitly written zeros) encode identically, which
    makes this the state-identity key for exploration and hashing alike."""
    out = {}
    for name, value in sorted(storage.items()):
        pruned = _prune_zeros(value)
        if pruned is not None:
            out[name] = encode_value(pruned)
    return out


def _prune_zeros(value):
    if isinstance(value, dict):
        kept = {k: p for k, v in value.items() if (p := _prune_zeros(v)) is not None}
        return kept or None
    if _is_zero(value):
        return None
    return value


def _encode_event(event: dict) -> dict:
    return {
        "address": hex(event["address"]),
        "event": event["event"],
        "args": [encode_value(a) for a in event["args"]],
    }


def _decode_event(blob: dict) -> dict:
    return {
        "address": int(blob["address"], 16),
        "event": blob["event"],
        "args": [decode_value(a) for a in blob["args"]],
    }


# --- storage construction from declarations --------------------------------


def fresh_storage(unit: ContractUnit) -> dict:
    return {var.name: _fresh_slot(var.ty) for var in unit.vars}


def _fresh_slot(ty: TypeExpr):
    if ty.kind == "mapping":
        return {}
    return zero_value(ty)


def storage_read(storage: dict, unit: ContractUnit, name: str):
    if name not in storage:
        var = unit.var(name)
        storage[name] = _fresh_slot(var.ty)
    return storage[name]


# --- persistence -----------------------------------------------------------


def save_chain(state: ChainState, path: str) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    code_table = {}
    accounts = []
    for addr in sorted(state.accounts):
        acct = state.accounts[addr]
        ref = None
        if acct.code is not None:
            ref = code_hash(acct.code)
            code_table[ref] = getattr(acct.code, "source_text", "")
        accounts.append(
            {
                "address": hex(addr),
                "balance": hex(acct.balance),
                "storage": canonical_storage(acct.storage),
                "code": ref,
            }
        )
    blob = {
        "schema": 1,
        "counter": state.counter,
        "genesis": {hex(k): hex(v) for k, v in sorted(state.genesis.items())},
        "accounts": accounts,
        "code": code_table,
        "events": [_encode_event(e) for e in state.events],
        "transactions": state.transactions,
    }
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(blob, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_chain(path: str) -> ChainState:
    from .frontend import parse_unit

    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("schema") != 1:
        raise ValueError(f"unsupported chain file schema {blob.get('schema')!r}")
    units = {ref: parse_unit(src, origin=f"chain:{ref[:12]}") for ref, src in blob["code"].items()}
    state = ChainState()
    state.counter = blob["counter"]
    state.genesis = {int(k, 16): int(v, 16) for k, v in blob["genesis"].items()}
    for entry in blob["accounts"]:
        unit = units[entry["code"]] if entry["code"] else None
        storage = {}
        if unit is not None:
            storage = fresh_storage(unit)
            for name, enc in entry["storage"].items():
                storage[name] = decode_value(enc)
        state.accounts[int(entry["address"], 16)] = Account(
            balance=int(entry["balance"], 16), storage=storage, code=unit
        )
    state.events = [_decode_event(e) for e in blob["events"]]
    state.transactions = blob["transactions"]
    return state
