import pathlib

import pytest

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"

CONTRACT_FILES = sorted(p for p in CORPUS.glob("*.sol") if not p.name.endswith(".spec.sol"))
SPEC_FILES = sorted(CORPUS.glob("*.spec.sol"))
ALL_SOURCES = sorted(CORPUS.glob("*.sol"))

MODES = ("create", "upgrade")

BOUNDED_PAIRS = [
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


@pytest.fixture
def corpus_dir():
    return CORPUS


def corpus_path(name):
    return CORPUS / name


def corpus_text(name):
    return (CORPUS / name).read_text()


def merged_pair(spec_name, impl_name, impl_source=None):
    from minisol.conformance import merge_spec
    from minisol.frontend import parse_unit
    from minisol.specmodel import spec_from_source

    spec = spec_from_source(corpus_text(spec_name), spec_name)
    source = impl_source if impl_source is not None else corpus_text(impl_name)
    impl = parse_unit(source, impl_name)
    return merge_spec(spec, impl)


def categories(findings):
    return {(f.category, f.site) for f in findings}


@pytest.fixture(scope="session")
def sweep():
    """One bounded run per (corpus pair, mode), shared by every module that
    asserts on sweep verdicts so each multi-second exploration happens
    exactly once per test session."""
    from minisol.bounded import BoundedConfig, bounded_check

    out = {}
    for spec_name, impl_name in BOUNDED_PAIRS:
        merged = merged_pair(spec_name, impl_name)
        for mode in MODES:
            out[impl_name, mode] = bounded_check(merged, BoundedConfig(), mode)
    return out
