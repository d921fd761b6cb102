"""MiniSol toolchain: contract frontend, spec model, conformance checking,
chain simulation, verifier backends, proxy generation and trusted deployment."""

__version__ = "0.1.0"

from .frontend import canonical_signature, parse_unit

__all__ = ["parse_unit", "canonical_signature", "__version__"]
