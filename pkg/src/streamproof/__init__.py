"""Interactive proofs for queries over data streams.

A verifier that sees a stream of (index, delta) updates keeps a few field
elements, then checks a prover's answer about the resulting frequency
vector: moments, inner products, range sums, sub-vectors and the queries
reduced to them, heavy hitters, and frequency statistics such as F0.
"""

from .field import P
from .freqstat import FrequencyStatistic
from .harness import BenchReport, BenchRow, MutationStrategy, StreamSpec, generate_stream, run_attack, run_benchmark
from .lde import LdeAccumulator, LdeParams, lde_direct_eval
from .protocol import Outcome, ProtocolError, Rejected, Transcript, interact, replay
from .session import (PROTOCOLS, Query, Session, SessionProver, VerifierSketch, inner_product_via_f2,
                      query_fmax, query_reporting, run_aggregation, run_frequency_statistic,
                      run_heavy_hitters, run_query, run_subvector)
from .stream import FrequencyVector, StreamUpdate, read_stream
from .transport import TransportError, WireMessage, serve_prover, verify_remote

__version__ = "0.1.0"

__all__ = [
    "P", "FrequencyStatistic", "BenchReport", "BenchRow", "MutationStrategy", "StreamSpec",
    "generate_stream", "run_attack", "run_benchmark", "LdeAccumulator", "LdeParams", "lde_direct_eval",
    "Outcome", "ProtocolError", "Rejected", "Transcript", "interact", "replay", "PROTOCOLS", "Query",
    "Session", "SessionProver", "VerifierSketch", "inner_product_via_f2", "query_fmax",
    "query_reporting", "run_aggregation", "run_frequency_statistic", "run_heavy_hitters", "run_query",
    "run_subvector", "FrequencyVector", "StreamUpdate", "read_stream", "TransportError", "WireMessage",
    "serve_prover", "verify_remote",
]
