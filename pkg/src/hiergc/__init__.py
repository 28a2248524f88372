"""Hierarchical gradient coding over prime fields.

Workers send encoded partial gradients to relays, relays send re-encoded
messages to a server, and the server recovers the exact gradient sum despite
straggling and adversarial nodes at both layers. An optional private mode
masks every worker message with shared randomness the relays cannot cancel.
"""

from .audit import ClusterAudit, audit_all, audit_cluster, build_randomness_matrix
from .codec import (
    GradientSet,
    Message,
    RandomnessSet,
    generate_randomness,
    partition_pad,
    relay_aggregate,
    relay_aggregate_private,
    server_decode,
    server_decode_private,
    worker_encode,
    worker_encode_private,
)
from .errors import (
    AdversaryBudgetExceededError,
    ConfigurationError,
    DecodingError,
    HGCError,
    InvalidFaultPlanError,
    InvalidPlacementError,
    ModeError,
    TooManyPatternsError,
    UnsupportedConfigError,
)
from .gf import DEFAULT_Q, FieldElement
from .placement import (
    EvalPlan,
    Placement,
    RandomnessPlan,
    SystemParams,
    assign_randomness,
    compute_replication,
    default_eval_plan,
    generate_placement,
    margins,
    validate_randomness,
)
from .poly import EvalPoint, VectorPolynomial, error_erasure_decode, interpolate
from .sim import FaultPlan, RoundOutcome, check_loads, enumerate_fault_patterns, run_round, sweep

__version__ = "0.1.0"
