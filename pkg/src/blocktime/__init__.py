"""Block-time toolkit: broadcast simulation, extreme-value analytics,
histogram fitting, timestamp ingestion, and a plotting/CLI front end.

The hot numerical kernels are compiled with numba when it is available; set
``BLOCKTIME_NO_NUMBA=1`` before import to force the pure-numpy fallback.
"""

__version__ = "0.1.0"

from ._accel import USING_NUMBA, backend_name
from .distributions import (
    EULER_GAMMA,
    GUMBEL_SKEWNESS,
    MAX_ORDER,
    BroadcastCoefficients,
    GumbelParams,
    MomentSummary,
    analytic_broadcast_mean,
    analytic_broadcast_variance,
    analytic_broadcast_variance_bound,
    approx_norm_constant,
    approx_pdf_k,
    check_order,
    exact_conv_pdf,
    gumbel_cdf,
    gumbel_ccdf,
    gumbel_pdf,
    gumbel_sample,
    harmonic_number,
    moments_approx,
    normal_limit_pdf,
    saddle_exponent,
    saddle_point_location,
)
from .errors import (
    BlocktimeError,
    DegenerateHistogramError,
    DomainError,
    FitError,
    FormatError,
    IngestError,
    IntegrityError,
    ProtocolError,
    QuadratureError,
    SchemaError,
    TransportError,
)
from .fitting import (
    FitOptions,
    FitResult,
    Histogram,
    TransferEstimate,
    approx_model_cdf,
    build_histogram,
    derive_transfer_time,
    fit_fk,
    freedman_diaconis_width,
    ks_statistic,
    moment_init,
    quorum_adjust,
    round_sig,
    sample_skewness,
)
from .ingest import (
    BlockRecord,
    BlockTimeSeries,
    CsvSchema,
    compute_intervals,
    fetch_blocks,
    format_rfc3339_ns,
    parse_csv,
    parse_rfc3339_ns,
    read_intervals_csv,
    serialize_csv,
    write_intervals_csv,
)
from .plotting import render_plot_svg
from .simulator import (
    CHUNK_RUNS,
    MonteCarloResult,
    PhaseTrace,
    QuorumMode,
    SimConfig,
    quorum_threshold,
    run_monte_carlo,
    simulate_block_time,
    simulate_broadcast,
    simulate_sojourn,
    sojourn_matrix,
    transition_prob,
    transition_probs,
)

__all__ = [
    "__version__",
    "USING_NUMBA",
    "backend_name",
    "EULER_GAMMA",
    "GUMBEL_SKEWNESS",
    "MAX_ORDER",
    "BroadcastCoefficients",
    "GumbelParams",
    "MomentSummary",
    "analytic_broadcast_mean",
    "analytic_broadcast_variance",
    "analytic_broadcast_variance_bound",
    "approx_norm_constant",
    "approx_pdf_k",
    "check_order",
    "exact_conv_pdf",
    "gumbel_cdf",
    "gumbel_ccdf",
    "gumbel_pdf",
    "gumbel_sample",
    "harmonic_number",
    "moments_approx",
    "normal_limit_pdf",
    "saddle_exponent",
    "saddle_point_location",
    "BlocktimeError",
    "DegenerateHistogramError",
    "DomainError",
    "FitError",
    "FormatError",
    "IngestError",
    "IntegrityError",
    "ProtocolError",
    "QuadratureError",
    "SchemaError",
    "TransportError",
    "FitOptions",
    "FitResult",
    "Histogram",
    "TransferEstimate",
    "approx_model_cdf",
    "build_histogram",
    "derive_transfer_time",
    "fit_fk",
    "freedman_diaconis_width",
    "ks_statistic",
    "moment_init",
    "quorum_adjust",
    "round_sig",
    "sample_skewness",
    "BlockRecord",
    "BlockTimeSeries",
    "CsvSchema",
    "compute_intervals",
    "fetch_blocks",
    "format_rfc3339_ns",
    "parse_csv",
    "parse_rfc3339_ns",
    "read_intervals_csv",
    "serialize_csv",
    "write_intervals_csv",
    "render_plot_svg",
    "CHUNK_RUNS",
    "MonteCarloResult",
    "PhaseTrace",
    "QuorumMode",
    "SimConfig",
    "quorum_threshold",
    "run_monte_carlo",
    "simulate_block_time",
    "simulate_broadcast",
    "simulate_sojourn",
    "sojourn_matrix",
    "transition_prob",
    "transition_probs",
]
