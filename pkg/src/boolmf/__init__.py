"""Boolean matrix factorization and completion by belief propagation."""
from .core import as_bool_matrix, boolean_product, masked_error, reconstruction_error, xor_product
from .engine import (
    EngineConfig,
    FactorizationResult,
    MessageState,
    compute_marginals,
    init_messages,
    map_sweep,
    run_map,
    threshold_assign,
)
from .errors import (
    BoolMFError,
    DimensionError,
    FormatError,
    InstanceTooLargeError,
    InvalidChannelError,
)
from .marginal import DecimationConfig, run_marginal_map, sum_product_sweep
from .model import (
    ERASED,
    L_MAX,
    Channel,
    Observation,
    Priors,
    apply_channel,
    channel_log_ratio,
    posterior_log_score,
)
from .oracle import exact_map, exact_marginals
from .synth import SweepGrid, SweepRow, balanced_density, generate_instance, info_bound, run_sweep

__version__ = "0.1.0"

__all__ = [
    "as_bool_matrix", "boolean_product", "xor_product", "reconstruction_error", "masked_error",
    "EngineConfig", "FactorizationResult", "MessageState", "init_messages", "map_sweep",
    "compute_marginals", "threshold_assign", "run_map",
    "BoolMFError", "DimensionError", "FormatError", "InstanceTooLargeError",
    "InvalidChannelError",
    "DecimationConfig", "sum_product_sweep", "run_marginal_map",
    "L_MAX", "ERASED", "Priors", "Channel", "Observation", "apply_channel",
    "channel_log_ratio", "posterior_log_score",
    "exact_map", "exact_marginals",
    "balanced_density", "generate_instance", "info_bound", "SweepGrid", "SweepRow", "run_sweep",
    "__version__",
]
