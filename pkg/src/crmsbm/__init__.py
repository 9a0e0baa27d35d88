"""crmsbm: sparse block-structured multigraphs driven by generalized gamma
completely random measures.

The package covers the full loop: special functions for the weight measure
(`ggp`), forward network generation (`generate`), collapsed-likelihood MCMC
(`inference`), edge-list IO and holdout construction (`data`), link-prediction
and chain diagnostics (`evalmetrics`), an exact small-graph validation harness
(`validate`), and degree-corrected / plain block-model baselines (`baselines`).

Set CRMSBM_NUMBA=0 before import to run the pure-Python kernel fallback.
"""

from .ggp import (
    GgpParams,
    laplace_exponent,
    levy_density,
    levy_log_density,
    pochhammer_log,
    gamma_norm_log,
    stable_density,
    total_mass_density,
    sample_total_mass,
    zolotarev_a,
)
from .errors import CrmsbmError, NumericError, ResourceLimitError

__version__ = "0.1.0"

__all__ = [
    "GgpParams",
    "laplace_exponent",
    "levy_density",
    "levy_log_density",
    "pochhammer_log",
    "gamma_norm_log",
    "stable_density",
    "total_mass_density",
    "sample_total_mass",
    "zolotarev_a",
    "CrmsbmError",
    "NumericError",
    "ResourceLimitError",
    "__version__",
]
