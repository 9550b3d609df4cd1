"""
Spectral SBM Defaults
=====================

Module-level tunables shared by the library, the harness and the CLI.
Everything here is a plain constant; run-level choices live in
``spectral_sbm.harness.ExperimentSpec``.
"""

import math
import os

###############################################################################
#                              NUMERICAL TOLERANCES                           #
###############################################################################
EIGEN_RESIDUAL_TOL = 1e-8      # ||M v - lambda v|| <= tol * (1 + |lambda|)
JACOBI_TOL = 1e-12             # off-diagonal Frobenius norm relative to ||M||_F
JACOBI_MAX_SWEEPS = 100
JACOBI_MAX_N = 64
SPECTRAL_NORM_TOL = 1e-10      # relative change of the power-iteration estimate
POWER_ITER_MAX = 20_000
WEYL_TOL = 1e-9                # slack for the eigenvalue sandwich, relative to ||B||

###############################################################################
#                                ORACLE CAPS                                  #
###############################################################################
MAX_MONOMIALS = 300_000        # n^t index lists per exhaustive enumeration
MAX_PARTITIONS = 10_000        # t^n assignments per exhaustive average
MAX_ENCODING_LENGTH = 8
DECOMPOSITION_MAX_N = 500

###############################################################################
#                           CALIBRATION ENVELOPES                             #
###############################################################################
# Asymptotic constants are replaced by these; raw values are always reported.
NORM_RATIO_BAR = 1.0           # ||M||_row, ||M'||_row, ||R^r||_row over Delta
STRUCTURE_SEPARATION_BAR = 2.0 # cross-cluster L^r row distance over Delta
ENTRY_BOUND_CONSTANT = 1.0     # stands in for C2
ENTRY_BOUND_LOG_POWER = 6      # exponent c in (ln n)^c
LR_BOUND_CONSTANT = 96.0
NOISE_NORM_BAR = 2.2           # ||R|| / (sigma sqrt(n))
PROJECTION_TOP_BAR = 0.5       # max |f_r lambda_i^r - 1|, i <= k
PROJECTION_TAIL_BAR = 1e-3     # max f_r |lambda_j|^r, j > k
RESIDUAL_BAR = 0.1             # power/projection residual over Delta
EXACT_IDENTITY_TOL = 1e-9
GROUP_SUM_TOL = 1e-10

###############################################################################
#                               ALGORITHM DEFAULTS                            #
###############################################################################
PEEL_MAX_ROUNDS = 16
SVD2_MAX_HALVING_ATTEMPTS = 2  # one draw plus one resample


def default_power(n: int) -> int:
    """r = ceil(ln n), at least 1."""
    if n <= 1:
        return 1
    return max(1, math.ceil(math.log(n)))


###############################################################################
#                                 ENVIRONMENT                                 #
###############################################################################
THREADS_ENV_VAR = "SPECTRAL_SBM_THREADS"


def default_threads() -> int:
    """Worker count from $SPECTRAL_SBM_THREADS, falling back to 1."""
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


###############################################################################
#                                 FILE FORMATS                                #
###############################################################################
FORMAT_VERSION = 1
CSV_SCHEMA_VERSION = 1
EDGE_SUFFIX = ".edges"
LABELS_SUFFIX = ".labels"
META_SUFFIX = ".meta.json"

###############################################################################
#                            VERIFY DEFAULT INSTANCES                         #
###############################################################################
# Per-audit instance parameters; the CLI overrides individual keys.
VERIFY_DEFAULTS = {
    "encodings": {"t": 4},
    "decomposition": {"n": 50, "k": 2, "p": 0.6, "q": 0.2, "r": 4},
    "group-sum": {"n": 6, "k": 2, "p": 0.6, "q": 0.2, "t": 2},
    "partition": {"n": 6, "k": 2, "p": 0.6, "q": 0.2, "t": 3},
    "class-partition": {"n": 5, "k": 2, "p": 0.6, "q": 0.2, "x": [1, 2, 1]},
    "entry-bound": {"n": 400, "k": 2, "p": 0.6, "q": 0.1, "t": 1},
    "lr-entry-bound": {"n": 400, "k": 2, "p": 0.6, "q": 0.1, "t": 1},
    "norm-lemmas": {"n": 300, "k": 2, "p": 0.8, "q": 0.1, "r": None},
    "projection-scaling": {"n": 600, "k": 2, "p": 0.9, "q": 0.1, "r": None},
    "noise-norm": {"n": 1000, "k": 4, "p": 0.5, "q": 0.1},
    "weyl": {"n": 200, "k": 4, "p": 0.5, "q": 0.1},
}

# Audits whose failure means a broken identity, not a weak envelope.
EXACT_AUDITS = frozenset(
    {"encodings", "decomposition", "group-sum", "partition", "class-partition", "weyl"}
)
