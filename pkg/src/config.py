"""
ctxkit runtime configuration
Defaults for tolerances, caps and parallelism, read once from the environment.
Command-line flags override these values per run.
"""

import os
import sys


def _env_float(name: str, default: str) -> float:
    raw = os.environ.get(name, default)
    try:
        return float(raw)
    except ValueError:
        print(f"⚠️ Ignoring {name}={raw!r}: not a number, using {default}", file=sys.stderr)
        return float(default)


def _env_int(name: str, default: str) -> int:
    raw = os.environ.get(name, default)
    try:
        return int(raw)
    except ValueError:
        print(f"⚠️ Ignoring {name}={raw!r}: not an integer, using {default}", file=sys.stderr)
        return int(default)


# Tolerances
EPS_NORM = _env_float('CTXKIT_EPS_NORM', '1e-9')
EPS_ND = _env_float('CTXKIT_EPS_ND', '1e-9')
EPS_LP = _env_float('CTXKIT_EPS_LP', '1e-8')
RC_TOL = _env_float('CTXKIT_RC_TOL', '1e-6')
RC_MAX_ITER = _env_int('CTXKIT_RC_MAX_ITER', '100000')

# Enumerations (strategies, complementary hypergraphs) stop here
ENUM_CAP = _env_int('CTXKIT_ENUM_CAP', str(2 ** 20))

# 0 = let the executor decide
THREADS = _env_int('CTXKIT_THREADS', '0')

DEFAULT_SEED = 0


def worker_count() -> int:
    """Number of threads for instance sweeps, honouring CTXKIT_THREADS"""
    if THREADS > 0:
        return THREADS
    return min(8, os.cpu_count() or 1)
