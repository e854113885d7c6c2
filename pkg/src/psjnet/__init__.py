"""Shared-account cross-domain sequential recommendation with role-gated transfer."""

import os as _os

# PSJNET_THREADS caps BLAS threads too; this only takes effect when psjnet is
# imported before numpy (as with the console script).
_threads = _os.environ.get("PSJNET_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
