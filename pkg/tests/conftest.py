"""Force single-threaded BLAS before numpy is imported anywhere.

The package's determinism contract (and the timed acceptance run) assume
single-threaded numerics; pytest imports this file before any test module.
"""
import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
