"""Worker-process initializer kept free of numpy imports.

Spawned ensemble workers run this before any numerical module loads, so the
BLAS thread caps below take effect when OpenBLAS/MKL initialize.
"""

import os


def limit_blas_threads():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"
