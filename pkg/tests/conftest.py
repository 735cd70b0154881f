"""Shared test setup.

The thread-count cap of the JIT runtime is fixed at import time, so it
must be raised before the package (and transitively numba) is imported;
the benchmark tests want at least 4 threads even on small CI hosts.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "4")
