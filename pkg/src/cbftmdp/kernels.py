"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``CBFTMDP_PURE_PYTHON=1`` is set, the pure-Python implementation is used.
"""

import importlib
import logging
import os

log = logging.getLogger(__name__)


def load(pure: bool = False):
    if pure or os.environ.get("CBFTMDP_PURE_PYTHON", "") not in ("", "0"):
        return importlib.import_module("cbftmdp._pykernels")
    try:
        return importlib.import_module("cbftmdp._kernels")
    except ImportError:
        log.debug("compiled kernels unavailable, using pure-Python fallback")
        return importlib.import_module("cbftmdp._pykernels")


backend = load()
BACKEND = "compiled" if backend.__name__.endswith("._kernels") else "python"
