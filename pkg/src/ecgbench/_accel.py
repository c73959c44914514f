"""Backend selection for the hot kernels.

numba is used when importable unless ``ECGBENCH_NUMBA`` is set to ``0``,
``false`` or ``off``; the pure-numpy twins are used otherwise.
"""

import logging
import os

from . import _kernels_numpy

logger = logging.getLogger(__name__)


def _numba_requested() -> bool:
    return os.environ.get("ECGBENCH_NUMBA", "1").strip().lower() not in ("0", "false", "off", "no")


def _load():
    if not _numba_requested():
        return _kernels_numpy, "numpy"
    try:
        from . import _kernels_numba
    except ImportError:  # numba missing or broken
        logger.warning("numba unavailable, falling back to numpy kernels")
        return _kernels_numpy, "numpy"
    return _kernels_numba, "numba"


kernels, BACKEND = _load()
