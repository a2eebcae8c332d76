"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when
``LOCDENS_BACKEND=python`` is set, the numpy fallback is used.
"""

import os

from . import _kernels_py

INDICATOR, EPANECHNIKOV, TGAUSS = (
    _kernels_py.INDICATOR,
    _kernels_py.EPANECHNIKOV,
    _kernels_py.TGAUSS,
)

KERNEL_CODES = {
    "indicator": INDICATOR,
    "epanechnikov_product": EPANECHNIKOV,
    "truncated_gaussian": TGAUSS,
}


def _load():
    if os.environ.get("LOCDENS_BACKEND", "").lower() == "python":
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "cython"


_impl, BACKEND = _load()
window_stats = _impl.window_stats
box_muller = _impl.box_muller
