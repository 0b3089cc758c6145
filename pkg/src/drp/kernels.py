"""Selects the compiled kernels when available, else the numpy fallback.

Set ``DRP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

IMPLEMENTATION = "python"
_impl = _pykernels

if os.environ.get("DRP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        IMPLEMENTATION = "cython"
    except ImportError:
        _impl = _pykernels

order_search = _impl.order_search
pivot = _impl.pivot
price_dantzig = _impl.price_dantzig
price_bland = _impl.price_bland
ratio_test = _impl.ratio_test
dual_ratio = _impl.dual_ratio

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4
