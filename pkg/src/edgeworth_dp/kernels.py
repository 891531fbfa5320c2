"""Backend selection for the Monte Carlo hot loop.

The compiled extension is used when it was built; setting the environment
variable ``EDGEWORTH_DP_PURE=1`` forces the numpy fallback.
"""

import os

from . import _kernels_py

# Samples per generator refill; shared by both backends so draws line up.
CHUNK = 256

if os.environ.get("EDGEWORTH_DP_PURE"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
pllr_partial_sums = (_compiled or _kernels_py).pllr_partial_sums
python_pllr_partial_sums = _kernels_py.pllr_partial_sums
compiled_pllr_partial_sums = None if _compiled is None else _compiled.pllr_partial_sums
