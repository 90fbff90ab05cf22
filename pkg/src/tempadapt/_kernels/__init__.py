"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; setting
``TEMPADAPT_PURE_PYTHON=1`` forces the numpy path.
"""

import os

from . import fallback

BACKEND = "python"
cell_forward = fallback.cell_forward
cell_backward = fallback.cell_backward

if os.environ.get("TEMPADAPT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _lstm_cell
    except ImportError:
        _lstm_cell = None
    if _lstm_cell is not None:
        BACKEND = "cython"
        cell_forward = _lstm_cell.cell_forward
        cell_backward = _lstm_cell.cell_backward


def compiled():
    """Return the compiled kernel module, or None when it was not built."""
    try:
        from . import _lstm_cell
    except ImportError:
        return None
    return _lstm_cell
