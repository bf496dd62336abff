"""Batch kernels for Monte Carlo runs.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy fallback.  Set ``QTP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from qtp.kernels import _pykernels

python_kernels = _pykernels

compiled_kernels = None
if os.environ.get("QTP_PURE_PYTHON", "") in ("", "0"):
    try:
        from qtp.kernels import _ckernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

if compiled_kernels is not None:
    BACKEND = "cython"
    measure = compiled_kernels.measure
    three_pass = compiled_kernels.three_pass
    fidelity = compiled_kernels.fidelity
else:
    BACKEND = "python"
    measure = _pykernels.measure
    three_pass = _pykernels.three_pass
    fidelity = _pykernels.fidelity

__all__ = ["BACKEND", "measure", "three_pass", "fidelity", "python_kernels", "compiled_kernels"]
