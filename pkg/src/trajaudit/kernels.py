"""Backend selection for the MLP kernels.

The compiled extension (``trajaudit._ckern``) is preferred when it built;
otherwise the pure-numpy fallback is used. Set ``TRAJAUDIT_PURE_PYTHON=1``
to force the fallback (used by the backend-parity tests and benchmark).
"""

import os

from trajaudit import _pykern

if os.environ.get("TRAJAUDIT_PURE_PYTHON"):
    _backend = _pykern
else:
    try:
        from trajaudit import _ckern as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _pykern

BACKEND_NAME = "compiled" if _backend.__name__.endswith("_ckern") else "python"

ACT_IDENTITY = _pykern.ACT_IDENTITY
ACT_RELU = _pykern.ACT_RELU
ACT_TANH = _pykern.ACT_TANH
ACT_SIGMOID = _pykern.ACT_SIGMOID

forward_batch = _backend.forward_batch
backward_batch = _backend.backward_batch
