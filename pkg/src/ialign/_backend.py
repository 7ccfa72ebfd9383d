"""Inner-loop backend selection.

The compiled ``_kernels`` extension and the pure-NumPy ``_kernels_py``
module implement the same call contract.  The compiled one wins when it
imports cleanly; set ``IALIGN_BACKEND=python`` or
``IALIGN_BACKEND=compiled`` to force a choice (the latter raises when
the extension is missing rather than falling back silently).
"""

import os

_forced = os.environ.get("IALIGN_BACKEND", "").strip().lower()
if _forced not in ("", "compiled", "python"):
    raise ImportError(
        f"IALIGN_BACKEND={_forced!r} not understood; use 'compiled' or 'python'"
    )

if _forced == "python":
    from . import _kernels_py as kernels
elif _forced == "compiled":
    from . import _kernels as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND_NAME
