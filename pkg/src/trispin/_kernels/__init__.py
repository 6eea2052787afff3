"""Hot loop for quantum-jump sampling, with backend selection.

``advance`` steps a trajectory through up to ``max_events`` jumps.  The
compiled extension is preferred when present; the pure-Python fallback
implements the identical algorithm.  Set ``TRISPIN_MCWF_BACKEND`` to
``compiled`` or ``python`` to force a backend (``auto`` or unset picks the
compiled one when available).
"""

import os

_requested = os.environ.get("TRISPIN_MCWF_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from ._mcwf import advance
        BACKEND = "compiled"
    except ImportError:
        from ._mcwf_py import advance
        BACKEND = "python"
elif _requested in ("compiled", "c", "cython"):
    from ._mcwf import advance
    BACKEND = "compiled"
elif _requested in ("python", "py"):
    from ._mcwf_py import advance
    BACKEND = "python"
else:
    raise ImportError(
        f"unknown TRISPIN_MCWF_BACKEND value {_requested!r}; "
        "use 'compiled', 'python', or 'auto'"
    )

__all__ = ["advance", "BACKEND"]
