"""Kernel backend selection.

Imports the compiled Cython kernels when they are available and falls
back to the pure-numpy implementation otherwise.  Set the environment
variable ``OSELEDETS_LAB_BACKEND`` to ``py`` or ``cy`` to force a
specific backend (forcing ``cy`` raises if the extension is missing).
``BACKEND`` names the implementation actually in use.
"""

from __future__ import annotations

import os

_FORCE = os.environ.get("OSELEDETS_LAB_BACKEND", "").strip().lower()

if _FORCE not in ("", "py", "cy"):
    raise ImportError(
        f"OSELEDETS_LAB_BACKEND={_FORCE!r} not understood (use 'py' or 'cy')"
    )

if _FORCE == "py":
    from oseledets_lab._kernels import _pykernels as _impl
else:
    try:
        from oseledets_lab._kernels import _cykernels as _impl  # type: ignore
    except ImportError:
        if _FORCE == "cy":
            raise ImportError(
                "compiled kernels requested via OSELEDETS_LAB_BACKEND=cy "
                "but the extension module is not built"
            )
        from oseledets_lab._kernels import _pykernels as _impl

BACKEND = _impl.BACKEND

KIND_TORAL = _impl.KIND_TORAL
KIND_PERTURBED = _impl.KIND_PERTURBED
KIND_HENON = _impl.KIND_HENON
ESCAPE_NORM = _impl.ESCAPE_NORM

jacobian = _impl.jacobian
orbit_forward = _impl.orbit_forward
orbit_backward = _impl.orbit_backward
qr_log_history = _impl.qr_log_history
push_frame = _impl.push_frame
push_frame_steps = _impl.push_frame_steps

__all__ = [
    "BACKEND",
    "KIND_TORAL",
    "KIND_PERTURBED",
    "KIND_HENON",
    "ESCAPE_NORM",
    "jacobian",
    "orbit_forward",
    "orbit_backward",
    "qr_log_history",
    "push_frame",
    "push_frame_steps",
]
