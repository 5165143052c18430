"""Selection of the trajectory kernel.

The compiled kernel is used when it was built; otherwise the numpy fallback.
``CAPAX_BACKEND=python`` forces the fallback, ``CAPAX_BACKEND=compiled``
makes a missing extension an error.
"""

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def get_backend(name: str | None = None):
    """Return ``(name, module)`` of the requested or default kernel."""
    name = name or os.environ.get("CAPAX_BACKEND", "auto")
    if name == "auto":
        name = "compiled" if _compiled is not None else "python"
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} is not available (have {sorted(BACKENDS)})")
    return name, BACKENDS[name]


def available_backends() -> list[str]:
    return sorted(BACKENDS)
