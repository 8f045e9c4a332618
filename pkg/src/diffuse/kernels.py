"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
reference loops take over. Set ``DIFFUSE_BACKEND=python`` to force the
fallback (``compiled`` makes a missing extension an import error).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_BACKENDS = {"python": _pykernels}

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None
else:
    _BACKENDS["compiled"] = _compiled


def available():
    """Names of the importable backends, fastest first."""
    return [name for name in ("compiled", "python") if name in _BACKENDS]


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the selected backend)."""
    if name is None:
        return backend
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {available()}") from None


def _select():
    wanted = os.environ.get("DIFFUSE_BACKEND", "").strip().lower()
    if wanted and wanted != "auto":
        return get_backend(wanted)
    if _compiled is None:
        log.info("compiled kernels unavailable, using the pure-Python fallback")
    return _BACKENDS[available()[0]]


backend = _select()
