"""Likelihood kernel backend selection.

The compiled extension (``_fast``) is preferred when present; the numpy
reference implementation is the fallback.  Selection can be forced with
the environment variable ``CHOICEPROFILER_KERNELS`` set to ``fast`` or
``reference``.
"""

import os

from . import reference


def _load():
    choice = os.environ.get("CHOICEPROFILER_KERNELS", "auto").lower()
    if choice not in ("auto", "fast", "reference"):
        raise ValueError(
            f"CHOICEPROFILER_KERNELS={choice!r}; expected auto, fast or reference"
        )
    if choice in ("auto", "fast"):
        try:
            from . import _fast
            return _fast, "fast"
        except ImportError:
            if choice == "fast":
                raise
    return reference, "reference"


_backend, backend_name = _load()

mnl_panel = _backend.mnl_panel
lc_panel = _backend.lc_panel
mmnl_panel = _backend.mmnl_panel
