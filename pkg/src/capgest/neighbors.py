"""Backend selection for exact nearest-neighbor search.

The compiled extension is used when importable; otherwise the numpy
implementation takes over.  ``CAPGEST_NEIGHBOR_BACKEND=numpy|cython`` forces
a backend (forcing ``cython`` fails loudly when the extension is missing).
"""

from __future__ import annotations

import os

from . import _neighbors_np

_forced = os.environ.get("CAPGEST_NEIGHBOR_BACKEND", "").strip().lower()

if _forced == "numpy":
    BACKEND = "numpy"
    query_topk = _neighbors_np.query_topk
else:
    try:
        from . import _neighbors_cy

        BACKEND = "cython"
        query_topk = _neighbors_cy.query_topk
    except ImportError:
        if _forced == "cython":
            raise
        BACKEND = "numpy"
        query_topk = _neighbors_np.query_topk
