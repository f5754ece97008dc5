"""Repository-wide constants and the JIT switch.

``TAGPLAN_JIT=1`` in the environment routes the reachability and mutex
kernels through numba.  The default is the interpreted path: numba's
compile-and-load overhead (a few hundred milliseconds even with a warm
cache) dominates on desk-scale tasks.
"""

from __future__ import annotations

import os

# cost given to actions whose effects leave the metric unchanged
EPSILON_COST = 0.01

GROUNDING_CAP = 2_000_000
ORACLE_STATE_CAP = 200_000

# numeric comparison tolerance for `=` and schedule checks
NUM_TOL = 1e-9


def jit_enabled() -> bool:
    flag = os.environ.get("TAGPLAN_JIT", "0").strip().lower()
    return flag in ("1", "true", "yes", "on")
