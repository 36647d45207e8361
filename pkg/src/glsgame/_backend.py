"""Selects the compiled evaluation kernel when available, else pure NumPy.

Set GLSGAME_FORCE_PURE=1 to skip the compiled extension (used by the
benchmark and by tests that compare the two backends).
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .model import COST_CUSTOM, F_LINEAR_MAP

_compiled = None
if os.environ.get("GLSGAME_FORCE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

BACKEND = _compiled.BACKEND_NAME if _compiled is not None else _kernels_py.BACKEND_NAME


def compiled_available():
    return _compiled is not None


def _encode_costs(costs, n_types):
    """Flatten built-in cost parameters for the compiled kernel.

    Returns None when a custom (Python-callable) cost is present, which
    forces the pure backend for that objective.
    """
    if costs is None:
        kinds = [0] * n_types
        return kinds, [], [0] * (n_types + 1)
    kinds, params, offsets = [], [], [0]
    for cost in costs:
        if cost.kind == COST_CUSTOM:
            return None
        kinds.append(cost.kind)
        params.extend(cost.params)
        offsets.append(len(params))
    return kinds, params, offsets


def make_objective(points, weights, costs, scal, kappa, force=None):
    """Weighted-objective evaluator; see _kernels_py.WeightedObjective.

    `force` may be "python" or "cython" to pin a backend (benchmarks/tests).
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    backend = force or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel requested but not built")
        enc = _encode_costs(costs, weights.shape[0])
        if enc is not None:
            f_weight = scal.weight if scal.kind == F_LINEAR_MAP else None
            return _compiled.WeightedObjective(
                points, weights, kappa, enc[0], enc[1], enc[2],
                scal.kind, scal.q, f_weight,
            )
        if force == "cython":
            raise RuntimeError("custom costs cannot run on the compiled kernel")
    return _kernels_py.WeightedObjective(points, weights, costs, scal, kappa)
