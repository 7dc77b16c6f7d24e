"""Input validation shared by the estimator API."""

import numbers

import numpy as np

from .exceptions import InvalidMesh
from .mesh import TetMesh

__all__ = ["check_mesh", "check_threshold", "check_workers"]


def check_mesh(X, copy=True):
    """Coerce ``X`` into a :class:`TetMesh`.

    Parameters
    ----------
    X : TetMesh, tuple or dict
        A mesh, ``(points, tets)``, ``(points, tets, surface)``, or a dict
        with ``points``, ``tets`` and optionally ``surface`` keys.
    copy : bool
        Copy a :class:`TetMesh` input instead of returning it.

    Raises
    ------
    InvalidMesh
        Wrong shapes, out-of-range indices or non-positive tetrahedra.
    TypeError
        ``X`` is none of the accepted forms.
    """
    if isinstance(X, TetMesh):
        return X.copy() if copy else X
    if isinstance(X, dict):
        if "points" not in X or "tets" not in X:
            raise InvalidMesh("mesh dict needs 'points' and 'tets'")
        parts = (X["points"], X["tets"], X.get("surface"))
    elif isinstance(X, (tuple, list)) and len(X) in (2, 3):
        parts = tuple(X) + (None,) * (3 - len(X))
    else:
        raise TypeError(f"expected a TetMesh, (points, tets[, surface]) or dict, got {type(X).__name__}")
    points, tets, surface = parts
    points = np.asarray(points, dtype=float)
    tets = np.asarray(tets)
    if points.ndim != 2 or points.shape[1] != 3:
        raise InvalidMesh(f"points must have shape (n, 3), got {points.shape}")
    if tets.ndim != 2 or tets.shape[1] != 4:
        raise InvalidMesh(f"tets must have shape (m, 4), got {tets.shape}")
    if not np.issubdtype(tets.dtype, np.integer):
        raise InvalidMesh("tets must hold integer vertex indices")
    if len(tets) == 0:
        raise InvalidMesh("mesh has no tetrahedra")
    return TetMesh(points, tets, surface)


def check_threshold(value, name="threshold"):
    if not isinstance(value, numbers.Real) or not 0.0 < float(value) <= 1.0:
        raise ValueError(f"{name} must be a real number in (0, 1], got {value!r}")
    return float(value)


def check_workers(value, name="n_workers"):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
