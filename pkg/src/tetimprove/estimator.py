"""Estimator-style front end in the scikit-learn mould."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .io import quality_report
from .quality import batch_dihedral_angles, batch_gamma, batch_sicn
from .scheduler import DEFAULT_THRESHOLD, improve
from .spr import DEFAULT_NODE_BUDGET, MAX_POINTS
from .validation import check_mesh, check_threshold, check_workers

__all__ = ["MeshImprover", "MeshQuality"]


class MeshImprover(TransformerMixin, BaseEstimator):
    """Improve tetrahedral meshes by smoothing, edge removal and cavity retiling.

    Parameters
    ----------
    threshold : float, default=0.35
        Tetrahedra with gamma below this are targeted.
    n_workers : int, default=1
        Maximum concurrent workers; 1 is serial and deterministic.
    reproducible : bool, default=False
        Canonically reorder the tetrahedra of the result.
    max_points : int, default=32
        Point cap for a grown cavity.
    node_budget : int, default=100000
        Search-node cap for each cavity retiling.
    check_invariants : bool, default=False
        Audit the mesh after every sweep.

    Attributes
    ----------
    mesh_ : TetMesh
        The improved mesh from the last :meth:`fit`.
    result_ : ImproveResult
        Sweep counters and the operation log.
    report_ : QualityReport
        Histograms and summary of ``mesh_``.

    Examples
    --------
    >>> from tetimprove import MeshImprover, generate_test_mesh
    >>> mesh = generate_test_mesh(4, 0.45, seed=1)
    >>> est = MeshImprover().fit(mesh)
    >>> est.result_.bad_after
    0
    """

    def __init__(self, threshold=DEFAULT_THRESHOLD, n_workers=1, reproducible=False,
                 max_points=MAX_POINTS, node_budget=DEFAULT_NODE_BUDGET,
                 check_invariants=False):
        self.threshold = threshold
        self.n_workers = n_workers
        self.reproducible = reproducible
        self.max_points = max_points
        self.node_budget = node_budget
        self.check_invariants = check_invariants

    def _improve(self, X):
        threshold = check_threshold(self.threshold)
        workers = check_workers(self.n_workers)
        max_points = check_workers(self.max_points, "max_points")
        if max_points > MAX_POINTS or max_points < 5:
            raise ValueError(f"max_points must lie in [5, {MAX_POINTS}], got {max_points}")
        budget = check_workers(self.node_budget, "node_budget")
        mesh = check_mesh(X, copy=True)
        return improve(mesh, threshold, max_workers=workers, reproducible=self.reproducible,
                       max_points=max_points, node_budget=budget,
                       check=self.check_invariants)

    def fit(self, X, y=None):
        """Improve a copy of ``X`` and keep it as ``mesh_``."""
        self.mesh_, self.result_ = self._improve(X)
        self.report_ = quality_report(self.mesh_, self.threshold,
                                      bad_before=self.result_.bad_before,
                                      sweeps=self.result_.sweeps,
                                      modifications=self.result_.modifications)
        return self

    def transform(self, X):
        """Return an improved copy of ``X``; the input is left untouched."""
        check_is_fitted(self, "mesh_")
        return self._improve(X)[0]

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).mesh_


class MeshQuality(TransformerMixin, BaseEstimator):
    """Per-tetrahedron quality table.

    Parameters
    ----------
    measures : tuple of str
        Columns to emit, from ``"gamma"``, ``"sicn"``, ``"min_dihedral"``
        and ``"max_dihedral"`` (degrees).
    """

    _KNOWN = ("gamma", "sicn", "min_dihedral", "max_dihedral")

    def __init__(self, measures=("gamma", "sicn")):
        self.measures = measures

    def fit(self, X, y=None):
        unknown = [m for m in self.measures if m not in self._KNOWN]
        if unknown or not len(self.measures):
            raise ValueError(f"unknown or empty measures {unknown}; choose from {self._KNOWN}")
        self.n_features_out_ = len(self.measures)
        return self

    def transform(self, X):
        """Array of shape ``(n_tets, len(measures))`` in live-tetrahedron order."""
        check_is_fitted(self, "n_features_out_")
        mesh = check_mesh(X, copy=False)
        tets = mesh.tet_array()
        cols = []
        dihedral = None
        for m in self.measures:
            if m == "gamma":
                cols.append(batch_gamma(mesh.points, tets))
            elif m == "sicn":
                cols.append(batch_sicn(mesh.points, tets))
            else:
                if dihedral is None:
                    dihedral = batch_dihedral_angles(mesh.points, tets)
                cols.append(dihedral.min(axis=1) if m == "min_dihedral" else dihedral.max(axis=1))
        return np.column_stack(cols)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.measures, dtype=object)
