"""Quality improvement for tetrahedral meshes.

Smoothing, edge removal and 2-3/3-2 flips handle most bad elements; the
rest are retiled by growing a small cavity around them and searching its
best tetrahedralisation. A Moore-curve partitioned scheduler runs the
sweeps on one or more workers.
"""

from .estimator import MeshImprover, MeshQuality
from .exceptions import *  # noqa: F401,F403
from .gsc import extend_cavity, gsc
from .io import (
    emit_report,
    generate_test_mesh,
    quality_report,
    read_mesh,
    write_mesh,
)
from .local_ops import (
    build_triangulation_tables,
    edge_removal,
    flip_2_3,
    flip_3_2,
    get_edge_ring,
    smooth_vertex,
)
from .mesh import TetMesh, build_adjacency, extract_cavity, get_bad_tetrahedra, replace_cavity
from .predicates import orient3d
from .quality import cavity_quality, dihedral_angles, gamma, sicn
from .scheduler import improve, make_partitions, moore_index, reproducible_reorder
from .spr import SPRState, candidate_tet_valid, spr_search
from .validation import check_mesh

__version__ = "0.1.0"
