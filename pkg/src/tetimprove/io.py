"""Mesh files (MSH 2.2 ASCII subset, node/ele/face), test meshes and reports."""

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import InvalidMesh, ParseError, UnsupportedElement
from .mesh import TetMesh
from .quality import batch_dihedral_angles, batch_gamma, batch_sicn

__all__ = [
    "read_mesh",
    "write_mesh",
    "read_msh",
    "write_msh",
    "read_nodeele",
    "write_nodeele",
    "generate_test_mesh",
    "QualityReport",
    "quality_report",
    "emit_report",
    "FORMATS",
]

FORMATS = ("msh", "nodeele")
MSH_TRIANGLE = 2
MSH_TETRAHEDRON = 4


def _fmt(x):
    return format(float(x), ".17g")


def _guess_format(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".msh":
        return "msh"
    if ext in (".node", ".ele", ".face", ""):
        return "nodeele"
    raise ValueError(f"cannot infer mesh format from {path!r}; pass format explicitly")


def read_mesh(path, format=None):
    """Read a tetrahedral mesh; ``format`` is ``"msh"`` or ``"nodeele"``."""
    format = format or _guess_format(path)
    if format == "msh":
        return read_msh(path)
    if format == "nodeele":
        return read_nodeele(path)
    raise ValueError(f"unknown mesh format {format!r}; expected one of {FORMATS}")


def write_mesh(mesh, path, format=None, reproducible=False):
    format = format or _guess_format(path)
    if reproducible:
        from .scheduler import reproducible_reorder
        mesh = reproducible_reorder(mesh.copy())
    if format == "msh":
        return write_msh(mesh, path)
    if format == "nodeele":
        return write_nodeele(mesh, path)
    raise ValueError(f"unknown mesh format {format!r}; expected one of {FORMATS}")


def _build(points, tets, tris, path):
    try:
        return TetMesh(points, tets, tris if tris is not None else None)
    except InvalidMesh as exc:
        raise InvalidMesh(f"{path}: {exc}") from exc


# -- MSH 2.2 -----------------------------------------------------------------

def _lines(path):
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                yield lineno, line.strip()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def read_msh(path):
    it = _lines(path)
    node_ids = {}
    points = []
    tets, tris = [], []
    saw_format = False

    def nxt():
        for lineno, line in it:
            if line:
                return lineno, line
        raise ParseError("unexpected end of file", path=path)

    for lineno, line in it:
        if not line:
            continue
        if line == "$MeshFormat":
            ln, header = nxt()
            parts = header.split()
            if len(parts) < 3 or not parts[0].startswith("2"):
                raise ParseError(f"unsupported MSH version {parts[:1]}", ln, path)
            if parts[1] != "0":
                raise ParseError("binary MSH is not supported", ln, path)
            saw_format = True
            ln, end = nxt()
            if end != "$EndMeshFormat":
                raise ParseError("expected $EndMeshFormat", ln, path)
        elif line == "$Nodes":
            ln, count = nxt()
            try:
                n = int(count)
            except ValueError:
                raise ParseError(f"bad node count {count!r}", ln, path) from None
            for _ in range(n):
                ln, row = nxt()
                parts = row.split()
                try:
                    nid = int(parts[0])
                    xyz = [float(v) for v in parts[1:4]]
                except (ValueError, IndexError):
                    raise ParseError(f"bad node line {row!r}", ln, path) from None
                if len(xyz) != 3:
                    raise ParseError(f"bad node line {row!r}", ln, path)
                node_ids[nid] = len(points)
                points.append(xyz)
            ln, end = nxt()
            if end != "$EndNodes":
                raise ParseError("expected $EndNodes", ln, path)
        elif line == "$Elements":
            ln, count = nxt()
            try:
                n = int(count)
            except ValueError:
                raise ParseError(f"bad element count {count!r}", ln, path) from None
            for _ in range(n):
                ln, row = nxt()
                try:
                    parts = [int(v) for v in row.split()]
                    etype, ntags = parts[1], parts[2]
                    nodes = parts[3 + ntags:]
                except (ValueError, IndexError):
                    raise ParseError(f"bad element line {row!r}", ln, path) from None
                if etype == MSH_TETRAHEDRON:
                    want, dest = 4, tets
                elif etype == MSH_TRIANGLE:
                    want, dest = 3, tris
                else:
                    raise UnsupportedElement(f"element type {etype} is not supported", ln, path)
                if len(nodes) != want:
                    raise ParseError(f"element has {len(nodes)} nodes, expected {want}", ln, path)
                try:
                    dest.append([node_ids[v] for v in nodes])
                except KeyError as exc:
                    raise ParseError(f"unknown node id {exc.args[0]}", ln, path) from None
            ln, end = nxt()
            if end != "$EndElements":
                raise ParseError("expected $EndElements", ln, path)
        elif line.startswith("$"):
            # skip sections we do not read
            tag = "$End" + line[1:]
            for ln, row in it:
                if row == tag:
                    break
            else:
                raise ParseError(f"unterminated section {line}", lineno, path)
        else:
            raise ParseError(f"unexpected content {line!r}", lineno, path)
    if not saw_format:
        raise ParseError("missing $MeshFormat header", path=path)
    return _build(points, tets, tris if tris else None, path)


def write_msh(mesh, path):
    tets = mesh.tet_array()
    tris = sorted(mesh.surface)
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_points)]
    for i, p in enumerate(mesh.points, 1):
        lines.append(f"{i} {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    lines += ["$EndNodes", "$Elements", str(len(tris) + len(tets))]
    eid = 1
    for tri in tris:
        lines.append(f"{eid} {MSH_TRIANGLE} 2 1 1 " + " ".join(str(v + 1) for v in tri))
        eid += 1
    for tet in tets:
        lines.append(f"{eid} {MSH_TETRAHEDRON} 2 1 1 " + " ".join(str(v + 1) for v in tet))
        eid += 1
    lines.append("$EndElements")
    _write_text(path, lines)


def _write_text(path, lines):
    if hasattr(path, "write"):
        path.write("\n".join(lines) + "\n")
        return
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# -- node / ele / face -------------------------------------------------------

def _stem(path):
    root, ext = os.path.splitext(str(path))
    return root if ext.lower() in (".node", ".ele", ".face") else str(path)


def _table(path):
    rows = []
    for lineno, line in _lines(path):
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise ParseError("empty file", path=path)
    return rows


def _ints(parts, lineno, path):
    try:
        return [int(v) for v in parts]
    except ValueError:
        raise ParseError(f"expected integers, got {parts!r}", lineno, path) from None


def read_nodeele(path):
    stem = _stem(path)
    node_path, ele_path, face_path = stem + ".node", stem + ".ele", stem + ".face"
    rows = _table(node_path)
    lineno, head = rows[0]
    n, dim = _ints(head[:2], lineno, node_path)
    if dim != 3:
        raise ParseError(f"expected dimension 3, got {dim}", lineno, node_path)
    if len(rows) - 1 < n:
        raise ParseError(f"expected {n} nodes, found {len(rows) - 1}", path=node_path)
    ids, points = [], []
    for lineno, parts in rows[1: n + 1]:
        try:
            ids.append(int(parts[0]))
            points.append([float(v) for v in parts[1:4]])
        except (ValueError, IndexError):
            raise ParseError(f"bad node line {' '.join(parts)!r}", lineno, node_path) from None
    index = {nid: i for i, nid in enumerate(ids)}

    def lookup(v, lineno, where):
        try:
            return index[v]
        except KeyError:
            raise ParseError(f"unknown node index {v}", lineno, where) from None

    rows = _table(ele_path)
    lineno, head = rows[0]
    m, per = _ints(head[:2], lineno, ele_path)
    if per != 4:
        raise UnsupportedElement(f"{per}-node elements are not supported", lineno, ele_path)
    tets = []
    for lineno, parts in rows[1: m + 1]:
        vals = _ints(parts[:5], lineno, ele_path)
        if len(vals) != 5:
            raise ParseError("element line needs an index and 4 nodes", lineno, ele_path)
        tets.append([lookup(v, lineno, ele_path) for v in vals[1:]])
    if len(tets) != m:
        raise ParseError(f"expected {m} elements, found {len(tets)}", path=ele_path)
    tris = None
    if os.path.exists(face_path):
        rows = _table(face_path)
        lineno, head = rows[0]
        k = _ints(head[:1], lineno, face_path)[0]
        tris = []
        for lineno, parts in rows[1: k + 1]:
            vals = _ints(parts[:4], lineno, face_path)
            if len(vals) != 4:
                raise ParseError("face line needs an index and 3 nodes", lineno, face_path)
            tris.append([lookup(v, lineno, face_path) for v in vals[1:]])
    return _build(points, tets, tris, stem)


def write_nodeele(mesh, path):
    stem = _stem(path)
    lines = [f"{mesh.n_points} 3 0 0"]
    for i, p in enumerate(mesh.points):
        lines.append(f"{i} {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    _write_text(stem + ".node", lines)
    tets = mesh.tet_array()
    lines = [f"{len(tets)} 4 0"]
    for i, t in enumerate(tets):
        lines.append(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}")
    _write_text(stem + ".ele", lines)
    tris = sorted(mesh.surface)
    lines = [f"{len(tris)} 0"]
    for i, t in enumerate(tris):
        lines.append(f"{i} {t[0]} {t[1]} {t[2]}")
    _write_text(stem + ".face", lines)


# -- synthetic meshes ----------------------------------------------------------

def _kuhn_cube(n):
    m = n + 1
    idx = np.arange(m ** 3).reshape(m, m, m)
    g = np.stack(np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij"), -1)
    points = g.reshape(-1, 3) / float(n)
    base = idx[:-1, :-1, :-1].ravel()
    step = np.array([m * m, m, 1])
    tets = []
    for perm in itertools.permutations(range(3)):
        v1 = base + step[perm[0]]
        v2 = v1 + step[perm[1]]
        v3 = v2 + step[perm[2]]
        inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
        if inversions % 2:
            tets.append(np.stack([base, v1, v3, v2], 1))
        else:
            tets.append(np.stack([base, v1, v2, v3], 1))
    # cell-major ordering keeps neighbouring tets close in the table
    tets = np.stack(tets, 1).reshape(-1, 4)
    return points, tets


def generate_test_mesh(n, perturbation=0.0, seed=0):
    """Structured unit cube of ``n**3`` cells split into 6 tetrahedra each.

    Interior vertices are displaced by uniform offsets of at most
    ``perturbation`` times the cell size per axis. A displacement that would
    invert an incident tetrahedron is redrawn, up to 100 times, before the
    vertex is left in place.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= perturbation < 1.0:
        raise ValueError("perturbation must lie in [0, 1)")
    points, tets = _kuhn_cube(n)
    if perturbation > 0.0:
        rng = np.random.default_rng(seed)
        h = 1.0 / n
        m = n + 1
        order = np.argsort(tets.ravel(), kind="stable")
        owners = order // 4
        bounds = np.searchsorted(tets.ravel()[order], np.arange(len(points) + 1))
        ijk = np.stack(np.unravel_index(np.arange(len(points)), (m, m, m)), 1)
        interior = np.flatnonzero(np.all((ijk > 0) & (ijk < n), axis=1))
        for v in interior:
            inc = tets[owners[bounds[v]: bounds[v + 1]]]
            home = points[v].copy()
            for _ in range(100):
                points[v] = home + rng.uniform(-perturbation * h, perturbation * h, 3)
                if _kernels.batch_gamma(points, inc).min() > 0.0:
                    break
            else:
                points[v] = home
    return TetMesh(points, tets)


# -- reports -------------------------------------------------------------------

@dataclass
class QualityReport:
    n_tets: int
    gamma_hist: np.ndarray
    sicn_hist: np.ndarray
    dihedral_hist: np.ndarray
    summary: dict
    sweeps: list = field(default_factory=list)


def quality_report(mesh, threshold=0.35, bad_before=None, sweeps=None, modifications=0):
    """Histograms of gamma, SICN and dihedral angles plus summary statistics."""
    tets = mesh.tet_array()
    g = batch_gamma(mesh.points, tets)
    s = batch_sicn(mesh.points, tets)
    d = batch_dihedral_angles(mesh.points, tets).ravel()
    bad = int((g < threshold).sum())
    summary = {
        "n_points": mesh.n_points,
        "n_tets": len(tets),
        "min_gamma": float(g.min()) if len(g) else float("nan"),
        "max_gamma": float(g.max()) if len(g) else float("nan"),
        "mean_gamma": float(g.mean()) if len(g) else float("nan"),
        "min_sicn": float(s.min()) if len(s) else float("nan"),
        "max_sicn": float(s.max()) if len(s) else float("nan"),
        "mean_sicn": float(s.mean()) if len(s) else float("nan"),
        "min_dihedral": float(d.min()) if len(d) else float("nan"),
        "max_dihedral": float(d.max()) if len(d) else float("nan"),
        "mean_dihedral": float(d.mean()) if len(d) else float("nan"),
        "threshold": float(threshold),
        "bad_before": int(bad if bad_before is None else bad_before),
        "bad_after": bad,
        "modifications": int(modifications),
    }
    return QualityReport(
        n_tets=len(tets),
        gamma_hist=np.histogram(np.clip(g, 0.0, 1.0), bins=100, range=(0.0, 1.0))[0],
        sicn_hist=np.histogram(np.clip(s, 0.0, 1.0), bins=100, range=(0.0, 1.0))[0],
        dihedral_hist=np.histogram(np.clip(d, 0.0, 180.0), bins=180, range=(0.0, 180.0))[0],
        summary=summary,
        sweeps=list(sweeps or []),
    )


def emit_report(report, path):
    """Write histograms and summary statistics as tab-separated text."""
    lines = ["measure\tbin_lo\tbin_hi\tcount"]
    for name, hist, hi in (("gamma", report.gamma_hist, 1.0),
                           ("sicn", report.sicn_hist, 1.0),
                           ("dihedral", report.dihedral_hist, 180.0)):
        width = hi / len(hist)
        for i, c in enumerate(hist):
            lines.append(f"{name}\t{_round(i * width)}\t{_round((i + 1) * width)}\t{int(c)}")
    lines.append("")
    lines.append("# summary")
    for key, value in report.summary.items():
        lines.append(f"{key}\t{value if isinstance(value, int) else _fmt(value)}")
    if report.sweeps:
        lines.append("")
        lines.append("# sweeps")
        lines.append("phase\tworkers\tattempted\tapplied\tsuspended\trho")
        for s in report.sweeps:
            lines.append(f"{s.phase}\t{s.workers}\t{s.attempted}\t{s.applied}\t"
                         f"{s.suspended}\t{_fmt(s.rho)}")
    _write_text(path, lines)


def _round(x):
    return format(round(x, 10), "g")
