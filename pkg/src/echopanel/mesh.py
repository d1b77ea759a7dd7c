"""Heightfield panel meshes, closing into a solid, validity checks and OBJ export.

Meshes live in panel coordinates: x, y in [0, 585] mm from a panel corner and
z in [0, 100] mm through the slab. Side 0 faces +z, side 1 faces -z.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

PANEL_SIZE = 585.0
PANEL_DEPTH = 100.0
CORE_THICKNESS = 10.0
SIDE_BUDGET = (PANEL_DEPTH - CORE_THICKNESS) / 2


@dataclass(frozen=True, eq=False)
class PanelMesh:
    """One panel side as a relief over a rectilinear grid.

    ``relief`` is the outward height above the side's face of the core,
    ``units`` labels each vertex with a brick/stone id or -1 for joints.
    Before thickening the mesh is the flat sheet ``z = relief``.
    """

    xs: np.ndarray
    ys: np.ndarray
    relief: np.ndarray  # (len(ys), len(xs))
    units: np.ndarray  # same shape, int
    side: int = 0
    panel_id: str = ""
    thickened: bool = False
    meta: dict = field(default_factory=dict)

    def with_(self, **kw) -> "PanelMesh":
        return replace(self, **kw)

    @property
    def shape(self):
        return self.relief.shape

    @property
    def vertices(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        if not self.thickened:
            Z = self.relief
        elif self.side == 0:
            Z = PANEL_DEPTH / 2 + CORE_THICKNESS / 2 + self.relief
        else:
            Z = PANEL_DEPTH / 2 - CORE_THICKNESS / 2 - self.relief
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    @property
    def faces(self) -> np.ndarray:
        ny, nx = self.shape
        idx = np.arange(ny * nx).reshape(ny, nx)
        a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
        c, d = idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
        f = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
        if self.side == 1:
            f = f[:, ::-1]
        return f

    @property
    def face_units(self) -> np.ndarray:
        """Unit id of each face, or -1 if its corners span more than one unit."""
        u = self.units.ravel()[self.faces]
        same = (u[:, 0] == u[:, 1]) & (u[:, 1] == u[:, 2])
        return np.where(same, u[:, 0], -1)

    def boundary_loop(self) -> np.ndarray:
        """Vertex ids around the border, counter-clockwise seen from +z."""
        ny, nx = self.shape
        idx = np.arange(ny * nx).reshape(ny, nx)
        return np.concatenate([idx[0, :-1], idx[:-1, -1], idx[-1, :0:-1], idx[:0:-1, 0]])

    def area(self) -> float:
        return float(triangle_areas(self.vertices, self.faces).sum())


def triangle_areas(vertices, faces) -> np.ndarray:
    v = np.asarray(vertices)[faces]
    return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


def _perimeter_param(xy):
    """Arc position along the square border, counter-clockwise from (0, 0)."""
    x, y = xy[:, 0], xy[:, 1]
    L = PANEL_SIZE
    s = np.where(np.isclose(y, 0) & (x < L), x, 0.0)
    s = np.where(np.isclose(x, L) & (y > 0) & ~np.isclose(y, 0), L + y, s)
    s = np.where(np.isclose(y, L) & (x < L) & ~np.isclose(x, L), 3 * L - x, s)
    s = np.where(np.isclose(x, 0) & (y > 0) & ~np.isclose(y, L), 4 * L - y, s)
    return s


def close_panel(top: PanelMesh, bottom: PanelMesh):
    """Join both sides and four walls into one closed, outward-oriented solid."""
    vt, vb = top.vertices, bottom.vertices
    ft, fb = top.faces, bottom.faces + len(vt)
    lt = top.boundary_loop()
    lb = bottom.boundary_loop() + len(vt)
    verts = np.vstack([vt, vb])
    st = _perimeter_param(verts[lt])
    sb = _perimeter_param(verts[lb])
    walls = []
    i = j = 0
    nt, nb = len(lt), len(lb)
    # zipper between the two border loops, advancing whichever is behind
    while i < nt or j < nb:
        t0, t1 = lt[i % nt], lt[(i + 1) % nt]
        b0, b1 = lb[j % nb], lb[(j + 1) % nb]
        s_t = st[(i + 1) % nt] if i + 1 < nt else 4 * PANEL_SIZE
        s_b = sb[(j + 1) % nb] if j + 1 < nb else 4 * PANEL_SIZE
        if i < nt and (j >= nb or s_t <= s_b):
            walls.append((t1, t0, b0))
            i += 1
        else:
            walls.append((b0, b1, t0))
            j += 1
    faces = np.vstack([ft, fb, np.array(walls)])
    if signed_volume(verts, faces) < 0:
        faces = faces[:, ::-1]
    return verts, faces


def signed_volume(vertices, faces) -> float:
    v = np.asarray(vertices)[faces]
    return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


@dataclass
class MeshReport:
    n_vertices: int
    n_faces: int
    degenerate_faces: int
    nonmanifold_edges: int
    boundary_edges: int
    inconsistent_edges: int
    out_of_box: int

    @property
    def manifold(self) -> bool:
        return self.nonmanifold_edges == 0 and self.inconsistent_edges == 0

    @property
    def watertight(self) -> bool:
        return self.manifold and self.boundary_edges == 0

    @property
    def ok(self) -> bool:
        return self.manifold and self.degenerate_faces == 0 and self.out_of_box == 0


def check_mesh(vertices, faces, box=(PANEL_SIZE, PANEL_SIZE, PANEL_DEPTH), tol=1e-9) -> MeshReport:
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces)
    directed = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    _, counts = np.unique(und, axis=0, return_counts=True)
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    lo = vertices.min(axis=0) if len(vertices) else np.zeros(3)
    out = np.sum(np.any(vertices < -tol, axis=1) | np.any(vertices > np.asarray(box) + tol, axis=1))
    return MeshReport(
        n_vertices=len(vertices),
        n_faces=len(faces),
        degenerate_faces=int(np.sum(triangle_areas(vertices, faces) <= 1e-9)),
        nonmanifold_edges=int(np.sum(counts > 2)),
        boundary_edges=int(np.sum(counts == 1)),
        inconsistent_edges=int(np.sum(dcounts > 1)),
        out_of_box=int(out) if lo is not None else 0,
    )


def to_obj(vertices, faces, header: str = "") -> bytes:
    """ASCII OBJ in millimetres with fixed formatting (byte-stable)."""
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(faces, dtype=np.int64) + 1
    parts = ["\n".join(lines) + "\n" if lines else ""]
    parts.append("".join("v %.4f %.4f %.4f\n" % tuple(row) for row in v))
    parts.append("".join("f %d %d %d\n" % tuple(row) for row in f))
    return "".join(parts).encode()


def read_obj(data: bytes):
    verts, faces = [], []
    for line in data.decode().splitlines():
        if line.startswith("v "):
            verts.append([float(t) for t in line.split()[1:4]])
        elif line.startswith("f "):
            faces.append([int(t.split("/")[0]) - 1 for t in line.split()[1:4]])
    return np.array(verts), np.array(faces, dtype=np.int64)
