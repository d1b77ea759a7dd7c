"""Measurement grid, speaker/microphone pairs, Fresnel zones and square symmetries.

Coordinates are millimetres with the origin at the panel centre and z the
distance from the panel's reference plane.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from . import kernels
from .errors import ParameterError, SymmetryUnavailableError
from .sigproc import speed_of_sound

PANEL_SIZE = 585.0


class LayerSpec(NamedTuple):
    count: int  # points per side
    offset: float  # mm above the panel plane
    spacing: float  # mm between neighbours


DEFAULT_LAYERS = (
    LayerSpec(6, 124.0, 75.0),
    LayerSpec(5, 214.0, 93.75),
    LayerSpec(4, 304.0, 125.0),
    LayerSpec(1, 474.0, 0.0),
)


@dataclass(frozen=True, eq=False)
class MeasurementGrid:
    points: np.ndarray  # (n, 3) mm
    layers: np.ndarray  # (n,) layer index per point
    rows: np.ndarray
    cols: np.ndarray
    specs: tuple = DEFAULT_LAYERS
    footprint: float = PANEL_SIZE
    exceeds_footprint: bool = False

    def __len__(self):
        return len(self.points)

    def layer_ids(self, layer: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.layers == layer)]

    def layer_size(self, layer: int) -> int:
        return self.specs[layer].count

    def cell(self, pid: int) -> tuple[int, int]:
        return int(self.rows[pid]), int(self.cols[pid])

    def to_dict(self) -> dict:
        return {
            "footprint": self.footprint,
            "layers": [s._asdict() for s in self.specs],
            "points": [
                {"id": i, "layer": int(l), "row": int(r), "col": int(c),
                 "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                for i, (p, l, r, c) in enumerate(zip(self.points, self.layers, self.rows, self.cols))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementGrid":
        pts = sorted(d["points"], key=lambda p: p["id"])
        specs = tuple(LayerSpec(int(s["count"]), float(s["offset"]), float(s["spacing"]))
                      for s in d["layers"])
        fp = float(d.get("footprint", PANEL_SIZE))
        xyz = np.array([[p["x"], p["y"], p["z"]] for p in pts], dtype=float)
        return cls(xyz, np.array([p["layer"] for p in pts]), np.array([p["row"] for p in pts]),
                   np.array([p["col"] for p in pts]), specs, fp,
                   bool(np.any(np.abs(xyz[:, :2]) > fp / 2)))

    def to_csv(self) -> str:
        lines = ["id,layer,row,col,x,y,z"]
        for i, (p, l, r, c) in enumerate(zip(self.points, self.layers, self.rows, self.cols)):
            lines.append(f"{i},{l},{r},{c},{p[0]:.6g},{p[1]:.6g},{p[2]:.6g}")
        return "\n".join(lines) + "\n"


def build_grid(specs: Iterable[LayerSpec] = DEFAULT_LAYERS, footprint=PANEL_SIZE, jitter=0.0,
               seed=None) -> MeasurementGrid:
    """Square layers centred over the panel; ids run layer by layer, row-major.

    Row 0 is the +y edge and column 0 the -x edge. ``jitter`` (mm, uniform)
    perturbs positions reproducibly from ``seed``; the default keeps exact
    planar layers.
    """
    specs = tuple(LayerSpec(*s) for s in specs)
    pts, layers, rows, cols = [], [], [], []
    for li, s in enumerate(specs):
        if s.count < 1 or s.offset <= 0 or s.spacing < 0 or (s.count > 1 and s.spacing <= 0):
            raise ParameterError(f"invalid layer spec {s}")
        coords = (np.arange(s.count) - (s.count - 1) / 2) * s.spacing
        for r in range(s.count):
            for c in range(s.count):
                pts.append((coords[c], coords[s.count - 1 - r], s.offset))
                layers.append(li)
                rows.append(r)
                cols.append(c)
    pts = np.array(pts, dtype=float)
    if jitter:
        rng = np.random.default_rng(seed)
        pts = pts + rng.uniform(-jitter, jitter, pts.shape)
    exceeds = bool(np.any(np.abs(pts[:, :2]) > footprint / 2))
    if exceeds:
        warnings.warn("measurement grid extends beyond the panel footprint", stacklevel=2)
    return MeasurementGrid(pts, np.array(layers), np.array(rows), np.array(cols), specs,
                           float(footprint), exceeds)


class Combination(NamedTuple):
    """Unordered speaker/microphone pair stored with the smaller id first."""

    a: int
    b: int

    @classmethod
    def of(cls, i, j) -> "Combination":
        i, j = int(i), int(j)
        if i == j:
            raise ParameterError("a combination needs two distinct points")
        return cls(min(i, j), max(i, j))

    @property
    def key(self) -> str:
        return f"{self.a:02d}_{self.b:02d}"

    @classmethod
    def from_key(cls, key: str) -> "Combination":
        a, b = key.split("_")
        return cls.of(int(a), int(b))


Exclusion = Callable[[MeasurementGrid, Combination], bool]


def min_clearance(threshold=80.0) -> Exclusion:
    """Exclude pairs closer than ``threshold`` mm in 3-D.

    An approximation of unreachable robot poses, not a reproduction of any
    particular exclusion list.
    """

    def excluded(grid, c):
        return float(np.linalg.norm(grid.points[c.a] - grid.points[c.b])) < threshold

    return excluded


def exclude_all(grid, c) -> bool:
    return True


def enumerate_combinations(grid: MeasurementGrid, exclusion: Exclusion | None = None) -> list[Combination]:
    out = []
    for i, j in itertools.combinations(range(len(grid)), 2):
        c = Combination(i, j)
        if exclusion is None or not exclusion(grid, c):
            out.append(c)
    return out


def layer_combinations(grid, combinations, layer: int) -> list[Combination]:
    return [c for c in combinations if grid.layers[c.a] == layer and grid.layers[c.b] == layer]


@dataclass(frozen=True)
class FresnelEllipse:
    center: tuple  # (x, y) mm in the panel plane
    semi_major: float
    semi_minor: float
    orientation: float  # rad, major axis from +x
    frequency: float

    @property
    def minor_diameter(self) -> float:
        return 2.0 * self.semi_minor

    @property
    def major_diameter(self) -> float:
        return 2.0 * self.semi_major

    @property
    def area(self) -> float:
        return float(np.pi * self.semi_major * self.semi_minor)

    def contains(self, x, y):
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        u = (dx * c + dy * s) / self.semi_major
        v = (-dx * s + dy * c) / self.semi_minor
        return u * u + v * v <= 1.0

    def boundary(self, n=64) -> np.ndarray:
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        c, s = np.cos(self.orientation), np.sin(self.orientation)
        u, v = self.semi_major * np.cos(t), self.semi_minor * np.sin(t)
        return np.column_stack([self.center[0] + u * c - v * s, self.center[1] + u * s + v * c])


def default_c() -> float:
    return speed_of_sound(20.0)


def fresnel_zone(source, receiver, frequency, c=None) -> FresnelEllipse | None:
    """First Fresnel zone on the plane z=0 for a specular reflection.

    The zone is where the prolate spheroid with foci at the source and the
    mirrored receiver, and path length ``|SR'| + lambda/2``, cuts the plane.
    ``c`` is in m/s, positions in mm. Returns None if the spheroid misses the
    plane.
    """
    S = np.asarray(source, dtype=float)
    R = np.asarray(receiver, dtype=float)
    if S[2] <= 0 or R[2] <= 0:
        raise ParameterError("source and receiver must lie above the plane")
    if not frequency > 0:
        raise ParameterError("frequency must be positive")
    c = default_c() if c is None else c
    lam = c * 1000.0 / frequency
    Rm = R * np.array([1.0, 1.0, -1.0])
    d = Rm - S
    focal = np.linalg.norm(d) / 2.0
    u = d / (2.0 * focal)
    a = focal + lam / 4.0
    b2 = a * a - focal * focal
    P = np.outer(u, u)
    M = P / (a * a) + (np.eye(3) - P) / b2
    C = (S + Rm) / 2.0
    # restrict (p - C)^T M (p - C) = 1 to p = (x, y, 0)
    Q = M[:2, :2]
    w = -C[2] * M[:2, 2]
    qinv_w = np.linalg.solve(Q, w)
    rhs = 1.0 - M[2, 2] * C[2] ** 2 + w @ qinv_w
    if rhs <= 0:
        return None
    center = C[:2] - qinv_w
    evals, evecs = np.linalg.eigh(Q)
    axes = np.sqrt(rhs / evals)  # ascending eigenvalues -> descending axes
    major_dir = evecs[:, 0]
    theta = float(np.arctan2(major_dir[1], major_dir[0]))
    return FresnelEllipse((float(center[0]), float(center[1])), float(axes[0]), float(axes[1]),
                          theta, float(frequency))


def path_excess(source, receiver, px, py) -> np.ndarray:
    """``|SP| + |PR| - |SR'|`` for plane points ``(px, py, 0)``."""
    S = np.asarray(source, dtype=float)
    R = np.asarray(receiver, dtype=float)
    px, py = np.asarray(px, dtype=float), np.asarray(py, dtype=float)
    d1 = np.sqrt((px - S[0]) ** 2 + (py - S[1]) ** 2 + S[2] ** 2)
    d2 = np.sqrt((px - R[0]) ** 2 + (py - R[1]) ** 2 + R[2] ** 2)
    return d1 + d2 - np.linalg.norm(S - R * np.array([1.0, 1.0, -1.0]))


def combination_zones(grid, combinations, frequency, c=None) -> list[FresnelEllipse]:
    zones = []
    for comb in combinations:
        z = fresnel_zone(grid.points[comb.a], grid.points[comb.b], frequency, c)
        if z is not None:
            zones.append(z)
    return zones


def fresnel_extremes(grid, combinations, frequency, c=None) -> tuple[float, float]:
    """Smallest and largest minor-axis diameter over the combinations' zones."""
    if not combinations:
        raise ParameterError("no combinations given")
    d = [z.minor_diameter for z in combination_zones(grid, combinations, frequency, c)]
    return float(min(d)), float(max(d))


@dataclass(frozen=True, eq=False)
class CoverageMap:
    counts: np.ndarray  # (ny, nx) zones covering each cell; row 0 at -y
    resolution: float
    origin: tuple  # (x0, y0) of the raster corner

    @property
    def covered(self) -> np.ndarray:
        return self.counts > 0

    @property
    def fraction(self) -> float:
        return float(np.mean(self.covered))

    def to_pgm(self) -> bytes:
        """Binary PGM, covered cells white, +y at the top."""
        img = np.where(self.covered, 255, 0).astype(np.uint8)[::-1]
        ny, nx = img.shape
        return f"P5\n{nx} {ny}\n255\n".encode() + img.tobytes()

    def to_csv(self) -> str:
        return "\n".join(",".join(str(int(v)) for v in row) for row in self.counts[::-1]) + "\n"


def coverage_map(grid, combinations, frequency, c=None, resolution=2.0, footprint=None) -> CoverageMap:
    """Rasterise the panel footprint, counting first Fresnel zones per cell."""
    if not resolution > 0:
        raise ParameterError("resolution must be positive")
    fp = grid.footprint if footprint is None else footprint
    n = int(np.ceil(fp / resolution - 1e-9))
    x0 = y0 = -fp / 2
    zones = combination_zones(grid, combinations, frequency, c)
    arr = lambda vals: np.ascontiguousarray(vals, dtype=np.float64)
    counts = kernels.rasterize_ellipses(
        arr([z.center[0] for z in zones]), arr([z.center[1] for z in zones]),
        arr([z.semi_major for z in zones]), arr([z.semi_minor for z in zones]),
        arr([z.orientation for z in zones]), x0, y0, resolution, n, n)
    return CoverageMap(np.asarray(counts), float(resolution), (x0, y0))


# --- square symmetries -------------------------------------------------------

@dataclass(frozen=True)
class Symmetry:
    """An element of the square's symmetry group acting on (x, y)."""

    name: str
    matrix: tuple  # 2x2 integer, row-major

    @property
    def m(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float).reshape(2, 2)

    def __matmul__(self, other: "Symmetry") -> "Symmetry":
        return _lookup((self.m @ other.m).round().astype(int))

    def inverse(self) -> "Symmetry":
        return _lookup(self.m.T.round().astype(int))


def _lookup(matrix) -> Symmetry:
    flat = tuple(int(v) for v in np.asarray(matrix).ravel())
    for g in d4_transforms():
        if g.matrix == flat:
            return g
    raise ParameterError(f"{flat} is not a square symmetry")


_ROT = ((1, 0, 0, 1), (0, -1, 1, 0), (-1, 0, 0, -1), (0, 1, -1, 0))


def d4_transforms() -> list[Symmetry]:
    """The 8 symmetries: rotations by 0/90/180/270 degrees, then the same after mirroring y."""
    out = [Symmetry(f"rot{90 * k}", r) for k, r in enumerate(_ROT)]
    for k, r in enumerate(_ROT):
        m = np.array(r).reshape(2, 2) @ np.array([[1, 0], [0, -1]])
        out.append(Symmetry(f"mirror_rot{90 * k}", tuple(int(v) for v in m.ravel())))
    return out


def symmetry_permutation(g: Symmetry, grid: MeasurementGrid, tol=1e-6) -> np.ndarray:
    """Point-id permutation ``perm[i]`` = id of the image of point ``i``."""
    xy = grid.points[:, :2] @ g.m.T
    perm = np.empty(len(grid), dtype=int)
    for i, (p, z) in enumerate(zip(xy, grid.points[:, 2])):
        d = np.abs(grid.points[:, 0] - p[0]) + np.abs(grid.points[:, 1] - p[1]) + np.abs(grid.points[:, 2] - z)
        j = int(np.argmin(d))
        if d[j] > tol:
            raise SymmetryUnavailableError(f"grid is not invariant under {g.name}")
        perm[i] = j
    if len(set(perm.tolist())) != len(perm):
        raise SymmetryUnavailableError(f"{g.name} does not permute the grid")
    return perm


def apply_symmetry(g: Symmetry, value, grid: MeasurementGrid | None = None):
    """Transform a point id, a :class:`Combination`, a coordinate or a GridReport."""
    from .energetics import GridReport

    if isinstance(value, Combination):
        perm = symmetry_permutation(g, grid)
        return Combination.of(perm[value.a], perm[value.b])
    if isinstance(value, (int, np.integer)):
        return int(symmetry_permutation(g, grid)[value])
    if isinstance(value, GridReport):
        return _transform_report(g, value, grid)
    p = np.asarray(value, dtype=float)
    xy = g.m @ p[:2]
    return np.concatenate([xy, p[2:]])


def _cell_map(g: Symmetry, n: int):
    """Map (row, col) of an n x n layer to its image under ``g``."""
    rows, cols = np.mgrid[0:n, 0:n]
    x = cols - (n - 1) / 2
    y = (n - 1) / 2 - rows
    m = g.m
    x2 = m[0, 0] * x + m[0, 1] * y
    y2 = m[1, 0] * x + m[1, 1] * y
    return np.rint((n - 1) / 2 - y2).astype(int), np.rint(x2 + (n - 1) / 2).astype(int)


def _transform_report(g, rep, grid=None):
    from dataclasses import replace

    layers, nds = [], []
    for vals, nd in zip(rep.layers, rep.no_data):
        n = nd.shape[0]
        r2, c2 = _cell_map(g, n)
        v2 = np.empty_like(vals)
        n2 = np.empty_like(nd)
        v2[:, r2, c2] = vals
        n2[r2, c2] = nd
        layers.append(v2)
        nds.append(n2)
    mic = rep.mic_cell
    if mic is not None:
        l, r, c = mic
        r2, c2 = _cell_map(g, rep.no_data[l].shape[0])
        mic = (l, int(r2[r, c]), int(c2[r, c]))
    mic_id = rep.microphone_id
    if mic_id is not None and grid is not None:
        mic_id = int(symmetry_permutation(g, grid)[mic_id])
    return replace(rep, layers=tuple(layers), no_data=tuple(nds), mic_cell=mic, microphone_id=mic_id)
