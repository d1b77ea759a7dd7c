"""Procedural double-sided panels: brick bonds and polygonal rubble stone.

Generation follows the flat sheet -> typology subdivision -> macro
deformation (thickening) -> meso (unit/joint translation) -> micro
(roughness) sequence. Dimensions in the parameter classes are full scale
(1:1) and multiplied by ``scale`` (default 1:10) when applied, so meshes come
out in model-scale millimetres.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError
from .mesh import PANEL_SIZE, SIDE_BUDGET, PanelMesh

TYPOLOGIES = ("flemish_bond", "stretcher_bond", "polygonal_rubble_stone")
MIN_MACRO_PERIOD = 150.0  # model-scale mm
REFERENCE_RASTER = 2.0  # mm, grid used to normalise the macro field
STONE_RESOLUTION = 1.0
JOINT_WALL = 0.05  # mm run of the sloped wall between unit face and joint floor


@dataclass(frozen=True)
class MacroParams:
    depth: float = 150.0
    amplitude: float = 200.0  # peak-to-peak
    period: float = 3000.0  # shortest component period
    components: int = 3


@dataclass(frozen=True)
class BrickParams:
    brick_w: float = 215.0
    brick_h: float = 65.0
    brick_d: float = 102.5
    joint_height: float = 10.0
    joint_depth: float = 10.0
    joint_style: str = "raked"
    protrusion: float = 0.0  # max random outward offset per brick


@dataclass(frozen=True)
class StoneParams:
    stones_per_m2: float = 9.0
    joint_width: tuple = (20.0, 30.0)
    joint_depth: tuple = (50.0, 80.0)
    relax_iterations: int = 3


@dataclass(frozen=True)
class MicroParams:
    roughness: float = 0.0  # +/- amplitude
    feature_size: float = 50.0


@dataclass(frozen=True)
class TypologyParams:
    typology: str = "flemish_bond"
    macro: MacroParams = field(default_factory=MacroParams)
    meso: BrickParams | StoneParams | None = None
    micro: MicroParams = field(default_factory=MicroParams)
    seed: int = 0
    scale: float = 0.1

    def __post_init__(self):
        if self.typology not in TYPOLOGIES:
            raise ParameterError(f"unknown typology {self.typology!r}")
        if self.meso is not None:
            want = StoneParams if self.typology == "polygonal_rubble_stone" else BrickParams
            if not isinstance(self.meso, want):
                raise ParameterError(f"{self.typology} needs {want.__name__}")
        _check_positive(self)

    @classmethod
    def default(cls, typology: str, seed: int = 0) -> "TypologyParams":
        if typology == "polygonal_rubble_stone":
            return cls(typology, meso=StoneParams(), micro=MicroParams(30.0, 80.0), seed=seed)
        return cls(typology, meso=BrickParams(), seed=seed)

    def macro_only(self) -> "TypologyParams":
        return replace(self, meso=None, micro=MicroParams(0.0, self.micro.feature_size))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["meso_kind"] = type(self.meso).__name__ if self.meso is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TypologyParams":
        d = dict(d)
        kind = d.pop("meso_kind", None)
        meso = d.pop("meso", None)
        if meso is not None:
            if kind == "StoneParams" or d.get("typology") == "polygonal_rubble_stone":
                meso = StoneParams(**{k: tuple(v) if isinstance(v, list) else v for k, v in meso.items()})
            else:
                meso = BrickParams(**meso)
        return cls(d["typology"], MacroParams(**d["macro"]), meso, MicroParams(**d["micro"]),
                   int(d["seed"]), float(d.get("scale", 0.1)))


def _check_positive(p: TypologyParams):
    if not p.scale > 0:
        raise ParameterError("scale must be positive")
    m = p.macro
    if m.depth < 0 or m.amplitude < 0 or m.period <= 0 or m.components < 1:
        raise ParameterError(f"invalid macro parameters {m}")
    if isinstance(p.meso, BrickParams):
        b = p.meso
        if min(b.brick_w, b.brick_h, b.brick_d, b.joint_height) <= 0 or b.joint_depth < 0 or b.protrusion < 0:
            raise ParameterError(f"invalid brick parameters {b}")
        if b.joint_style not in ("flush", "raked"):
            raise ParameterError(f"unknown joint style {b.joint_style!r}")
    if isinstance(p.meso, StoneParams):
        s = p.meso
        if s.stones_per_m2 <= 0 or min(s.joint_width) <= 0 or min(s.joint_depth) < 0:
            raise ParameterError(f"invalid stone parameters {s}")
        if s.joint_width[0] > s.joint_width[1] or s.joint_depth[0] > s.joint_depth[1]:
            raise ParameterError("ranges must be (low, high)")
    if p.micro.roughness < 0 or p.micro.feature_size <= 0:
        raise ParameterError(f"invalid micro parameters {p.micro}")


def base_mesh(resolution=5.0) -> PanelMesh:
    """Flat triangulated 585 x 585 mm sheet at z = 0."""
    if not 1.0 <= resolution <= PANEL_SIZE / 10:
        raise ParameterError(f"resolution {resolution} outside [1, {PANEL_SIZE / 10}] mm")
    n = int(round(PANEL_SIZE / resolution))
    xs = np.linspace(0.0, PANEL_SIZE, n + 1)
    z = np.zeros((n + 1, n + 1))
    return PanelMesh(xs, xs.copy(), z, np.zeros_like(z, dtype=int))


# --- subdivision -------------------------------------------------------------

def _merge_breaks(base, extra, tol=1e-6):
    v = np.unique(np.clip(np.concatenate([base, extra]), 0.0, PANEL_SIZE))
    keep = np.concatenate([[True], np.diff(v) > tol])
    v = v[keep]
    v[-1] = PANEL_SIZE
    return v


def brick_layout(params: TypologyParams):
    """Courses as ``(y0, y1, [(x0, x1), ...])`` at model scale, bricks clipped to the panel."""
    b: BrickParams = params.meso
    s = params.scale
    bw, bh, bd, j = b.brick_w * s, b.brick_h * s, b.brick_d * s, b.joint_height * s
    if bw > PANEL_SIZE or bh > PANEL_SIZE:
        raise ParameterError("brick larger than panel")
    rng = np.random.default_rng([params.seed, 1])
    if params.typology == "stretcher_bond":
        seq, period = [bw], bw + j
        shifts = (0.0, (bw + j) / 2)
    else:
        # header centred over the stretcher below
        seq, period = [bw, bd], bw + bd + 2 * j
        shifts = (0.0, (bw - bd) / 2)
    phase = rng.uniform(0, period)
    courses = []
    course_h = bh + j
    y0 = -rng.uniform(0, course_h)
    k = 0
    while y0 < PANEL_SIZE:
        x = -phase + shifts[k % 2] - period
        bricks = []
        i = 0 if params.typology == "stretcher_bond" or k % 2 == 0 else 1
        while x < PANEL_SIZE:
            w = seq[i % len(seq)]
            x0, x1 = max(x, 0.0), min(x + w, PANEL_SIZE)
            if x1 - x0 > 1e-6:
                bricks.append((x0, x1))
            x += w + j
            i += 1
        yb0, yb1 = max(y0, 0.0), min(y0 + bh, PANEL_SIZE)
        if yb1 - yb0 > 1e-6:
            courses.append((yb0, yb1, bricks))
        y0 += course_h
        k += 1
    return courses


def _brick_units(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    courses = brick_layout(params)
    j = params.meso.joint_height * params.scale
    wall = min(JOINT_WALL, j / 4)
    xb, yb = [], []
    for y0, y1, bricks in courses:
        yb += [y0, y1, y0 - wall, y1 + wall]
        for x0, x1 in bricks:
            xb += [x0, x1, x0 - wall, x1 + wall]
    xs = _merge_breaks(mesh.xs, np.array(xb))
    ys = _merge_breaks(mesh.ys, np.array(yb))
    units = np.full((len(ys), len(xs)), -1, dtype=int)
    uid = 0
    eps = 1e-9
    for y0, y1, bricks in courses:
        rows = (ys >= y0 - eps) & (ys <= y1 + eps)
        for x0, x1 in bricks:
            cols = (xs >= x0 - eps) & (xs <= x1 + eps)
            units[np.ix_(rows, cols)] = uid
            uid += 1
    relief = _resample_relief(mesh, xs, ys)
    return mesh.with_(xs=xs, ys=ys, relief=relief, units=units,
                      meta={**mesh.meta, "units": uid, "courses": len(courses)})


def _lloyd_sites(n, rng, iterations, res=4.0):
    sites = rng.uniform(0, PANEL_SIZE, (n, 2))
    g = np.arange(res / 2, PANEL_SIZE, res)
    X, Y = np.meshgrid(g, g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    for _ in range(iterations):
        _, owner = cKDTree(sites).query(pts)
        cnt = np.bincount(owner, minlength=n)
        sx = np.bincount(owner, pts[:, 0], minlength=n)
        sy = np.bincount(owner, pts[:, 1], minlength=n)
        moved = cnt > 0
        sites[moved] = np.column_stack([sx[moved] / cnt[moved], sy[moved] / cnt[moved]])
    return sites


def stone_count(params: TypologyParams) -> int:
    side_m = PANEL_SIZE / params.scale / 1000.0
    return int(round(params.meso.stones_per_m2 * side_m * side_m))


def _stone_units(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    st: StoneParams = params.meso
    rng = np.random.default_rng([params.seed, 2])
    n = stone_count(params)
    if n < 1:
        raise ParameterError("stone larger than panel")
    sites = _lloyd_sites(n, rng, st.relax_iterations)
    widths = rng.uniform(*st.joint_width, n) * params.scale
    depths = rng.uniform(*st.joint_depth, n) * params.scale
    res = min(STONE_RESOLUTION, float(np.min(np.diff(mesh.xs))))
    m = int(round(PANEL_SIZE / res))
    xs = _merge_breaks(mesh.xs, np.linspace(0, PANEL_SIZE, m + 1))
    ys = _merge_breaks(mesh.ys, np.linspace(0, PANEL_SIZE, m + 1))
    X, Y = np.meshgrid(xs, ys)
    P = np.column_stack([X.ravel(), Y.ravel()])
    d, idx = cKDTree(sites).query(P, k=2)
    s1, s2 = sites[idx[:, 0]], sites[idx[:, 1]]
    # distance to the bisector between the nearest two sites
    gap = (d[:, 1] ** 2 - d[:, 0] ** 2) / (2 * np.linalg.norm(s2 - s1, axis=1))
    owner = idx[:, 0]
    units = np.where(gap < widths[owner] / 2, -1, owner).reshape(X.shape)
    relief = _resample_relief(mesh, xs, ys)
    return mesh.with_(xs=xs, ys=ys, relief=relief, units=units,
                      meta={**mesh.meta, "units": n, "sites": sites.tolist(),
                            "joint_depths": depths.tolist(), "joint_owner": owner.reshape(X.shape)})


def _resample_relief(mesh: PanelMesh, xs, ys):
    from scipy.interpolate import RegularGridInterpolator

    if np.ptp(mesh.relief) == 0:
        return np.full((len(ys), len(xs)), float(mesh.relief.flat[0]))
    f = RegularGridInterpolator((mesh.ys, mesh.xs), mesh.relief)
    Y, X = np.meshgrid(ys, xs, indexing="ij")
    return f(np.stack([Y, X], axis=-1))


def subdivide_typology(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    """Partition the sheet into bricks or stones separated by joint strips."""
    if params.meso is None:
        return mesh.with_(units=np.zeros_like(mesh.units), meta={**mesh.meta, "units": 1})
    if isinstance(params.meso, BrickParams):
        return _brick_units(mesh, params)
    return _stone_units(mesh, params)


# --- deformations ------------------------------------------------------------

def macro_field(params: TypologyParams):
    """Smooth displacement ``f(x, y)`` in [0, amplitude] from seeded plane waves."""
    m = params.macro
    amp = m.amplitude * params.scale
    if amp == 0:
        return lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    period = m.period * params.scale
    if period < MIN_MACRO_PERIOD:
        raise ParameterError(f"macro period {period:.1f} mm below {MIN_MACRO_PERIOD} mm")
    rng = np.random.default_rng([params.seed, 3])
    periods = rng.uniform(period, 2 * period, m.components)
    angles = rng.uniform(0, np.pi, m.components)
    phases = rng.uniform(0, 2 * np.pi, m.components)
    weights = rng.uniform(0.5, 1.0, m.components)

    def raw(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        out = 0.0
        for P, a, ph, w in zip(periods, angles, phases, weights):
            out = out + w * np.sin(2 * np.pi * (x * np.cos(a) + y * np.sin(a)) / P + ph)
        return out

    g = np.arange(0.0, PANEL_SIZE + REFERENCE_RASTER / 2, REFERENCE_RASTER)
    G = raw(*np.meshgrid(g, g))
    lo, hi = float(G.min()), float(G.max())
    return lambda x, y: amp * (raw(x, y) - lo) / (hi - lo)


def apply_macro(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    """Thicken the sheet by ``depth`` and add the macro displacement."""
    depth = params.macro.depth * params.scale
    amp = params.macro.amplitude * params.scale
    if depth + amp > SIDE_BUDGET:
        raise ParameterError(f"macro relief {depth + amp:.1f} mm exceeds {SIDE_BUDGET} mm per side")
    X, Y = np.meshgrid(mesh.xs, mesh.ys)
    relief = mesh.relief + depth + macro_field(params)(X, Y)
    return mesh.with_(relief=relief, thickened=True)


def apply_meso(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    """Recess joints and push units outwards."""
    p = params.meso
    if p is None:
        return mesh
    s = params.scale
    depth = params.macro.depth * s
    relief = mesh.relief.copy()
    joints = mesh.units < 0
    if isinstance(p, BrickParams):
        recess = p.joint_depth * s if p.joint_style == "raked" else 0.0
        if recess > depth:
            raise ParameterError(f"joint depth {recess:.2f} mm deeper than the {depth:.2f} mm relief base")
        relief[joints] -= recess
        if p.protrusion > 0:
            rng = np.random.default_rng([params.seed, 4])
            n = int(mesh.meta.get("units", mesh.units.max() + 1))
            push = rng.uniform(0, p.protrusion * s, max(n, 1))
            relief[~joints] += push[mesh.units[~joints]]
    else:
        depths = np.asarray(mesh.meta["joint_depths"])
        if depths.max() > depth:
            raise ParameterError(f"joint depth {depths.max():.2f} mm deeper than the {depth:.2f} mm relief base")
        owner = mesh.meta["joint_owner"]
        relief[joints] -= depths[owner[joints]]
    return mesh.with_(relief=relief)


def value_noise(x, y, cell, rng, shape_hint=64):
    """Smoothstep-interpolated lattice noise in [-1, 1] with lattice spacing ``cell``."""
    n = int(np.ceil(PANEL_SIZE / cell)) + 3 + shape_hint
    lattice = rng.uniform(-1, 1, (n, n))
    u, v = np.asarray(x) / cell, np.asarray(y) / cell
    i, j = np.floor(u).astype(int), np.floor(v).astype(int)
    fu, fv = u - i, v - j
    su, sv = fu * fu * (3 - 2 * fu), fv * fv * (3 - 2 * fv)
    i, j = np.clip(i, 0, n - 2), np.clip(j, 0, n - 2)
    a, b = lattice[j, i], lattice[j, i + 1]
    c, d = lattice[j + 1, i], lattice[j + 1, i + 1]
    return (a * (1 - su) + b * su) * (1 - sv) + (c * (1 - su) + d * su) * sv


def apply_micro(mesh: PanelMesh, params: TypologyParams) -> PanelMesh:
    """Add per-unit roughness bounded by +/- ``roughness``; joints stay smooth."""
    amp = params.micro.roughness * params.scale
    if amp == 0:
        return mesh
    cell = params.micro.feature_size * params.scale
    rng = np.random.default_rng([params.seed, 5])
    units = mesh.units
    n = int(max(units.max() + 1, 1))
    shift = rng.uniform(0, 64 * cell, (n, 2))
    X, Y = np.meshgrid(mesh.xs, mesh.ys)
    sel = units >= 0
    u = units[sel]
    noise = value_noise(X[sel] + shift[u, 0], Y[sel] + shift[u, 1], cell, rng)
    relief = mesh.relief.copy()
    relief[sel] += amp * noise
    return mesh.with_(relief=relief)


# --- panels ------------------------------------------------------------------

_counter = itertools.count(1)


def next_panel_number() -> int:
    return next(_counter)


def generate_side(params: TypologyParams, side: int, resolution=5.0) -> PanelMesh:
    m = base_mesh(resolution).with_(side=side)
    m = subdivide_typology(m, params)
    m = apply_macro(m, params)
    m = apply_meso(m, params)
    m = apply_micro(m, params)
    lo, hi = float(m.relief.min()), float(m.relief.max())
    if lo < 0 or hi > SIDE_BUDGET:
        raise ParameterError(f"side {side} relief spans [{lo:.2f}, {hi:.2f}] mm, outside [0, {SIDE_BUDGET}]")
    meta = {k: v for k, v in m.meta.items() if k in ("units", "courses")}
    return m.with_(meta={**meta, "params": params.to_dict()})


def generate_panel(params: TypologyParams, params_side1: TypologyParams | None = None,
                   number: int | None = None, resolution=5.0) -> tuple[PanelMesh, PanelMesh]:
    """Both faces of one slab; ids are ``NNNN_0`` and ``NNNN_1``."""
    number = next_panel_number() if number is None else int(number)
    p1 = params if params_side1 is None else params_side1
    s0 = generate_side(params, 0, resolution).with_(panel_id=f"{number:04d}_0")
    s1 = generate_side(p1, 1, resolution).with_(panel_id=f"{number:04d}_1")
    return s0, s1


def highfreq_fraction(mesh: PanelMesh, cutoff=1 / 20.0, resolution=1.0) -> float:
    """Share of relief variance above ``cutoff`` cycles/mm (Hann-windowed periodogram)."""
    from scipy.interpolate import RegularGridInterpolator

    g = np.arange(0.0, PANEL_SIZE, resolution)
    f = RegularGridInterpolator((mesh.ys, mesh.xs), mesh.relief)
    Y, X = np.meshgrid(g, g, indexing="ij")
    z = f(np.stack([Y, X], axis=-1))
    z = z - z.mean()
    w = np.hanning(len(g))
    P = np.abs(np.fft.fft2(z * np.outer(w, w))) ** 2
    k = np.fft.fftfreq(len(g), resolution)
    K = np.hypot(*np.meshgrid(k, k))
    tot = P.sum()
    return float(P[K > cutoff].sum() / tot) if tot > 0 else 0.0


def params_json(params: TypologyParams) -> str:
    return json.dumps(params.to_dict(), indent=1, sort_keys=True)


def adapt_step_sizes(history, current_steps, thresholds=(0.05, 0.5)):
    """Grow steps when consecutive panels look alike, shrink them when they differ.

    ``history`` is a sequence of ``(params, tnce_summary)`` with a 5-band
    TNCE vector per entry; ``current_steps`` a mapping or array of step sizes.
    Returns ``(new_steps, mean_distance)``.
    """
    if len(history) < 2:
        raise ParameterError("need at least two measured panels")
    low, high = thresholds
    vecs = np.array([np.asarray(s, dtype=float) for _, s in history])
    d = float(np.mean(np.linalg.norm(np.diff(vecs, axis=0), axis=1)))
    factor = 2.0 if d < low else 0.5 if d > high else 1.0
    if isinstance(current_steps, dict):
        return {k: v * factor for k, v in current_steps.items()}, d
    return np.asarray(current_steps, dtype=float) * factor, d
