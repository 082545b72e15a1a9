"""Grids, material maps, piston builders and stress-integration surfaces.

Cells are indexed (i, j) with i along x. A cell is perfect metal when its
center lies inside a body. The computational box boundary is a perfect
conductor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

MIN_RESOLUTION = 8
SURFACE_CLEARANCE = 2  # cells between surface and any metal


@dataclass(frozen=True, eq=False)
class Grid:
    dimension: int
    origin: tuple
    shape: tuple
    resolution: int
    boundary: str = "pec"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if int(self.resolution) < MIN_RESOLUTION:
            raise ValueError(f"resolution {self.resolution} < {MIN_RESOLUTION} points per d")
        if len(self.origin) != self.dimension or len(self.shape) != self.dimension:
            raise ValueError("origin/shape do not match dimension")
        if self.boundary != "pec":
            raise ValueError("only a perfect-metal box boundary is implemented")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    @property
    def extents(self) -> tuple:
        return tuple(n * self.spacing for n in self.shape)

    @property
    def cell_area(self) -> float:
        return self.spacing ** self.dimension

    def cell_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing

    def node_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.shape[axis] + 1) * self.spacing

    def to_index(self, x, axis: int) -> float:
        """Continuous node-index coordinate of position x along axis."""
        return (np.asarray(x, dtype=float) - self.origin[axis]) * self.resolution


@dataclass(frozen=True, eq=False)
class MaterialMap:
    """Perfect-metal body labels plus an optional background permittivity.

    ``labels`` holds 0 for fluid/vacuum cells and k > 0 for cells of body
    ``body_names[k-1]``. ``eps`` (if given) is called as eps(x, y, omega) on
    fluid cell centers only (x alone in 1D) and returns complex values.
    """

    labels: np.ndarray
    body_names: tuple = ()
    eps: Optional[Callable] = None

    @property
    def metal(self) -> np.ndarray:
        return self.labels > 0

    def body_mask(self, name: str) -> np.ndarray:
        k = self.body_names.index(name) + 1
        return self.labels == k

    def eps_cells(self, grid: Grid, omega) -> np.ndarray:
        """Cell permittivity at omega; NaN inside metal (never evaluated there)."""
        out = np.full(self.labels.shape, np.nan, dtype=complex)
        fluid = ~self.metal
        if self.eps is None:
            out[fluid] = 1.0
            return out
        if grid.dimension == 1:
            x = grid.cell_centers(0)[fluid]
            out[fluid] = self.eps(x, omega)
        else:
            X, Y = np.meshgrid(grid.cell_centers(0), grid.cell_centers(1), indexing="ij")
            out[fluid] = self.eps(X[fluid], Y[fluid], omega)
        return out

    def count_regions(self, body: Optional[str] = None) -> int:
        mask = self.metal if body is None else self.body_mask(body)
        return int(ndimage.label(mask)[1])


@dataclass(frozen=True)
class IntegrationSurface:
    """Polygon (list of vertices, counter-clockwise) around ``body``."""

    vertices: tuple
    body: str
    closed: bool = True

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, body: str) -> "IntegrationSurface":
        if not (x1 > x0 and y1 > y0):
            raise ValueError("degenerate rectangle")
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), body)


@dataclass(frozen=True, eq=False)
class SurfaceQuadrature:
    points: np.ndarray   # (P, dim)
    normals: np.ndarray  # (P, dim), outward
    weights: np.ndarray  # (P,)
    body: str

    def __len__(self):
        return len(self.weights)

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.weights))


def build_surface_quadrature(surface: IntegrationSurface, spacing: float,
                             density: int = 1) -> SurfaceQuadrature:
    """Midpoint rule along each polygon side with ``density`` points per spacing."""
    if not surface.closed:
        raise ValueError("integration surface must be a closed polygon")
    verts = np.asarray(surface.vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[0] < 3:
        raise ValueError("closed surface needs at least three vertices")
    # signed area decides orientation so normals point outward
    x, y = verts[:, 0], verts[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area2 == 0:
        raise ValueError("degenerate polygon")
    orient = 1.0 if area2 > 0 else -1.0
    pts, nrm, wts = [], [], []
    step = spacing / density
    for a, b in zip(verts, np.roll(verts, -1, axis=0)):
        edge = b - a
        length = float(np.hypot(*edge))
        n = max(1, int(round(length / step)))
        t = (np.arange(n) + 0.5) / n
        pts.append(a + t[:, None] * edge)
        normal = orient * np.array([edge[1], -edge[0]]) / length
        nrm.append(np.tile(normal, (n, 1)))
        wts.append(np.full(n, length / n))
    return SurfaceQuadrature(np.vstack(pts), np.vstack(nrm), np.concatenate(wts), surface.body)


def check_surface(grid: Grid, material: MaterialMap, quad: SurfaceQuadrature,
                  box_axes: Sequence[int] = (0, 1)) -> None:
    """Reject surfaces that touch metal, leave the box, or miss the grid lines.

    Clearance from the box wall is enforced along ``box_axes`` only.
    """
    h = grid.spacing
    tol = 1e-9
    for p, n in zip(quad.points, quad.normals):
        for ax in range(grid.dimension):
            if ax not in box_axes:
                continue
            lo, hi = grid.origin[ax], grid.origin[ax] + grid.extents[ax]
            if not lo + SURFACE_CLEARANCE * h - tol <= p[ax] <= hi - SURFACE_CLEARANCE * h + tol:
                raise ValueError(f"surface point {tuple(p)} too close to the box boundary")
        # stress stencils are only consistent on node lines
        ax_n = int(np.argmax(np.abs(n)))
        k = grid.to_index(p[ax_n], ax_n)
        if abs(k - round(k)) > 1e-6:
            raise ValueError(f"surface side through {tuple(p)} is not on a grid line")
    metal = material.metal
    if not metal.any():
        return
    idx = np.argwhere(metal)
    centers = np.column_stack([grid.origin[a] + (idx[:, a] + 0.5) * h for a in range(grid.dimension)])
    for p in quad.points:
        # Chebyshev distance from point to the nearest metal cell boundary
        gap = np.max(np.abs(centers - p), axis=1) - 0.5 * h
        if np.min(gap) < SURFACE_CLEARANCE * h - tol:
            raise ValueError(f"surface point {tuple(p)} lies within "
                             f"{SURFACE_CLEARANCE} cells of metal")


@dataclass(frozen=True)
class PistonGeometry:
    """Two square blocks (side s) a distance d apart between sidewalls at gap h."""

    d: float = 1.0
    s: float = 1.0
    h: float = 0.5
    sidewall_thickness: float = 0.25
    sidewalls: bool = True
    margin: float = 4.0        # x distance from outer block faces to the box
    open_margin: float = 3.0   # y distance to the box when sidewalls are off
    surface_offset: float = 0.25
    enclose: str = "left"

    def __post_init__(self):
        for name in ("d", "s", "h", "sidewall_thickness", "margin", "open_margin", "surface_offset"):
            if not getattr(self, name) > 0:
                raise ValueError(f"piston parameter {name} must be positive")
        if self.enclose not in ("left", "right"):
            raise ValueError("enclose must be 'left' or 'right'")


@dataclass(frozen=True, eq=False)
class Setup:
    grid: Grid
    material: MaterialMap
    surface: IntegrationSurface
    quadrature: SurfaceQuadrature


def _snap(value: float, res: int) -> float:
    return round(value * res) / res


def _rasterize(grid: Grid, boxes: Sequence[tuple]) -> np.ndarray:
    """Label cells whose centers fall inside axis-aligned boxes (x0, x1, y0, y1)."""
    X, Y = np.meshgrid(grid.cell_centers(0), grid.cell_centers(1), indexing="ij")
    labels = np.zeros(grid.shape, dtype=np.int16)
    for k, (x0, x1, y0, y1) in enumerate(boxes, start=1):
        labels[(X > x0) & (X < x1) & (Y > y0) & (Y < y1)] = k
    return labels


def _finish(grid, labels, names, surface, density) -> Setup:
    material = MaterialMap(labels, tuple(names))
    quad = build_surface_quadrature(surface, grid.spacing, density)
    check_surface(grid, material, quad)
    return Setup(grid, material, surface, quad)


def _enclosing_rectangle(bx0, bx1, by0, by1, offset, res, body):
    off = _snap(offset, res)
    if off * res < SURFACE_CLEARANCE:
        raise ValueError(f"surface offset {offset} is below {SURFACE_CLEARANCE} cells")
    return IntegrationSurface.rectangle(bx0 - off, bx1 + off, by0 - off, by1 + off, body)


def _box(res, half_x, half_y):
    nx = int(round(2 * half_x * res))
    ny = int(round(2 * half_y * res))
    return (-nx / (2 * res), -ny / (2 * res)), (nx, ny)


def build_piston(params: PistonGeometry = PistonGeometry(), resolution: int = 32,
                 surface_density: int = 1) -> Setup:
    p, res = params, int(resolution)
    if res < MIN_RESOLUTION:
        raise ValueError(f"resolution {res} < {MIN_RESOLUTION}")
    half_x = p.d / 2 + p.s + p.margin
    half_y = p.s / 2 + (p.h + p.sidewall_thickness if p.sidewalls else p.open_margin)
    origin, shape = _box(res, half_x, half_y)
    grid = Grid(2, origin, shape, res)
    boxes = [(-p.d / 2 - p.s, -p.d / 2, -p.s / 2, p.s / 2),
             (p.d / 2, p.d / 2 + p.s, -p.s / 2, p.s / 2)]
    names = ["left", "right"]
    if p.sidewalls:
        inner = p.s / 2 + p.h
        boxes += [(-half_x - 1, half_x + 1, -half_y - 1, -inner),
                  (-half_x - 1, half_x + 1, inner, half_y + 1)]
        names += ["wall_bottom", "wall_top"]
    labels = _rasterize(grid, boxes)
    bx = boxes[0] if p.enclose == "left" else boxes[1]
    surface = _enclosing_rectangle(*bx, p.surface_offset, res, p.enclose)
    return _finish(grid, labels, names, surface, surface_density)


def build_single_block(params: PistonGeometry = PistonGeometry(), resolution: int = 32,
                       surface_density: int = 1) -> Setup:
    """One block centered in a box that is mirror symmetric about x = 0."""
    p, res = params, int(resolution)
    half_x = p.s / 2 + p.d + p.margin
    half_y = p.s / 2 + (p.h + p.sidewall_thickness if p.sidewalls else p.open_margin)
    origin, shape = _box(res, half_x, half_y)
    grid = Grid(2, origin, shape, res)
    boxes = [(-p.s / 2, p.s / 2, -p.s / 2, p.s / 2)]
    names = ["block"]
    if p.sidewalls:
        inner = p.s / 2 + p.h
        boxes += [(-half_x - 1, half_x + 1, -half_y - 1, -inner),
                  (-half_x - 1, half_x + 1, inner, half_y + 1)]
        names += ["wall_bottom", "wall_top"]
    labels = _rasterize(grid, boxes)
    surface = _enclosing_rectangle(*boxes[0], p.surface_offset, res, "block")
    return _finish(grid, labels, names, surface, surface_density)


def build_parallel_plates_1d(d: float = 1.0, resolution: int = 32,
                             eval_x: Optional[float] = None) -> Setup:
    """Vacuum gap [0, d] between two one-cell perfect mirrors.

    The surface degenerates to one point in the gap with normal -x, i.e. the
    gap-side face of a region around the right mirror.
    """
    res = int(resolution)
    if res < MIN_RESOLUTION:
        raise ValueError(f"resolution {res} < {MIN_RESOLUTION}")
    n_gap = int(round(d * res))
    if abs(n_gap - d * res) > 1e-9:
        raise ValueError("d must be a whole number of cells")
    h = 1.0 / res
    grid = Grid(1, (-h,), (n_gap + 2,), res)
    labels = np.zeros(n_gap + 2, dtype=np.int16)
    labels[0], labels[-1] = 1, 2
    material = MaterialMap(labels, ("left_mirror", "right_mirror"))
    x = d / 2 if eval_x is None else float(eval_x)
    if not 0 < x < d:
        raise ValueError("evaluation point must lie inside the gap")
    quad = SurfaceQuadrature(np.array([[x]]), np.array([[-1.0]]), np.array([1.0]), "right_mirror")
    surface = IntegrationSurface(((x,),), "right_mirror", closed=True)
    return Setup(grid, material, surface, quad)


def build_channel_plate(d: float = 1.0, L: float = 2.0, H: float = 1.0, t: float = 0.5,
                        resolution: int = 16, offset: float = 0.25) -> Setup:
    """Full-height plate in a perfect-metal channel of height H.

    The plate (thickness t) sits a distance L from the left wall and d from
    the right wall. Only the two vertical surface lines carry stress: on
    the channel walls T_xy vanishes, so the horizontal sides are dropped.
    """
    res = int(resolution)
    nx = int(round((L + t + d) * res))
    ny = int(round(H * res))
    grid = Grid(2, (0.0, 0.0), (nx, ny), res)
    labels = _rasterize(grid, [(L, L + t, -1.0, H + 1.0)])
    material = MaterialMap(labels, ("plate",))
    off = _snap(offset, res)
    xs = (L - off, L + t + off)
    pts, nrm = [], []
    y = (np.arange(ny) + 0.5) / res
    for x, sgn in zip(xs, (-1.0, 1.0)):
        pts.append(np.column_stack([np.full(ny, x), y]))
        nrm.append(np.tile([sgn, 0.0], (ny, 1)))
    quad = SurfaceQuadrature(np.vstack(pts), np.vstack(nrm), np.full(2 * ny, 1.0 / res), "plate")
    check_surface(grid, material, quad, box_axes=(0,))
    surface = IntegrationSurface(((xs[0], 0.0), (xs[1], 0.0), (xs[1], H), (xs[0], H)), "plate")
    return Setup(grid, material, surface, quad)


def load_mask_csv(path) -> tuple:
    """Read a 0/1 metal mask; header comments give x0, y0 and resolution.

    Row r of the file is the row of cells at y index r (from y0 upward);
    columns run along x. Connected metal regions become separate bodies
    named body1, body2, ... in scan order.
    """
    meta, rows = {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].replace(",", " ").split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k.strip()] = float(v)
                continue
            rows.append([int(v) for v in line.replace(",", " ").split()])
    missing = {"x0", "y0", "resolution"} - set(meta)
    if missing:
        raise ValueError(f"{path}: header lacks {sorted(missing)}")
    mask = np.asarray(rows, dtype=int).T.astype(bool)
    grid = Grid(2, (meta["x0"], meta["y0"]), mask.shape, int(meta["resolution"]))
    labels, n = ndimage.label(mask)
    names = tuple(f"body{k}" for k in range(1, n + 1))
    return grid, MaterialMap(labels.astype(np.int16), names)


def setup_from_mask(grid: Grid, material: MaterialMap, surface: IntegrationSurface,
                    surface_density: int = 1) -> Setup:
    return _finish(grid, material.labels, material.body_names, surface, surface_density)


def mirror_x(material: MaterialMap) -> np.ndarray:
    """Metal mask reflected x -> -x (for grids symmetric about x = 0)."""
    return material.metal[::-1, ...]
