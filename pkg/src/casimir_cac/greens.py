"""Discrete Green's functions of [curl curl - eps omega^2] G = delta e_j.

2D z-invariant grids split into two scalar problems:

* ``TM``: out-of-plane E. Unknown E_z on grid nodes; in-plane H from the
  curl on node-to-node edges.
* ``TE``: out-of-plane H, solved in electric form. E_x on x-edges
  (i+1/2, j), E_y on y-edges (i, j+1/2); H_z = curl E lives at cell centers.

In 1D the unknown is E_z on nodes and H_y is its curl. Field values touching
a perfect-metal cell or the box boundary are pinned to zero and removed
from the system. The discrete delta is a unit source at one unknown
divided by the cell area, so correlation quadratic forms read v^T A^-1 w / h^dim.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (sp.linalg.norm)
from scipy import ndimage
from scipy.sparse.linalg import splu

from .geometry import Grid, MaterialMap

POLARIZATIONS = ("TM", "TE", "1D")

# stencil component table: name -> (field kind, 3-vector index)
COMPONENTS = {
    "TM": (("Ez", "E", 2), ("Hx", "H", 0), ("Hy", "H", 1)),
    "TE": (("Ex", "E", 0), ("Ey", "E", 1), ("Hz", "H", 2)),
    "1D": (("Ez", "E", 2), ("Hy", "H", 1)),
}

RESIDUAL_TOL = 1e-8
PIVOT_TOL = 1e-13
RECIPROCITY_TOL = 1e-10
MAX_REFINE = 3
BACKWARD_TOL = 1e-12


class SolverBreakdown(RuntimeError):
    """Singular or inaccurate factorization at one frequency."""

    def __init__(self, message, omega=None, residual=None, pivot_ratio=None, xi=None):
        super().__init__(message)
        self.omega = omega
        self.residual = residual
        self.pivot_ratio = pivot_ratio
        self.xi = xi

    def __str__(self):
        base = super().__str__()
        parts = []
        if self.xi is not None:
            parts.append(f"xi={self.xi:.6g}")
        if self.omega is not None:
            parts.append(f"omega={complex(self.omega):.6g}")
        if self.pivot_ratio is not None:
            parts.append(f"min/max |pivot|={self.pivot_ratio:.3e}")
        if self.residual is not None:
            parts.append(f"residual={self.residual:.3e}")
        return f"{base} ({', '.join(parts)})" if parts else base


def _pad_metal(material: MaterialMap) -> np.ndarray:
    """Metal mask with a one-cell metal frame standing in for the PEC box."""
    m = material.metal
    pad = np.ones(tuple(n + 2 for n in m.shape), dtype=bool)
    pad[tuple(slice(1, -1) for _ in m.shape)] = m
    return pad


def _index(free: np.ndarray, start: int = 0) -> np.ndarray:
    idx = -np.ones(free.shape, dtype=np.int64)
    idx[free] = start + np.arange(int(free.sum()))
    return idx


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=shape)


class Discretization:
    """Index maps, curl matrix and field-location metadata for one polarization."""

    def __init__(self, grid: Grid, material: MaterialMap, polarization: str):
        if polarization not in POLARIZATIONS:
            raise ValueError(f"unknown polarization {polarization!r}")
        if (polarization == "1D") != (grid.dimension == 1):
            raise ValueError("1D polarization requires a 1D grid and vice versa")
        if material.labels.shape != grid.shape:
            raise ValueError("material map does not match grid")
        self.grid = grid
        self.material = material
        self.polarization = polarization
        getattr(self, f"_build_{polarization.lower()}")()

    # -- topology -------------------------------------------------------

    def _build_1d(self):
        (n_cells,), h = self.grid.shape, self.grid.spacing
        pad = _pad_metal(self.material)
        free = ~(pad[:-1] | pad[1:])          # node k touches cells k-1, k
        self.maps = {"Ez": _index(free)}
        self.n = int(free.sum())
        self.offsets = {"Ez": (0.0,)}
        k = np.arange(n_cells)                # H_y on cell k: -(E[k+1] - E[k]) / h
        idx = self.maps["Ez"]
        rows, cols, vals = [], [], []
        for c, v in ((idx[k + 1], -1.0 / h), (idx[k], 1.0 / h)):
            m = c >= 0
            rows.append(k[m]); cols.append(c[m]); vals.append(np.full(m.sum(), v))
        self.curl = _coo(rows, cols, vals, (n_cells, self.n))
        self._eps_cells_of = {"Ez": ((-1,), (0,))}

    def _build_tm(self):
        nx, ny = self.grid.shape
        h = self.grid.spacing
        pad = _pad_metal(self.material)
        touch = pad[:-1, :-1] | pad[1:, :-1] | pad[:-1, 1:] | pad[1:, 1:]
        idx = _index(~touch)
        self.maps = {"Ez": idx}
        self.n = int((~touch).sum())
        self.offsets = {"Ez": (0.0, 0.0)}
        rows, cols, vals = [], [], []
        # H_x on (i, j+1/2): +dEz/dy
        I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
        r = np.arange(I.size)
        for c, v in ((idx[I, J + 1].ravel(), 1.0 / h), (idx[I, J].ravel(), -1.0 / h)):
            m = c >= 0
            rows.append(r[m]); cols.append(c[m]); vals.append(np.full(m.sum(), v))
        n_hx = I.size
        # H_y on (i+1/2, j): -dEz/dx
        I, J = np.meshgrid(np.arange(nx), np.arange(ny + 1), indexing="ij")
        r = n_hx + np.arange(I.size)
        for c, v in ((idx[I + 1, J].ravel(), -1.0 / h), (idx[I, J].ravel(), 1.0 / h)):
            m = c >= 0
            rows.append(r[m]); cols.append(c[m]); vals.append(np.full(m.sum(), v))
        self.curl = _coo(rows, cols, vals, (n_hx + I.size, self.n))
        # node (i, j) averages cells (i-1..i, j-1..j)
        self._eps_cells_of = {"Ez": ((-1, -1), (0, -1), (-1, 0), (0, 0))}

    def _build_te(self):
        nx, ny = self.grid.shape
        h = self.grid.spacing
        pad = _pad_metal(self.material)
        ex_pin = pad[1:-1, :-1] | pad[1:-1, 1:]   # x-edge (i+1/2, j): cells (i, j-1), (i, j)
        ey_pin = pad[:-1, 1:-1] | pad[1:, 1:-1]   # y-edge (i, j+1/2): cells (i-1, j), (i, j)
        ix = _index(~ex_pin)
        iy = _index(~ey_pin, int((~ex_pin).sum()))
        self.maps = {"Ex": ix, "Ey": iy}
        self.n = int((~ex_pin).sum() + (~ey_pin).sum())
        self.offsets = {"Ex": (0.5, 0.0), "Ey": (0.0, 0.5)}
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        r = (I * ny + J).ravel()
        rows, cols, vals = [], [], []
        for c, v in ((iy[I + 1, J], 1.0 / h), (iy[I, J], -1.0 / h),
                     (ix[I, J + 1], -1.0 / h), (ix[I, J], 1.0 / h)):
            c = c.ravel()
            m = c >= 0
            rows.append(r[m]); cols.append(c[m]); vals.append(np.full(m.sum(), v))
        self.curl = _coo(rows, cols, vals, (nx * ny, self.n))
        self._eps_cells_of = {"Ex": ((0, -1), (0, 0)), "Ey": ((-1, 0), (0, 0))}
        fluid = ~self.material.metal
        self.cell_map = _index(fluid)
        self.curl_fluid = self.curl[np.flatnonzero(fluid.ravel())].tocsr()
        regions, _ = ndimage.label(fluid)
        self.cell_regions = regions[fluid] - 1

    def cell_stencils(self, points: np.ndarray) -> sp.csc_matrix:
        """Bilinear weights of cell-centered H_z on fluid cells, one column per point."""
        rows, cols, vals = [], [], []
        idx = self.cell_map
        for p, pt in enumerate(np.atleast_2d(points)):
            for site, w in self._sites(pt, (0.5, 0.5)):
                if all(0 <= site[a] < idx.shape[a] for a in range(2)) and idx[site] >= 0:
                    rows.append(idx[site]); cols.append(p); vals.append(w)
        n_pts = len(np.atleast_2d(points))
        return sp.csc_matrix((np.asarray(vals, dtype=float), (rows, cols)),
                             shape=(int((idx >= 0).sum()), n_pts))

    # -- material sampling ----------------------------------------------

    def eps_at_dofs(self, omega) -> np.ndarray:
        """Permittivity at each unknown: mean of the adjacent (fluid) cells."""
        if self.material.eps is None:
            return np.ones(self.n, dtype=complex)
        cells = self.material.eps_cells(self.grid, omega)
        out = np.empty(self.n, dtype=complex)
        for name, idx in self.maps.items():
            sel = np.argwhere(idx >= 0)
            acc = np.zeros(len(sel), dtype=complex)
            for off in self._eps_cells_of[name]:
                acc += cells[tuple(sel[:, a] + off[a] for a in range(sel.shape[1]))]
            out[idx[tuple(sel.T)]] = acc / len(self._eps_cells_of[name])
        return out

    def dof_positions(self):
        """(component name, coordinates) for every unknown, ordered by index."""
        comp = np.empty(self.n, dtype=object)
        pos = np.empty((self.n, self.grid.dimension))
        h = self.grid.spacing
        for name, idx in self.maps.items():
            sel = np.argwhere(idx >= 0)
            off = self.offsets[name]
            k = idx[tuple(sel.T)]
            comp[k] = name
            for a in range(self.grid.dimension):
                pos[k, a] = self.grid.origin[a] + (sel[:, a] + off[a]) * h
        return comp, pos

    # -- stencils -------------------------------------------------------

    def _sites(self, point, offset):
        """Bilinear (or linear) interpolation sites of a staggered subgrid."""
        out = [((), 1.0)]
        for a in range(self.grid.dimension):
            f = float(self.grid.to_index(point[a], a)) - offset[a]
            i0 = int(np.floor(f + 1e-9))
            t = f - i0
            nxt = []
            for site, w in out:
                for di, wt in ((0, 1.0 - t), (1, t)):
                    if abs(wt) > 1e-12:
                        nxt.append((site + (i0 + di,), w * wt))
            out = nxt
        return out

    def _add(self, rows, cols, vals, name, site, col, w):
        idx = self.maps[name]
        if all(0 <= site[a] < idx.shape[a] for a in range(len(site))):
            k = idx[site]
            if k >= 0:
                rows.append(k); cols.append(col); vals.append(w)

    def stencils(self, points: np.ndarray) -> sp.csc_matrix:
        """Sparse (n, k*P) matrix of field read-out vectors, k components per point.

        Columns follow COMPONENTS[polarization]; H columns are curl stencils,
        so v_H^T x is the curl of field x at the point.
        """
        h = self.grid.spacing
        comps = COMPONENTS[self.polarization]
        k = len(comps)
        rows, cols, vals = [], [], []
        add = lambda name, site, col, w: self._add(rows, cols, vals, name, site, col, w)
        for p, pt in enumerate(np.atleast_2d(points)):
            base = k * p
            if self.polarization == "1D":
                for (i,), w in self._sites(pt, (0.0,)):
                    add("Ez", (i,), base, w)
                for (i,), w in self._sites(pt, (0.5,)):
                    add("Ez", (i + 1,), base + 1, -w / h); add("Ez", (i,), base + 1, w / h)
            elif self.polarization == "TM":
                for s, w in self._sites(pt, (0.0, 0.0)):
                    add("Ez", s, base, w)
                for (i, j), w in self._sites(pt, (0.0, 0.5)):
                    add("Ez", (i, j + 1), base + 1, w / h); add("Ez", (i, j), base + 1, -w / h)
                for (i, j), w in self._sites(pt, (0.5, 0.0)):
                    add("Ez", (i + 1, j), base + 2, -w / h); add("Ez", (i, j), base + 2, w / h)
            else:
                for s, w in self._sites(pt, (0.5, 0.0)):
                    add("Ex", s, base, w)
                for s, w in self._sites(pt, (0.0, 0.5)):
                    add("Ey", s, base + 1, w)
                for (i, j), w in self._sites(pt, (0.5, 0.5)):
                    add("Ey", (i + 1, j), base + 2, w / h); add("Ey", (i, j), base + 2, -w / h)
                    add("Ex", (i, j + 1), base + 2, -w / h); add("Ex", (i, j), base + 2, w / h)
        n_cols = k * len(np.atleast_2d(points))
        return sp.csc_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(self.n, n_cols))


@dataclass(eq=False)
class Operator:
    matrix: sp.csc_matrix
    disc: Discretization
    omega: complex


def assemble_operator(grid: Grid, material: MaterialMap, omega, polarization: str = "TM",
                      disc: Optional[Discretization] = None) -> Operator:
    """curl^T curl - eps omega^2 on the free unknowns of one polarization."""
    omega = complex(omega)
    if omega == 0:
        raise ValueError("omega must be nonzero")
    if disc is None:
        disc = Discretization(grid, material, polarization)
    shift = disc.eps_at_dofs(omega) * omega**2
    cc = (disc.curl.T @ disc.curl).tocsc()
    if np.all(shift.imag == 0):
        mat = (cc - sp.diags(shift.real)).tocsc()
    else:
        mat = (cc.astype(complex) - sp.diags(shift)).tocsc()
    mat.sort_indices()
    return Operator(mat, disc, omega)


class FrequencySolver:
    """Sparse LU of one operator, shared by every right-hand side at this frequency."""

    def __init__(self, op: Operator):
        self.op = op
        self.disc = op.disc
        self.cell_area = op.disc.grid.cell_area
        try:
            self.lu = splu(op.matrix, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverBreakdown(f"factorization failed: {exc}", omega=op.omega) from exc
        self.anorm = float(sp.linalg.norm(op.matrix, 1))
        self.residual = 0.0
        self.backward_error = 0.0
        piv = np.abs(self.lu.U.diagonal())
        self.pivot_ratio = float(piv.min() / piv.max()) if piv.size else 1.0
        if not self.pivot_ratio > PIVOT_TOL:
            raise SolverBreakdown("near-singular operator", omega=op.omega,
                                  pivot_ratio=self.pivot_ratio)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve with a residual check; see ``residual`` and ``backward_error``.

        The residual is measured relative to the source norm. Electric-form
        TE systems at very small omega are too ill-conditioned for that bound
        in double precision (gradient modes have eigenvalue ~ -omega^2); such
        solves are accepted only if the normwise backward error
        |r| / (|A| |x| + |b|) is at roundoff level.
        """
        rhs = np.ascontiguousarray(np.asarray(rhs),
                                   dtype=np.result_type(np.asarray(rhs).dtype, self.op.matrix.dtype))
        x = self.lu.solve(rhs)
        bn = np.linalg.norm(np.atleast_2d(rhs.T), axis=-1)
        for _ in range(1 + MAX_REFINE):
            r = self.op.matrix @ x - rhs
            rn = np.linalg.norm(np.atleast_2d(r.T), axis=-1)
            res = float(np.max(rn / np.where(bn > 0, bn, 1.0)))
            if res <= RESIDUAL_TOL:
                break
            x = x - self.lu.solve(np.ascontiguousarray(r))
        xn = np.linalg.norm(np.atleast_2d(x.T), axis=-1)
        berr = float(np.max(rn / (self.anorm * xn + bn + 1e-300)))
        self.residual = max(self.residual, res)
        self.backward_error = max(self.backward_error, berr)
        if res > RESIDUAL_TOL and berr > BACKWARD_TOL:
            raise SolverBreakdown("residual check failed", omega=self.op.omega,
                                  residual=res, pivot_ratio=self.pivot_ratio)
        return x

    def correlation_blocks(self, points: np.ndarray, chunk_points: int = 64) -> np.ndarray:
        """Per-point stencil blocks in COMPONENTS order (see point_blocks)."""
        k = len(COMPONENTS[self.disc.polarization])
        return self.point_blocks(self.disc.stencils(points), k, chunk_points)

    def point_blocks(self, V: sp.csc_matrix, k: int, chunk_points: int = 64) -> np.ndarray:
        """Diagonal k-by-k blocks of V^T A^-1 V / cell_area, one per point.

        Off-diagonal blocks inside each chunk are used as a reciprocity check.
        """
        n_pts = V.shape[1] // k
        out = np.empty((n_pts, k, k), dtype=complex)
        for start in range(0, n_pts, chunk_points):
            stop = min(n_pts, start + chunk_points)
            Vc = V[:, k * start:k * stop]
            X = self.solve(Vc.toarray())
            Q = np.asarray(Vc.T @ X) / self.cell_area
            asym = np.max(np.abs(Q - Q.T))
            if asym > RECIPROCITY_TOL * max(1.0, np.max(np.abs(Q))):
                raise SolverBreakdown(f"reciprocity violated by {asym:.3e}", omega=self.op.omega)
            m = stop - start
            blocks = Q.reshape(m, k, m, k)
            out[start:stop] = blocks[np.arange(m), :, np.arange(m), :]
        return out


def _check_symmetric(Q: np.ndarray, omega) -> None:
    asym = np.max(np.abs(Q - Q.T))
    if asym > RECIPROCITY_TOL * max(1.0, np.max(np.abs(Q))):
        raise SolverBreakdown(f"reciprocity violated by {asym:.3e}", omega=omega)


class MagneticTESolver:
    """TE correlations through the cell-centered H_z operator.

    With E = diag(eps at edges), M = C E^-1 C^T on fluid cells and
    K = (M - omega^2)^-1, the electric-form Green's function G satisfies

        omega^2 G = E^-1 C^T K C E^-1 - E^-1,    C G C^T = 1 + omega^2 K.

    M is singular only on constants over each connected fluid region;
    those modes are removed analytically (K 1 = -1 / omega^2), so the
    factorization never carries the electric form's many near-null
    gradient modes.
    """

    def __init__(self, op: Operator):
        disc = op.disc
        if disc.polarization != "TE":
            raise ValueError("magnetic solver is for the TE polarization")
        self.op, self.disc = op, disc
        self.cell_area = disc.grid.cell_area
        self.w2 = complex(op.omega) ** 2
        self.einv = 1.0 / disc.eps_at_dofs(op.omega)
        if np.all(self.einv.imag == 0):
            self.einv = self.einv.real
        Cf = disc.curl_fluid
        M = (Cf @ sp.diags(self.einv) @ Cf.T).tocsc()
        shift = self.w2.real if self.w2.imag == 0 and np.isrealobj(self.einv) else self.w2
        self.matrix = (M - shift * sp.identity(M.shape[0], format="csc")).tocsc()
        self.matrix.sort_indices()
        try:
            self.lu = splu(self.matrix, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverBreakdown(f"factorization failed: {exc}", omega=op.omega) from exc
        reg = disc.cell_regions
        self.n_regions = int(reg.max()) + 1 if reg.size else 0
        self.region_size = np.bincount(reg, minlength=self.n_regions).astype(float)
        self.residual = 0.0

    def _region_sums(self, B: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n_regions, B.shape[1]), dtype=B.dtype)
        np.add.at(out, self.disc.cell_regions, B)
        return out

    def _project(self, B: np.ndarray) -> np.ndarray:
        means = self._region_sums(B) / self.region_size[:, None]
        return B - means[self.disc.cell_regions]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """K P rhs, with P removing each region's mean."""
        dtype = np.result_type(rhs.dtype, self.matrix.dtype)
        b = np.ascontiguousarray(self._project(np.asarray(rhs, dtype=dtype)))
        x = self._project(self.lu.solve(b))
        bn = np.linalg.norm(b, axis=0)
        for _ in range(1 + MAX_REFINE):
            r = self.matrix @ x - b
            res = float(np.max(np.linalg.norm(r, axis=0) / np.where(bn > 0, bn, 1.0)))
            if res <= RESIDUAL_TOL:
                break
            x = self._project(x - self.lu.solve(np.ascontiguousarray(r)))
        self.residual = max(self.residual, res)
        if res > RESIDUAL_TOL:
            raise SolverBreakdown("residual check failed", omega=self.op.omega, residual=res)
        return x

    def correlation_blocks(self, points: np.ndarray, chunk_points: int = 64) -> np.ndarray:
        """(P, 3, 3) blocks over (Ex, Ey, Hz); E-H cross terms are not formed."""
        disc = self.disc
        V = disc.stencils(points)
        Tst = disc.cell_stencils(points)
        n_pts = Tst.shape[1]
        out = np.zeros((n_pts, 3, 3), dtype=complex)
        e_cols = np.array([3 * p + c for p in range(n_pts) for c in (0, 1)])
        Cf = disc.curl_fluid
        for start in range(0, n_pts, chunk_points):
            stop = min(n_pts, start + chunk_points)
            m = stop - start
            VE = V[:, e_cols[2 * start:2 * stop]]
            U = np.asarray((Cf @ sp.diags(self.einv) @ VE).todense())
            T = Tst[:, start:stop].toarray()
            X = self.solve(np.hstack([U, T]))
            XU, XT = X[:, :2 * m], X[:, 2 * m:]
            QE = U.T @ XU - np.asarray((VE.T @ sp.diags(self.einv) @ VE).todense())
            ones = self._region_sums(T)
            QH = T.T @ T + self.w2 * (T.T @ XT) - ones.T @ (ones / self.region_size[:, None])
            _check_symmetric(QE, self.op.omega)
            _check_symmetric(QH, self.op.omega)
            QE = QE.reshape(m, 2, m, 2)[np.arange(m), :, np.arange(m), :] / self.w2
            out[start:stop, :2, :2] = QE / self.cell_area
            out[start:stop, 2, 2] = np.diagonal(QH) / self.cell_area
        return out


def make_solver(op: Operator):
    """Solver used for correlations: magnetic form for TE, direct LU otherwise."""
    return MagneticTESolver(op) if op.disc.polarization == "TE" else FrequencySolver(op)


@dataclass(eq=False)
class GreensField:
    """Response to a unit point source, stored on the native staggered subgrids."""

    polarization: str
    omega: complex
    source_component: str
    source_position: tuple
    fields: dict                    # component -> complex array on its subgrid
    grid: Grid
    offsets: dict = field(default_factory=dict)
    residual: float = 0.0

    def value_at(self, component: str, index) -> complex:
        return complex(self.fields[component][tuple(index)])

    def to_csv(self, path, header: Optional[str] = None) -> None:
        h = self.grid.spacing
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            cols = ["x", "y"][: self.grid.dimension]
            w.writerow(cols + ["component", "re", "im"])
            for name, arr in self.fields.items():
                off = self.offsets[name]
                for site in np.ndindex(arr.shape):
                    coords = [self.grid.origin[a] + (site[a] + off[a]) * h
                              for a in range(self.grid.dimension)]
                    v = arr[site]
                    w.writerow([f"{c:.10g}" for c in coords] + [name, repr(float(v.real)), repr(float(v.imag))])


def source_component(polarization: str, orientation: str) -> str:
    table = {"TM": {"z": "Ez"}, "TE": {"x": "Ex", "y": "Ey"}, "1D": {"z": "Ez"}}
    try:
        return table[polarization][orientation]
    except KeyError:
        raise ValueError(f"orientation {orientation!r} is not carried by {polarization}") from None


def nearest_dof(disc: Discretization, component: str, position) -> tuple:
    idx = disc.maps[component]
    off = disc.offsets[component]
    site = tuple(int(round(float(disc.grid.to_index(position[a], a)) - off[a]))
                 for a in range(disc.grid.dimension))
    if not all(0 <= site[a] < idx.shape[a] for a in range(len(site))) or idx[site] < 0:
        raise ValueError(f"source position {tuple(position)} is in metal or outside the grid")
    return site


def solve_point_source(op: Operator, position, orientation: str = "z",
                       solver: Optional[FrequencySolver] = None) -> GreensField:
    disc = op.disc
    comp = source_component(disc.polarization, orientation)
    site = nearest_dof(disc, comp, position)
    rhs = np.zeros(disc.n, dtype=op.matrix.dtype)
    rhs[disc.maps[comp][site]] = 1.0 / disc.grid.cell_area
    solver = solver or FrequencySolver(op)
    x = solver.solve(rhs)
    res = float(np.linalg.norm(op.matrix @ x - rhs) / np.linalg.norm(rhs))
    fields = {}
    for name, idx in disc.maps.items():
        arr = np.zeros(idx.shape, dtype=complex)
        m = idx >= 0
        arr[m] = x[idx[m]]
        fields[name] = arr
    h = disc.grid.spacing
    src = tuple(disc.grid.origin[a] + (site[a] + disc.offsets[comp][a]) * h
                for a in range(disc.grid.dimension))
    return GreensField(disc.polarization, op.omega, comp, src, fields, disc.grid,
                       dict(disc.offsets), res)


def half_line_blocks(omega, spacing: float, distances, eps: complex = 1.0) -> np.ndarray:
    """Closed-form 1D correlation blocks on a half-infinite lattice.

    The lattice has a pinned node at the mirror and uniform spacing; points
    sit at ``distances`` from the mirror. Uses the exact lattice Green's
    function R(n, m) = h^2 (lam^|n-m| - lam^(n+m)) / (1/lam - lam), where
    lam is the root of lam + 1/lam = 2 - eps omega^2 h^2 with |lam| < 1.
    Returns (P, 2, 2) blocks in the (Ez, Hy) component order.
    """
    h = spacing
    b = 2.0 - complex(eps) * complex(omega) ** 2 * h * h
    disc = np.sqrt(b * b - 4.0 + 0j)
    lam = (b - disc) / 2.0
    if abs(lam) >= 1.0:
        lam = (b + disc) / 2.0
    if not abs(lam) < 1.0:
        raise SolverBreakdown("half-line lattice has no decaying solution", omega=omega)
    pref = h * h / (1.0 / lam - lam)
    out = []
    for t in np.atleast_1d(distances):
        f = t / h
        stencil = [{}, {}]
        i0 = int(np.floor(f + 1e-9)); tt = f - i0
        for di, w in ((0, 1 - tt), (1, tt)):
            if abs(w) > 1e-12:
                stencil[0][i0 + di] = stencil[0].get(i0 + di, 0.0) + w
        fh = f - 0.5
        i0 = int(np.floor(fh + 1e-9)); tt = fh - i0
        for di, w in ((0, 1 - tt), (1, tt)):
            if abs(w) > 1e-12:
                i = i0 + di   # H between nodes i and i+1 (sign irrelevant in the quadratic form)
                stencil[1][i + 1] = stencil[1].get(i + 1, 0.0) - w / h
                stencil[1][i] = stencil[1].get(i, 0.0) + w / h
        blk = np.zeros((2, 2), dtype=complex)
        for a in range(2):
            for c in range(2):
                acc = 0j
                for n, wn in stencil[a].items():
                    if n <= 0:
                        continue
                    for m, wm in stencil[c].items():
                        if m <= 0:
                            continue
                        acc += wn * wm * (lam ** abs(n - m) - lam ** (n + m))
                blk[a, c] = acc * pref / h
        out.append(blk)
    return np.asarray(out)
