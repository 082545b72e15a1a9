"""Independent references: 1D Lifshitz force, mode sums, dense solves.

Nothing here imports the engine's solver; the dense operator is rebuilt
from explicit loops over the grid.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import mpmath as mp
import numpy as np
from scipy.integrate import quad

from .geometry import Grid, MaterialMap


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    oracle: float
    engine: float
    tolerance: float
    method: str

    @property
    def rel_error(self) -> float:
        a, b = abs(self.oracle), abs(self.engine)
        m = max(a, b)
        return 0.0 if m == 0 else abs(self.oracle - self.engine) / m

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance


def write_reports(reports, path, header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(["quantity", "oracle", "engine", "rel_error", "tolerance", "passed", "method"])
        for r in reports:
            w.writerow([r.quantity, repr(float(r.oracle)), repr(float(r.engine)), f"{r.rel_error:.3e}",
                        f"{r.tolerance:.1e}", r.passed, r.method])


# -- 1D parallel mirrors ------------------------------------------------------

def lifshitz_1d_force(d: float, dps: int = 30) -> float:
    """Force per scalar polarization between 1D perfect mirrors (negative = attractive).

    F = -(1/pi) int_0^inf xi e^{-2 xi d} / (1 - e^{-2 xi d}) dxi.
    """
    if not d > 0:
        raise ValueError("separation must be positive")
    with mp.workdps(dps):
        d_ = mp.mpf(d)
        f = lambda x: x * mp.exp(-2 * x * d_) / (-mp.expm1(-2 * x * d_))
        val = -mp.quad(f, [0, 1 / d_, 10 / d_, mp.inf]) / mp.pi
        return float(val)


def mode_sum_1d_force(d: float, cutoff: float = 1e6, dps: int = 60) -> float:
    """Same force from the cutoff-regularized zero-point mode sum.

    E(d) = (1/2) sum_n (n pi / d) e^{-n pi / (d Lambda)} in closed form,
    minus the bulk term d Lambda^2 / (2 pi); F = -dE/dd. The remainder
    is O(Lambda^-2).
    """
    with mp.workdps(dps):
        lam = mp.mpf(cutoff)

        def energy(dd):
            a = mp.pi / (dd * lam)
            s = mp.exp(-a) / (-mp.expm1(-a)) ** 2
            return mp.pi / (2 * dd) * s - dd * lam**2 / (2 * mp.pi)

        return float(-mp.diff(energy, mp.mpf(d)))


def gap_correlations_1d(xi: float, d: float, x: float) -> tuple:
    """Regularized 1D gap minus bulk values (g, d_x d_x' g) at imaginary frequency i xi.

    g solves (-d^2/dx^2 + xi^2) g = delta with g = 0 at 0 and d.
    """
    sh = np.sinh(xi * d)
    g = np.sinh(xi * x) * np.sinh(xi * (d - x)) / (xi * sh) - 1.0 / (2.0 * xi)
    ddg = -xi * np.cosh(xi * x) * np.cosh(xi * (d - x)) / sh + xi / 2.0
    return g, ddg


def gap_stress_1d(xi: float, d: float) -> float:
    """T_xx in the gap at omega = i xi (position independent)."""
    return xi / np.tanh(xi * d) / (2.0 * np.pi)


# -- dense operator, independent stencil --------------------------------------

@dataclass(eq=False)
class DenseGreens:
    labels: list       # (component, site tuple) per unknown
    positions: np.ndarray
    matrix: np.ndarray
    greens: np.ndarray  # A^-1 / cell area

    def entry(self, comp_a, site_a, comp_b, site_b) -> complex:
        lookup = {lab: k for k, lab in enumerate(self.labels)}
        return complex(self.greens[lookup[(comp_a, tuple(site_a))], lookup[(comp_b, tuple(site_b))]])


def _is_metal(mask, cell):
    for a, c in enumerate(cell):
        if c < 0 or c >= mask.shape[a]:
            return True
    return bool(mask[tuple(cell)])


def dense_operator(grid: Grid, material: MaterialMap, omega, polarization: str = "TM"):
    """Dense curl-curl minus eps omega^2, built node by node.

    Returns (labels, positions, matrix). Vacuum (eps = 1) only.
    """
    if material.eps is not None:
        raise ValueError("dense oracle supports vacuum fill only")
    mask, h, w2 = material.metal, grid.spacing, complex(omega) ** 2
    if np.prod(grid.shape) > 144:
        raise ValueError("dense oracle is limited to 12 x 12 cells")
    labels, pos = [], []
    if polarization == "1D":
        (n,) = grid.shape
        for k in range(n + 1):
            if not (_is_metal(mask, (k - 1,)) or _is_metal(mask, (k,))):
                labels.append(("Ez", (k,))); pos.append((grid.origin[0] + k * h,))
        idx = {lab: i for i, lab in enumerate(labels)}
        A = np.zeros((len(labels), len(labels)), dtype=complex)
        for (c, (k,)), i in idx.items():
            A[i, i] = 2.0 / h**2 - w2
            for nb in (k - 1, k + 1):
                j = idx.get(("Ez", (nb,)))
                if j is not None:
                    A[i, j] = -1.0 / h**2
        return labels, np.array(pos), A
    nx, ny = grid.shape
    if polarization == "TM":
        for i in range(nx + 1):
            for j in range(ny + 1):
                cells = [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
                if not any(_is_metal(mask, c) for c in cells):
                    labels.append(("Ez", (i, j)))
                    pos.append((grid.origin[0] + i * h, grid.origin[1] + j * h))
        idx = {lab: k for k, lab in enumerate(labels)}
        A = np.zeros((len(labels), len(labels)), dtype=complex)
        for (c, (i, j)), k in idx.items():
            A[k, k] = 4.0 / h**2 - w2
            for nb in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                m = idx.get(("Ez", nb))
                if m is not None:
                    A[k, m] = -1.0 / h**2
        return labels, np.array(pos), A
    if polarization != "TE":
        raise ValueError(polarization)
    # electric-form TE: curl E on each cell, A = C^T C - omega^2
    for i in range(nx):
        for j in range(ny + 1):
            if not (_is_metal(mask, (i, j - 1)) or _is_metal(mask, (i, j))):
                labels.append(("Ex", (i, j)))
                pos.append((grid.origin[0] + (i + 0.5) * h, grid.origin[1] + j * h))
    for i in range(nx + 1):
        for j in range(ny):
            if not (_is_metal(mask, (i - 1, j)) or _is_metal(mask, (i, j))):
                labels.append(("Ey", (i, j)))
                pos.append((grid.origin[0] + i * h, grid.origin[1] + (j + 0.5) * h))
    idx = {lab: k for k, lab in enumerate(labels)}
    C = np.zeros((nx * ny, len(labels)))
    for i in range(nx):
        for j in range(ny):
            row = i * ny + j
            for lab, v in ((("Ey", (i + 1, j)), 1.0), (("Ey", (i, j)), -1.0),
                           (("Ex", (i, j + 1)), -1.0), (("Ex", (i, j)), 1.0)):
                k = idx.get(lab)
                if k is not None:
                    C[row, k] += v / h
    A = C.T @ C - w2 * np.eye(len(labels))
    return labels, np.array(pos), A.astype(complex)


def dense_greens(grid: Grid, material: MaterialMap, omega, polarization: str = "TM") -> DenseGreens:
    labels, pos, A = dense_operator(grid, material, omega, polarization)
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"dense operator is singular at omega={omega}") from exc
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e14:
        raise ValueError(f"dense operator is singular at omega={omega} (cond={cond:.2e})")
    return DenseGreens(labels, pos, A, inv / grid.cell_area)


# -- plate in a perfect-metal channel -----------------------------------------

def _lifshitz_kernel(q, a):
    return q * np.exp(-2 * q * a) / (-np.expm1(-2 * q * a))


def channel_plate_force(d: float, L: float, H: float, model: str = "2d-tm",
                        n_max: Optional[int] = None) -> float:
    """Force toward +x on a full-height plate in a channel of height H.

    The plate faces a wall at distance d on its +x side and L on its -x
    side. Each transverse channel mode of wavenumber kappa_n = n pi / H is
    a massive 1D problem. Per unit length along z:

    * 2d-tm: Dirichlet modes n >= 1, (1/pi) int dxi [f(q, d) - f(q, L)],
      q = sqrt(xi^2 + kappa_n^2);
    * 2d-te: Neumann modes n >= 0, same integrand;
    * z-invariant-em: k_z integrated too, (1/2pi) int rho drho [...] with
      q = sqrt(rho^2 + kappa_n^2), weight 1 at n = 0 and 2 for n >= 1.
    """
    if n_max is None:
        n_max = int(np.ceil(40.0 * H / (np.pi * min(d, L)))) + 4
    total = 0.0
    first = 1 if model == "2d-tm" else 0
    for n in range(first, n_max + 1):
        kn = n * np.pi / H
        if model in ("2d-tm", "2d-te"):
            f = lambda x: _lifshitz_kernel(np.hypot(x, kn), d) - _lifshitz_kernel(np.hypot(x, kn), L)
            val = quad(f, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)[0] / np.pi
            weight = 1.0
        elif model == "z-invariant-em":
            f = lambda r: r * (_lifshitz_kernel(np.hypot(r, kn), d) - _lifshitz_kernel(np.hypot(r, kn), L))
            val = quad(f, 0, np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)[0] / (2 * np.pi)
            weight = 1.0 if n == 0 else 2.0
        else:
            raise ValueError(f"no channel oracle for model {model!r}")
        total += weight * val
    return total


def run_oracle_suite(resolution_1d: int = 64, resolution_channel: int = 16) -> list:
    """Every oracle cross-check that backs a numerical claim of the engine."""
    from .contours import Contour
    from .geometry import build_channel_plate, build_parallel_plates_1d
    from .greens import assemble_operator, solve_point_source
    from .quadrature import integrate_force
    from .stress import ForceProblem, field_model

    reports = []
    exact = -np.pi / 24.0
    reports.append(OracleReport("1d_force_integral_vs_closed_form", exact, lifshitz_1d_force(1.0),
                                1e-10, "mpmath quadrature vs -pi/24"))
    reports.append(OracleReport("1d_force_mode_sum_vs_integral", lifshitz_1d_force(1.0),
                                mode_sum_1d_force(1.0), 1e-8, "regularized mode sum"))
    setup = build_parallel_plates_1d(1.0, resolution_1d)
    res = integrate_force(Contour.wick(), ForceProblem(setup, field_model("1d")))
    reports.append(OracleReport(f"1d_engine_force_res{resolution_1d}", lifshitz_1d_force(1.0),
                                res.fx, 1e-2, "engine 1D pipeline, Wick contour"))

    # dense vs sparse on a 5x5 vacuum box at omega = i
    g = Grid(2, (0.0, 0.0), (5, 5), 8)
    mat = MaterialMap(np.zeros((5, 5), dtype=np.int16))
    for pol, orient in (("TM", "z"), ("TE", "x")):
        dg = dense_greens(g, mat, 1j, pol)
        src_k = len(dg.labels) // 2
        comp_name, src_site = dg.labels[src_k]
        if pol == "TE" and comp_name != "Ex":
            src_k = next(k for k, lab in enumerate(dg.labels) if lab[0] == "Ex")
            comp_name, src_site = dg.labels[src_k]
        gf = solve_point_source(assemble_operator(g, mat, 1j, pol), dg.positions[src_k], orient)
        far = int(np.argmax(np.linalg.norm(dg.positions - dg.positions[src_k], axis=1)))
        for tag, k in (("self", src_k), ("far", far)):
            name, site = dg.labels[k]
            reports.append(OracleReport(f"dense_vs_sparse_{pol}_5x5_{tag}",
                                        float(dg.greens[k, src_k].real),
                                        float(gf.value_at(name, site).real), 1e-10,
                                        "dense inverse vs sparse LU, omega = i"))

    # plate in a channel: second-order convergence to the mode sum
    from .quadrature import richardson
    for model in ("2d-tm", "z-invariant-em"):
        vals = []
        for r in (resolution_channel, 2 * resolution_channel):
            setup = build_channel_plate(resolution=r)
            vals.append(integrate_force(Contour.wick(), ForceProblem(setup, field_model(model))).fx)
        reports.append(OracleReport(f"channel_plate_{model}_richardson",
                                    channel_plate_force(1.0, 2.0, 1.0, model),
                                    float(richardson(*vals)), 2e-3,
                                    f"transverse mode sum vs engine at res {resolution_channel}/"
                                    f"{2 * resolution_channel}, extrapolated"))
    return reports
