"""Forward model of the tabletop antenna measurement.

SI quantities appear only here. Code units: lengths in d, angular
frequencies in c/d. Conversions at the boundary:

    f_Hz = xi c / (2 pi d_SI),    sigma_code = sigma_SI d_SI / (eps0 c).
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.constants import c as C0, epsilon_0 as EPS0, hbar as HBAR

from .contours import Contour, EquivalentMaterial, omega_of_xi
from .geometry import Setup
from .greens import Discretization, FrequencySolver, assemble_operator
from .quadrature import QuadratureSpec, integrate_force, xi_fraction
from .stress import ForceProblem, field_model

ORIENT_POL = {"x": ("TE", 0), "y": ("TE", 1), "z": ("TM", 0)}


class AboveValidityCeiling(UserWarning):
    """Fluid model evaluated where additional salt dispersion is expected."""


@dataclass(frozen=True)
class FluidModel:
    eps_s: float = 80.0
    sigma_si: float = 5.0          # S/m
    ceiling_hz: float = 10e9

    def __post_init__(self):
        if not self.eps_s >= 1:
            raise ValueError("eps_s must be >= 1")
        if not self.sigma_si > 0:
            raise ValueError("sigma_si must be > 0")

    def sigma_code(self, d_si: float) -> float:
        return self.sigma_si * d_si / (EPS0 * C0)

    def equivalent_material(self, d_si: float) -> EquivalentMaterial:
        """eps_c(xi) in code units for a geometry of scale d_si."""
        return EquivalentMaterial.conductive(self.sigma_code(d_si), self.eps_s,
                                             provenance=f"fluid(eps_s={self.eps_s:g}, "
                                                        f"sigma={self.sigma_si:g} S/m, d={d_si:g} m)")

    def equivalent_material_si(self, d_si: float) -> EquivalentMaterial:
        """Same eps_c, evaluated through the SI formula at f = xi c / (2 pi d)."""
        def f(x):
            x = np.asarray(x, dtype=float)
            val = fluid_eps(self, np.abs(xi_to_hz(x, d_si)), warn=False)
            return np.where(x < 0, np.conj(val), val)

        def df(x):
            # d/dxi of i sigma / (eps0 2 pi f(xi)), with df/dxi = c / (2 pi d)
            f_hz = xi_to_hz(np.asarray(x, dtype=float), d_si)
            return -1j * self.sigma_si / (EPS0 * 2.0 * np.pi * f_hz**2) * C0 / (2.0 * np.pi * d_si)
        return EquivalentMaterial(f, f"fluid-si(d={d_si:g} m)", df)


def xi_to_hz(xi, d_si: float):
    return np.asarray(xi) * C0 / (2.0 * np.pi * d_si)


def hz_to_xi(f_hz, d_si: float):
    return np.asarray(f_hz) * 2.0 * np.pi * d_si / C0


def fluid_eps(fluid: FluidModel, f_hz, warn: bool = True):
    """eps_s + i sigma / (eps0 2 pi f); warns above the validity ceiling."""
    f = np.asarray(f_hz, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    if warn and np.any(f > fluid.ceiling_hz):
        warnings.warn(f"fluid model used above {fluid.ceiling_hz:.3g} Hz", AboveValidityCeiling,
                      stacklevel=2)
    out = fluid.eps_s + 1j * fluid.sigma_si / (EPS0 * 2.0 * np.pi * f)
    return complex(out) if np.ndim(out) == 0 else out


def fluid_contour(fluid: FluidModel, d_si: float) -> Contour:
    return Contour.from_material(fluid.equivalent_material(d_si))


# -- S-matrix <-> Green's function -------------------------------------------

@dataclass(eq=False)
class SMatrixSpectrum:
    xi: np.ndarray               # code-unit angular frequency grid
    pairs: list                  # (antenna_i, antenna_j, orient_i, orient_j)
    values: np.ndarray           # (len(pairs), len(xi)) complex
    d_si: Optional[float] = None

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        if np.any(self.xi <= 0) or np.any(np.diff(self.xi) <= 0):
            raise ValueError("frequency grid must be positive and strictly increasing")
        if self.values.shape != (len(self.pairs), self.xi.size):
            raise ValueError("values must be (pairs, frequencies)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite S-matrix values")

    @property
    def f_hz(self) -> np.ndarray:
        if self.d_si is None:
            raise ValueError("no length scale attached")
        return xi_to_hz(self.xi, self.d_si)

    def to_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["f_Hz", "antenna_i", "antenna_j", "orient_i", "orient_j", "re_S", "im_S"])
            f = self.f_hz
            for k, (a, b, oa, ob) in enumerate(self.pairs):
                for fi, v in zip(f, self.values[k]):
                    w.writerow([repr(float(fi)), a, b, oa, ob, repr(float(v.real)), repr(float(v.imag))])


def _pair_alpha(alpha, pairs):
    """Per-pair factor: a scalar, or the product of the two antennas' factors."""
    a = np.asarray(alpha, dtype=complex)
    if a.ndim == 0:
        out = np.full(len(pairs), complex(a))
    else:
        out = np.array([a[i] * a[j] for i, j, *_ in pairs])
    if np.any(out == 0):
        raise ValueError("antenna factor alpha must be nonzero")
    return out[:, None]


def smatrix_from_greens(greens, xi, alpha=1.0, pairs=None, d_si=None) -> SMatrixSpectrum:
    """S_ij(xi) = (i xi / alpha) G_ij(omega(xi))."""
    G = np.atleast_2d(np.asarray(greens, dtype=complex))
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi = 0 is excluded from S-matrix grids")
    pairs = pairs or [(0, 0, "x", "x")] * G.shape[0]
    S = 1j * xi[None, :] / _pair_alpha(alpha, pairs) * G
    return SMatrixSpectrum(xi, list(pairs), S, d_si)


def greens_from_smatrix(spec: SMatrixSpectrum, alpha=1.0) -> np.ndarray:
    """G_ij = (alpha / (i xi)) S_ij."""
    return _pair_alpha(alpha, spec.pairs) / (1j * spec.xi[None, :]) * spec.values


# -- antenna plan -------------------------------------------------------------

@dataclass(eq=False)
class AntennaPlan:
    positions_code: np.ndarray
    orientations: tuple
    d_si: float
    alpha: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions_code = np.atleast_2d(np.asarray(self.positions_code, dtype=float))
        if self.alpha is None:
            self.alpha = np.ones(len(self.positions_code), dtype=complex)
        for o in self.orientations:
            if o not in ORIENT_POL:
                raise ValueError(f"unknown orientation {o!r}")

    @property
    def positions_si(self) -> np.ndarray:
        return self.positions_code * self.d_si

    @property
    def count(self) -> int:
        return len(self.positions_code) * len(self.orientations)

    def summary(self) -> dict:
        return {"positions": len(self.positions_code), "orientations": list(self.orientations),
                "antenna_measurements": self.count,
                "extent_m": [float(v) for v in np.ptp(self.positions_si, axis=0)]}

    @classmethod
    def from_setup(cls, setup: Setup, d_si: float, orientations=("x", "y", "z"), alpha=None):
        return cls(setup.quadrature.points.copy(), tuple(orientations), d_si, alpha)


def greens_between(setup: Setup, omega, positions: np.ndarray, orientations: Sequence[str],
                   pairs: Sequence[tuple]) -> np.ndarray:
    """G_{o_i o_j}(r_i, r_j; omega) for each requested pair, from one factorization per polarization."""
    pols = {}
    out = np.zeros(len(pairs), dtype=complex)
    for k, (i, j, oi, oj) in enumerate(pairs):
        pi, ci = ORIENT_POL[oi]
        pj, cj = ORIENT_POL[oj]
        if pi != pj:
            continue  # TE and TM decouple in z-invariant geometries
        if pi not in pols:
            disc = Discretization(setup.grid, setup.material, pi)
            solver = FrequencySolver(assemble_operator(setup.grid, setup.material, omega, pi, disc=disc))
            V = disc.stencils(positions)
            ncomp = 3
            cols = {}
            pols[pi] = (solver, V, ncomp, cols)
        solver, V, ncomp, cols = pols[pi]
        src = ncomp * j + cj
        if src not in cols:
            cols[src] = solver.solve(V[:, src].toarray()[:, 0]) / setup.grid.cell_area
        out[k] = V[:, ncomp * i + ci].toarray()[:, 0] @ cols[src]
    return out


def synthetic_smatrix(setup: Setup, contour: Contour, plan: AntennaPlan, xi_grid,
                      pairs: Optional[Sequence[tuple]] = None) -> SMatrixSpectrum:
    """What a network analyzer would read: S = (i xi / alpha) G(omega(xi))."""
    if pairs is None:
        pairs = [(i, i, o, o) for i in range(len(plan.positions_code)) for o in plan.orientations]
    xi_grid = np.asarray(xi_grid, dtype=float)
    G = np.zeros((len(pairs), xi_grid.size), dtype=complex)
    for n, x in enumerate(xi_grid):
        G[:, n] = greens_between(setup, omega_of_xi(contour, x), plan.positions_code,
                                 plan.orientations, pairs)
    return smatrix_from_greens(G, xi_grid, plan.alpha, list(pairs), plan.d_si)


# -- bandwidth ------------------------------------------------------------------

def bandwidth_report(setup: Setup, fluid: FluidModel, d_si: float, fraction: float = 0.9,
                     model: str = "2d-tm", orientations=("x", "y", "z"),
                     spec: Optional[QuadratureSpec] = None, jobs: int = 1):
    """Engine run on the fluid's contour, mapped back to Hz. Returns (report, ForceResult)."""
    contour = fluid_contour(fluid, d_si)
    spec = spec or QuadratureSpec.for_contour(contour)
    result = integrate_force(contour, ForceProblem(setup, field_model(model)), spec, jobs=jobs)
    if not result.converged:
        raise ValueError(f"engine run on the fluid contour did not converge (tail {result.tail:.3e})")
    xi_f = xi_fraction(result, fraction)
    xi_99 = xi_fraction(result, 0.99)
    plan = AntennaPlan.from_setup(setup, d_si, orientations)
    grid_xi = result.xi[result.xi <= xi_99]
    report = {
        "d_m": d_si,
        "fluid": {"eps_s": fluid.eps_s, "sigma_S_per_m": fluid.sigma_si,
                  "sigma_code": fluid.sigma_code(d_si), "ceiling_Hz": fluid.ceiling_hz},
        "fraction": fraction,
        "xi_fraction_code": xi_f,
        "xi_fraction_Hz": float(xi_to_hz(xi_f, d_si)),
        "xi99_Hz": float(xi_to_hz(xi_99, d_si)),
        "force_code": result.fx,
        "force_N_per_m": result.fx * HBAR * C0 / d_si**3,
        "antennas": plan.summary(),
        "frequency_grid_Hz": [float(v) for v in xi_to_hz(grid_xi, d_si)],
        "above_ceiling": bool(xi_to_hz(xi_99, d_si) > fluid.ceiling_hz),
        "notes": [
            "metals are treated as perfect conductors, appropriate at microwave and longer wavelengths",
            "frequencies are ordinary (Hz); code-unit xi is angular, f = xi c / (2 pi d)",
        ],
    }
    return report, result


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
