"""Complex-frequency contours, equivalent materials and physicality checks.

Units: c = hbar = 1 and lengths in units of the separation d, so xi, omega
and sigma all carry units of c/d.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

CONTOUR_KINDS = ("wick", "rotation", "conductive", "material")


def _check_xi(xi):
    arr = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError(f"xi must be finite and > 0, got {xi!r}")
    return arr


@dataclass(frozen=True)
class EquivalentMaterial:
    """Real-frequency permittivity eps_c(xi) equivalent to a contour.

    ``func`` maps a real, nonzero xi (scalar or array, either sign) to a
    complex permittivity. ``deriv`` is d eps_c / d xi, used for analytic
    Jacobians of material-defined contours. ``symmetric_extension`` says
    whether ``func`` may be evaluated at xi < 0.
    """

    func: Callable
    provenance: str = "closed-form"
    deriv: Optional[Callable] = None
    symmetric_extension: bool = True

    def __call__(self, xi):
        arr = np.asarray(xi, dtype=float)
        if np.any(arr == 0.0) or not np.all(np.isfinite(arr)):
            raise ValueError("eps_c is not evaluated at xi = 0")
        if np.any(arr < 0.0) and not self.symmetric_extension:
            raise ValueError(f"{self.provenance}: no extension to xi < 0 declared")
        out = np.asarray(self.func(arr), dtype=complex)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"{self.provenance}: eps_c undefined at xi={xi!r}")
        return out[()] if out.ndim == 0 else out

    def derivative(self, xi):
        if self.deriv is not None:
            return np.asarray(self.deriv(np.asarray(xi, dtype=float)), dtype=complex)[()]
        # complex-step is unavailable for tabulated data; centered difference
        x = np.asarray(xi, dtype=float)
        step = 1e-6 * x
        return (self(x + step) - self(x - step)) / (2.0 * step)

    # closed forms used across the package

    @classmethod
    def vacuum(cls) -> "EquivalentMaterial":
        return cls(lambda x: np.ones_like(x, dtype=complex), "vacuum",
                   lambda x: np.zeros_like(x, dtype=complex))

    @classmethod
    def constant(cls, value: complex, provenance: str = "constant") -> "EquivalentMaterial":
        value = complex(value)
        return cls(lambda x: np.full(np.shape(x), value, dtype=complex), provenance,
                   lambda x: np.zeros(np.shape(x), dtype=complex))

    @classmethod
    def conductive(cls, sigma: float, eps_s: float = 1.0,
                   provenance: Optional[str] = None) -> "EquivalentMaterial":
        """eps_c = eps_s + i sigma / xi (conductor with static permittivity eps_s)."""
        if provenance is None:
            provenance = f"conductive(sigma={sigma:g}, eps_s={eps_s:g})"
        return cls(lambda x: eps_s + 1j * sigma / x, provenance,
                   lambda x: -1j * sigma / x**2)


@dataclass(frozen=True)
class TabulatedMaterial:
    """eps_c sampled at positive xi, interpolated by PCHIP in log xi."""

    xi: np.ndarray
    values: np.ndarray
    symmetric_extension: bool = False
    provenance: str = "tabulated"
    _re: PchipInterpolator = field(init=False, repr=False, compare=False)
    _im: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if xi.ndim != 1 or xi.size < 2 or xi.shape != vals.shape:
            raise ValueError("need matching 1D arrays with at least two samples")
        if np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
            raise ValueError("tabulated xi must be positive and strictly increasing")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", vals)
        lx = np.log(xi)
        object.__setattr__(self, "_re", PchipInterpolator(lx, vals.real, extrapolate=False))
        object.__setattr__(self, "_im", PchipInterpolator(lx, vals.imag, extrapolate=False))

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            lx = np.log(ax)
        val = self._re(lx) + 1j * self._im(lx)
        # conjugate extension: eps(-xi) = eps(xi)*
        return np.where(x < 0, np.conj(val), val)

    def as_material(self) -> EquivalentMaterial:
        return EquivalentMaterial(self._eval, self.provenance, None, self.symmetric_extension)

    @classmethod
    def from_csv(cls, path, symmetric_extension: bool = False) -> "TabulatedMaterial":
        """Load rows of (xi, Re eps_c, Im eps_c); '#' lines and a text header are skipped."""
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in rec[:3]])
                except ValueError:
                    if rows:
                        raise
                    continue  # header row
        data = np.asarray(rows, dtype=float)
        if data.ndim != 2 or data.shape[1] != 3:
            raise ValueError(f"{path}: expected three columns xi, Re, Im")
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], symmetric_extension,
                   f"tabulated:{path}")


@dataclass(frozen=True)
class Contour:
    kind: str
    phi: float = 0.0
    sigma: float = 0.0
    material: Optional[EquivalentMaterial] = None

    def __post_init__(self):
        if self.kind not in CONTOUR_KINDS:
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.kind == "conductive" and not self.sigma > 0:
            raise ValueError("conductive contour requires sigma > 0")
        if self.kind == "rotation" and not 0.0 < self.phi <= np.pi / 2:
            raise ValueError("rotation contour requires 0 < phi <= pi/2")
        if self.kind == "material" and self.material is None:
            raise ValueError("material-defined contour requires eps_c")

    @classmethod
    def wick(cls) -> "Contour":
        return cls("wick")

    @classmethod
    def rotation(cls, phi: float) -> "Contour":
        return cls("rotation", phi=float(phi))

    @classmethod
    def conductive(cls, sigma: float) -> "Contour":
        return cls("conductive", sigma=float(sigma))

    @classmethod
    def from_material(cls, material) -> "Contour":
        if isinstance(material, TabulatedMaterial):
            material = material.as_material()
        return cls("material", material=material)

    @property
    def label(self) -> str:
        if self.kind == "rotation":
            return f"rotation(phi={self.phi:g})"
        if self.kind == "conductive":
            return f"conductive(sigma={self.sigma:g})"
        if self.kind == "material":
            return f"material({self.material.provenance})"
        return "wick"

    def equivalent_material(self) -> EquivalentMaterial:
        """eps_c(xi) of vacuum seen along this contour."""
        if self.kind == "wick":
            return EquivalentMaterial.constant(-1.0, "wick")
        if self.kind == "rotation":
            return EquivalentMaterial.constant(np.exp(2j * self.phi), self.label)
        if self.kind == "conductive":
            return EquivalentMaterial.conductive(self.sigma, provenance=self.label)
        return self.material


def omega_of_xi(contour: Contour, xi):
    """Complex frequency omega(xi) on the principal square-root branch."""
    x = _check_xi(xi)
    if contour.kind == "wick":
        w = 1j * x
    elif contour.kind == "rotation":
        w = np.exp(1j * contour.phi) * x
    elif contour.kind == "conductive":
        w = x * np.sqrt(1.0 + 1j * contour.sigma / x)
    else:
        w = x * np.sqrt(np.asarray(contour.material(x), dtype=complex))
    return np.asarray(w, dtype=complex)[()]


def jacobian(contour: Contour, xi):
    """Analytic d omega / d xi on the same branch as omega_of_xi."""
    x = _check_xi(xi)
    if contour.kind == "wick":
        j = np.full(x.shape, 1j)
    elif contour.kind == "rotation":
        j = np.full(x.shape, np.exp(1j * contour.phi))
    elif contour.kind == "conductive":
        r = np.sqrt(1.0 + 1j * contour.sigma / x)
        j = 0.5 * (2.0 + 1j * contour.sigma / x) / r
    else:
        eps = np.asarray(contour.material(x), dtype=complex)
        r = np.sqrt(eps)
        j = r + x * contour.material.derivative(x) / (2.0 * r)
    return np.asarray(j, dtype=complex)[()]


def eps_c_of_contour(contour: Contour, xi, base_material: Optional[Callable] = None):
    """eps_c = eps(omega) omega^2 / xi^2; ``base_material`` maps omega to eps (vacuum if None)."""
    x = _check_xi(xi)
    w = np.asarray(omega_of_xi(contour, x))
    eps = 1.0 if base_material is None else np.asarray(base_material(w), dtype=complex)
    return np.asarray(eps * w**2 / x**2, dtype=complex)[()]


def contour_of_material(eps_c, xi):
    """omega = xi sqrt(eps_c(xi)); ``eps_c`` is an EquivalentMaterial or a constant."""
    x = _check_xi(xi)
    if callable(eps_c):
        val = np.asarray(eps_c(x), dtype=complex)
    else:
        val = np.full(x.shape, complex(eps_c))
    if not np.all(np.isfinite(val)):
        raise ValueError("eps_c undefined at requested xi")
    return np.asarray(x * np.sqrt(val), dtype=complex)[()]


@dataclass(frozen=True)
class PhysicalityReport:
    conjugate_symmetric: bool
    passive: bool
    witness: Optional[tuple] = None  # (xi, eps_c, reason)

    @property
    def physical(self) -> bool:
        return self.conjugate_symmetric and self.passive


def check_physicality(eps_c, probes: Sequence[float], tol: float = 1e-12) -> PhysicalityReport:
    """Conjugate symmetry and passivity of eps_c at +/- each probe.

    Passivity means xi * Im eps_c(xi) >= 0 (no gain at either sign of xi).
    A medium that is lossless at the lowest probe must also have
    Re eps_c >= 1 there; a lossless response below 1 at xi -> 0 can only
    come from gain.
    """
    if isinstance(eps_c, TabulatedMaterial):
        eps_c = eps_c.as_material()
    if isinstance(eps_c, Contour):
        eps_c = eps_c.equivalent_material()
    if not eps_c.symmetric_extension:
        raise ValueError("eps_c must declare its extension to xi < 0")
    xs = np.asarray(sorted(float(p) for p in probes), dtype=float)
    if xs.size == 0:
        raise ValueError("empty probe set")
    _check_xi(xs)

    conj_ok, passive_ok, witness = True, True, None
    for x in xs:
        ep, em = complex(eps_c(x)), complex(eps_c(-x))
        scale = max(1.0, abs(ep))
        if conj_ok and abs(em - ep.conjugate()) > tol * scale:
            conj_ok = False
            witness = witness or (x, ep, "eps_c(-xi) != conj(eps_c(xi))")
        for xx, e in ((x, ep), (-x, em)):
            if passive_ok and np.sign(xx) * e.imag < -tol * scale:
                passive_ok = False
                witness = witness or (xx, e, "gain: xi * Im eps_c < 0")
    e0 = complex(eps_c(xs[0]))
    if passive_ok and abs(e0.imag) <= tol * max(1.0, abs(e0)) and e0.real < 1.0 - tol:
        passive_ok = False
        witness = witness or (xs[0], e0, "gain: lossless with Re eps_c < 1 near xi = 0")
    return PhysicalityReport(conj_ok, passive_ok, witness)


def default_probes(n: int = 25) -> np.ndarray:
    return np.logspace(-4, 2, n)
