"""Outer xi integral F_i = Im int dxi (domega/dxi) dF_i/domega.

Node scheme, all Gauss-Legendre panels:

* (0, xi_switch]: substitution xi = u^2, so the sqrt(sigma/xi) Jacobian
  singularity becomes a bounded 2 u sqrt(sigma/u^2) = 2 sqrt(sigma) factor;
* [xi_switch, xi_linear]: panels uniform in log xi;
* [xi_linear, xi_max]: panels of fixed width, which resolve the
  exp(2 i Re(omega) d) oscillation of lossy contours at large xi.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .contours import Contour, jacobian, omega_of_xi


@dataclass(frozen=True)
class QuadratureSpec:
    xi_max: float = 30.0
    xi_switch: float = 0.1
    xi_linear: float = 2.0
    panel_width: float = 2.0
    log_ratio: float = 3.0
    order: int = 6
    rel_tol: float = 1e-3
    max_nodes: int = 256

    def __post_init__(self):
        if not self.xi_max > self.xi_switch > 0:
            raise ValueError("need xi_max > xi_switch > 0")
        if not 1e-10 < self.rel_tol < 1e-1:
            raise ValueError("rel_tol must lie in (1e-10, 1e-1)")
        if self.order < 2 or self.log_ratio <= 1 or self.panel_width <= 0:
            raise ValueError("bad panel parameters")

    @classmethod
    def for_contour(cls, contour: Contour, **overrides) -> "QuadratureSpec":
        """Engineering defaults per contour family; overrides win."""
        if contour.kind == "wick":
            base = dict(xi_max=30.0, xi_switch=0.1, xi_linear=30.0)
        elif contour.kind == "conductive":
            s = contour.sigma
            base = dict(xi_max=30.0 if s < 100 else 10.0, xi_switch=0.1 * min(1.0, 1.0 / s))
        elif contour.kind == "rotation":
            base = dict(xi_max=30.0, xi_switch=0.1)
        else:
            s_eff = max(1.0, abs(complex(contour.material(1.0)).imag))
            base = dict(xi_max=10.0, xi_switch=0.1 / s_eff)
        base.update(overrides)
        return cls(**base)

    def panels(self) -> list:
        """(a, b, kind) panels in increasing xi; kind 'u' for the substituted panel."""
        out = [(0.0, self.xi_switch, "u")]
        top_log = min(max(self.xi_linear, self.xi_switch), self.xi_max)
        if top_log > self.xi_switch:
            n = max(1, int(np.ceil(np.log(top_log / self.xi_switch) / np.log(self.log_ratio) - 1e-9)))
            edges = np.geomspace(self.xi_switch, top_log, n + 1)
            out += [(a, b, "log") for a, b in zip(edges[:-1], edges[1:])]
        if self.xi_max > top_log:
            n = max(1, int(np.ceil((self.xi_max - top_log) / self.panel_width - 1e-9)))
            edges = np.linspace(top_log, self.xi_max, n + 1)
            out += [(a, b, "lin") for a, b in zip(edges[:-1], edges[1:])]
        return out


def quadrature_nodes(spec: QuadratureSpec):
    """Nodes, weights and panel index for int_0^xi_max f(xi) dxi."""
    t, wt = leggauss(spec.order)
    xs, ws, ps = [], [], []
    for k, (a, b, kind) in enumerate(spec.panels()):
        if kind == "u":
            ub = np.sqrt(b)
            u = 0.5 * ub * (t + 1.0)
            xs.append(u * u); ws.append(0.5 * ub * wt * 2.0 * u)
        elif kind == "log":
            la, lb = np.log(a), np.log(b)
            s = 0.5 * (lb - la) * (t + 1.0) + la
            x = np.exp(s)
            xs.append(x); ws.append(0.5 * (lb - la) * wt * x)
        else:
            xs.append(0.5 * (b - a) * (t + 1.0) + a); ws.append(0.5 * (b - a) * wt)
        ps.append(np.full(spec.order, k))
    xi, w, panel = np.concatenate(xs), np.concatenate(ws), np.concatenate(ps)
    if xi.size > spec.max_nodes:
        raise ValueError(f"node scheme needs {xi.size} nodes, budget is {spec.max_nodes}")
    return xi, w, panel


def integrate_function(f: Callable, spec: QuadratureSpec) -> float:
    """Plain int_0^xi_max f(xi) dxi with the production node scheme."""
    xi, w, _ = quadrature_nodes(spec)
    return float(np.sum(w * np.asarray(f(xi))))


def richardson(coarse, fine, ratio: float = 2.0, order: float = 2.0):
    """Extrapolate two resolutions assuming error ~ h^order."""
    coarse, fine = np.asarray(coarse), np.asarray(fine)
    return fine + (fine - coarse) / (ratio ** order - 1.0)


@dataclass(eq=False)
class ForceResult:
    contour: str
    force: np.ndarray            # (dim,) real
    xi: np.ndarray
    weights: np.ndarray
    panel: np.ndarray
    omega: np.ndarray
    jac: np.ndarray
    integrand: np.ndarray        # (N, dim) complex dF/domega
    partial_xi: np.ndarray       # node xi followed by xi_max
    partial: np.ndarray          # (N + 1, dim) running integral
    tail: float
    scale: float
    converged: bool
    rel_tol: float
    meta: dict = field(default_factory=dict)
    samples: Optional[list] = None

    @property
    def node_count(self) -> int:
        return int(self.xi.size)

    @property
    def fx(self) -> float:
        return float(self.force[0])

    def marks(self, component: int = 0) -> dict:
        if not self.converged:
            return {}
        return {"xi50": xi_fraction(self, 0.5, component), "xi90": xi_fraction(self, 0.9, component)}

    def to_dict(self) -> dict:
        return {
            "contour": self.contour,
            "force": [float(v) for v in self.force],
            "converged": bool(self.converged),
            "tail_estimate": float(self.tail),
            "rel_tol": float(self.rel_tol),
            "node_count": self.node_count,
            "marks": {k: float(v) for k, v in self.marks().items()},
            "nodes": [
                {"xi": float(x), "weight": float(w), "omega": [float(o.real), float(o.imag)],
                 "dF_domega": [[float(c.real), float(c.imag)] for c in row]}
                for x, w, o, row in zip(self.xi, self.weights, self.omega, self.integrand)
            ],
            "meta": self.meta,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_partial_csv(self, path, header: str = "") -> None:
        F = self.force[0]
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "partial_fx", "partial_over_fx"])
            for x, p in zip(self.partial_xi, self.partial[:, 0]):
                w.writerow([repr(float(x)), repr(float(p)), repr(float(p / F)) if F else "nan"])

    def write_integrand_csv(self, path, header: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "re_omega", "im_omega", "re_jac", "im_jac", "re_dFx_domega", "im_dFx_domega"])
            for x, o, j, row in zip(self.xi, self.omega, self.jac, self.integrand):
                w.writerow([repr(float(x)), repr(float(o.real)), repr(float(o.imag)),
                            repr(float(j.real)), repr(float(j.imag)),
                            repr(float(row[0].real)), repr(float(row[0].imag))])

    def write_points_csv(self, path, header: str = "") -> None:
        """Per-surface-point breakdown of dF_x/domega at every node."""
        if not self.samples:
            raise ValueError("per-point samples were not kept")
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "point", "x", "y", "re_contrib_x", "im_contrib_x"])
            for s in self.samples:
                for k, (p, c) in enumerate(zip(s.points, s.contributions)):
                    y = p[1] if len(p) > 1 else 0.0
                    w.writerow([repr(float(s.xi)), k, repr(float(p[0])), repr(float(y)),
                                repr(float(c[0].real)), repr(float(c[0].imag))])


def _evaluate(integrand, xi, omega, jobs):
    if jobs <= 1 or len(xi) < 2:
        return [integrand(float(x), complex(o)) for x, o in zip(xi, omega)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(integrand, [float(x) for x in xi], [complex(o) for o in omega]))


def integrate_force(contour: Contour, problem, spec: Optional[QuadratureSpec] = None,
                    jobs: int = 1, keep_samples: bool = False) -> ForceResult:
    """Contour integral of problem.integrand(xi, omega) (a StressSample)."""
    spec = spec or QuadratureSpec.for_contour(contour)
    xi, w, panel = quadrature_nodes(spec)
    omega = np.asarray(omega_of_xi(contour, xi))
    jac = np.asarray(jacobian(contour, xi))
    if np.any(omega.imag < -1e-12 * np.abs(omega)):
        raise ValueError("contour has Im omega < 0 on the integration range")
    samples = _evaluate(problem.integrand, xi, omega, jobs)
    dF = np.array([s.dF for s in samples])                       # (N, dim)
    terms = w[:, None] * np.imag(jac[:, None] * dF)
    partial = np.cumsum(terms, axis=0)                            # ordered sum
    partial = np.vstack([partial, partial[-1:]])
    force = partial[-1].copy()
    last = panel == panel[-1]
    tail = float(abs(np.sum(terms[last, 0])))
    # magnitude before the surface and frequency cancellations; sets the roundoff floor
    scale = float(np.sum(w * np.abs(jac) * np.array([np.sum(np.abs(s.contributions[:, 0]))
                                                      for s in samples])))
    converged = tail <= spec.rel_tol * abs(force[0]) + 1e-12 * scale
    return ForceResult(contour.label, force, xi, w, panel, omega, jac, dF,
                       np.append(xi, spec.xi_max), partial, tail, scale, bool(converged),
                       spec.rel_tol, {"spec": spec.__dict__.copy()},
                       samples if keep_samples else None)


def xi_fraction(result: ForceResult, f: float, component: int = 0,
                require_converged: bool = True) -> float:
    """Smallest tabulated xi beyond which the running integral stays within 1 - f of F."""
    if require_converged and not result.converged:
        raise ValueError("xi_fraction needs a converged result")
    if not 0.0 < f < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    F = result.force[component]
    if F == 0:
        raise ValueError("force is zero; fractions are undefined")
    dev = np.abs(result.partial[:, component] / F - 1.0)
    bad = np.nonzero(dev > 1.0 - f)[0]
    k = 0 if bad.size == 0 else bad[-1] + 1
    return float(result.partial_xi[min(k, len(result.partial_xi) - 1)])


def refine(spec: QuadratureSpec) -> QuadratureSpec:
    """Halve the node spacing in every region."""
    return replace(spec, order=2 * spec.order, max_nodes=4 * spec.max_nodes)
