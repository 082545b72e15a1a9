"""Mean Maxwell stress tensor and the surface-integrated force integrand.

Correlations at coincident points (hbar = 1):

    <E_i E_j> = (1/pi) omega^2 G_ij
    <H_i H_j> = (1/pi) (curl)_il (curl')_jm G_lm

The magnetic sign is the one that makes the stress divergence free for the
operator convention [curl curl - eps omega^2] G = delta; see the package
README for the 1D check that fixes it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import MaterialMap, Setup
from .greens import (COMPONENTS, Discretization, SolverBreakdown, assemble_operator,
                     half_line_blocks, make_solver)

_MIRROR_Y = np.diag([1.0, -1.0, 1.0])


@dataclass(frozen=True)
class FieldModel:
    """Which scalar problems enter the stress, and how k_z is treated.

    ``z_invariant`` integrates the out-of-plane wavevector analytically:
    for a z-invariant problem the k_z integral of the 2D integrand Phi at
    frequency omega continues to -(i/2) omega Phi(omega), which on the
    imaginary axis is (xi/2) Phi(i xi).
    """

    name: str
    polarizations: tuple
    z_invariant: bool = False


FIELD_MODELS = {
    "2d-tm": FieldModel("2d-tm", ("TM",)),
    "2d-em": FieldModel("2d-em", ("TM", "TE")),
    "z-invariant-em": FieldModel("z-invariant-em", ("TM", "TE"), True),
    "z-invariant-tm": FieldModel("z-invariant-tm", ("TM",), True),
    "1d": FieldModel("1d", ("1D",)),
}


def field_model(name: str) -> FieldModel:
    try:
        return FIELD_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown field model {name!r}; choose from {sorted(FIELD_MODELS)}") from None


@dataclass(eq=False)
class CorrelationBundle:
    points: np.ndarray
    EE: np.ndarray  # (P, 3, 3)
    HH: np.ndarray  # (P, 3, 3)

    def __add__(self, other):
        return CorrelationBundle(self.points, self.EE + other.EE, self.HH + other.HH)

    def __sub__(self, other):
        return CorrelationBundle(self.points, self.EE - other.EE, self.HH - other.HH)


def correlations_from_blocks(blocks: np.ndarray, polarization: str, omega) -> CorrelationBundle:
    """Embed per-point stencil blocks V^T G V into 3x3 <EE>, <HH> tensors."""
    comps = COMPONENTS[polarization]
    P = blocks.shape[0]
    EE = np.zeros((P, 3, 3), dtype=complex)
    HH = np.zeros((P, 3, 3), dtype=complex)
    w2 = complex(omega) ** 2
    for a, (_, ka, ia) in enumerate(comps):
        for b, (_, kb, ib) in enumerate(comps):
            if ka != kb:
                continue
            if ka == "E":
                EE[:, ia, ib] = w2 * blocks[:, a, b] / np.pi
            else:
                HH[:, ia, ib] = blocks[:, a, b] / np.pi
    return CorrelationBundle(None, EE, HH)


def field_correlations(solver, points: np.ndarray,
                       chunk_points: int = 64) -> CorrelationBundle:
    """Coincident-point correlations of one polarization at ``points``."""
    disc = solver.disc
    points = np.atleast_2d(points)
    _reject_metal(disc, points)
    blocks = solver.correlation_blocks(points, chunk_points)
    out = correlations_from_blocks(blocks, disc.polarization, solver.op.omega)
    out.points = points
    return out


def _reject_metal(disc: Discretization, points: np.ndarray) -> None:
    g, metal = disc.grid, disc.material.metal
    for p in points:
        idx = tuple(int(np.floor(g.to_index(p[a], a))) for a in range(g.dimension))
        inside = all(0 <= idx[a] < g.shape[a] for a in range(g.dimension))
        if not inside or metal[idx]:
            raise ValueError(f"correlations requested inside metal or outside grid at {tuple(p)}")


def stress_tensor(EE: np.ndarray, HH: np.ndarray, eps=1.0) -> np.ndarray:
    """T = <HH> - tr<HH>/2 + eps (<EE> - tr<EE>/2), batched over leading axes."""
    EE = np.asarray(EE, dtype=complex)
    HH = np.asarray(HH, dtype=complex)
    eye = np.eye(3)
    trH = np.trace(HH, axis1=-2, axis2=-1)[..., None, None]
    trE = np.trace(EE, axis1=-2, axis2=-1)[..., None, None]
    eps = np.asarray(eps, dtype=complex)[..., None, None] if np.ndim(eps) else eps
    return HH - 0.5 * trH * eye + eps * (EE - 0.5 * trE * eye)


def stress_at_point(corr: CorrelationBundle, index: int, eps=1.0) -> np.ndarray:
    return stress_tensor(corr.EE[index], corr.HH[index], eps)


@dataclass(eq=False)
class StressSample:
    xi: float
    omega: complex
    points: np.ndarray
    contributions: np.ndarray  # (P, dim): (T . n) w per point, model factor applied
    dF: np.ndarray             # (dim,) complex dF/domega

    def reassembled(self) -> np.ndarray:
        return np.sum(self.contributions, axis=0)


def mirror_partners(setup: Setup) -> Optional[np.ndarray]:
    """Index of each surface point's y-mirror image, or None if the setup is not symmetric."""
    g = setup.grid
    if g.dimension != 2:
        return None
    yc = g.origin[1] + 0.5 * g.extents[1]
    if not np.array_equal(setup.material.metal, setup.material.metal[:, ::-1]):
        return None
    if setup.material.eps is not None:
        return None
    q = setup.quadrature
    key = {(round(p[0] * 1e9), round(p[1] * 1e9)): i for i, p in enumerate(q.points)}
    partner = np.empty(len(q), dtype=int)
    for i, (p, n, w) in enumerate(zip(q.points, q.normals, q.weights)):
        j = key.get((round(p[0] * 1e9), round((2 * yc - p[1]) * 1e9)))
        if j is None or q.weights[j] != w or not np.allclose(q.normals[j], n * [1, -1]):
            return None
        partner[i] = j
    return partner


@dataclass(eq=False)
class ForceProblem:
    """Everything needed to evaluate dF/domega at any complex frequency."""

    setup: Setup
    model: FieldModel
    vacuum_subtraction: bool = False
    use_symmetry: bool = True
    closure_offset: float = 0.0   # diagnostic: constant added to diagonal correlations
    chunk_points: int = 64
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def _disc(self, pol: str, material: MaterialMap) -> Discretization:
        key = (pol, id(material))
        if key not in self._cache:
            self._cache[key] = Discretization(self.setup.grid, material, pol)
        return self._cache[key]

    def _empty_material(self) -> MaterialMap:
        if "empty" not in self._cache:
            m = self.setup.material
            self._cache["empty"] = MaterialMap(np.zeros_like(m.labels), (), m.eps)
        return self._cache["empty"]

    def _partners(self):
        if "partners" not in self._cache:
            self._cache["partners"] = mirror_partners(self.setup) if self.use_symmetry else None
        return self._cache["partners"]

    def _eval_points(self):
        """Representative point indices, and the mirror map used to fill the rest."""
        q = self.setup.quadrature
        partner = self._partners()
        if partner is None:
            return np.arange(len(q)), None
        reps = np.array([i for i in range(len(q)) if partner[i] >= i])
        return reps, partner

    def correlations(self, omega, material: Optional[MaterialMap] = None) -> CorrelationBundle:
        material = material or self.setup.material
        q = self.setup.quadrature
        reps, partner = self._eval_points()
        total = None
        for pol in self.model.polarizations:
            disc = self._disc(pol, material)
            op = assemble_operator(self.setup.grid, material, omega, pol, disc=disc)
            c = field_correlations(make_solver(op), q.points[reps], self.chunk_points)
            total = c if total is None else total + c
        EE = np.empty((len(q), 3, 3), dtype=complex)
        HH = np.empty_like(EE)
        EE[reps], HH[reps] = total.EE, total.HH
        if partner is not None:
            mirrored = partner[reps]
            EE[mirrored] = _MIRROR_Y @ total.EE @ _MIRROR_Y
            HH[mirrored] = _MIRROR_Y @ total.HH @ _MIRROR_Y
        return CorrelationBundle(q.points, EE, HH)

    def point_eps(self, omega) -> np.ndarray:
        m = self.setup.material
        pts = self.setup.quadrature.points
        if m.eps is None:
            return np.ones(len(pts), dtype=complex)
        if self.setup.grid.dimension == 1:
            return np.asarray(m.eps(pts[:, 0], omega), dtype=complex)
        return np.asarray(m.eps(pts[:, 0], pts[:, 1], omega), dtype=complex)

    def integrand(self, xi: float, omega) -> StressSample:
        try:
            return self._integrand(xi, complex(omega))
        except SolverBreakdown as exc:
            exc.xi = xi
            raise

    def _integrand(self, xi, omega) -> StressSample:
        if self.setup.grid.dimension == 1:
            return self._integrand_1d(xi, omega)
        corr = self.correlations(omega)
        if self.vacuum_subtraction:
            corr = corr - self.correlations(omega, self._empty_material())
        if self.closure_offset:
            eye = np.eye(3)
            corr = CorrelationBundle(corr.points, corr.EE + self.closure_offset * eye,
                                     corr.HH + self.closure_offset * eye)
        T = stress_tensor(corr.EE, corr.HH, self.point_eps(omega))
        q = self.setup.quadrature
        contrib = np.einsum("pij,pj->pi", T[:, :2, :2], q.normals) * q.weights[:, None]
        contrib = contrib * self._factor(omega)
        return StressSample(xi, omega, q.points, contrib, np.sum(contrib, axis=0))

    def _integrand_1d(self, xi, omega) -> StressSample:
        setup = self.setup
        q = setup.quadrature
        disc = self._disc("1D", setup.material)
        op = assemble_operator(setup.grid, setup.material, omega, "1D", disc=disc)
        gap = field_correlations(make_solver(op), q.points, self.chunk_points)
        # outside face of the right mirror: half-line at the mirrored distance
        mirror_x = setup.grid.origin[0] + (setup.grid.shape[0] - 1) * setup.grid.spacing
        dist = mirror_x - q.points[:, 0]
        ext = correlations_from_blocks(half_line_blocks(omega, setup.grid.spacing, dist),
                                       "1D", omega)
        eps = self.point_eps(omega)
        T_gap = stress_tensor(gap.EE, gap.HH, eps)[:, 0, 0]
        T_ext = stress_tensor(ext.EE, ext.HH, eps)[:, 0, 0]
        contrib = np.concatenate([T_gap * q.normals[:, 0] * q.weights,
                                  T_ext * (-q.normals[:, 0]) * q.weights])[:, None]
        contrib = contrib * self._factor(omega)
        pts = np.concatenate([q.points, (mirror_x + dist)[:, None]])
        return StressSample(xi, omega, pts, contrib, np.sum(contrib, axis=0))

    def _factor(self, omega) -> complex:
        return -0.5j * omega if self.model.z_invariant else 1.0


def force_integrand(problem: ForceProblem, xi: float, omega) -> StressSample:
    return problem.integrand(xi, omega)
