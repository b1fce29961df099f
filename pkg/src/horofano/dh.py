"""Integration over the moment polytope against the product-of-roots density.

Two routes: an exact rational route for polynomial integrands (volume,
barycenter, polynomial moments) built on the closed-form integral of a
barycentric monomial over a simplex, and a float route for exponential-weighted
moments built on tensor Gauss-Legendre quadrature mapped to each simplex of
the fixed fan triangulation, with a Richardson-style order check.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction as Q
from math import factorial

import numpy as np

from . import kernels
from .errors import MathValidationError, QuadratureError
from .polytopes import Polytope, Simplex, triangulate
from .rationals import Vec, vdot

DEFAULT_QUAD_EXTRA = 20
DEFAULT_QUAD_REL_TOL = 1e-12


@dataclass(frozen=True)
class DHDensity:
    """Product of linear forms p -> <form, p>; the density of the DH measure.

    Forms are stored as plain coefficient vectors (any scalar product has
    already been applied), so evaluation is a dot product.
    """

    forms: tuple[Vec, ...]

    @property
    def degree(self) -> int:
        return len(self.forms)

    def value(self, point: Vec) -> Q:
        out = Q(1)
        for f in self.forms:
            out *= vdot(f, point)
        return out

    def nonnegative_on(self, polytope: Polytope) -> bool:
        return all(vdot(f, v) >= 0 for f in self.forms for v in polytope.vertices)


def density_from_forms(forms) -> DHDensity:
    return DHDensity(forms=tuple(tuple(Q(c) for c in f) for f in forms))


# ---------------------------------------------------------------------------
# exact route
# ---------------------------------------------------------------------------


def _poly_mul(p1: dict, p2: dict) -> dict:
    out: dict[tuple[int, ...], Q] = {}
    for e1, c1 in p1.items():
        for e2, c2 in p2.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            c = out.get(e, Q(0)) + c1 * c2
            if c == 0:
                out.pop(e, None)
            else:
                out[e] = c
    return out


def _affine_to_bary(simplex: Simplex, coeffs: Vec, offset: Q) -> dict:
    """A degree-1 polynomial as a barycentric form: its vertex values."""
    nverts = len(simplex.vertices)
    poly = {}
    for j, v in enumerate(simplex.vertices):
        val = vdot(coeffs, v) + offset
        if val != 0:
            e = tuple(1 if i == j else 0 for i in range(nverts))
            poly[e] = val
    return poly


def _integrate_bary(simplex: Simplex, poly: dict) -> Q:
    d = simplex.dim
    vol = simplex.volume()
    total = Q(0)
    for exps, coeff in poly.items():
        num = factorial(d)
        for a in exps:
            num *= factorial(a)
        total += coeff * Q(num, factorial(sum(exps) + d))
    return vol * total


def integrate_poly_simplex(simplex: Simplex, forms=None, monomial=None) -> Q:
    """Exact integral over a simplex of a product of affine forms, or of the
    coordinate monomial given by an exponent multi-index."""
    d = simplex.dim
    affine: list[tuple[Vec, Q]] = []
    if monomial is not None:
        for i, a in enumerate(monomial):
            unit = tuple(Q(1) if j == i else Q(0) for j in range(d))
            affine.extend((unit, Q(0)) for _ in range(int(a)))
    if forms is not None:
        for f in forms:
            if isinstance(f, tuple) and len(f) == 2 and not isinstance(f[0], Q):
                coeffs, off = f
            else:
                coeffs, off = f, 0
            affine.append((tuple(Q(c) for c in coeffs), Q(off)))
    poly = {tuple(0 for _ in range(d + 1)): Q(1)}
    for coeffs, off in affine:
        poly = _poly_mul(poly, _affine_to_bary(simplex, coeffs, off))
        if not poly:
            return Q(0)
    return _integrate_bary(simplex, poly)


def dh_moment(polytope: Polytope, density: DHDensity, extra_forms=()) -> Q:
    """Exact integral of the density times extra affine forms over the polytope."""
    forms = [(f, Q(0)) for f in density.forms] + [
        (tuple(Q(c) for c in f), Q(off)) for f, off in extra_forms
    ]
    return sum(
        (integrate_poly_simplex(s, forms=forms) for s in triangulate(polytope)), Q(0)
    )


def dh_volume(polytope: Polytope, density: DHDensity) -> Q:
    """Exact volume of the polytope for the density measure; must be positive."""
    if not density.nonnegative_on(polytope):
        raise MathValidationError(
            "density is negative somewhere on the polytope", condition="density_nonneg"
        )
    vol = dh_moment(polytope, density)
    if vol <= 0:
        raise MathValidationError(
            "density measure of the polytope vanishes", condition="positive_volume"
        )
    return vol


def dh_barycenter(polytope: Polytope, density: DHDensity) -> Vec:
    """Exact barycenter of the polytope for the density measure."""
    vol = dh_volume(polytope, density)
    dim = polytope.dim
    out = []
    for i in range(dim):
        unit = tuple(Q(1) if j == i else Q(0) for j in range(dim))
        out.append(dh_moment(polytope, density, extra_forms=[(unit, 0)]) / vol)
    return tuple(out)


# ---------------------------------------------------------------------------
# quadrature route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedMoments:
    """I0 = integral of exp(<ell, p>) density, I1 its first moment vector,
    I2 its second moment matrix; rel_error is the order-refinement estimate."""

    i0: float
    i1: np.ndarray
    i2: np.ndarray
    rel_error: float
    order: int


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_unit(m: int) -> tuple[np.ndarray, np.ndarray]:
    if m not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(m)
        _GL_CACHE[m] = ((x + 1.0) / 2.0, w / 2.0)
    return _GL_CACHE[m]


def _simplex_nodes(verts: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor GL nodes mapped onto a simplex by the collapsing transform."""
    r = verts.shape[0] - 1
    t1, w1 = _gl_unit(m)
    grids = np.meshgrid(*([t1] * r), indexing="ij")
    ts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wgrids = np.meshgrid(*([w1] * r), indexing="ij")
    ws = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=1), axis=1)
    u = np.empty_like(ts)
    jac = np.ones(ts.shape[0])
    shrink = np.ones(ts.shape[0])
    for i in range(r):
        u[:, i] = ts[:, i] * shrink
        jac *= shrink
        shrink = shrink * (1.0 - ts[:, i])
    edges = verts[1:] - verts[0]
    detedge = abs(float(np.linalg.det(edges))) if r > 1 else abs(float(edges[0, 0]))
    points = verts[0][None, :] + u @ edges
    return points, ws * jac * detedge


def _worker_count(workers) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("HOROFANO_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def _neumaier_reduce(parts: list[tuple[float, np.ndarray, np.ndarray]]):
    """Compensated summation of per-simplex moment partials in list order."""
    r = parts[0][1].shape[0]
    s0, c0 = 0.0, 0.0
    s1, c1 = np.zeros(r), np.zeros(r)
    s2, c2 = np.zeros((r, r)), np.zeros((r, r))

    def add_scalar(s, c, v):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        return t, c

    for p0, p1, p2 in parts:
        s0, c0 = add_scalar(s0, c0, p0)
        t1 = s1 + p1
        c1 = c1 + np.where(np.abs(s1) >= np.abs(p1), (s1 - t1) + p1, (p1 - t1) + s1)
        s1 = t1
        t2 = s2 + p2
        c2 = c2 + np.where(np.abs(s2) >= np.abs(p2), (s2 - t2) + p2, (p2 - t2) + s2)
        s2 = t2
    return s0 + c0, s1 + c1, s2 + c2


def weighted_moments(
    polytope: Polytope,
    density: DHDensity,
    ell,
    order: int | None = None,
    rel_tol: float = DEFAULT_QUAD_REL_TOL,
    max_refine: int = 3,
    workers: int | None = None,
) -> WeightedMoments:
    """Exponential-weighted moments of the density measure over the polytope.

    Integrates exp(<ell, p>) * density against 1, p and p (x) p.  The order-m
    result is checked against order m+4; the order is raised (three times at
    most) until the relative difference drops below ``rel_tol``.
    """
    if not density.nonnegative_on(polytope):
        raise MathValidationError(
            "density is negative somewhere on the polytope", condition="density_nonneg"
        )
    r = polytope.dim
    ell = np.asarray([float(x) for x in ell], dtype=np.float64)
    if ell.shape != (r,):
        raise MathValidationError("exponent vector has wrong dimension")
    forms = np.array(
        [[float(c) for c in f] for f in density.forms], dtype=np.float64
    ).reshape(len(density.forms), r)
    offs = np.zeros(len(density.forms))
    simplices = triangulate(polytope)
    fverts = [
        np.array([[float(c) for c in v] for v in s.vertices], dtype=np.float64)
        for s in simplices
    ]
    m = order if order is not None else density.degree + DEFAULT_QUAD_EXTRA
    m = max(4, int(m))
    nworkers = _worker_count(workers)

    def one(task):
        verts, mm = task
        pts, wts = _simplex_nodes(verts, mm)
        return kernels.quad_moments(pts, wts, forms, offs, ell)

    last_err = float("inf")
    for _ in range(max_refine + 1):
        tasks = [(v, m) for v in fverts] + [(v, m + 4) for v in fverts]
        if nworkers > 1:
            with ThreadPoolExecutor(max_workers=nworkers) as pool:
                results = list(pool.map(one, tasks))
        else:
            results = [one(t) for t in tasks]
        lo = _neumaier_reduce([(a, np.asarray(b), np.asarray(c)) for a, b, c in results[: len(fverts)]])
        hi = _neumaier_reduce([(a, np.asarray(b), np.asarray(c)) for a, b, c in results[len(fverts) :]])
        scale = max(abs(hi[0]), float(np.max(np.abs(hi[1]), initial=0.0)), 1e-300)
        last_err = max(
            abs(hi[0] - lo[0]),
            float(np.max(np.abs(hi[1] - lo[1]), initial=0.0)),
            float(np.max(np.abs(hi[2] - lo[2]), initial=0.0)),
        ) / scale
        if last_err <= rel_tol:
            return WeightedMoments(
                i0=float(hi[0]), i1=hi[1], i2=hi[2], rel_error=last_err, order=m + 4
            )
        m += 8
    raise QuadratureError(
        f"quadrature error estimate {last_err:.3e} above tolerance {rel_tol:.3e}",
        estimate=last_err,
    )
