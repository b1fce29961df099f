"""Solitonic vector field from the vanishing of the weighted moment integral.

The field is the unique minimizer of the strictly convex weighted mass
G(xi) = integral over the moment polytope of exp(-2<p - kappa, xi>) against
the density measure; its gradient is -2 times the obstruction vector, so a
damped Newton iteration from 0 converges globally.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Q

import numpy as np

from .dh import weighted_moments
from .errors import SolverError
from .problem import HorosphericalProblem
from .rationals import Vec, vsub

ARMIJO_C = 1e-4
MAX_ITER = 100


def _moments_shifted(hp: HorosphericalProblem, xi: np.ndarray, **quad):
    """I0, I1, I2 of exp(-2<p-kappa, xi>) dmu, as floats."""
    kappa = np.array([float(c) for c in hp.kappa])
    mom = weighted_moments(hp.moment, hp.density, -2.0 * xi, **quad)
    scale = float(np.exp(2.0 * kappa @ xi))
    return scale * mom.i0, scale * mom.i1, scale * mom.i2


def weighted_mass(hp: HorosphericalProblem, xi, **quad) -> float:
    """G(xi): the total density mass reweighted by exp(-2<p-kappa, xi>)."""
    xi = np.asarray(xi, dtype=np.float64)
    i0, _, _ = _moments_shifted(hp, xi, **quad)
    return i0


def futaki_vector(hp: HorosphericalProblem, xi, **quad) -> np.ndarray:
    """Components of the obstruction F(e_i) = int <p-kappa, e_i> weight dmu."""
    xi = np.asarray(xi, dtype=np.float64)
    kappa = np.array([float(c) for c in hp.kappa])
    i0, i1, _ = _moments_shifted(hp, xi, **quad)
    return i1 - kappa * i0


@dataclass(frozen=True)
class SolitonSolution:
    xi: np.ndarray
    residual_norm: float
    iterations: int
    hessian_min_eig: float


def solve_soliton(
    hp: HorosphericalProblem, tol: float = 1e-10, max_iter: int = MAX_ITER, **quad
) -> SolitonSolution:
    """Damped Newton on G from xi = 0 until |F(xi)| <= tol * volume."""
    r = hp.a1_dim
    kappa = np.array([float(c) for c in hp.kappa])
    vol = float(hp.volume)
    xi = np.zeros(r)

    def eval_all(point):
        i0, i1, i2 = _moments_shifted(hp, point, **quad)
        f = i1 - kappa * i0
        hess = 4.0 * (i2 - np.outer(kappa, i1) - np.outer(i1, kappa) + i0 * np.outer(kappa, kappa))
        return i0, f, hess

    g, f, hess = eval_all(xi)
    for it in range(max_iter):
        resid = float(np.linalg.norm(f))
        if resid <= tol * vol:
            return SolitonSolution(
                xi=xi,
                residual_norm=resid,
                iterations=it,
                hessian_min_eig=float(np.linalg.eigvalsh(hess)[0]),
            )
        step = np.linalg.solve(hess, 2.0 * f)
        slope = -2.0 * float(f @ step)  # directional derivative of G
        # the allowance keeps the test meaningful once the predicted decrease
        # drops below rounding noise on G (the pure Newton phase)
        allowance = 4.0 * np.finfo(float).eps * abs(g)
        lam = 1.0
        for _ in range(60):
            trial = xi + lam * step
            g_trial = weighted_mass(hp, trial, **quad)
            if g_trial <= g + ARMIJO_C * lam * slope + allowance:
                break
            lam *= 0.5
        else:
            raise SolverError("line search failed in soliton Newton", last_state=xi)
        xi = xi + lam * step
        g, f, hess = eval_all(xi)
    raise SolverError(
        f"soliton Newton did not reach |F| <= {tol:g}*V in {max_iter} iterations "
        "(is kappa interior to the moment polytope?)",
        last_state=xi,
    )


def kahler_einstein_test(hp: HorosphericalProblem) -> tuple[bool, Vec]:
    """Exact test: the metric is Einstein iff the density barycenter equals kappa."""
    gap = vsub(hp.barycenter, hp.kappa)
    return all(c == Q(0) for c in gap), gap
