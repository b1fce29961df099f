"""Greatest Ricci lower bound by exact ray-boundary intersection.

With b the gap between the density barycenter and kappa, the bound is the
t in (0,1] for which (t/(t-1)) b lies on the boundary of the recentred moment
polytope; equivalently t = s/(1+s) where s is the exit scalar of the ray from
the origin in direction -b.  Everything is exact rational facet arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Q

from .errors import MathValidationError
from .polytopes import Polytope
from .problem import HorosphericalProblem
from .rationals import vdot, vsub


def ray_exit(polytope: Polytope, direction) -> tuple[Q, tuple[int, ...]]:
    """Exit scalar s* of the ray s -> s*direction from the (interior) origin,
    with the indices of all facets tight at the exit point."""
    direction = tuple(Q(c) for c in direction)
    if all(c == 0 for c in direction):
        raise MathValidationError("ray direction must be nonzero", condition="ray")
    zero = tuple(Q(0) for _ in direction)
    if not polytope.contains(zero, strict=True):
        raise MathValidationError(
            "origin must be strictly inside the polytope", condition="zero_interior"
        )
    best: Q | None = None
    tight: list[int] = []
    for idx, (normal, offset) in enumerate(polytope.facets):
        speed = vdot(normal, direction)
        if speed <= 0:
            continue
        s = offset / speed
        if best is None or s < best:
            best, tight = s, [idx]
        elif s == best:
            tight.append(idx)
    if best is None:
        raise MathValidationError("ray never exits (polytope unbounded?)")
    return best, tuple(tight)


@dataclass(frozen=True)
class RicciBoundResult:
    t_infinity: Q
    exit_scalar: Q | None
    tight_facets: tuple[int, ...]


def greatest_ricci_lower_bound(hp: HorosphericalProblem) -> RicciBoundResult:
    """R(M) for the problem; returns exactly 1 in the Einstein case."""
    gap = vsub(hp.barycenter, hp.kappa)
    if all(c == 0 for c in gap):
        # Einstein case: the ray construction assumes a nonzero gap; R = 1.
        return RicciBoundResult(t_infinity=Q(1), exit_scalar=None, tight_facets=())
    recentred = hp.moment.translate(tuple(-c for c in hp.kappa))
    s_star, tight = ray_exit(recentred, tuple(-c for c in gap))
    return RicciBoundResult(
        t_infinity=s_star / (1 + s_star), exit_scalar=s_star, tight_facets=tight
    )
