"""Classical root systems and parabolic/Levi combinatorics.

Root systems are realized in the standard orthogonal coordinates (type A of
rank n sits inside R^{n+1}), direct sums are concatenated block-wise, torus
factors contribute rootless coordinates, and the invariant scalar product is
the identity on these coordinates.  All data are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Q

from .errors import MathValidationError
from .rationals import Mat, Vec, identity_mat, solve_square, vadd, vdot, vsum, zero_vec

FAMILIES = ("A", "B", "C", "D")


def _unit(dim: int, i: int, value=1) -> Vec:
    return tuple(Q(value) if j == i else Q(0) for j in range(dim))


def _block_roots(family: str, rank: int) -> tuple[list[Vec], list[Vec], int]:
    """Simple roots, positive roots and block dimension for one factor."""
    if family == "A":
        dim = rank + 1
        simple = [vadd(_unit(dim, i), _unit(dim, i + 1, -1)) for i in range(rank)]
        positive = [
            vadd(_unit(dim, i), _unit(dim, j, -1))
            for i in range(dim)
            for j in range(i + 1, dim)
        ]
        return simple, positive, dim
    if family in ("B", "C", "D"):
        dim = rank
        simple = [vadd(_unit(dim, i), _unit(dim, i + 1, -1)) for i in range(rank - 1)]
        if family == "B":
            simple.append(_unit(dim, rank - 1))
        elif family == "C":
            simple.append(_unit(dim, rank - 1, 2))
        elif rank >= 2:
            simple.append(vadd(_unit(dim, rank - 2), _unit(dim, rank - 1)))
        positive = []
        for i in range(rank):
            for j in range(i + 1, rank):
                positive.append(vadd(_unit(dim, i), _unit(dim, j, -1)))
                positive.append(vadd(_unit(dim, i), _unit(dim, j)))
        if family == "B":
            positive.extend(_unit(dim, i) for i in range(rank))
        elif family == "C":
            positive.extend(_unit(dim, i, 2) for i in range(rank))
        return simple, positive, dim
    raise MathValidationError(f"unknown family letter {family!r}", condition="family")


def _embed(v: Vec, offset: int, dim: int) -> Vec:
    return tuple(Q(0) for _ in range(offset)) + v + tuple(
        Q(0) for _ in range(dim - offset - len(v))
    )


@dataclass(frozen=True)
class RootDatum:
    """A root system with ambient coordinates and Weyl-invariant scalar product.

    ``expansions[k]`` gives the (nonnegative integer) coefficients of
    ``positive_roots[k]`` over ``simple_roots``.
    """

    family: tuple[tuple[str, int], ...]
    torus_rank: int
    dim: int
    simple_roots: tuple[Vec, ...]
    positive_roots: tuple[Vec, ...]
    gram: Mat
    expansions: tuple[tuple[int, ...], ...] = field(repr=False)

    def pairing(self, x: Vec, y: Vec) -> Q:
        return sum((x[i] * vdot(self.gram[i], y) for i in range(self.dim)), Q(0))

    def is_root(self, alpha: Vec) -> bool:
        return alpha in self.positive_roots or tuple(-a for a in alpha) in self.positive_roots


def build_root_system(factors, torus_rank: int = 0) -> RootDatum:
    """Assemble a direct sum of classical factors plus a central torus."""
    factors = tuple((str(f), int(r)) for f, r in factors)
    if torus_rank < 0:
        raise MathValidationError("torus rank must be >= 0", condition="torus_rank")
    for fam, rank in factors:
        if fam not in FAMILIES:
            raise MathValidationError(f"unknown family letter {fam!r}", condition="family")
        if rank < 1:
            raise MathValidationError(f"rank {rank} < 1 in factor {fam}", condition="rank")

    blocks = [_block_roots(fam, rank) for fam, rank in factors]
    dim = sum(b[2] for b in blocks) + torus_rank
    simple: list[Vec] = []
    positive: list[Vec] = []
    expansions: list[tuple[int, ...]] = []
    offset = 0
    simple_offset = 0
    for (blk_simple, blk_positive, blk_dim), (fam, rank) in zip(blocks, factors):
        n_simple_total = sum(len(b[0]) for b in blocks)
        for root in blk_positive:
            coeffs = _expand_in_simple(blk_simple, root)
            full = [0] * n_simple_total
            full[simple_offset : simple_offset + len(coeffs)] = coeffs
            expansions.append(tuple(full))
        simple.extend(_embed(s, offset, dim) for s in blk_simple)
        positive.extend(_embed(p, offset, dim) for p in blk_positive)
        offset += blk_dim
        simple_offset += len(blk_simple)

    rd = RootDatum(
        family=factors,
        torus_rank=torus_rank,
        dim=dim,
        simple_roots=tuple(simple),
        positive_roots=tuple(positive),
        gram=identity_mat(dim),
        expansions=tuple(expansions),
    )
    _check_cartan(rd)
    return rd


def _expand_in_simple(simple: list[Vec], root: Vec) -> tuple[int, ...]:
    """Coefficients of a positive root over the simple roots of its block."""
    if not simple:
        raise MathValidationError("root in a rootless block", condition="expansion")
    dim = len(root)
    # Least-squares-free exact solve: the Gram matrix of the simple roots is
    # invertible, so project onto it.
    g = [[vdot(a, b) for b in simple] for a in simple]
    rhs = [vdot(a, root) for a in simple]
    coeffs = solve_square(g, rhs)
    if coeffs is None:
        raise MathValidationError("simple roots degenerate", condition="expansion")
    recon = vsum([tuple(c * x for x in s) for c, s in zip(coeffs, simple)], dim)
    if recon != root:
        raise MathValidationError("positive root outside simple-root span", condition="expansion")
    out = []
    for c in coeffs:
        if c.denominator != 1 or c < 0:
            raise MathValidationError(
                f"non-integer expansion coefficient {c}", condition="expansion"
            )
        out.append(int(c))
    return tuple(out)


def _check_cartan(rd: RootDatum) -> None:
    for i, a in enumerate(rd.simple_roots):
        for j, b in enumerate(rd.simple_roots):
            if i == j:
                continue
            c = 2 * rd.pairing(a, b) / rd.pairing(b, b)
            if c.denominator != 1 or c > 0:
                raise MathValidationError(
                    f"Cartan integer 2(a,b)/(b,b) = {c} invalid for simple pair ({i},{j})",
                    condition="cartan",
                )


def coroot(rd: RootDatum, alpha: Vec) -> Vec:
    """The coroot 2*alpha/(alpha,alpha) in the shared coordinate space."""
    alpha = tuple(Q(a) for a in alpha)
    if not rd.is_root(alpha):
        raise MathValidationError(f"{alpha} is not a root", condition="coroot")
    norm2 = rd.pairing(alpha, alpha)
    return tuple(2 * a / norm2 for a in alpha)


@dataclass(frozen=True)
class ParabolicDatum:
    """Levi subset, the positive roots outside the Levi, and their sum."""

    levi_subset: frozenset[int]
    phi_Q_plus: tuple[Vec, ...]
    kappa: Vec
    a_alpha: dict[Vec, int]


def parabolic_data(rd: RootDatum, levi) -> ParabolicDatum:
    """Parabolic combinatorics for the Levi given by 1-based simple-root indices."""
    n_simple = len(rd.simple_roots)
    levi = frozenset(int(i) for i in levi)
    for i in levi:
        if not 1 <= i <= n_simple:
            raise MathValidationError(
                f"Levi index {i} out of range 1..{n_simple}", condition="levi_subset"
            )
    phi_q = [
        root
        for root, coeffs in zip(rd.positive_roots, rd.expansions)
        if any(c != 0 and (k + 1) not in levi for k, c in enumerate(coeffs))
    ]
    kappa = vsum(phi_q, rd.dim) if phi_q else zero_vec(rd.dim)
    a_alpha: dict[Vec, int] = {}
    for root in phi_q:
        a = rd.pairing(kappa, coroot(rd, root))
        if a.denominator != 1 or a <= 0:
            raise MathValidationError(
                f"pairing of kappa with coroot of {root} is {a}, not a positive integer",
                condition="a_alpha",
            )
        a_alpha[root] = int(a)
    return ParabolicDatum(
        levi_subset=levi, phi_Q_plus=tuple(phi_q), kappa=kappa, a_alpha=a_alpha
    )
