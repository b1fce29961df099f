"""The bundle of data defining one Fano horospherical manifold."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Q

from .dh import DHDensity, dh_barycenter, dh_volume, density_from_forms
from .errors import MathValidationError
from .polytopes import Polytope, delta_from_moment
from .rationals import Vec, mat_vec, zero_vec
from .roots import ParabolicDatum, RootDatum


@dataclass(frozen=True)
class HorosphericalProblem:
    """Moment polytope, shift vector kappa and density in one coordinate space.

    ``rd``/``pd`` carry the root-system provenance when the problem was built
    from group data; synthetic problems (tests, toric cases) may omit them.
    """

    moment: Polytope
    kappa: Vec
    density: DHDensity
    rd: RootDatum | None = None
    pd: ParabolicDatum | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def a1_dim(self) -> int:
        return self.moment.dim

    def validate(self) -> None:
        if len(self.kappa) != self.moment.dim:
            raise MathValidationError(
                "kappa dimension does not match the moment polytope",
                condition="dimension",
            )
        if not self.moment.contains(self.kappa, strict=True):
            raise MathValidationError(
                "kappa is not interior to the moment polytope",
                condition="kappa_interior",
            )
        if not self.density.nonnegative_on(self.moment):
            raise MathValidationError(
                "density is negative on the moment polytope",
                condition="density_nonneg",
            )

    @property
    def volume(self) -> Q:
        if "volume" not in self._cache:
            self._cache["volume"] = dh_volume(self.moment, self.density)
        return self._cache["volume"]

    @property
    def barycenter(self) -> Vec:
        if "barycenter" not in self._cache:
            self._cache["barycenter"] = dh_barycenter(self.moment, self.density)
        return self._cache["barycenter"]

    def delta(self) -> Polytope:
        return delta_from_moment(self.moment, self.kappa)

    def two_delta(self) -> Polytope:
        return self.delta().scale(2)


def problem_from_root_data(
    rd: RootDatum, pd: ParabolicDatum, moment: Polytope
) -> HorosphericalProblem:
    """Assemble a problem from group combinatorics plus the moment polytope.

    The polytope must live in the same coordinate space as the root data
    (the toric-fiber directions coincide with the full character space here;
    a torus splitting is not reconstructed from group data).
    """
    if moment.dim != rd.dim:
        raise MathValidationError(
            f"moment polytope dimension {moment.dim} != character space dimension {rd.dim}",
            condition="dimension",
        )
    forms = tuple(mat_vec(rd.gram, alpha) for alpha in pd.phi_Q_plus)
    hp = HorosphericalProblem(
        moment=moment,
        kappa=pd.kappa,
        density=density_from_forms(forms),
        rd=rd,
        pd=pd,
    )
    hp.validate()
    return hp


def synthetic_problem(moment: Polytope, kappa=None, forms=()) -> HorosphericalProblem:
    """A problem given directly by polytope data (toric and test cases)."""
    kappa = (
        zero_vec(moment.dim) if kappa is None else tuple(Q(c) for c in kappa)
    )
    hp = HorosphericalProblem(
        moment=moment, kappa=kappa, density=density_from_forms(forms)
    )
    hp.validate()
    return hp
