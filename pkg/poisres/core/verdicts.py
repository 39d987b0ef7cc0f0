from enum import Enum


class MorphismStatus(Enum):
    MORPHISM = "Morphism"
    NOT_MORPHISM = "NotMorphism"


class LocusKind(Enum):
    """
    Shape of the sampled singular locus.

    NOTE:
    - Enum values appear verbatim in JSON reports
    - Extensions must preserve existing values
    """
    EMPTY = "Empty"
    ISOLATED_POINTS = "IsolatedPoints"
    CODIM_ONE_HYPERSURFACE = "CodimOneHypersurface"
    FAT_REGION = "FatRegion"


class ObstructionStatus(Enum):
    NOT_DENSE_SYMPLECTIC = "NotDenseSymplectic"
    NO_PROPER_RESOLUTION = "NoProperResolution"
    NO_RESOLUTION_RANK_ZERO = "NoResolutionRankZero"
    INCONCLUSIVE = "Inconclusive"
    SYMPLECTIC_ON_BOX = "SymplecticOnBox"

    @property
    def obstructed(self) -> bool:
        return self in (
            ObstructionStatus.NOT_DENSE_SYMPLECTIC,
            ObstructionStatus.NO_PROPER_RESOLUTION,
            ObstructionStatus.NO_RESOLUTION_RANK_ZERO,
        )


class OverallStatus(Enum):
    VERIFIED = "Verified"
    REFUTED = "Refuted"
    INCONCLUSIVE = "Inconclusive"


class CheckVerdict(Enum):
    PASS = "Pass"
    FAIL = "Fail"
    SKIPPED = "Skipped"
    INFO = "Info"


# Results are quoted by what they state. Each entry keeps the hypothesis
# class (proper / separable / holomorphic connected) of the statement.
CITATIONS = {
    "morphism_criterion": (
        "a map (u,v) from a symplectic surface is a Poisson morphism onto {x,y}=f "
        "iff {p,q}(u_p v_q - u_q v_p) = f(u,v) in local coordinates"
    ),
    "resolution_definition": (
        "a symplectic resolution is a symplectic manifold of the same dimension "
        "with a surjective Poisson morphism onto the target"
    ),
    "critical_values": (
        "for a symplectic resolution the singular points of the target are exactly "
        "the critical values, and d(phi) is invertible iff phi(sigma) is regular"
    ),
    "dense_symplectic": (
        "a Poisson manifold admitting a separable symplectic resolution is "
        "symplectic on an open dense subset"
    ),
    "codim_one_surface": (
        "{x,y} = x g(x,y) with g vanishing only on x=0 admits no proper symplectic "
        "resolution, and no connected real-analytic or holomorphic one"
    ),
    "codim_one": (
        "a Poisson manifold symplectic on an open dense subset whose singular locus "
        "contains a codimension-one submanifold admits no proper symplectic resolution; "
        "in the holomorphic case no connected symplectic resolution exists"
    ),
    "corank_two": (
        "a codimension-one singular submanifold with a point of corank two rules out "
        "proper symplectic resolutions (connected ones in the analytic case)"
    ),
    "rank_zero": (
        "in dimension at least 4, if the bivector vanishes along a codimension-one "
        "singular submanifold, no symplectic resolution exists"
    ),
    "isolated": (
        "isolated singular points do not obstruct: resolutions exist for x^2+y^2 "
        "and its positive rescalings"
    ),
    "open_smooth_connected": (
        "whether {x,y}=x admits a connected smooth symplectic resolution is open; "
        "no verdict is issued for that class"
    ),
}
