"""
Bundled examples with their expected outcomes.

Each entry builds a problem document (the same JSON a user would write),
so bundled examples exercise the loader exactly like problem files do.
"""

import inspect
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from poisres.core.errors import ProblemError

# Outcome of an example whose input is rejected before any check runs.
INPUT_ERROR = "InputError"

PLANE = [[-2.0, 2.0], [-2.0, 2.0]]
UNIT4 = [[-1.0, 1.0]] * 4


@dataclass(frozen=True)
class ExampleDefinition:
    name: str
    command: str  # "check" or "verify"
    expected: str
    summary: str
    build: Callable[..., Dict[str, Any]]

    def document(self, **params: Any) -> Dict[str, Any]:
        doc = self.build(**{k: v for k, v in params.items() if v is not None})
        doc.setdefault("name", self.name)
        return doc


# ----------------------------
# Resolution candidates
# ----------------------------

def squares() -> Dict[str, Any]:
    return {
        "description": "{x,y} = x^2 + y^2 resolved by (q sin(pq), q cos(pq)) with {p,q} = 1",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {"x,y": "x^2 + y^2"}},
        "pieces": [
            {
                "name": "plane",
                "coords": ["p", "q"],
                "box": [[-16.0, 16.0], [-3.0, 3.0]],
                "brackets": {"p,q": "1"},
                "map": {"x": "q*sin(p*q)", "y": "q*cos(p*q)"},
            }
        ],
    }


def powers(n: int = 2, m: int = 1) -> Dict[str, Any]:
    """
    {x,y} = x^(2n) + y^(2m) with the sine/cosine candidate.

    For n=2, m=1 the morphism identity fails: at (p,q) = (pi/4, 1) the
    bracket of the components is 1 while the pulled-back target is 3/4.
    """
    n, m = int(n), int(m)
    if n < m or m < 1:
        raise ProblemError(f"powers needs n >= m >= 1, got n={n}, m={m}", path="params")
    k = 2 * m - 1
    angle = f"p*q^{k}"
    return {
        "description": f"{{x,y}} = x^{2 * n} + y^{2 * m} against the sine/cosine candidate",
        "target": {
            "coords": ["x", "y"],
            "box": PLANE,
            "brackets": {"x,y": f"x^{2 * n} + y^{2 * m}"},
        },
        "pieces": [
            {
                "name": "plane",
                "coords": ["p", "q"],
                "box": [[-3.0, 3.0], [-2.0, 2.0]],
                "brackets": {"p,q": f"q^{2 * n - 2 * m}*sin({angle})^2 + cos({angle})^2"},
                "map": {"x": f"q*sin({angle})", "y": f"q*cos({angle})"},
                "probes": [{"p": math.pi / 4, "q": 1.0}],
            }
        ],
    }


def union3() -> Dict[str, Any]:
    """{x,y} = x resolved by three disjoint planes; not connected, not proper."""
    box = [[-4.0, 1.0], [-3.0, 3.0]]

    def plane(name: str, x: str) -> Dict[str, Any]:
        return {
            "name": name,
            "coords": ["p", "q"],
            "box": box,
            "brackets": {"p,q": "1"},
            "map": {"x": x, "y": "q"},
        }

    return {
        "description": "{x,y} = x covered by (exp(p), q), (-exp(p), q) and (0, q)",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {"x,y": "x"}},
        "pieces": [plane("right", "exp(p)"), plane("left", "-exp(p)"), plane("axis", "0")],
    }


def kappa() -> Dict[str, Any]:
    """The squares candidate rescaled by the positive factor 1 + x^2."""
    doc = squares()
    doc["description"] = "{x,y} = (1 + x^2)(x^2 + y^2) via the pulled-back factor on the plane"
    doc["target"]["brackets"] = {"x,y": "(1 + x^2)*(x^2 + y^2)"}
    doc["pieces"][0]["brackets"] = {"p,q": "1 + (q*sin(p*q))^2"}
    return doc


# ----------------------------
# Structures only
# ----------------------------

def linear(g: str = "1") -> Dict[str, Any]:
    return {
        "description": "{x,y} = x g(x,y): singular along x = 0 when g has no zeros there",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {"x,y": f"x*({g})"}},
    }


def isolated() -> Dict[str, Any]:
    return {
        "description": "{x,y} = x^2 + y^2: a single singular point",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {"x,y": "x^2 + y^2"}},
    }


def so3() -> Dict[str, Any]:
    return {
        "description": "the Lie-Poisson structure of so(3)",
        "target": {
            "coords": ["x", "y", "z"],
            "box": [[-1.0, 1.0]] * 3,
            "brackets": {"x,y": "z", "y,z": "x", "z,x": "y"},
        },
    }


def broken() -> Dict[str, Any]:
    """so(3) with {z,x} = x: the Jacobiator is -z."""
    doc = so3()
    doc["description"] = "a perturbed so(3) bracket that fails the Jacobi identity"
    doc["target"]["brackets"] = {"x,y": "z", "y,z": "x", "z,x": "x"}
    return doc


def zero() -> Dict[str, Any]:
    return {
        "description": "the zero bracket",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {}},
    }


def constant() -> Dict[str, Any]:
    return {
        "description": "the standard symplectic plane",
        "target": {"coords": ["x", "y"], "box": PLANE, "brackets": {"x,y": "1"}},
    }


def x1_symplectic() -> Dict[str, Any]:
    return {
        "description": "x1 times the standard symplectic form on R^4: vanishes on x1 = 0",
        "target": {
            "coords": ["x1", "x2", "x3", "x4"],
            "box": UNIT4,
            "brackets": {"x1,x2": "x1", "x3,x4": "x1"},
        },
    }


def split4() -> Dict[str, Any]:
    return {
        "description": "{x1,x2} = x1, {x3,x4} = 1: rank 2 along x1 = 0",
        "target": {
            "coords": ["x1", "x2", "x3", "x4"],
            "box": UNIT4,
            "brackets": {"x1,x2": "x1", "x3,x4": "1"},
        },
    }


EXAMPLES: Dict[str, ExampleDefinition] = {
    d.name: d
    for d in [
        ExampleDefinition("squares", "verify", "Verified", "x^2 + y^2, one plane", squares),
        ExampleDefinition("powers", "verify", "Refuted", "x^2n + y^2m, sine/cosine map", powers),
        ExampleDefinition("union3", "verify", "Verified", "{x,y} = x, three planes", union3),
        ExampleDefinition("kappa", "verify", "Verified", "positive rescaling of squares", kappa),
        ExampleDefinition("linear", "check", "NoProperResolution", "{x,y} = x g", linear),
        ExampleDefinition("isolated", "check", "Inconclusive", "{x,y} = x^2 + y^2", isolated),
        ExampleDefinition("so3", "check", "Inconclusive", "so(3), odd dimension", so3),
        ExampleDefinition("broken", "check", INPUT_ERROR, "Jacobi failure", broken),
        ExampleDefinition("zero", "check", "NotDenseSymplectic", "{x,y} = 0", zero),
        ExampleDefinition("constant", "check", "SymplecticOnBox", "{x,y} = 1", constant),
        ExampleDefinition(
            "x1_symplectic", "check", "NoResolutionRankZero", "x1 J on R^4", x1_symplectic
        ),
        ExampleDefinition("split4", "check", "NoProperResolution", "corank two on R^4", split4),
    ]
}


def example_names() -> List[str]:
    return list(EXAMPLES)


def get_example(name: str) -> ExampleDefinition:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ProblemError(
            f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}", path="examples"
        ) from None


def example_document(name: str, params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Problem document of a bundled example; params only reach builders that take them."""
    definition = get_example(name)
    accepted = set(inspect.signature(definition.build).parameters)
    chosen = {k: v for k, v in (params or {}).items() if k in accepted}
    return definition.document(**chosen)
