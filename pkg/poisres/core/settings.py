import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

from .errors import ProblemError
from .solver import SolverConfig

Grid = Union[int, Tuple[int, ...]]

# Problem-file option names that are not field names.
OPTION_ALIASES: Dict[str, str] = {
    "samples": "morphism_samples",
    "grid": "coverage_grid",
}


def _grid(value: Any) -> Optional[Grid]:
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return int(value)


@dataclass(frozen=True)
class Settings:
    """
    Every threshold the verifiers use, with its default.

    Precedence: defaults < problem-file options < command-line flags.
    to_dict() is hashed into reports as config_hash.
    """
    seed: int = 42
    jacobi_samples: int = 256
    morphism_samples: int = 10_000
    symplectic_samples: int = 4096
    tol: float = 1e-9
    rank_threshold: float = 1e-8
    critical_threshold: float = 1e-7
    symplectic_tol: float = 1e-9
    solver_starts: int = 8
    solver_iterations: int = 100
    solver_tol: float = 1e-8
    coverage_grid: Grid = 21
    critical_grid: Optional[Grid] = None
    locus_grid: Optional[Grid] = None
    refine_tol: float = 1e-10
    zero_tol: float = 1e-9
    grad_tol: float = 1e-6
    quorum: float = 0.9
    ode_step: float = 1e-3
    blowup: float = 1e9
    check_jacobi: bool = True

    def locus_grid_for(self, dim: int) -> Grid:
        if self.locus_grid is not None:
            return self.locus_grid
        if dim <= 2:
            return 81
        if dim <= 4:
            return 21
        return 9

    def critical_grid_for(self, dim: int) -> Grid:
        if self.critical_grid is not None:
            return self.critical_grid
        if dim <= 2:
            return 41
        if dim <= 4:
            return 21
        return 9

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(
            starts=self.solver_starts,
            iterations=self.solver_iterations,
            tol=self.solver_tol,
        )

    def merged(
        self,
        options: Optional[Mapping[str, Any]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "Settings":
        """Apply problem-file options, then command-line overrides (None values ignored)."""
        out = self
        for source, values in (("options", options), ("overrides", overrides)):
            if not values:
                continue
            changes: Dict[str, Any] = {}
            for key, value in values.items():
                if value is None:
                    continue
                name = OPTION_ALIASES.get(key, key)
                if name not in _FIELD_NAMES:
                    raise ProblemError(f"unknown option {key!r}", path=f"{source}.{key}")
                changes[name] = _coerce(name, value, f"{source}.{key}")
            out = replace(out, **changes)
        return out

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        for key in ("coverage_grid", "critical_grid", "locus_grid"):
            if isinstance(d[key], tuple):
                d[key] = list(d[key])
        return d


_FIELD_NAMES = frozenset(f.name for f in fields(Settings))

_INT_FIELDS = {
    "seed", "jacobi_samples", "morphism_samples",
    "symplectic_samples", "solver_starts", "solver_iterations",
}
_GRID_FIELDS = {"coverage_grid", "critical_grid", "locus_grid"}


def _coerce(name: str, value: Any, path: str) -> Any:
    try:
        if name in _GRID_FIELDS:
            grid = _grid(value)
            counts: Sequence[int] = grid if isinstance(grid, tuple) else (grid,)
            if any(c < 2 for c in counts):
                raise ValueError("grids need at least 2 points per axis")
            return grid
        if name == "check_jacobi":
            if not isinstance(value, bool):
                raise ValueError("expected true or false")
            return value
        if name in _INT_FIELDS:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError("expected an integer")
            out = int(value)
            if name == "seed" and out < 0:
                raise ValueError("expected a non-negative integer")
            if name != "seed" and out < 1:
                raise ValueError("expected a positive integer")
            return out
        out_f = float(value)
        if not (math.isfinite(out_f) and out_f > 0):
            raise ValueError("expected a finite positive number")
        return out_f
    except (TypeError, ValueError, OverflowError) as exc:
        raise ProblemError(str(exc), path=path) from None
