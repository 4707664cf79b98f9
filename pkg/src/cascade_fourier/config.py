"""
Run configuration.

Precedence, lowest first: field defaults, the JSON file given with --config,
explicit command-line flags. THREADS is the only environment variable read.
"""

import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cascade_fourier.curves import CurveSpec, make_circle_arc, make_parabola_arc
from cascade_fourier.errors import InvalidParams
from cascade_fourier.weights import PARAM_NAMES, WeightFamily, WeightModel, make_model

THREADS_ENV = "THREADS"

DEFAULT_PARAMS: Dict[WeightFamily, Dict[str, float]] = {
    WeightFamily.DETERMINISTIC: {},
    WeightFamily.LOGNORMAL: {"lambda": 0.09},
    WeightFamily.TWO_POINT: {"w_plus": 1.5, "w_minus": 0.5, "p": 0.5},
}


def thread_count(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else $THREADS, else the CPU count."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV)
        if raw is None or raw.strip() == "":
            return os.cpu_count() or 1
        try:
            threads = int(raw)
        except ValueError as e:
            raise InvalidParams(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if threads < 1:
        raise InvalidParams(f"thread count must be >= 1, got {threads}")
    return threads


class ModelSpec(BaseModel):
    """Weight model as it appears in config files: {family, params, b, d}."""

    family: WeightFamily = Field(default=WeightFamily.LOGNORMAL, description="Weight distribution family")
    params: Dict[str, float] = Field(default_factory=dict, description="Family parameters by name")
    b: int = Field(default=2, ge=2, description="Base of the b-adic grid")
    d: int = Field(default=1, ge=1, description="Spatial dimension")

    @model_validator(mode="after")
    def _fill_and_check(self) -> "ModelSpec":
        merged = {**DEFAULT_PARAMS[self.family], **self.params}
        unknown = set(merged) - set(PARAM_NAMES[self.family])
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for {self.family.value}")
        self.params = merged
        self.build()
        return self

    def build(self) -> WeightModel:
        ordered = tuple(self.params[name] for name in PARAM_NAMES[self.family])
        return make_model(self.family, ordered, self.b, self.d)


class CurveChoice(BaseModel):
    """Support geometry: a built-in curve, or the flat cube [0, 1]^d."""

    family: Literal["flat", "circle", "parabola"] = Field(default="circle", description="Support of the measure")
    curvature: float = Field(default=2.0 * math.pi, gt=0, description="Circle curvature")

    @property
    def is_flat(self) -> bool:
        return self.family == "flat"

    def build(self) -> Optional[CurveSpec]:
        """The CurveSpec, or None for flat supports."""
        if self.family == "circle":
            return make_circle_arc(self.curvature)
        if self.family == "parabola":
            return make_parabola_arc()
        return None


class RunConfig(BaseModel):
    """Every knob of a cascade-fourier run."""

    model_config = ConfigDict(validate_assignment=True)

    command: str = Field(default="profile", description="Subcommand that produced this config")
    model: ModelSpec = Field(default_factory=ModelSpec)
    curve: CurveChoice = Field(default_factory=CurveChoice)
    depth: int = Field(default=14, ge=0, description="Cascade depth n")
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1, description="Realization seeds")
    k0: int = Field(default=4, ge=0, description="Smallest radius exponent (radius b^k0)")
    k1: int = Field(default=11, ge=0, description="Largest radius exponent (radius b^k1)")
    n_theta: int = Field(default=256, ge=16, description="Directions per radius")
    n_shell: int = Field(default=4, ge=1, description="Radii per shell around each reported radius")
    p_list: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0], description="Spherical L^p orders")
    tol: float = Field(default=1e-9, ge=1e-12, description="Curve quadrature tolerance per unit length")
    enrich_normals: bool = Field(default=True, description="Add curve normal directions to the sphere sample")
    n_min: int = Field(default=8, ge=2, description="First depth of the dim_2 regression")
    n_max: int = Field(default=16, ge=3, description="Last depth of the dim_2 regression")
    q_grid: List[float] = Field(
        default_factory=lambda: [0.5 * k for k in range(1, 17)], description="q values for the tau table"
    )
    suite: Literal["trivial", "analytic", "statistical", "full"] = Field(default="trivial")
    output_dir: Path = Field(default=Path("results"), description="Directory for CSV, JSON and binary outputs")
    threads: Optional[int] = Field(default=None, ge=1, description="Worker threads (default $THREADS or CPU count)")
    log_dir: Path = Field(default=Path("logs"), description="Directory for eliot logs")

    @field_validator("p_list")
    @classmethod
    def _finite_orders(cls, value: List[float]) -> List[float]:
        for p in value:
            if not (p >= 1 and math.isfinite(p)):
                raise ValueError(f"L^p orders must be finite and >= 1, got {p}")
        return sorted(set(value))

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError(f"seeds must be distinct, got {value}")
        return value

    @model_validator(mode="after")
    def _ranges(self) -> "RunConfig":
        if self.k1 <= self.k0:
            raise ValueError(f"need k0 < k1, got {self.k0}, {self.k1}")
        if self.n_max <= self.n_min:
            raise ValueError(f"need n_min < n_max, got {self.n_min}, {self.n_max}")
        return self

    @property
    def workers(self) -> int:
        return thread_count(self.threads)


def load_config(path: Path) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_text())


def build_config(config_path: Optional[Path] = None, **overrides: Any) -> RunConfig:
    """
    Merge defaults, an optional JSON file and explicit overrides.

    Overrides equal to None are ignored; model and curve overrides are merged
    field by field into the nested sections.
    """
    base: Dict[str, Any] = load_config(config_path).model_dump(mode="json") if config_path else {}
    for section in ("model", "curve"):
        nested = overrides.pop(section, None) or {}
        nested = {k: v for k, v in nested.items() if v is not None}
        if nested:
            current = dict(base.get(section) or {})
            if section == "model" and "family" in nested and nested["family"] != current.get("family"):
                current["params"] = {}
            if section == "model" and "params" in nested:
                current["params"] = {**(current.get("params") or {}), **nested.pop("params")}
            current.update(nested)
            base[section] = current
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(base)
