"""Data models for disordered-tree polymer models."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator
from scipy.special import logsumexp


SCHEMA_VERSION = 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


# ---------------------------------------------------------------------------
# Disorder distributions
# ---------------------------------------------------------------------------

class GaussianDisorder(_Frozen):
    """Normal disorder N(mu, sigma²)."""
    kind: Literal["gaussian"] = "gaussian"
    mu: float = 0.0
    sigma: float = Field(1.0, gt=0)


class BernoulliDisorder(_Frozen):
    """Two-point disorder: P(V=hi)=p, P(V=lo)=1−p."""
    kind: Literal["bernoulli"] = "bernoulli"
    p: float = Field(0.5, ge=0, le=1)
    lo: float = -1.0
    hi: float = 1.0

    @model_validator(mode="after")
    def _check_order(self) -> "BernoulliDisorder":
        if not self.lo < self.hi:
            raise ValueError(f"bernoulli disorder needs lo < hi (got lo={self.lo}, hi={self.hi})")
        return self


class ConstantDisorder(_Frozen):
    """Degenerate disorder V ≡ c."""
    kind: Literal["constant"] = "constant"
    c: float = 0.0


BaseDisorder = Annotated[
    Union[GaussianDisorder, BernoulliDisorder, ConstantDisorder],
    Field(discriminator="kind"),
]


class ShiftedDisorder(_Frozen):
    """Base law translated by a constant (the law of V+shift)."""
    kind: Literal["shifted"] = "shifted"
    base: BaseDisorder
    shift: float = 0.0

    @field_validator("base", mode="before")
    @classmethod
    def _single_level(cls, value: Any) -> Any:
        kind = value.get("kind") if isinstance(value, dict) else getattr(value, "kind", None)
        if kind == "shifted":
            raise ValueError("shifted disorder base must not itself be shifted")
        return value


DisorderSpec = Annotated[
    Union[GaussianDisorder, BernoulliDisorder, ConstantDisorder, ShiftedDisorder],
    Field(discriminator="kind"),
]

_disorder_adapter: TypeAdapter = TypeAdapter(DisorderSpec)


def parse_disorder(data: Union[Dict[str, Any], BaseModel]) -> "DisorderSpec":
    """Build a DisorderSpec from its tagged-object form."""
    if isinstance(data, BaseModel):
        return data  # type: ignore[return-value]
    return _disorder_adapter.validate_python(data)


# ---------------------------------------------------------------------------
# Defects and models
# ---------------------------------------------------------------------------

class NoDefect(_Frozen):
    """Homogeneous disorder, no defect structure."""
    kind: Literal["none"] = "none"

    @property
    def u(self) -> float:
        return 0.0


class BranchShift(_Frozen):
    """Leftmost branch carries V+u (requires d1 = 1)."""
    kind: Literal["branch_shift"] = "branch_shift"
    u: float = 0.0


class SubtreeConstant(_Frozen):
    """Leftmost d1-ary subtree carries the constant potential u."""
    kind: Literal["subtree_constant"] = "subtree_constant"
    u: float = 0.0


class SubtreeShift(_Frozen):
    """Leftmost d1-ary subtree carries V+u."""
    kind: Literal["subtree_shift"] = "subtree_shift"
    u: float = 0.0


DefectKind = Annotated[
    Union[NoDefect, BranchShift, SubtreeConstant, SubtreeShift],
    Field(discriminator="kind"),
]


class ModelSpec(_Frozen):
    """A d-ary tree with bulk disorder and an optional defect on the leftmost d1-ary subtree."""
    d: int = Field(2, ge=2)
    d1: int = Field(1, ge=1)
    bulk: DisorderSpec = Field(default_factory=GaussianDisorder)
    defect: DefectKind = Field(default_factory=NoDefect)

    @model_validator(mode="after")
    def _check_arity(self) -> "ModelSpec":
        if not 1 <= self.d1 < self.d:
            raise ValueError(f"defect arity must satisfy 1 <= d1 < d (got d={self.d}, d1={self.d1})")
        if isinstance(self.defect, BranchShift) and self.d1 != 1:
            raise ValueError(f"branch_shift defect requires d1 = 1 (got d1={self.d1})")
        return self

    @property
    def u(self) -> float:
        """Defect potential (0 for the homogeneous model)."""
        return self.defect.u

    @property
    def defect_kind(self) -> str:
        return self.defect.kind

    @property
    def is_shift_defect(self) -> bool:
        return isinstance(self.defect, (BranchShift, SubtreeShift))

    @property
    def is_deterministic(self) -> bool:
        """True for the non-disordered tree with a constant defect subtree."""
        return (
            isinstance(self.bulk, ConstantDisorder)
            and self.bulk.c == 0.0
            and isinstance(self.defect, (SubtreeConstant, NoDefect))
        )

    def with_potential(self, u: float) -> "ModelSpec":
        """Same model with defect potential u (no-op for the homogeneous model)."""
        if isinstance(self.defect, NoDefect):
            return self
        return self.model_copy(update={"defect": self.defect.model_copy(update={"u": float(u)})})


# ---------------------------------------------------------------------------
# Tree addressing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeAddress:
    """Node (k, j): generation k ≥ 0, index j ∈ [1, d^k]. The root is (0, 1)."""
    generation: int
    index: int

    def __post_init__(self):
        if self.generation < 0:
            raise ValueError(f"generation must be >= 0 (got {self.generation})")
        if self.index < 1:
            raise ValueError(f"index must be >= 1 (got {self.index})")

    def check(self, d: int) -> "NodeAddress":
        """Validate the index range for arity d."""
        if self.index > d ** self.generation:
            raise ValueError(
                f"index {self.index} out of range for generation {self.generation} (d={d})"
            )
        return self

    def child(self, d: int, ell: int) -> "NodeAddress":
        """Child ℓ ∈ [1, d]."""
        if not 1 <= ell <= d:
            raise ValueError(f"child number must lie in [1, {d}] (got {ell})")
        return NodeAddress(self.generation + 1, d * (self.index - 1) + ell)

    def children(self, d: int) -> List["NodeAddress"]:
        return [self.child(d, ell) for ell in range(1, d + 1)]

    def path_digits(self, d: int) -> List[int]:
        """Child numbers ℓ₁..ℓ_k along the path from the root."""
        digits = []
        m = self.index - 1
        for _ in range(self.generation):
            m, r = divmod(m, d)
            digits.append(r + 1)
        return digits[::-1]

    def in_defect_subtree(self, d: int, d1: int) -> bool:
        """Membership in the leftmost d1-ary subtree."""
        return all(ell <= d1 for ell in self.path_digits(d))


# ---------------------------------------------------------------------------
# Closed-form results
# ---------------------------------------------------------------------------

class PhaseLabel(str, Enum):
    """Phase of the defect-subtree model."""
    FULLY_PINNED = "FullyPinned"
    DEPINNED = "Depinned"
    PARTIALLY_PINNED = "PartiallyPinned"
    DEPINNED_OR_PARTIALLY_PINNED = "DepinnedOrPartiallyPinned"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class CriticalData:
    """Critical inverse temperature of the homogeneous model."""
    beta_c: float
    lambda_at_beta_c: float
    phi_cap: float

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.beta_c)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


# ---------------------------------------------------------------------------
# Realizations and decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Realization:
    """A disordered tree: values are a pure function of (seed, address)."""
    model: ModelSpec
    seed: int
    depth: int

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0 (got {self.depth})")

    @property
    def path_count(self) -> int:
        return self.model.d ** self.depth


@dataclass
class STDecomposition:
    """Partition function split by the generation k at which a path leaves the defect."""
    n: int
    beta: float
    u: float
    log_g: np.ndarray
    log_pinned_term: float

    def log_terms(self) -> np.ndarray:
        """βku + log G_k for k < n, followed by the pinned (k = n) term."""
        k = np.arange(self.n, dtype=float)
        return np.append(self.beta * self.u * k + self.log_g, self.log_pinned_term)

    def recombine(self) -> float:
        """log Z recovered from the decomposition."""
        return float(logsumexp(self.log_terms()))


# ---------------------------------------------------------------------------
# Monte Carlo results
# ---------------------------------------------------------------------------

@dataclass
class FreeEnergyEstimate:
    """Replica average of (1/n) log Z at one depth."""
    n: int
    replicas: int
    mean: float
    stderr: float
    min: float
    max: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class LadderReport:
    """Free-energy estimates over a depth ladder, with the closed-form anchor."""
    model: ModelSpec
    beta: float
    u: float
    master_seed: int
    seed_policy: str
    estimates: List[FreeEnergyEstimate]
    anchor_lower: float
    anchor_upper: float
    anchor_name: str
    finite_n_anchor: Dict[int, float] = field(default_factory=dict)
    extrapolated: Optional[float] = None

    def anchors_for(self, n: int) -> Tuple[float, float]:
        """Anchor band for the row at depth n."""
        if n in self.finite_n_anchor:
            value = self.finite_n_anchor[n]
            return value, value
        return self.anchor_lower, self.anchor_upper

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.model_dump(),
            "beta": self.beta,
            "u": self.u,
            "master_seed": self.master_seed,
            "seed_policy": self.seed_policy,
            "estimates": [e.to_dict() for e in self.estimates],
            "anchor_lower": self.anchor_lower,
            "anchor_upper": self.anchor_upper,
            "anchor_name": self.anchor_name,
            "finite_n_anchor": {str(k): v for k, v in self.finite_n_anchor.items()},
            "extrapolated": self.extrapolated,
        }


@dataclass
class MartingaleTrace:
    """Replica mean of log M_n per depth."""
    n_list: List[int]
    mean: List[float]
    stderr: List[float]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ObservableSummary:
    """Mean, standard error and a 10-bin histogram on [0, 1]."""
    mean: float
    stderr: float
    histogram: List[int]
    bin_edges: List[float]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PinnedProfile:
    """Replica summary of the Gibbs pinned fraction and dominant exit generation."""
    n: int
    replicas: int
    pinned_fraction: ObservableSummary
    dominant_fraction: ObservableSummary

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "replicas": self.replicas,
            "pinned_fraction": self.pinned_fraction.to_dict(),
            "dominant_fraction": self.dominant_fraction.to_dict(),
        }


@dataclass
class ConcentrationProfile:
    """Sample standard deviation of (1/n) log Z per depth."""
    n_list: List[int]
    stdev: List[float]
    decreasing: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PhaseCell:
    """One (β, u) cell of a phase scan."""
    beta: float
    u: float
    label: PhaseLabel
    F: float
    J: Optional[float]
    F_at_beta_c: Optional[float]
    free_energy_mean: float
    free_energy_stderr: float
    pinned_fraction_mean: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["label"] = self.label.value
        return data


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Provenance for one CLI run."""
    command: str
    config: Dict[str, Any]
    results: Dict[str, Any]
    tool_version: str
    timestamp: str
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(**data)
