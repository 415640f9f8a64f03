import enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

MAX_DEGREE = 3


class ProblemName(enum.Enum):
    PAPER = "paper"
    LINEAR = "linear"
    ANISOTROPIC = "anisotropic"


class OutputFormat(enum.Enum):
    CSV = "csv"
    MARKDOWN = "md"


class SolverMethod(enum.Enum):
    DIRECT = "direct"
    CG = "cg"


class MeshPattern(enum.Enum):
    DIAGONAL = "diagonal"
    CRISSCROSS = "crisscross"


class PenaltyRule(enum.Enum):
    INVERSE_DIAMETER = "inverse_diameter"


class HDGConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0, le=MAX_DEGREE)
    penalty: PenaltyRule = PenaltyRule.INVERSE_DIAMETER
    solver: SolverMethod = SolverMethod.DIRECT

    @property
    def potential_degree(self) -> int:
        return self.k + 1

    def alpha(self, diameter: float) -> float:
        """Penalty on every face of an element of diameter h_T."""
        if diameter <= 0.0:
            raise ValueError(f"Element diameter must be positive, got {diameter}")
        return 1.0 / diameter


class StudyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    degrees: List[int] = Field(default_factory=lambda: [0], min_length=1)
    levels: int = Field(default=5, ge=1, le=8)
    problem: ProblemName = ProblemName.PAPER
    mesh: MeshPattern = MeshPattern.CRISSCROSS
    solver: SolverMethod = SolverMethod.DIRECT
    initial_divisions: int = Field(default=2, ge=1)
    extended: bool = False

    @field_validator("degrees")
    @classmethod
    def check_degrees(cls, degrees: List[int]) -> List[int]:
        for k in degrees:
            if k < 0 or k > MAX_DEGREE:
                raise ValueError(f"k={k} is out of the supported range 0..{MAX_DEGREE}")
        return degrees


class ConvergenceRow(BaseModel):
    k: int
    h_inv: int
    err_u: float = Field(ge=0.0)
    err_sigma: float = Field(ge=0.0)
    err_sigma_star: float = Field(ge=0.0)
    err_div: float = Field(ge=0.0)
    ord_u: Optional[float] = None
    ord_sigma: Optional[float] = None
    ord_sigma_star: Optional[float] = None
    ord_div: Optional[float] = None
    err_triple: Optional[float] = None
    ord_triple: Optional[float] = None
    bound: Optional[float] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""
