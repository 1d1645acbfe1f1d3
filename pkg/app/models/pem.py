from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

CATEGORIES = ("car", "van", "truck", "pedestrian", "cyclist", "tram")
# Order fixed as (None, Partial, Mostly)
OCCLUSIONS = ("none", "partial", "mostly")

CATEGORY_SLICE = slice(0, 6)
OCCLUSION_SLICE = slice(6, 9)
LOC_X, LOC_Y, LOC_Z = 9, 10, 11
ROT_Y = 12
SALIENT_DIM = 13

Category = Literal["car", "van", "truck", "pedestrian", "cyclist", "tram"]
Occlusion = Literal["none", "partial", "mostly"]


def encode_salient(
    category: str,
    occlusion: str,
    loc: tuple[float, float, float] | list[float],
    rot_y: float,
) -> np.ndarray:
    """Build the 13-wide salient vector: category, occlusion, xyz, rotation."""
    vector = np.zeros(SALIENT_DIM)
    vector[CATEGORIES.index(category)] = 1.0
    vector[OCCLUSION_SLICE.start + OCCLUSIONS.index(occlusion)] = 1.0
    vector[LOC_X : LOC_Z + 1] = loc
    vector[ROT_Y] = rot_y
    return vector


def is_valid_salient(vector: np.ndarray) -> bool:
    vector = np.asarray(vector, dtype=float)
    if vector.shape[-1] != SALIENT_DIM or not np.all(np.isfinite(vector)):
        return False
    return bool(
        np.all(vector[..., CATEGORY_SLICE].sum(axis=-1) == 1.0)
        and np.all(vector[..., OCCLUSION_SLICE].sum(axis=-1) == 1.0)
    )


@dataclass(frozen=True)
class DetectionRecord:
    salient: np.ndarray
    detected: bool


class DetectionLogEntry(BaseModel):
    """One obstacle of a detection log (JSON-lines)."""

    model_config = ConfigDict(extra="forbid")

    category: Category
    occlusion: Occlusion
    loc: tuple[float, float, float]
    rot_y: float
    detected: bool

    def to_record(self) -> DetectionRecord:
        return DetectionRecord(
            salient=encode_salient(self.category, self.occlusion, self.loc, self.rot_y),
            detected=self.detected,
        )


class MlpSpec(BaseModel):
    """Feed-forward layout; the last width is the single output unit."""

    model_config = ConfigDict(frozen=True)

    widths: tuple[int, ...] = (20, 20, 20, 1)
    activation: Literal["relu", "tanh"] = "relu"
    output: Literal["sigmoid"] = "sigmoid"

    @field_validator("widths")
    @classmethod
    def validate_widths(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("at least one layer is required")
        if any(width <= 0 for width in value):
            raise ValueError("layer widths must be positive")
        if value[-1] != 1:
            raise ValueError("final layer must have a single output")
        return value

    @classmethod
    def logistic(cls) -> "MlpSpec":
        return cls(widths=(1,))


class CalibrationReport(BaseModel):
    model: str = "ml-nn"
    bce: float = Field(ge=0)
    roc_auc: float = Field(ge=0, le=1)
    folds: int
    fold_bce: list[float]
    fold_roc_auc: list[float | None]


class Box(BaseModel):
    x1: float
    y1: float
    x2: float
    y2: float
    conf: float | None = None

    @model_validator(mode="after")
    def check_corners(self) -> "Box":
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError("box corners must satisfy x1 < x2 and y1 < y2")
        return self

    @classmethod
    def from_list(cls, values: list[float]) -> "Box":
        if len(values) not in (4, 5):
            raise ValueError("boxes are [x1, y1, x2, y2] with optional confidence")
        conf = values[4] if len(values) == 5 else None
        return cls(x1=values[0], y1=values[1], x2=values[2], y2=values[3], conf=conf)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


class BoxMatchProblem(BaseModel):
    gt: list[Box] = Field(default_factory=list)
    pred: list[Box] = Field(default_factory=list)
    cost_rule: Literal["iou"] = "iou"


class ModelFile(BaseModel):
    """Versioned on-disk representation of a scorer."""

    format_version: Literal[1] = 1
    kind: Literal["pem", "proposal"] = "pem"
    spec: MlpSpec
    input_dim: int
    shapes: list[tuple[int, int]]
    params: list[float]
    input_mean: list[float]
    input_scale: list[float]
