import enum

from pydantic import BaseModel, Field, model_validator

from app.config import settings
from app.core.constants import TABLE1_SAMPLE_SIZES, TABLE1_WIDTHS
from app.schemas.model import ModelConfig
from app.schemas.problem import TargetSpec
from app.schemas.train import MonitorConfig, TrainConfig


class Preset(str, enum.Enum):
    table1 = "table1"


class ExperimentSection(BaseModel):
    name: str = "run"
    preset: Preset | None = None

    model_config = {"extra": "forbid"}


class DatasetSection(BaseModel):
    n: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)

    model_config = {"extra": "forbid"}


class GridSection(BaseModel):
    widths: list[int] = Field(default_factory=lambda: list(TABLE1_WIDTHS), min_length=1)
    sample_sizes: list[int] = Field(default_factory=lambda: list(TABLE1_SAMPLE_SIZES), min_length=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _positive(self) -> "GridSection":
        if any(m < 1 for m in self.widths):
            raise ValueError("widths must be >= 1")
        if any(n < 1 for n in self.sample_sizes):
            raise ValueError("sample_sizes must be >= 1")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be >= 0")
        return self


class OutputSection(BaseModel):
    directory: str = settings.OUTPUT_DIR

    model_config = {"extra": "forbid"}


class RunConfig(BaseModel):
    experiment: ExperimentSection = ExperimentSection()
    model: ModelConfig = ModelConfig()
    target: TargetSpec = TargetSpec()
    dataset: DatasetSection = DatasetSection()
    training: TrainConfig = TrainConfig()
    monitors: MonitorConfig = MonitorConfig()
    grid: GridSection = GridSection()
    output: OutputSection = OutputSection()

    model_config = {"extra": "forbid", "protected_namespaces": ()}

    def train_config(self) -> TrainConfig:
        """[training] with the [monitors] section folded in."""
        return self.training.model_copy(update={"monitors": self.monitors})
