from pydantic import BaseModel, Field, model_validator

from app.config import settings
from app.schemas.model import ModelConfig, ModelParams


class MonitorConfig(BaseModel):
    enabled: bool = False
    probe_size: int = Field(default=settings.PROBE_SIZE, ge=1)
    seed: int = Field(default=0, ge=0)

    model_config = {"extra": "forbid"}


class TrainConfig(BaseModel):
    eta: float | None = Field(default=None, gt=0)
    eta_scale: float = Field(default=settings.ETA_SCALE, gt=0)
    T: int = Field(default=10_000, ge=0)
    eval_every: int = Field(default=settings.EVAL_EVERY, ge=1)
    n_test: int = Field(default=settings.N_TEST, ge=1)
    blowup_w_max: float = Field(default=settings.BLOWUP_W_MAX, gt=0)
    blowup_psi_max: float = Field(default=settings.BLOWUP_PSI_MAX, gt=0)
    seed: int = Field(default=0, ge=0)
    monitors: MonitorConfig = MonitorConfig()

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _stride_within_horizon(self) -> "TrainConfig":
        if self.T > 0 and self.eval_every > self.T:
            raise ValueError(f"eval_every={self.eval_every} exceeds T={self.T}")
        return self

    def resolved_eta(self, m: int) -> float:
        """Explicit eta, else eta_scale / m."""
        return self.eta if self.eta is not None else self.eta_scale / m


class BlowUpRecord(BaseModel):
    iteration: int
    reason: str
    max_row_norm: float
    psi_value: float


class EvalRecord(BaseModel):
    t: int
    train_loss: float
    avg_train_loss: float = 0.0
    expected_loss: float
    avg_expected_loss: float = 0.0
    max_drift: float
    drift_envelope: float
    psi_g_gap: float | None = None
    psi_gap_envelope: float | None = None
    grad_gap: float | None = None


class TrainReport(BaseModel):
    model: ModelConfig
    training: TrainConfig
    eta: float
    n_train: int
    records: list[EvalRecord] = []
    blew_up: bool = False
    blowup: BlowUpRecord | None = None
    seeds: dict[str, int] = {}
    wall_clock_seconds: float = 0.0
    params: ModelParams | None = Field(default=None, exclude=True, repr=False)

    model_config = {"arbitrary_types_allowed": True, "protected_namespaces": ()}

    @property
    def final(self) -> EvalRecord | None:
        return self.records[-1] if self.records else None
