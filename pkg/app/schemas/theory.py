from pydantic import BaseModel, Field

from app.config import settings


class ThresholdInputs(BaseModel):
    epsilon: float = Field(gt=0.0, le=1.0)
    delta: float = Field(gt=0.0, lt=1.0)
    f_norm: float = Field(ge=0.0)
    alpha: float = Field(default=0.0, ge=0.0)
    beta: float = Field(default=0.5, ge=0.0)
    d: int = Field(default=3, ge=1)


class AdmissibleInterval(BaseModel):
    lower: float
    upper: float

    @property
    def is_empty(self) -> bool:
        return not self.upper > self.lower


class GapRecord(BaseModel):
    iteration: int = 0
    drift: float = Field(ge=0.0)
    psi_g_gap: float = Field(ge=0.0)
    grad_gap: float = Field(ge=0.0)


class AscentConfig(BaseModel):
    restarts: int = Field(default=settings.RADEMACHER_RESTARTS, ge=0)
    steps: int = Field(default=settings.RADEMACHER_STEPS, ge=0)
    step_size: float = Field(default=settings.RADEMACHER_STEP_SIZE, gt=0.0)


class RademacherResult(BaseModel):
    estimate: float
    standard_error: float
    n_points: int
    n_sign_draws: int
    tau_prime: float
    bound_form: float          # m^-alpha * tau' / sqrt(N)
    kappa: float | None = None  # estimate / bound_form


class ApproxCell(BaseModel):
    d: int
    m: int
    trials: int
    delta: float
    bound: float
    failures: int
    failure_fraction: float
    mean_error: float
    max_error: float


class DecoupledRate(BaseModel):
    d: int
    reference_m: int
    basis_sizes: list[int]
    rms_errors: list[float]
    slope: float


class ApproxExperimentResult(BaseModel):
    cells: list[ApproxCell] = []
    decoupled: list[DecoupledRate] = []


class ConcentrationResult(BaseModel):
    bound_c: float
    k: int
    m: int
    delta: float
    trials: int
    point_mass_weight: float
    failures: int
    failure_fraction: float
    bound: float
    error_quantiles: dict[str, float] = {}


class CertificateRecord(BaseModel):
    m: int
    d: int
    f_norm_upper: float
    w_two_inf: float
    w_two_inf_bound: float       # |f|_F / m
    w_frobenius: float
    w_frobenius_bound: float     # |f|_F / sqrt(m)
    gb_l2_error: float
    g_l2_error: float
    approximation_bound: float
    bias_gap: float
    bias_gap_bound: float        # C_d' m^(1 - alpha - 3 beta)


class CheckResult(BaseModel):
    name: str
    passed: bool
    statistic: float | None = None
    bound: float | None = None
    detail: str = ""


class VerifyReport(BaseModel):
    checks: list[CheckResult] = []

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
