from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "pinn-sgd"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "results"
    MAX_WORKERS: int = 1
    RECORD_TIMINGS: bool = False

    # Finite-difference oracles
    FD_LAPLACIAN_STEP: float = 1e-4
    FD_GRADIENT_STEP: float = 1e-6
    KINK_MARGIN_FACTOR: float = 10.0

    # Training
    ETA_SCALE: float = 1.0
    EVAL_EVERY: int = 1000
    N_TEST: int = 100_000
    BLOWUP_W_MAX: float = 10.0
    BLOWUP_PSI_MAX: float = 1e3
    EVAL_CHUNK_ELEMENTS: int = 2_000_000

    # Represented targets
    ORACLE_DRAWS: int = 10_000_000
    ORACLE_CHUNK: int = 50_000

    # Monitors / Rademacher ascent
    PROBE_SIZE: int = 256
    RADEMACHER_RESTARTS: int = 8
    RADEMACHER_STEPS: int = 200
    RADEMACHER_STEP_SIZE: float = 0.25

    # Desk-scale reductions (--scale)
    SCALE_WIDTH_CAP: int = 1000
    SCALE_N_TEST_FLOOR: int = 10_000

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "env_prefix": "PINN_",
    }


settings = Settings()
