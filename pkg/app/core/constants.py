# Reproduction grid for the width/sample-size table and loss-curve figure
TABLE1_WIDTHS: list[int] = [100, 1000, 10000]
TABLE1_SAMPLE_SIZES: list[int] = [100, 1000, 10000]
TABLE1_ITERATIONS: int = 1_000_000
TABLE1_DIMENSION: int = 3
TABLE1_ALPHA: float = 0.0
TABLE1_BETA: float = 0.5

# Desk-scale band for the final average training loss of a table1 cell
TRAIN_LOSS_BAND: tuple[float, float] = (1e-5, 5e-3)
# Largest max/min ratio of final average training losses across N at one width
TRAIN_LOSS_ROW_SPREAD: float = 10.0

# Growth exponent allowed for the psi-g gap against iteration count (t^3 + t envelope)
PSI_GAP_MAX_EXPONENT: float = 3.3
# The same margin on the gap measured against its own t^3 + t envelope
PSI_GAP_RATIO_MAX_EXPONENT: float = PSI_GAP_MAX_EXPONENT - 3.0

# Decoupled sampling-rate window (k^-1/2 concentration) and the basis sizes it is fitted on
DECOUPLED_SLOPE_WINDOW: tuple[float, float] = (-0.6, -0.4)
DECOUPLED_BASIS_SIZES: list[int] = [2**k for k in range(6, 13)]
DECOUPLED_TRIALS: int = 200

# Smallest trial counts whose failure fractions resolve a delta-level bound
APPROX_MIN_TRIALS: int = 100
CONCENTRATION_MIN_TRIALS: int = 1000

# Rademacher N -> 4N ratio window
RADEMACHER_RATIO_WINDOW: tuple[float, float] = (1.4, 2.9)

# Output schema versions, written in a leading comment line of every CSV
CSV_SCHEMA_VERSION: str = "1"
JSON_SCHEMA_VERSION: str = "1"

LOSS_CURVE_COLUMNS: list[str] = [
    "iter",
    "train_loss",
    "avg_train_loss",
    "expected_loss",
    "avg_expected_loss",
    "max_drift",
]

# Standard label names for the independent random sources of a run
STREAM_INIT = "init"
STREAM_DATA = "data"
STREAM_SGD = "sgd"
STREAM_TEST = "test"
STREAM_SIGNS = "signs"
STREAM_PROBE = "probe"
STREAM_BASIS = "basis"
STREAM_ORACLE = "oracle"
