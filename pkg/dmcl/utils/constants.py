# License: BSD 3 clause
"""Constants that are used across DMCL."""

# default physical parameter set
REFERENCE_CHANNEL = {
    "D": 150.0,  # um^2/s
    "dx": 0.05,  # um
    "dt": 8.25e-6,  # s
    "n_free": 100,
    "k_on": 6e8,  # 1/(M s)
    "k_off": 3.0,  # 1/s
    "c_p": 1e-6,  # M
}

# settling time = SETTLING_FACTOR * tau
SETTLING_FACTOR = 5.0

# tolerances
STOCHASTIC_ATOL = 1e-12
DISTRIBUTION_ATOL = 1e-12
STATIONARY_RESIDUAL = 1e-10
MAX_DRIFT = 1e-9
MAX_POWER_STEPS = 10**7
DENSE_EIG_MAX_STATES = 2000
EPS_TAP = 1e-6
RHO_FLOOR = 1e-10
ENVELOPE_SLACK = 0.1
CALIBRATION_TOL = 0.01
CALIBRATION_BRACKET = 100.0

VALID_BACKENDS = ["aggregate", "per_molecule"]
VALID_DETECTORS = ["threshold", "dfe"]
VALID_TASKS = [
    "characterize",
    "cir",
    "taps",
    "noise-stats",
    "simulate",
    "ber-sweep",
    "calibrate-koff",
]
VALID_TRACE_FORMATS = ["csv", "binary"]
VALID_RX_FACES = ["left", "right", "bottom", "top", "front", "back"]

TRACE_MAGIC = b"DMCT1"

# process exit codes of the command-line tool
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_BUDGET_ERROR = 3
EXIT_NUMERICAL_ERROR = 4
