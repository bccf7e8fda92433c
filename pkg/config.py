import os

from dotenv import load_dotenv

BASE_DIR = os.path.dirname(os.path.abspath(__file__))

load_dotenv(os.path.join(BASE_DIR, ".env"))

# Paths
LOGS_DIR = os.environ.get("NLLT_LOGS_DIR", os.path.join(BASE_DIR, "logs"))
SETTINGS_PATH = os.path.join(BASE_DIR, "config.json")
RESULTS_DIR = os.environ.get("NLLT_RESULTS_DIR", os.path.join(BASE_DIR, "results"))

# Logging
LOG_LEVEL = os.environ.get("NLLT_LOG_LEVEL", "INFO")

# Chain validation
ROW_SUM_TOL = 1e-9
ZERO_MASS_TOL = 1e-12
STATIONARY_TOL = 1e-10
POWER_ITERATION_TOL = 1e-13
MAX_POWER_ITERATIONS = 10**6
EXACT_STATIONARY_MAX_STATES = 16

# Caps
MAX_ENUM = int(os.environ.get("NLLT_MAX_ENUM", 2**24))
PRODUCT_STATE_CAP = int(os.environ.get("NLLT_PRODUCT_CAP", 10**6))
# product states above this are never materialised as a dense transition matrix
DENSE_SOLVE_CAP = int(os.environ.get("NLLT_DENSE_CAP", 4096))
EXACT_TABLE_CAP = 10**5
SIM_STEP_BUDGET = 5e10  # chain steps per Monte Carlo request

# Mixing
DEFAULT_K_MAX = 20
PSI_FIT_RANGE = 30

# Observables and lattice classification
CENTERING_TOL = 1e-10
F_ELL_ZERO_TOL = 1e-10
HEURISTIC_LATTICE_TOL = 1e-9
HEURISTIC_MAX_DENOMINATOR = 1000

# Variance
POISSON_RESIDUAL_TOL = 1e-11
ITERATIVE_SOLVE_TOL = 1e-12
ITERATIVE_RESIDUAL_TOL = 1e-9
GMRES_RESTART = 30
GMRES_MAXITER = 400
S_ELL_CLAMP_TOL = 1e-10
SERIES_TERMS = 200

# Simulation
SAMPLE_BLOCK_SIZE = 1024
DEFAULT_WORKERS = int(os.environ.get("NLLT_WORKERS", 0))  # 0 -> physical cores
LATTICE_BIN_TOL = 1e-6
NON_LATTICE_U_POINTS = 41
TRIANGLE_HALF_WIDTH = 0.5

# Fourier scans
SMALL_THETA_MAX = 0.1
LARGE_THETA_MARGIN = 0.2
NON_LATTICE_THETA_MAX = 5.0
NOISE_FLOOR_FACTOR = 3.0
BLOCK_LENGTH_CAP = 64
