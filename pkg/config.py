import os

from dotenv import load_dotenv

load_dotenv()

TOOL_VERSION = "0.3.0"


def _positive_int(name: str, default: str) -> int:
    raw = os.getenv(name, default)
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be a positive integer, got {raw!r}. Please check your .env file.")
    if value < 1:
        raise ValueError(f"{name} must be a positive integer, got {raw!r}. Please check your .env file.")
    return value


THREADS = _positive_int("THICKSCAPE_THREADS", "1")
LOG_LEVEL = os.getenv("THICKSCAPE_LOG_LEVEL", "INFO").upper()

# Ray casting
RAY_SAMPLES = 512
RAY_RESIDUAL = 1e-12
TIE_TOLERANCE = 1e-12

# Finite differences
FD_STEP = 1e-4
HESS_STEP = 1e-3
JACOBIAN_STEP = 1e-5
NORMAL_FD_STEP = 1e-5
FD_WARN_DISCREPANCY = 1e-4

# Dynamics
TOL_GRAD = 1e-8
TOL_DISP = 1e-9
DESCENT_SLACK = 1e-10
MAX_STEPS = 10_000
CYCLE_DIST_TOL = 1e-7
BASIN_JITTER = 1e-9

# Thickness and audits
POSITIVITY_FLOOR = 1e-6
AUDIT_SAMPLES_2D = 1024
AUDIT_SAMPLES_3D = 2048
CONVEXITY_MIN_SAMPLES = 64
DET_FLOOR = 1e-10

# Critical points
GRID_2D = 1024
GRID_3D = 5000
MERGE_DISTANCE = 1e-6
FIXED_POINT_TOL = 1e-8
DEGENERACY_RATIO = 1e-6
NEWTON_MAX_ITER = 60
NEWTON_MAX_STEP = 0.2

# Linearization
NEUTRAL_BAND = 1e-6
ALIGNMENT_MAX_OFFDIAG = 0.1
RADIUS_LADDER = (1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4, 3.125e-4, 1.5625e-4, 1e-4)
SAMPLES_PER_RADIUS = 32
