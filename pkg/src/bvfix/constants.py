"""Numerical tolerances and defaults shared across the package."""

#: absolute tolerance for distance-zero / identity decisions
EPS_EQ = 1e-12
#: relative slack allowed on inequality checks
EPS_CHECK = 1e-9

DEFAULT_BUDGET = 10_000_000
ORACLE_BUDGET = 100_000_000

DEFAULT_TOL_STEP = 1e-10
DEFAULT_MAX_ITER = 10_000
DEFAULT_CYCLE_WINDOW = 64
DEFAULT_TOL_UNIQUE = 1e-6
DEFAULT_TOL_FIXED = 1e-8
DEFAULT_P_WINDOW = (1, 2, 3)

DEFAULT_GRID_POINTS = 1001
MODULUS_GRID_POINTS = 64
