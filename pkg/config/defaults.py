"""Numeric defaults shared by the integrator, series seeds and pipelines."""

from __future__ import annotations

DEFAULT_ATOL = 1e-10
DEFAULT_RTOL = 1e-10
EVENT_TOL = 1e-12
EVENT_RESIDUAL_TOL = 1e-10

CONVERGENCE_RADIUS = 1e-6
ESCAPE_RADIUS = 1e6
MAX_STEPS = 200_000
MAX_SPAN = 1e12
MAX_REL_CHANGE = 0.1
PROFILE_REL_CHANGE = 5e-3

DEFAULT_TERMS = 12
SEED_FACTOR = 1e3
SEED_VALIDITY_FRACTION = 0.5
BOUNDARY_FLOOR = 1e-9
PHI_POSITIVE_FRACTION = 1e-6
CHART_SWITCH_Z = 1e-4

RESIDUAL_LIMIT = 1e-6
REGION_REL_TOL = 1e-7
FIT_MARGIN = 0.05
MIN_TAIL_SAMPLES = 10
TAIL_EXTENSION_FACTOR = 100.0

STEADY_GRID = (10, 10)
STEADY_Z_RANGE = (1e-2, 1e2)
STEADY_W_RANGE = (-5.0, 5.0)
STEADY_S_EXCLUSION = 1e-6
STEADY_MAX_STEPS = 2_000

ROTATIONAL_OFFSET = 1e-3
ROTATIONAL_SWITCH_X = 0.5
ROTATIONAL_ESCAPE_RADIUS = 1e3
POLE_CLOSURE_TOL = 1e-4

UNIQUENESS_OFFSET = 1e-6

PORTRAIT_WINDOW = (0.0, 10.0, -5.0, 5.0)
PORTRAIT_GRID = (6, 6)
PORTRAIT_SPAN = 20.0
CURVE_SAMPLES = 200
