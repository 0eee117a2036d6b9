"""Shared constants for trihlab."""

DEFAULT_DEGREE = 5
"""Default spline degree; quintics keep sixth-order problems accurate on coarse meshes."""

MIN_DEGREE = 3
"""Smallest degree giving C² splines, hence square-integrable third derivatives."""

MAX_JET_ORDER = 3
"""Highest derivative order carried by map jets and reference basis tables."""

POSITIVITY_SAMPLES = 10_000
POSITIVITY_MARGIN = 1e-9

MIN_ELEMENTS_PER_PERIOD = 4
"""Oscillating-domain meshes must resolve each period of the boundary profile."""

CELL_ELEMENTS_PER_FREQUENCY = 8
"""Cell meshes need this many lateral elements per period for each profile frequency."""

DEFAULT_EPSILONS = (0.25, 0.125, 0.0625)
CRITICAL_ALPHA = 2.5
