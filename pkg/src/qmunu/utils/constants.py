"""Constants used throughout qmunu."""

# Extra factors kept after the infinite product cutoff
QPOCH_GUARD_FACTORS = 8

# Default tolerance for truncated infinite products and series
DEFAULT_TOL = 1e-14

# Infinite-support sampler: stop when cumulative mass reaches 1 - SAMPLER_MASS_DEFECT or j hits the cap
SAMPLER_MASS_DEFECT = 1e-12
SAMPLER_MAX_SUPPORT = 100_000

# State space cap for exact enumeration
DEFAULT_STATE_CAP = 2_000_000

# Largest word length for the quadratic-algebra identity check
MAX_BINEXP_DEGREE = 12

# Contour quadrature
DEFAULT_CONTOUR_NODES = 256
MIN_CONTOUR_NODES = 32
MAX_NODE_DOUBLINGS = 6

# Fredholm Nystrom discretisation
DEFAULT_NYSTROM_NODES = 64
MAX_NYSTROM_NODES = 512
MIN_MB_RADIUS = 1e-3

# Pole guard distance for g(w)
POLE_GUARD = 1e-9

# Support truncation for distribution inversion
INVERSION_TAIL = 1e-12

# Exit codes
EXIT_PASS = 0
EXIT_TOLERANCE_FAILURE = 1
EXIT_USAGE_ERROR = 2
EXIT_INTERRUPTED = 130
