"""Physical constants (SI, CODATA via scipy)."""
from scipy import constants as _c

HBAR = _c.hbar
H = _c.h
KB = _c.k

# Largest temperature for which the one-phonon relaxation treatment is used
# without a warning.
T_VALID_MAX = 2.0
