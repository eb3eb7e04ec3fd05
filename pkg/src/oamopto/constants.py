"""Physical constants in SI units (CODATA values via scipy)."""

from scipy import constants as _c

HBAR = _c.hbar
C_LIGHT = _c.c
K_B = _c.k
EPS0 = _c.epsilon_0
MU0 = _c.mu_0
