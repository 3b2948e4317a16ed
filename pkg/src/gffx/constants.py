"""Normalisation constants shared across the package."""

import math

#: Growth rate of the Green function, ``G_N(x, x) = g log N + O(1)``.
G = 2.0 / math.pi

#: Decay rate of the Gumbel intensity, ``2 / sqrt(g) = sqrt(2 pi)``.
ALPHA = 2.0 / math.sqrt(G)

#: Leading coefficient of the centering sequence, ``2 sqrt(g)``.
TWO_SQRT_G = 2.0 * math.sqrt(G)
