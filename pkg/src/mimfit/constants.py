"""Physical constants (exact SI values) and reference numbers."""

BOLTZMANN = 1.380649e-23      # J/K
SPEED_OF_LIGHT = 299792458.0  # m/s

# Effective mass of the odd modes of a square membrane, as a fraction of its
# physical mass, for a readout at the antinode. Kept for comparison only.
SQUARE_ODD_MODE_MASS_RATIO = 0.25
