"""Circular membranes in Fabry-Perot cavities: drum modes, slab optics,
cavity finesse, and the fits that extract absorption and roughness."""

__version__ = "0.1.0"

from .constants import BOLTZMANN, SPEED_OF_LIGHT, SQUARE_ODD_MODE_MASS_RATIO
from .special_math import QuadratureError, bessel_j, bessel_root, integrate_radial
from .mechanics import (
    MembraneGeometry,
    ModeId,
    QualityFactor,
    RingdownTrace,
    SpectrumSeries,
    ThermalEnvironment,
    base_frequency,
    effective_mass_gaussian,
    effective_mass_point,
    mode_frequency,
    physical_mass,
    q_from_ringdown,
    synth_psd,
    thermal_peak_area,
)
from .optics import (
    CavityConfig,
    OpticalSlab,
    PeakSearchError,
    ResonanceSolverError,
    SlabCoefficients,
    cavity_transmission,
    finesse_from_mirror_R,
    finesse_from_ringdown,
    finesse_from_scan,
    free_spectral_range,
    mirror_R_from_finesse,
    resonance_frequencies_ideal,
    slab_coefficients,
)
from .fitting import (
    CIRCULAR_MEMBRANE,
    THIN_SQUARE_MEMBRANE,
    FinesseFitFixed,
    FinesseScanPoint,
    FitConfig,
    FitError,
    FitResult,
    finesse_curve,
    fit_exponential_decay,
    fit_f0_asymptote,
    fit_finesse_curve,
    least_squares,
)
