"""Spectral singularities and Bragg scattering in complex (PT-symmetric) crystals."""
from .bloch import BandSolution, BlochMatrix, band_solve, band_structure, build_hq
from .kernels import BACKEND
from .ladder import DiffractionTrace, detect_secular, evolve_orders, reduce_wavenumber
from .packet import (
    PeakTrace,
    SpectrumProfile,
    WaveField,
    asymptotic_psi1,
    born_psi1,
    init_gaussian,
    order_filter,
    peak_amplitude,
    propagate,
)
from .potential import (
    PotentialFamily,
    effective_coeffs,
    is_pt_symmetric,
    make_pt_lattice,
    sample,
)
from .singularity import (
    SingularityReport,
    classify_point,
    find_lambda_c,
    projected_resolvent,
    singular_energies,
)

__version__ = "0.1.0"
