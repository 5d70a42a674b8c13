"""Differential phase contrast simulation and reconstruction."""

from .fields import (
    Shape,
    apply_phase_transfer,
    apply_phase_transfer_adjoint,
    apply_transfer,
    fft2,
    grad,
    grad_adjoint,
    ifft2,
    point_reflect,
    spectral_symbols,
)
from .metrics import MetricReport, adaptive_alpha, rpsnr
from .optics import (
    OpticalConfig,
    SourceSpec,
    TransferFunctionSet,
    build_transfer_functions,
    compute_ptf,
    make_frequency_grid,
    make_pupil,
    make_source,
    make_source_pair,
)
from .phantoms import make_phantom, smooth_phantom
from .qpfio import import_png, read_qpf, write_qpf
from .simulate import (
    DegradationSpec,
    DpcStack,
    degrade,
    dpc_from_intensity_pair,
    make_background,
    simulate_ideal,
)
from .solvers import (
    ReconstructionResult,
    SolverConfig,
    SolverDivergence,
    shrink_aniso,
    shrink_iso,
    solve,
)

__version__ = "0.1.0"
