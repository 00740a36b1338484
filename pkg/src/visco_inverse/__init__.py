"""Spectral simulation and single-measurement source recovery for damped
wave systems whose restoring force carries a convolution memory.

The package instantiates a one-dimensional string operator with endpoint
slope observation, integrates the modal memory equations, analyses the
resulting boundary-trace families as frames, and inverts a modulated source
from one measured trace via biorthogonal reconstruction kernels.
"""

from .errors import NumericsError, SingularGramError
from .forward import (
    InitialData,
    SourceCoefficients,
    boundary_trace_homogeneous,
    boundary_trace_source,
    verify_convolution_relation,
)
from .frames import (
    DualFamily,
    FrameBounds,
    GramMatrix,
    ModalFamily,
    bessel_defect,
    bessel_ratio,
    biorthogonality_defect,
    coefficients_via_duals,
    dual_family,
    frame_bounds,
    gram,
    leading_frame_bounds,
    w_trace_family,
    y_trace_family,
    z_trace_family,
)
from .inverse import (
    CounterexampleTable,
    ReconstructionKernels,
    ReconstructionReport,
    build_reconstruction,
    build_thetas,
    l2_only_counterexample,
    noisy_reconstruction,
    reconstruct,
    reconstruct_complex,
    stability_ratios,
    stability_scan,
)
from .modal import (
    ModalTrajectory,
    comparison_defect,
    comparison_defect_scan,
    comparison_exponential,
    solve_w,
    solve_w_many,
    solve_z,
    solve_z_many,
)
from .spectral import (
    Mode,
    OperatorSpec,
    SpectralModel,
    build_spectral_model,
    eigenfunction,
    hilbert_norms,
)
from .volterra import (
    AffineModulation,
    ConstantModulation,
    ExponentialKernel,
    ExponentialModulation,
    MemoryKernel,
    PolynomialKernel,
    SampledKernel,
    SampledModulation,
    ScalarSignal,
    SourceModulation,
    TimeGrid,
    TraceSignal,
    ZeroKernel,
    convolve,
    convolve_adjoint,
    differentiate,
    h1_norm,
    l2_inner,
    l2_norm,
    resolvent_kernel,
)

__version__ = "0.1.0"
