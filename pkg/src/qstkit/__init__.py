"""Quantum state tomography: designs, least-squares and kernel estimators, MUBs."""
from .design import (
    Design,
    SuperOp,
    check_complete,
    check_unitary_design,
    design_adjoint,
    design_alpha,
    design_apply,
    gram_superop,
    haar_random_design,
    haar_unitary,
    local_pauli_design,
    pauli_tensor_design,
    qubit_bloch_design,
    rebit_design,
    uniform_angles,
)
from .errors import NumericalError, QstError, ValidationError
from .estimators import (
    clt_covariance,
    concentration_bound,
    lse_fit,
    lse_linear_map,
    lse_loss,
    lse_mse_theory,
    quark_covariance,
    quark_fit,
    quark_loss,
    quark_mse_theory,
    quark_operators,
)
from .hermitian import Field, HermitianSpace, SpectralDecomp, orthonormal_basis, schatten_norm, spectral, trace_center
from .kernels import (
    GaussianKernel,
    PolynomialKernel,
    ZeroOneKernel,
    brute_qmd_pure_search,
    make_kernel,
    qce_discrepancy,
    qmd_bitflip,
    qmd_modular,
    qmd_pauli,
    qmd_two_noisy,
)
from .measurement import CountsTable, Povm, born_probs, bitflip_povm, modular_noise_povm, sample_counts
from .mub import MubDesign, build_mub, fwht, gf_field, gf_mul, mub_reconstruct
from .projection import project_to_density, spta

__version__ = "0.1.0"
