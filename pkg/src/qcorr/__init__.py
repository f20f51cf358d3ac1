"""Witness bounds for local, global and exchange-symmetry quantum correlations of qudits."""

__version__ = "0.1.0"

from .coherence import (
    BoundsReport,
    ClassicalMixture,
    Witness,
    classical_fidelity,
    classify,
    gamma,
    incoherent_bound,
    make_witness,
)
from .hilbert import (
    HermitianOperator,
    LowRankOperator,
    Permutation,
    SpaceSpec,
    StateVector,
    SymmetryClass,
    apply_permutation,
    expectation,
    project_symmetrize,
    subspace_dimension,
    symmetrizer,
    tensor_product,
)
from .separability import (
    PartitionSpec,
    SchmidtSpectrum,
    SolverOptions,
    partial_and_full_bounds,
    schmidt,
    separability_eigen_solve,
    slater,
    takagi,
)
from .states import (
    DensityMatrix,
    TMSVParams,
    chi_expectation_analytic,
    chi_vector,
    dephased_tmsv,
    example_state,
    superposition_s,
    tmsv,
)
