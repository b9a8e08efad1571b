"""Tensor-network engine for non-Markovian open quantum systems.

Builds process tensors in matrix-product-operator form (PT-MPO) for
Gaussian bosonic environments and applies them to compute reduced
dynamics, multi-time correlations, control gradients, mean-field
ensembles, and open chains.
"""

from ptmpo.tensor import SvdTruncation, contract, svd_truncate
from ptmpo.bath import (
    Bath,
    CustomSD,
    EtaCoefficients,
    PowerLawSD,
    correlation_function,
    degeneracy_map,
    eta_coefficients,
    influence_tensor,
    reorganization_energy,
)
from ptmpo.system import (
    MeanFieldSystem,
    ParameterizedSystem,
    FieldSystem,
    System,
    SystemChain,
    half_propagators,
    liouvillian,
    xy_chain,
)
from ptmpo.process_tensor import (
    ProcessTensor,
    bond_profile,
    pt_combine,
    pt_read,
    pt_write,
    trivial_pt,
)
from ptmpo.engines import TempoParameters, pt_tempo_compute, tempo_compute
from ptmpo.application import (
    ControlSequence,
    Dynamics,
    compute_correlations_nt,
    compute_dynamics,
)
from ptmpo.gradient import (
    GradientResult,
    LinearObjective,
    GeneralObjective,
    chain_rule,
    forward_backward,
    optimize_controls,
    state_gradient,
)
from ptmpo.meanfield import compute_meanfield_dynamics
from ptmpo.chain import PtTebdParameters, compute_chain_dynamics

__version__ = "0.1.0"
