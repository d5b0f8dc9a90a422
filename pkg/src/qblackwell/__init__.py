"""Toolkit for deciding the Blackwell order between quantum channels.

Decides whether one channel is a garbling (post-processing) of another by
SDP feasibility over Choi states, relates that verdict to minimum-error
state discrimination, and demonstrates the eavesdropper-detection
application built on the same machinery.
"""

from .numerics import (
    ValidationError,
    hermitian_eig,
    kron,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    trace_norm,
)
from .sdp import Constraint, PovmOptimum, SdpProblem, SdpSolution, povm_maximize, solve
from .channels import (
    DensityMatrix,
    QuantumChannel,
    amplitude_damping,
    apply,
    apply_to_subsystem,
    channel_from_choi,
    choi,
    compose,
    dephasing,
    depolarizing,
    identity,
    max_entangled,
    pure_state,
    random_channel,
    random_density_matrix,
    random_pure_state,
    replacer,
    unitary,
)
from .discrimination import (
    DiscriminationResult,
    Ensemble,
    Povm,
    discriminate_through_channel,
    helstrom_binary,
    min_error_discriminate,
    process_ensemble,
    success_probability,
)
from .blackwell import (
    ComparisonReport,
    GarbleResult,
    HermitianSet,
    TransformResult,
    WitnessResult,
    compare,
    find_witness,
    garble_check,
    garble_check_states,
    hermitian_set,
    hermitians_to_ensemble,
    payoff,
    payoff_max,
    payoff_max_choi,
)
from .eavesdrop import (
    DetectionReport,
    EveScenario,
    GapNotFoundError,
    detection_ensemble,
    effective_channel,
    mix_channels,
    simulate,
)

__version__ = "0.1.0"
