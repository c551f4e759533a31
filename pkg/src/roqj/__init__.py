"""Quantum-jump unravelings of time-local master equations via rate
operators and representation shifts."""

from .errors import RoqjError
from .linalg import normalize, projector
from .generator import (
    Channel,
    GeneratorRepresentation,
    ShiftOperator,
    apply_dissipator,
    effective_hamiltonian,
    gamma_operator,
    generator_apply,
    generator_dual_apply,
    shift_representation,
)
from .models import (
    ModelSpec,
    enm_analytic_solution,
    enm_model,
    gaussian_driving,
    integrate_master_equation,
    load_model_spec,
    load_preset,
    make_driving,
    make_rate,
    pauli_rates,
    resolve_model,
)
from .rate_ops import (
    JumpChannel,
    RateOperator,
    fixed_postjump_shift,
    haar_average_K,
    jump_channels,
    mcwf_channels,
    positive_dissipator_representation,
    rate_operator_R,
    rate_operator_W,
    total_jump_rate,
    y_bound,
)
from .divisibility import (
    DivisibilityReport,
    check_cp_divisibility,
    check_dissipativity,
    check_p_divisibility,
    qubit_choi_decompose,
)
from .trajectory import (
    Ensemble,
    JumpRecord,
    Trajectory,
    UnravelingSpec,
    bloch_vector,
    effective_ensemble_size,
    ensemble_mean_state,
    evolve_trajectory,
    jump_phase_statistics,
    named_unraveling,
    phase_angle,
    run_ensemble,
    states_at,
    write_ensemble_csv,
    write_trajectories_jsonl,
)

__version__ = "0.1.0"
