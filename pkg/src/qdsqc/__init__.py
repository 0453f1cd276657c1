"""Seeded simulator for an entanglement-based quasi-deterministic secure
quantum communication protocol: exact two-qubit statevector oracle,
Monte Carlo session engine, intercept-resend channel models, and the
closed-form security and efficiency analysis around them.
"""

from .statevector import (
    D,
    R,
    AngleOutOfRange,
    Basis,
    DegenerateProjection,
    MeasurementResult,
    NotNormalized,
    TwoQubitState,
    amplitudes_for_concurrence,
    anticorrelated_mass,
    concurrence,
    joint_distribution,
    measure,
    prepare_from_angle,
    prepare_state,
    project,
    state_for_concurrence,
)
from .adversary import (
    IDEAL,
    AdversaryKind,
    AdversaryModel,
    EveStrategy,
    attack_error_oracle,
    intercept_resend,
    sample_error_rate,
    transmit,
)
from .protocol import (
    CaseMode,
    EmptyCheckSet,
    PadShortfall,
    PerBasisPrep,
    RoundRecord,
    SessionConfig,
    SessionOutcome,
    SessionStatus,
    Transcript,
    UniformPrep,
    assemble,
    classical_ledger,
    default_abort_threshold,
    derive_seed,
    error_check,
    flip_correction,
    make_pad,
    random_message,
    recover_pad,
    run_session,
    sift,
    transcript_to_dict,
)
from .analysis import (
    CaseReport,
    LedgerModeMismatch,
    SweepRow,
    eta_measured,
    eta_theory,
    pd_theory,
    run_case_i,
    run_case_ii,
    sweep,
    sweep_to_csv,
)

__version__ = "0.1.0"
