"""Single-photon polarization / orbital-angular-momentum transferrer simulator."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DimensionError,
    EmptySubspaceError,
    MalformedInterferometerError,
    NormalizationError,
    OamTransferError,
    ParseError,
    PreconditionError,
    TruncationError,
)
from .hilbert import (
    OAM2,
    OAM4,
    OAM_STATES,
    POL_STATES,
    POLARIZATION,
    DensityMatrix2,
    LogicalSubspace,
    PhotonState,
    fidelity,
    make_source_state,
    overlap,
    reduce_to_qubit,
)
from .elements import (
    Element,
    compose,
    dove_prism,
    hologram_analyze,
    hologram_generate,
    hwp,
    mirror,
    pbs_filter,
    pbs_split,
    phase,
    polarizer,
    qplate,
    qwp,
    smf,
)
from .circuit import (
    Circuit,
    CountRecord,
    InterferometerBlock,
    RunResult,
    deterministic_transferrer,
    run_exact,
    run_shots,
)
from .tomography import (
    ProjectorSet,
    bootstrap_fidelity,
    reconstruct_linear,
    reconstruct_mle,
)
from .experiments import (
    FidelityRow,
    FidelityTable,
    NoiseConfig,
    SetupId,
    build_setup,
    oam_sign_detector_efficiency,
    run_table,
)
from .circuitio import (
    emit_results,
    load_circuit,
    load_results,
    parse_circuit,
    unparse_circuit,
)
