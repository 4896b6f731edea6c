"""Coded storage elastic computing toolkit.

MDS-coded distributed matrix-vector multiplication on a deterministic
simulated cluster with heterogeneous machine speeds, elastic availability
and tunable straggler tolerance.
"""

from csec.coding import (
    CodedStore,
    CodingError,
    GeneratorMatrix,
    build_generator,
    decode_rows,
    encode_store,
    is_mds,
)
from csec.loadopt import (
    InfeasibleStragglerTolerance,
    LoadSolution,
    homogeneous_optimal_time,
    min_time_oracle,
    optimal_load_vector,
)
from csec.assignment import (
    Assignment,
    cyclic_assignment,
    fill_assignment,
    loads_to_row_counts,
    machine_rows,
)
from csec.cluster import (
    MachineProfile,
    SimulatedCluster,
    StepTiming,
    StragglerPolicy,
    sample_available_set,
    select_responders,
    simulate_step_timing,
)
from csec.runtime import (
    CodedRuntime,
    MasterState,
    StepFailure,
    StepTrace,
    collect_and_decode,
    execute_step,
    update_speed_estimate,
)

__all__ = [
    "Assignment",
    "CodedRuntime",
    "CodedStore",
    "CodingError",
    "GeneratorMatrix",
    "InfeasibleStragglerTolerance",
    "LoadSolution",
    "MachineProfile",
    "MasterState",
    "SimulatedCluster",
    "StepFailure",
    "StepTiming",
    "StepTrace",
    "StragglerPolicy",
    "build_generator",
    "collect_and_decode",
    "cyclic_assignment",
    "decode_rows",
    "encode_store",
    "execute_step",
    "fill_assignment",
    "homogeneous_optimal_time",
    "is_mds",
    "loads_to_row_counts",
    "machine_rows",
    "min_time_oracle",
    "optimal_load_vector",
    "sample_available_set",
    "select_responders",
    "simulate_step_timing",
    "update_speed_estimate",
]

__version__ = "0.1.0"
