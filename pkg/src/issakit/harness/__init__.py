"""Episode runner, reference oracles and trace-level verification."""
from issakit.harness.bench import Phase1Summary, bench_phase1, sample_unsafe_cases
from issakit.harness.episode import Env, EpisodeInfeasible, SafeguardStack, run_episode, substreams
from issakit.harness.oracles import SafeSetScan, brute_force_project, control_grid, safe_control_fraction
from issakit.harness.policies import nominal_constant_forward, nominal_goal_seek
from issakit.harness.trace import (
    COLUMNS,
    EpisodeTrace,
    SchemaError,
    StepRecord,
    read_trace_csv,
    sidecar_path,
    write_sidecar,
    write_trace_csv,
)
from issakit.harness.verify import (
    VerificationReport,
    check_finite_time_convergence,
    check_forward_invariance,
    convergence_bound,
)

__all__ = [
    "COLUMNS", "Env", "EpisodeInfeasible", "EpisodeTrace", "Phase1Summary", "SafeSetScan", "SafeguardStack",
    "SchemaError", "StepRecord", "VerificationReport", "bench_phase1", "brute_force_project",
    "check_finite_time_convergence", "check_forward_invariance", "control_grid", "convergence_bound",
    "nominal_constant_forward", "nominal_goal_seek", "read_trace_csv", "run_episode", "safe_control_fraction",
    "sample_unsafe_cases", "sidecar_path", "substreams", "write_sidecar", "write_trace_csv",
]
