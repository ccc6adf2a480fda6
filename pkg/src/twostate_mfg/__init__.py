"""Two-state mean-field game toolkit.

Computes every MFG equilibrium of the anti-imitation two-state game,
builds the entropy solution of the associated master-equation conservation
law, solves the (N+1)-player HJB system, and simulates the game exactly to
exhibit which equilibrium Nash play selects.
"""

__version__ = "0.1.0"

from .model import ETA_CRITICAL, ModelParams, Regime, RegimeKind, regime
from .quadrature import (
    escape_time,
    lag,
    quarter_period,
    zero_hit_time,
)
from .characteristics import (
    BlowUpError,
    CharacteristicPath,
    QuadPath,
    eval_state,
    eval_x,
    first_zero_of_x,
    integrate_path,
    shooting_terminal,
)
from .mfg import (
    EnumerationReport,
    MFGSolution,
    count_at_half,
    enumerate_equilibria,
    recover_trajectories,
    scan_count,
    solve_stopped,
)
from .entropy import (
    EntropyField,
    ShockDiagnostics,
    build_field,
    detect_shock_onset,
    eval_entropy_Y,
    invert_velocity,
    pde_residual_audit,
    shock_diagnostics,
    shock_onset_time,
)
from .hjb import (
    InstabilityError,
    MajorityReport,
    PolicyGrid,
    ValueGrid,
    compare_to_master,
    extract_policy,
    solve_hjb,
    verify_majority,
)
from .sim import (
    ConstantPolicy,
    EntropyPolicy,
    NashPolicy,
    SimConfig,
    SimResult,
    majority_gap_monotone,
    selection_stats,
    simulate,
)
