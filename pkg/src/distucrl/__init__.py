"""Communication-efficient parallel UCRL: dist-UCRL, a round-robin UCRL2 baseline, and benchmarks."""

from .agent import AgentState, agent_step, apply_sync, should_request_sync
from .baselines import ServerTime, mod_ucrl2_run, ucrl2_run
from .confidence import (
    PlausibleSet,
    VisitationCounts,
    aggregate,
    build_plausible_set,
    reward_radius,
    transition_radius,
)
from .coordinator import Coordinator, SyncLedger, epoch_bound, synchronize
from .environments import EnvSpec, make_env, make_gridworld_4room, make_riverswim
from .errors import ContractViolation, DivergedError, InvariantViolation
from .evi import EviResult, extended_value_iteration, inner_max
from .mdp_core import GainBias, MdpModel, Policy, diameter, optimal_gain, step
from .simulation import run_dist_ucrl
from .trace import ExperimentTrace, regret_series, verify_trace

__version__ = "0.1.0"
