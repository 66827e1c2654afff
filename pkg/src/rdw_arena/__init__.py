"""Multi-user redirected-walking simulation and reset-controller benchmark."""

from .env import (
    DEFAULT_CONSTANTS,
    PhysicalSpace,
    ScenarioConfig,
    SimConstants,
    VirtualSpace,
    build_preset,
    load_scenario,
    normalize_pose,
    save_scenario,
    spawn_users,
)
from .geometry import Disc, Point2, Polygon, VisibilityFan, cone_area, ray_distance, visibility_fan
from .harness import (
    EpisodeMetrics,
    ExperimentConfig,
    ResultTable,
    experiment_cells,
    export_results,
    import_results,
    mann_whitney_u,
    run_episode,
    run_experiment,
    simulate_trials,
)
from .locomotion import GainSet, SimClock, UserState, apply_reset, next_waypoint, step_user
from .marl import (
    PolicyParams,
    TrainerConfig,
    build_state,
    compute_advantages,
    load_policy,
    save_policy,
    train,
    train_single_agent,
)
from .reset import ResetEvent, ResetKind, admissible_range, detect_reset
from .reward import RewardBreakdown, RewardWeights, area_reward, total_reward
from .steering import apf_force, apf_gains, ns_gains, s2c_gains

__version__ = "0.1.0"
