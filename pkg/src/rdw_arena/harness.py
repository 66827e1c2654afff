"""Episode engine, experiment grids, statistics, and result export.

run_episode steps a scenario at the fixed frame rate, intercepting
imminent collisions through the reset module and crediting the composite
reward when each reset's walked distance is realized. run_experiment fans
trials out over worker processes (RDW_ARENA_THREADS caps the pool) and
aggregates mean/SD plus Mann-Whitney comparisons for designated
controller pairs.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .env import (
    DEFAULT_CONSTANTS,
    ScenarioConfig,
    VirtualSpace,
    build_preset,
    spawn_users,
)
from .geometry import wrap_angle
from .locomotion import (
    G_R_RANGE,
    G_T_RANGE,
    MIN_CURVATURE_RADIUS,
    SimClock,
    apply_reset,
    next_waypoint,
    step_user,
)
from .reset import (
    USER,
    ResetEvent,
    ResetKind,
    greedy_mrc_direction,
    in_admissible_range,
    nearest_closing_user,
    policy_mrc_direction,
    proximity_measure,
    r2c_direction,
    r2g_direction,
)
from .reward import DEFAULT_WEIGHTS, RewardBreakdown, RewardWeights, area_reward
from .steering import NS_GAINS, apf_force, apf_gains, s2c_gains

log = logging.getLogger(__name__)

THREADS_ENV_VAR = "RDW_ARENA_THREADS"

CSV_COLUMNS = (
    "space",
    "preset",
    "n_users",
    "steering",
    "reset_ctrl",
    "trials",
    "mean_resets",
    "sd_resets",
    "mean_mdbr",
    "sd_mdbr",
)

TRIAL_CSV_COLUMNS = ("trial", "user_index", "resets", "virtual_distance", "mdbr")

EVENT_CSV_COLUMNS = (
    "frame",
    "user",
    "kind",
    "base_angle",
    "theta_a",
    "r_reset",
    "r_dist",
    "r_area",
)


class SimulationFault(RuntimeError):
    """Unrecoverable state during an episode (reported with a frame dump)."""


@dataclass
class EpisodeMetrics:
    reset_counts: list[int]
    virtual_distances: list[float]
    mdbr_per_user: list[float]
    frames: int
    events: list[ResetEvent]
    episode_return: float
    transitions: list | None = None

    @property
    def total_resets(self) -> int:
        return sum(self.reset_counts)

    @property
    def mdbr_mean(self) -> float:
        return sum(self.mdbr_per_user) / len(self.mdbr_per_user)


@dataclass
class Decision:
    """One reset decision, in episode order (the training time axis)."""

    frame: int
    user_index: int
    state: np.ndarray
    obs: np.ndarray
    action: float
    breakdown: RewardBreakdown
    done: bool = False


def _fault(frame, i, user, msg):
    raise SimulationFault(
        f"{msg} (frame={frame}, user={i}, phys={tuple(user.phys_pos)}, "
        f"virt={tuple(user.virt_pos)}, heading={user.phys_heading})"
    )


def run_episode(
    scenario: ScenarioConfig,
    policy=None,
    seed=None,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    collect_transitions: bool = False,
    trajectory_path=None,
) -> EpisodeMetrics:
    """Simulate one episode; deterministic given (scenario, seed).

    Each user follows its own random virtual path until the waypoint
    budget is exhausted. A policy object is required exactly when the
    scenario's reset mode is MRC_POLICY.
    """
    if (scenario.reset == "MRC_POLICY") != (policy is not None):
        raise ValueError("a policy is required iff reset mode is MRC_POLICY")
    cst = scenario.constants
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    space = scenario.space
    vspace = scenario.vspace
    n = scenario.n_users
    users = spawn_users(scenario, rng)
    clock = SimClock(fps=cst.fps)

    need_state = collect_transitions or scenario.reset == "MRC_POLICY"
    if need_state:
        from .marl import build_state  # deferred: marl imports this module

    steering_mode = scenario.steering
    reset_mode = scenario.reset

    waypoints_done = [0] * n
    active = [True] * n
    slack = [-1.0] * n  # conservative margin before the next exact check
    stuck = [0] * n
    # Trigger hysteresis (Schmitt style): after a reset the boundary trigger
    # shrinks to the hard floor until the user leaves the band by a margin;
    # a pair that co-reset is disarmed (floor-only, solo resets) until it
    # separates by the same margin. Without this, grazing trajectories and
    # threshold-straddling pairs reset on every frame forever.
    armed = [[True] * n for _ in range(n)]
    b_armed = [True] * n
    rearm_edge = cst.boundary_trigger * cst.rearm_factor
    rearm_gap = cst.user_trigger * cst.rearm_factor
    reset_counts = [0] * n
    vdist = [0.0] * n
    pending: list[ResetEvent | None] = [None] * n
    pending_decision: list[Decision | None] = [None] * n
    events: list[ResetEvent] = []
    decisions: list[Decision] = []

    budget = scenario.path_waypoints
    max_frames = max(budget, 1) * 1800 + 2000  # generous stall guard

    traj_writer = traj_file = None
    if trajectory_path is not None:
        traj_file = open(trajectory_path, "w", newline="", encoding="utf-8")
        traj_writer = csv.writer(traj_file)
        traj_writer.writerow(
            ("frame", "user_index", "phys_x", "phys_y", "phys_heading",
             "virt_x", "virt_y", "virt_heading")
        )

    def choose_direction(i, kind):
        if reset_mode == "R2C":
            return r2c_direction(users[i], space, kind, cst)
        if reset_mode == "R2G":
            return r2g_direction(users[i], space, users, kind, cst)
        if reset_mode == "MRC_GREEDY":
            return greedy_mrc_direction(users[i], space, users, kind, cst.greedy_candidates, cst)
        state = build_state(users, space)
        return policy_mrc_direction(policy, state, kind, i), state

    def do_reset(i, kind, frame):
        user = users[i]
        picked = choose_direction(i, kind)
        state = None
        if isinstance(picked, tuple):
            theta_a, state = picked
        else:
            theta_a = picked
        if user.dist_since_reset < 1e-9:
            stuck[i] += 1
            if stuck[i] >= cst.reset_escalation_limit:
                log.warning(
                    "user %d stuck at frame %d; escalating to interval center", i, frame
                )
                theta_a = kind.base_angle
        else:
            stuck[i] = 0
        if not in_admissible_range(theta_a, kind):
            _fault(frame, i, user, f"reset direction {theta_a} outside half-plane")
        r_area = area_reward(space, users, user.phys_pos, theta_a, exclude_index=i,
                             constants=cst)
        event = ResetEvent(frame, i, kind, theta_a, RewardBreakdown(r_area=r_area))
        events.append(event)
        reset_counts[i] += 1
        if pending[i] is not None:
            realized = pending[i].reward.finalize(weights, user.dist_since_reset)
            if pending_decision[i] is not None:
                pending_decision[i].breakdown.total = realized
        pending[i] = event
        if collect_transitions:
            if state is None:
                state = build_state(users, space)
            obs = state[3 * i: 3 * i + 3].copy()
            action = wrap_angle(theta_a - kind.base_angle) / (math.pi / 2.0)
            decision = Decision(frame, i, state, obs, action, event.reward)
            decisions.append(decision)
            pending_decision[i] = decision
        users[i] = apply_reset(user, theta_a)
        slack[i] = -1.0

    frame = 0
    while any(active):
        if frame >= max_frames:
            raise SimulationFault(f"episode exceeded {max_frames} frames (stalled?)")
        for i in range(n):
            if not active[i]:
                continue
            user = users[i]
            wx, wy = user.waypoint
            vx, vy = user.virt_pos
            if math.hypot(wx - vx, wy - vy) <= cst.waypoint_arrival:
                waypoints_done[i] += 1
                if waypoints_done[i] >= budget:
                    active[i] = False
                    continue
                user.waypoint = next_waypoint(user, vspace, rng, cst)
                wx, wy = user.waypoint

            if steering_mode == "NS":
                gains = NS_GAINS
            else:
                err = wrap_angle(math.atan2(wy - vy, wx - vx) - user.virt_heading)
                turn_sign = 0 if abs(err) < 1e-12 else (1 if err > 0 else -1)
                if steering_mode == "S2C":
                    gains = s2c_gains(user, space, turn_sign, cst)
                else:
                    gains = apf_gains(user, apf_force(space, users, i, cst), turn_sign, cst)

            proposed = step_user(user, gains, clock, cst)
            sx = proposed.phys_pos.x - user.phys_pos.x
            sy = proposed.phys_pos.y - user.phys_pos.y
            step_len = math.hypot(sx, sy)

            if step_len < slack[i]:
                committed = True
            else:
                m = proximity_measure(space, users, i, (sx, sy), cst)
                row = armed[i]
                if not b_armed[i] and m.min_edge >= rearm_edge:
                    b_armed[i] = True
                for j, _d_new, d_old in m.user_hits:
                    if not row[j] and d_old >= rearm_gap:
                        row[j] = armed[j][i] = True
                kind = None
                if m.edge_hit is not None and (
                    b_armed[i] or m.edge_hit[0] < cst.boundary_floor
                ):
                    kind = ResetKind.boundary(m.edge_hit[1])
                if kind is None:
                    hit_j = nearest_closing_user(
                        m, cst.user_trigger, eligible=lambda j: row[j]
                    )
                    if hit_j is None:
                        hit_j = nearest_closing_user(
                            m, cst.user_radius, eligible=lambda j: not row[j]
                        )
                    if hit_j is not None:
                        kind = ResetKind.user(user.phys_heading + math.pi, hit_j)
                if kind is None:
                    committed = True
                    slack[i] = m.slack(cst)
                else:
                    committed = False
                    pair_was_armed = kind.kind == USER and row[kind.other_index]
                    do_reset(i, kind, frame)
                    b_armed[i] = False
                    if pair_was_armed:
                        # Armed pairs reset together, then stay disarmed until
                        # they separate; disarmed-pair floor hits reorient only
                        # the stepping user so the two cannot keep flipping
                        # each other in place.
                        j = kind.other_index
                        partner_kind = ResetKind.user(
                            users[j].phys_heading + math.pi, i
                        )
                        do_reset(j, partner_kind, frame)
                        b_armed[j] = False
                        armed[i][j] = armed[j][i] = False

            if committed:
                dv = math.dist(proposed.virt_pos, user.virt_pos)
                vdist[i] += dv
                users[i] = proposed
                if not (math.isfinite(proposed.phys_pos.x) and math.isfinite(proposed.phys_pos.y)):
                    _fault(frame, i, proposed, "non-finite physical position")
                if step_len > 0.0:
                    for j in range(n):
                        slack[j] -= step_len

            if traj_writer is not None:
                u = users[i]
                traj_writer.writerow(
                    (frame, i, f"{u.phys_pos.x:.9f}", f"{u.phys_pos.y:.9f}",
                     f"{u.phys_heading:.9f}", f"{u.virt_pos.x:.9f}",
                     f"{u.virt_pos.y:.9f}", f"{u.virt_heading:.9f}")
                )
        frame += 1

    for i in range(n):
        if pending[i] is not None:
            realized = pending[i].reward.finalize(weights, users[i].dist_since_reset)
            if pending_decision[i] is not None:
                pending_decision[i].breakdown.total = realized
    if decisions:
        decisions[-1].done = True
    if traj_file is not None:
        traj_file.close()

    episode_return = sum(e.reward.total for e in events if e.reward.total is not None)
    mdbr = [vdist[i] / max(reset_counts[i], 1) for i in range(n)]
    return EpisodeMetrics(
        reset_counts=reset_counts,
        virtual_distances=vdist,
        mdbr_per_user=mdbr,
        frames=frame,
        events=events,
        episode_return=episode_return,
        transitions=decisions if collect_transitions else None,
    )


def write_reset_events(events, path) -> None:
    """Dump the per-event reset log (the harness's result format)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_CSV_COLUMNS)
        for e in events:
            w.writerow(
                (
                    e.frame,
                    e.user_index,
                    e.kind.kind,
                    f"{e.kind.base_angle:.9f}",
                    f"{e.theta_a:.9f}",
                    f"{e.reward.r_reset:.1f}",
                    "" if e.reward.r_dist is None else f"{e.reward.r_dist:.9f}",
                    f"{e.reward.r_area:.9f}",
                )
            )


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _rank_data(values: np.ndarray) -> np.ndarray:
    """Fractional (midrank) ranking, 1-based."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sval = values[order]
    i = 0
    while i < len(sval):
        j = i
        while j + 1 < len(sval) and sval[j + 1] == sval[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_u_distribution(ranks2: np.ndarray, n1: int) -> tuple[np.ndarray, np.ndarray]:
    """Permutation distribution of the doubled rank sum of sample 1.

    ranks2 holds doubled midranks (integers). Returns (support, counts)
    over the doubled rank-sum values for all C(n, n1) labelings.
    """
    total = int(ranks2.sum())
    dp = np.zeros((n1 + 1, total + 1))
    dp[0, 0] = 1.0
    for r in ranks2:
        r = int(r)
        for k in range(n1, 0, -1):  # descending: each item counted once
            dp[k, r:] += dp[k - 1, : total + 1 - r]
    counts = dp[n1]
    support = np.arange(total + 1)
    keep = counts > 0
    return support[keep], counts[keep]


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test with midrank tie handling.

    Returns (U for sample_a, p). Exact permutation p-value when either
    sample has fewer than 20 observations, otherwise the normal
    approximation with tie correction and continuity correction.
    """
    a = np.asarray(list(sample_a), dtype=float)
    b = np.asarray(list(sample_b), dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    combined = np.concatenate([a, b])
    ranks = _rank_data(combined)
    r1 = ranks[:n1].sum()
    u_a = r1 - n1 * (n1 + 1) / 2.0
    nm = n1 * n2

    if np.all(combined == combined[0]):
        return u_a, 1.0

    if min(n1, n2) < 20:
        ranks2 = np.rint(2.0 * ranks).astype(int)
        support, counts = _exact_u_distribution(ranks2, n1)
        u_support = support / 2.0 - n1 * (n1 + 1) / 2.0
        u_lo = min(u_a, nm - u_a)
        tail = (u_support <= u_lo + 1e-9) | (u_support >= nm - u_lo - 1e-9)
        p = counts[tail].sum() / counts.sum()
        return u_a, float(min(p, 1.0))

    # normal approximation with tie + continuity corrections
    _, tie_counts = np.unique(combined, return_counts=True)
    size = n1 + n2
    tie = 1.0 - (tie_counts**3 - tie_counts).sum() / (size**3 - size)
    if tie <= 0.0:
        return u_a, 1.0
    sd = math.sqrt(tie * nm * (size + 1) / 12.0)
    z = (abs(u_a - nm / 2.0) - 0.5) / sd
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return u_a, float(min(p, 1.0))


# ---------------------------------------------------------------------------
# experiment grids


@dataclass(frozen=True)
class CellSpec:
    width: float
    height: float
    preset: str
    n_users: int
    steering: str
    reset: str

    @property
    def key(self) -> str:
        return (
            f"{self.width:g}x{self.height:g}/{self.preset}/{self.n_users}"
            f"/{self.steering}/{self.reset}"
        )

    @property
    def space_label(self) -> str:
        return f"{self.width:g}x{self.height:g}"


@dataclass
class ExperimentConfig:
    cells: list[CellSpec]
    trials: int = 100
    path_waypoints: int = 200
    seed: int = 0
    pairs: list[tuple[str, str]] = field(default_factory=list)
    vspace: VirtualSpace = field(default_factory=VirtualSpace)
    constants: object = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial per cell")
        if self.constants is None:
            self.constants = DEFAULT_CONSTANTS


BASELINE_RESET = {"APF": "R2G", "S2C": "R2C", "NS": "R2C"}

_EXPERIMENTS = {
    "E1": dict(sizes=[(5, 5)], presets=["simple", "circle", "complex"],
               user_counts=[2], steerings=["APF", "S2C", "NS"]),
    "E2": dict(sizes=[(10, 10)], presets=["simple", "circle", "complex"],
               user_counts=[2, 3], steerings=["APF", "S2C", "NS"]),
    "E3": dict(sizes=[(20, 20)], presets=["four_squares"],
               user_counts=[2, 3, 4, 5, 6, 7, 8], steerings=["APF", "S2C", "NS"]),
    "E4": dict(sizes=[(10, 10)], presets=["less", "more"],
               user_counts=[2], steerings=["APF"]),
    "E5": dict(sizes=[(10, 10)], presets=["simple"],
               user_counts=[2], steerings=["APF"]),
}


def experiment_cells(name: str, mrc_reset: str = "MRC_GREEDY") -> tuple[list[CellSpec], list[tuple[str, str]]]:
    """Cells and designated baseline-vs-MRC pairs for one of E1..E5."""
    if name not in _EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r} (expected E1..E5)")
    spec = _EXPERIMENTS[name]
    cells, pairs = [], []
    for (w, h), preset, n, steering in itertools.product(
        spec["sizes"], spec["presets"], spec["user_counts"], spec["steerings"]
    ):
        base = CellSpec(w, h, preset, n, steering, BASELINE_RESET[steering])
        mrc = CellSpec(w, h, preset, n, steering, mrc_reset)
        cells.extend([base, mrc])
        pairs.append((base.key, mrc.key))
    return cells, pairs


# ---------------------------------------------------------------------------
# experiment runner


@dataclass
class CellResult:
    cell: CellSpec
    trials: int
    reset_samples: list[float]
    mdbr_samples: list[float]
    failed: bool = False
    error: str = ""

    @property
    def mean_resets(self) -> float:
        return float(np.mean(self.reset_samples)) if self.reset_samples else math.nan

    @property
    def sd_resets(self) -> float:
        return float(np.std(self.reset_samples)) if self.reset_samples else math.nan

    @property
    def mean_mdbr(self) -> float:
        return float(np.mean(self.mdbr_samples)) if self.mdbr_samples else math.nan

    @property
    def sd_mdbr(self) -> float:
        return float(np.std(self.mdbr_samples)) if self.mdbr_samples else math.nan


@dataclass
class PairResult:
    key_a: str
    key_b: str
    u_stat: float
    p_value: float


@dataclass
class ResultTable:
    rows: list[CellResult]
    pairs: list[PairResult]
    config: dict
    constants: dict

    def row(self, key: str) -> CellResult:
        for r in self.rows:
            if r.cell.key == key:
                return r
        raise KeyError(key)


_worker_scenarios: dict = {}


def _trial_scenario(cell: CellSpec, cfg_dict: dict) -> ScenarioConfig:
    key = cell.key
    sc = _worker_scenarios.get(key)
    if sc is None:
        space = build_preset(cell.preset, cell.width, cell.height)
        sc = ScenarioConfig(
            space=space,
            n_users=cell.n_users,
            steering=cell.steering,
            reset=cell.reset,
            vspace=VirtualSpace(*cfg_dict["vspace"]),
            path_waypoints=cfg_dict["path_waypoints"],
            constants=cfg_dict["constants"],
        )
        _worker_scenarios[key] = sc
    return sc


def _run_trial(args):
    cell, cfg_dict, trial_idx, policy = args
    try:
        scenario = _trial_scenario(cell, cfg_dict)
        ss = np.random.SeedSequence([cfg_dict["seed"], cfg_dict["cell_ids"][cell.key], trial_idx])
        metrics = run_episode(scenario, policy=policy, seed=ss)
        return (cell.key, trial_idx, float(metrics.total_resets), float(metrics.mdbr_mean), "")
    except Exception as exc:  # cell marked failed, other cells proceed
        return (cell.key, trial_idx, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def worker_count(n_jobs: int) -> int:
    env_cap = os.environ.get(THREADS_ENV_VAR)
    cap = int(env_cap) if env_cap else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_experiment(config: ExperimentConfig, policy=None) -> ResultTable:
    """Run every cell of the grid and aggregate the result table."""
    cfg_dict = {
        "vspace": (config.vspace.width, config.vspace.height),
        "path_waypoints": config.path_waypoints,
        "seed": config.seed,
        "constants": config.constants,
        "cell_ids": {cell.key: idx for idx, cell in enumerate(config.cells)},
    }
    jobs = [
        (cell, cfg_dict, trial, policy if cell.reset == "MRC_POLICY" else None)
        for cell in config.cells
        for trial in range(config.trials)
    ]
    workers = worker_count(len(jobs))
    if workers == 1:
        outcomes = [_run_trial(job) for job in jobs]
    else:
        with get_context("fork").Pool(workers) as pool:
            outcomes = pool.map(_run_trial, jobs, chunksize=4)

    by_cell: dict[str, CellResult] = {
        cell.key: CellResult(cell, config.trials, [], []) for cell in config.cells
    }
    for key, _trial, resets, mdbr, err in outcomes:
        res = by_cell[key]
        if err:
            res.failed = True
            res.error = err
        else:
            res.reset_samples.append(resets)
            res.mdbr_samples.append(mdbr)

    pairs = []
    for key_a, key_b in config.pairs:
        ra, rb = by_cell.get(key_a), by_cell.get(key_b)
        if ra is None or rb is None or ra.failed or rb.failed:
            continue
        u, p = mann_whitney_u(ra.reset_samples, rb.reset_samples)
        pairs.append(PairResult(key_a, key_b, u, p))

    config_echo = {
        "cells": [c.key for c in config.cells],
        "trials": config.trials,
        "path_waypoints": config.path_waypoints,
        "seed": config.seed,
        "vspace": [config.vspace.width, config.vspace.height],
    }
    return ResultTable(
        rows=[by_cell[c.key] for c in config.cells],
        pairs=pairs,
        config=config_echo,
        constants=constants_block(config.constants),
    )


def constants_block(constants=None, weights: RewardWeights = DEFAULT_WEIGHTS) -> dict:
    """Every tunable that shapes results, disclosed with each export."""
    cst = constants if constants is not None else DEFAULT_CONSTANTS
    block = cst.as_dict()
    block.update(weights.as_dict())
    block.update(
        {
            "g_t_range": list(G_T_RANGE),
            "g_r_range": list(G_R_RANGE),
            "min_curvature_radius": MIN_CURVATURE_RADIUS,
        }
    )
    return block


# ---------------------------------------------------------------------------
# export / import


def export_results(table: ResultTable, path, format: str = "csv") -> None:
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in table.rows:
                c = r.cell
                w.writerow(
                    (
                        c.space_label,
                        c.preset,
                        c.n_users,
                        c.steering,
                        c.reset,
                        r.trials,
                        f"{r.mean_resets:.6f}",
                        f"{r.sd_resets:.6f}",
                        f"{r.mean_mdbr:.6f}",
                        f"{r.sd_mdbr:.6f}",
                    )
                )
    elif format == "json":
        payload = {
            "config": table.config,
            "constants": table.constants,
            "cells": [
                {
                    "key": r.cell.key,
                    "space": r.cell.space_label,
                    "width": r.cell.width,
                    "height": r.cell.height,
                    "preset": r.cell.preset,
                    "n_users": r.cell.n_users,
                    "steering": r.cell.steering,
                    "reset_ctrl": r.cell.reset,
                    "trials": r.trials,
                    "failed": r.failed,
                    "error": r.error,
                    "reset_samples": r.reset_samples,
                    "mdbr_samples": r.mdbr_samples,
                    "mean_resets": r.mean_resets,
                    "sd_resets": r.sd_resets,
                    "mean_mdbr": r.mean_mdbr,
                    "sd_mdbr": r.sd_mdbr,
                }
                for r in table.rows
            ],
            "pairs": [
                {"a": p.key_a, "b": p.key_b, "U": p.u_stat, "p": p.p_value}
                for p in table.pairs
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, allow_nan=True)
    else:
        raise ValueError(f"unknown export format {format!r}")


def import_results(path) -> ResultTable:
    """Rebuild a ResultTable from a JSON export."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    rows = []
    for c in payload["cells"]:
        cell = CellSpec(
            float(c["width"]), float(c["height"]), c["preset"], int(c["n_users"]),
            c["steering"], c["reset_ctrl"],
        )
        rows.append(
            CellResult(
                cell,
                int(c["trials"]),
                list(map(float, c["reset_samples"])),
                list(map(float, c["mdbr_samples"])),
                bool(c["failed"]),
                c.get("error", ""),
            )
        )
    pairs = [PairResult(p["a"], p["b"], float(p["U"]), float(p["p"])) for p in payload["pairs"]]
    return ResultTable(rows, pairs, payload["config"], payload["constants"])


def summarize(table: ResultTable) -> str:
    """Plain-text summary of a result table."""
    lines = ["cell".ljust(44) + "mean_resets  sd     mean_mdbr"]
    for r in table.rows:
        if r.failed:
            lines.append(f"{r.cell.key:<44}FAILED: {r.error}")
        else:
            lines.append(
                f"{r.cell.key:<44}{r.mean_resets:>10.2f}  {r.sd_resets:>6.2f}"
                f"  {r.mean_mdbr:>8.3f}"
            )
    for p in table.pairs:
        lines.append(f"{p.key_a}  vs  {p.key_b}:  U={p.u_stat:.1f}  p={p.p_value:.3g}")
    return "\n".join(lines)


def simulate_trials(scenario: ScenarioConfig, trials: int, seed: int | None = None,
                    policy=None, trajectory_path=None) -> list[EpisodeMetrics]:
    """Run repeated episodes of one scenario (seeded per trial)."""
    base_seed = scenario.seed if seed is None else seed
    out = []
    for t in range(trials):
        ss = np.random.SeedSequence([base_seed, t])
        traj = trajectory_path if (t == 0 and trajectory_path) else None
        out.append(run_episode(scenario, policy=policy, seed=ss, trajectory_path=traj))
    return out


def write_trial_metrics(metrics_list: list[EpisodeMetrics], path) -> None:
    """Per-trial, per-user metrics CSV (the `simulate` output format)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_CSV_COLUMNS)
        for t, m in enumerate(metrics_list):
            for i, count in enumerate(m.reset_counts):
                w.writerow(
                    (t, i, count, f"{m.virtual_distances[i]:.9f}", f"{m.mdbr_per_user[i]:.9f}")
                )
