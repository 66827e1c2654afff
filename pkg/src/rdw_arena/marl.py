"""Training for the learned reset policy.

Decision steps are reset events, not frames: every reset contributes one
transition whose reward is realized when that user's next reset (or the
episode end) fixes the walked distance. One tanh MLP actor is shared by
all users and acts on the local 3-dim observation; a centralized critic
scores the concatenated global state. The single-agent variant instead
feeds the full state to one actor that emits one action per user.

Everything runs in float64 numpy with a hand-rolled Adam, which keeps
training deterministic for a fixed seed and makes the analytic gradients
directly checkable against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .env import ScenarioConfig, normalize_pose
from .harness import run_episode
from .reward import DEFAULT_WEIGHTS, RewardWeights

POLICY_VERSION = "mrc-policy-1"

SHARED = "shared"  # one actor per user, local observation (CTDE execution)
JOINT = "joint"  # one actor sees the global state, emits all users' actions


class TrainingCorruptionError(RuntimeError):
    """Non-finite parameters or loss during training."""


@dataclass
class TrainerConfig:
    batch_size: int = 2048
    learning_rate: float = 0.001
    layers: int = 4
    hidden_units: int = 256
    gamma: float = 0.99
    lam: float = 0.95
    max_steps: int = 15_000_000  # reset decisions; override for desk-scale runs
    seed: int = 0
    sigma_start: float = 0.5  # exploration noise, annealed linearly
    sigma_end: float = 0.05
    episode_waypoints: int = 20  # virtual path budget per user per episode
    critic_updates: int = 5  # inner critic steps per batch

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lambda must be in (0, 1]")
        for name in ("batch_size", "layers", "hidden_units", "max_steps",
                     "episode_waypoints", "critic_updates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------------------
# observation / state assembly


def build_observation(user, space) -> np.ndarray:
    """Local observation (u_x, u_y, theta), each scaled to [-1, 1]."""
    pose = normalize_pose(space, user.phys_pos, user.phys_heading)
    return np.array([pose.u[0], pose.u[1], pose.theta])


def build_state(users, space) -> np.ndarray:
    """Global state: the users' observations concatenated in index order."""
    return np.concatenate([build_observation(u, space) for u in users])


# ---------------------------------------------------------------------------
# MLP + Adam


def mlp_init(rng: np.random.Generator, sizes, final_zero: bool = False):
    """Glorot-uniform layer stack; optionally zero the output layer so the
    initial policy emits exactly the interval center."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, (fan_in, fan_out))
        b = np.zeros(fan_out)
        layers.append([w, b])
    if final_zero:
        layers[-1][0][:] = 0.0
    return layers


def mlp_forward(layers, x: np.ndarray):
    """Forward pass (tanh hidden, linear output); returns (out, activations)."""
    acts = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.tanh(h @ w + b)
        acts.append(h)
    w, b = layers[-1]
    return h @ w + b, acts


def mlp_backward(layers, acts, dout: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(output)."""
    grads = []
    delta = dout
    gw = acts[-1].T @ delta
    grads.append((gw, delta.sum(axis=0)))
    delta = delta @ layers[-1][0].T
    for idx in range(len(layers) - 2, -1, -1):
        h = acts[idx + 1]
        delta = delta * (1.0 - h * h)
        grads.append((acts[idx].T @ delta, delta.sum(axis=0)))
        if idx > 0:
            delta = delta @ layers[idx][0].T
    return list(reversed(grads))


class Adam:
    def __init__(self, layers, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [[np.zeros_like(w), np.zeros_like(b)] for w, b in layers]
        self.v = [[np.zeros_like(w), np.zeros_like(b)] for w, b in layers]

    def step(self, layers, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for li, (layer, grad) in enumerate(zip(layers, grads)):
            for pi in range(2):
                g = grad[pi]
                m = self.m[li][pi]
                v = self.v[li][pi]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                layer[pi] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# policy container


@dataclass
class PolicyParams:
    actor: list
    critic: list
    kind: str = SHARED
    n_users: int = 2
    version: str = POLICY_VERSION
    metadata: dict = field(default_factory=dict)

    @property
    def obs_dim(self) -> int:
        return self.actor[0][0].shape[0]

    @property
    def action_dim(self) -> int:
        return self.actor[-1][0].shape[1]

    @property
    def state_dim(self) -> int:
        return self.critic[0][0].shape[0]

    def action_for(self, state: np.ndarray, i: int) -> float:
        """Action in [-1, 1] for user i given the global state vector.

        Shared actors see only the user's own observation slice (local
        information at execution); joint actors see everything and emit
        one component per user.
        """
        if self.kind == SHARED:
            return actor_forward(self, state[3 * i: 3 * i + 3])[0]
        return actor_forward(self, state)[i]


def actor_forward(params: PolicyParams, obs: np.ndarray, explore: float = 0.0,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Squashed deterministic action(s), optionally with clipped noise."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape[-1] != params.obs_dim:
        raise ValueError(f"observation dim {obs.shape[-1]} != {params.obs_dim}")
    out, _ = mlp_forward(params.actor, obs[None, :])
    a = np.tanh(out[0])
    if not np.all(np.isfinite(a)):
        raise TrainingCorruptionError("actor produced non-finite action")
    if explore > 0.0:
        if rng is None:
            raise ValueError("exploration needs an rng")
        a = np.clip(a + rng.normal(0.0, explore, a.shape), -1.0, 1.0)
    return a


def critic_forward(params: PolicyParams, state: np.ndarray) -> float:
    """Scalar value of a global state."""
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != params.state_dim:
        raise ValueError(f"state dim {state.shape[-1]} != critic dim {params.state_dim}")
    out, _ = mlp_forward(params.critic, state[None, :])
    return float(out[0, 0])


class ExploringPolicy:
    """Wraps PolicyParams with truncated-Gaussian exploration noise."""

    def __init__(self, params: PolicyParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.sigma = 0.0

    def action_for(self, state: np.ndarray, i: int) -> float:
        a = self.params.action_for(state, i)
        if self.sigma > 0.0:
            a = float(np.clip(a + self.rng.normal(0.0, self.sigma), -1.0, 1.0))
        return a


class RandomPolicy:
    """Uniform action over [-1, 1]: reset direction uniform in the half-plane."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def action_for(self, state, i) -> float:
        return float(self.rng.uniform(-1.0, 1.0))


# ---------------------------------------------------------------------------
# advantages


def compute_advantages(rewards, values, dones, gamma: float, lam: float) -> np.ndarray:
    """TD(lambda) advantages over the reset-decision time axis.

    A_t = sum_k (gamma*lam)^k * delta_{t+k}, truncated at episode ends;
    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t). `values`
    carries the bootstrap entry, so len(values) == len(rewards) + 1.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    t_len = len(rewards)
    if len(values) != t_len + 1:
        raise ValueError("values must include the bootstrap entry")
    adv = np.zeros(t_len)
    gae = 0.0
    for t in range(t_len - 1, -1, -1):
        nonterm = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * nonterm - values[t]
        gae = delta + gamma * lam * nonterm * gae
        adv[t] = gae
    return adv


# ---------------------------------------------------------------------------
# losses and gradients (exposed for the finite-difference checks)


def actor_loss(actor_layers, batch) -> float:
    """Mean advantage-weighted negative log-likelihood of the taken actions
    under the Gaussian exploration law centered on the actor output."""
    x, actions, advantages, sigmas, comp = batch
    out, _ = mlp_forward(actor_layers, x)
    mu = np.tanh(out)
    mu_taken = mu[np.arange(len(x)), comp]
    logp = -((actions - mu_taken) ** 2) / (2.0 * sigmas**2)
    return float(-(advantages * logp).mean())


def actor_gradients(actor_layers, batch):
    x, actions, advantages, sigmas, comp = batch
    n = len(x)
    out, acts = mlp_forward(actor_layers, x)
    mu = np.tanh(out)
    mu_taken = mu[np.arange(n), comp]
    logp = -((actions - mu_taken) ** 2) / (2.0 * sigmas**2)
    loss = float(-(advantages * logp).mean())
    dmu_taken = -advantages * (actions - mu_taken) / (sigmas**2) / n
    dout = np.zeros_like(out)
    dout[np.arange(n), comp] = dmu_taken * (1.0 - mu_taken**2)
    return loss, mlp_backward(actor_layers, acts, dout)


def critic_loss(critic_layers, states, targets) -> float:
    out, _ = mlp_forward(critic_layers, states)
    return float(0.5 * ((out[:, 0] - targets) ** 2).mean())


def critic_gradients(critic_layers, states, targets):
    out, acts = mlp_forward(critic_layers, states)
    err = out[:, 0] - targets
    loss = float(0.5 * (err**2).mean())
    dout = (err / len(states))[:, None]
    return loss, mlp_backward(critic_layers, acts, dout)


# ---------------------------------------------------------------------------
# training


def _init_params(config: TrainerConfig, scenario: ScenarioConfig, kind: str) -> PolicyParams:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 11]))
    n = scenario.n_users
    state_dim = 3 * n
    if kind == SHARED:
        actor_sizes = [3] + [config.hidden_units] * config.layers + [1]
    else:
        actor_sizes = [state_dim] + [config.hidden_units] * config.layers + [n]
    critic_sizes = [state_dim] + [config.hidden_units] * config.layers + [1]
    return PolicyParams(
        actor=mlp_init(rng, actor_sizes, final_zero=True),
        critic=mlp_init(rng, critic_sizes),
        kind=kind,
        n_users=n,
        metadata={"trainer_config": config.as_dict(), "scenario_seed": scenario.seed},
    )


def train(config: TrainerConfig, scenario: ScenarioConfig,
          weights: RewardWeights = DEFAULT_WEIGHTS) -> PolicyParams:
    """Train the shared-actor policy (decentralized execution)."""
    return _train_impl(config, scenario, SHARED, weights)


def train_single_agent(config: TrainerConfig, scenario: ScenarioConfig,
                       weights: RewardWeights = DEFAULT_WEIGHTS) -> PolicyParams:
    """Train the joint-action single-agent variant (state and action both
    scale with the user count)."""
    return _train_impl(config, scenario, JOINT, weights)


def _train_impl(config, scenario, kind, weights) -> PolicyParams:
    if scenario.reset != "MRC_POLICY":
        raise ValueError("training scenario must use the MRC_POLICY reset mode")
    params = _init_params(config, scenario, kind)
    noise_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 23]))
    policy = ExploringPolicy(params, noise_rng)
    adam_actor = Adam(params.actor, config.learning_rate)
    adam_critic = Adam(params.critic, config.learning_rate)
    train_scenario = replace(scenario, path_waypoints=config.episode_waypoints)

    buf_x, buf_state, buf_a, buf_adv, buf_tgt, buf_sig, buf_comp = ([] for _ in range(7))
    curve = []
    window_returns: list[float] = []
    window_resets: list[float] = []
    episode_log: list[tuple[float, int]] = []
    decisions_done = 0
    episode_idx = 0
    update_idx = 0

    while decisions_done < config.max_steps:
        frac = min(decisions_done / config.max_steps, 1.0)
        policy.sigma = config.sigma_start + (config.sigma_end - config.sigma_start) * frac
        ep_seed = np.random.SeedSequence([scenario.seed, 7771, episode_idx])
        metrics = run_episode(
            train_scenario, policy=policy, seed=ep_seed, weights=weights,
            collect_transitions=True,
        )
        episode_idx += 1
        decisions = metrics.transitions or []
        episode_log.append((metrics.episode_return, metrics.total_resets))
        window_returns.append(metrics.episode_return)
        window_resets.append(metrics.total_resets)
        if decisions:
            decisions_done += len(decisions)
            states = np.stack([d.state for d in decisions])
            rewards = np.array([d.breakdown.total for d in decisions], dtype=float)
            if not np.all(np.isfinite(rewards)):
                raise TrainingCorruptionError("non-finite decision reward")
            vals_out, _ = mlp_forward(params.critic, states)
            values = np.append(vals_out[:, 0], 0.0)  # terminal bootstrap
            dones = np.array([d.done for d in decisions], dtype=float)
            adv = compute_advantages(rewards, values, dones, config.gamma, config.lam)
            targets = adv + values[:-1]
            for d, a_t, t_t in zip(decisions, adv, targets):
                buf_x.append(d.obs if kind == SHARED else d.state)
                buf_state.append(d.state)
                buf_a.append(d.action)
                buf_adv.append(a_t)
                buf_tgt.append(t_t)
                buf_sig.append(max(policy.sigma, 1e-3))
                buf_comp.append(0 if kind == SHARED else d.user_index)

        if len(buf_a) >= config.batch_size or (
            decisions_done >= config.max_steps and buf_a
        ):
            x = np.stack(buf_x)
            states = np.stack(buf_state)
            actions = np.array(buf_a)
            advantages = np.array(buf_adv)
            std = advantages.std()
            if std > 1e-12:
                advantages = (advantages - advantages.mean()) / std
            targets = np.array(buf_tgt)
            sigmas = np.array(buf_sig)
            comp = np.array(buf_comp)
            a_loss, a_grads = actor_gradients(
                params.actor, (x, actions, advantages, sigmas, comp)
            )
            c_loss = 0.0
            for _ in range(config.critic_updates):
                c_loss, c_grads = critic_gradients(params.critic, states, targets)
                adam_critic.step(params.critic, c_grads)
            if not (math.isfinite(a_loss) and math.isfinite(c_loss)):
                raise TrainingCorruptionError(
                    f"diverged at update {update_idx}: actor={a_loss}, critic={c_loss}"
                )
            adam_actor.step(params.actor, a_grads)
            update_idx += 1
            curve.append(
                {
                    "update": update_idx,
                    "steps": decisions_done,
                    "mean_return": float(np.mean(window_returns)),
                    "mean_resets": float(np.mean(window_resets)),
                    "actor_loss": a_loss,
                    "critic_loss": c_loss,
                    "sigma": policy.sigma,
                }
            )
            window_returns.clear()
            window_resets.clear()
            buf_x.clear(); buf_state.clear(); buf_a.clear(); buf_adv.clear()
            buf_tgt.clear(); buf_sig.clear(); buf_comp.clear()

    params.metadata["learning_curve"] = curve
    params.metadata["episodes"] = episode_idx
    params.metadata["decisions"] = decisions_done
    params.metadata["episode_log"] = episode_log
    return params


def write_learning_curve(params: PolicyParams, path) -> None:
    """Columnar text log: update index, steps, mean return, mean resets."""
    rows = params.metadata.get("learning_curve", [])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("update,steps,mean_return,mean_resets\n")
        for r in rows:
            fh.write(
                f"{r['update']},{r['steps']},{r['mean_return']:.6f},{r['mean_resets']:.6f}\n"
            )


# ---------------------------------------------------------------------------
# checkpoints


def save_policy(params: PolicyParams, path) -> None:
    """Self-describing .npz checkpoint: config echo, shapes, parameters."""
    arrays = {}
    for i, (w, b) in enumerate(params.actor):
        arrays[f"actor_w{i}"] = w
        arrays[f"actor_b{i}"] = b
    for i, (w, b) in enumerate(params.critic):
        arrays[f"critic_w{i}"] = w
        arrays[f"critic_b{i}"] = b
    meta = {
        "version": params.version,
        "kind": params.kind,
        "n_users": params.n_users,
        "actor_layers": len(params.actor),
        "critic_layers": len(params.critic),
        "metadata": {
            k: v for k, v in params.metadata.items() if k != "episode_log"
        },
    }
    arrays["meta_json"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_policy(path) -> PolicyParams:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
        actor = [
            [data[f"actor_w{i}"], data[f"actor_b{i}"]]
            for i in range(meta["actor_layers"])
        ]
        critic = [
            [data[f"critic_w{i}"], data[f"critic_b{i}"]]
            for i in range(meta["critic_layers"])
        ]
    return PolicyParams(
        actor=actor,
        critic=critic,
        kind=meta["kind"],
        n_users=meta["n_users"],
        version=meta["version"],
        metadata=meta["metadata"],
    )
