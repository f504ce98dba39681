"""Clipped-surrogate policy optimization with GAE, implemented in numpy.

Gaussian MLP policy (tanh hidden layers, state-independent log-stds) and an
MLP value function, trained by Adam on minibatches of rollouts from a
vectorized environment.  Gradients are hand-derived reverse-mode; a 64-bit
dtype mode exists so they can be validated against finite differences.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -4.0
LOG_STD_MAX = 1.0
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class PpoHyper:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    lr: float = 3.0e-4
    anneal_lr: bool = True
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    grad_clip_norm: float = 0.5
    rollout_len: int = 64
    n_envs: int = 48
    total_steps: int = 2_000_000
    hidden: tuple = (256, 256)
    log_std_init: float = -1.0
    checkpoint_interval: int = 200
    curriculum_fraction: float = 1.0 / 3.0


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

class MLP:
    """Fully connected net with tanh hidden activations and a linear head."""

    def __init__(self, sizes, rng: np.random.Generator, dtype=np.float32,
                 out_scale: float = 1.0):
        self.sizes = tuple(sizes)
        self.dtype = dtype
        self.weights = []
        self.biases = []
        for i, (nin, nout) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = out_scale / np.sqrt(nin) if i == len(sizes) - 2 else 1.0 / np.sqrt(nin)
            self.weights.append((rng.normal(0.0, scale, size=(nin, nout))).astype(dtype))
            self.biases.append(np.zeros(nout, dtype=dtype))

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x):
        """Returns (output, cache) where cache holds layer inputs for backward."""
        x = np.asarray(x, dtype=self.dtype)
        cache = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            cache.append(h)
        return h, cache

    def backward(self, cache, dout):
        """Gradients of a scalar loss w.r.t. parameters given d(loss)/d(output)."""
        grads = [None] * (2 * len(self.weights))
        last = len(self.weights) - 1
        dh = np.asarray(dout, dtype=self.dtype)
        for i in range(last, -1, -1):
            if i < last:
                dh = dh * (1.0 - cache[i + 1] ** 2)  # through tanh
            x_in = cache[i]
            grads[2 * i] = x_in.T @ dh
            grads[2 * i + 1] = dh.sum(axis=0)
            if i > 0:
                dh = dh @ self.weights[i].T
        return grads


class GaussianPolicy:
    """Diagonal-Gaussian policy: MLP mean head plus learned log-stds.

    input_scale is an optional fixed per-feature normalization applied before
    the network (keeps raw physical units at the env interface while feeding
    the tanh layers well-conditioned inputs).
    """

    def __init__(self, obs_dim, act_dim, hidden=(256, 256),
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 log_std_init: float = -1.0, input_scale=None):
        rng = rng or np.random.default_rng(0)
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.net = MLP((obs_dim, *hidden, act_dim), rng, dtype=dtype, out_scale=0.01)
        self.log_std = np.full(act_dim, log_std_init, dtype=dtype)
        self.input_scale = None if input_scale is None \
            else np.asarray(input_scale, dtype=dtype)

    def scale_obs(self, obs):
        if self.input_scale is None:
            return obs
        return np.asarray(obs) * self.input_scale

    def mean(self, obs):
        out, _ = self.net.forward(self.scale_obs(obs))
        return out

    def sample(self, obs, rng: np.random.Generator):
        mean, _ = self.net.forward(self.scale_obs(obs))
        std = np.exp(self.log_std)
        noise = rng.standard_normal(mean.shape).astype(self.net.dtype)
        action = mean + std * noise
        return action, self.log_prob(mean, action)

    def log_prob(self, mean, action):
        std = np.exp(self.log_std)
        z = (np.asarray(action) - mean) / std
        return np.sum(-0.5 * z * z - self.log_std - 0.5 * LOG_2PI, axis=-1)

    def entropy(self):
        return float(np.sum(0.5 * (1.0 + LOG_2PI) + self.log_std))

    def clamp_log_std(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def params(self):
        return self.net.params() + [self.log_std]


class ValueFunction:
    def __init__(self, obs_dim, hidden=(256, 256),
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 input_scale=None):
        rng = rng or np.random.default_rng(1)
        self.net = MLP((obs_dim, *hidden, 1), rng, dtype=dtype)
        self.input_scale = None if input_scale is None \
            else np.asarray(input_scale, dtype=dtype)

    def scale_obs(self, obs):
        if self.input_scale is None:
            return obs
        return np.asarray(obs) * self.input_scale

    def value(self, obs):
        out, _ = self.net.forward(self.scale_obs(obs))
        return out[..., 0]

    def params(self):
        return self.net.params()


# ---------------------------------------------------------------------------
# GAE
# ---------------------------------------------------------------------------

def compute_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Generalized advantage estimates over a (T, ...) rollout.

    dones cut the advantage chain and zero the next-step value (terminations
    do not bootstrap; for truncations the caller folds gamma*V(s_terminal)
    into the reward beforehand).  bootstrap is V(s_T) after the last step.
    Returns (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values and dones must have equal shapes")
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_adv = np.zeros_like(rewards[0] if T else rewards)
    next_value = np.asarray(bootstrap, dtype=float)
    for t in range(T - 1, -1, -1):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        next_adv = delta + gamma * lam * not_done * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


def normalize_advantages(adv, eps: float = 1e-8):
    adv = np.asarray(adv, dtype=float)
    return (adv - adv.mean()) / (adv.std() + eps)


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------

def ppo_loss_and_grads(policy: GaussianPolicy, value_fn: ValueFunction,
                       obs, actions, old_logp, advantages, returns,
                       clip: float, value_coef: float, entropy_coef: float):
    """Total loss (policy surrogate + value + entropy bonus) and its gradients.

    Returns (loss, stats, policy_grads, value_grads) where the grad lists are
    ordered like the respective params() lists.
    """
    n = obs.shape[0]
    dtype = policy.net.dtype

    mean, cache_p = policy.net.forward(policy.scale_obs(obs))
    std = np.exp(policy.log_std).astype(dtype)
    z = (np.asarray(actions, dtype=dtype) - mean) / std
    logp = np.sum(-0.5 * z * z - policy.log_std - 0.5 * LOG_2PI, axis=-1)

    ratio = np.exp(logp - np.asarray(old_logp, dtype=dtype))
    adv = np.asarray(advantages, dtype=dtype)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    objective = np.minimum(unclipped, clipped)
    policy_loss = -objective.mean()

    entropy = np.sum(0.5 * (1.0 + LOG_2PI) + policy.log_std)
    v, cache_v = value_fn.net.forward(value_fn.scale_obs(obs))
    v = v[..., 0]
    v_err = v - np.asarray(returns, dtype=dtype)
    value_loss = np.mean(v_err ** 2)

    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy

    # d(policy_loss)/d(ratio): only where the unclipped branch is active
    active = unclipped <= clipped
    dratio = np.where(active, adv, 0.0) * (-1.0 / n)
    dlogp = dratio * ratio
    # dlogp/dmean = z/std ; dlogp/dlog_std = z^2 - 1
    dmean = dlogp[:, None] * (z / std)
    dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0)
    dlog_std = dlog_std - entropy_coef  # entropy bonus gradient
    policy_grads = policy.net.backward(cache_p, dmean.astype(dtype))
    policy_grads.append(dlog_std.astype(dtype))

    dv = (2.0 * value_coef / n) * v_err
    value_grads = value_fn.net.backward(cache_v, dv[:, None].astype(dtype))

    with np.errstate(divide="ignore", invalid="ignore"):
        approx_kl = float(np.mean(np.asarray(old_logp, dtype=dtype) - logp))
    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip)),
        "approx_kl": approx_kl,
    }
    return float(loss), stats, policy_grads, value_grads


def clip_grads_by_norm(grads, max_norm):
    total = np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        grads = [g * scale for g in grads]
    return grads, total


class Adam:
    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.t = 0

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g64 = g.astype(np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g64
            v *= self.beta2
            v += (1.0 - self.beta2) * g64 * g64
            update = lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p -= update.astype(p.dtype)


def ppo_update(policy: GaussianPolicy, value_fn: ValueFunction,
               optimizer: Adam, batch: dict, hyper: PpoHyper,
               rng: np.random.Generator, lr: float):
    """One PPO update: epochs x minibatches over the flattened batch."""
    obs = batch["obs"]
    n = obs.shape[0]
    adv = normalize_advantages(batch["advantages"]).astype(obs.dtype)
    mb_size = n // hyper.minibatches
    agg = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
           "clip_fraction": 0.0, "approx_kl": 0.0}
    count = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for k in range(hyper.minibatches):
            idx = order[k * mb_size:(k + 1) * mb_size]
            loss, stats, pg, vg = ppo_loss_and_grads(
                policy, value_fn, obs[idx], batch["actions"][idx],
                batch["log_probs"][idx], adv[idx], batch["returns"][idx],
                hyper.clip, hyper.value_coef, hyper.entropy_coef)
            if not np.isfinite(loss):
                return None  # abort update, keep previous params
            grads = pg + vg
            grads, _ = clip_grads_by_norm(grads, hyper.grad_clip_norm)
            optimizer.step(grads, lr=lr)
            policy.clamp_log_std()
            for key in agg:
                agg[key] += stats[key]
            count += 1
    return {k: v / count for k, v in agg.items()}


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

METRIC_COLUMNS = ("global_step", "mean_return", "mean_return_no_gait_terms",
                  "episode_length", "policy_loss", "value_loss", "entropy",
                  "clip_fraction", "approx_kl", "lr", "curriculum_scale")


@dataclass
class TrainResult:
    policy: GaussianPolicy
    value_fn: ValueFunction
    global_step: int
    metrics_path: str
    checkpoint_path: str


def train(env, hyper: PpoHyper, out_dir: str, seed: int = 0,
          save_checkpoint=None, resume_state=None, dtype=np.float32):
    """Run PPO on a vectorized env; writes metrics CSV and checkpoints.

    save_checkpoint(path, policy, value_fn, global_step, rng_state) is called
    for periodic and final checkpoints when provided.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(1)[0]))

    obs = env.reset(seed=seed)
    obs = obs.astype(dtype)
    obs_dim = obs.shape[1]
    act_dim = 12

    if resume_state is not None:
        policy, value_fn, global_step = resume_state
    else:
        input_scale = getattr(env, "obs_scale", None)
        policy = GaussianPolicy(obs_dim, act_dim, hidden=hyper.hidden, rng=rng,
                                dtype=dtype, log_std_init=hyper.log_std_init,
                                input_scale=input_scale)
        value_fn = ValueFunction(obs_dim, hidden=hyper.hidden, rng=rng,
                                 dtype=dtype, input_scale=input_scale)
        global_step = 0
    optimizer = Adam(policy.params() + value_fn.params(), lr=hyper.lr)

    metrics_path = os.path.join(out_dir, "metrics.csv")
    metrics_file = open(metrics_path, "w", newline="")
    writer = csv.writer(metrics_file)
    writer.writerow(METRIC_COLUMNS)

    n_envs = env.n
    steps_per_rollout = hyper.rollout_len * n_envs
    n_updates = max(0, hyper.total_steps // steps_per_rollout)

    ep_return = np.zeros(n_envs)
    ep_return_ng = np.zeros(n_envs)
    ep_len = np.zeros(n_envs, dtype=int)
    finished_returns: list = []
    finished_returns_ng: list = []
    finished_lens: list = []
    last_mean = (0.0, 0.0, 0.0)

    checkpoint_path = os.path.join(out_dir, "checkpoint_final.bgap")

    for update in range(n_updates):
        frac = global_step / max(1, hyper.total_steps)
        lr = hyper.lr * (1.0 - frac) if hyper.anneal_lr else hyper.lr
        curriculum = min(1.0, (global_step / max(1.0, hyper.total_steps
                                                 * hyper.curriculum_fraction)))
        env.set_curriculum_scale(curriculum)

        T = hyper.rollout_len
        obs_buf = np.zeros((T, n_envs, obs_dim), dtype=dtype)
        act_buf = np.zeros((T, n_envs, act_dim), dtype=dtype)
        logp_buf = np.zeros((T, n_envs), dtype=dtype)
        rew_buf = np.zeros((T, n_envs))
        done_buf = np.zeros((T, n_envs))
        val_buf = np.zeros((T, n_envs))

        for t in range(T):
            action, logp = policy.sample(obs, rng)
            value = value_fn.value(obs)
            next_obs, reward, terminated, truncated, info = env.step(action)
            next_obs = next_obs.astype(dtype)

            done = terminated | truncated
            raw_reward = np.asarray(reward, dtype=float)
            reward = raw_reward.copy()
            if np.any(truncated):
                term_obs = info["terminal_observation"].astype(dtype)
                vterm = value_fn.value(term_obs)
                reward[truncated] += hyper.gamma * vterm[truncated]

            obs_buf[t] = obs
            act_buf[t] = action
            logp_buf[t] = logp
            rew_buf[t] = reward
            done_buf[t] = done
            val_buf[t] = value

            ep_return += raw_reward
            ep_return_ng += np.asarray(info["reward_no_gait"])
            ep_len += 1
            for i in np.flatnonzero(done):
                finished_returns.append(float(ep_return[i]))
                finished_returns_ng.append(float(ep_return_ng[i]))
                finished_lens.append(int(ep_len[i]))
                ep_return[i] = 0.0
                ep_return_ng[i] = 0.0
                ep_len[i] = 0

            obs = next_obs
            global_step += n_envs

        bootstrap = value_fn.value(obs)
        adv, ret = compute_gae(rew_buf, val_buf, done_buf, bootstrap,
                               hyper.gamma, hyper.lam)
        batch = {
            "obs": obs_buf.reshape(-1, obs_dim),
            "actions": act_buf.reshape(-1, act_dim),
            "log_probs": logp_buf.reshape(-1),
            "advantages": adv.reshape(-1),
            "returns": ret.reshape(-1).astype(dtype),
        }
        stats = ppo_update(policy, value_fn, optimizer, batch, hyper, rng, lr)
        if stats is None:
            stats = {"policy_loss": float("nan"), "value_loss": float("nan"),
                     "entropy": policy.entropy(), "clip_fraction": 0.0,
                     "approx_kl": float("nan")}

        if finished_returns:
            last_mean = (float(np.mean(finished_returns)),
                         float(np.mean(finished_returns_ng)),
                         float(np.mean(finished_lens)))
            finished_returns.clear()
            finished_returns_ng.clear()
            finished_lens.clear()
        writer.writerow([global_step, repr(last_mean[0]), repr(last_mean[1]),
                         repr(last_mean[2]), repr(stats["policy_loss"]),
                         repr(stats["value_loss"]), repr(stats["entropy"]),
                         repr(stats["clip_fraction"]), repr(stats["approx_kl"]),
                         repr(lr), repr(curriculum)])
        metrics_file.flush()

        if save_checkpoint is not None and (
                (update + 1) % hyper.checkpoint_interval == 0):
            save_checkpoint(os.path.join(out_dir, f"checkpoint_{global_step}.bgap"),
                            policy, value_fn, global_step, rng)

    if save_checkpoint is not None:
        save_checkpoint(checkpoint_path, policy, value_fn, global_step, rng)
    metrics_file.close()
    return TrainResult(policy, value_fn, global_step, metrics_path, checkpoint_path)
