"""Evaluation rollouts: checkpointed policies on the finite bridge scene,
trajectory CSV logging, and return-vs-command sweeps."""

from __future__ import annotations

import csv

import numpy as np

from . import analysis, rewards as rew, simcore
from .env import BridgeWalkEnv, EnvConfig, scripted_operator

TRAJECTORY_COLUMNS = (
    ["time", "cmd_vx", "cmd_vy", "cmd_wyaw",
     "com_x", "com_y", "com_z", "vel_x", "vel_y", "vel_z",
     "roll", "pitch", "yaw"]
    + [f"q_{i}" for i in range(12)]
    + [f"qd_{i}" for i in range(12)]
    + [f"tau_{i}" for i in range(12)]
    + [f"contact_{n}" for n in analysis.FOOT_ORDER]
    + [f"force_{n}" for n in analysis.FOOT_ORDER]
    + ["bridge_z", "surface_h"]
    + [f"rew_{name}" for name in rew.TERM_NAMES]
    + ["rew_total"]
    + [f"act_{i}" for i in range(12)]
)


def eval_env_config(base: EnvConfig | None = None, frequency: float = 2.0,
                    amplitude: float = 0.0, gait: str = "default",
                    condition: str = "nos", episode_length_s: float = 60.0) -> EnvConfig:
    """Finite-bridge evaluation scene: fixed oscillation, no randomization."""
    cfg = base or EnvConfig()
    cfg.n_envs = 1
    cfg.eval_mode = True
    cfg.eval_frequency = frequency
    cfg.eval_amplitude = amplitude
    cfg.gait = gait
    cfg.condition = condition
    cfg.randomize = False
    cfg.noise_enabled = False
    cfg.push_velocity_max = 0.0
    cfg.pose_noise_joint = 0.0
    cfg.pose_noise_xy = 0.0
    cfg.start_x = 0.5
    cfg.auto_reset = False
    cfg.episode_length_s = episode_length_s
    return cfg


def run_episode(env: BridgeWalkEnv, policy=None, rng=None,
                use_scripted_operator: bool = False, target_vx: float = 0.5,
                stochastic: bool = False, log: bool = True):
    """Roll one episode of env (n_envs must be 1).

    policy=None walks on zero actions.  Returns (rows, totals) where rows are
    trajectory records (one per control step) and totals carries the episode
    return with and without gait-specific terms, length and end reason.
    """
    assert env.n == 1
    rng = rng or np.random.default_rng(0)
    obs = env.reset()
    env.t_next_command[:] = np.inf
    rows = []
    total = 0.0
    total_ng = 0.0
    steps = 0
    reason = "time-limit"
    for _ in range(env.max_steps + 1):
        if use_scripted_operator:
            euler = simcore.euler_angles(env.quat[0])
            env.command[0] = scripted_operator(env.pos[0, 1], euler[2],
                                               target_vx=target_vx)
        if policy is None:
            action = np.zeros((1, 12))
        elif stochastic:
            action, _ = policy.sample(obs.astype(policy.net.dtype), rng)
        else:
            action = policy.mean(obs.astype(policy.net.dtype))
        t = env.ep_time[0]
        obs, reward, terminated, truncated, info = env.step(action)
        total += float(reward[0])
        total_ng += float(info["reward_no_gait"][0])
        steps += 1
        if log:
            rows.append(_record_row(env, info, t, np.asarray(action)[0]))
        if terminated[0] or truncated[0]:
            reason = info["termination_reason"][0]
            break
    totals = {"return": total, "return_no_gait": total_ng,
              "steps": steps, "reason": reason}
    return rows, totals


def _record_row(env: BridgeWalkEnv, info, t: float, action) -> list:
    # state arrays reflect the post-step instant unless the env auto-reset;
    # info carries the step's own reward/contact data either way
    euler = simcore.euler_angles(env.quat[0])
    surf, _ = env._surface(env.pos[:1, 0], env.pos[:1, 1])
    terms = info["reward_weighted"]
    row = [t + env.cfg.control_dt,
           *info["command"][0],
           *env.pos[0], *env.linvel[0], *euler]
    row += list(env.q[0]) + list(info["qd"][0]) + list(info["tau"][0])
    row += [int(v) for v in info["contacts"][0]]
    row += list(info["normal_forces"][0])
    row += [float(info["bridge_z"][0]), float(surf[0])]
    row += [float(np.asarray(terms[name])[0]) for name in rew.TERM_NAMES]
    row += [float(sum(np.asarray(terms[name])[0] for name in rew.TERM_NAMES))]
    row += list(action)
    return row


def write_trajectory_csv(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(rows)


def read_trajectory_csv(path: str) -> dict:
    """Load a trajectory CSV into column-name -> float array."""
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    arr = np.asarray(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def contacts_from_columns(cols: dict) -> np.ndarray:
    return np.stack([cols[f"contact_{n}"] > 0.5 for n in analysis.FOOT_ORDER], axis=-1)


def forces_from_columns(cols: dict) -> np.ndarray:
    return np.stack([cols[f"force_{n}"] for n in analysis.FOOT_ORDER], axis=-1)


def joint_matrix(cols: dict, prefix: str) -> np.ndarray:
    return np.stack([cols[f"{prefix}_{i}"] for i in range(12)], axis=-1)


def return_sweep(policy, velocities, settings, episodes: int, seed: int = 0,
                 gait: str = "default", condition: str = "nos",
                 episode_length_s: float = 30.0):
    """Mean episode return (gait terms excluded) per (vx, bridge setting) cell.

    settings is a list of (label, frequency, amplitude).  Returns rows of
    (setting, vx, mean, standard error, episodes).
    """
    out = []
    for label, freq, amp in settings:
        for vx in velocities:
            returns = []
            for ep in range(episodes):
                cfg = eval_env_config(frequency=freq, amplitude=amp, gait=gait,
                                      condition=condition,
                                      episode_length_s=episode_length_s)
                env = BridgeWalkEnv(cfg, seed=seed + 1000 * ep)
                _, totals = run_episode(env, policy=policy,
                                        use_scripted_operator=True,
                                        target_vx=vx, log=False)
                returns.append(totals["return_no_gait"])
            if returns:
                mean = float(np.mean(returns))
                sem = float(np.std(returns) / np.sqrt(len(returns)))
            else:
                mean, sem = float("nan"), float("nan")
            out.append({"setting": label, "vx": float(vx), "mean_return": mean,
                        "sem": sem, "episodes": len(returns)})
    return out
