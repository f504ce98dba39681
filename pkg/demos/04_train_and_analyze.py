"""Train a small policy, roll it on the evaluation bridge, and analyze gait.

This is a scaled-down end-to-end pass: a short PPO run (about a minute),
then one logged episode on the finite deck and the full analysis toolkit on
the trajectory.  For a policy that actually walks, raise total_steps to the
2M default (about 20 minutes).

Run:  python3 demos/04_train_and_analyze.py
"""

import os
import tempfile

import numpy as np

from bgap import analysis, evaluation, ppo
from bgap.env import BridgeWalkEnv, EnvConfig

out_dir = tempfile.mkdtemp(prefix="bgap_demo_")
print(f"=== training (50k steps, 8 envs) -> {out_dir} ===")
env = BridgeWalkEnv(EnvConfig(n_envs=8, condition="nos", gait="default"), seed=0)
hyper = ppo.PpoHyper(total_steps=50_000, n_envs=8)
result = ppo.train(env, hyper, out_dir, seed=0)

rows = np.genfromtxt(result.metrics_path, delimiter=",", names=True)
print("  update   step    mean return   episode len")
idx = np.linspace(0, len(rows) - 1, 6).astype(int)
for i in idx:
    print(f"  {i:6d} {int(rows['global_step'][i]):7d}  "
          f"{rows['mean_return'][i]:12.2f}  {rows['episode_length'][i]:10.1f}")

print()
print("=== one logged episode on the finite deck (2 Hz, 5 cm) ===")
cfg = evaluation.eval_env_config(frequency=2.0, amplitude=0.05, condition="nos")
eval_env = BridgeWalkEnv(cfg, seed=1)
traj, totals = evaluation.run_episode(eval_env, policy=result.policy,
                                      use_scripted_operator=True)
print(f"  {totals['steps']} steps, return {totals['return']:.1f}, "
      f"ended by {totals['reason']}")

traj_path = os.path.join(out_dir, "trajectory.csv")
evaluation.write_trajectory_csv(traj_path, traj)
cols = evaluation.read_trajectory_csv(traj_path)
contacts = evaluation.contacts_from_columns(cols)

print()
print("=== gait analysis ===")
pct = analysis.phase_percentages(contacts)
print("  stance-phase percentages:",
      {k: round(v, 1) for k, v in pct.items()})
print(f"  step frequency: {analysis.step_frequency(cols['time'], contacts):.2f} Hz")

stats = analysis.force_stats(evaluation.forces_from_columns(cols), contacts)
mean, std = stats["aggregate_stance"]
if mean is not None:
    print(f"  stance normal force: {mean:.1f} +/- {std:.1f} N")

tau = evaluation.joint_matrix(cols, "tau")
qd = evaluation.joint_matrix(cols, "qd")
print(f"  mechanical power: {analysis.power_estimate(tau, qd):.1f} W")

shift = analysis.phase_shift(cols["com_z"], cols["bridge_z"], 2.0, 50.0)
if shift is None:
    print("  CoM/deck phase shift: absent (a signal has no 2 Hz component)")
else:
    print(f"  CoM/deck phase shift: {shift / np.pi:+.3f} pi rad")
print(f"  dominant CoM-z frequency: "
      f"{analysis.dominant_frequency(cols['com_z'], 50.0):.2f} Hz")
