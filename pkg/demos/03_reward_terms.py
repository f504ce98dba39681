"""Tour of the reward shaping: 13 terms, 3 height styles, 6 gait penalties.

Run:  python3 demos/03_reward_terms.py
"""

import itertools

import numpy as np

from bgap import rewards

print("=== default coefficients ===")
for name, w in rewards.RewardCoefficients().as_dict().items():
    print(f"  {name:20s} {w:g}")

print()
print("=== velocity tracking is a Gaussian bump around the command ===")
for err in (0.0, 0.1, 0.25, 0.5, 1.0):
    vel = np.array([0.5 + err, 0.0])
    terms = rewards.compute_reward_terms(
        vel_xy=vel, cmd_xy=[0.5, 0.0], yaw_rate=0.0, cmd_yaw=0.0, vel_z=0.0,
        omega_pitchroll=[0.0, 0.0], theta_pitchroll=[0.0, 0.0],
        q=np.zeros(12), q_lower=np.full(12, -2.0), q_upper=np.full(12, 2.0),
        qdd=np.zeros(12), tau=np.zeros(12), action=np.zeros(12),
        prev_action=np.zeros(12), n_collisions=0, contacts=np.zeros(4),
        last_air_durations=np.zeros(4), height=0.325, nominal_height=0.325)
    print(f"  |vel error| = {err:4.2f}  ->  xy_tracking = "
          f"{float(terms['xy_tracking']):.4f}")

print()
print("=== the three height styles on a deck swinging at A = 5 cm ===")
# nos measures height above the equilibrium surface; eb rides the moving
# surface; eg corrects the equilibrium by the static sag and half amplitude
com_z, bridge_z = 1.30, 0.03
for style in rewards.HEIGHT_STYLES:
    h = rewards.height_variable(style, com_z, bridge_z, amplitude=0.05,
                                stiffness=1.579e6, robot_mass=15.0,
                                equilibrium_height=1.0)
    print(f"  {style}: h = {float(h):+.5f} m  (target 0.325)")

print()
print("=== per-gait stance penalties over all 16 contact patterns ===")
print("pattern (FL FR RL RR) | " + " | ".join(f"{g:>7s}" for g in rewards.GAITS))
for pattern in itertools.product([0, 1], repeat=4):
    row = [f"{int(rewards.symmetry_penalty(g, pattern)):+d}" for g in rewards.GAITS]
    print("        " + " ".join(map(str, pattern)) + "       | "
          + " | ".join(f"{v:>7s}" for v in row))

print()
print("=== curriculum: penalties ramp in, tracking never scales ===")
terms = rewards.compute_reward_terms(
    vel_xy=[0.5, 0.0], cmd_xy=[0.5, 0.0], yaw_rate=0.0, cmd_yaw=0.0, vel_z=0.3,
    omega_pitchroll=[0.2, 0.1], theta_pitchroll=[0.1, 0.0],
    q=np.zeros(12), q_lower=np.full(12, -2.0), q_upper=np.full(12, 2.0),
    qdd=np.full(12, 50.0), tau=np.full(12, 5.0), action=np.full(12, 0.2),
    prev_action=np.zeros(12), n_collisions=0, contacts=[1, 1, 0, 0],
    last_air_durations=[0.0, 0.3, 0.3, 0.0], height=0.30, nominal_height=0.325)
for scale in (0.0, 0.5, 1.0):
    bd = rewards.assemble_breakdown(terms, "trot", [1, 1, 0, 0],
                                    rewards.RewardCoefficients(),
                                    curriculum_scale=scale)
    print(f"  curriculum scale {scale:.1f}: total = {float(bd.total):+.4f} "
          f"(without gait terms {float(rewards.total_without_gait_terms(bd)):+.4f})")
