"""Drop the quadruped on rigid ground and watch it settle.

The trunk is a 15 kg rigid body; the legs are massless kinematic chains with
position-servoed joints, and each point foot pushes back through a penalty
spring-damper contact.  Held at the nominal crouch, the robot should settle
just below 0.325 m with the four feet together carrying its weight.

Run:  python3 demos/02_standing_robot.py
"""

import numpy as np

from bgap import quadruped, simcore
from bgap.env import BridgeWalkEnv, EnvConfig

model = quadruped.QuadrupedModel()
print("=== nominal pose ===")
print("q_nominal per leg:", np.round(model.q_nominal[:3], 6))
feet = quadruped.forward_kinematics(model.q_nominal[None], model)[0]
for name, foot in zip(simcore.FOOT_NAMES, feet):
    print(f"  {name}: foot at {np.round(foot, 4)} (trunk frame)")
print("foot height below trunk:", feet[0, 2], "m")

print()
print("=== settling from a 1 cm drop ===")
cfg = EnvConfig(n_envs=1, randomize=False, noise_enabled=False,
                push_velocity_max=0.0, pose_noise_joint=0.0, pose_noise_xy=0.0,
                zero_command_prob=0.0, auto_reset=False)
env = BridgeWalkEnv(cfg, seed=0)
env.reset()
env.pos[0, 2] += 0.01
env.command[:] = 0.0
env.t_next_command[:] = np.inf

print("   t    height   sum Fn    contacts")
for i in range(1, 251):
    _, _, terminated, truncated, info = env.step(np.zeros((1, 12)))
    if i % 25 == 0:
        surf, _ = env._surface(env.pos[:1, 0], env.pos[:1, 1])
        height = env.pos[0, 2] - surf[0]
        fn = float(np.sum(info["normal_forces"][0]))
        print(f"{i * 0.02:5.2f}  {height:.4f}  {fn:7.2f}  "
              f"{info['contacts'][0].astype(int)}")

weight = env.mass[0] * simcore.GRAVITY
print(f"\nweight m*g = {weight:.2f} N; the contact forces carry it at rest")

print()
print("=== stance torques from a foot force ===")
# a pure downward reaction F on one foot maps to joint torques tau = J^T (-F)
q_leg = model.q_nominal[:3]
J = quadruped.leg_jacobian(q_leg)
tau = J.T @ np.array([0.0, 0.0, weight / 4.0])
print("per-joint torque for one foot carrying a quarter weight:",
      np.round(tau, 3), "N*m (limit", model.torque_limit, "N*m)")
