"""Vectorized 50 Hz locomotion MDP on rigid or oscillating ground.

A single object steps n parallel robot instances with per-instance domain
randomization, command sampling, trunk pushes, sensor noise, termination and
episode bookkeeping.  All physics runs batched in numpy; results are
deterministic for a given seed regardless of batch size partitioning because
everything executes in a fixed sequential order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bridge as bridge_mod
from . import quadruped as quad
from . import rewards as rew
from . import simcore
from .simcore import quat_rotate, quat_rotate_inverse

OBS_DIM = 48
ACT_DIM = 12
OBS_LAYOUT_VERSION = 1

# fixed per-feature normalization for the policy/value inputs; observations
# themselves stay in raw physical units.  Joint velocities reach tens of
# rad/s, which would saturate the tanh layers without this.
OBS_SCALE = np.concatenate([
    np.full(3, 2.0),      # trunk linear velocity
    np.full(3, 0.25),     # trunk angular velocity
    np.full(3, 1.0),      # projected gravity
    [2.0, 2.0, 0.25],     # command
    np.full(12, 1.0),     # q - q_nominal
    np.full(12, 0.05),    # joint velocity
    np.full(12, 1.0),     # previous action
])

TERMINATION_REASONS = ("orientation", "height", "off-bridge", "diverged",
                       "time-limit", "crossed")


@dataclass
class NoiseScales:
    lin_vel: float = 0.1
    ang_vel: float = 0.2
    gravity: float = 0.05
    joint_pos: float = 0.01
    joint_vel: float = 1.5


@dataclass
class EnvConfig:
    condition: str = "nos"              # nos | eb | eg
    gait: str = "default"
    n_envs: int = 48
    episode_length_s: float = 20.0
    control_dt: float = 0.02
    decimation: int = 10
    action_scale: float = 0.25
    freq_range: tuple = (0.75, 7.5)
    command_range: float = 1.0
    zero_command_prob: float = 0.1
    command_resample_interval: tuple = (5.0, 10.0)
    push_interval: tuple = (5.0, 10.0)
    push_velocity_max: float = 0.5
    friction_range: tuple = (0.3, 1.5)
    stiffness_scale_range: tuple = (0.8, 1.2)
    pose_noise_joint: float = 0.05
    pose_noise_xy: float = 0.05
    pose_noise_base_vel: float = 0.0
    randomize: bool = True
    noise: NoiseScales = field(default_factory=NoiseScales)
    noise_enabled: bool = True
    amplitude_is_peak_to_peak: bool = False
    auto_reset: bool = True
    # evaluation scene: finite deck with fixed oscillation parameters
    eval_mode: bool = False
    eval_frequency: float = 2.0
    eval_amplitude: float = 0.0
    start_x: float = 0.0
    coefficients: rew.RewardCoefficients = field(default_factory=rew.RewardCoefficients)

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.decimation

    def validate(self) -> None:
        if self.condition not in rew.HEIGHT_STYLES:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.gait not in rew.GAITS:
            raise ValueError(f"unknown gait {self.gait!r}")
        if self.condition == "nos" and not self.eval_mode:
            pass  # amplitude is forced to zero below
        if self.decimation < 1 or self.n_envs < 1:
            raise ValueError("decimation and n_envs must be positive")


def scripted_operator(y: float, yaw: float, target_vx: float = 0.5,
                      k_y: float = 0.5, k_yaw: float = 1.0) -> np.ndarray:
    """Evaluation-time command source: constant forward speed plus
    proportional lateral/heading corrections, all clamped to [-1, 1]."""
    return np.clip(np.array([target_vx, -k_y * y, -k_yaw * yaw]), -1.0, 1.0)


class BridgeWalkEnv:
    """n parallel quadruped-on-bridge instances with a fixed 48-dim observation."""

    def __init__(self, config: EnvConfig, seed: int = 0,
                 model: quad.QuadrupedModel | None = None):
        config.validate()
        self.cfg = config
        self.n = config.n_envs
        self.base_model = model or quad.QuadrupedModel()
        self.q_nominal = self.base_model.q_nominal.copy()
        self.max_delay = 2
        self.curriculum_scale = 1.0
        self.obs_scale = OBS_SCALE
        self.max_steps = int(round(config.episode_length_s / config.control_dt))
        self.seed(seed)

    # -- seeding and per-env initialization ---------------------------------

    def seed(self, seed: int) -> None:
        self._seed = seed
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(self.n + 1)
        self.env_rngs = [np.random.Generator(np.random.PCG64(c)) for c in children[:self.n]]
        self.noise_rng = np.random.Generator(np.random.PCG64(children[self.n]))
        self._allocate()

    def _allocate(self) -> None:
        n = self.n
        self.pos = np.zeros((n, 3))
        self.quat = np.tile(simcore.quat_identity(), (n, 1))
        self.linvel = np.zeros((n, 3))
        self.angvel = np.zeros((n, 3))
        self.q = np.tile(self.q_nominal, (n, 1))
        self.qd = np.zeros((n, 12))
        self.prev_qd = np.zeros((n, 12))
        self.qdd = np.zeros((n, 12))
        self.tau = np.zeros((n, 12))
        # bridge per env
        self.bridge_z = np.zeros(n)
        self.bridge_v = np.zeros(n)
        self.bridge_omega = np.zeros(n)
        self.bridge_amp = np.zeros(n)
        self.bridge_freq = np.full(n, 2.0)
        self.bridge_b0 = np.full(n, bridge_mod.PEAK_SURFACE_HEIGHT)
        self.bridge_k = np.zeros(n)
        # randomized model params
        self.mass = np.full(n, self.base_model.trunk_mass)
        self.inertia = np.tile(self.base_model.trunk_inertia, (n, 1))
        self.com_offset = np.zeros((n, 3))
        self.kp = np.full(n, self.base_model.kp)
        self.kd = np.full(n, self.base_model.kd)
        self.delay = np.zeros(n, dtype=int)
        self.friction = np.full(n, 0.8)
        self.k_n = np.full(n, 1.0e4)
        self.d_n = np.full(n, 100.0)
        self.d_t = np.full(n, 100.0)
        # action pipeline
        self.action_queue = np.zeros((n, self.max_delay + 1, 12))
        self.prev_action = np.zeros((n, 12))
        self.applied_action = np.zeros((n, 12))
        # commands / schedules
        self.command = np.zeros((n, 3))
        self.t_next_command = np.zeros(n)
        self.t_next_push = np.zeros(n)
        # contact bookkeeping
        self.contacts = np.zeros((n, 4), dtype=bool)
        self.time_since_change = np.zeros((n, 4))
        self.last_air = np.zeros((n, 4))
        self.normal_forces = np.zeros((n, 4))
        self.tangential_forces = np.zeros((n, 4, 2))
        self.ep_time = np.zeros(n)
        self.ep_steps = np.zeros(n, dtype=int)

    def _reset_env(self, i: int) -> None:
        cfg = self.cfg
        rng = self.env_rngs[i]

        # bridge
        if cfg.eval_mode:
            f, amp = cfg.eval_frequency, cfg.eval_amplitude
        elif cfg.condition == "nos":
            f, amp = 2.0, 0.0
        else:
            f = rng.uniform(*cfg.freq_range)
            amp = rng.uniform(0.0, bridge_mod.max_amplitude(f))
        omega = 2.0 * np.pi * f
        phase = rng.uniform(0.0, 2.0 * np.pi) if amp > 0.0 else 0.0
        self.bridge_freq[i] = f
        self.bridge_amp[i] = amp
        self.bridge_omega[i] = omega if amp > 0.0 else 0.0
        self.bridge_z[i] = amp * np.cos(phase)
        self.bridge_v[i] = -amp * omega * np.sin(phase)
        self.bridge_b0[i] = bridge_mod.PEAK_SURFACE_HEIGHT - amp
        self.bridge_k[i] = bridge_mod.DEFAULT_MODAL_MASS * omega ** 2

        # model randomization
        if cfg.randomize:
            m = quad.randomize_model(self.base_model, rng)
            self.friction[i] = rng.uniform(*cfg.friction_range)
            self.k_n[i] = 1.0e4 * rng.uniform(*cfg.stiffness_scale_range)
        else:
            m = self.base_model
            self.friction[i] = 0.8
            self.k_n[i] = 1.0e4
        self.mass[i] = m.trunk_mass
        self.inertia[i] = m.trunk_inertia
        self.com_offset[i] = m.com_offset
        self.kp[i] = m.kp
        self.kd[i] = m.kd
        self.delay[i] = m.action_delay_steps
        self.d_n[i] = 100.0
        self.d_t[i] = 100.0

        # robot pose: nominal standing on the local surface with small noise
        q0 = self.q_nominal + rng.uniform(-cfg.pose_noise_joint,
                                          cfg.pose_noise_joint, size=12)
        self.q[i] = np.clip(q0, self.base_model.joint_lower, self.base_model.joint_upper)
        self.qd[i] = 0.0
        self.prev_qd[i] = 0.0
        self.qdd[i] = 0.0
        self.tau[i] = 0.0
        surface = self.bridge_b0[i] + self.bridge_z[i]
        xy = rng.uniform(-cfg.pose_noise_xy, cfg.pose_noise_xy, size=2)
        self.pos[i] = [cfg.start_x + xy[0], xy[1],
                       surface + self.base_model.nominal_height]
        self.quat[i] = simcore.quat_identity()
        v_xy = rng.uniform(-cfg.pose_noise_base_vel, cfg.pose_noise_base_vel, size=2)
        self.linvel[i] = [v_xy[0], v_xy[1], self.bridge_v[i]]
        self.angvel[i] = 0.0

        self.action_queue[i] = 0.0
        self.prev_action[i] = 0.0
        self.applied_action[i] = 0.0
        self.contacts[i] = True
        self.time_since_change[i] = 0.0
        self.last_air[i] = 0.0
        self.normal_forces[i] = 0.0
        self.tangential_forces[i] = 0.0
        self.ep_time[i] = 0.0
        self.ep_steps[i] = 0
        self._sample_command(i)
        self.t_next_push[i] = rng.uniform(*cfg.push_interval)

    def _sample_command(self, i: int) -> None:
        cfg = self.cfg
        rng = self.env_rngs[i]
        c = rng.uniform(-cfg.command_range, cfg.command_range, size=3)
        if rng.uniform() < cfg.zero_command_prob:
            c[:] = 0.0
        self.command[i] = c
        self.t_next_command[i] = self.ep_time[i] + rng.uniform(
            *cfg.command_resample_interval)

    # -- surfaces ------------------------------------------------------------

    def _surface(self, x, y):
        """Surface height and vertical velocity under world points (n,...)."""
        h = self.bridge_b0[:, None] + self.bridge_z[:, None] if np.ndim(x) > 1 \
            else self.bridge_b0 + self.bridge_z
        v = np.broadcast_to(self.bridge_v[:, None] if np.ndim(x) > 1 else self.bridge_v,
                            np.shape(x)).copy()
        h = np.broadcast_to(h, np.shape(x)).copy()
        if self.cfg.eval_mode:
            off = ((x < 0.0) | (x > bridge_mod.BRIDGE_LENGTH)
                   | (np.abs(y) > 0.5 * bridge_mod.BRIDGE_WIDTH))
            h[off] = bridge_mod.PEAK_SURFACE_HEIGHT
            v[off] = 0.0
        return h, v

    # -- public API ----------------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
        for i in range(self.n):
            self._reset_env(i)
        return self._observation()

    def set_curriculum_scale(self, scale: float) -> None:
        self.curriculum_scale = float(np.clip(scale, 0.0, 1.0))

    def step(self, actions: np.ndarray):
        """Advance one 50 Hz control step (decimation physics sub-steps).

        Returns (obs, reward_total, terminated, truncated, info).
        """
        cfg = self.cfg
        actions = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
        if not np.all(np.isfinite(actions)):
            raise ValueError("non-finite action")

        # action delay pipeline: newest at slot 0
        self.action_queue = np.roll(self.action_queue, 1, axis=1)
        self.action_queue[:, 0] = actions
        delayed = self.action_queue[np.arange(self.n), self.delay]
        self.applied_action = delayed
        q_target = self.q_nominal + cfg.action_scale * delayed

        dt = cfg.physics_dt
        for k in range(cfg.decimation):
            self._substep(q_target, dt, compute_tau=(k == cfg.decimation - 1))

        qd_ctrl = self.qd
        self.qdd = (qd_ctrl - self.prev_qd) / cfg.control_dt
        self.prev_qd = qd_ctrl.copy()

        self.ep_time += cfg.control_dt
        self.ep_steps += 1

        # contact timers at control rate
        contacts = self.normal_forces > 0.0
        changed = contacts != self.contacts
        touchdown = changed & contacts
        self.last_air = np.where(touchdown, self.time_since_change, self.last_air)
        self.time_since_change = np.where(changed, cfg.control_dt,
                                          self.time_since_change + cfg.control_dt)
        self.contacts = contacts

        breakdown = self._compute_rewards(actions)
        terminated, truncated, reasons = self._check_termination()

        # scheduled pushes and command resampling (after reward/termination)
        push_events = np.zeros(self.n, dtype=bool)
        for i in range(self.n):
            if terminated[i] or truncated[i]:
                continue
            rng = self.env_rngs[i]
            if self.ep_time[i] >= self.t_next_push[i]:
                speed = rng.uniform(0.0, cfg.push_velocity_max)
                ang = rng.uniform(0.0, 2.0 * np.pi)
                self.linvel[i, 0] += speed * np.cos(ang)
                self.linvel[i, 1] += speed * np.sin(ang)
                self.t_next_push[i] = self.ep_time[i] + rng.uniform(*cfg.push_interval)
                push_events[i] = True
            if self.ep_time[i] >= self.t_next_command[i]:
                self._sample_command(i)

        self.prev_action = actions.copy()

        info = {
            "reward_terms": breakdown.terms,
            "reward_weighted": breakdown.weighted,
            "reward_no_gait": rew.total_without_gait_terms(breakdown),
            "termination_reason": reasons,
            "push": push_events,
            "contacts": self.contacts.copy(),
            "normal_forces": self.normal_forces.copy(),
            "bridge_z": self.bridge_z.copy(),
            "bridge_v": self.bridge_v.copy(),
            "command": self.command.copy(),
            "tau": self.tau.copy(),
            "qd": self.qd.copy(),
        }

        done = terminated | truncated
        if np.any(done):
            info["terminal_observation"] = self._observation()
            if self.cfg.auto_reset:
                for i in np.flatnonzero(done):
                    self._reset_env(i)
        obs = self._observation()
        return obs, breakdown.total, terminated, truncated, info

    # -- internals -----------------------------------------------------------

    def _substep(self, q_target, dt, compute_tau=True):
        qd_new = quad.servo_rates(self.q, q_target, self.kp, self.kd)
        self.q = np.clip(self.q + dt * qd_new,
                         self.base_model.joint_lower, self.base_model.joint_upper)
        self.qd = qd_new

        pos, vel, feet_trunk = quad.foot_world_kinematics(
            self.pos, self.quat, self.linvel, self.angvel, self.q, self.qd,
            self.com_offset, self.base_model)
        surf_h, surf_v = self._surface(pos[..., 0], pos[..., 1])
        fn, ft, _ = simcore.contact_force_arrays(
            pos, vel, surf_h, surf_v,
            self.friction[:, None], self.k_n[:, None], self.d_n[:, None],
            self.d_t[:, None])
        self.normal_forces = fn
        self.tangential_forces = ft

        forces_w = np.concatenate([ft, fn[..., None]], axis=-1)  # (n,4,3)
        net_force = forces_w.sum(axis=1)
        r_world = pos - self.pos[:, None, :]
        torque_w = simcore.cross3(r_world, forces_w).sum(axis=1)
        torque_b = quat_rotate_inverse(self.quat, torque_w)

        if compute_tau:
            # stance torque report via Jacobian transpose; swing legs report PD
            jac = quad.leg_jacobians(self.q, self.base_model)
            forces_trunk = quat_rotate_inverse(self.quat[:, None, :], forces_w)
            tau_stance = quad.stance_torques(jac, forces_trunk).reshape(self.n, 12)
            tau_pd = np.clip(
                self.kp[:, None] * (q_target - self.q) - self.kd[:, None] * self.qd,
                -self.base_model.torque_limit, self.base_model.torque_limit)
            stance_mask = np.repeat(fn > 0.0, 3, axis=-1)
            self.tau = np.where(
                stance_mask,
                np.clip(tau_stance, -self.base_model.torque_limit,
                        self.base_model.torque_limit),
                tau_pd)

        self.pos, self.quat, self.linvel, self.angvel = simcore.step_trunk_arrays(
            self.pos, self.quat, self.linvel, self.angvel,
            self.mass, self.inertia, net_force, torque_b, dt)

        self.bridge_z, self.bridge_v = bridge_mod.step_bridge_arrays(
            self.bridge_z, self.bridge_v, self.bridge_omega, dt)

    def _compute_rewards(self, actions) -> rew.RewardBreakdown:
        euler = simcore.euler_angles(self.quat)
        yaw = euler[:, 2]
        cy, sy = np.cos(yaw), np.sin(yaw)
        vx = cy * self.linvel[:, 0] + sy * self.linvel[:, 1]
        vy = -sy * self.linvel[:, 0] + cy * self.linvel[:, 1]
        omega_world = quat_rotate(self.quat, self.angvel)

        height = rew.height_variable(
            self.cfg.condition, self.pos[:, 2], self.bridge_z, self.bridge_amp,
            self.bridge_k, self.mass, self.bridge_b0,
            amplitude_is_peak_to_peak=self.cfg.amplitude_is_peak_to_peak)

        feet_trunk = quad.forward_kinematics(self.q, self.base_model)
        knees_trunk = quad.knee_positions(self.q, self.base_model)
        r_knee = knees_trunk - self.com_offset[:, None, :]
        knees_w = self.pos[:, None, :] + quat_rotate(self.quat[:, None, :], r_knee)
        ksurf, _ = self._surface(knees_w[..., 0], knees_w[..., 1])
        knee_clear = knees_w[..., 2] - ksurf
        r_feet = feet_trunk - self.com_offset[:, None, :]
        feet_w = self.pos[:, None, :] + quat_rotate(self.quat[:, None, :], r_feet)
        n_coll = quad.self_collision_count_arrays(feet_w, knee_clear)

        terms = rew.compute_reward_terms(
            vel_xy=np.stack([vx, vy], axis=-1),
            cmd_xy=self.command[:, :2],
            yaw_rate=omega_world[:, 2],
            cmd_yaw=self.command[:, 2],
            vel_z=self.linvel[:, 2],
            omega_pitchroll=self.angvel[:, :2],
            theta_pitchroll=euler[:, :2],
            q=self.q,
            q_lower=self.base_model.joint_lower,
            q_upper=self.base_model.joint_upper,
            qdd=self.qdd,
            tau=self.tau,
            action=actions,
            prev_action=self.prev_action,
            n_collisions=n_coll,
            contacts=self.contacts,
            last_air_durations=self.last_air,
            height=height,
            nominal_height=self.base_model.nominal_height,
        )
        return rew.assemble_breakdown(terms, self.cfg.gait, self.contacts,
                                      self.cfg.coefficients, self.curriculum_scale)

    def _check_termination(self):
        euler = simcore.euler_angles(self.quat)
        surf, _ = self._surface(self.pos[:, 0], self.pos[:, 1])
        height = self.pos[:, 2] - surf

        finite = np.isfinite(self.pos).all(axis=1) & np.isfinite(self.linvel).all(axis=1) \
            & np.isfinite(self.quat).all(axis=1) & np.isfinite(self.q).all(axis=1)
        bad_orient = (np.abs(euler[:, 0]) > np.radians(60.0)) | \
            (np.abs(euler[:, 1]) > np.radians(60.0))
        low = height < 0.10

        terminated = ~finite | bad_orient | low
        reasons = [None] * self.n
        for i in range(self.n):
            if not finite[i]:
                reasons[i] = "diverged"
            elif bad_orient[i]:
                reasons[i] = "orientation"
            elif low[i]:
                reasons[i] = "height"

        truncated = np.zeros(self.n, dtype=bool)
        if self.cfg.eval_mode:
            off = np.abs(self.pos[:, 1]) > 0.5 * bridge_mod.BRIDGE_WIDTH
            for i in np.flatnonzero(off & ~terminated):
                reasons[i] = "off-bridge"
            terminated |= off
            crossed = self.pos[:, 0] > bridge_mod.BRIDGE_LENGTH
            for i in np.flatnonzero(crossed & ~terminated):
                reasons[i] = "crossed"
                truncated[i] = True

        timeout = self.ep_steps >= self.max_steps
        for i in np.flatnonzero(timeout & ~terminated & ~truncated):
            reasons[i] = "time-limit"
            truncated[i] = True
        return terminated, truncated & ~terminated, reasons

    def _observation(self) -> np.ndarray:
        linvel_b = quat_rotate_inverse(self.quat, self.linvel)
        grav_b = quat_rotate_inverse(self.quat, np.tile([0.0, 0.0, -1.0], (self.n, 1)))
        obs = np.concatenate([
            linvel_b, self.angvel, grav_b, self.command,
            self.q - self.q_nominal, self.qd, self.prev_action,
        ], axis=-1)
        if self.cfg.noise_enabled:
            s = self.cfg.noise
            scale = np.concatenate([
                np.full(3, s.lin_vel), np.full(3, s.ang_vel), np.full(3, s.gravity),
                np.zeros(3), np.full(12, s.joint_pos), np.full(12, s.joint_vel),
                np.zeros(12)])
            obs = obs + self.noise_rng.uniform(-1.0, 1.0, size=obs.shape) * scale
        return obs
