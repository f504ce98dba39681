"""Reduced-order quadruped: rigid trunk, four massless 3-DoF position-servo legs.

Leg chain per foot: hip abduction about the trunk x-axis, then hip flexion and
knee about the leg-plane y-axis.  Feet are points; stance feet transmit ground
contact forces to the trunk and their joint torques are reported through the
Jacobian transpose.  Foot order everywhere is (FL, FR, RL, RR).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import simcore
from .simcore import quat_rotate, quat_rotate_inverse

# geometry defaults (Go2-class, config-overridable)
HIP_X = 0.1934
HIP_Y = 0.0465
HIP_OFFSET = 0.095
THIGH_LEN = 0.213
CALF_LEN = 0.213
NOMINAL_HEIGHT = 0.325

HIP_POSITIONS = np.array([
    [HIP_X, HIP_Y, 0.0],    # FL
    [HIP_X, -HIP_Y, 0.0],   # FR
    [-HIP_X, HIP_Y, 0.0],   # RL
    [-HIP_X, -HIP_Y, 0.0],  # RR
])
SIDE_SIGN = np.array([1.0, -1.0, 1.0, -1.0])

# per-leg (abduction, hip flexion, knee) limits
JOINT_LOWER = np.tile([-1.0472, -1.5708, -2.7227], 4)
JOINT_UPPER = np.tile([1.0472, 3.4907, -0.83776], 4)

TORQUE_LIMIT = 23.7
KP_DEFAULT = 25.0
KD_DEFAULT = 0.5
SERVO_RATE_LIMIT = 2.0 * np.pi * 4.0

FOOT_PAIR_MIN_DIST = 0.06


def nominal_joint_angles(lengths=(HIP_OFFSET, THIGH_LEN, CALF_LEN),
                         height: float = NOMINAL_HEIGHT) -> np.ndarray:
    """Standing pose with each foot directly below its hip at the given depth.

    Symmetric knee fold (q_knee = -2 q_hip) keeps the foot under the hip when
    thigh and calf lengths are equal.
    """
    _, lt, lc = lengths
    q_hip = np.arccos(np.clip(height / (lt + lc), -1.0, 1.0))
    return np.tile([0.0, q_hip, -2.0 * q_hip], 4)


@dataclass
class QuadrupedModel:
    trunk_mass: float = 15.0
    trunk_inertia: np.ndarray = field(
        default_factory=lambda: np.array([0.116, 0.18913, 0.26913]))
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hip_positions: np.ndarray = field(default_factory=lambda: HIP_POSITIONS.copy())
    link_lengths: tuple = (HIP_OFFSET, THIGH_LEN, CALF_LEN)
    joint_lower: np.ndarray = field(default_factory=lambda: JOINT_LOWER.copy())
    joint_upper: np.ndarray = field(default_factory=lambda: JOINT_UPPER.copy())
    torque_limit: float = TORQUE_LIMIT
    kp: float = KP_DEFAULT
    kd: float = KD_DEFAULT
    action_delay_steps: int = 0
    nominal_height: float = NOMINAL_HEIGHT
    q_nominal: np.ndarray = field(default_factory=nominal_joint_angles)


@dataclass
class JointState:
    q: np.ndarray = field(default_factory=nominal_joint_angles)
    qd: np.ndarray = field(default_factory=lambda: np.zeros(12))
    qdd: np.ndarray = field(default_factory=lambda: np.zeros(12))
    tau: np.ndarray = field(default_factory=lambda: np.zeros(12))


@dataclass
class FootTimers:
    """Per-foot contact bookkeeping for the air-time reward."""

    in_contact: np.ndarray = field(default_factory=lambda: np.ones(4, dtype=bool))
    time_since_change: np.ndarray = field(default_factory=lambda: np.zeros(4))
    last_air_duration: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def update(self, contacts: np.ndarray, dt: float) -> None:
        contacts = np.asarray(contacts, dtype=bool)
        changed = contacts != self.in_contact
        touchdown = changed & contacts
        self.last_air_duration = np.where(touchdown, self.time_since_change,
                                          self.last_air_duration)
        self.time_since_change = np.where(changed, dt, self.time_since_change + dt)
        self.in_contact = contacts


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def _leg_angles(q):
    q = np.asarray(q, dtype=float)
    qs = q.reshape(q.shape[:-1] + (4, 3))
    return qs[..., 0], qs[..., 1], qs[..., 2]


def forward_kinematics(q, model: QuadrupedModel | None = None) -> np.ndarray:
    """Foot positions in the trunk frame, shape (..., 4, 3)."""
    lh, lt, lc = (model.link_lengths if model else (HIP_OFFSET, THIGH_LEN, CALF_LEN))
    hips = model.hip_positions if model else HIP_POSITIONS
    qa, qh, qk = _leg_angles(q)
    px = -lt * np.sin(qh) - lc * np.sin(qh + qk)
    py0 = SIDE_SIGN * lh
    pz0 = -lt * np.cos(qh) - lc * np.cos(qh + qk)
    py = py0 * np.cos(qa) - pz0 * np.sin(qa)
    pz = py0 * np.sin(qa) + pz0 * np.cos(qa)
    return hips + np.stack([px, py, pz], axis=-1)


def leg_jacobians(q, model: QuadrupedModel | None = None) -> np.ndarray:
    """Per-leg foot Jacobians d(foot)/d(q_leg), shape (..., 4, 3, 3)."""
    lh, lt, lc = (model.link_lengths if model else (HIP_OFFSET, THIGH_LEN, CALF_LEN))
    qa, qh, qk = _leg_angles(q)
    py0 = SIDE_SIGN * lh
    pz0 = -lt * np.cos(qh) - lc * np.cos(qh + qk)
    py = py0 * np.cos(qa) - pz0 * np.sin(qa)
    pz = py0 * np.sin(qa) + pz0 * np.cos(qa)

    dpx_h = -lt * np.cos(qh) - lc * np.cos(qh + qk)
    dpz0_h = lt * np.sin(qh) + lc * np.sin(qh + qk)
    dpx_k = -lc * np.cos(qh + qk)
    dpz0_k = lc * np.sin(qh + qk)

    zero = np.zeros_like(qa)
    col_a = np.stack([zero, -pz, py], axis=-1)
    col_h = np.stack([dpx_h, -dpz0_h * np.sin(qa), dpz0_h * np.cos(qa)], axis=-1)
    col_k = np.stack([dpx_k, -dpz0_k * np.sin(qa), dpz0_k * np.cos(qa)], axis=-1)
    return np.stack([col_a, col_h, col_k], axis=-1)


def leg_jacobian(q_leg, side: float = 1.0,
                 lengths=(HIP_OFFSET, THIGH_LEN, CALF_LEN)) -> np.ndarray:
    """3x3 Jacobian of a single leg (abduction, hip, knee)."""
    q12 = np.tile(np.asarray(q_leg, dtype=float), 4)
    idx = 0 if side > 0 else 1
    return leg_jacobians(q12)[idx]


class ReachError(ValueError):
    """Foot target outside the kinematic workspace."""


def inverse_kinematics_leg(target, leg_index: int,
                           model: QuadrupedModel | None = None) -> np.ndarray:
    """Joint angles (abduction, hip, knee) placing the foot at a trunk-frame target.

    Knee-back branch (knee angle <= 0).  Raises ReachError when the point is
    outside the workspace.
    """
    lh, lt, lc = (model.link_lengths if model else (HIP_OFFSET, THIGH_LEN, CALF_LEN))
    hips = model.hip_positions if model else HIP_POSITIONS
    side = SIDE_SIGN[leg_index]
    rel = np.asarray(target, dtype=float) - hips[leg_index]
    x, y, z = rel

    r2 = y * y + z * z
    if r2 < lh * lh - 1e-12:
        raise ReachError("target inside the hip-offset cylinder")
    pz0 = -np.sqrt(max(r2 - lh * lh, 0.0))
    py0 = side * lh
    qa = np.arctan2(z, y) - np.arctan2(pz0, py0)
    qa = np.arctan2(np.sin(qa), np.cos(qa))

    L2 = x * x + pz0 * pz0
    cos_qk = (L2 - lt * lt - lc * lc) / (2.0 * lt * lc)
    if cos_qk > 1.0 + 1e-9 or cos_qk < -1.0 - 1e-9:
        raise ReachError("planar target out of reach")
    qk = -np.arccos(np.clip(cos_qk, -1.0, 1.0))
    qh = np.arctan2(-x, -pz0) - np.arctan2(lc * np.sin(qk), lt + lc * np.cos(qk))
    return np.array([qa, qh, qk])


# ---------------------------------------------------------------------------
# actuation and leg closure
# ---------------------------------------------------------------------------

def pd_torques(q, qd, q_target, model: QuadrupedModel,
               kp=None, kd=None) -> np.ndarray:
    """Position-servo torques clamped to the actuator limit."""
    kp = model.kp if kp is None else kp
    kd = model.kd if kd is None else kd
    tau = kp * (np.asarray(q_target) - np.asarray(q)) - kd * np.asarray(qd)
    return np.clip(tau, -model.torque_limit, model.torque_limit)


def servo_rates(q, q_target, kp, kd, rate_limit: float = SERVO_RATE_LIMIT):
    """First-order servo joint rates, clamped to the slew limit."""
    kp = np.asarray(kp, dtype=float)
    kd = np.asarray(kd, dtype=float)
    gain = kp / kd
    while gain.ndim and gain.ndim < np.ndim(q):
        gain = gain[..., None]
    return np.clip(gain * (np.asarray(q_target) - np.asarray(q)),
                   -rate_limit, rate_limit)


def foot_world_kinematics(trunk_pos, trunk_quat, trunk_linvel, trunk_angvel_body,
                          q, qd, model_com_offset, model: QuadrupedModel | None = None):
    """World positions and velocities of the four feet, batched.

    trunk_pos is the CoM position; foot lever arms are corrected by the CoM
    offset of the (possibly randomized) model.
    Returns (positions (...,4,3), velocities (...,4,3), feet_trunk (...,4,3)).
    """
    feet_trunk = forward_kinematics(q, model)
    r = feet_trunk - np.asarray(model_com_offset)[..., None, :]
    pos = np.asarray(trunk_pos)[..., None, :] + quat_rotate(
        np.asarray(trunk_quat)[..., None, :], r)
    jac = leg_jacobians(q, model)
    qd_legs = np.asarray(qd).reshape(np.shape(qd)[:-1] + (4, 3))
    v_rel = np.einsum('...ij,...j->...i', jac, qd_legs)
    omega = np.asarray(trunk_angvel_body)[..., None, :]
    v_body = simcore.cross3(omega, r) + v_rel
    vel = np.asarray(trunk_linvel)[..., None, :] + quat_rotate(
        np.asarray(trunk_quat)[..., None, :], v_body)
    return pos, vel, feet_trunk


def stance_torques(jacobians, contact_forces_trunk) -> np.ndarray:
    """tau = J^T (-F) per leg; forces given in the trunk frame, shape (...,4,3)."""
    return np.einsum('...ji,...j->...i', jacobians, -np.asarray(contact_forces_trunk))


def resolve_leg_dynamics(model: QuadrupedModel, trunk: simcore.TrunkState,
                         q, qd, q_target, surface_height, surface_velocity,
                         mat: simcore.MaterialParams, dt: float):
    """One leg/contact closure step for a single robot instance.

    Joints follow the rate-limited position servo; foot points then generate
    penalty contact forces which are applied to the trunk and mapped to stance
    joint torques through the Jacobian transpose.  Swing torques are the PD law.

    Returns (net_force world, net_torque body, q_new, qd_new, tau, contacts)
    where contacts is a list of ContactPoint.
    """
    qd_new = servo_rates(q, q_target, model.kp, model.kd)
    q_new = np.clip(np.asarray(q) + dt * qd_new, model.joint_lower, model.joint_upper)

    pos, vel, _ = foot_world_kinematics(
        trunk.position, trunk.orientation, trunk.linear_velocity,
        trunk.angular_velocity, q_new, qd_new, model.com_offset, model)
    contacts = [simcore.contact_force(pos[i], vel[i], surface_height,
                                      surface_velocity, mat, foot_index=i)
                for i in range(4)]

    force_world = np.zeros(3)
    torque_body = np.zeros(3)
    forces_w = np.zeros((4, 3))
    for c in contacts:
        f = c.tangential_force + np.array([0.0, 0.0, c.normal_force])
        forces_w[c.foot_index] = f
        force_world += f
        r_world = c.world_position - trunk.position
        torque_body += quat_rotate_inverse(trunk.orientation, np.cross(r_world, f))

    jac = leg_jacobians(q_new, model)
    forces_trunk = quat_rotate_inverse(trunk.orientation[None, :], forces_w)
    tau_stance = stance_torques(jac, forces_trunk)
    tau_pd = pd_torques(q_new, qd_new, q_target, model)
    in_contact = np.array([c.in_contact for c in contacts])
    tau = np.where(np.repeat(in_contact, 3),
                   np.clip(tau_stance.reshape(12), -model.torque_limit,
                           model.torque_limit),
                   tau_pd)
    return force_world, torque_body, q_new, qd_new, tau, contacts


# ---------------------------------------------------------------------------
# randomization and collision proxy
# ---------------------------------------------------------------------------

@dataclass
class RandomizationRanges:
    mass_scale: tuple = (0.8, 1.2)
    inertia_scale: tuple = (0.8, 1.2)
    com_offset: tuple = (-0.03, 0.03)
    gain_scale: tuple = (0.9, 1.1)
    delay_choices: tuple = (0, 1, 2)


def randomize_model(model: QuadrupedModel, rng: np.random.Generator,
                    ranges: RandomizationRanges | None = None) -> QuadrupedModel:
    """Sample a perturbed copy of the model; deterministic for a given rng state."""
    r = ranges or RandomizationRanges()
    return replace(
        model,
        trunk_mass=model.trunk_mass * rng.uniform(*r.mass_scale),
        trunk_inertia=model.trunk_inertia * rng.uniform(*r.inertia_scale, size=3),
        com_offset=model.com_offset + rng.uniform(*r.com_offset, size=3),
        kp=model.kp * rng.uniform(*r.gain_scale),
        kd=model.kd * rng.uniform(*r.gain_scale),
        action_delay_steps=int(rng.choice(r.delay_choices)),
    )


def knee_positions(q, model: QuadrupedModel | None = None) -> np.ndarray:
    """Knee joint locations in the trunk frame, shape (..., 4, 3)."""
    lh, lt, _ = (model.link_lengths if model else (HIP_OFFSET, THIGH_LEN, CALF_LEN))
    hips = model.hip_positions if model else HIP_POSITIONS
    qa, qh, _ = _leg_angles(q)
    px = -lt * np.sin(qh)
    py0 = SIDE_SIGN * lh
    pz0 = -lt * np.cos(qh)
    py = py0 * np.cos(qa) - pz0 * np.sin(qa)
    pz = py0 * np.sin(qa) + pz0 * np.cos(qa)
    return hips + np.stack([px, py, pz], axis=-1)


def self_collision_count(q, foot_positions, knee_clearances=None) -> int:
    """Proxy self-collision count for one control step.

    Counts foot pairs closer than FOOT_PAIR_MIN_DIST plus any knee whose
    clearance above the local ground surface is negative.
    """
    feet = np.asarray(foot_positions, dtype=float)
    n = 0
    for i in range(4):
        for j in range(i + 1, 4):
            if np.linalg.norm(feet[i] - feet[j]) < FOOT_PAIR_MIN_DIST:
                n += 1
    if knee_clearances is not None:
        n += int(np.sum(np.asarray(knee_clearances) < 0.0))
    return n


def self_collision_count_arrays(foot_positions, knee_clearances) -> np.ndarray:
    """Batched collision proxy; foot_positions (...,4,3), knee_clearances (...,4)."""
    feet = np.asarray(foot_positions, dtype=float)
    n = np.zeros(feet.shape[:-2])
    for i in range(4):
        for j in range(i + 1, 4):
            d = np.linalg.norm(feet[..., i, :] - feet[..., j, :], axis=-1)
            n = n + (d < FOOT_PAIR_MIN_DIST)
    n = n + np.sum(np.asarray(knee_clearances) < 0.0, axis=-1)
    return n
