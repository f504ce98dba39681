"""Minimal 3-D rigid-body core: quaternion math, trunk integration, point contacts.

All functions are pure and operate on plain numpy arrays.  They broadcast over
an optional leading batch axis so the same kernels serve a single simulation
instance and a vectorized set of parallel environments.

Conventions: quaternions are (w, x, y, z) and map body to world; angular
velocity lives in the body frame; gravity is -9.81 m/s^2 along world z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81
DEFAULT_PHYSICS_DT = 0.002

FOOT_NAMES = ("FL", "FR", "RL", "RR")


# ---------------------------------------------------------------------------
# quaternion utilities
# ---------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b, broadcasting over leading axes."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Component-wise cross product of (..., 3) arrays (faster than np.cross)."""
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx],
                    axis=-1)


def _rotate(w, ux, uy, uz, v):
    vx, vy, vz = v[..., 0], v[..., 1], v[..., 2]
    tx = uy * vz - uz * vy
    ty = uz * vx - ux * vz
    tz = ux * vy - uy * vx
    rx = vx + 2.0 * (w * tx + uy * tz - uz * ty)
    ry = vy + 2.0 * (w * ty + uz * tx - ux * tz)
    rz = vz + 2.0 * (w * tz + ux * ty - uy * tx)
    return np.stack([rx, ry, rz], axis=-1)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v from body to world frame by quaternion(s) q."""
    return _rotate(q[..., 0], q[..., 1], q[..., 2], q[..., 3], v)


def quat_rotate_inverse(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v from world to body frame."""
    return _rotate(q[..., 0], -q[..., 1], -q[..., 2], -q[..., 3], v)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_exp_update(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """Integrate orientation by the exponential map of omega_body*dt.

    Returns a renormalized quaternion.
    """
    rot = np.asarray(omega_body) * dt
    angle = np.sqrt(np.sum(rot * rot, axis=-1, keepdims=True))
    half = 0.5 * angle
    # sinc form is well defined at angle -> 0
    small = angle < 1e-12
    k = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, angle))
    dq = np.concatenate([np.cos(half), k * rot], axis=-1)
    return quat_normalize(quat_multiply(q, dq))


def euler_angles(q: np.ndarray) -> np.ndarray:
    """ZYX (yaw-pitch-roll) Euler angles of a unit quaternion.

    Returns (..., 3) array ordered (roll, pitch, yaw); pitch is clamped into
    [-pi/2, pi/2] near the gimbal singularity.
    """
    q = np.asarray(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    sinp = np.clip(2.0 * (w * y - z * x), -1.0, 1.0)
    pitch = np.arcsin(sinp)
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return np.stack([roll, pitch, yaw], axis=-1)


# ---------------------------------------------------------------------------
# trunk state and integration
# ---------------------------------------------------------------------------

@dataclass
class TrunkState:
    """Pose and twist of the floating trunk body.

    position/linear_velocity are world-frame; angular_velocity is body-frame.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "TrunkState":
        return TrunkState(self.position.copy(), self.orientation.copy(),
                          self.linear_velocity.copy(), self.angular_velocity.copy())


class SimulationFault(RuntimeError):
    """Raised when the integrator receives or produces non-finite state."""

    def __init__(self, message: str, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


def step_trunk_arrays(position, orientation, linear_velocity, angular_velocity,
                      mass, inertia, net_force, net_torque, dt):
    """Semi-implicit Euler step of the free trunk, batched.

    net_force is world-frame (gravity added here), net_torque body-frame.
    Returns updated (position, orientation, linear_velocity, angular_velocity).
    """
    mass = np.asarray(mass, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    accel = net_force / mass[..., None] if mass.ndim else net_force / mass
    accel = accel + np.array([0.0, 0.0, -GRAVITY])
    new_v = linear_velocity + dt * accel

    # Euler's equations with diagonal body inertia
    iw = inertia * angular_velocity
    omega_dot = (net_torque - cross3(angular_velocity, iw)) / inertia
    new_w = angular_velocity + dt * omega_dot

    new_p = position + dt * new_v
    new_q = quat_exp_update(orientation, new_w, dt)
    return new_p, new_q, new_v, new_w


def step_trunk(state: TrunkState, mass: float, inertia: np.ndarray,
               net_force: np.ndarray, net_torque: np.ndarray,
               dt: float = DEFAULT_PHYSICS_DT) -> TrunkState:
    """Advance the trunk one physics step (velocities first, then pose)."""
    inputs = np.concatenate([state.position, state.orientation,
                             state.linear_velocity, state.angular_velocity,
                             np.atleast_1d(net_force).ravel(),
                             np.atleast_1d(net_torque).ravel()])
    if not np.all(np.isfinite(inputs)):
        raise SimulationFault("non-finite trunk state or wrench", snapshot=state.copy())
    p, q, v, w = step_trunk_arrays(state.position, state.orientation,
                                   state.linear_velocity, state.angular_velocity,
                                   np.asarray(mass, dtype=float), np.asarray(inertia, dtype=float),
                                   np.asarray(net_force, dtype=float),
                                   np.asarray(net_torque, dtype=float), dt)
    return TrunkState(p, q, v, w)


# ---------------------------------------------------------------------------
# point-foot contact model
# ---------------------------------------------------------------------------

@dataclass
class MaterialParams:
    """Ground contact material: friction cone plus spring-damper normal model."""

    friction_mu: float = 0.8
    normal_stiffness: float = 1.0e4
    normal_damping: float = 100.0
    tangential_damping: float = 100.0


@dataclass
class ContactPoint:
    foot_index: int
    world_position: np.ndarray
    penetration_depth: float
    normal_force: float
    tangential_force: np.ndarray
    in_contact: bool


def contact_force_arrays(foot_pos, foot_vel, surface_height, surface_velocity,
                         friction_mu, normal_stiffness, normal_damping,
                         tangential_damping):
    """Batched penalty contact: returns (normal_force, tangential_force, penetration).

    foot_pos/foot_vel have shape (..., 3); scalar-like args broadcast.
    Normal force is the clamped spring-damper response along world z, the
    tangential force is viscous and projected onto the friction cone.
    """
    foot_pos = np.asarray(foot_pos, dtype=float)
    foot_vel = np.asarray(foot_vel, dtype=float)
    penetration = np.asarray(surface_height - foot_pos[..., 2], dtype=float)
    in_contact = penetration > 0.0

    fn_raw = (normal_stiffness * penetration
              + normal_damping * (surface_velocity - foot_vel[..., 2]))
    fn = np.where(in_contact, np.maximum(0.0, fn_raw), 0.0)

    td = np.asarray(tangential_damping, dtype=float)
    ft = -(td[..., None] if td.ndim else td) * foot_vel[..., :2]
    ft_norm = np.sqrt(np.sum(ft * ft, axis=-1))
    cone = friction_mu * fn
    scale = np.where(ft_norm > cone, np.divide(cone, ft_norm, out=np.ones_like(ft_norm),
                                               where=ft_norm > 0.0), 1.0)
    ft = ft * scale[..., None]
    ft = np.where(in_contact[..., None] & (fn[..., None] > 0.0), ft, 0.0)
    fn = np.where(fn > 0.0, fn, 0.0)
    return fn, ft, penetration


def contact_force(foot_world_pos: np.ndarray, foot_world_vel: np.ndarray,
                  surface_height: float, surface_velocity: float,
                  mat: MaterialParams, foot_index: int = 0) -> ContactPoint:
    """Evaluate the contact model for one foot point."""
    fn, ft, pen = contact_force_arrays(
        np.asarray(foot_world_pos, dtype=float), np.asarray(foot_world_vel, dtype=float),
        surface_height, surface_velocity,
        mat.friction_mu, mat.normal_stiffness, mat.normal_damping,
        mat.tangential_damping)
    in_contact = bool(fn > 0.0)
    tangential = np.array([ft[0], ft[1], 0.0]) if in_contact else np.zeros(3)
    return ContactPoint(
        foot_index=foot_index,
        world_position=np.asarray(foot_world_pos, dtype=float).copy(),
        penetration_depth=float(max(pen, 0.0)),
        normal_force=float(fn),
        tangential_force=tangential,
        in_contact=in_contact,
    )
