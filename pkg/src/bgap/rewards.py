"""Reward terms for bridge locomotion training.

Thirteen generic terms (velocity tracking, stability and effort penalties,
air time, base height, gait symmetry), three base-height styles for the
oscillating deck, and per-gait Boolean symmetry penalties.  All functions are
pure and broadcast over a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .simcore import GRAVITY

GAITS = ("default", "trot", "pace", "bound", "pronk", "free")
HEIGHT_STYLES = ("nos", "eb", "eg")

# foot order (FL, FR, RL, RR)
FL, FR, RL, RR = 0, 1, 2, 3

TERM_NAMES = (
    "xy_tracking", "yaw_tracking", "z_velocity", "pitchroll_velocity",
    "pitchroll_position", "joint_limits", "joint_accel", "joint_torque",
    "action_rate", "collisions", "air_time", "height", "symmetry",
)

# terms that keep full weight while the penalty curriculum ramps up
TRACKING_TERMS = ("xy_tracking", "yaw_tracking")


@dataclass
class RewardCoefficients:
    xy_tracking: float = 2.0
    yaw_tracking: float = 1.0
    z_velocity: float = 2.0
    pitchroll_velocity: float = 0.05
    pitchroll_position: float = 0.2
    joint_limits: float = 10.0
    joint_accel: float = 2.5e-7
    joint_torque: float = 2.0e-4
    action_rate: float = 0.01
    collisions: float = 1.0
    air_time: float = 0.1
    height: float = 30.0
    symmetry: float = 0.5

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RewardBreakdown:
    """Unweighted value of each term plus the coefficient-weighted total."""

    terms: dict
    weighted: dict
    total: float


def height_variable(style: str, com_z, bridge_z, amplitude, stiffness,
                    robot_mass, equilibrium_height,
                    amplitude_is_peak_to_peak: bool = False):
    """Base-height variable h(t) for the three training styles.

    nos: height above the equilibrium surface; eb: height above the moving
    surface; eg: height above equilibrium with the static-sag and mid-swing
    corrections g*m/k - A/2.
    """
    com_z = np.asarray(com_z, dtype=float)
    b0 = equilibrium_height
    if style == "nos":
        return com_z - b0
    if style == "eb":
        return com_z - b0 - bridge_z
    if style == "eg":
        amp = np.asarray(amplitude, dtype=float)
        if amplitude_is_peak_to_peak:
            amp = 2.0 * amp
        k = np.asarray(stiffness, dtype=float)
        sag = np.where(k > 0.0, GRAVITY * robot_mass / np.where(k > 0.0, k, 1.0), 0.0)
        return com_z - b0 + sag - amp / 2.0
    raise ValueError(f"unknown height style {style!r}")


def symmetry_penalty(gait: str, contacts):
    """Per-gait stance-pattern penalty (<= 0) from the four contact flags.

    contacts is (..., 4) Boolean in (FL, FR, RL, RR) order.
    """
    g = np.asarray(contacts).astype(bool)
    fl, fr, rl, rr = g[..., FL], g[..., FR], g[..., RL], g[..., RR]
    all_equal = (fr == fl) & (fr == rr) & (fr == rl)
    if gait == "default":
        pen = (~fr & ~fl).astype(float) + (~rr & ~rl).astype(float)
    elif gait == "trot":
        pen = (fr != rl).astype(float) + (fl != rr).astype(float) + all_equal.astype(float)
    elif gait == "pace":
        pen = (fr != rr).astype(float) + (fl != rl).astype(float) + all_equal.astype(float)
    elif gait == "bound":
        pen = (fr != fl).astype(float) + (rr != rl).astype(float) + all_equal.astype(float)
    elif gait == "pronk":
        pen = (~all_equal).astype(float)
    elif gait == "free":
        pen = np.zeros(np.shape(fl))
    else:
        raise ValueError(f"unknown gait {gait!r}")
    return -pen


def air_time_penalty(contacts, last_air_durations):
    """-sum_f g_f (g_f^T - 0.5): rewards air phases longer than 0.5 s."""
    g = np.asarray(contacts).astype(float)
    t_air = np.asarray(last_air_durations, dtype=float)
    return -np.sum(g * (t_air - 0.5), axis=-1)


def joint_limit_violations(q, q_lower, q_upper):
    """Joints outside the central 90% of their range (about the midpoint)."""
    q = np.asarray(q, dtype=float)
    mid = 0.5 * (q_lower + q_upper)
    half = 0.45 * (q_upper - q_lower)
    return np.sum((q < mid - half) | (q > mid + half), axis=-1).astype(float)


def compute_reward_terms(
        *, vel_xy, cmd_xy, yaw_rate, cmd_yaw, vel_z, omega_pitchroll,
        theta_pitchroll, q, q_lower, q_upper, qdd, tau, action, prev_action,
        n_collisions, contacts, last_air_durations, height, nominal_height):
    """Unweighted value of every generic term except symmetry.

    Velocity inputs must already be expressed in the yaw-aligned trunk frame.
    Returns a dict of arrays broadcast over the common batch shape.
    """
    vel_xy = np.asarray(vel_xy, dtype=float)
    cmd_xy = np.asarray(cmd_xy, dtype=float)
    err_xy = np.sum((vel_xy - cmd_xy) ** 2, axis=-1)
    err_yaw = (np.asarray(yaw_rate, dtype=float) - np.asarray(cmd_yaw, dtype=float)) ** 2
    terms = {
        "xy_tracking": np.exp(-err_xy / 0.25),
        "yaw_tracking": np.exp(-err_yaw / 0.25),
        "z_velocity": -np.asarray(vel_z, dtype=float) ** 2,
        "pitchroll_velocity": -np.sum(np.asarray(omega_pitchroll, dtype=float) ** 2, axis=-1),
        "pitchroll_position": -np.sum(np.asarray(theta_pitchroll, dtype=float) ** 2, axis=-1),
        "joint_limits": -joint_limit_violations(q, q_lower, q_upper),
        "joint_accel": -np.sum(np.asarray(qdd, dtype=float) ** 2, axis=-1),
        "joint_torque": -np.sum(np.asarray(tau, dtype=float) ** 2, axis=-1),
        "action_rate": -np.sum((np.asarray(action, dtype=float)
                                - np.asarray(prev_action, dtype=float)) ** 2, axis=-1),
        "collisions": -np.asarray(n_collisions, dtype=float),
        "air_time": air_time_penalty(contacts, last_air_durations),
        "height": -(np.asarray(height, dtype=float) - nominal_height) ** 2,
    }
    return terms


def assemble_breakdown(terms: dict, gait: str, contacts,
                       coeffs: RewardCoefficients,
                       curriculum_scale: float = 1.0) -> RewardBreakdown:
    """Weight the terms, apply the penalty curriculum, and total them.

    The two tracking terms always enter at full weight; every other term is
    scaled by curriculum_scale in [0, 1].
    """
    full = dict(terms)
    full["symmetry"] = symmetry_penalty(gait, contacts)
    weighted = {}
    total = 0.0
    cdict = coeffs.as_dict()
    for name in TERM_NAMES:
        w = cdict[name] * full[name]
        if name not in TRACKING_TERMS:
            w = w * curriculum_scale
        weighted[name] = w
        total = total + w
    return RewardBreakdown(terms=full, weighted=weighted, total=total)


def total_without_gait_terms(breakdown: RewardBreakdown):
    """Episode-return comparison metric: total minus the symmetry contribution."""
    return breakdown.total - breakdown.weighted["symmetry"]
