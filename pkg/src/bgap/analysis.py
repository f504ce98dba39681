"""Post-hoc gait and bridge-interaction analysis of logged trajectories.

Operates on trajectory tables logged at the 50 Hz control rate: stance-phase
classification and percentages, footfall interval extraction, step frequency,
CoM-vs-deck phase shift, mechanical power and foot-force statistics.
Foot order everywhere is (FL, FR, RL, RR).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOOT_ORDER = ("FL", "FR", "RL", "RR")
FL, FR, RL, RR = 0, 1, 2, 3

PHASE_COLUMNS = ("default", "trot", "pace", "bound", "pronk_g", "pronk_a")


@dataclass
class StanceLabel:
    default_ok: bool
    trot: bool
    pace: bool
    bound: bool
    pronk_ground: bool
    pronk_air: bool


def classify_stance_arrays(contacts) -> dict:
    """Label each step's contact configuration; contacts is (..., 4) Boolean."""
    g = np.asarray(contacts).astype(bool)
    fl, fr, rl, rr = g[..., FL], g[..., FR], g[..., RL], g[..., RR]
    all_on = fl & fr & rl & rr
    all_off = ~fl & ~fr & ~rl & ~rr
    return {
        "default": ~(~fr & ~fl) & ~(~rr & ~rl),
        "trot": (fr == rl) & (fl == rr) & (fr != fl),
        "pace": (fr == rr) & (fl == rl) & (fr != fl),
        "bound": (fr == fl) & (rr == rl) & (fr != rr),
        "pronk_g": all_on,
        "pronk_a": all_off,
    }


def classify_stance(contacts) -> StanceLabel:
    """StanceLabel for a single 4-flag contact configuration."""
    d = classify_stance_arrays(np.asarray(contacts).reshape(4))
    return StanceLabel(default_ok=bool(d["default"]), trot=bool(d["trot"]),
                       pace=bool(d["pace"]), bound=bool(d["bound"]),
                       pronk_ground=bool(d["pronk_g"]), pronk_air=bool(d["pronk_a"]))


def phase_percentages(contacts) -> dict:
    """Percentage of control steps carrying each stance label."""
    labels = classify_stance_arrays(contacts)
    n = np.asarray(contacts).shape[0]
    if n == 0:
        return {k: 0.0 for k in PHASE_COLUMNS}
    return {k: 100.0 * float(np.sum(labels[k])) / n for k in PHASE_COLUMNS}


def footfall_intervals(times, contacts) -> list:
    """Per-foot contiguous contact runs as (touchdown, liftoff) times.

    An interval still open at the end of the log is closed at the last sample.
    """
    times = np.asarray(times, dtype=float)
    g = np.asarray(contacts).astype(bool)
    out = []
    for f in range(4):
        col = g[:, f]
        intervals = []
        start = None
        for t, on in zip(times, col):
            if on and start is None:
                start = t
            elif not on and start is not None:
                intervals.append((start, t))
                start = None
        if start is not None:
            intervals.append((start, times[-1]))
        out.append(intervals)
    return out


def step_frequency(times, contacts) -> float:
    """Mean touchdown rate per foot (Hz), averaged over the four feet."""
    times = np.asarray(times, dtype=float)
    g = np.asarray(contacts).astype(bool)
    duration = times[-1] - times[0] if len(times) > 1 else 0.0
    if duration <= 0.0:
        return 0.0
    rates = []
    for f in range(4):
        col = g[:, f].astype(int)
        touchdowns = np.sum(np.diff(col) == 1)
        rates.append(touchdowns / duration)
    return float(np.mean(rates))


def phase_shift(series_a, series_b, f: float, rate: float):
    """Phase of series_a relative to series_b at frequency f, in (-pi, pi].

    Both series are mean-removed and projected onto the complex exponential at
    f; the result is the angle of the cross-spectrum (equivalently, the phase
    of the cross-correlation peak at that frequency).  Returns None when
    either series carries no energy at f (e.g. a non-oscillating deck).
    """
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    a = a - a.mean()
    b = b - b.mean()
    t = np.arange(len(a)) / rate
    probe = np.exp(-2j * np.pi * f * t)
    ca = np.sum(a * probe)
    cb = np.sum(b * probe[:len(b)])
    rms_a = np.sqrt(np.mean(a * a))
    rms_b = np.sqrt(np.mean(b * b))
    if rms_a < 1e-12 or rms_b < 1e-12 or \
            abs(ca) < 1e-6 * len(a) * rms_a or abs(cb) < 1e-6 * len(b) * rms_b:
        return None
    shift = np.angle(ca) - np.angle(cb)
    return float(np.arctan2(np.sin(shift), np.cos(shift)))


def dominant_frequency(series, rate: float) -> float:
    """Frequency of the largest non-DC spectral component (Hz)."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    spec = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), d=1.0 / rate)
    spec[0] = 0.0
    return float(freqs[np.argmax(spec)])


def power_estimate(tau, qd, signed: bool = False) -> float:
    """Mean mechanical power (W): sum_i |tau_i qd_i| per step, averaged.

    With signed=True, negative work is dropped instead of rectified.
    """
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    qd = np.atleast_2d(np.asarray(qd, dtype=float))
    p = tau * qd
    per_step = np.sum(np.maximum(p, 0.0), axis=-1) if signed \
        else np.sum(np.abs(p), axis=-1)
    return float(np.mean(per_step)) if per_step.size else 0.0


def force_stats(normal_forces, contacts=None) -> dict:
    """Per-foot and aggregate (mean, std) of foot normal forces.

    'stance' statistics mask out swing samples (zero-load feet); the
    'all' variant keeps every sample.  Empty stance sets report None.
    """
    forces = np.asarray(normal_forces, dtype=float)
    if contacts is None:
        contacts = forces > 0.0
    contacts = np.asarray(contacts).astype(bool)

    def _ms(x):
        if x.size == 0:
            return None, None
        return float(np.mean(x)), float(np.std(x))

    per_foot_stance = []
    per_foot_all = []
    for f in range(4):
        per_foot_stance.append(_ms(forces[contacts[:, f], f]))
        per_foot_all.append(_ms(forces[:, f]))
    agg_stance = _ms(forces[contacts])
    agg_all = _ms(forces.ravel())
    return {
        "per_foot_stance": per_foot_stance,
        "per_foot_all": per_foot_all,
        "aggregate_stance": agg_stance,
        "aggregate_all": agg_all,
    }
