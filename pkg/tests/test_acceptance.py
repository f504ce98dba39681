"""Acceptance gate: one test per release criterion, each printing a
single PASS/FAIL line.

The two training criteria (09, 10) run real PPO training and together take
roughly half an hour; everything else completes in seconds.  Run just the
fast ones with:

    pytest tests/test_acceptance.py -k "not training"
"""

import itertools
import math
import time

import numpy as np
import pytest

from bgap import analysis, bridge, evaluation, ppo, rewards, simcore
from bgap.env import BridgeWalkEnv, EnvConfig


def _verdict(num: int, description: str, ok: bool) -> None:
    print(f"ACCEPTANCE {num:02d} {description}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"acceptance criterion {num} failed: {description}"


# ---------------------------------------------------------------------------
# 01: bridge eigenfrequency from simulated zero crossings
# ---------------------------------------------------------------------------

def _measured_period(freq: float, seconds: float = 10.0, dt: float = 0.002) -> float:
    params = bridge.BridgeParams(frequency_f=freq, amplitude_A=bridge.max_amplitude(freq))
    state = bridge.init_state(params, phase=0.3)
    crossings = []
    t = 0.0
    prev = state.displacement_zb
    for _ in range(int(seconds / dt)):
        state = bridge.step_bridge(state, dt)
        t += dt
        if prev < 0.0 <= state.displacement_zb:
            # linear interpolation between the bracketing samples
            frac = -prev / (state.displacement_zb - prev)
            crossings.append(t - dt + frac * dt)
        prev = state.displacement_zb
    return float(np.mean(np.diff(crossings)))


def test_01_bridge_period_matches_configured_frequency():
    ok = True
    for freq in (0.75, 2.0, 7.5):
        period = _measured_period(freq)
        ok = ok and abs(period - 1.0 / freq) <= 0.01 / freq
    assert abs(_measured_period(2.0) - 0.5) <= 0.005
    _verdict(1, "simulated bridge period within 1% of 1/f (incl. 0.500 s at 2 Hz)", ok)


# ---------------------------------------------------------------------------
# 02: peak deck acceleration at the amplitude cap
# ---------------------------------------------------------------------------

def test_02_peak_acceleration_at_amplitude_cap():
    rng = np.random.default_rng(0)
    dt = 0.002
    ok = True
    for _ in range(100):
        f = rng.uniform(0.75, 7.5)
        params = bridge.BridgeParams(frequency_f=f, amplitude_A=bridge.max_amplitude(f))
        state = bridge.init_state(params, phase=rng.uniform(0.0, 2.0 * np.pi))
        peak = 0.0
        for _ in range(int(np.ceil(1.0 / (f * dt))) + 1):
            peak = max(peak, abs(state.acceleration))
            state = bridge.step_bridge(state, dt)
        ok = ok and 9.71 <= peak <= 9.91
    _verdict(2, "peak |deck accel| in [9.71, 9.91] m/s^2 for 100 sampled f at A_max", ok)


# ---------------------------------------------------------------------------
# 03: reward terms to 1e-9 and the full gait/stance penalty table
# ---------------------------------------------------------------------------

def _expected_symmetry(gait, fl, fr, rl, rr):
    """Penalty truth table written directly from the stance-pattern rules."""
    same = fl == fr == rl == rr
    if gait == "default":
        return -((not fr and not fl) + (not rr and not rl))
    if gait == "trot":
        return -((fr != rl) + (fl != rr) + same)
    if gait == "pace":
        return -((fr != rr) + (fl != rl) + same)
    if gait == "bound":
        return -((fr != fl) + (rr != rl) + same)
    if gait == "pronk":
        return -(not same)
    return 0.0  # free


def test_03_reward_terms_exact():
    terms = rewards.compute_reward_terms(
        vel_xy=[0.4, 0.1], cmd_xy=[0.5, 0.0], yaw_rate=1.2, cmd_yaw=0.2,
        vel_z=0.2, omega_pitchroll=[0.1, -0.2], theta_pitchroll=[0.05, 0.1],
        q=np.zeros(12), q_lower=np.full(12, -1.0), q_upper=np.full(12, 1.0),
        qdd=np.full(12, 10.0), tau=np.full(12, 2.0),
        action=np.full(12, 0.3), prev_action=np.full(12, 0.1),
        n_collisions=2.0, contacts=[1, 1, 0, 0],
        last_air_durations=[0.2, 0.8, 0.0, 0.0],
        height=0.30, nominal_height=0.325)
    expected = {
        "xy_tracking": math.exp(-(0.1 ** 2 + 0.1 ** 2) / 0.25),
        "yaw_tracking": math.exp(-(1.0 ** 2) / 0.25),
        "z_velocity": -0.04,
        "pitchroll_velocity": -(0.01 + 0.04),
        "pitchroll_position": -(0.0025 + 0.01),
        "joint_limits": 0.0,
        "joint_accel": -12.0 * 100.0,
        "joint_torque": -12.0 * 4.0,
        "action_rate": -12.0 * 0.04,
        "collisions": -2.0,
        "air_time": -((0.2 - 0.5) + (0.8 - 0.5)),
        "height": -(0.025 ** 2),
    }
    worst = max(abs(float(terms[k]) - v) for k, v in expected.items())

    # joint-limit indicator: central 90% of the range about the midpoint
    q = np.zeros(12)
    q[0], q[1] = 0.951, -0.951
    limits = rewards.joint_limit_violations(q, np.full(12, -1.0), np.full(12, 1.0))
    worst = max(worst, abs(float(limits) - 2.0))

    # weighted total equals the manual dot product with the default weights
    bd = rewards.assemble_breakdown(terms, "trot", [1, 1, 0, 0],
                                    rewards.RewardCoefficients())
    manual = sum(rewards.RewardCoefficients().as_dict()[name] * float(bd.terms[name])
                 for name in rewards.TERM_NAMES)
    worst = max(worst, abs(float(bd.total) - manual))

    table_ok = True
    for gait in rewards.GAITS:
        for fl, fr, rl, rr in itertools.product([0, 1], repeat=4):
            got = float(rewards.symmetry_penalty(gait, [fl, fr, rl, rr]))
            table_ok = table_ok and got == _expected_symmetry(gait, fl, fr, rl, rr)

    _verdict(3, "reward terms exact to 1e-9 and 16x6 stance-penalty table exact",
             worst < 1e-9 and table_ok)


# ---------------------------------------------------------------------------
# 04: GAE against a quadratic-time discounted-sum oracle
# ---------------------------------------------------------------------------

def _gae_reference(r, v, dones, bootstrap, gamma, lam):
    T = len(r)
    vals_next = np.append(v[1:], bootstrap)
    deltas = r + gamma * vals_next * (1.0 - dones) - v
    adv = np.zeros(T)
    for t in range(T):
        total, factor = 0.0, 1.0
        for k in range(t, T):
            total += factor * deltas[k]
            if dones[k]:
                break
            factor *= gamma * lam
        adv[t] = total
    return adv, adv + v


def test_04_gae_matches_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 33))
        r, v = rng.normal(size=T), rng.normal(size=T)
        dones = (rng.uniform(size=T) < 0.25).astype(float)
        bootstrap = rng.normal()
        gamma, lam = rng.uniform(0.9, 1.0), rng.uniform(0.8, 1.0)
        adv, ret = ppo.compute_gae(r, v, dones, bootstrap, gamma, lam)
        adv_ref, ret_ref = _gae_reference(r, v, dones, bootstrap, gamma, lam)
        worst = max(worst, np.max(np.abs(adv - adv_ref)), np.max(np.abs(ret - ret_ref)))
    _verdict(4, "GAE within 1e-9 of the discounted-sum oracle on 1000 sequences",
             worst < 1e-9)


# ---------------------------------------------------------------------------
# 05: analytic gradients vs central finite differences on a toy network
# ---------------------------------------------------------------------------

def test_05_gradient_finite_difference_check():
    rng = np.random.default_rng(2)
    policy = ppo.GaussianPolicy(4, 2, hidden=(8,), rng=rng, dtype=np.float64)
    value_fn = ppo.ValueFunction(4, hidden=(8,), rng=rng, dtype=np.float64)
    obs = rng.normal(size=(16, 4))
    actions = rng.normal(size=(16, 2))
    old_logp = policy.log_prob(policy.mean(obs), actions) + 0.1 * rng.normal(size=16)
    adv = rng.normal(size=16)
    returns = rng.normal(size=16)
    call = dict(clip=0.2, value_coef=0.5, entropy_coef=0.01)

    def loss():
        out, _, _, _ = ppo.ppo_loss_and_grads(policy, value_fn, obs, actions,
                                              old_logp, adv, returns, **call)
        return out

    _, _, pg, vg = ppo.ppo_loss_and_grads(policy, value_fn, obs, actions,
                                          old_logp, adv, returns, **call)
    params = policy.params() + value_fn.params()
    grads = pg + vg
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    eps = 1e-6
    worst = 0.0
    for flat_idx in rng.choice(int(offsets[-1]), size=100, replace=False):
        which = int(np.searchsorted(offsets, flat_idx, side="right")) - 1
        p = params[which].reshape(-1)
        g = grads[which].reshape(-1)
        i = int(flat_idx - offsets[which])
        orig = p[i]
        p[i] = orig + eps
        up = loss()
        p[i] = orig - eps
        down = loss()
        p[i] = orig
        fd = (up - down) / (2.0 * eps)
        worst = max(worst, abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8))
    _verdict(5, "100 sampled gradient entries within 1e-4 of finite differences",
             worst < 1e-4)


# ---------------------------------------------------------------------------
# 06: stance classifier truth table and exact phase accounting
# ---------------------------------------------------------------------------

def test_06_stance_classifier_and_phase_percentages():
    def reference(fl, fr, rl, rr):
        return {
            "default": not (fr == 0 and fl == 0) and not (rr == 0 and rl == 0),
            "trot": fr == rl and fl == rr and fr != fl,
            "pace": fr == rr and fl == rl and fr != fl,
            "bound": fr == fl and rr == rl and fr != rr,
            "pronk_g": bool(fl and fr and rl and rr),
            "pronk_a": not (fl or fr or rl or rr),
        }

    table_ok = True
    for fl, fr, rl, rr in itertools.product([0, 1], repeat=4):
        got = analysis.classify_stance_arrays(np.array([fl, fr, rl, rr]))
        ref = reference(fl, fr, rl, rr)
        table_ok = table_ok and all(bool(got[k]) == ref[k] for k in ref)

    rng = np.random.default_rng(3)
    contacts = rng.integers(0, 2, size=(5000, 4))
    pct = analysis.phase_percentages(contacts)
    labels = analysis.classify_stance_arrays(contacts)
    other = 100.0 * np.sum(~(labels["trot"] | labels["pace"] | labels["bound"])) \
        / len(contacts)
    total = pct["trot"] + pct["pace"] + pct["bound"] + other
    _verdict(6, "stance truth table exact and trot+pace+bound+other = 100%",
             table_ok and abs(total - 100.0) < 1e-9)


# ---------------------------------------------------------------------------
# 07: phase-shift estimator on a constructed 0.3 pi lag
# ---------------------------------------------------------------------------

def test_07_phase_shift_estimator():
    t = np.arange(int(10.0 * 50.0)) / 50.0
    deck = np.sin(2.0 * np.pi * 2.0 * t)
    com = np.sin(2.0 * np.pi * 2.0 * t - 0.3 * np.pi)
    shift = analysis.phase_shift(com, deck, 2.0, 50.0)
    _verdict(7, "recovered phase lag within 0.02 pi of the constructed 0.3 pi",
             abs(shift + 0.3 * np.pi) <= 0.02 * np.pi)


# ---------------------------------------------------------------------------
# 08: passive standing stability over a full episode
# ---------------------------------------------------------------------------

def test_08_zero_action_standing():
    cfg = EnvConfig(n_envs=1, randomize=False, noise_enabled=False,
                    push_velocity_max=0.0, pose_noise_joint=0.0,
                    pose_noise_xy=0.0, zero_command_prob=0.0, auto_reset=False)
    env = BridgeWalkEnv(cfg, seed=0)
    env.reset()
    env.command[:] = 0.0
    env.t_next_command[:] = np.inf
    fell = False
    heights = []
    for _ in range(1000):  # 20 s at 50 Hz
        _, _, terminated, truncated, _ = env.step(np.zeros((1, 12)))
        fell = fell or bool(terminated[0])
        surf, _ = env._surface(env.pos[:1, 0], env.pos[:1, 1])
        heights.append(float(env.pos[0, 2] - surf[0]))
        if terminated[0] or truncated[0]:
            break
    height_ok = len(heights) == 1000 and all(abs(h - 0.325) <= 0.02 for h in heights)
    _verdict(8, "zero-action policy stands 20 s at 0.325 +/- 0.02 m", not fell and height_ok)


# ---------------------------------------------------------------------------
# 09: smoke training run learns velocity tracking (slow)
# ---------------------------------------------------------------------------

def _random_baseline_return(seed: int = 0, episodes: int = 40) -> float:
    """Mean no-gait episode return of an untrained stochastic policy in the
    training distribution."""
    cfg = EnvConfig(n_envs=8, condition="nos", gait="default")
    env = BridgeWalkEnv(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    policy = ppo.GaussianPolicy(48, 12, rng=rng)
    obs = env.reset().astype(np.float32)
    returns = []
    acc = np.zeros(8)
    while len(returns) < episodes:
        action, _ = policy.sample(obs, rng)
        obs, _, terminated, truncated, info = env.step(action)
        obs = obs.astype(np.float32)
        acc += np.asarray(info["reward_no_gait"])
        for i in np.flatnonzero(terminated | truncated):
            returns.append(float(acc[i]))
            acc[i] = 0.0
    return float(np.mean(returns))


def _tracking_error(policy, seed: int = 1, seconds: float = 10.0) -> float:
    """Mean |body vx - 0.5| under a fixed forward command on rigid ground."""
    cfg = EnvConfig(n_envs=1, condition="nos", gait="default", randomize=False,
                    noise_enabled=False, push_velocity_max=0.0,
                    pose_noise_joint=0.0, pose_noise_xy=0.0,
                    zero_command_prob=0.0, auto_reset=False)
    env = BridgeWalkEnv(cfg, seed=seed)
    obs = env.reset()
    env.command[:] = [0.5, 0.0, 0.0]
    env.t_next_command[:] = np.inf
    obs[:, 9:12] = env.command
    errors = []
    for _ in range(int(seconds * 50.0)):
        action = policy.mean(obs.astype(np.float32))
        obs, _, terminated, truncated, _ = env.step(action)
        yaw = simcore.euler_angles(env.quat[0])[2]
        vx = np.cos(yaw) * env.linvel[0, 0] + np.sin(yaw) * env.linvel[0, 1]
        errors.append(abs(float(vx) - 0.5))
        if terminated[0] or truncated[0]:
            break
    return float(np.mean(errors))


@pytest.mark.training
def test_09_smoke_training_run(tmp_path):
    start = time.time()
    cfg = EnvConfig(n_envs=8, condition="nos", gait="default")
    env = BridgeWalkEnv(cfg, seed=0)
    hyper = ppo.PpoHyper(total_steps=2_000_000, n_envs=8)
    result = ppo.train(env, hyper, str(tmp_path / "smoke"), seed=0)
    elapsed = time.time() - start

    rows = np.genfromtxt(result.metrics_path, delimiter=",", names=True)
    steps = rows["global_step"]
    tail = rows["mean_return_no_gait_terms"][steps >= 0.9 * steps[-1]]
    trained_return = float(np.mean(tail))
    baseline = _random_baseline_return()
    vx_err = _tracking_error(result.policy)

    print(f"  trained no-gait return {trained_return:.1f}, "
          f"random baseline {baseline:.1f}, vx error {vx_err:.3f}, "
          f"{elapsed / 60.0:.1f} min")
    _verdict(9, "2M-step smoke run: return >= 3x random and |vx - 0.5| < 0.2 "
                "within 30 min",
             trained_return >= 3.0 * baseline and vx_err < 0.2
             and elapsed <= 30.0 * 60.0)


# ---------------------------------------------------------------------------
# 10: trained deck-aware policy locks CoM motion to the deck frequency (slow)
# ---------------------------------------------------------------------------

def _com_z_spectrum_peak(policy, rng=None, stochastic=False):
    """(episode steps, dominant CoM-z frequency) on the 2 Hz / 0.05 m deck."""
    cfg = evaluation.eval_env_config(frequency=2.0, amplitude=0.05, condition="eb")
    env = BridgeWalkEnv(cfg, seed=123)
    rows, totals = evaluation.run_episode(env, policy=policy, rng=rng,
                                          use_scripted_operator=True,
                                          stochastic=stochastic)
    if totals["steps"] < 250:  # fell too early for a meaningful spectrum
        return totals["steps"], None
    com_z = np.asarray(rows)[100:, evaluation.TRAJECTORY_COLUMNS.index("com_z")]
    return totals["steps"], analysis.dominant_frequency(com_z, 50.0)


@pytest.mark.training
def test_10_com_tracks_deck_frequency(tmp_path):
    cfg = EnvConfig(n_envs=8, condition="eb", gait="default")
    env = BridgeWalkEnv(cfg, seed=0)
    hyper = ppo.PpoHyper(total_steps=2_000_000, n_envs=8)
    result = ppo.train(env, hyper, str(tmp_path / "eb"), seed=0)

    steps, peak = _com_z_spectrum_peak(result.policy)
    rng = np.random.default_rng(7)
    untrained = ppo.GaussianPolicy(48, 12, rng=rng)
    rand_steps, rand_peak = _com_z_spectrum_peak(untrained, rng=rng, stochastic=True)

    trained_ok = peak is not None and 1.9 <= peak <= 2.1
    random_fails = rand_peak is None or not (1.9 <= rand_peak <= 2.1)
    print(f"  trained: {steps} steps, CoM-z peak {peak} Hz; "
          f"random: {rand_steps} steps, peak {rand_peak}")
    _verdict(10, "trained CoM-z spectrum peaks at 2.0 +/- 0.1 Hz, random policy "
                 "does not", trained_ok and random_fails)


# ---------------------------------------------------------------------------
# 11: bitwise training determinism for a fixed seed
# ---------------------------------------------------------------------------

def test_11_seeded_runs_byte_identical(tmp_path):
    def run(tag):
        cfg = EnvConfig(n_envs=8, condition="nos", gait="default")
        env = BridgeWalkEnv(cfg, seed=42)
        hyper = ppo.PpoHyper(total_steps=10_240, n_envs=8)
        result = ppo.train(env, hyper, str(tmp_path / tag), seed=42)
        with open(result.metrics_path, "rb") as fh:
            return fh.read()

    a, b = run("a"), run("b")
    _verdict(11, "two 10k-step runs with one seed produce byte-identical metrics",
             a == b and len(a) > 0)
