"""Tests of the vectorized 50 Hz MDP: resets, stepping, noise, termination."""

import numpy as np
import pytest
from scipy import stats as sstats

from bgap import bridge as bridge_mod
from bgap import simcore
from bgap.env import OBS_DIM, BridgeWalkEnv, EnvConfig, scripted_operator


def _quiet_config(**over):
    cfg = EnvConfig(n_envs=2, randomize=False, noise_enabled=False,
                    push_velocity_max=0.0, pose_noise_joint=0.0,
                    pose_noise_xy=0.0, zero_command_prob=0.0)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


# ---------------------------------------------------------------------------
# reset
# ---------------------------------------------------------------------------

def test_nos_condition_rigid_surface():
    env = BridgeWalkEnv(_quiet_config(), seed=0)
    env.reset()
    np.testing.assert_array_equal(env.bridge_amp, 0.0)
    h, v = env._surface(np.zeros(2), np.zeros(2))
    np.testing.assert_allclose(h, 1.05)
    np.testing.assert_array_equal(v, 0.0)


def test_reset_determinism():
    cfg = EnvConfig(n_envs=4)
    a = BridgeWalkEnv(cfg, seed=123).reset()
    b = BridgeWalkEnv(EnvConfig(n_envs=4), seed=123).reset()
    assert np.array_equal(a, b)


def test_observation_shape_and_layout():
    env = BridgeWalkEnv(_quiet_config(), seed=1)
    obs = env.reset()
    assert obs.shape == (2, OBS_DIM)
    # standing still: zero body velocities, gravity projects to -z
    np.testing.assert_allclose(obs[:, 0:3], 0.0, atol=1e-12)   # linear velocity
    np.testing.assert_allclose(obs[:, 3:6], 0.0, atol=1e-12)   # angular velocity
    np.testing.assert_allclose(obs[:, 6:9], np.tile([0.0, 0.0, -1.0], (2, 1)),
                               atol=1e-12)
    np.testing.assert_allclose(obs[:, 9:12], env.command, atol=1e-12)
    np.testing.assert_allclose(obs[:, 12:24], 0.0, atol=1e-12)  # q - q_nominal
    np.testing.assert_allclose(obs[:, 24:36], 0.0, atol=1e-12)  # joint velocity
    np.testing.assert_allclose(obs[:, 36:48], 0.0, atol=1e-12)  # previous action


def test_sampled_frequencies_uniform():
    cfg = EnvConfig(n_envs=1, condition="eb")
    env = BridgeWalkEnv(cfg, seed=2)
    samples = []
    for _ in range(2000):
        env._reset_env(0)
        samples.append(env.bridge_freq[0])
        assert 0.75 <= samples[-1] <= 7.5
        assert env.bridge_amp[0] <= bridge_mod.max_amplitude(samples[-1]) + 1e-12
    u = (np.asarray(samples) - 0.75) / (7.5 - 0.75)
    assert sstats.kstest(u, "uniform").pvalue > 0.01


def test_pose_noise_within_bounds():
    cfg = EnvConfig(n_envs=8, pose_noise_joint=0.05, pose_noise_xy=0.05,
                    randomize=False, noise_enabled=False)
    env = BridgeWalkEnv(cfg, seed=3)
    env.reset()
    assert np.all(np.abs(env.q - env.q_nominal) <= 0.05 + 1e-12)
    assert np.all(np.abs(env.pos[:, :2]) <= 0.05 + 1e-12)


def test_initial_base_velocity_noise():
    env = BridgeWalkEnv(_quiet_config(n_envs=16, pose_noise_base_vel=0.5), seed=4)
    env.reset()
    assert np.all(np.abs(env.linvel[:, :2]) <= 0.5 + 1e-12)
    assert np.any(np.abs(env.linvel[:, :2]) > 0.0)
    quiet = BridgeWalkEnv(_quiet_config(n_envs=16), seed=4)
    quiet.reset()
    assert np.array_equal(quiet.linvel[:, :2], np.zeros((16, 2)))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def test_zero_action_standing_long_horizon():
    cfg = _quiet_config(n_envs=1)
    env = BridgeWalkEnv(cfg, seed=4)
    env.reset()
    env.command[:] = 0.0
    env.t_next_command[:] = np.inf
    actions = np.zeros((1, 12))
    for _ in range(1000):
        obs, reward, terminated, truncated, info = env.step(actions)
        assert not terminated[0]
    # 20 s episode ends exactly at the time limit
    assert truncated[0]
    assert info["termination_reason"][0] == "time-limit"
    surf, _ = env._surface(env.pos[:, 0], env.pos[:, 1])
    # state arrays were auto-reset after truncation; info precedes the reset
    assert abs(env.pos[0, 2] - surf[0] - 0.325) < 0.02


def test_step_counts_and_simulation_time():
    cfg = _quiet_config()
    env = BridgeWalkEnv(cfg, seed=5)
    env.reset()
    for _ in range(10):
        env.step(np.zeros((2, 12)))
    np.testing.assert_allclose(env.ep_time, 0.2)
    np.testing.assert_array_equal(env.ep_steps, 10)


def test_step_determinism_across_batch_sizes():
    # env 0 of a 3-env batch matches a 1-env batch only per-seed streams are
    # independent; determinism is over repeated identical runs
    def run():
        env = BridgeWalkEnv(EnvConfig(n_envs=3), seed=6)
        obs = env.reset()
        out = [obs]
        rng = np.random.default_rng(0)
        for _ in range(50):
            obs, r, te, tr, _ = env.step(rng.uniform(-1, 1, size=(3, 12)))
            out.append(obs.copy())
            out.append(np.asarray(r).copy())
        return out

    a, b = run(), run()
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_action_clipping_and_delay_queue():
    cfg = _quiet_config(n_envs=1)
    env = BridgeWalkEnv(cfg, seed=7)
    env.reset()
    env.delay[:] = 2
    big = np.full((1, 12), 5.0)
    env.step(big)
    # the oversized action is clipped and still waiting in the delay queue
    np.testing.assert_array_equal(env.applied_action, 0.0)
    env.step(np.zeros((1, 12)))
    env.step(np.zeros((1, 12)))
    np.testing.assert_array_equal(env.applied_action, 1.0)


def test_nonfinite_action_rejected():
    env = BridgeWalkEnv(_quiet_config(), seed=8)
    env.reset()
    bad = np.zeros((2, 12))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        env.step(bad)


def test_observation_noise_bounded():
    cfg = EnvConfig(n_envs=4, randomize=False, pose_noise_joint=0.0,
                    pose_noise_xy=0.0, noise_enabled=True)
    env = BridgeWalkEnv(cfg, seed=9)
    clean_cfg = EnvConfig(n_envs=4, randomize=False, pose_noise_joint=0.0,
                          pose_noise_xy=0.0, noise_enabled=False)
    clean_env = BridgeWalkEnv(clean_cfg, seed=9)
    obs = env.reset()
    clean = clean_env.reset()
    s = cfg.noise
    scale = np.concatenate([
        np.full(3, s.lin_vel), np.full(3, s.ang_vel), np.full(3, s.gravity),
        np.zeros(3), np.full(12, s.joint_pos), np.full(12, s.joint_vel),
        np.zeros(12)])
    assert np.all(np.abs(obs - clean) <= scale + 1e-12)


# ---------------------------------------------------------------------------
# commands and pushes
# ---------------------------------------------------------------------------

def test_command_bounds_and_zero_fraction():
    cfg = EnvConfig(n_envs=1, zero_command_prob=0.1)
    env = BridgeWalkEnv(cfg, seed=10)
    env.reset()
    zeros = 0
    n = 20000
    for _ in range(n):
        env._sample_command(0)
        c = env.command[0]
        assert np.all(np.abs(c) <= 1.0)
        if np.all(c == 0.0):
            zeros += 1
    assert zeros / n == pytest.approx(0.1, abs=0.01)


def test_push_schedule_count():
    cfg = _quiet_config(n_envs=1, push_velocity_max=0.5,
                        episode_length_s=100.0)
    env = BridgeWalkEnv(cfg, seed=11)
    env.reset()
    env.t_next_command[:] = np.inf
    pushes = 0
    for _ in range(5000):  # 100 s
        _, _, term, trunc, info = env.step(np.zeros((1, 12)))
        pushes += int(info["push"][0])
        if term[0] or trunc[0]:
            break
    # push interval uniform in [5, 10] s -> between 10 and 20 events in 100 s
    assert 10 <= pushes <= 20


def test_push_changes_only_linear_velocity():
    env = BridgeWalkEnv(_quiet_config(n_envs=1, push_velocity_max=0.5), seed=12)
    env.reset()
    env.t_next_command[:] = np.inf
    env.t_next_push[:] = 0.0  # force a push on the next step
    _, _, _, _, info = env.step(np.zeros((1, 12)))
    assert info["push"][0]


# ---------------------------------------------------------------------------
# termination
# ---------------------------------------------------------------------------

def test_orientation_termination():
    env = BridgeWalkEnv(_quiet_config(n_envs=1), seed=13)
    env.reset()
    env.quat[0] = simcore.quat_from_axis_angle([0, 1, 0], np.radians(70.0))
    _, _, terminated, _, info = env.step(np.zeros((1, 12)))
    assert terminated[0]
    assert info["termination_reason"][0] == "orientation"


def test_low_height_termination():
    env = BridgeWalkEnv(_quiet_config(n_envs=1), seed=14)
    env.reset()
    env.pos[0, 2] = 1.05 + 0.05
    terminated, truncated, reasons = env._check_termination()
    assert terminated[0]
    assert reasons[0] == "height"


def test_eval_mode_off_bridge_termination():
    cfg = _quiet_config(n_envs=1, eval_mode=True, eval_amplitude=0.0,
                        start_x=0.5)
    env = BridgeWalkEnv(cfg, seed=15)
    env.reset()
    env.pos[0, 1] = 1.3
    _, _, terminated, _, info = env.step(np.zeros((1, 12)))
    assert terminated[0]
    assert info["termination_reason"][0] == "off-bridge"


def test_eval_mode_crossing_truncates():
    cfg = _quiet_config(n_envs=1, eval_mode=True, eval_amplitude=0.0,
                        start_x=13.0)
    env = BridgeWalkEnv(cfg, seed=16)
    env.reset()
    env.pos[0, 0] = 13.3
    _, _, terminated, truncated, info = env.step(np.zeros((1, 12)))
    assert not terminated[0]
    assert truncated[0]
    assert info["termination_reason"][0] == "crossed"


def test_exactly_one_termination_reason():
    env = BridgeWalkEnv(_quiet_config(n_envs=1), seed=17)
    env.reset()
    for _ in range(30):
        _, _, term, trunc, info = env.step(np.zeros((1, 12)))
        reason = info["termination_reason"][0]
        if term[0] or trunc[0]:
            assert reason in ("orientation", "height", "off-bridge",
                              "diverged", "time-limit", "crossed")
        else:
            assert reason is None


def test_config_validation():
    with pytest.raises(ValueError):
        EnvConfig(condition="wet").validate()
    with pytest.raises(ValueError):
        EnvConfig(gait="gallop").validate()
    with pytest.raises(ValueError):
        EnvConfig(n_envs=0).validate()


# ---------------------------------------------------------------------------
# scripted operator
# ---------------------------------------------------------------------------

def test_scripted_operator_centerline():
    np.testing.assert_allclose(scripted_operator(0.0, 0.0), [0.5, 0.0, 0.0])


def test_scripted_operator_lateral_gain():
    cmd = scripted_operator(0.5, 0.0)
    assert cmd[1] == pytest.approx(-0.25)


def test_scripted_operator_yaw_gain():
    cmd = scripted_operator(0.0, 0.2)
    assert cmd[2] == pytest.approx(-0.2)


def test_scripted_operator_clamped():
    cmd = scripted_operator(10.0, -10.0, target_vx=5.0)
    np.testing.assert_array_equal(cmd, [1.0, -1.0, 1.0])
