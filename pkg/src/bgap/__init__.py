"""Quadruped locomotion RL testbed on a harmonically oscillating bridge."""

from . import analysis, bridge, checkpoint, config, env, evaluation, ppo, \
    quadruped, rewards, simcore

__all__ = ["analysis", "bridge", "checkpoint", "config", "env", "evaluation",
           "ppo", "quadruped", "rewards", "simcore"]

__version__ = "0.1.0"
