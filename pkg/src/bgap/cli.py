"""Command-line operator surface: train / matrix / eval / analyze.

Exit codes: 0 success, 2 usage or config error, 3 data or shape error,
4 runtime divergence.  BGAP_SEED is used as the seed when no --seed is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import analysis, checkpoint as ckpt, config as cfg_mod, evaluation, ppo
from .config import ConfigError, RunConfig, load_config
from .env import BridgeWalkEnv
from .rewards import GAITS, HEIGHT_STYLES
from .simcore import SimulationFault

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

MATRIX_GAITS = ("default", "trot", "pace", "bound", "free")


def _default_seed() -> int:
    return int(os.environ.get("BGAP_SEED", "0"))


def _make_save_cb(config_text: str):
    def save(path, policy, value_fn, global_step, rng):
        tensors = ckpt.tensors_from_nets(policy, value_fn)
        save_state = {"rng": rng.bit_generator.state}
        ckpt.save_checkpoint(path, config_text, global_step, tensors, save_state)
    return save


def _train_run(cfg: RunConfig, out_dir: str):
    cfg.validate()
    config_text = cfg_mod.serialize(cfg)
    model = cfg.model.build()
    env = BridgeWalkEnv(cfg.env, seed=cfg.seed, model=model)
    return ppo.train(env, cfg.ppo, out_dir, seed=cfg.seed,
                     save_checkpoint=_make_save_cb(config_text))


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.gait is not None:
        cfg.env.gait = args.gait
    if args.style is not None:
        cfg.env.condition = args.style
    if args.seed is not None:
        cfg.seed = args.seed
    if args.total_steps is not None:
        cfg.ppo.total_steps = args.total_steps
    os.makedirs(args.out, exist_ok=True)
    _train_run(cfg, args.out)
    return EXIT_OK


def _matrix_cell(cfg_dict: dict, gait: str, style: str, seed: int, out_dir: str):
    cfg = cfg_mod.dataclass_from_dict(RunConfig, cfg_dict)
    cfg.env.gait = gait
    cfg.env.condition = style
    cfg.seed = seed
    result = _train_run(cfg, out_dir)
    return result.checkpoint_path


def cmd_matrix(args) -> int:
    cfg = load_config(args.config)
    gaits = MATRIX_GAITS + (("pronk",) if args.include_pronk else ())
    cells = [(g, s) for g in gaits for s in HEIGHT_STYLES]
    os.makedirs(args.out, exist_ok=True)
    manifest_path = os.path.join(args.out, "manifest.json")
    manifest = []
    jobs = []
    for idx, (gait, style) in enumerate(cells):
        cell_dir = os.path.join(args.out, f"{gait}_{style}")
        final = os.path.join(cell_dir, "checkpoint_final.bgap")
        entry = {"gait": gait, "style": style, "seed": cfg.seed + idx,
                 "out_dir": cell_dir, "checkpoint": final}
        manifest.append(entry)
        if os.path.exists(final):
            entry["status"] = "skipped"
        else:
            entry["status"] = "trained"
            jobs.append((cfg_mod.to_dict(cfg), gait, style, cfg.seed + idx, cell_dir))
    if args.jobs > 1 and jobs:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_matrix_cell_star, jobs))
    else:
        for job in jobs:
            _matrix_cell(*job)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"matrix complete: {len(cells)} cells, manifest at {manifest_path}")
    return EXIT_OK


def _matrix_cell_star(job):
    return _matrix_cell(*job)


def _policy_from_checkpoint(path: str):
    config_text, global_step, tensors, _ = ckpt.load_checkpoint(path)
    cfg = cfg_mod.deserialize(config_text)
    rng = np.random.default_rng(0)
    policy = ppo.GaussianPolicy(48, 12, hidden=cfg.ppo.hidden, rng=rng)
    value_fn = ppo.ValueFunction(48, hidden=cfg.ppo.hidden, rng=rng)
    ckpt.load_into_nets(tensors, policy, value_fn)
    return policy, value_fn, cfg, global_step


def _parse_sweep(spec: str):
    try:
        name, rng = spec.split("=")
        lo, hi, step = (float(v) for v in rng.split(":"))
    except ValueError as e:
        raise ConfigError(f"bad sweep spec {spec!r}, expected vx=lo:hi:step") from e
    if name != "vx":
        raise ConfigError(f"unsupported sweep variable {name!r}")
    n = int(round((hi - lo) / step)) + 1
    return [lo + i * step for i in range(n)]


def cmd_eval(args) -> int:
    policy, _, cfg, _ = _policy_from_checkpoint(args.checkpoint)
    if args.sweep:
        velocities = _parse_sweep(args.sweep)
        rows = evaluation.return_sweep(
            policy, velocities, [("eval", args.freq, args.amp)],
            episodes=args.episodes, seed=cfg.seed, gait=cfg.env.gait,
            condition=cfg.env.condition)
        out = args.log or "sweep.csv"
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["setting", "vx", "mean_return",
                                               "sem", "episodes"])
            w.writeheader()
            w.writerows(rows)
        print(f"wrote {len(rows)} sweep rows to {out}")
        return EXIT_OK

    base = os.path.splitext(args.log or "trajectory.csv")[0]
    for ep in range(args.episodes):
        env_cfg = evaluation.eval_env_config(
            frequency=args.freq, amplitude=args.amp, gait=cfg.env.gait,
            condition=cfg.env.condition)
        env = BridgeWalkEnv(env_cfg, seed=cfg.seed + 1000 * ep,
                            model=cfg.model.build())
        rows, totals = evaluation.run_episode(
            env, policy=policy, use_scripted_operator=args.scripted_operator,
            target_vx=args.vx)
        path = f"{base}_ep{ep}.csv" if args.episodes > 1 else f"{base}.csv"
        evaluation.write_trajectory_csv(path, rows)
        print(f"episode {ep}: return={totals['return']:.2f} "
              f"steps={totals['steps']} reason={totals['reason']} -> {path}")
    return EXIT_OK


# -- analyze ----------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_analyze(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    sub = args.analysis

    if sub == "returns":
        policy, _, cfg, _ = _policy_from_checkpoint(args.checkpoint)
        velocities = _parse_sweep(args.sweep or "vx=0.1:1.0:0.1")
        rows = evaluation.return_sweep(
            policy, velocities, [("oscillating", args.freq, args.amp)],
            episodes=args.episodes, seed=cfg.seed, gait=cfg.env.gait,
            condition=cfg.env.condition)
        _write_csv(os.path.join(args.out, "returns.csv"),
                   ["setting", "vx", "mean_return", "sem", "episodes"],
                   [[r["setting"], r["vx"], r["mean_return"], r["sem"],
                     r["episodes"]] for r in rows])
        return EXIT_OK

    if not args.traj:
        raise ConfigError("at least one --traj file is required")

    for traj_path in args.traj:
        cols = evaluation.read_trajectory_csv(traj_path)
        tag = os.path.splitext(os.path.basename(traj_path))[0]
        contacts = evaluation.contacts_from_columns(cols)
        times = cols["time"]

        if sub == "footfall":
            intervals = analysis.footfall_intervals(times, contacts)
            rows = []
            for foot, ivs in zip(analysis.FOOT_ORDER, intervals):
                for td, lo in ivs:
                    rows.append([foot, td, lo])
            _write_csv(os.path.join(args.out, f"footfall_{tag}.csv"),
                       ["foot", "touchdown", "liftoff"], rows)
            if args.plots:
                _plot_footfall(os.path.join(args.out, f"footfall_{tag}.svg"),
                               intervals)
        elif sub == "phases":
            pct = analysis.phase_percentages(contacts)
            _write_csv(os.path.join(args.out, f"phases_{tag}.csv"),
                       list(analysis.PHASE_COLUMNS),
                       [[pct[k] for k in analysis.PHASE_COLUMNS]])
            freq = analysis.step_frequency(times, contacts)
            _write_csv(os.path.join(args.out, f"step_frequency_{tag}.csv"),
                       ["step_frequency_hz"], [[freq]])
        elif sub == "com":
            rows = np.stack([times, cols["com_x"], cols["com_y"], cols["com_z"],
                             cols["surface_h"], cols["bridge_z"]], axis=-1)
            _write_csv(os.path.join(args.out, f"com_{tag}.csv"),
                       ["time", "com_x", "com_y", "com_z", "surface_h",
                        "bridge_z"], rows.tolist())
        elif sub == "phase-shift":
            shift = analysis.phase_shift(cols["com_z"], cols["bridge_z"],
                                         f=args.freq, rate=50.0)
            value = "absent" if shift is None else repr(shift)
            in_pi = "absent" if shift is None else repr(shift / np.pi)
            _write_csv(os.path.join(args.out, f"phase_shift_{tag}.csv"),
                       ["phase_shift_rad", "phase_shift_pi"], [[value, in_pi]])
        elif sub == "forces":
            stats = analysis.force_stats(evaluation.forces_from_columns(cols),
                                         contacts)
            rows = []
            for i, foot in enumerate(analysis.FOOT_ORDER):
                ms, ss = stats["per_foot_stance"][i]
                ma, sa = stats["per_foot_all"][i]
                rows.append([foot, ms, ss, ma, sa])
            rows.append(["ALL", *stats["aggregate_stance"], *stats["aggregate_all"]])
            _write_csv(os.path.join(args.out, f"forces_{tag}.csv"),
                       ["foot", "mean_stance", "std_stance", "mean_all",
                        "std_all"], rows)
        elif sub == "power":
            tau = evaluation.joint_matrix(cols, "tau")
            qd = evaluation.joint_matrix(cols, "qd")
            watts = analysis.power_estimate(tau, qd, signed=args.signed)
            _write_csv(os.path.join(args.out, f"power_{tag}.csv"),
                       ["mean_power_w"], [[watts]])
        else:
            raise ConfigError(f"unknown analysis {sub!r}")
    return EXIT_OK


def _plot_footfall(path, intervals):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(8, 2.5))
    for i, (foot, ivs) in enumerate(zip(analysis.FOOT_ORDER, intervals)):
        for td, lo in ivs:
            ax.barh(3 - i, lo - td, left=td, height=0.6, color="k")
    ax.set_yticks(range(4), labels=list(reversed(analysis.FOOT_ORDER)))
    ax.set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bgap",
                                description="Quadruped locomotion testbed on an "
                                            "oscillating bridge")
    sp = p.add_subparsers(dest="command", required=True)

    t = sp.add_parser("train", help="train a single policy")
    t.add_argument("--config", default=None)
    t.add_argument("--gait", choices=GAITS, default=None)
    t.add_argument("--style", choices=HEIGHT_STYLES, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default="runs/train")
    t.add_argument("--total-steps", type=int, default=None)
    t.set_defaults(func=cmd_train)

    m = sp.add_parser("matrix", help="train the gait x style policy matrix")
    m.add_argument("--config", default=None)
    m.add_argument("--out", default="runs/matrix")
    m.add_argument("--include-pronk", action="store_true")
    m.add_argument("--jobs", type=int, default=1)
    m.set_defaults(func=cmd_matrix)

    e = sp.add_parser("eval", help="evaluate a checkpoint on the bridge scene")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--freq", type=float, default=2.0)
    e.add_argument("--amp", type=float, default=0.0)
    e.add_argument("--vx", type=float, default=0.5)
    e.add_argument("--episodes", type=int, default=1)
    e.add_argument("--log", default=None)
    e.add_argument("--scripted-operator", action="store_true")
    e.add_argument("--sweep", default=None, help="e.g. vx=0.1:1.0:0.1")
    e.set_defaults(func=cmd_eval)

    a = sp.add_parser("analyze", help="analyze logged trajectories")
    a.add_argument("analysis", choices=["footfall", "phases", "com",
                                        "phase-shift", "forces", "power",
                                        "returns"])
    a.add_argument("--traj", nargs="*", default=[])
    a.add_argument("--out", default="analysis_out")
    a.add_argument("--freq", type=float, default=2.0)
    a.add_argument("--amp", type=float, default=0.05)
    a.add_argument("--plots", action="store_true")
    a.add_argument("--signed", action="store_true")
    a.add_argument("--checkpoint", default=None)
    a.add_argument("--sweep", default=None)
    a.add_argument("--episodes", type=int, default=3)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and "BGAP_SEED" in os.environ \
            and args.command == "train":
        args.seed = _default_seed()
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ckpt.CheckpointError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SimulationFault as e:
        print(f"error: simulation diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
