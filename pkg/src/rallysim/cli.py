"""Command-line entry points.

Subcommands: ``gen`` (synthetic streams), ``fit`` (parameter identification),
``predict`` (strike command for one stream), ``evaluate`` (prediction error
report), ``simulate`` (single flight), ``grid`` (hit-plane sweep), ``rally``
(two-sided closed loop).

Exit codes: 0 success, 1 usage error, 2 bad or insufficient input data.
Configuration comes from ``--config``, the ``RALLYSIM_CONFIG`` environment
variable, or the bundled defaults, in that order; every output file records
the config hash and root seed so runs can be reproduced exactly.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import RunConfig, default_config, load_config
from .dynamics import (
    HitPlane,
    OpponentLanding,
    PhysicsParams,
    Termination,
    TimeLimit,
    integrate,
)
from .errors import DataError, InsufficientData, NoPlaneCrossing
from .estimator import BallTracker, EstimatorWindow
from .planner import BasePose, plan_strike
from .predictor import evaluate_prediction_errors, predict_strike
from .records import (
    TrajectoryRecord,
    load_trajectories,
    save_trajectories,
    segment_to_record,
    write_csv,
)
from .simulator import (
    ExecutorConfig,
    LaunchSpec,
    ShotOptions,
    default_grid_cells,
    launch_ball,
    run_grid,
    run_rally,
)
from .system_id import identify_params

CONFIG_ENV_VAR = "RALLYSIM_CONFIG"

# Aim lattice for synthetic serve batches: one serve per lattice point,
# cycling when more are requested. Spans the band a single-bounce feed
# reaches without spin.
GEN_TARGET_LATTICE = tuple(
    (y, z) for z in (0.3, 0.5, 0.7) for y in (-0.4, -0.2, 0.0, 0.2, 0.4))
GEN_TARGET_JITTER = 0.02


class _Parser(argparse.ArgumentParser):
    """argparse reserves status 2 for usage errors; here 2 means bad data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _stream_rng(root_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))


def _resolve_config(args) -> RunConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    return load_config(path) if path else default_config()


def _resolve_seed(args, config: RunConfig) -> int:
    return args.seed if getattr(args, "seed", None) is not None else config.experiment.seed


def _meta(config: RunConfig, seed: int, **extra) -> dict:
    meta = {"config_hash": config.hash(), "seed": seed}
    meta.update(extra)
    return meta


def _launch_spec(config: RunConfig, params, geometry, target=None) -> LaunchSpec:
    sec = config.experiment.launch
    if target is None:
        target = (sec.target_y, sec.target_z)
    return LaunchSpec(
        params=params,
        geometry=geometry,
        position=(sec.x, sec.y, sec.z),
        target=target,
        bounce_x=sec.bounce_x,
        target_sigma=(sec.target_sigma_y, sec.target_sigma_z),
        position_sigma=sec.position_sigma,
        velocity_sigma=sec.velocity_sigma,
    )


def _shot_options(config: RunConfig) -> ShotOptions:
    est, pl, exp = config.estimator, config.planner, config.experiment
    return ShotOptions(
        noise_sigma=exp.noise_sigma,
        lock_time=pl.lock_time,
        plan_stride=exp.plan_stride,
        step=exp.step,
        dt_flight=pl.dt_flight,
        reach_offset=pl.reach_offset,
        base_back_offset=pl.base_back_offset,
        estimator_window=est.window,
        min_fit_count=est.min_fit_count,
        bounce_band=est.bounce_band,
        lookahead=est.lookahead,
    )


def _executor(config: RunConfig) -> ExecutorConfig:
    sec = config.executor
    return ExecutorConfig(
        reach_speed_curve=tuple((d, t) for d, t in sec.reach_curve),
        max_reach_radius=sec.max_reach_radius,
        swing_duration=sec.swing_duration,
        position_error_sigma=sec.position_error_sigma,
        velocity_error_sigma=sec.velocity_error_sigma,
        timing_jitter_sigma=sec.timing_jitter_sigma,
        racket_radius=sec.racket_radius,
        contact_band=sec.contact_band,
        base_start=tuple(sec.base_start),
    )


def _grid_cells(config: RunConfig):
    grid = config.experiment.grid
    rows = tuple((row["z"], row["count"]) for row in grid.rows)
    return default_grid_cells(grid.cell, rows)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fig_path(args, out_path) -> Path | None:
    if getattr(args, "no_plot", False):
        return None
    if getattr(args, "fig", None):
        return Path(args.fig)
    return Path(out_path).with_suffix(".png")


# ---------------------------------------------------------------------------
# gen


def generate_trajectories(count, params, geometry, spec_template, noise_sigma,
                          seed, step, base_meta=None) -> list[TrajectoryRecord]:
    """Synthesize serve streams ending at the hit plane.

    Aim points cycle over GEN_TARGET_LATTICE with a small jitter so repeated
    lattice passes stay distinct; each stream carries the pre-noise plane
    crossing under ``meta["truth"]`` and its own child seed, so any subset
    regenerates identically.
    """
    records = []
    for i in range(count):
        y_aim, z_aim = GEN_TARGET_LATTICE[i % len(GEN_TARGET_LATTICE)]
        rng = _stream_rng(seed, i)
        spec = dataclasses.replace(
            spec_template, target=(y_aim, z_aim),
            target_sigma=(GEN_TARGET_JITTER, GEN_TARGET_JITTER))
        state = launch_ball(spec, rng)
        seg = integrate(state, params, geometry, HitPlane(), step=step)
        ps = seg.ps.copy()
        if noise_sigma > 0.0:
            ps += rng.normal(0.0, noise_sigma, ps.shape)
        meta = dict(base_meta or {})
        meta.update({
            "source": "generated",
            "index": i,
            "noise_sigma": noise_sigma,
            "params": {"k": params.k, "c_h": params.c_h, "c_v": params.c_v},
            "aim": [y_aim, z_aim],
            "truth": {"t_strike": seg.final.t,
                      "p_strike": seg.final.p.tolist(),
                      "v_strike": seg.final.v.tolist()},
        })
        records.append(TrajectoryRecord(f"traj-{i:03d}", seg.ts.copy(), ps, meta))
    return records


def _cmd_gen(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    params = config.physics_params()
    overrides = {name: getattr(args, name) for name in ("k", "c_h", "c_v")
                 if getattr(args, name) is not None}
    if overrides:
        params = dataclasses.replace(params, **overrides)
    geometry = config.table_geometry()
    noise = args.noise if args.noise is not None else config.experiment.noise_sigma
    spec = _launch_spec(config, params, geometry)
    records = generate_trajectories(
        args.count, params, geometry, spec, noise, seed,
        step=config.experiment.step, base_meta=_meta(config, seed))
    save_trajectories(args.out, records)
    print(f"wrote {len(records)} trajectories to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _cmd_fit(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    records = load_trajectories(args.trajectories)
    report = identify_params(records, g=config.physics.g)
    obj = {
        "meta": _meta(config, seed, input=str(args.trajectories)),
        "k_hat": report.k_hat,
        "c_h_hat": report.c_h_hat,
        "c_v_hat": report.c_v_hat,
        "residuals": report.residuals,
        "trajectory_count": report.trajectory_count,
        "sample_count": report.sample_count,
    }
    _write_json(args.out, obj)
    if args.params_out:
        _write_params_file(args.params_out, report, config)
    line = (f"k={report.k_hat:.6f} c_h={report.c_h_hat:.6f} "
            f"c_v={report.c_v_hat:.6f} "
            f"({report.trajectory_count} trajectories)")
    print(line)
    return 0


def _write_params_file(path, report, config: RunConfig) -> None:
    """Write a physics section loadable through --config.

    The racket restitution cannot be identified from ball-only streams, so
    it is carried over from the active config and flagged uncalibrated.
    """
    import yaml

    payload = {"physics": {
        "k": round(float(report.k_hat), 6),
        "c_h": round(float(report.c_h_hat), 6),
        "c_v": round(float(report.c_v_hat), 6),
        "c_r": config.physics.c_r,
        "c_r_calibrated": False,
        "g": list(config.physics.g),
    }}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# identified from {report.trajectory_count} trajectories; "
                 f"config {config.hash()}\n")
        yaml.safe_dump(payload, fh, sort_keys=False)


# ---------------------------------------------------------------------------
# predict


def _cmd_predict(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    params = config.physics_params()
    geometry = config.table_geometry()
    records = load_trajectories(args.trajectories)
    if not records:
        raise InsufficientData("trajectory file is empty")
    if args.id is not None:
        matches = [r for r in records if r.id == args.id]
        if not matches:
            raise InsufficientData(f"no record with id {args.id!r}")
        rec = matches[0]
    else:
        rec = records[0]

    est_cfg = config.estimator
    tracker = BallTracker(
        EstimatorWindow(est_cfg.window, est_cfg.min_fit_count),
        z_band=est_cfg.bounce_band, lookahead=est_cfg.lookahead)
    prediction = None
    estimate = None
    for t, p in rec.samples():
        est = tracker.push(t, p)
        if est is None:
            continue
        try:
            prediction = predict_strike(est, params, geometry,
                                        step=config.experiment.step)
            estimate = est
        except NoPlaneCrossing:
            continue
    if prediction is None:
        raise InsufficientData(
            f"record {rec.id!r} never produced a hit-plane crossing")

    executor = _executor(config)
    base_pose = BasePose(np.asarray(executor.base_start))
    command = plan_strike(
        prediction, geometry, params, config.planner.dt_flight, base_pose,
        reach_offset=config.planner.reach_offset,
        base_back_offset=config.planner.base_back_offset)
    obj = {
        "meta": _meta(config, seed, record=rec.id,
                      estimate_t=estimate.t, sample_count=estimate.sample_count),
        "prediction": {
            "t_strike": prediction.t_strike,
            "p_strike": prediction.p_strike.tolist(),
            "v_incoming": prediction.v_incoming.tolist(),
            "bounce_count": prediction.bounce_count,
        },
        "command": command.to_json_obj(),
    }
    _write_json(args.out, obj)
    print(f"strike at t={prediction.t_strike:.4f}s "
          f"p=({prediction.p_strike[1]:.3f}, {prediction.p_strike[2]:.3f})")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _cmd_evaluate(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    records = load_trajectories(args.trajectories)
    curve = evaluate_prediction_errors(
        records, config.physics_params(), config.table_geometry(),
        window=config.estimator.window,
        min_fit_count=config.estimator.min_fit_count,
        step=config.experiment.step)
    meta = _meta(config, seed, input=str(args.trajectories),
                 trajectories=curve.trajectory_count,
                 excluded=curve.excluded_count, bin_width=curve.bin_width)
    write_csv(args.out, ["tts", "pos_mean", "pos_std", "t_mean", "t_std"],
              curve.rows(), meta=meta)
    fig = _fig_path(args, args.out)
    if fig is not None and curve.bins:
        plots.save_error_curve(curve, fig)
        print(f"wrote {args.out} and {fig}")
    else:
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    params = config.physics_params()
    geometry = config.table_geometry()
    target = None
    if args.target_y is not None or args.target_z is not None:
        sec = config.experiment.launch
        target = (args.target_y if args.target_y is not None else sec.target_y,
                  args.target_z if args.target_z is not None else sec.target_z)
    spec = _launch_spec(config, params, geometry, target=target)
    state = launch_ball(spec, _stream_rng(seed, 0))
    if args.stop == "time":
        stop = TimeLimit(args.duration)
    elif args.stop == "landing":
        stop = OpponentLanding()
    else:
        stop = HitPlane()
    seg = integrate(state, params, geometry, stop, step=config.experiment.step)
    rec = segment_to_record(seg, f"sim-{seed:04d}", meta=_meta(config, seed))
    save_trajectories(args.out, [rec])
    if args.fig:
        plots.save_trajectory(seg, geometry, args.fig)
    print(f"{len(seg)} samples, {len(seg.bounce_events)} bounce(s), "
          f"ended {seg.termination.value} at t={seg.final.t:.4f}s")
    return 0


# ---------------------------------------------------------------------------
# grid


def _cmd_grid(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    params = config.physics_params()
    geometry = config.table_geometry()
    trials = args.trials if args.trials is not None else config.experiment.trials
    report = run_grid(
        _grid_cells(config), trials, params, geometry, _executor(config),
        _launch_spec(config, params, geometry), seed,
        options=_shot_options(config), workers=args.workers)
    meta = _meta(config, seed, trials_per_cell=trials,
                 hit_rate=round(report.hit_rate, 6),
                 return_rate=round(report.return_rate, 6))
    write_csv(args.out, ["y_lo", "y_hi", "z_lo", "z_hi", "trials", "hits", "returns"],
              report.rows(), meta=meta)
    fig = _fig_path(args, args.out)
    if fig is not None:
        plots.save_grid_heatmap(report, fig)
    print(f"hit rate {100 * report.hit_rate:.1f}%  "
          f"return rate {100 * report.return_rate:.1f}%  "
          f"({report.trials} shots)")
    return 0


# ---------------------------------------------------------------------------
# rally


def _cmd_rally(args) -> int:
    config = _resolve_config(args)
    seed = _resolve_seed(args, config)
    params = config.physics_params()
    geometry = config.table_geometry()
    max_shots = args.max_shots if args.max_shots is not None else config.experiment.max_shots
    outcome = run_rally(
        _executor(config), _executor(config), params, geometry,
        _launch_spec(config, params, geometry), seed,
        max_shots=max_shots, options=_shot_options(config))
    # rally log: meta line, one ShotOutcome per line, summary line
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": _meta(config, seed, max_shots=max_shots)}) + "\n")
        for shot in outcome.shots:
            fh.write(json.dumps(shot.to_json_obj()) + "\n")
        fh.write(json.dumps({"shot_count": outcome.shot_count,
                             "terminal_failure": outcome.terminal_failure.value}) + "\n")
    print(f"rally length {outcome.shot_count} "
          f"(ended: {outcome.terminal_failure.value})")
    return 0


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rallysim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help=f"config YAML (default: ${CONFIG_ENV_VAR} "
                                        "or bundled parameters)")
        p.add_argument("--seed", type=int, help="override the experiment seed")

    p = sub.add_parser("gen", help="generate synthetic trajectory streams")
    common(p)
    p.add_argument("--count", type=int, default=15)
    p.add_argument("--k", type=float, help="override the drag coefficient")
    p.add_argument("--c-h", dest="c_h", type=float, help="override horizontal restitution")
    p.add_argument("--c-v", dest="c_v", type=float, help="override vertical restitution")
    p.add_argument("--noise", type=float, help="position noise sigma [m]")
    p.add_argument("--out", "-o", default="trajectories.jsonl")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("fit", help="identify drag and restitution from streams")
    common(p)
    p.add_argument("trajectories")
    p.add_argument("--out", "-o", default="fit_report.json")
    p.add_argument("--params-out", help="also write a physics config section")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="strike command for one recorded stream")
    common(p)
    p.add_argument("trajectories")
    p.add_argument("--id", help="record id to use (default: first)")
    p.add_argument("--out", "-o", default="strike_command.json")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="prediction error report over streams")
    common(p)
    p.add_argument("trajectories")
    p.add_argument("--out", "-o", default="error_curve.csv")
    p.add_argument("--fig", help="figure path (default: output with .png)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="integrate one launched flight")
    common(p)
    p.add_argument("--target-y", type=float)
    p.add_argument("--target-z", type=float)
    p.add_argument("--stop", choices=("plane", "landing", "time"), default="plane")
    p.add_argument("--duration", type=float, default=2.0,
                   help="flight time when --stop time")
    p.add_argument("--out", "-o", default="flight.jsonl")
    p.add_argument("--fig", help="optional trajectory figure path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("grid", help="hit/return rates over the hit-plane grid")
    common(p)
    p.add_argument("--trials", type=int, help="trials per cell")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", "-o", default="grid_report.csv")
    p.add_argument("--fig", help="figure path (default: output with .png)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("rally", help="two-sided rally until failure or cap")
    common(p)
    p.add_argument("--max-shots", type=int)
    p.add_argument("--out", "-o", default="rally.jsonl")
    p.set_defaults(func=_cmd_rally)

    return parser


def cli_dispatch(argv=None) -> int:
    """Parse and run; returns the process exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"rallysim: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
