"""``lprobe`` command-line front end.

Exit codes: 0 success, 2 bad configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from lprobe.config import RunConfig, load_config
from lprobe.contour import contour_svg, isoline_levels
from lprobe.errors import ConfigError, NumericalError
from lprobe.jetdiff import grad, hessian_fd, sym_eigenvalues
from lprobe.landscape import (
    ProbeConfig,
    eig_index_curve,
    quadratic_loss,
    roughness_index,
    slice_1d,
    slice_2d,
    trajectory_roughness,
)
from lprobe.network import NetworkSpec, filter_layout, init_xavier
from lprobe.optimize import TrainingDiverged, default_schedule, train
from lprobe.pde import default_eval_quadrature, loss_function, parse_quadrature
from lprobe.records import (
    fmt,
    list_checkpoints,
    load_checkpoint,
    save_checkpoint,
    write_atomic,
    write_csv,
)

log = logging.getLogger("lprobe")

EIG_MAX_PARAMS = 1000


# -- training -----------------------------------------------------------------


def training_quadrature(cfg: RunConfig):
    """(training quad, per-epoch seed, frozen probe quad) for a config."""
    problem = cfg.make_problem()
    parts = cfg.quad.split(":")
    if parts[0] == "mc":
        frozen = parse_quadrature(cfg.quad, problem)
        return f"mc:{parts[1]}", int(parts[2]), frozen
    frozen = parse_quadrature(cfg.quad, problem)
    return frozen, 0, frozen


def eval_quadrature(cfg: RunConfig):
    problem = cfg.make_problem()
    if cfg.eval_quad:
        return parse_quadrature(cfg.eval_quad, problem)
    return default_eval_quadrature(problem)


def write_trajectory(run_dir: Path, traj) -> Path:
    rows = [(s.epoch, s.loss, s.error) for s in traj.snapshots]
    return write_csv(run_dir / "trajectory.csv", ("epoch", "loss", "rel_l2_error"), rows)


def run_training(cfg: RunConfig) -> int:
    problem, spec = cfg.make_problem(), cfg.network_spec()
    run_dir = cfg.run_dir
    write_atomic(run_dir / "config.ini", cfg.to_ini())
    if cfg.init_from:
        init_spec, _, _, theta0 = load_checkpoint(cfg.init_from)
        if init_spec != spec:
            raise ConfigError(f"checkpoint {cfg.init_from} has spec {init_spec}, config gives {spec}")
    else:
        theta0 = init_xavier(spec, cfg.init_seed)
    quad, seed, probe = training_quadrature(cfg)

    def save(snap):
        save_checkpoint(run_dir / f"epoch_{snap.epoch}.json", spec, cfg.init_seed, snap.epoch, snap.theta)

    try:
        theta, traj = train(
            problem,
            spec,
            cfg.loss,
            theta0,
            cfg.epochs,
            quad,
            seed=seed,
            schedule=default_schedule(cfg.epochs, cfg.snapshot_every),
            eval_quad=eval_quadrature(cfg),
            probe_quad=probe,
            lr=cfg.lr,
            grad_tol=cfg.grad_tol or None,
            callback=save,
        )
    except TrainingDiverged as exc:
        write_trajectory(run_dir, exc.trajectory)
        print(f"training diverged at {exc}", file=sys.stderr)
        return 3
    write_trajectory(run_dir, traj)
    last = traj.snapshots[-1]
    print(f"{run_dir}: epoch {last.epoch} loss {fmt(last.loss)} rel_l2_error {fmt(last.error)}")
    if cfg.grad_tol:
        _, g = grad(loss_function(cfg.loss, problem, spec, probe), theta)
        gnorm = float(np.linalg.norm(g))
        print(f"gradient norm {fmt(gnorm)} ({'converged' if gnorm < cfg.grad_tol else 'not converged'})")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, name=args.name, out_dir=args.out_dir)
    return run_training(cfg)


def cmd_retrain_from(args) -> int:
    ckpt = Path(args.checkpoint)
    base = load_config(args.config or ckpt.parent / "config.ini")
    cfg = replace(
        base,
        name=args.name,
        loss=args.loss,
        epochs=args.epochs if args.epochs is not None else base.epochs,
        init_from=str(ckpt),
        grad_tol=args.grad_tol,
        out_dir=args.out_dir or base.out_dir,
    )
    return run_training(cfg)


# -- analysis -----------------------------------------------------------------


class Target:
    """A point in parameter space together with the loss to probe around it."""

    def __init__(self, theta, loss_fn, layout, grad_fn, spec: NetworkSpec | None, label: str):
        self.theta = theta
        self.loss_fn = loss_fn
        self.layout = layout
        self.grad_fn = grad_fn
        self.spec = spec
        self.label = label


def builtin_quadratic(dim: int) -> Target:
    H = np.diag(np.arange(1.0, dim + 1.0))
    fn = quadratic_loss(H)
    return Target(np.zeros(dim), fn, None, lambda t: H @ t, None, "quadratic")


def checkpoint_target(path, config_path=None, loss=None) -> tuple[Target, RunConfig]:
    path = Path(path)
    spec, _, epoch, theta = load_checkpoint(path)
    cfg = load_config(config_path or path.parent / "config.ini")
    if loss:
        cfg = replace(cfg, loss=loss)
    if cfg.network_spec() != spec:
        raise ConfigError(
            f"checkpoint {path} spec {spec.to_dict()} does not match config "
            f"{cfg.network_spec().to_dict()}"
        )
    _, _, probe = training_quadrature(cfg)
    fn = loss_function(cfg.loss, cfg.make_problem(), spec, probe)
    target = Target(
        theta,
        fn,
        filter_layout(spec),
        lambda t: grad(fn, t)[1],
        spec,
        f"{path.stem}_{cfg.loss}",
    )
    return target, cfg


def resolve_target(args) -> tuple[Target, Path, ProbeConfig]:
    """Target, output directory and the probe defaults that flags override."""
    if args.builtin:
        if args.builtin != "quadratic":
            raise ConfigError(f"unknown builtin landscape {args.builtin!r}")
        target = builtin_quadratic(args.dim)
        default_out = Path("runs") / "builtin_quadratic"
        probe = ProbeConfig()
    else:
        if not args.checkpoint:
            raise ConfigError("give a checkpoint or --builtin")
        target, cfg = checkpoint_target(args.checkpoint, args.config, args.loss)
        default_out = Path(args.checkpoint).parent
        probe = cfg.probe_config()
    if args.seed is not None:
        probe = replace(probe, seed=args.seed)
    return target, Path(args.out) if args.out else default_out, probe


def parse_floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list of numbers {text!r}") from None
    if not values:
        raise ConfigError("empty list of numbers")
    return values


def cmd_roughness(args) -> int:
    target, out, probe = resolve_target(args)
    rows = []
    sweep = parse_floats(args.l) if args.l else [probe.l]
    for l in sweep:
        config = ProbeConfig(args.M or probe.M, l, args.m or probe.m, probe.seed)
        rep = roughness_index(target.loss_fn, target.theta, target.layout, config)
        tag = f"{target.label}_l{l:g}"
        kept = [i for i in range(config.M) if i not in set(rep.excluded)]
        write_csv(out / f"roughness_{tag}.csv", ("direction", "T"), zip(kept, rep.Ts))
        summary = rep.summary()
        write_atomic(out / f"roughness_{tag}.json", json.dumps(summary, sort_keys=True) + "\n")
        rows.append((l, rep.config.M, rep.config.m, rep.config.seed, rep.mu, rep.sigma, rep.index, len(rep.excluded)))
        print(f"l={l:g} mu={fmt(rep.mu)} sigma={fmt(rep.sigma)} index={fmt(rep.index)} excluded={len(rep.excluded)}")
    header = ("l", "M", "m", "seed", "mu", "sigma", "index", "excluded")
    write_csv(out / f"roughness_{target.label}_sweep.csv", header, rows)
    return 0


def cmd_eig(args) -> int:
    target, out, _ = resolve_target(args)
    n = target.theta.size
    if n > EIG_MAX_PARAMS:
        raise ConfigError(f"refusing dense eigen-decomposition: {n} parameters exceed the bound of {EIG_MAX_PARAMS}")
    if target.spec is None:
        H = np.diag(np.arange(1.0, n + 1.0))
    else:
        H = hessian_fd(target.grad_fn, target.theta)
    lam = sym_eigenvalues(H)
    write_csv(out / f"eig_{target.label}.csv", ("i", "lambda"), zip(range(1, n + 1), lam))
    curve = eig_index_curve(lam)
    write_csv(out / f"vcurve_{target.label}.csv", ("k", "V"), curve)
    k = min(args.k, len(curve)) if args.k else len(curve)
    if k:
        print(f"V({k}) = {fmt(curve[k - 1][1])}")
    print(f"lambda_max = {fmt(lam[0])}, lambda_min = {fmt(lam[-1])}")
    return 0


def cmd_slice2d(args) -> int:
    target, out, probe = resolve_target(args)
    sl = slice_2d(target.loss_fn, target.theta, target.layout, probe.seed, args.l, args.grid)
    rows = [
        (a, b, sl.values[i, j])
        for i, a in enumerate(sl.alphas)
        for j, b in enumerate(sl.betas)
    ]
    write_csv(out / f"slice2d_{target.label}.csv", ("alpha", "beta", "loss"), rows)
    if args.svg:
        write_atomic(out / f"slice2d_{target.label}.svg", contour_svg(sl.values, isoline_levels(sl.values)))
    return 0


def cmd_slice1d(args) -> int:
    target, out, probe = resolve_target(args)
    s, values = slice_1d(target.loss_fn, target.theta, target.layout, probe.seed, args.l, args.m)
    write_csv(out / f"slice1d_{target.label}.csv", ("s", "loss"), zip(s, values))
    return 0


def cmd_traj_roughness(args) -> int:
    run_dir = Path(args.run_dir)
    ckpts = list_checkpoints(run_dir)
    if not ckpts:
        raise ConfigError(f"no epoch_<k>.json checkpoints in {run_dir}")
    target, cfg = checkpoint_target(ckpts[0][1], args.config or run_dir / "config.ini", args.loss)
    snapshots = [(epoch, load_checkpoint(p)[3]) for epoch, p in ckpts]
    probe = cfg.probe_config()
    config = ProbeConfig(
        args.M or probe.M,
        args.l or probe.l,
        args.m or probe.m,
        probe.seed if args.seed is None else args.seed,
    )
    series = trajectory_roughness(target.loss_fn, snapshots, target.layout, config)
    for epoch, value in series:
        if np.isnan(value):
            print(f"epoch {epoch}: roughness undefined (NaN row)", file=sys.stderr)
    out = Path(args.out) if args.out else run_dir
    write_csv(out / f"traj_roughness_{cfg.loss}.csv", ("epoch", "index"), series)
    return 0


# -- argument parsing ---------------------------------------------------------


def _target_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("checkpoint", nargs="?", help="epoch_<k>.json checkpoint")
    p.add_argument("--config", help="run config (default: config.ini next to the checkpoint)")
    p.add_argument("--loss", choices=("dgm", "drm"), help="override the loss of the run config")
    p.add_argument("--builtin", help="built-in landscape instead of a checkpoint: quadratic")
    p.add_argument("--dim", type=int, default=10, help="dimension of the built-in landscape")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="direction seed (default: from the run config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lprobe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a run config")
    p.add_argument("config")
    p.add_argument("--name", help="override the run name")
    p.add_argument("--out-dir", help="override the parent directory of the run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrain-from", help="continue from a checkpoint under another loss")
    p.add_argument("checkpoint")
    p.add_argument("--loss", choices=("dgm", "drm"), required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--grad-tol", type=float, default=1e-4)
    p.add_argument("--config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_retrain_from)

    p = sub.add_parser("roughness", help="random-projection roughness index")
    _target_args(p)
    p.add_argument("--M", type=int, help="number of directions")
    p.add_argument("--l", help="half-length, or a comma-separated sweep")
    p.add_argument("--m", type=int, help="grid intervals per direction")
    p.set_defaults(func=cmd_roughness)

    p = sub.add_parser("eig", help="Hessian spectrum and V(k)")
    _target_args(p)
    p.add_argument("--k", type=int, default=0, help="report V(k) (default: all positive)")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("slice2d", help="2D loss slice")
    _target_args(p)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_slice2d)

    p = sub.add_parser("slice1d", help="1D loss slice")
    _target_args(p)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--m", type=int, default=100)
    p.set_defaults(func=cmd_slice1d)

    p = sub.add_parser("traj-roughness", help="roughness index along a training run")
    p.add_argument("run_dir")
    p.add_argument("--config")
    p.add_argument("--loss", choices=("dgm", "drm"))
    p.add_argument("--out")
    p.add_argument("--M", type=int)
    p.add_argument("--l", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_traj_roughness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"lprobe: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ValueError) as exc:
        print(f"lprobe: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
