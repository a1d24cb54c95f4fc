"""Roughness of DGM vs DRM minimizers for the 1D sine problem, over seeds and interval lengths.

Writes one CSV row per (seed, loss, l) and prints a seed-averaged table.
"""

import argparse
from pathlib import Path

import numpy as np

from lprobe.landscape import ProbeConfig, roughness_index
from lprobe.network import NetworkSpec, filter_layout, init_xavier
from lprobe.optimize import train
from lprobe.pde import box1d_sine, loss_function, simpson_1d
from lprobe.records import write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--width", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=10000)
    ap.add_argument("--l", default="0.001,0.01,0.1,0.2,0.4")
    ap.add_argument("--M", type=int, default=100)
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--out", default="runs/roughness_1d.csv")
    args = ap.parse_args(argv)

    problem, quad = box1d_sine(), simpson_1d(200)
    spec = NetworkSpec("resnet", 1, args.width, 1)
    layout = filter_layout(spec)
    ls = [float(v) for v in args.l.split(",")]
    rows = []
    for seed in range(args.seeds):
        for kind in ("dgm", "drm"):
            theta, traj = train(problem, spec, kind, init_xavier(spec, seed), args.epochs, quad, schedule=[args.epochs])
            fn = loss_function(kind, problem, spec, quad)
            for l in ls:
                rep = roughness_index(fn, theta, layout, ProbeConfig(args.M, l, args.m, 0))
                rows.append((seed, kind, l, traj.snapshots[-1].error, rep.mu, rep.sigma, rep.index))
            print(f"seed {seed} {kind}: error {traj.snapshots[-1].error:.2e}", flush=True)

    out = Path(args.out)
    write_csv(
        out,
        ("seed", "loss_is_drm", "l", "rel_l2_error", "mu", "sigma", "index"),
        [(s, int(k == "drm"), l, e, mu, sd, i) for s, k, l, e, mu, sd, i in rows],
    )
    print(f"\n{'l':>8} {'I_DGM':>8} {'I_DRM':>8} {'DGM wins':>9}")
    for l in ls:
        ig = np.array([r[6] for r in rows if r[1] == "dgm" and r[2] == l])
        ir = np.array([r[6] for r in rows if r[1] == "drm" and r[2] == l])
        print(f"{l:8g} {ig.mean():8.4f} {ir.mean():8.4f} {int(np.sum(ig < ir)):>5}/{len(ig)}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
