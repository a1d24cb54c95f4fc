"""3D unit-ball problem: train with DGM, then compare both losses' roughness at theta_G."""

import argparse

from lprobe.landscape import ProbeConfig, roughness_index
from lprobe.network import NetworkSpec, filter_layout, init_xavier, param_count
from lprobe.optimize import train
from lprobe.pde import loss_function, monte_carlo, relative_l2_error, sphere3d


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    problem, spec = sphere3d(), NetworkSpec("resnet", 3, 8, 4)
    print(f"parameters: {param_count(spec)}")
    theta, _ = train(problem, spec, "dgm", init_xavier(spec, args.seed), args.epochs, f"mc:{args.batch}", seed=args.seed, schedule=[])
    err = relative_l2_error(problem, spec, theta, monte_carlo("ball", 3, 20000, 12345))
    print(f"relative L2 error at theta_G: {err:.4f}")
    probe = monte_carlo("ball", 3, args.batch, args.seed)
    layout = filter_layout(spec)
    print(f"{'M':>4} {'l':>6} {'m':>4} {'I_DGM':>8} {'I_DRM':>8}")
    for M, l, m in [(50, 0.1, 10), (100, 0.1, 10), (100, 0.01, 100), (100, 0.001, 100)]:
        idx = [
            roughness_index(loss_function(k, problem, spec, probe), theta, layout, ProbeConfig(M, l, m, 0)).index
            for k in ("dgm", "drm")
        ]
        print(f"{M:4d} {l:6g} {m:4d} {idx[0]:8.4f} {idx[1]:8.4f}")


if __name__ == "__main__":
    main()
