"""Two-parameter linear toy: Hessians, eigenvalues, V(2) and roughness at the minimizer."""

import numpy as np

from lprobe.jetdiff import grad, hessian_fd, sym_eigenvalues
from lprobe.landscape import ProbeConfig, eig_index, roughness_index
from lprobe.network import NetworkSpec, filter_layout
from lprobe.optimize import train
from lprobe.pde import box1d_cubic, loss_function, simpson_1d


def main():
    problem, spec, quad = box1d_cubic(), NetworkSpec("linear1d"), simpson_1d(200)
    print(f"{'loss':>4} {'theta*':>24} {'eigenvalues':>22} {'V(2)':>8} {'I(l=0.01)':>10}")
    for kind in ("dgm", "drm"):
        theta, _ = train(problem, spec, kind, [0.0, 0.0], 10000, quad, schedule=[])
        fn = loss_function(kind, problem, spec, quad)
        H = hessian_fd(lambda t: grad(fn, t)[1], theta)
        lam = sym_eigenvalues(H)
        v, _ = eig_index(lam, 2)
        rep = roughness_index(fn, theta, filter_layout(spec), ProbeConfig(100, 0.01, 100, 0))
        print(f"{kind:>4} {np.array2string(theta, precision=6):>24} {np.array2string(lam, precision=4):>22} {v:8.3f} {rep.index:10.2e}")


if __name__ == "__main__":
    main()
