"""Poisson problems, quadrature rules, the two loss functionals and the L2 error."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from lprobe.errors import ConfigError, NumericalError
from lprobe.jetdiff import Var
from lprobe.network import NetworkSpec, ansatz_apply


@dataclass(frozen=True)
class Problem:
    """-Laplace(u) = f with homogeneous Dirichlet data.

    ``exact_u``, ``forcing`` and ``exact_laplacian`` take points of shape (P, d).
    """

    name: str
    d: int
    domain: str  # "box" = (0,1)^d, "ball" = unit ball
    exact_u: Callable[[np.ndarray], np.ndarray]
    forcing: Callable[[np.ndarray], np.ndarray]
    exact_grad: Callable[[np.ndarray], np.ndarray]
    exact_laplacian: Callable[[np.ndarray], np.ndarray]

    @property
    def volume(self) -> float:
        if self.domain == "box":
            return 1.0
        return math.pi ** (self.d / 2) / math.gamma(self.d / 2 + 1)


def box1d_cubic() -> Problem:
    # u = x(x-1)(2x+1) = 2x^3 - x^2 - x
    def u(x):
        x = x[:, 0]
        return 2 * x**3 - x**2 - x

    return Problem(
        "box1d_cubic",
        1,
        "box",
        u,
        lambda x: -12.0 * x[:, 0] + 2.0,
        lambda x: (6 * x[:, 0] ** 2 - 2 * x[:, 0] - 1)[:, None],
        lambda x: 12.0 * x[:, 0] - 2.0,
    )


def boxnd_sine(d: int) -> Problem:
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")

    def u(x):
        return np.prod(np.sin(np.pi * x), axis=1)

    def grad(x):
        s, c = np.sin(np.pi * x), np.cos(np.pi * x)
        out = np.empty_like(x)
        for k in range(x.shape[1]):
            out[:, k] = np.pi * c[:, k] * np.prod(np.delete(s, k, axis=1), axis=1)
        return out

    name = "box1d_sine" if d == 1 else "boxnd_sine"
    return Problem(
        name,
        d,
        "box",
        u,
        lambda x: d * np.pi**2 * u(x),
        grad,
        lambda x: -d * np.pi**2 * u(x),
    )


def box1d_sine() -> Problem:
    return boxnd_sine(1)


def sphere3d() -> Problem:
    """u = sin(pi/2 (1 - |x|)) on the unit ball; not differentiable at the origin."""

    def u(x):
        r = np.linalg.norm(x, axis=1)
        return np.sin(0.5 * np.pi * (1.0 - r))

    def f(x):
        r = np.linalg.norm(x, axis=1)
        a = 0.5 * np.pi * (1.0 - r)
        return np.pi**2 / 4 * np.sin(a) + np.pi / r * np.cos(a)

    def grad(x):
        r = np.linalg.norm(x, axis=1)
        a = 0.5 * np.pi * (1.0 - r)
        return (-0.5 * np.pi * np.cos(a) / r)[:, None] * x

    def lap(x):
        r = np.linalg.norm(x, axis=1)
        a = 0.5 * np.pi * (1.0 - r)
        return -np.pi**2 / 4 * np.sin(a) - np.pi / r * np.cos(a)

    return Problem("sphere3d", 3, "ball", u, f, grad, lap)


def make_problem(name: str, d: int | None = None) -> Problem:
    if name == "box1d_cubic":
        return box1d_cubic()
    if name == "box1d_sine":
        return box1d_sine()
    if name == "boxnd_sine":
        if d is None:
            raise ConfigError("problem boxnd_sine needs a dimension")
        return boxnd_sine(d)
    if name == "sphere3d":
        return sphere3d()
    raise ConfigError(f"unknown problem {name!r}")


# -- quadrature ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSet:
    """Frozen evaluation points (P, d) and weights (P,)."""

    points: np.ndarray
    weights: np.ndarray
    scheme: str

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return values @ self.weights

    def __len__(self) -> int:
        return len(self.weights)


def simpson_1d(n: int) -> QuadratureSet:
    """Composite Simpson rule on [0, 1] with ``n`` nodes (``n + 1`` if ``n`` is even)."""
    if n < 3:
        raise ConfigError(f"Simpson rule needs at least 3 nodes, got {n}")
    if n % 2 == 0:
        n += 1
    x = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return QuadratureSet(x[:, None], w * h / 3.0, f"simpson:{n}")


def monte_carlo(domain: str, d: int, n: int, seed) -> QuadratureSet:
    """``n`` iid uniform points; the ball is sampled by rejection from [-1, 1]^d."""
    if n < 1:
        raise ConfigError(f"need at least one sample, got {n}")
    rng = np.random.default_rng(seed)
    if domain == "box":
        pts = rng.random((n, d))
        vol = 1.0
    elif domain == "ball":
        chunks, have = [], 0
        while have < n:
            cand = rng.uniform(-1.0, 1.0, size=(2 * (n - have) + 16, d))
            r2 = np.sum(cand * cand, axis=1)
            # the origin is excluded: the sphere problem's forcing is singular there
            keep = cand[(r2 < 1.0) & (r2 > 1e-24)]
            chunks.append(keep)
            have += len(keep)
        pts = np.concatenate(chunks)[:n]
        vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    else:
        raise ConfigError(f"unknown domain {domain!r}")
    seed_tag = seed if np.isscalar(seed) else "-".join(str(s) for s in seed)
    return QuadratureSet(pts, np.full(n, vol / n), f"mc:{n}:{seed_tag}")


def parse_quadrature(text: str, problem: Problem) -> QuadratureSet:
    """``simpson:N`` or ``mc:N:seed``."""
    parts = text.split(":")
    try:
        if parts[0] == "simpson" and len(parts) == 2:
            if problem.d != 1 or problem.domain != "box":
                raise ConfigError("Simpson quadrature is only available on (0, 1)")
            return simpson_1d(int(parts[1]))
        if parts[0] == "mc" and len(parts) == 3:
            return monte_carlo(problem.domain, problem.d, int(parts[1]), int(parts[2]))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed quadrature spec {text!r}") from exc
    raise ConfigError(f"malformed quadrature spec {text!r}")


# -- losses -------------------------------------------------------------------


def _finite(value, what: str):
    raw = value.value if isinstance(value, Var) else value
    if not np.all(np.isfinite(raw)):
        raise NumericalError(f"{what} is not finite")
    return value


def dgm_from_fields(lap, f: np.ndarray, weights: np.ndarray):
    """sum_k w_k (-lap_k - f_k)^2, reduced over the last axis."""
    r = -lap - f
    return (r * r * weights).sum(axis=-1)


def drm_from_fields(u, grad_sq, f: np.ndarray, weights: np.ndarray):
    """sum_k w_k (|grad u|^2 / 2 - f_k u_k), reduced over the last axis."""
    return ((0.5 * grad_sq - f * u) * weights).sum(axis=-1)


def _fields(problem: Problem, spec: NetworkSpec, theta, quad: QuadratureSet):
    if spec.d != problem.d:
        raise ConfigError(f"network dimension {spec.d} != problem dimension {problem.d}")
    return ansatz_apply(problem.domain, spec, theta, quad.points)


def dgm_loss(problem: Problem, spec: NetworkSpec, theta, quad: QuadratureSet):
    jet = _fields(problem, spec, theta, quad)
    f = problem.forcing(quad.points)
    return _finite(dgm_from_fields(jet.d2.sum(axis=-2), f, quad.weights), "DGM loss")


def drm_loss(problem: Problem, spec: NetworkSpec, theta, quad: QuadratureSet):
    jet = _fields(problem, spec, theta, quad)
    f = problem.forcing(quad.points)
    grad_sq = (jet.d1 * jet.d1).sum(axis=-2)
    return _finite(drm_from_fields(jet.val, grad_sq, f, quad.weights), "DRM loss")


LOSSES = {"dgm": dgm_loss, "drm": drm_loss}


def loss_function(kind: str, problem: Problem, spec: NetworkSpec, quad: QuadratureSet):
    """Loss as a function of parameters only (batched arrays or a tape Var)."""
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ConfigError(f"unknown loss kind {kind!r}") from None
    return lambda theta: fn(problem, spec, theta, quad)


def exact_losses(problem: Problem, quad: QuadratureSet) -> tuple[float, float]:
    """(DGM, DRM) losses of the exact solution under ``quad``."""
    x = quad.points
    f = problem.forcing(x)
    g = problem.exact_grad(x)
    jg = dgm_from_fields(problem.exact_laplacian(x), f, quad.weights)
    jr = drm_from_fields(problem.exact_u(x), np.sum(g * g, axis=1), f, quad.weights)
    return float(jg), float(jr)


def relative_l2_error(problem: Problem, spec: NetworkSpec, theta, quad: QuadratureSet):
    """||u(.; theta) - u|| / ||u|| with both norms under ``quad``."""
    exact = problem.exact_u(quad.points)
    denom = quad.integrate(exact * exact)
    if denom == 0.0:
        raise ValueError("exact solution has zero norm on this quadrature")
    u = ansatz_apply(problem.domain, spec, np.asarray(theta, dtype=float), quad.points).val
    diff = u - exact
    return np.sqrt(quad.integrate(diff * diff) / denom)


def default_eval_quadrature(problem: Problem, seed: int = 12345) -> QuadratureSet:
    """Reference quadrature for error measurement, independent of training points."""
    if problem.d == 1 and problem.domain == "box":
        return simpson_1d(1001)
    return monte_carlo(problem.domain, problem.d, 20000, seed)
