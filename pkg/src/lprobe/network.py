"""Trial-function families: ResNet, FCNet and the two-parameter linear toy.

Parameters live in one flat vector.  Each affine layer occupies a contiguous
slice laid out filter by filter: for output neuron ``j`` we store weight row
``j`` followed by bias ``j``.  A layer slice therefore reshapes to an
``(out, in + 1)`` matrix whose rows are exactly the filters used by filter-wise
normalization.

Every function here accepts either a single parameter vector of shape ``(n,)``
or a batch of shape ``(B, n)``; a tape :class:`~lprobe.jetdiff.Var` may stand
in for an unbatched vector.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from lprobe.errors import ConfigError
from lprobe.jetdiff import Jet2, activate

Kind = Literal["resnet", "fcnet", "linear1d"]


@dataclass(frozen=True)
class NetworkSpec:
    kind: Kind
    d: int = 1
    w: int = 4
    N: int = 1
    activation: str = "swish"

    def __post_init__(self):
        if self.kind not in ("resnet", "fcnet", "linear1d"):
            raise ConfigError(f"unknown network kind {self.kind!r}")
        if self.kind == "linear1d" and self.d != 1:
            raise ConfigError("linear1d network is one-dimensional")
        if self.d < 1 or self.w < 1 or self.N < 1:
            raise ConfigError(f"need d, w, N >= 1, got {self.d}, {self.w}, {self.N}")
        if self.activation not in ("swish", "sigmoid"):
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return cls(**data)


@dataclass(frozen=True)
class Filter:
    layer: int
    index: int
    start: int
    stop: int


@dataclass(frozen=True)
class FilterLayout:
    filters: tuple[Filter, ...]

    @property
    def size(self) -> int:
        return self.filters[-1].stop if self.filters else 0


def param_count(spec: NetworkSpec) -> int:
    if spec.kind == "linear1d":
        return 2
    N, w, d = spec.N, spec.w, spec.d
    return 2 * N * w * w + (d + 2 * N + 2) * w + 1


def layer_shapes(spec: NetworkSpec) -> list[tuple[int, int]]:
    """(out, in) for every affine layer, input layer first."""
    if spec.kind == "linear1d":
        return [(1, 1)]
    w = spec.w
    return [(w, spec.d)] + [(w, w)] * (2 * spec.N) + [(1, w)]


def filter_layout(spec: NetworkSpec) -> FilterLayout:
    filters = []
    start = 0
    for layer, (out, inp) in enumerate(layer_shapes(spec)):
        for j in range(out):
            filters.append(Filter(layer, j, start, start + inp + 1))
            start += inp + 1
    return FilterLayout(tuple(filters))


def _check(spec: NetworkSpec, theta) -> None:
    n = theta.shape[-1]
    if n != param_count(spec):
        raise ConfigError(
            f"parameter vector has length {n}, {spec.kind} spec needs {param_count(spec)}"
        )


def unpack(spec: NetworkSpec, theta):
    """Split ``theta`` into per-layer ``(W, b)`` pairs (batched views if batched)."""
    _check(spec, theta)
    layers = []
    start = 0
    batch = theta.shape[:-1]
    for out, inp in layer_shapes(spec):
        stop = start + out * (inp + 1)
        block = theta[..., start:stop].reshape(*batch, out, inp + 1)
        layers.append((block[..., :, :inp], block[..., :, inp]))
        start = stop
    return layers


def _affine(W, b, z: Jet2) -> Jet2:
    Wl = W[..., None, :, :]
    return Jet2(W @ z.val + b[..., :, None], Wl @ z.d1, Wl @ z.d2)


def forward(spec: NetworkSpec, theta, x: Jet2) -> Jet2:
    """Raw network output (no boundary factor) as a jet of shape (..., 1, P)."""
    _check(spec, theta)
    if spec.kind == "linear1d":
        # NN(x) = theta_1 x + theta_0
        t0 = theta[..., 0:1, None]
        t1 = theta[..., 1:2, None]
        return Jet2(t1 * x.val + t0, t1[..., None, :, :] * x.d1, t1[..., None, :, :] * x.d2)
    layers = unpack(spec, theta)
    act = spec.activation
    z = _affine(*layers[0], x)
    hidden = layers[1:-1]
    if spec.kind == "resnet":
        for i in range(spec.N):
            (W1, b1), (W2, b2) = hidden[2 * i], hidden[2 * i + 1]
            inner = activate(act, _affine(W1, b1, z))
            z = z + activate(act, _affine(W2, b2, inner))
    else:
        for W, b in hidden:
            z = activate(act, _affine(W, b, z))
    return _affine(*layers[-1], z)


def _box_factor(x: np.ndarray) -> Jet2:
    """prod_i x_i (x_i - 1) with its per-coordinate first and second derivatives."""
    q = x * (x - 1.0)
    d, p = x.shape
    val = np.prod(q, axis=0)
    d1 = np.empty((d, p))
    d2 = np.empty((d, p))
    for k in range(d):
        rest = np.prod(np.delete(q, k, axis=0), axis=0) if d > 1 else np.ones(p)
        d1[k] = (2.0 * x[k] - 1.0) * rest
        d2[k] = 2.0 * rest
    return Jet2(val[None, :], d1[:, None, :], d2[:, None, :])


def _sphere_factor(x: np.ndarray) -> Jet2:
    """|x| - 1 with per-coordinate derivatives (undefined at the origin)."""
    r = np.sqrt(np.sum(x * x, axis=0))
    d1 = x / r
    d2 = (r * r - x * x) / r**3
    return Jet2((r - 1.0)[None, :], d1[:, None, :], d2[:, None, :])


def boundary_factor(domain: str, x: np.ndarray) -> Jet2:
    if domain == "box":
        return _box_factor(x)
    if domain == "ball":
        return _sphere_factor(x)
    raise ConfigError(f"unknown domain {domain!r}")


def ansatz_apply(domain: str, spec: NetworkSpec, theta, points) -> Jet2:
    """Trial function vanishing on the Dirichlet boundary, as a jet over ``points``.

    ``points`` has shape (P, d).  Result components: val (..., P), d1/d2 (..., d, P).
    """
    x = np.asarray(points, dtype=float).T
    if x.shape[0] != spec.d:
        raise ConfigError(f"points have dimension {x.shape[0]}, network expects {spec.d}")
    nn = forward(spec, theta, Jet2.coordinates(x))
    u = nn * boundary_factor(domain, x)
    return Jet2(u.val[..., 0, :], u.d1[..., 0, :], u.d2[..., 0, :])


def eval_with_spatial_derivs(domain: str, spec: NetworkSpec, theta, x):
    """u, grad_x u and Laplacian of the trial function at one point or at points (P, d)."""
    theta = np.asarray(theta, dtype=float)
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) <= 1
    jet = ansatz_apply(domain, spec, theta, pts)
    u, g, lap = jet.val, np.moveaxis(jet.d1, -2, -1), jet.d2.sum(axis=-2)
    if single:
        return float(u[..., 0]), g[..., 0, :], float(lap[..., 0])
    return u, g, lap


def init_xavier(spec: NetworkSpec, seed: int) -> np.ndarray:
    """Xavier-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    if spec.kind == "linear1d":
        # one filter, fan_in = fan_out = 1: (bias, weight)
        return np.array([0.0, rng.uniform(-np.sqrt(3.0), np.sqrt(3.0))])
    parts = []
    for out, inp in layer_shapes(spec):
        bound = np.sqrt(6.0 / (inp + out))
        block = np.zeros((out, inp + 1))
        block[:, :inp] = rng.uniform(-bound, bound, size=(out, inp))
        parts.append(block.ravel())
    return np.concatenate(parts)
