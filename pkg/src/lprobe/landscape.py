"""Random-projection roughness of loss landscapes.

The central quantity is the roughness index at a reference point: draw ``M``
Gaussian directions, rescale each filter of each direction to the norm of the
corresponding filter of the reference point, sample the loss on ``m + 1``
evenly spaced points of ``[-l, l]`` along each direction, compute the
normalized total variation of every 1D profile, and report the coefficient of
variation (population std over mean) of those values.

Loss functions passed to this module map a batch of parameter vectors
``(B, n)`` to a vector of ``B`` losses, and must use a frozen quadrature.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from lprobe.errors import DegenerateProjection, NumericalError
from lprobe.network import FilterLayout

log = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProbeConfig:
    M: int = 100
    l: float = 0.01
    m: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"need at least 2 directions, got M={self.M}")
        if self.m < 2:
            raise ValueError(f"need at least 2 grid intervals, got m={self.m}")
        if not self.l > 0:
            raise ValueError(f"interval half-length must be positive, got l={self.l}")


@dataclass
class RoughnessReport:
    Ts: np.ndarray
    mu: float
    sigma: float
    index: float
    config: ProbeConfig
    excluded: list[int] = field(default_factory=list)

    def summary(self) -> dict:
        out = asdict(self.config)
        out.update(mu=self.mu, sigma=self.sigma, index=self.index, excluded=len(self.excluded))
        return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LPROBE_THREADS", "1")))
    except ValueError:
        return 1


def sample_directions(n: int, M: int, seed: int) -> np.ndarray:
    """``M`` iid standard-normal directions in R^n, shape (M, n)."""
    if M < 1:
        raise ValueError("need at least one direction")
    return np.random.default_rng(seed).standard_normal((M, n))


def filter_normalize(direction: np.ndarray, theta: np.ndarray, layout: FilterLayout) -> np.ndarray:
    """Rescale every filter block of ``direction`` to the Frobenius norm of ``theta``'s block.

    Blocks where either norm vanishes come out as zeros.
    """
    direction = np.asarray(direction, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if direction.shape != theta.shape or layout.size != theta.size:
        raise ValueError("direction, reference point and layout disagree in length")
    out = np.zeros_like(direction)
    for flt in layout.filters:
        block = slice(flt.start, flt.stop)
        dn = np.linalg.norm(direction[block])
        tn = np.linalg.norm(theta[block])
        if dn > 0.0 and tn > 0.0:
            out[block] = direction[block] * (tn / dn)
    return out


def probe_grid(l: float, m: int) -> np.ndarray:
    if not l > 0:
        raise ValueError(f"interval half-length must be positive, got l={l}")
    return np.linspace(-l, l, m + 1)


def project_1d(loss_fn: LossFn, theta, direction, l: float, m: int) -> np.ndarray:
    """Loss values at ``theta + s * direction`` for ``s`` on the uniform grid of [-l, l]."""
    s = probe_grid(l, m)
    batch = np.asarray(theta)[None, :] + s[:, None] * np.asarray(direction)[None, :]
    values = np.asarray(loss_fn(batch), dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError(f"non-finite loss at grid index {int(bad[0])}")
    return values


def normalized_tv(samples, l: float) -> float:
    """Discrete total variation over (interval length * range)."""
    f = np.asarray(samples, dtype=float)
    if f.size < 3:
        raise ValueError("need at least 3 samples")
    span = f.max() - f.min()
    if not span > 0.0:
        raise DegenerateProjection("profile is constant on the probe grid")
    return float(np.sum(np.abs(np.diff(f))) / (2.0 * l * span))


def index_from_tvs(Ts) -> tuple[float, float, float]:
    """(mean, population std, std / mean)."""
    Ts = np.asarray(Ts, dtype=float)
    mu = float(Ts.mean())
    sigma = float(Ts.std())
    return mu, sigma, sigma / mu


def roughness_index(
    loss_fn: LossFn,
    theta,
    layout: FilterLayout | None,
    config: ProbeConfig,
    directions: np.ndarray | None = None,
) -> RoughnessReport:
    """Roughness index at ``theta``.

    With ``layout=None`` the raw Gaussian directions are used without
    filter-wise normalization.  Profiles that are flat on the grid are left
    out of the statistics and listed in ``report.excluded``.
    """
    theta = np.asarray(theta, dtype=float)
    if directions is None:
        directions = sample_directions(theta.size, config.M, config.seed)
    if layout is not None:
        directions = [filter_normalize(d, theta, layout) for d in directions]

    def one(i):
        values = project_1d(loss_fn, theta, directions[i], config.l, config.m)
        try:
            return normalized_tv(values, config.l)
        except DegenerateProjection:
            return None

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(config.M)))
    else:
        results = [one(i) for i in range(config.M)]
    excluded = [i for i, t in enumerate(results) if t is None]
    Ts = np.array([t for t in results if t is not None])
    if Ts.size == 0:
        raise DegenerateProjection("every probed direction is flat")
    if excluded:
        log.warning("%d of %d directions flat on the grid, excluded", len(excluded), config.M)
    mu, sigma, index = index_from_tvs(Ts)
    return RoughnessReport(Ts, mu, sigma, index, config, excluded)


def eig_index(eigenvalues: Sequence[float], k: int) -> tuple[float, int]:
    """Sum of log10 of the top-``k`` eigenvalues.

    ``k`` is cut back to the last positive eigenvalue if needed; the count
    actually used is returned alongside the value.
    """
    lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    k = min(k, lam.size)
    used = int(np.sum(lam[:k] > 0.0))
    if used < k:
        log.info("V(k): truncated k from %d to %d (non-positive eigenvalues)", k, used)
    return float(np.sum(np.log10(lam[:used]))), used


def eig_index_curve(eigenvalues: Sequence[float]) -> list[tuple[int, float]]:
    """(k, V(k)) for every k up to the number of positive eigenvalues."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    pos = lam[lam > 0.0]
    return list(zip(range(1, pos.size + 1), np.cumsum(np.log10(pos)).tolist()))


@dataclass
class Slice2D:
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray  # values[i, j] = loss(theta + alphas[i] delta + betas[j] eta)
    delta: np.ndarray
    eta: np.ndarray


def slice_2d(
    loss_fn: LossFn,
    theta,
    layout: FilterLayout | None,
    seed: int,
    l: float,
    n: int,
) -> Slice2D:
    """Loss on an (n+1) x (n+1) grid spanned by two normalized random directions."""
    if n < 2:
        raise ValueError(f"grid needs n >= 2, got {n}")
    theta = np.asarray(theta, dtype=float)
    delta, eta = sample_directions(theta.size, 2, seed)
    if layout is not None:
        delta = filter_normalize(delta, theta, layout)
        eta = filter_normalize(eta, theta, layout)
    s = probe_grid(l, n)
    rows = []
    for a in s:
        batch = theta[None, :] + a * delta[None, :] + s[:, None] * eta[None, :]
        rows.append(np.asarray(loss_fn(batch), dtype=float))
    values = np.array(rows)
    if not np.all(np.isfinite(values)):
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise NumericalError(f"non-finite loss at grid point ({i}, {j})")
    return Slice2D(s, s.copy(), values, delta, eta)


def slice_1d(loss_fn: LossFn, theta, layout: FilterLayout | None, seed: int, l: float, m: int):
    """Grid and loss values along one normalized random direction."""
    theta = np.asarray(theta, dtype=float)
    d = sample_directions(theta.size, 1, seed)[0]
    if layout is not None:
        d = filter_normalize(d, theta, layout)
    return probe_grid(l, m), project_1d(loss_fn, theta, d, l, m)


def extremum_count(values: np.ndarray) -> int:
    """Sign changes of row-wise first differences, summed over rows and columns.

    A bowl has one turning point per grid line; a wrinkled surface has many.
    """
    total = 0
    for grid in (values, values.T):
        diffs = np.diff(grid, axis=1)
        signs = np.sign(diffs)
        total += int(np.sum((signs[:, 1:] * signs[:, :-1]) < 0))
    return total


def trajectory_roughness(
    loss_fn: LossFn,
    snapshots: Sequence[tuple[int, np.ndarray]],
    layout: FilterLayout | None,
    config: ProbeConfig,
) -> list[tuple[int, float]]:
    """Roughness index at each ``(epoch, theta)``; failures become NaN.

    The raw Gaussian directions are drawn once so every snapshot is probed
    along the same (re-normalized) directions.
    """
    if not snapshots:
        raise ValueError("no snapshots given")
    raw = sample_directions(np.asarray(snapshots[0][1]).size, config.M, config.seed)
    series = []
    for epoch, theta in snapshots:
        try:
            rep = roughness_index(loss_fn, theta, layout, config, directions=raw)
            series.append((epoch, rep.index))
        except (NumericalError, ValueError) as exc:
            log.warning("roughness failed at epoch %s: %s", epoch, exc)
            series.append((epoch, float("nan")))
    return series


def quadratic_loss(H: np.ndarray, center: np.ndarray | None = None) -> LossFn:
    """Batched 1/2 (t - c)^T H (t - c)."""
    H = np.asarray(H, dtype=float)
    c = np.zeros(H.shape[0]) if center is None else np.asarray(center, dtype=float)

    def fn(batch):
        z = np.atleast_2d(batch) - c
        return 0.5 * np.einsum("bi,ij,bj->b", z, H, z)

    return fn
