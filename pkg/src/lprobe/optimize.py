"""Adam and the full-batch training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from lprobe.errors import NumericalError
from lprobe.jetdiff import grad
from lprobe.network import NetworkSpec, param_count
from lprobe.pde import (
    Problem,
    QuadratureSet,
    default_eval_quadrature,
    loss_function,
    monte_carlo,
    relative_l2_error,
)

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kwargs) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(state: AdamState, theta: np.ndarray, g: np.ndarray):
    """One bias-corrected Adam update.  Returns ``(new_state, new_theta)``."""
    g = np.asarray(g, dtype=float)
    if g.shape != theta.shape or state.m.shape != theta.shape:
        raise ValueError("gradient, parameters and optimizer state differ in length")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericalError(f"non-finite gradient at parameter(s) {bad[:10].tolist()}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
    return new, theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class Snapshot:
    epoch: int
    theta: np.ndarray
    loss: float
    error: float


@dataclass
class Trajectory:
    snapshots: list[Snapshot] = field(default_factory=list)
    failed: str | None = None

    def append(self, snap: Snapshot) -> None:
        if self.snapshots and snap.epoch <= self.snapshots[-1].epoch:
            raise ValueError("trajectory epochs must increase")
        self.snapshots.append(snap)

    @property
    def epochs(self) -> list[int]:
        return [s.epoch for s in self.snapshots]


def default_schedule(epochs: int, every: int = 500) -> set[int]:
    """Epoch 0, powers of two, every ``every`` epochs, and the last epoch."""
    marks = {0, epochs}
    k = 1
    while k <= epochs:
        marks.add(k)
        k *= 2
    if every > 0:
        marks.update(range(every, epochs + 1, every))
    return marks


class TrainingDiverged(NumericalError):
    def __init__(self, message: str, trajectory: Trajectory, theta: np.ndarray):
        super().__init__(message)
        self.trajectory = trajectory
        self.theta = theta


def train(
    problem: Problem,
    spec: NetworkSpec,
    loss_kind: str,
    theta0,
    epochs: int,
    quad: str | QuadratureSet,
    seed: int = 0,
    schedule: Iterable[int] | None = None,
    eval_quad: QuadratureSet | None = None,
    probe_quad: QuadratureSet | None = None,
    lr: float = 1e-3,
    grad_tol: float | None = None,
    callback: Callable[[Snapshot], None] | None = None,
) -> tuple[np.ndarray, Trajectory]:
    """Full-batch Adam, one step per epoch.

    ``quad`` is either a frozen :class:`QuadratureSet` reused every epoch
    (Simpson in 1D) or the string ``"mc:N"``, in which case a fresh Monte Carlo
    batch is drawn each epoch from the seed pair ``(seed, epoch)``.
    Snapshot losses are measured on ``probe_quad`` (default: the frozen
    training set, or ``mc:N`` drawn from ``seed`` for Monte Carlo training).
    """
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    theta = np.array(theta0, dtype=float)
    if theta.shape != (param_count(spec),):
        raise ValueError(f"initial parameters have shape {theta.shape}")
    if isinstance(quad, QuadratureSet):
        fixed = quad
        batch_size = None
    else:
        kind, _, n = quad.partition(":")
        if kind != "mc" or not n:
            raise ValueError(f"unsupported training quadrature {quad!r}")
        fixed, batch_size = None, int(n)
    if probe_quad is None:
        probe_quad = fixed or monte_carlo(problem.domain, problem.d, batch_size, seed)
    if eval_quad is None:
        eval_quad = default_eval_quadrature(problem)
    marks = set(default_schedule(epochs) if schedule is None else schedule)
    probe_loss = loss_function(loss_kind, problem, spec, probe_quad)
    train_loss = loss_function(loss_kind, problem, spec, fixed) if fixed else None

    state = AdamState.zeros(theta.size, lr=lr)
    traj = Trajectory()

    def record(epoch):
        snap = Snapshot(
            epoch,
            theta.copy(),
            float(probe_loss(theta)),
            float(relative_l2_error(problem, spec, theta, eval_quad)),
        )
        traj.append(snap)
        if callback is not None:
            callback(snap)

    for epoch in range(epochs + 1):
        try:
            if epoch in marks:
                record(epoch)
            if epoch == epochs:
                break
            fn = train_loss
            if fn is None:
                batch = monte_carlo(problem.domain, problem.d, batch_size, [seed, epoch])
                fn = loss_function(loss_kind, problem, spec, batch)
            value, g = grad(fn, theta)
            if not np.isfinite(value):
                raise NumericalError(f"loss is {value}")
            if grad_tol is not None and np.linalg.norm(g) < grad_tol:
                log.info("gradient norm below %g at epoch %d", grad_tol, epoch)
                if epoch not in marks:
                    record(epoch)
                break
            state, theta = adam_step(state, theta, g)
        except NumericalError as exc:
            traj.failed = f"epoch {epoch}: {exc}"
            raise TrainingDiverged(traj.failed, traj, theta) from exc
    return theta, traj


def retrain_from(
    problem: Problem,
    spec: NetworkSpec,
    loss_kind: str,
    theta_other,
    epochs: int,
    quad,
    grad_tol: float = 1e-4,
    **kwargs,
) -> tuple[np.ndarray, Trajectory, bool]:
    """Minimize ``loss_kind`` starting from another model's minimizer.

    Stops early once the gradient norm drops below ``grad_tol``.  The last
    element of the result reports whether that happened.
    """
    theta, traj = train(
        problem, spec, loss_kind, theta_other, epochs, quad, grad_tol=grad_tol, **kwargs
    )
    if isinstance(quad, QuadratureSet):
        _, g = grad(loss_function(loss_kind, problem, spec, quad), theta)
    else:
        ref = kwargs.get("probe_quad") or monte_carlo(
            problem.domain, problem.d, int(quad.split(":")[1]), kwargs.get("seed", 0)
        )
        _, g = grad(loss_function(loss_kind, problem, spec, ref), theta)
    return theta, traj, bool(np.linalg.norm(g) < grad_tol)
