"""Nonlinear flows on the 2-torus with analytic geometric oracles.

The vector field is

    v1 = 1 + sqrt(1 - beta) cos(theta1),  v2 = Omega (1 - sqrt(1 - beta) sin(theta2)),

with beta in (0, 1] controlling the nonlinearity (beta = 1 is a linear flow)
and Omega the frequency of the second angle. Data space is R^3 through either
the standard torus embedding with tube radius R or a non-conformally deformed
variant that stretches the third coordinate.

Everything here is deterministic: orbits use a fixed-step RK4 integrator on
unwrapped angles, and the printed closed-form orbit through (0, 0) serves as
an oracle at Omega = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import DegenerateVelocityError
from .kernels import KernelSpec, eval_cone
from .velocity import FdScheme, fd_weights


@dataclass(frozen=True)
class TorusModel:
    beta: float = 0.5
    omega: float = math.sqrt(30.0)
    R: float = 0.5
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")

    def sampling_interval(self, steps_per_period: int) -> float:
        """dt = 2 pi / (S min(1, Omega)) for S samples per quasi-period."""
        if steps_per_period < 2:
            raise ValueError("steps_per_period must be at least 2")
        return 2.0 * math.pi / (steps_per_period * min(1.0, self.omega))


class TorusState(NamedTuple):
    theta1: float
    theta2: float

    def wrapped(self) -> "TorusState":
        return TorusState(self.theta1 % (2.0 * math.pi), self.theta2 % (2.0 * math.pi))


def vector_field(model: TorusModel, state) -> tuple:
    """(v1, v2) at the given angles; accepts scalars or arrays."""
    theta1, theta2 = state
    r = math.sqrt(1.0 - model.beta)
    return 1.0 + r * np.cos(theta1), model.omega * (1.0 - r * np.sin(theta2))


def _rk4_steps(model: TorusModel, theta1: float, theta2: float, h: float, steps: int):
    r = math.sqrt(1.0 - model.beta)
    omega = model.omega
    cos = math.cos
    sin = math.sin
    for _ in range(steps):
        a1 = 1.0 + r * cos(theta1)
        b1 = omega * (1.0 - r * sin(theta2))
        a2 = 1.0 + r * cos(theta1 + 0.5 * h * a1)
        b2 = omega * (1.0 - r * sin(theta2 + 0.5 * h * b1))
        a3 = 1.0 + r * cos(theta1 + 0.5 * h * a2)
        b3 = omega * (1.0 - r * sin(theta2 + 0.5 * h * b2))
        a4 = 1.0 + r * cos(theta1 + h * a3)
        b4 = omega * (1.0 - r * sin(theta2 + h * b3))
        theta1 += (h / 6.0) * (a1 + 2.0 * (a2 + a3) + a4)
        theta2 += (h / 6.0) * (b1 + 2.0 * (b2 + b3) + b4)
    return theta1, theta2


def integrate_from(model: TorusModel, state, t: float, max_step: float = 1e-3) -> TorusState:
    """Flow the given state by time t (either sign) with fixed-step RK4.

    Angles are carried unwrapped internally; the result is wrapped to [0, 2 pi).
    """
    if not math.isfinite(t):
        raise ValueError("integration time must be finite")
    theta1, theta2 = float(state[0]), float(state[1])
    if t != 0.0:
        steps = max(1, math.ceil(abs(t) / max_step))
        h = t / steps
        theta1, theta2 = _rk4_steps(model, theta1, theta2, h, steps)
    return TorusState(theta1, theta2).wrapped()


def integrate_orbit(model: TorusModel, t: float, max_step: float = 1e-3) -> TorusState:
    """State at time t of the orbit through (0, 0) at t = 0."""
    return integrate_from(model, (0.0, 0.0), t, max_step=max_step)


def closed_form_orbit(beta: float, t: float) -> TorusState:
    """Printed closed-form orbit through (0, 0), valid for Omega = 1.

    tan(theta1 / 2) = (1 + sqrt(1 - beta)) beta^{-1/2} tan(beta t / 2)
    cot(theta2 / 2) = sqrt(1 - beta) + sqrt(beta) cot(sqrt(beta) t / 2)

    Branches are unwound so both angles increase continuously with t before
    wrapping to [0, 2 pi).
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    rb = math.sqrt(beta)
    r1 = math.sqrt(1.0 - beta)
    u = 0.5 * beta * t
    branch1 = math.floor(u / math.pi + 0.5)
    theta1 = 2.0 * (math.atan((1.0 + r1) / rb * math.tan(u)) + branch1 * math.pi)
    w = 0.5 * rb * t
    branch2 = math.floor(w / math.pi)
    frac = w - branch2 * math.pi
    sin_frac = math.sin(frac)
    cot = math.inf if sin_frac == 0.0 else math.cos(frac) / sin_frac
    # arccot with range (0, pi)
    theta2 = 2.0 * (math.atan2(1.0, r1 + rb * cot) + branch2 * math.pi)
    return TorusState(theta1 % (2.0 * math.pi), theta2 % (2.0 * math.pi))


def embed_standard(state, R: float = 0.5) -> np.ndarray:
    """Standard torus embedding (x1, x2, x3); accepts scalar angles or arrays."""
    theta1 = np.asarray(state[0], dtype=np.float64)
    theta2 = np.asarray(state[1], dtype=np.float64)
    ring = 1.0 + R * np.cos(theta2)
    return np.stack([ring * np.cos(theta1), ring * np.sin(theta1), np.sin(theta2)], axis=-1)


def embed_deformed(state, R: float = 0.5, gamma: float = 0.0) -> np.ndarray:
    """Deformed embedding: x3 stretched by exp(gamma z), z = (1 + R - x1)(1 + x3).

    gamma = 0 reproduces the standard embedding bitwise.
    """
    out = embed_standard(state, R)
    x1 = out[..., 0]
    x3 = out[..., 2]
    z = (1.0 + R - x1) * (1.0 + x3)
    out[..., 2] = x3 * np.exp(gamma * z)
    return out


def embed(model: TorusModel, state) -> np.ndarray:
    if model.gamma == 0.0:
        return embed_standard(state, model.R)
    return embed_deformed(state, model.R, model.gamma)


def orbit_angles(model: TorusModel, n_samples: int, steps_per_period: int,
                 substeps: int = 10) -> np.ndarray:
    """Angles of the orbit through (0, 0) sampled at the model's dt, unwrapped."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    dt = model.sampling_interval(steps_per_period)
    h = dt / substeps
    theta = np.empty((n_samples, 2))
    theta1 = 0.0
    theta2 = 0.0
    theta[0] = (theta1, theta2)
    for i in range(1, n_samples):
        theta1, theta2 = _rk4_steps(model, theta1, theta2, h, substeps)
        theta[i] = (theta1, theta2)
    return theta


def sample_trajectory(model: TorusModel, n_samples: int, steps_per_period: int) -> TimeSeriesDataset:
    """Embedded orbit samples at dt = 2 pi / (S min(1, Omega)), unit weights."""
    angles = orbit_angles(model, n_samples, steps_per_period)
    samples = embed(model, (angles[:, 0], angles[:, 1]))
    return TimeSeriesDataset(
        samples=np.atleast_2d(samples),
        dt=model.sampling_interval(steps_per_period),
        time_origin=0.0,
    )


def embedding_jacobian(model: TorusModel, state, step: float = 1e-6) -> np.ndarray:
    """3 x 2 Jacobian of the embedding in the angle chart.

    Analytic for the standard embedding; central differences (the stated step)
    for the deformed one.
    """
    theta1, theta2 = float(state[0]), float(state[1])
    if model.gamma == 0.0:
        R = model.R
        ring = 1.0 + R * math.cos(theta2)
        return np.array([
            [-ring * math.sin(theta1), -R * math.sin(theta2) * math.cos(theta1)],
            [ring * math.cos(theta1), -R * math.sin(theta2) * math.sin(theta1)],
            [0.0, math.cos(theta2)],
        ])
    cols = []
    for mu in range(2):
        plus = [theta1, theta2]
        minus = [theta1, theta2]
        plus[mu] += step
        minus[mu] -= step
        cols.append((embed(model, plus) - embed(model, minus)) / (2.0 * step))
    return np.stack(cols, axis=1)


def metric_g(model: TorusModel, state) -> np.ndarray:
    """Induced metric of the embedding in the angle chart.

    Standard embedding: diag((1 + R cos theta2)^2, R^2 sin^2 theta2 + cos^2 theta2).
    Deformed embedding: J^T J with the numerically differentiated Jacobian.
    """
    if model.gamma == 0.0:
        theta2 = float(state[1])
        R = model.R
        g11 = (1.0 + R * math.cos(theta2)) ** 2
        g22 = (R * math.sin(theta2)) ** 2 + math.cos(theta2) ** 2
        return np.array([[g11, 0.0], [0.0, g22]])
    jac = embedding_jacobian(model, state)
    return jac.T @ jac


def metric_h(model: TorusModel, state, zeta: float) -> np.ndarray:
    """Cone-kernel induced metric h = (g - zeta v* v*^T / |v|_g^2) / |v|_g^2."""
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"zeta must lie in [0, 1), got {zeta}")
    g = metric_g(model, state)
    v = np.array(vector_field(model, state))
    v_dual = g @ v
    speed_sq = float(v @ v_dual)
    if speed_sq <= 0.0:
        raise DegenerateVelocityError("vector field vanishes at the requested state")
    return (g - zeta * np.outer(v_dual, v_dual) / speed_sq) / speed_sq


@dataclass(frozen=True)
class HessianCheckReport:
    """Numerical derivatives of the kernel in the angle chart at a basepoint.

    The targets are - (2 / ||xi||^2) (g - zeta xi* xi*^T / ||xi||^2) with the
    finite-difference velocity (target_fd) and the same expression with xi
    replaced by ||v||_g dt (target_flow). Residuals are max-abs deviations
    relative to the max-abs of the target, which removes the 1/dt^2 growth of
    the raw Hessian so the dt -> 0 decay is visible.
    """

    step: float
    gradient: np.ndarray
    hessian: np.ndarray
    target_fd: np.ndarray
    target_flow: np.ndarray

    @property
    def gradient_residual(self) -> float:
        return float(np.max(np.abs(self.gradient)))

    @property
    def hessian_residual_fd(self) -> float:
        return float(np.max(np.abs(self.hessian - self.target_fd)) / np.max(np.abs(self.target_fd)))

    @property
    def hessian_residual_flow(self) -> float:
        return float(np.max(np.abs(self.hessian - self.target_flow)) / np.max(np.abs(self.target_flow)))


def _fd_velocity_at(model: TorusModel, state, dt: float, scheme: FdScheme) -> np.ndarray:
    """Stencil velocity of the flow through `state`, sampled at interval dt."""
    xi = np.zeros(3)
    for offset, w in fd_weights(scheme):
        if w != 0.0:
            point = integrate_from(model, state, offset * dt, max_step=dt / 10.0)
            xi += w * embed(model, point)
    return xi


def kernel_hessian_check(model: TorusModel, state, zeta: float, dt: float,
                         scheme: FdScheme = FdScheme("central", 4)) -> HessianCheckReport:
    """Differentiate the cone kernel numerically at a basepoint and compare with
    the local expansion.

    The kernel is evaluated on a 3 x 3 probe grid in the angle chart with step
    dt^2; every probe recomputes the stencil velocity of the flow through the
    probe point, so the check exercises the full kernel including its velocity
    dependence. The gradient target is zero; the Hessian targets are the local
    expansion with the stencil velocity and with the analytic flow speed.
    """
    theta = (float(state[0]), float(state[1]))
    spec = KernelSpec(family="cone_geometric", zeta=zeta, epsilon=1.0)
    weights = np.ones(3)
    step = dt * dt

    base_x = embed(model, theta)
    base_xi = _fd_velocity_at(model, theta, dt, scheme)

    def kernel_at(du1: float, du2: float) -> float:
        if du1 == 0.0 and du2 == 0.0:
            return 1.0
        probe = (theta[0] + du1, theta[1] + du2)
        probe_x = embed(model, probe)
        probe_xi = _fd_velocity_at(model, probe, dt, scheme)
        return eval_cone(base_x, probe_x, base_xi, probe_xi, spec, weights)

    k_pp = kernel_at(step, step)
    k_pm = kernel_at(step, -step)
    k_mp = kernel_at(-step, step)
    k_mm = kernel_at(-step, -step)
    k_p0 = kernel_at(step, 0.0)
    k_m0 = kernel_at(-step, 0.0)
    k_0p = kernel_at(0.0, step)
    k_0m = kernel_at(0.0, -step)

    gradient = np.array([(k_p0 - k_m0), (k_0p - k_0m)]) / (2.0 * step)
    hessian = np.empty((2, 2))
    hessian[0, 0] = (k_p0 - 2.0 + k_m0) / step**2
    hessian[1, 1] = (k_0p - 2.0 + k_0m) / step**2
    hessian[0, 1] = hessian[1, 0] = (k_pp - k_pm - k_mp + k_mm) / (4.0 * step**2)

    g = metric_g(model, theta)
    jac = embedding_jacobian(model, theta)

    xi_norm_sq = float(base_xi @ base_xi)
    xi_dual = jac.T @ base_xi
    target_fd = -(2.0 / xi_norm_sq) * (g - zeta * np.outer(xi_dual, xi_dual) / xi_norm_sq)

    v = np.array(vector_field(model, theta))
    v_dual = g @ v
    speed_sq = float(v @ v_dual)
    target_flow = -(2.0 / (speed_sq * dt * dt)) * (g - zeta * np.outer(v_dual, v_dual) / speed_sq)

    return HessianCheckReport(step=step, gradient=gradient, hessian=hessian,
                              target_fd=target_fd, target_flow=target_flow)
