import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union
import numpy as np

from rmfnn_app.utils.constants import ProblemId, DAMPED_A, DAMPED_B, DAMPED_U0, DAMPED_T, DAMPED_DOMAIN, \
    DAMPED_HF_DT, PULSED_A_DIAG, PULSED_U0, PULSED_DOMAIN, IVP_DECAY, IVP_T, IVP_DOMAIN, WAVE_T, WAVE_X_Q, \
    WAVE_SPATIAL_DOMAIN, WAVE_DOMAIN, WAVE_BATCH_SIZE
from rmfnn_app.utils.exceptions import InvalidStepSize, OutOfDomain, DimensionMismatch, UnsupportedProblem
from surrogate_lab.logger import logger


# grid values held by one batch of wave solves
WAVE_BATCH_NODES = 2 ** 22

Value = Union[float, np.ndarray]


@dataclass(frozen=True)
class ParamDomain:
    """
    Axis-aligned parameter box.
    """
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=np.float64)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lower_array) & (points <= self.upper_array), axis=1)

    def check(self, points: np.ndarray, allow_out_of_domain: bool = False):
        if allow_out_of_domain:
            return
        inside = self.contains(points)
        if not np.all(inside):
            offending = np.atleast_2d(points)[np.argmin(inside)]
            raise OutOfDomain('Parameter point {} lies outside [{}, {}]'.format(offending.tolist(), list(self.lower),
                                                                               list(self.upper)))


@dataclass
class SolverStats:
    """
    Cost of a solve. For a batch of parameter points wall_time_s is the mean time per point.
    """
    wall_time_s: float
    steps: int
    grid_nodes: int
    interpolated: bool = False


DOMAINS = {
    ProblemId.DAMPED_OSCILLATOR: ParamDomain(*DAMPED_DOMAIN),
    ProblemId.PULSED_OSCILLATOR: ParamDomain(*PULSED_DOMAIN),
    ProblemId.PARAMETRIC_IVP: ParamDomain(*IVP_DOMAIN),
    ProblemId.WAVE_IBVP: ParamDomain(*WAVE_DOMAIN),
}


def domain_for(problem: str) -> ParamDomain:
    try:
        return DOMAINS[ProblemId(problem)]
    except ValueError:
        raise UnsupportedProblem('Unknown problem: {}'.format(problem))


def as_batch(theta, dim: int) -> Tuple[np.ndarray, bool]:
    """
    Returns theta as an (n, dim) array and whether a single point was given.
    A single point is a scalar (dim 1) or a vector of length dim; a batch is an (n, dim) array, or an (n,) array
    when dim is 1.
    """
    points = np.asarray(theta, dtype=np.float64)
    if points.ndim == 0:
        if dim != 1:
            raise DimensionMismatch('Expected a point of dimension {}, got a scalar'.format(dim))
        return points.reshape(1, 1), True
    if points.ndim == 1:
        if dim == 1:
            return points.reshape(-1, 1), False
        if points.shape[0] != dim:
            raise DimensionMismatch('Expected a point of dimension {}, got {}'.format(dim, points.shape[0]))
        return points.reshape(1, dim), True
    if points.ndim != 2 or points.shape[1] != dim:
        raise DimensionMismatch('Expected points of dimension {}, got shape {}'.format(dim, points.shape))
    return points, False


def unbatch(values: np.ndarray, single: bool) -> Value:
    return float(values[0]) if single else values


def step_count(length: float, step: float, what: str) -> int:
    """
    Number of steps of size step covering length exactly; raises InvalidStepSize otherwise.
    """
    if not step > 0:
        raise InvalidStepSize('The {} must be positive, got {}'.format(what, step))
    count = int(round(length / step))
    if count < 1 or abs(count * step - length) > 1e-9 * length:
        raise InvalidStepSize('The {} {} does not divide {}'.format(what, step, length))
    return count


def expm2x2(matrix, t: float = 1.0) -> np.ndarray:
    """
    Exact exponential of t * matrix for a real 2x2 matrix.
    With mu = tr/2 and delta^2 = mu^2 - det, exp(M) = e^mu (c I + s (M - mu I)) where (c, s) are
    (cosh delta, sinh delta / delta) for real eigenvalues and (cos, sin / delta) for a complex pair.
    """
    m = t * np.asarray(matrix, dtype=np.float64)
    mu = 0.5 * (m[0, 0] + m[1, 1])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    delta_sq = mu * mu - det
    delta = math.sqrt(abs(delta_sq))
    if delta < 1e-8:
        c, s = 1.0, 1.0 + delta_sq / 6.0
    elif delta_sq > 0:
        c, s = math.cosh(delta), math.sinh(delta) / delta
    else:
        c, s = math.cos(delta), math.sin(delta) / delta
    shifted = m - mu * np.eye(2)
    return math.exp(mu) * (c * np.eye(2) + s * shifted)


def rk2_midpoint(rhs: Callable[[float, np.ndarray], np.ndarray], u0, t0: float, h: float,
                 steps: int) -> np.ndarray:
    """
    Explicit midpoint rule: u_{n+1} = u_n + h f(t_n + h/2, u_n + h/2 f(t_n, u_n)).
    """
    u = np.array(u0, dtype=np.float64)
    for n in range(steps):
        t = t0 + n * h
        k1 = rhs(t, u)
        k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1)
        u = u + h * k2
    return u


class ForwardModels:
    """
    The ForwardModels class has class methods evaluating the quantities of interest of the four parametric
    problems at high and low fidelity. Every evaluator is pure and accepts a single point or a batch.
    """

    # damped oscillator u' = A u + cos(theta t) b, Q = u_2(T)^2

    @classmethod
    def damped_hf(cls, theta, dt: float = DAMPED_HF_DT, allow_out_of_domain: bool = False,
                  b: Sequence[float] = DAMPED_B, u0: Sequence[float] = DAMPED_U0, T: float = DAMPED_T) -> Value:
        """
        Forward Euler from u(0) to T. When dt does not divide T the last step is shortened to land on T.
        """
        if not dt > 0:
            raise InvalidStepSize('The time step must be positive, got {}'.format(dt))
        points, single = as_batch(theta, 1)
        DOMAINS[ProblemId.DAMPED_OSCILLATOR].check(points, allow_out_of_domain)
        full_steps = int(round(T / dt))
        if abs(full_steps * dt - T) > 1e-9 * T:
            full_steps = int(math.floor(T / dt))
        last_step = T - full_steps * dt
        if last_step <= 1e-9 * T:
            last_step = 0.0

        (a00, a01), (a10, a11) = DAMPED_A
        b0, b1 = b
        if points.shape[0] == 1:
            # plain floats beat numpy per-step overhead for a single trajectory
            omega = float(points[0, 0])
            u1, u2 = float(u0[0]), float(u0[1])
            cos = math.cos
            for k in range(full_steps):
                forcing = cos(omega * k * dt)
                u1, u2 = u1 + dt * (a00 * u1 + a01 * u2 + forcing * b0), \
                    u2 + dt * (a10 * u1 + a11 * u2 + forcing * b1)
            if last_step:
                forcing = cos(omega * full_steps * dt)
                u2 = u2 + last_step * (a10 * u1 + a11 * u2 + forcing * b1)
            return unbatch(np.array([u2 * u2]), single)

        omega = points[:, 0]
        u1 = np.full(omega.shape, float(u0[0]))
        u2 = np.full(omega.shape, float(u0[1]))
        for k in range(full_steps):
            forcing = np.cos(omega * (k * dt))
            u1, u2 = u1 + dt * (a00 * u1 + a01 * u2 + forcing * b0), u2 + dt * (a10 * u1 + a11 * u2 + forcing * b1)
        if last_step:
            forcing = np.cos(omega * (full_steps * dt))
            u2 = u2 + last_step * (a10 * u1 + a11 * u2 + forcing * b1)
        return u2 * u2

    @classmethod
    def damped_lf(cls, theta, allow_out_of_domain: bool = False, b: Sequence[float] = DAMPED_B,
                  u0: Sequence[float] = DAMPED_U0, T: float = DAMPED_T) -> Value:
        """
        Leading term of the high-frequency expansion: u_LF(T) = e^{TA} u(0) + sin(theta T) / theta * b.
        """
        points, single = as_batch(theta, 1)
        DOMAINS[ProblemId.DAMPED_OSCILLATOR].check(points, allow_out_of_domain)
        omega = points[:, 0]
        if np.any(omega == 0):
            raise OutOfDomain('The low-fidelity model needs a non-zero frequency')
        homogeneous = expm2x2(DAMPED_A, T) @ np.asarray(u0, dtype=np.float64)
        u2 = homogeneous[1] + np.sin(omega * T) / omega * b[1]
        return unbatch(u2 * u2, single)

    # pulsed oscillator u_i' = a_i u_i + b_i cos(omega t), theta = (omega, t, b1, b2), Q = |u(t)|

    @classmethod
    def _pulsed_parts(cls, theta, allow_out_of_domain: bool):
        points, single = as_batch(theta, 4)
        DOMAINS[ProblemId.PULSED_OSCILLATOR].check(points, allow_out_of_domain)
        omega, t, forcing = points[:, 0], points[:, 1], points[:, 2:4]
        a = np.asarray(PULSED_A_DIAG)
        u0 = np.asarray(PULSED_U0)
        decay = np.exp(np.outer(t, a))
        return single, omega, t, forcing, a, u0, decay

    @classmethod
    def pulsed_exact(cls, theta, allow_out_of_domain: bool = False) -> Value:
        """
        u_i(t) = e^{a_i t} (u0_i - alpha_i) + alpha_i cos(omega t) + beta_i sin(omega t)
        with alpha_i = -a_i b_i / (a_i^2 + omega^2) and beta_i = omega b_i / (a_i^2 + omega^2).
        """
        single, omega, t, forcing, a, u0, decay = cls._pulsed_parts(theta, allow_out_of_domain)
        denominator = a[None, :] ** 2 + omega[:, None] ** 2
        alpha = -a[None, :] * forcing / denominator
        beta = omega[:, None] * forcing / denominator
        phase = (omega * t)[:, None]
        u = decay * (u0[None, :] - alpha) + alpha * np.cos(phase) + beta * np.sin(phase)
        return unbatch(np.sqrt(np.sum(u * u, axis=1)), single)

    @classmethod
    def pulsed_asymptotic(cls, theta, allow_out_of_domain: bool = False) -> Value:
        single, omega, t, forcing, a, u0, decay = cls._pulsed_parts(theta, allow_out_of_domain)
        if np.any(omega == 0):
            raise OutOfDomain('The asymptotic model needs a non-zero frequency')
        u = decay * u0[None, :] + (np.sin(omega * t) / omega)[:, None] * forcing
        return unbatch(np.sqrt(np.sum(u * u, axis=1)), single)

    # parametric IVP u' + 0.5 u = f(t, theta) with a manufactured solution, Q = |u(100)|

    @classmethod
    def ivp_solution(cls, t, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return 0.5 + 2.0 * np.sin(12.0 * theta) + 6.0 * np.sin(2.0 * t) * np.sin(10.0 * theta) * \
            (1.0 + 2.0 * theta ** 2)

    @classmethod
    def ivp_exact(cls, theta) -> Value:
        points, single = as_batch(theta, 1)
        return unbatch(np.abs(cls.ivp_solution(IVP_T, points[:, 0])), single)

    @classmethod
    def ivp_forcing(cls, t, theta) -> Value:
        """
        f = u_t + 0.5 u for the manufactured solution.
        """
        theta_array = np.asarray(theta, dtype=np.float64)
        u_t = 12.0 * np.cos(2.0 * t) * np.sin(10.0 * theta_array) * (1.0 + 2.0 * theta_array ** 2)
        value = u_t + IVP_DECAY * cls.ivp_solution(t, theta_array)
        return float(value) if np.ndim(value) == 0 else value

    @classmethod
    def ivp_rk2(cls, theta, h: float) -> Value:
        steps = step_count(IVP_T, h, 'time step')
        points, single = as_batch(theta, 1)
        theta_values = points[:, 0]

        def rhs(t, u):
            return -IVP_DECAY * u + cls.ivp_forcing(t, theta_values)

        u_final = rk2_midpoint(rhs, cls.ivp_solution(0.0, theta_values), 0.0, h, steps)
        return unbatch(np.abs(u_final), single)

    # wave IBVP u_tt - laplace(u) = f on [-1, 1]^2, Q = |u(T, x_Q)|

    @classmethod
    def wave_solution(cls, t, x1, x2, theta) -> np.ndarray:
        theta1, theta2 = theta[0], theta[1]
        return np.sin(theta1 * t - theta2 * x1) * np.sin(theta2 * x2)

    @classmethod
    def wave_exact(cls, theta, T: float = WAVE_T) -> Value:
        points, single = as_batch(theta, 2)
        values = np.sin(points[:, 0] * T - points[:, 1] * WAVE_X_Q[0]) * np.sin(points[:, 1] * WAVE_X_Q[1])
        return unbatch(np.abs(values), single)

    @classmethod
    def leapfrog_wave(cls, u0: np.ndarray, v0: np.ndarray, h: float, dt: float, steps: int,
                      forcing: Optional[Callable[[float], np.ndarray]] = None,
                      boundary: Optional[Callable[[float], np.ndarray]] = None) -> np.ndarray:
        """
        Leapfrog integration of u_tt = laplace(u) + f on a batch of square grids of shape (B, M+1, M+1).
        forcing(t) returns f on the whole grid; boundary(t) returns a grid whose edges carry the Dirichlet data.
        Missing callbacks mean zero forcing and homogeneous boundaries. The first step is the second-order
        Taylor start u1 = u0 + dt v0 + dt^2 / 2 (laplace(u0) + f0).
        """
        inv_h2 = 1.0 / (h * h)
        dt2 = dt * dt

        def acceleration(u, t):
            lap = (u[:, 2:, 1:-1] + u[:, :-2, 1:-1] + u[:, 1:-1, 2:] + u[:, 1:-1, :-2]
                   - 4.0 * u[:, 1:-1, 1:-1]) * inv_h2
            if forcing is not None:
                lap += forcing(t)[:, 1:-1, 1:-1]
            return lap

        def apply_boundary(u, t):
            edges = boundary(t) if boundary is not None else np.zeros_like(u)
            u[:, 0, :] = edges[:, 0, :]
            u[:, -1, :] = edges[:, -1, :]
            u[:, :, 0] = edges[:, :, 0]
            u[:, :, -1] = edges[:, :, -1]

        previous = np.array(u0, dtype=np.float64)
        if steps == 0:
            return previous
        current = previous.copy()
        current[:, 1:-1, 1:-1] += dt * v0[:, 1:-1, 1:-1] + 0.5 * dt2 * acceleration(previous, 0.0)
        apply_boundary(current, dt)
        for n in range(1, steps):
            following = np.empty_like(current)
            following[:, 1:-1, 1:-1] = 2.0 * current[:, 1:-1, 1:-1] - previous[:, 1:-1, 1:-1] + \
                dt2 * acceleration(current, n * dt)
            apply_boundary(following, (n + 1) * dt)
            previous, current = current, following
        return current

    @classmethod
    def _wave_grid(cls, h: float, T: float) -> Tuple[int, float, int, np.ndarray]:
        low, high = WAVE_SPATIAL_DOMAIN
        cells = step_count(high - low, h, 'grid length')
        dt = 0.5 * h
        steps = step_count(T, dt, 'time step h/2')
        nodes = low + h * np.arange(cells + 1)
        return cells, dt, steps, nodes

    @classmethod
    def _wave_batch(cls, points: np.ndarray, h: float, dt: float, steps: int, nodes: np.ndarray) -> np.ndarray:
        theta1 = points[:, 0][:, None, None]
        theta2 = points[:, 1][:, None]
        cos_x1 = np.cos(theta2 * nodes[None, :])[:, :, None]
        sin_x1 = np.sin(theta2 * nodes[None, :])[:, :, None]
        sin_x2 = np.sin(theta2 * nodes[None, :])[:, None, :]
        forcing_scale = (2.0 * points[:, 1] ** 2 - points[:, 0] ** 2)[:, None, None]
        cache = {}

        def exact(t):
            # sin(theta1 t - theta2 x1) = sin(theta1 t) cos(theta2 x1) - cos(theta1 t) sin(theta2 x1)
            if t not in cache:
                cache.clear()
                cache[t] = (np.sin(theta1 * t) * cos_x1 - np.cos(theta1 * t) * sin_x1) * sin_x2
            return cache[t]

        u0 = exact(0.0)
        v0 = theta1 * cos_x1 * sin_x2
        return cls.leapfrog_wave(u0, v0, h, dt, steps, forcing=lambda t: forcing_scale * exact(t), boundary=exact)

    @classmethod
    def wave_field(cls, theta, h: float, T: float = WAVE_T) -> np.ndarray:
        """
        Final finite-difference field for each parameter point, shape (n, M+1, M+1) with axis 1 along x1.
        """
        points, _ = as_batch(theta, 2)
        cells, dt, steps, nodes = cls._wave_grid(h, T)
        return cls._wave_batch(points, h, dt, steps, nodes)

    @classmethod
    def wave_fd(cls, theta, h: float, T: float = WAVE_T) -> Tuple[Value, SolverStats]:
        """
        Leapfrog solve on the uniform grid of length h with dt = h/2 and the manufactured data of the exact
        solution. The QoI is read at the node at x_Q when x_Q lies on the grid, bilinearly interpolated otherwise.
        """
        points, single = as_batch(theta, 2)
        cells, dt, steps, nodes = cls._wave_grid(h, T)
        grid_nodes = (cells + 1) ** 2
        batch_size = max(1, min(WAVE_BATCH_SIZE, WAVE_BATCH_NODES // grid_nodes))

        position = [(x - WAVE_SPATIAL_DOMAIN[0]) / h for x in WAVE_X_Q]
        index = [int(math.floor(p + 1e-9)) for p in position]
        weight = [p - i for p, i in zip(position, index)]
        weight = [0.0 if abs(w) < 1e-9 else w for w in weight]
        interpolated = any(weight)
        if interpolated:
            logger.warning('x_Q is not a grid node for h = {}; the QoI is interpolated bilinearly'.format(h))

        started = time.perf_counter()
        values = np.empty(points.shape[0])
        for start in range(0, points.shape[0], batch_size):
            field = cls._wave_batch(points[start:start + batch_size], h, dt, steps, nodes)
            i, j = index
            wi, wj = weight
            read = (1 - wi) * (1 - wj) * field[:, i, j]
            if wi:
                read = read + wi * (1 - wj) * field[:, i + 1, j]
            if wj:
                read = read + (1 - wi) * wj * field[:, i, j + 1]
            if wi and wj:
                read = read + wi * wj * field[:, i + 1, j + 1]
            values[start:start + batch_size] = np.abs(read)
        elapsed = time.perf_counter() - started
        stats = SolverStats(elapsed / points.shape[0], steps, grid_nodes, interpolated)
        return unbatch(values, single), stats
