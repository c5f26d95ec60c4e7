import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, replace
from typing import Callable, Optional, Tuple, Union
import numpy as np

from rmfnn_app.utils.constants import ProblemId, DAMPED_HF_DT, COST_REPEATS, TOLERANCE_TABLES
from rmfnn_app.utils.exceptions import RmfnnError, DesignError, NormalizationError, InvalidInput, \
    UnsupportedProblem, DimensionMismatch
from rmfnn_app.utils.ForwardModels import ForwardModels, ParamDomain, domain_for
from rmfnn_app.utils.NetworkManager import make_rng
from surrogate_lab.logger import logger


PROVENANCE_REAL = 'real'
PROVENANCE_SYNTHETIC = 'synthetic'

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass
class FidelityPair:
    """
    Low- and high-fidelity evaluators of one quantity of interest. Both map an (n, d) array to (n,) values.
    ratio_s is h_LF / h_HF for discretization pairs and None for asymptotic/exact pairs.
    """
    problem: str
    domain: ParamDomain
    q_lf: Evaluator
    q_hf: Evaluator
    order_q: float = 2.0
    ratio_s: Optional[float] = None
    h_hf: Optional[float] = None
    h_lf: Optional[float] = None
    cost_lf_s: float = 0.0
    cost_hf_s: float = 0.0

    def __post_init__(self):
        if self.order_q <= 0:
            raise InvalidInput('The order of accuracy must be positive, got {}'.format(self.order_q))
        if self.ratio_s is not None and self.ratio_s <= 1:
            raise InvalidInput('h_LF / h_HF must exceed 1, got {}'.format(self.ratio_s))
        if self.cost_lf_s < 0 or self.cost_hf_s < 0:
            raise InvalidInput('Costs must not be negative')


@dataclass(frozen=True)
class UniformGridStride:
    stride: int
    grid_shape: Optional[Tuple[int, ...]] = None


@dataclass(frozen=True)
class UniformGridCount:
    """
    Selects n_i evenly spaced indices of the flattened grid.
    """
    n_i: int
    grid_shape: Optional[Tuple[int, ...]] = None


@dataclass(frozen=True)
class UniformRandom:
    seed: int
    stride: int = 2


DesignRule = Union[UniformGridStride, UniformGridCount, UniformRandom]


@dataclass
class DesignPlan:
    """
    The N design points in record order; first_set marks the points of Theta_I.
    """
    points: np.ndarray
    first_set: np.ndarray
    rule: DesignRule
    domain: ParamDomain

    @property
    def theta_I(self) -> np.ndarray:
        return self.points[self.first_set]

    @property
    def theta_II(self) -> np.ndarray:
        return self.points[~self.first_set]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_i(self) -> int:
        return int(np.count_nonzero(self.first_set))

    @property
    def n_ii(self) -> int:
        return self.n - self.n_i

    @property
    def ratio(self) -> float:
        return self.n_i / self.n

    def summary(self) -> dict:
        return {'rule': type(self.rule).__name__, 'rule_args': asdict(self.rule), 'n': self.n, 'n_i': self.n_i,
                'n_ii': self.n_ii}


@dataclass(frozen=True)
class Normalization:
    """
    Per-dimension affine map of a box onto the unit cube.
    """
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise NormalizationError('Bounds of unequal length')
        widths = np.asarray(self.upper, dtype=np.float64) - np.asarray(self.lower, dtype=np.float64)
        if not np.all(widths > 0):
            raise NormalizationError('Degenerate normalization box [{}, {}]'.format(list(self.lower),
                                                                                   list(self.upper)))

    @classmethod
    def of_domain(cls, domain: ParamDomain) -> 'Normalization':
        return cls(tuple(domain.lower), tuple(domain.upper))

    @classmethod
    def of_values(cls, values: np.ndarray) -> 'Normalization':
        """
        Min-max map of the columns of values; constant columns get a unit width.
        """
        values = np.atleast_2d(values)
        lower = values.min(axis=0)
        upper = values.max(axis=0)
        upper = np.where(upper > lower, upper, lower + 1.0)
        return cls(tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def apply(self, points: np.ndarray) -> np.ndarray:
        lower = np.asarray(self.lower)
        return (np.asarray(points, dtype=np.float64) - lower) / (np.asarray(self.upper) - lower)

    def invert(self, unit_points: np.ndarray) -> np.ndarray:
        lower = np.asarray(self.lower)
        return np.asarray(unit_points, dtype=np.float64) * (np.asarray(self.upper) - lower) + lower

    def to_dict(self) -> dict:
        return {'lower': list(self.lower), 'upper': list(self.upper)}


@dataclass
class Dataset:
    """
    Records in plan order. q_hf is NaN where no high-fidelity value is known; provenance says whether a known
    q_hf came from the high-fidelity model or from the residual network. residual holds the network's predicted
    Q_HF - Q_LF on synthetic records and is NaN elsewhere. Targets are never normalized.
    """
    theta: np.ndarray
    q_lf: np.ndarray
    q_hf: np.ndarray
    provenance: np.ndarray
    normalization: Normalization
    normalized: bool = False
    residual: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.theta.shape[0]
        if self.residual is None:
            self.residual = np.full(n, np.nan)
        if self.q_lf.shape != (n,) or self.q_hf.shape != (n,) or self.provenance.shape != (n,) \
                or self.residual.shape != (n,):
            raise DimensionMismatch('Dataset columns of unequal length')
        synthetic = self.provenance == PROVENANCE_SYNTHETIC
        if np.any(np.isnan(self.q_hf[synthetic])):
            raise InvalidInput('Synthetic records must carry q_hf')

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.theta.shape[1]

    @property
    def has_hf(self) -> np.ndarray:
        return ~np.isnan(self.q_hf)

    @property
    def real_hf(self) -> np.ndarray:
        return self.has_hf & (self.provenance == PROVENANCE_REAL)

    @property
    def synthetic(self) -> np.ndarray:
        return self.provenance == PROVENANCE_SYNTHETIC

    def subset(self, mask: np.ndarray) -> 'Dataset':
        return replace(self, theta=self.theta[mask], q_lf=self.q_lf[mask], q_hf=self.q_hf[mask],
                       provenance=self.provenance[mask], residual=self.residual[mask])

    def unit_theta(self) -> np.ndarray:
        return self.theta if self.normalized else self.normalization.apply(self.theta)


class FidelityManager:
    """
    The FidelityManager class has class methods to build fidelity pairs and experimental designs, assemble
    datasets and measure the residual between fidelities.
    """

    @classmethod
    def pair_for(cls, problem: str, h_hf: Optional[float] = None, h_lf: Optional[float] = None,
                 dt: float = DAMPED_HF_DT) -> FidelityPair:
        """
        The fidelity pair of a problem. Step sizes of the discretized problems default to the loosest table row.
        """
        problem = ProblemId(problem) if problem in ProblemId.values else problem
        domain = domain_for(problem)
        if problem == ProblemId.DAMPED_OSCILLATOR:
            return FidelityPair(problem, domain,
                                q_lf=lambda points: np.asarray(ForwardModels.damped_lf(points[:, 0])),
                                q_hf=lambda points: np.asarray(ForwardModels.damped_hf(points[:, 0], dt)))
        if problem == ProblemId.PULSED_OSCILLATOR:
            return FidelityPair(problem, domain, q_lf=ForwardModels.pulsed_asymptotic, q_hf=ForwardModels.pulsed_exact)

        row = TOLERANCE_TABLES[problem][0]
        h_hf = row['h_hf'] if h_hf is None else h_hf
        h_lf = row['h_lf'] if h_lf is None else h_lf
        if not 0 < h_hf < h_lf:
            raise InvalidInput('Expected 0 < h_HF < h_LF, got {} and {}'.format(h_hf, h_lf))
        if problem == ProblemId.PARAMETRIC_IVP:
            return FidelityPair(problem, domain,
                                q_lf=lambda points: np.asarray(ForwardModels.ivp_rk2(points[:, 0], h_lf)),
                                q_hf=lambda points: np.asarray(ForwardModels.ivp_rk2(points[:, 0], h_hf)),
                                order_q=2.0, ratio_s=h_lf / h_hf, h_hf=h_hf, h_lf=h_lf)
        return FidelityPair(problem, domain,
                            q_lf=lambda points: np.asarray(ForwardModels.wave_fd(points, h_lf)[0]),
                            q_hf=lambda points: np.asarray(ForwardModels.wave_fd(points, h_hf)[0]),
                            order_q=2.0, ratio_s=h_lf / h_hf, h_hf=h_hf, h_lf=h_lf)

    @classmethod
    def exact_model(cls, problem: str) -> Evaluator:
        """
        The exact quantity of interest of the problems with a closed form.
        """
        if problem == ProblemId.PULSED_OSCILLATOR:
            return ForwardModels.pulsed_exact
        if problem == ProblemId.PARAMETRIC_IVP:
            return lambda points: np.asarray(ForwardModels.ivp_exact(np.asarray(points)[:, 0]))
        if problem == ProblemId.WAVE_IBVP:
            return lambda points: np.asarray(ForwardModels.wave_exact(points))
        raise UnsupportedProblem('No closed-form quantity of interest for {}'.format(problem))

    @classmethod
    def grid_shape(cls, domain: ParamDomain, n: int) -> Tuple[int, ...]:
        """
        Tensor grid with n points: the divisor pair of n whose aspect ratio is closest to the box's in log scale.
        """
        if domain.dim == 1:
            return (n,)
        if domain.dim != 2:
            raise DesignError('Grid designs in {} dimensions need an explicit grid shape'.format(domain.dim))
        widths = domain.upper_array - domain.lower_array
        target = math.log(widths[0] / widths[1])
        candidates = [(a, n // a) for a in range(2, n // 2 + 1) if n % a == 0]
        if not candidates:
            raise DesignError('{} points do not form a two-dimensional grid'.format(n))
        return min(candidates, key=lambda shape: abs(math.log(shape[0] / shape[1]) - target))

    @classmethod
    def tensor_grid(cls, domain: ParamDomain, shape: Tuple[int, ...]) -> np.ndarray:
        """
        Row-major flattened uniform tensor grid including the box corners.
        """
        if len(shape) != domain.dim or any(count < 1 for count in shape):
            raise DesignError('Grid shape {} does not fit a {}-dimensional domain'.format(shape, domain.dim))
        axes = [np.linspace(low, high, count) if count > 1 else np.array([0.5 * (low + high)])
                for low, high, count in zip(domain.lower, domain.upper, shape)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([axis.ravel() for axis in mesh], axis=1)

    @classmethod
    def build_design(cls, domain: ParamDomain, n: int, rule: DesignRule) -> DesignPlan:
        if n < 2:
            raise DesignError('A design needs at least two points, got {}'.format(n))
        first_set = np.zeros(n, dtype=bool)

        if isinstance(rule, UniformRandom):
            if rule.stride < 1:
                raise DesignError('The stride must be positive, got {}'.format(rule.stride))
            rng = make_rng(rule.seed)
            points = domain.lower_array + (domain.upper_array - domain.lower_array) * rng.random((n, domain.dim))
            first_set[rng.permutation(n)[::rule.stride]] = True
        else:
            shape = rule.grid_shape or cls.grid_shape(domain, n)
            if int(np.prod(shape)) != n:
                raise DesignError('Grid shape {} does not hold {} points'.format(shape, n))
            points = cls.tensor_grid(domain, tuple(shape))
            if isinstance(rule, UniformGridStride):
                if rule.stride < 2:
                    raise DesignError('The grid stride must be at least 2, got {}'.format(rule.stride))
                first_set[::rule.stride] = True
            elif isinstance(rule, UniformGridCount):
                if not 1 <= rule.n_i <= n:
                    raise DesignError('Cannot select {} of {} grid points'.format(rule.n_i, n))
                first_set[np.round(np.linspace(0, n - 1, rule.n_i)).astype(int)] = True
            else:
                raise DesignError('Unknown design rule {}'.format(rule))

        plan = DesignPlan(points, first_set, rule, domain)
        logger.info('Design with N = {}, N_I = {}, N_II = {}'.format(plan.n, plan.n_i, plan.n_ii))
        return plan

    @classmethod
    def evaluate(cls, evaluator: Evaluator, points: np.ndarray, label: str, workers: int = 1) -> np.ndarray:
        """
        Evaluates a model on the rows of points, split over a thread pool. Results keep the row order.
        A failing evaluation is re-raised naming the offending parameter point.
        """
        if points.shape[0] == 0:
            return np.empty(0)
        try:
            if workers <= 1 or points.shape[0] < 2 * workers:
                return np.asarray(evaluator(points), dtype=np.float64).reshape(-1)
            chunks = np.array_split(points, workers)
            with ThreadPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(evaluator, chunks))
            return np.concatenate([np.asarray(part, dtype=np.float64).reshape(-1) for part in parts])
        except RmfnnError as error:
            for point in points:
                try:
                    evaluator(point[None, :])
                except RmfnnError as point_error:
                    logger.error('{} evaluation failed at theta = {}'.format(label, point.tolist()))
                    raise type(point_error)('{} evaluation failed at theta = {}: {}'.format(
                        label, point.tolist(), point_error)) from point_error
            raise error

    @classmethod
    def assemble(cls, pair: FidelityPair, plan: DesignPlan, workers: int = 1) -> Dataset:
        """
        Low-fidelity values at all N points and high-fidelity values on Theta_I only. The mean wall time per
        evaluation is stored on the pair.
        """
        started = time.perf_counter()
        q_lf = cls.evaluate(pair.q_lf, plan.points, 'Low-fidelity', workers)
        pair.cost_lf_s = (time.perf_counter() - started) / plan.n

        q_hf = np.full(plan.n, np.nan)
        if plan.n_i:
            started = time.perf_counter()
            q_hf[plan.first_set] = cls.evaluate(pair.q_hf, plan.theta_I, 'High-fidelity', workers)
            pair.cost_hf_s = (time.perf_counter() - started) / plan.n_i

        provenance = np.full(plan.n, PROVENANCE_REAL, dtype=object)
        logger.info('Assembled {} records of {}, {} with high-fidelity values'.format(plan.n, pair.problem,
                                                                                   plan.n_i))
        return Dataset(plan.points.copy(), q_lf, q_hf, provenance, Normalization.of_domain(plan.domain))

    @classmethod
    def normalize(cls, data: Dataset) -> Dataset:
        """
        Maps the parameter inputs to the unit cube; the quantities of interest are left as they are.
        """
        if data.normalized:
            return data
        return replace(data, theta=data.normalization.apply(data.theta), normalized=True)

    @classmethod
    def denormalize(cls, data: Dataset) -> Dataset:
        if not data.normalized:
            return data
        return replace(data, theta=data.normalization.invert(data.theta), normalized=False)

    @classmethod
    def residual_bound(cls, s: float, q: float, eps_tol: float) -> float:
        """
        (1 + s^q) * eps_tol, the bound on the residual when the high-fidelity error meets eps_tol.
        """
        if not (s > 1 and q > 0 and eps_tol > 0):
            raise InvalidInput('Expected s > 1, q > 0 and eps_tol > 0, got {}, {}, {}'.format(s, q, eps_tol))
        return (1.0 + s ** q) * eps_tol

    @classmethod
    def residual_ratio(cls, pair: FidelityPair, grid: np.ndarray, workers: int = 1) -> Tuple[float, float, float]:
        """
        Returns max|F|, max|Q_HF| and their ratio over the grid, with F = Q_HF - Q_LF.
        """
        grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
        if grid.shape[0] == 0:
            raise DesignError('The grid is empty')
        q_hf = cls.evaluate(pair.q_hf, grid, 'High-fidelity', workers)
        q_lf = cls.evaluate(pair.q_lf, grid, 'Low-fidelity', workers)
        residual_max = float(np.max(np.abs(q_hf - q_lf)))
        hf_max = float(np.max(np.abs(q_hf)))
        if hf_max == 0:
            return residual_max, hf_max, 0.0 if residual_max == 0 else math.inf
        return residual_max, hf_max, residual_max / hf_max

    @classmethod
    def measure_costs(cls, pair: FidelityPair, points: np.ndarray,
                      repeats: int = COST_REPEATS) -> Tuple[float, float]:
        """
        Median wall time of single-point low- and high-fidelity evaluations, cycling through points.
        The medians are stored on the pair.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if repeats < 1 or points.shape[0] == 0:
            raise InvalidInput('Cost measurement needs points and at least one repeat')
        medians = list()
        for evaluator in (pair.q_lf, pair.q_hf):
            timings = list()
            for repeat in range(repeats):
                point = points[repeat % points.shape[0]][None, :]
                started = time.perf_counter()
                evaluator(point)
                timings.append(time.perf_counter() - started)
            medians.append(statistics.median(timings))
        pair.cost_lf_s, pair.cost_hf_s = medians
        logger.info('Measured W_LF = {:.3e} s and W_HF = {:.3e} s over {} repeats'.format(*medians, repeats))
        return medians[0], medians[1]
