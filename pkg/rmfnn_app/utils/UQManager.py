import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, Optional, Sequence, Tuple
import numpy as np

from rmfnn_app.utils.constants import ProblemId, TOLERANCE_TABLES, PROBLEM_SCALING, MC_SHARDS, MC_CHUNK_SIZE, \
    REFERENCE_MC_SAMPLES, REFERENCE_SEED, QUADRATURE_PANELS_1D, QUADRATURE_PANELS_2D, QUADRATURE_NODES, \
    FAILURE_TRIALS_MIN, IVP_T, WAVE_SPATIAL_DOMAIN, TOLERANCE_STUDY_LAMBDA, INITIAL_LR, VALIDATION_FRACTION
from rmfnn_app.utils.exceptions import InvalidInput, UnsupportedProblem
from rmfnn_app.utils.FidelityManager import FidelityManager
from rmfnn_app.utils.ForwardModels import ParamDomain, domain_for
from rmfnn_app.utils.NetworkManager import NetworkSpec, TrainConfig
from surrogate_lab.logger import logger


Model = Callable[[np.ndarray], np.ndarray]


@dataclass
class ToleranceBudget:
    """
    One accuracy level of a Monte Carlo study: sample counts, step sizes and the training setup of both networks.
    extrapolated marks budgets scaled from a published row rather than taken from it.
    """
    problem: str
    eps_tol: float
    n_theta: int
    h_hf: float
    h_lf: float
    n: int
    n_i: int
    resnn_spec: NetworkSpec
    resnn_cfg: TrainConfig
    dnn_spec: NetworkSpec
    dnn_cfg: TrainConfig
    extrapolated: bool = False
    published_costs: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.eps_tol < 0.5:
            raise InvalidInput('eps_tol must lie in (0, 0.5), got {}'.format(self.eps_tol))
        if not 0 < self.h_hf < self.h_lf:
            raise InvalidInput('Expected 0 < h_HF < h_LF, got {} and {}'.format(self.h_hf, self.h_lf))
        if not 1 <= self.n_i < self.n:
            raise InvalidInput('Expected 1 <= N_I < N, got {} and {}'.format(self.n_i, self.n))
        if self.n_theta < 2:
            raise InvalidInput('N_theta must be at least 2, got {}'.format(self.n_theta))

    @property
    def ratio_s(self) -> float:
        return self.h_lf / self.h_hf

    @property
    def ratio_r(self) -> float:
        return self.n_i / self.n


@dataclass
class McEstimate:
    value: float
    stderr: float
    n_theta: int
    seed: int
    wall_time_s: float = field(default=0.0, compare=False)


@dataclass
class ErrorReport:
    """
    eps_rel is None when the reference expectation is zero.
    """
    eps_mse: float
    eps_abs: float
    eps_rel: Optional[float]
    n_eval: int
    reference: str
    reference_value: float


@dataclass
class Reference:
    value: float
    stderr: float
    method: str


@dataclass
class CostLedger:
    w_hf: float
    w_lf: float
    w_dnn: float
    w_resnn: float
    w_t1: float
    w_t2: float
    n_i: int
    n: int
    n_theta: int

    @property
    def totals(self) -> Dict[str, float]:
        return {
            'w_rmfnn': self.n_i * self.w_hf + self.n_theta * self.w_dnn,
            'w_hfm': self.n_theta * self.w_hf,
            'w_hfnn': self.n * self.w_hf + self.n_theta * self.w_dnn,
        }

    @property
    def totals_with_training(self) -> Dict[str, float]:
        totals = self.totals
        return {
            'w_rmfnn': totals['w_rmfnn'] + self.w_t1 + self.w_t2,
            'w_hfm': totals['w_hfm'],
            'w_hfnn': totals['w_hfnn'] + self.w_t2,
        }

    def to_dict(self) -> dict:
        data = asdict(self)
        data['totals'] = self.totals
        data['totals_with_training'] = self.totals_with_training
        return data


_reference_cache: Dict[str, Reference] = dict()
_reference_lock = threading.Lock()


class UQManager:
    """
    The UQManager class has class methods for Monte Carlo estimation, error metrics, tolerance budgets and the
    cost models.
    """

    @classmethod
    def _budget_from_row(cls, problem: str, row: dict, eps_tol: float, n_theta: int, h_hf: float, h_lf: float,
                         n: int, n_i: int, extrapolated: bool) -> ToleranceBudget:
        def fits(count, batch):
            # the batch has to fit the training part of the validation split
            return max(1, min(batch, count - int(math.ceil(count * VALIDATION_FRACTION))))

        dim = domain_for(problem).dim
        resnn_spec = NetworkSpec(dim + 1, tuple(row['resnn_widths']))
        dnn_spec = NetworkSpec(dim, tuple(row['dnn_widths']))
        resnn_cfg = TrainConfig(epochs=row['resnn_epochs'], batch_size=fits(n_i, row['resnn_batch']),
                                initial_lr=INITIAL_LR, tikhonov_lambda=TOLERANCE_STUDY_LAMBDA)
        dnn_cfg = TrainConfig(epochs=row['dnn_epochs'], batch_size=fits(n, row['dnn_batch']),
                              initial_lr=INITIAL_LR, tikhonov_lambda=TOLERANCE_STUDY_LAMBDA)
        published = {key: row[key] for key in ('w_hf', 'w_lf', 'w_t1', 'w_p1', 'w_t2', 'w_p2')} \
            if not extrapolated else {}
        return ToleranceBudget(problem, eps_tol, n_theta, h_hf, h_lf, n, n_i, resnn_spec, resnn_cfg, dnn_spec,
                               dnn_cfg, extrapolated, published)

    @classmethod
    def _snap_steps(cls, problem: str, h_hf: float, h_lf: float) -> Tuple[float, float]:
        """
        Rounds step sizes down to admissible ones: divisors of T for the IVP, h = 2 / M with M a multiple of 4
        for the wave problem so that x_Q stays a grid node.
        """
        if problem == ProblemId.PARAMETRIC_IVP:
            h_hf = IVP_T / math.ceil(IVP_T / h_hf - 1e-9)
            h_lf = IVP_T / math.ceil(IVP_T / h_lf - 1e-9)
        else:
            length = WAVE_SPATIAL_DOMAIN[1] - WAVE_SPATIAL_DOMAIN[0]
            h_hf = length / (4 * math.ceil(length / (4 * h_hf) - 1e-9))
            h_lf = length / (4 * math.ceil(length / (4 * h_lf) - 1e-9))
        if h_lf <= h_hf:
            raise InvalidInput('Snapped step sizes {} and {} are not ordered'.format(h_hf, h_lf))
        return h_hf, h_lf

    @classmethod
    def plan_tolerance(cls, problem: str, eps_tol: float, interpolate: bool = False) -> ToleranceBudget:
        """
        The published budget row for one of the tabulated tolerances. Other tolerances need interpolate: the nearest
        row (in log scale) is scaled with N_theta ~ eps^-2, N ~ eps^-p and h ~ eps^(1/q) at a fixed h_LF / h_HF.
        """
        if problem not in TOLERANCE_TABLES:
            raise UnsupportedProblem('No tolerance budgets for {}'.format(problem))
        rows = TOLERANCE_TABLES[ProblemId(problem)]
        for row in rows:
            if math.isclose(row['eps_tol'], eps_tol, rel_tol=1e-9):
                return cls._budget_from_row(problem, row, row['eps_tol'], row['n_theta'], row['h_hf'],
                                            row['h_lf'], row['n'], row['n_i'], False)
        if not interpolate:
            raise InvalidInput('{} is not a tabulated tolerance of {}; tabulated: {}'.format(
                eps_tol, problem, [row['eps_tol'] for row in rows]))
        if not 0 < eps_tol < 0.5:
            raise InvalidInput('eps_tol must lie in (0, 0.5), got {}'.format(eps_tol))

        scaling = PROBLEM_SCALING[ProblemId(problem)]
        row = min(rows, key=lambda r: abs(math.log(r['eps_tol'] / eps_tol)))
        factor = row['eps_tol'] / eps_tol
        n_theta = max(2, int(round(row['n_theta'] * factor ** 2)))
        n = max(3, int(round(row['n'] * factor ** scaling['p'])))
        n_i = min(n - 1, max(2, int(round(n * row['n_i'] / row['n']))))
        h_hf = row['h_hf'] * factor ** (-1.0 / scaling['q'])
        h_hf, h_lf = cls._snap_steps(problem, h_hf, h_hf * row['h_lf'] / row['h_hf'])
        logger.warning('Budget for {} at eps = {} extrapolated from the row at eps = {}'.format(
            problem, eps_tol, row['eps_tol']))
        return cls._budget_from_row(problem, row, eps_tol, n_theta, h_hf, h_lf, n, n_i, True)

    @classmethod
    def sample_uniform(cls, rng: np.random.Generator, domain: ParamDomain, count: int) -> np.ndarray:
        return domain.lower_array + (domain.upper_array - domain.lower_array) * rng.random((count, domain.dim))

    @classmethod
    def _shard_moments(cls, model: Model, domain: ParamDomain, count: int, seed_sequence: np.random.SeedSequence,
                       chunk_size: int) -> Tuple[int, float, float]:
        """
        Count, mean and sum of squared deviations of one shard.
        """
        rng = np.random.Generator(np.random.Philox(seed_sequence))
        total, mean, m2 = 0, 0.0, 0.0
        for start in range(0, count, chunk_size):
            size = min(chunk_size, count - start)
            values = np.asarray(model(cls.sample_uniform(rng, domain, size)), dtype=np.float64).reshape(-1)
            total, mean, m2 = cls._combine((total, mean, m2), (size, float(np.mean(values)),
                                                                float(np.sum((values - np.mean(values)) ** 2))))
        return total, mean, m2

    @classmethod
    def _combine(cls, left: Tuple[int, float, float], right: Tuple[int, float, float]) -> Tuple[int, float, float]:
        n_a, mean_a, m2_a = left
        n_b, mean_b, m2_b = right
        if n_a == 0:
            return right
        if n_b == 0:
            return left
        n = n_a + n_b
        delta = mean_b - mean_a
        return n, mean_a + delta * n_b / n, m2_a + m2_b + delta * delta * n_a * n_b / n

    @classmethod
    def mc_estimate(cls, model: Model, n_theta: int, domain: ParamDomain, seed: int, shards: int = MC_SHARDS,
                    workers: int = 1, chunk_size: int = MC_CHUNK_SIZE) -> McEstimate:
        """
        Sample mean of the model over n_theta uniform draws from the domain, with its standard error.
        The draws are split over a fixed number of shards with independent streams and reduced in shard order,
        so the estimate does not depend on the number of workers.
        """
        if n_theta < 2:
            raise InvalidInput('Monte Carlo needs at least two samples, got {}'.format(n_theta))
        started = time.perf_counter()
        shards = max(1, min(shards, n_theta))
        counts = [len(part) for part in np.array_split(np.arange(n_theta), shards)]
        streams = np.random.SeedSequence(int(seed)).spawn(shards)

        def run(index):
            return cls._shard_moments(model, domain, counts[index], streams[index], chunk_size)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                moments = list(executor.map(run, range(shards)))
        else:
            moments = [run(index) for index in range(shards)]
        total = (0, 0.0, 0.0)
        for shard in moments:
            total = cls._combine(total, shard)
        n, mean, m2 = total
        stderr = math.sqrt(m2 / (n - 1)) / math.sqrt(n)
        return McEstimate(mean, stderr, n_theta, seed, time.perf_counter() - started)

    @classmethod
    def evaluation_points(cls, domain: ParamDomain, n_eval: int, seed: int = REFERENCE_SEED) -> np.ndarray:
        """
        Evenly spaced tensor grid for one and two dimensions, seeded uniform samples otherwise.
        """
        if n_eval < 1:
            raise InvalidInput('n_eval must be positive, got {}'.format(n_eval))
        if domain.dim == 1:
            return FidelityManager.tensor_grid(domain, (n_eval,))
        if domain.dim == 2:
            side = max(1, int(round(math.sqrt(n_eval))))
            return FidelityManager.tensor_grid(domain, (side, side))
        return cls.sample_uniform(np.random.Generator(np.random.Philox(seed)), domain, n_eval)

    @classmethod
    def reference_expectation(cls, problem: str) -> Reference:
        """
        E[Q] of the exact quantity of interest: composite Gauss-Legendre quadrature in one and two dimensions,
        a long seeded Monte Carlo run otherwise. Cached per problem.
        """
        with _reference_lock:
            if problem in _reference_cache:
                return _reference_cache[problem]
        exact = FidelityManager.exact_model(problem)
        domain = domain_for(problem)
        if domain.dim <= 2:
            panels = QUADRATURE_PANELS_1D if domain.dim == 1 else QUADRATURE_PANELS_2D
            nodes, weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
            axes, axis_weights = list(), list()
            for low, high in zip(domain.lower, domain.upper):
                edges = np.linspace(low, high, panels + 1)
                half = 0.5 * np.diff(edges)
                centers = 0.5 * (edges[:-1] + edges[1:])
                axes.append((centers[:, None] + half[:, None] * nodes[None, :]).ravel())
                # weights normalized by the box width, so they sum to one
                axis_weights.append((half[:, None] * weights[None, :]).ravel() / (high - low))
            mesh = np.meshgrid(*axes, indexing='ij')
            points = np.stack([axis.ravel() for axis in mesh], axis=1)
            weight = axis_weights[0] if domain.dim == 1 else np.outer(axis_weights[0], axis_weights[1]).ravel()
            reference = Reference(float(np.sum(weight * exact(points))), 0.0,
                                  'gauss-legendre {}x{} per axis'.format(panels, QUADRATURE_NODES))
        else:
            estimate = cls.mc_estimate(exact, REFERENCE_MC_SAMPLES, domain, REFERENCE_SEED)
            reference = Reference(estimate.value, estimate.stderr,
                                  'monte carlo {} samples, seed {}'.format(REFERENCE_MC_SAMPLES, REFERENCE_SEED))
        with _reference_lock:
            _reference_cache[problem] = reference
        return reference

    @classmethod
    def error_report(cls, surrogate: Model, exact: Model, points: np.ndarray, estimate: Optional[float] = None,
                     reference: Optional[Reference] = None) -> ErrorReport:
        """
        eps_MSE over the evaluation points; eps_abs and eps_rel compare an estimate of E[Q] (the surrogate's mean
        over the points unless given) with the reference (the exact mean over the points unless given).
        """
        points = np.atleast_2d(points)
        if points.shape[0] < 1:
            raise InvalidInput('No evaluation points')
        predicted = np.asarray(surrogate(points), dtype=np.float64).reshape(-1)
        expected = np.asarray(exact(points), dtype=np.float64).reshape(-1)
        eps_mse = float(np.mean((predicted - expected) ** 2))
        if reference is None:
            reference = Reference(float(np.mean(expected)), 0.0, 'mean of the exact model over the evaluation points')
        value = float(np.mean(predicted)) if estimate is None else estimate
        eps_abs = abs(value - reference.value)
        if reference.value == 0:
            logger.warning('The reference expectation is zero; eps_rel is undefined')
            eps_rel = None
        else:
            eps_rel = eps_abs / abs(reference.value)
        return ErrorReport(eps_mse, eps_abs, eps_rel, points.shape[0], reference.method, reference.value)

    @classmethod
    def error_split(cls, surrogate: Model, exact: Model, points: np.ndarray, estimate: float) -> Dict[str, float]:
        """
        Splits |E[Q] - A| into the deterministic part E|Q - Q_DNN| and the statistical part |E[Q_DNN] - A|,
        both expectations taken over the evaluation points.
        """
        points = np.atleast_2d(points)
        predicted = np.asarray(surrogate(points), dtype=np.float64).reshape(-1)
        expected = np.asarray(exact(points), dtype=np.float64).reshape(-1)
        deterministic = float(np.mean(np.abs(expected - predicted)))
        statistical = abs(float(np.mean(predicted)) - estimate)
        return {'deterministic': deterministic, 'statistical': statistical,
                'eps_abs': abs(float(np.mean(expected)) - estimate), 'bound': deterministic + statistical}

    @classmethod
    def cost_totals(cls, w_hf: float, w_dnn: float, n_i: int, n: int, n_theta: int, w_lf: float = 0.0,
                    w_resnn: float = 0.0, w_t1: float = 0.0, w_t2: float = 0.0) -> CostLedger:
        values = (w_hf, w_dnn, n_i, n, n_theta, w_lf, w_resnn, w_t1, w_t2)
        if any(value < 0 for value in values):
            raise InvalidInput('Costs and counts must not be negative: {}'.format(values))
        return CostLedger(w_hf, w_lf, w_dnn, w_resnn, w_t1, w_t2, n_i, n, n_theta)

    @classmethod
    def cost_scaling(cls, problem: str, p_hat: float = 0.0) -> Dict[str, float]:
        """
        Predicted exponents e of W ~ eps^-e for the direct high-fidelity MC, HFNN-MC and RMFNN-MC.
        p_hat is the growth exponent of the network evaluation cost.
        """
        if problem not in PROBLEM_SCALING:
            raise UnsupportedProblem('No cost scaling for {}'.format(problem))
        scaling = PROBLEM_SCALING[ProblemId(problem)]
        solve = scaling['gamma'] / scaling['q']
        data = scaling['p'] + solve
        return {'hfm': 2.0 + solve, 'hfnn': max(data, 2.0 + p_hat), 'rmfnn': max(data, 2.0 + p_hat),
                'rmfnn_predict': 2.0 + p_hat, 'data': data}

    @classmethod
    def slope_fit(cls, xs: Sequence[float], ys: Sequence[float]) -> float:
        """
        Least-squares slope of log(ys) against log(xs).
        """
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.shape != ys.shape or xs.size < 3:
            raise InvalidInput('A slope fit needs at least three (x, y) pairs')
        if np.any(xs <= 0) or np.any(ys <= 0):
            raise InvalidInput('A log-log slope needs positive values')
        return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])

    @classmethod
    def failure_probability_check(cls, trials: Sequence[Tuple[float, float]]) -> float:
        """
        Fraction of trials whose error exceeds its tolerance.
        """
        if len(trials) < FAILURE_TRIALS_MIN:
            raise InvalidInput('At least {} trials are needed, got {}'.format(FAILURE_TRIALS_MIN, len(trials)))
        failures = sum(1 for error, tolerance in trials if error > tolerance)
        return failures / len(trials)
