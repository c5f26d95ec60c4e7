import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from typing import Callable, List, Optional, Tuple
import numpy as np

from rmfnn_app.utils.constants import ProblemId, Method, SWEEP_N_HF, SWEEP_SEEDS, SWEEP_WIDTH, SWEEP_LAYERS, \
    SWEEP_EPOCHS, SWEEP_BATCH_SIZE, SWEEP_N_TEST, SWEEP_TEST_SEED, TOLERANCE_STUDY_LEVELS, TOLERANCE_STUDY_TRIALS, \
    PEDAGOGY_POINTS, PEDAGOGY_SPLIT_THETA, DESK_MAX_N_THETA, DAMPED_HF_DT, INITIAL_LR, TIKHONOV_LAMBDA, \
    CLI_TIMING_REPEATS, PROBLEM_SCALING, TOLERANCE_TABLES, FAILURE_TRIALS_MIN, VALIDATION_FRACTION, \
    DATASET_FILE, PREDICTIONS_FILE, REPORT_FILE, CONVERGENCE_FILE
from rmfnn_app.utils.exceptions import InvalidInput, TrainingDiverged, UnsupportedProblem
from rmfnn_app.utils.ArtifactWriter import ArtifactWriter, first_error
from rmfnn_app.utils.FidelityManager import FidelityManager, UniformGridCount, UniformRandom
from rmfnn_app.utils.ForwardModels import ForwardModels, domain_for
from rmfnn_app.utils.NetworkManager import NetworkSpec, TrainConfig, make_rng
from rmfnn_app.utils.SurrogateBuilder import SurrogateBuilder, predictor
from rmfnn_app.utils.UQManager import UQManager, McEstimate
from surrogate_lab.logger import logger


EMIT_CHOICES = ['datasets', 'checkpoints', 'reports', 'figure_csv']
DEFAULT_METHODS = [Method.RMFNN, Method.MFNN, Method.HFNN]
TRAINABLE_METHODS = [Method.RMFNN, Method.RMFNN_ALT, Method.MFNN, Method.HFNN]
SWEEP_COLUMNS = ['method', 'n_hf', 'mean_mse', 'std_mse']
SWEEP_TRIAL_COLUMNS = ['width', 'depth', 'method', 'n_hf', 'seed', 'mse', 'diverged', 'epochs_run', 'train_time_s']
BOUND_COLUMNS = ['width', 'depth', 'method', 'norm_inf', 'c1', 'c2', 'bound']
CONVERGENCE_COLUMNS = ['eps_tol', 'cpu_time_hfm', 'cpu_time_rmfnn_total', 'cpu_time_rmfnn_predict', 'error']
SCATTER_COLUMNS = ['eps_tol', 'trial', 'seed', 'error', 'metric', 'failed']
# number of parameter points the per-evaluation cost of a network is measured on
COST_SAMPLE_POINTS = 10_000


@dataclass
class ExperimentConfig:
    """
    Settings of an experiment command. Missing training settings fall back to the protocol's defaults.
    """
    problem: Optional[str] = None
    methods: List[str] = field(default_factory=lambda: list(DEFAULT_METHODS))
    seeds: List[int] = field(default_factory=lambda: list(SWEEP_SEEDS))
    output_dir: str = ''
    emit: List[str] = field(default_factory=lambda: ['reports', 'figure_csv'])
    n_hf: List[int] = field(default_factory=lambda: list(SWEEP_N_HF))
    architectures: List[Tuple[int, int]] = field(default_factory=lambda: [(SWEEP_WIDTH, SWEEP_LAYERS)])
    shortcut_period: int = 2
    epochs: Optional[int] = None
    batch_size: Optional[int] = None
    initial_lr: float = INITIAL_LR
    tikhonov_lambda: float = TIKHONOV_LAMBDA
    n_test: int = SWEEP_N_TEST
    eps_tol: Optional[List[float]] = None
    trials: int = TOLERANCE_STUDY_TRIALS
    n: Optional[int] = None
    n_i: Optional[int] = None
    n_theta: Optional[int] = None
    run_hfm: bool = False
    full_scale: bool = False
    workers: int = 1
    dt: Optional[float] = None
    points: Optional[int] = None

    def __post_init__(self):
        if not self.methods:
            raise InvalidInput('At least one method is needed')
        if not self.seeds:
            raise InvalidInput('At least one seed is needed')
        unknown = [item for item in self.emit if item not in EMIT_CHOICES]
        if unknown:
            raise InvalidInput('Unknown artifact kind(s) {}; choose from {}'.format(unknown, EMIT_CHOICES))
        if self.workers < 1:
            raise InvalidInput('workers must be positive, got {}'.format(self.workers))

    def emits(self, kind: str) -> bool:
        return kind in self.emit


@dataclass
class RunOutcome:
    """
    What a protocol leaves behind: the files it wrote, one dict per trial for the ledger and a summary.
    """
    paths: List[str] = field(default_factory=list)
    trials: List[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def per_point_time(model: Callable[[np.ndarray], np.ndarray], points: np.ndarray, repeats: int) -> float:
    """
    Median wall time of evaluating the model on all points, divided by their number.
    """
    timings = list()
    for _ in range(repeats):
        started = time.perf_counter()
        model(points)
        timings.append(time.perf_counter() - started)
    return statistics.median(timings) / points.shape[0]


def fit_batch(count: int, batch: int) -> int:
    return max(1, min(batch, count - int(math.ceil(count * VALIDATION_FRACTION))))


class ExperimentRunner:
    """
    The ExperimentRunner class has class methods running the experiment protocols behind the management commands.
    """

    @classmethod
    def load_config(cls, path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
        """
        Reads an experiment config file, validates it and applies the command-line overrides on top.
        Overrides that are None are ignored.
        """
        from rmfnn_app.serializers import ExperimentConfigSerializer
        from surrogate_lab.utils import load_config

        content = dict()
        if path:
            if not os.path.isfile(path):
                raise FileNotFoundError('Config file {} does not exist'.format(path))
            content = load_config(path)
            if not isinstance(content, dict):
                raise InvalidInput('Config file {} must hold a mapping'.format(path))
        content.update({key: value for key, value in (overrides or {}).items() if value is not None})
        serializer = ExperimentConfigSerializer(data=content)
        if not serializer.is_valid():
            raise InvalidInput('Invalid config: {}'.format(first_error(serializer.errors)))
        return serializer.save()

    @classmethod
    def pedagogy(cls, output_dir: str, dt: float = DAMPED_HF_DT, points: int = PEDAGOGY_POINTS) -> RunOutcome:
        """
        Low- and high-fidelity responses of the damped oscillator on an even grid of the frequency range, their
        scatter and the residual.
        """
        domain = domain_for(ProblemId.DAMPED_OSCILLATOR)
        theta = np.linspace(domain.lower[0], domain.upper[0], points)
        q_lf = np.asarray(ForwardModels.damped_lf(theta), dtype=np.float64)
        q_hf = np.asarray(ForwardModels.damped_hf(theta, dt), dtype=np.float64)
        residual = q_hf - q_lf
        below = theta < PEDAGOGY_SPLIT_THETA

        outcome = RunOutcome()
        outcome.paths.append(ArtifactWriter.write_rows(
            [{'theta': t, 'q_lf': lf, 'q_hf': hf} for t, lf, hf in zip(theta, q_lf, q_hf)],
            ['theta', 'q_lf', 'q_hf'], os.path.join(output_dir, 'pedagogy_values.csv')))
        outcome.paths.append(ArtifactWriter.write_rows(
            [{'q_lf': lf, 'q_hf': hf, 'low_frequency': bool(low)} for lf, hf, low in zip(q_lf, q_hf, below)],
            ['q_lf', 'q_hf', 'low_frequency'], os.path.join(output_dir, 'pedagogy_scatter.csv')))
        outcome.paths.append(ArtifactWriter.write_rows(
            [{'theta': t, 'residual': f} for t, f in zip(theta, residual)],
            ['theta', 'residual'], os.path.join(output_dir, 'pedagogy_residual.csv')))
        outcome.summary = {
            'points': points, 'dt': dt,
            'correlation_below_split': float(np.corrcoef(q_lf[below], q_hf[below])[0, 1]),
            'correlation_above_split': float(np.corrcoef(q_lf[~below], q_hf[~below])[0, 1]),
            'residual_max': float(np.max(np.abs(residual))),
            'hf_max': float(np.max(np.abs(q_hf))),
        }
        logger.info('Pedagogy data written to {}'.format(output_dir))
        return outcome

    @classmethod
    def _sweep_trial(cls, config: ExperimentConfig, problem: str, width: int, depth: int, n_hf: int, seed: int,
                     test_points: np.ndarray, test_values: np.ndarray) -> List[dict]:
        """
        Trains every configured method on the same N_HF paired records and returns their test MSEs.
        """
        pair = FidelityManager.pair_for(problem)
        plan = FidelityManager.build_design(pair.domain, n_hf, UniformRandom(seed, stride=1))
        data = FidelityManager.assemble(pair, plan)
        spec = NetworkSpec(pair.domain.dim, (width,) * depth, shortcut_period=config.shortcut_period, seed=seed)
        cfg = TrainConfig(epochs=SWEEP_EPOCHS if config.epochs is None else config.epochs,
                          batch_size=fit_batch(n_hf, config.batch_size or SWEEP_BATCH_SIZE),
                          initial_lr=config.initial_lr, tikhonov_lambda=config.tikhonov_lambda, seed=seed)
        trial_dir = os.path.join(config.output_dir, 'trials', 'K{}_L{}'.format(width, depth), 'n{}'.format(n_hf),
                                 'seed{}'.format(seed))
        if config.emits('datasets'):
            ArtifactWriter.write_dataset(data, os.path.join(trial_dir, DATASET_FILE))

        results = list()
        for method in config.methods:
            result = {'method': method, 'seed': seed, 'n_hf': n_hf, 'width': width, 'depth': depth,
                      'mse': None, 'diverged': False, 'epochs_run': None, 'train_time_s': None}
            try:
                if method == Method.RMFNN:
                    surrogate = SurrogateBuilder.rmfnn_alt_build(pair, data, spec, cfg)
                    report = surrogate.residual.report
                elif method == Method.MFNN:
                    surrogate = SurrogateBuilder.mfnn_build(pair, data, spec, cfg)
                    report = surrogate.report
                elif method == Method.HFNN:
                    surrogate = SurrogateBuilder.hfnn_build(data, spec, cfg)
                    report = surrogate.report
                else:
                    raise InvalidInput('The sweep compares RMFNN, MFNN and HFNN, got {}'.format(method))
            except TrainingDiverged as error:
                logger.warning('{} diverged for N_HF = {}, seed {}: {}'.format(method, n_hf, seed, error))
                result['diverged'] = True
                results.append(result)
                continue
            predicted = predictor(surrogate)(test_points)
            result.update(mse=float(np.mean((predicted - test_values) ** 2)), epochs_run=report.epochs_run,
                          train_time_s=report.wall_time_s)
            if config.emits('checkpoints'):
                ArtifactWriter.save_bundle(os.path.join(trial_dir, method), surrogate, problem,
                                           plan=plan.summary(), seeds={'design': seed, 'training': seed},
                                           metrics={'test_mse': result['mse']})
            results.append(result)
        logger.info('Sweep trial K = {}, L = {}, N_HF = {}, seed {} finished'.format(width, depth, n_hf, seed))
        return results

    @classmethod
    def sweep(cls, config: ExperimentConfig) -> RunOutcome:
        """
        Test MSE of RMFNN, MFNN and HFNN against the number of high-fidelity samples, for every architecture and
        seed, with the fitted approximation bound of each architecture.
        """
        problem = config.problem or ProblemId.PULSED_OSCILLATOR
        exact = FidelityManager.exact_model(problem)
        pair = FidelityManager.pair_for(problem)
        test_points = UQManager.sample_uniform(make_rng(SWEEP_TEST_SEED), pair.domain, config.n_test)
        test_values = np.asarray(exact(test_points), dtype=np.float64)
        hf_inf = float(np.max(np.abs(test_values)))
        f_inf = float(np.max(np.abs(test_values - np.asarray(pair.q_lf(test_points), dtype=np.float64))))

        keys = [(width, depth, n_hf, seed) for width, depth in config.architectures
                for n_hf in config.n_hf for seed in config.seeds]

        def run(key):
            return cls._sweep_trial(config, problem, *key, test_points, test_values)

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as executor:
                per_key = list(executor.map(run, keys))
        else:
            per_key = [run(key) for key in keys]
        trials = [result for results in per_key for result in results]

        outcome = RunOutcome(trials=trials)
        aggregates, observations, excluded = dict(), list(), 0
        for width, depth in config.architectures:
            rows = list()
            for method in config.methods:
                for n_hf in config.n_hf:
                    selected = [t for t in trials if (t['width'], t['depth'], t['method'], t['n_hf']) ==
                                (width, depth, method, n_hf)]
                    values = [t['mse'] for t in selected if not t['diverged']]
                    excluded += len(selected) - len(values)
                    mean = float(np.mean(values)) if values else None
                    std = float(np.std(values, ddof=1)) if len(values) > 1 else (0.0 if values else None)
                    rows.append({'method': method, 'n_hf': n_hf, 'mean_mse': mean, 'std_mse': std})
                    if method == Method.HFNN and values:
                        observations.append((width, depth, hf_inf, mean))
            aggregates['K{}_L{}'.format(width, depth)] = rows
            if config.emits('figure_csv'):
                outcome.paths.append(ArtifactWriter.write_rows(
                    rows, SWEEP_COLUMNS, os.path.join(config.output_dir, 'sweep_K{}_L{}.csv'.format(width, depth))))
        if excluded:
            logger.warning('{} diverged trial(s) excluded from the means'.format(excluded))

        bounds = list()
        if observations:
            c1, c2 = SurrogateBuilder.fit_bound_constants(observations)
            for width, depth in config.architectures:
                for method, norm in ((Method.HFNN, hf_inf), (Method.RMFNN, f_inf)):
                    bounds.append({'width': width, 'depth': depth, 'method': method, 'norm_inf': norm, 'c1': c1,
                                   'c2': c2, 'bound': SurrogateBuilder.conjecture_bound(width, depth, norm, c1, c2)})
        else:
            logger.warning('No HFNN results to fit the bound constants to')

        if config.emits('figure_csv'):
            outcome.paths.append(ArtifactWriter.write_rows(
                [{column: trial[column] for column in SWEEP_TRIAL_COLUMNS} for trial in trials],
                SWEEP_TRIAL_COLUMNS, os.path.join(config.output_dir, 'sweep_trials.csv')))
            if bounds:
                outcome.paths.append(ArtifactWriter.write_rows(
                    bounds, BOUND_COLUMNS, os.path.join(config.output_dir, 'sweep_bounds.csv')))
        outcome.summary = {'aggregates': aggregates, 'bounds': bounds, 'excluded_diverged': excluded,
                           'hf_inf_norm': hf_inf, 'residual_inf_norm': f_inf, 'n_test': config.n_test}
        if config.emits('reports'):
            outcome.paths.append(ArtifactWriter.write_report(
                {'command': 'sweep', 'problem': problem, 'seeds': list(config.seeds), 'summary': outcome.summary},
                os.path.join(config.output_dir, REPORT_FILE)))
        return outcome

    @classmethod
    def _check_scale(cls, budgets, config: ExperimentConfig):
        for budget in budgets:
            n_theta = config.n_theta or budget.n_theta
            if n_theta > DESK_MAX_N_THETA and not config.full_scale:
                raise InvalidInput('eps_tol = {} needs N_theta = {}; pass --full-scale to run it'.format(
                    budget.eps_tol, n_theta))

    @classmethod
    def _seeded(cls, budget, seed: int):
        return replace(budget, resnn_spec=replace(budget.resnn_spec, seed=seed),
                       resnn_cfg=replace(budget.resnn_cfg, seed=seed), dnn_spec=replace(budget.dnn_spec, seed=seed),
                       dnn_cfg=replace(budget.dnn_cfg, seed=seed))

    @classmethod
    def tolerance_study(cls, config: ExperimentConfig) -> RunOutcome:
        """
        For each tolerance: builds the RMFNN surrogate of the budget, repeats the surrogate Monte Carlo estimate
        over independent seeds, and compares its CPU time with the direct high-fidelity estimator (measured when
        run_hfm is set, modelled from W_HF otherwise).
        """
        problem = config.problem or ProblemId.PARAMETRIC_IVP
        if problem not in TOLERANCE_TABLES:
            raise UnsupportedProblem('No tolerance study for {}'.format(problem))
        levels = config.eps_tol or TOLERANCE_STUDY_LEVELS[problem]
        budgets = [UQManager.plan_tolerance(problem, eps, interpolate=True) for eps in levels]
        cls._check_scale(budgets, config)

        seed = int(config.seeds[0])
        metric = PROBLEM_SCALING[ProblemId(problem)]['metric']
        reference = UQManager.reference_expectation(problem)
        exact = FidelityManager.exact_model(problem)
        domain = domain_for(problem)
        outcome = RunOutcome()
        convergence, scatter, failure_checks = list(), list(), list()

        for budget in budgets:
            budget = cls._seeded(budget, seed)
            if config.epochs is not None:
                budget = replace(budget, resnn_cfg=replace(budget.resnn_cfg, epochs=config.epochs),
                                 dnn_cfg=replace(budget.dnn_cfg, epochs=config.epochs))
            n_theta = config.n_theta or budget.n_theta
            pair = FidelityManager.pair_for(problem, budget.h_hf, budget.h_lf)
            plan = FidelityManager.build_design(domain, budget.n, UniformGridCount(budget.n_i))
            result = SurrogateBuilder.rmfnn_build(pair, plan, budget.resnn_spec, budget.resnn_cfg, budget.dnn_spec,
                                                  budget.dnn_cfg, config.workers)
            w_lf, w_hf = FidelityManager.measure_costs(pair, plan.points, CLI_TIMING_REPEATS)
            cost_points = UQManager.sample_uniform(make_rng(seed), domain, COST_SAMPLE_POINTS)
            w_dnn = per_point_time(result.surrogate.predict, cost_points, CLI_TIMING_REPEATS)
            cost_lf = np.asarray(pair.q_lf(cost_points[:budget.n_i]), dtype=np.float64)
            w_resnn = per_point_time(lambda points: result.residual.predict(points, cost_lf), cost_points[:budget.n_i],
                                     CLI_TIMING_REPEATS)
            ledger = UQManager.cost_totals(w_hf, w_dnn, budget.n_i, budget.n, n_theta, w_lf=w_lf, w_resnn=w_resnn,
                                           w_t1=result.resnn_report.wall_time_s, w_t2=result.dnn_report.wall_time_s)

            estimates, errors = list(), list()
            for trial in range(config.trials):
                estimate = UQManager.mc_estimate(result.surrogate.predict, n_theta, domain, seed + trial,
                                                 workers=config.workers)
                error = abs(estimate.value - reference.value)
                if metric == 'rel':
                    error /= abs(reference.value)
                estimates.append(estimate)
                errors.append(error)
                failure_checks.append((error, budget.eps_tol))
                scatter.append({'eps_tol': budget.eps_tol, 'trial': trial, 'seed': seed + trial, 'error': error,
                                'metric': metric, 'failed': error > budget.eps_tol})
                outcome.trials.append({'method': Method.RMFNN, 'seed': seed + trial, 'n_hf': budget.n_i,
                                       'eps_tol': budget.eps_tol, 'error': error,
                                       'epochs_run': result.dnn_report.epochs_run,
                                       'train_time_s': result.resnn_report.wall_time_s + result.dnn_report.wall_time_s})
            predict_time = statistics.median(estimate.wall_time_s for estimate in estimates)

            hfm_estimate = None
            if config.run_hfm:
                hfm_estimate = UQManager.mc_estimate(pair.q_hf, n_theta, domain, seed, workers=config.workers)
                hfm_time = hfm_estimate.wall_time_s
                hfm_error = abs(hfm_estimate.value - reference.value)
                if metric == 'rel':
                    hfm_error /= abs(reference.value)
                outcome.trials.append({'method': Method.HFM, 'seed': seed, 'eps_tol': budget.eps_tol,
                                       'error': hfm_error})
            else:
                hfm_time = ledger.totals['w_hfm']
            total_time = budget.n_i * w_hf + budget.n * w_lf + ledger.w_t1 + ledger.w_t2 + predict_time
            convergence.append({'eps_tol': budget.eps_tol, 'cpu_time_hfm': hfm_time,
                                'cpu_time_rmfnn_total': total_time, 'cpu_time_rmfnn_predict': predict_time,
                                'error': statistics.median(errors)})

            if config.emits('datasets'):
                outcome.paths.append(ArtifactWriter.write_dataset(result.dataset, os.path.join(
                    config.output_dir, 'eps_{:g}'.format(budget.eps_tol), DATASET_FILE)))
            if config.emits('checkpoints'):
                outcome.paths.append(ArtifactWriter.save_bundle(
                    os.path.join(config.output_dir, 'eps_{:g}'.format(budget.eps_tol), 'bundle'), result.surrogate,
                    problem, residual=result.residual, plan=plan.summary(), seeds={'training': seed},
                    h_hf=budget.h_hf, h_lf=budget.h_lf))
            if config.emits('reports'):
                report_points = UQManager.evaluation_points(domain, COST_SAMPLE_POINTS)
                error_report = UQManager.error_report(result.surrogate.predict, exact, report_points,
                                                      estimate=statistics.median(e.value for e in estimates),
                                                      reference=reference)
                outcome.paths.append(ArtifactWriter.write_report({
                    'command': 'tolerance_study', 'problem': problem, 'budget': asdict(budget),
                    'estimates': [asdict(e) for e in estimates + ([hfm_estimate] if hfm_estimate else [])],
                    'errors': [asdict(error_report)], 'costs': ledger.to_dict(),
                    'seeds': [seed + trial for trial in range(config.trials)],
                    'training': {'resnn': result.resnn_report.to_dict(), 'dnn': result.dnn_report.to_dict()},
                    'summary': {'plan': plan.summary(), 'metric': metric, 'hfm_measured': config.run_hfm,
                                'timing_repeats': CLI_TIMING_REPEATS},
                }, os.path.join(config.output_dir, 'report_eps_{:g}.json'.format(budget.eps_tol))))
            logger.info('Tolerance {} of {} finished'.format(budget.eps_tol, problem))

        outcome.summary = {'problem': problem, 'metric': metric, 'reference': asdict(reference),
                           'predicted_exponents': UQManager.cost_scaling(problem), 'convergence': convergence}
        if len(convergence) >= 3:
            eps = [row['eps_tol'] for row in convergence]
            outcome.summary['slopes'] = {
                key: UQManager.slope_fit(eps, [row[key] for row in convergence])
                for key in ('cpu_time_hfm', 'cpu_time_rmfnn_total', 'cpu_time_rmfnn_predict')}
        if len(failure_checks) >= FAILURE_TRIALS_MIN:
            outcome.summary['failure_probability'] = UQManager.failure_probability_check(failure_checks)

        if config.emits('figure_csv'):
            outcome.paths.append(ArtifactWriter.write_rows(
                convergence, CONVERGENCE_COLUMNS, os.path.join(config.output_dir, CONVERGENCE_FILE)))
            outcome.paths.append(ArtifactWriter.write_rows(
                scatter, SCATTER_COLUMNS, os.path.join(config.output_dir, 'error_scatter.csv')))
        if config.emits('reports'):
            outcome.paths.append(ArtifactWriter.write_report(
                {'command': 'tolerance_study', 'problem': problem, 'seeds': list(config.seeds),
                 'summary': outcome.summary}, os.path.join(config.output_dir, REPORT_FILE)))
        return outcome

    @classmethod
    def _training_setup(cls, problem: str, config: ExperimentConfig, seed: int):
        """
        Step sizes, sample counts and network setups of a single training run: from the budget when a tolerance is
        given, from N and N_I otherwise.
        """
        domain = domain_for(problem)
        if config.eps_tol:
            budget = cls._seeded(UQManager.plan_tolerance(problem, config.eps_tol[0], interpolate=True), seed)
            setup = {'h_hf': budget.h_hf, 'h_lf': budget.h_lf, 'n': budget.n, 'n_i': budget.n_i,
                     'resnn': (budget.resnn_spec, budget.resnn_cfg), 'dnn': (budget.dnn_spec, budget.dnn_cfg)}
        else:
            if config.n is None:
                raise InvalidInput('Give either a tolerance or the sample count N')
            n = config.n
            n_i = config.n_i or max(1, n // 10)
            if problem in TOLERANCE_TABLES:
                row = TOLERANCE_TABLES[ProblemId(problem)][0]
                resnn_widths, dnn_widths, period = tuple(row['resnn_widths']), tuple(row['dnn_widths']), 0
            else:
                resnn_widths = dnn_widths = (SWEEP_WIDTH,) * SWEEP_LAYERS
                period = config.shortcut_period
            epochs = SWEEP_EPOCHS if config.epochs is None else config.epochs
            batch = config.batch_size or SWEEP_BATCH_SIZE

            def cfg(count):
                return TrainConfig(epochs=epochs, batch_size=fit_batch(count, batch), initial_lr=config.initial_lr,
                                   tikhonov_lambda=config.tikhonov_lambda, seed=seed)

            setup = {'h_hf': None, 'h_lf': None, 'n': n, 'n_i': n_i,
                     'resnn': (NetworkSpec(domain.dim + 1, resnn_widths, shortcut_period=period, seed=seed), cfg(n_i)),
                     'dnn': (NetworkSpec(domain.dim, dnn_widths, shortcut_period=period, seed=seed), cfg(n))}
        if config.epochs is not None and config.eps_tol:
            setup['resnn'] = (setup['resnn'][0], replace(setup['resnn'][1], epochs=config.epochs))
            setup['dnn'] = (setup['dnn'][0], replace(setup['dnn'][1], epochs=config.epochs))
        return setup

    @classmethod
    def train(cls, config: ExperimentConfig, method: str) -> RunOutcome:
        """
        Builds one surrogate and writes its bundle, the dataset, the predictions at the design points and a report.
        """
        if method not in TRAINABLE_METHODS:
            raise InvalidInput('{} is not a trainable method; choose from {}'.format(method, TRAINABLE_METHODS))
        if not config.problem:
            raise InvalidInput('The problem is required')
        problem, seed = config.problem, int(config.seeds[0])
        setup = cls._training_setup(problem, config, seed)
        pair = FidelityManager.pair_for(problem, setup['h_hf'], setup['h_lf'])
        if pair.domain.dim <= 2:
            rule = UniformGridCount(setup['n_i'])
        else:
            rule = UniformRandom(seed, stride=max(1, int(round(setup['n'] / setup['n_i']))))
        plan = FidelityManager.build_design(pair.domain, setup['n'], rule)
        data = FidelityManager.assemble(pair, plan, config.workers)

        residual, training = None, dict()
        if method == Method.RMFNN:
            result = SurrogateBuilder.rmfnn_from_dataset(data, *setup['resnn'], *setup['dnn'])
            surrogate, residual, data = result.surrogate, result.residual, result.dataset
            training = {'resnn': result.resnn_report.to_dict(), 'dnn': result.dnn_report.to_dict()}
        elif method == Method.RMFNN_ALT:
            surrogate = SurrogateBuilder.rmfnn_alt_build(pair, data, *setup['resnn'])
            training = {'resnn': surrogate.residual.report.to_dict()}
        elif method == Method.MFNN:
            surrogate = SurrogateBuilder.mfnn_build(pair, data, *setup['resnn'])
            training = {'mfnn': surrogate.report.to_dict()}
        else:
            surrogate = SurrogateBuilder.hfnn_build(data, setup['dnn'][0], setup['resnn'][1])
            training = {'dnn': surrogate.report.to_dict()}

        outcome = RunOutcome()
        predictions = predictor(surrogate)(plan.points)
        outcome.paths.append(ArtifactWriter.save_bundle(
            config.output_dir, surrogate, problem, residual=residual, plan=plan.summary(),
            seeds={'design': seed, 'training': seed}, h_hf=pair.h_hf, h_lf=pair.h_lf))
        outcome.paths.append(ArtifactWriter.write_predictions(
            plan.points, predictions, os.path.join(config.output_dir, PREDICTIONS_FILE)))
        if config.emits('datasets'):
            outcome.paths.append(ArtifactWriter.write_dataset(data, os.path.join(config.output_dir, DATASET_FILE)))
        outcome.summary = {'method': method, 'plan': plan.summary(), 'h_hf': pair.h_hf, 'h_lf': pair.h_lf,
                           'cost_lf_s': pair.cost_lf_s, 'cost_hf_s': pair.cost_hf_s}
        first_report = next(iter(training.values()))
        outcome.trials.append({'method': method, 'seed': seed, 'n_hf': plan.n_i,
                               'epochs_run': first_report['epochs_run'],
                               'train_time_s': sum(report['wall_time_s'] for report in training.values())})
        if config.emits('reports'):
            outcome.paths.append(ArtifactWriter.write_report(
                {'command': 'train', 'problem': problem, 'seeds': [seed], 'training': training,
                 'summary': outcome.summary}, os.path.join(config.output_dir, REPORT_FILE)))
        return outcome

    @classmethod
    def predict(cls, bundle_dir: str, input_csv: str, output_path: str) -> RunOutcome:
        bundle = ArtifactWriter.load_bundle(bundle_dir)
        dim = domain_for(bundle.manifest['problem']).dim
        theta = ArtifactWriter.read_theta(input_csv, dim)
        predictions = predictor(bundle.surrogate)(theta)
        path = ArtifactWriter.write_predictions(theta, predictions, output_path)
        return RunOutcome(paths=[path], summary={'method': bundle.manifest['method'], 'points': theta.shape[0]})

    @classmethod
    def mc_model(cls, problem: Optional[str], bundle_dir: Optional[str] = None, model: str = 'hf'):
        """
        The model a Monte Carlo estimate is taken of: a saved surrogate, or the low-fidelity, high-fidelity or exact
        model of a problem.
        """
        if bundle_dir:
            bundle = ArtifactWriter.load_bundle(bundle_dir)
            return bundle.manifest['problem'], predictor(bundle.surrogate)
        if not problem:
            raise InvalidInput('Give a problem or a bundle')
        if model == 'exact':
            return problem, FidelityManager.exact_model(problem)
        pair = FidelityManager.pair_for(problem)
        if model == 'lf':
            return problem, pair.q_lf
        if model == 'hf':
            return problem, pair.q_hf
        raise InvalidInput('Unknown model {}; choose from hf, lf, exact'.format(model))

    @classmethod
    def mc(cls, problem: Optional[str], n_theta: int, seed: int, output_dir: str, bundle_dir: Optional[str] = None,
           model: str = 'hf', workers: int = 1, emit_report: bool = True) -> Tuple[McEstimate, RunOutcome]:
        problem, evaluator = cls.mc_model(problem, bundle_dir, model)
        estimate = UQManager.mc_estimate(evaluator, n_theta, domain_for(problem), seed, workers=workers)
        outcome = RunOutcome(summary={'model': 'bundle' if bundle_dir else model, 'value': estimate.value,
                                      'stderr': estimate.stderr})
        if emit_report:
            outcome.paths.append(ArtifactWriter.write_report(
                {'command': 'mc', 'problem': problem, 'seeds': [seed], 'estimates': [asdict(estimate)],
                 'summary': outcome.summary}, os.path.join(output_dir, REPORT_FILE)))
        return estimate, outcome

    @classmethod
    def plan(cls, problem: str, eps_tol: float, interpolate: bool, output_dir: Optional[str] = None) -> RunOutcome:
        budget = UQManager.plan_tolerance(problem, eps_tol, interpolate)
        scaling = PROBLEM_SCALING[ProblemId(problem)]
        summary = {'ratio_s': budget.ratio_s, 'ratio_r': budget.ratio_r,
                   'residual_bound': FidelityManager.residual_bound(budget.ratio_s, scaling['q'], budget.eps_tol),
                   'predicted_exponents': UQManager.cost_scaling(problem),
                   'full_scale_required': budget.n_theta > DESK_MAX_N_THETA}
        outcome = RunOutcome(summary={'budget': asdict(budget), **summary})
        if output_dir:
            outcome.paths.append(ArtifactWriter.write_report(
                {'command': 'plan', 'problem': problem, 'budget': asdict(budget), 'seeds': [], 'summary': summary},
                os.path.join(output_dir, REPORT_FILE)))
        return outcome
