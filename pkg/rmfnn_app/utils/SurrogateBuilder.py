from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple, Union
import numpy as np

from rmfnn_app.utils.constants import Method
from rmfnn_app.utils.exceptions import MissingTargets, InvalidInput, DimensionMismatch
from rmfnn_app.utils.FidelityManager import FidelityManager, FidelityPair, DesignPlan, Dataset, Normalization, \
    PROVENANCE_SYNTHETIC
from rmfnn_app.utils.NetworkManager import NetworkManager, Network, NetworkSpec, TrainConfig, TrainReport
from surrogate_lab.logger import logger


def canonical_order(inputs: np.ndarray) -> np.ndarray:
    """
    Lexicographic row order, so that training does not depend on the order records were handed in.
    """
    return np.lexsort(inputs.T[::-1])


def with_q_lf(normalization: Normalization, q_lf: np.ndarray) -> Normalization:
    """
    Extends a parameter normalization by a min-max column for the low-fidelity values.
    """
    channel = Normalization.of_values(np.asarray(q_lf).reshape(-1, 1))
    return Normalization(normalization.lower + channel.lower, normalization.upper + channel.upper)


@dataclass
class ResidualSurrogate:
    """
    Network learning F = Q_HF - Q_LF from the normalized pair (theta, Q_LF).
    """
    net: Network
    input_normalization: Normalization
    report: Optional[TrainReport] = None

    def features(self, theta: np.ndarray, q_lf: np.ndarray) -> np.ndarray:
        stacked = np.column_stack([np.atleast_2d(theta), np.asarray(q_lf, dtype=np.float64).reshape(-1)])
        return self.input_normalization.apply(stacked)

    def predict(self, theta: np.ndarray, q_lf: np.ndarray) -> np.ndarray:
        return NetworkManager.forward(self.net, self.features(theta, q_lf))[:, 0]


@dataclass
class TargetSurrogate:
    """
    Network mapping normalized theta to Q_HF (or to Q_LF when it serves as a low-fidelity source).
    """
    net: Network
    normalization: Normalization
    method_tag: str
    report: Optional[TrainReport] = None

    def predict(self, theta: np.ndarray) -> np.ndarray:
        return NetworkManager.forward(self.net, self.normalization.apply(np.atleast_2d(theta)))[:, 0]


@dataclass
class CorrelationSurrogate:
    """
    Network mapping (theta, Q_LF) to Q_HF; a query needs a low-fidelity evaluation.
    """
    net: Network
    input_normalization: Normalization
    lf_model: Optional[Callable[[np.ndarray], np.ndarray]] = None
    method_tag: str = Method.MFNN
    report: Optional[TrainReport] = None

    def predict(self, theta: np.ndarray, q_lf: Optional[np.ndarray] = None) -> np.ndarray:
        theta = np.atleast_2d(theta)
        if q_lf is None:
            if self.lf_model is None:
                raise MissingTargets('The surrogate needs low-fidelity values at query time')
            q_lf = self.lf_model(theta)
        stacked = np.column_stack([theta, np.asarray(q_lf, dtype=np.float64).reshape(-1)])
        return NetworkManager.forward(self.net, self.input_normalization.apply(stacked))[:, 0]


LowFidelitySource = Union[TargetSurrogate, Callable[[np.ndarray], np.ndarray]]


@dataclass
class CompositeSurrogate:
    """
    Q(theta) = lf(theta) + F(theta, lf(theta)), with lf a trained network or the low-fidelity model itself.
    """
    lf_source: LowFidelitySource
    residual: ResidualSurrogate
    method_tag: str = Method.RMFNN_ALT

    def low_fidelity(self, theta: np.ndarray) -> np.ndarray:
        if isinstance(self.lf_source, TargetSurrogate):
            return self.lf_source.predict(theta)
        return np.asarray(self.lf_source(theta), dtype=np.float64).reshape(-1)

    def predict(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        q_lf = self.low_fidelity(theta)
        return q_lf + self.residual.predict(theta, q_lf)


@dataclass
class RmfnnResult:
    surrogate: TargetSurrogate
    residual: ResidualSurrogate
    dataset: Dataset
    resnn_report: TrainReport
    dnn_report: TrainReport


class SurrogateBuilder:
    """
    The SurrogateBuilder class has class methods to train the residual multi-fidelity surrogate and its
    baselines.
    """

    @classmethod
    def _real_records(cls, data: Dataset) -> Dataset:
        mask = data.real_hf
        if not np.any(mask):
            raise MissingTargets('The dataset has no high-fidelity records')
        return data.subset(mask)

    @classmethod
    def _fit(cls, inputs: np.ndarray, targets: np.ndarray, spec: NetworkSpec,
             cfg: TrainConfig) -> Tuple[Network, TrainReport]:
        order = canonical_order(inputs)
        spec = replace(spec, input_dim=inputs.shape[1], output_dim=1)
        return NetworkManager.train(inputs[order], targets[order], spec, cfg)

    @classmethod
    def train_resnn(cls, data: Dataset, spec: NetworkSpec, cfg: TrainConfig) -> ResidualSurrogate:
        """
        Trains (theta, Q_LF) -> Q_HF - Q_LF on the records with real high-fidelity values.
        """
        records = cls._real_records(data)
        normalization = with_q_lf(data.normalization, records.q_lf)
        raw_theta = records.normalization.invert(records.theta) if records.normalized else records.theta
        surrogate = ResidualSurrogate(None, normalization)
        inputs = surrogate.features(raw_theta, records.q_lf)
        surrogate.net, surrogate.report = cls._fit(inputs, records.q_hf - records.q_lf, spec, cfg)
        logger.info('ResNN trained on {} records'.format(records.n))
        return surrogate

    @classmethod
    def synthesize_hf(cls, res: ResidualSurrogate, data: Dataset) -> Dataset:
        """
        Fills Q_HF = Q_LF + F(theta, Q_LF) on every record without a real high-fidelity value. The predicted
        residual F is kept on the returned dataset next to the synthesized value.
        """
        fill = ~data.real_hf
        q_hf = data.q_hf.copy()
        provenance = data.provenance.copy()
        residual = np.full(data.n, np.nan)
        if np.any(fill):
            raw_theta = data.normalization.invert(data.theta) if data.normalized else data.theta
            residual[fill] = res.predict(raw_theta[fill], data.q_lf[fill])
            q_hf[fill] = data.q_lf[fill] + residual[fill]
            provenance[fill] = PROVENANCE_SYNTHETIC
        logger.info('Synthesized {} high-fidelity values'.format(int(np.count_nonzero(fill))))
        return replace(data, q_hf=q_hf, provenance=provenance, residual=residual)

    @classmethod
    def train_dnn(cls, data: Dataset, spec: NetworkSpec, cfg: TrainConfig,
                  method_tag: str = Method.RMFNN) -> TargetSurrogate:
        """
        Trains theta -> Q_HF on all records; every record must carry a high-fidelity value.
        """
        if not np.all(data.has_hf):
            raise MissingTargets('{} records lack a high-fidelity value'.format(int(np.count_nonzero(~data.has_hf))))
        net, report = cls._fit(data.unit_theta(), data.q_hf, spec, cfg)
        return TargetSurrogate(net, data.normalization, method_tag, report)

    @classmethod
    def rmfnn_from_dataset(cls, data: Dataset, resnn_spec: NetworkSpec, resnn_cfg: TrainConfig,
                           dnn_spec: NetworkSpec, dnn_cfg: TrainConfig) -> RmfnnResult:
        residual = cls.train_resnn(data, resnn_spec, resnn_cfg)
        synthesized = cls.synthesize_hf(residual, data)
        surrogate = cls.train_dnn(synthesized, dnn_spec, dnn_cfg, Method.RMFNN)
        return RmfnnResult(surrogate, residual, synthesized, residual.report, surrogate.report)

    @classmethod
    def rmfnn_build(cls, pair: FidelityPair, plan: DesignPlan, resnn_spec: NetworkSpec, resnn_cfg: TrainConfig,
                    dnn_spec: NetworkSpec, dnn_cfg: TrainConfig, workers: int = 1) -> RmfnnResult:
        """
        Assembles the data of the plan, trains the ResNN on Theta_I, synthesizes Q_HF on Theta_II and trains the
        DNN on all N records.
        """
        data = FidelityManager.assemble(pair, plan, workers)
        return cls.rmfnn_from_dataset(data, resnn_spec, resnn_cfg, dnn_spec, dnn_cfg)

    @classmethod
    def rmfnn_alt_build(cls, pair: FidelityPair, data: Dataset, resnn_spec: NetworkSpec, resnn_cfg: TrainConfig,
                        lf_spec: Optional[NetworkSpec] = None,
                        lf_cfg: Optional[TrainConfig] = None) -> CompositeSurrogate:
        """
        Residual network on top of a low-fidelity source: the low-fidelity model itself when lf_spec is None,
        otherwise a network trained on theta -> Q_LF over all records.
        """
        residual = cls.train_resnn(data, resnn_spec, resnn_cfg)
        if lf_spec is None:
            return CompositeSurrogate(pair.q_lf, residual)
        if lf_cfg is None:
            raise InvalidInput('A trained low-fidelity source needs a training config')
        net, report = cls._fit(data.unit_theta(), data.q_lf, lf_spec, lf_cfg)
        return CompositeSurrogate(TargetSurrogate(net, data.normalization, 'LF', report), residual)

    @classmethod
    def rmfnn_alt_predict(cls, composite: CompositeSurrogate, theta: np.ndarray) -> np.ndarray:
        return composite.predict(theta)

    @classmethod
    def mfnn_build(cls, pair: FidelityPair, data: Dataset, spec: NetworkSpec, cfg: TrainConfig) -> CorrelationSurrogate:
        """
        Trains (theta, Q_LF) -> Q_HF on the records with real high-fidelity values.
        """
        records = cls._real_records(data)
        raw_theta = records.normalization.invert(records.theta) if records.normalized else records.theta
        surrogate = CorrelationSurrogate(None, with_q_lf(data.normalization, records.q_lf), pair.q_lf)
        inputs = surrogate.input_normalization.apply(np.column_stack([raw_theta, records.q_lf]))
        surrogate.net, surrogate.report = cls._fit(inputs, records.q_hf, spec, cfg)
        return surrogate

    @classmethod
    def hfnn_build(cls, data: Dataset, spec: NetworkSpec, cfg: TrainConfig) -> TargetSurrogate:
        return cls.train_dnn(cls._real_records(data), spec, cfg, Method.HFNN)

    @classmethod
    def conjecture_bound(cls, K: int, L: int, f_inf_norm: float, C1: float, C2: float) -> float:
        """
        C1 ||f||^2 / (K L) + C2 (K^-2 + L^-4) for a ReLU network of width K and depth L.
        """
        if K < 1 or L < 1:
            raise InvalidInput('Width and depth must be positive, got {} and {}'.format(K, L))
        return C1 * f_inf_norm ** 2 / (K * L) + C2 * (K ** -2.0 + L ** -4.0)

    @classmethod
    def fit_bound_constants(cls, observations: Sequence[Tuple[int, int, float, float]]) -> Tuple[float, float]:
        """
        Least-squares C1, C2 from (K, L, ||f||_inf, mse) observations; negative estimates are clamped to zero.
        """
        if not observations:
            raise InvalidInput('No observations to fit the bound constants to')
        rows = np.asarray(observations, dtype=np.float64)
        K, L, f_inf, mse = rows.T
        design = np.column_stack([f_inf ** 2 / (K * L), K ** -2.0 + L ** -4.0])
        (c1, c2), *_ = np.linalg.lstsq(design, mse, rcond=None)
        return max(float(c1), 0.0), max(float(c2), 0.0)


Surrogate = Union[TargetSurrogate, CorrelationSurrogate, CompositeSurrogate]


def predictor(surrogate) -> Callable[[np.ndarray], np.ndarray]:
    """
    Returns theta -> prediction for any surrogate kind.
    """
    if isinstance(surrogate, (TargetSurrogate, CorrelationSurrogate, CompositeSurrogate)):
        return surrogate.predict
    if callable(surrogate):
        return surrogate
    raise DimensionMismatch('Not a surrogate: {!r}'.format(surrogate))
