import json
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Tuple
import numpy as np

from rmfnn_app.utils.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, TIKHONOV_LAMBDA, VALIDATION_FRACTION, \
    PLATEAU_PATIENCE, PLATEAU_FACTOR, MIN_LR, INITIAL_LR, UINT64_MAX
from rmfnn_app.utils.exceptions import InvalidNetworkSpec, DimensionMismatch, EmptyDataset, InvalidInput, \
    TrainingDiverged, CheckpointError
from surrogate_lab.logger import logger


def format_floats(values) -> str:
    """
    JSON text of a nested list of floats written with 17 significant digits.
    """
    if isinstance(values, list):
        return '[' + ', '.join(format_floats(value) for value in values) + ']'
    text = '%.17g' % values
    # keeps the sign of -0.0 and the float type through json.loads
    if not any(char in text for char in '.en'):
        text += '.0'
    return text


def make_rng(seed: int) -> np.random.Generator:
    """
    Returns the counter-based generator every seeded stream of the library is drawn from.
    """
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class NetworkSpec:
    """
    Architecture of a dense ReLU network. With shortcut_period p > 0 the activation of hidden layer k - p is
    added to the activation of hidden layer k for k = p, 2p, ...; the first hidden layer is a plain projection.
    """
    input_dim: int
    hidden_widths: Tuple[int, ...]
    output_dim: int = 1
    shortcut_period: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'hidden_widths', tuple(int(width) for width in self.hidden_widths))
        self.validate()

    def validate(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise InvalidNetworkSpec('Input and output dimensions must be positive: {}, {}'.format(
                self.input_dim, self.output_dim))
        if any(width < 1 for width in self.hidden_widths):
            raise InvalidNetworkSpec('Hidden widths must be positive: {}'.format(list(self.hidden_widths)))
        if self.shortcut_period < 0:
            raise InvalidNetworkSpec('The shortcut period must not be negative: {}'.format(self.shortcut_period))
        if not 0 <= self.seed <= UINT64_MAX:
            raise InvalidNetworkSpec('The seed must be a 64-bit unsigned integer: {}'.format(self.seed))
        for target, source in self.shortcut_sources().items():
            if self.hidden_widths[target] != self.hidden_widths[source]:
                raise InvalidNetworkSpec('Shortcut from hidden layer {} (width {}) to hidden layer {} (width {}) '
                                         'joins unequal widths'.format(source, self.hidden_widths[source], target,
                                                                       self.hidden_widths[target]))

    @property
    def layer_sizes(self) -> List[int]:
        return [self.input_dim, *self.hidden_widths, self.output_dim]

    def shortcut_sources(self) -> Dict[int, int]:
        """
        Maps a hidden layer index to the hidden layer whose activation is added to its output.
        """
        if self.shortcut_period <= 0:
            return {}
        period = self.shortcut_period
        return {k: k - period for k in range(period, len(self.hidden_widths), period)}

    def to_dict(self) -> dict:
        data = asdict(self)
        data['hidden_widths'] = list(self.hidden_widths)
        return data


@dataclass
class Network:
    """
    Weight/bias tuples of a network; weights[l] has shape (N_l, N_{l-1}). The last layer is affine.
    """
    spec: NetworkSpec
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def copy(self) -> 'Network':
        return Network(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def validate(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InvalidNetworkSpec('Expected {} layers, got {} weights and {} biases'.format(
                len(sizes) - 1, len(self.weights), len(self.biases)))
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.shape != (sizes[layer + 1], sizes[layer]) or bias.shape != (sizes[layer + 1],):
                raise InvalidNetworkSpec('Layer {} has shapes {} and {}'.format(layer, weight.shape, bias.shape))
            if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
                raise InvalidNetworkSpec('Layer {} has non-finite entries'.format(layer))


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]


@dataclass
class AdamState:
    m_weights: List[np.ndarray]
    m_biases: List[np.ndarray]
    v_weights: List[np.ndarray]
    v_biases: List[np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, net: Network) -> 'AdamState':
        return cls([np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases],
                   [np.zeros_like(w) for w in net.weights], [np.zeros_like(b) for b in net.biases])

    def copy(self) -> 'AdamState':
        return AdamState([m.copy() for m in self.m_weights], [m.copy() for m in self.m_biases],
                         [v.copy() for v in self.v_weights], [v.copy() for v in self.v_biases], self.step)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    initial_lr: float = INITIAL_LR
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_eps: float = ADAM_EPS
    tikhonov_lambda: float = TIKHONOV_LAMBDA
    validation_fraction: float = VALIDATION_FRACTION
    plateau_patience: int = PLATEAU_PATIENCE
    plateau_factor: float = PLATEAU_FACTOR
    min_lr: float = MIN_LR
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        problems = []
        if self.epochs < 0:
            problems.append('epochs must not be negative')
        if self.batch_size < 1:
            problems.append('batch_size must be positive')
        if self.initial_lr <= 0 or self.min_lr <= 0:
            problems.append('learning rates must be positive')
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            problems.append('Adam betas must lie in (0, 1)')
        if self.adam_eps <= 0:
            problems.append('adam_eps must be positive')
        if self.tikhonov_lambda < 0:
            problems.append('tikhonov_lambda must not be negative')
        if not 0 <= self.validation_fraction < 1:
            problems.append('validation_fraction must lie in [0, 1)')
        if self.plateau_patience < 1:
            problems.append('plateau_patience must be positive')
        if not 0 < self.plateau_factor < 1:
            problems.append('plateau_factor must lie in (0, 1)')
        if not 0 <= self.seed <= UINT64_MAX:
            problems.append('seed must be a 64-bit unsigned integer')
        if problems:
            raise InvalidInput('Invalid training config: {}'.format('; '.join(problems)))


@dataclass
class TrainReport:
    train_loss_history: List[float] = field(default_factory=list)
    val_loss_history: List[float] = field(default_factory=list)
    lr_history: List[float] = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.inf
    wall_time_s: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)


class NetworkManager:
    """
    The NetworkManager class has class methods to build, evaluate, differentiate, train and persist dense ReLU
    networks with optional identity shortcuts.
    """

    @classmethod
    def init_network(cls, spec: NetworkSpec) -> Network:
        """
        He-scaled Gaussian weights (std = sqrt(2 / fan_in)) and zero biases, drawn from NetworkSpec.seed.
        """
        spec.validate()
        rng = make_rng(spec.seed)
        sizes = spec.layer_sizes
        weights, biases = list(), list()
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        return Network(spec, weights, biases)

    @classmethod
    def _as_batch(cls, net: Network, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x.reshape(1, -1) if single else x
        if batch.ndim != 2 or batch.shape[1] != net.spec.input_dim:
            raise DimensionMismatch('Expected inputs of dimension {}, got shape {}'.format(net.spec.input_dim,
                                                                                          x.shape))
        return batch, single

    @classmethod
    def _forward_pass(cls, net: Network, batch: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray],
                                                                      np.ndarray]:
        """
        Returns the hidden pre-activations, the layer inputs (the network input first, then every hidden
        activation) and the output.
        """
        sources = net.spec.shortcut_sources()
        pre_activations, activations = list(), [batch]
        hidden_layers = len(net.weights) - 1
        for k in range(hidden_layers):
            z = activations[k] @ net.weights[k].T + net.biases[k]
            a = np.maximum(z, 0.0)
            if k in sources:
                a = a + activations[sources[k] + 1]
            pre_activations.append(z)
            activations.append(a)
        output = activations[-1] @ net.weights[-1].T + net.biases[-1]
        return pre_activations, activations, output

    @classmethod
    def forward(cls, net: Network, x) -> np.ndarray:
        """
        Evaluates the network on one input vector or on a batch of row vectors.
        """
        batch, single = cls._as_batch(net, x)
        output = cls._forward_pass(net, batch)[2]
        return output[0] if single else output

    @classmethod
    def _targets(cls, net: Network, y, rows: int) -> np.ndarray:
        targets = np.asarray(y, dtype=np.float64).reshape(rows, -1)
        if targets.shape[1] != net.spec.output_dim:
            raise DimensionMismatch('Expected targets of dimension {}, got {}'.format(net.spec.output_dim,
                                                                                     targets.shape[1]))
        return targets

    @classmethod
    def mse(cls, net: Network, x, y) -> float:
        batch, _ = cls._as_batch(net, x)
        if batch.shape[0] == 0:
            raise EmptyDataset('The batch is empty')
        targets = cls._targets(net, y, batch.shape[0])
        residual = cls._forward_pass(net, batch)[2] - targets
        return float(np.mean(residual ** 2))

    @classmethod
    def loss(cls, net: Network, x, y, tikhonov_lambda: float = 0.0) -> float:
        """
        Mean squared error over the batch plus lambda times the sum of squared weights (biases excluded).
        """
        penalty = sum(float(np.sum(w ** 2)) for w in net.weights) if tikhonov_lambda else 0.0
        return cls.mse(net, x, y) + tikhonov_lambda * penalty

    @classmethod
    def gradients(cls, net: Network, x, y, tikhonov_lambda: float = 0.0) -> Gradients:
        """
        Backpropagation of the loss; the ReLU derivative at zero is taken as zero.
        """
        batch, _ = cls._as_batch(net, x)
        if batch.shape[0] == 0:
            raise EmptyDataset('The batch is empty')
        targets = cls._targets(net, y, batch.shape[0])
        pre_activations, activations, output = cls._forward_pass(net, batch)
        sources = net.spec.shortcut_sources()
        hidden_layers = len(net.weights) - 1

        grad_weights = [np.empty(0)] * len(net.weights)
        grad_biases = [np.empty(0)] * len(net.biases)
        grad_output = 2.0 * (output - targets) / targets.size
        grad_weights[-1] = grad_output.T @ activations[-1] + 2.0 * tikhonov_lambda * net.weights[-1]
        grad_biases[-1] = grad_output.sum(axis=0)

        grad_activations = [np.zeros_like(a) for a in activations]
        grad_activations[-1] = grad_output @ net.weights[-1]
        for k in reversed(range(hidden_layers)):
            grad_a = grad_activations[k + 1]
            if k in sources:
                grad_activations[sources[k] + 1] += grad_a
            grad_z = grad_a * (pre_activations[k] > 0.0)
            grad_weights[k] = grad_z.T @ activations[k] + 2.0 * tikhonov_lambda * net.weights[k]
            grad_biases[k] = grad_z.sum(axis=0)
            if k > 0:
                grad_activations[k] += grad_z @ net.weights[k]
        return Gradients(grad_weights, grad_biases)

    @classmethod
    def _adam_update(cls, net: Network, grads: Gradients, state: AdamState, lr: float, beta1: float,
                     beta2: float, eps: float):
        """
        Adam update with bias correction, in place on net and state.
        """
        state.step += 1
        correction1 = 1.0 - beta1 ** state.step
        correction2 = 1.0 - beta2 ** state.step
        for params, grad_list, first, second in ((net.weights, grads.weights, state.m_weights, state.v_weights),
                                                 (net.biases, grads.biases, state.m_biases, state.v_biases)):
            for param, grad, m, v in zip(params, grad_list, first, second):
                m *= beta1
                m += (1.0 - beta1) * grad
                v *= beta2
                v += (1.0 - beta2) * grad * grad
                param -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)

    @classmethod
    def adam_step(cls, net: Network, grads: Gradients, state: AdamState, lr: float,
                  beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                  eps: float = ADAM_EPS) -> Tuple[Network, AdamState]:
        """
        Returns the updated network and optimizer state; the arguments are left untouched.
        """
        for param, m in zip(net.weights + net.biases, state.m_weights + state.m_biases):
            if param.shape != m.shape:
                raise DimensionMismatch('Optimizer state does not match the network')
        updated_net, updated_state = net.copy(), state.copy()
        cls._adam_update(updated_net, grads, updated_state, lr, beta1, beta2, eps)
        return updated_net, updated_state

    @classmethod
    def train(cls, inputs, targets, spec: NetworkSpec, cfg: TrainConfig) -> Tuple[Network, TrainReport]:
        """
        Mini-batch Adam training with a validation-monitored reduce-on-plateau learning rate.
        The records are shuffled with cfg.seed and the last validation_fraction of the shuffle is held out.
        Returns the network with the best validation loss seen; without a validation set the training MSE is
        monitored instead.
        """
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = x.shape[0]
        if n < 2:
            raise EmptyDataset('Training needs at least two records, got {}'.format(n))
        y = np.asarray(targets, dtype=np.float64).reshape(n, -1)
        if x.shape[1] != spec.input_dim or y.shape[1] != spec.output_dim:
            raise DimensionMismatch('Data of shapes {} and {} does not fit the network {} -> {}'.format(
                x.shape, y.shape, spec.input_dim, spec.output_dim))

        rng = make_rng(cfg.seed)
        order = rng.permutation(n)
        x, y = x[order], y[order]
        n_val = int(math.ceil(n * cfg.validation_fraction)) if cfg.validation_fraction > 0 else 0
        n_train = n - n_val
        if n_train < 1:
            raise EmptyDataset('The validation split leaves no training records')
        if cfg.batch_size > n_train:
            raise InvalidInput('Batch size {} exceeds the {} training records'.format(cfg.batch_size, n_train))
        x_train, y_train = x[:n_train], y[:n_train]
        x_val, y_val = (x[n_train:], y[n_train:]) if n_val else (x_train, y_train)

        net = cls.init_network(spec)
        best_net = net.copy()
        report = TrainReport()
        state = AdamState.fresh(net)
        lr = cfg.initial_lr
        epochs_since_best = 0
        started = time.perf_counter()
        logger.info('Training {} on {} records ({} validation) for up to {} epochs'.format(
            list(spec.layer_sizes), n_train, n_val, cfg.epochs))

        with np.errstate(over='ignore', invalid='ignore'):
            for epoch in range(1, cfg.epochs + 1):
                permutation = rng.permutation(n_train)
                for start in range(0, n_train, cfg.batch_size):
                    batch = permutation[start:start + cfg.batch_size]
                    grads = cls.gradients(net, x_train[batch], y_train[batch], cfg.tikhonov_lambda)
                    cls._adam_update(net, grads, state, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
                train_loss = cls.loss(net, x_train, y_train, cfg.tikhonov_lambda)
                val_loss = cls.mse(net, x_val, y_val)
                if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                    logger.error('Training diverged at epoch {}'.format(epoch))
                    raise TrainingDiverged(epoch, train_loss if not math.isfinite(train_loss) else val_loss)
                report.train_loss_history.append(train_loss)
                report.val_loss_history.append(val_loss)
                report.lr_history.append(lr)
                report.epochs_run = epoch
                if val_loss < report.best_val_loss:
                    report.best_val_loss = val_loss
                    report.best_epoch = epoch
                    best_net = net.copy()
                    epochs_since_best = 0
                else:
                    epochs_since_best += 1
                    if epochs_since_best >= cfg.plateau_patience:
                        lr *= cfg.plateau_factor
                        epochs_since_best = 0
                if lr < cfg.min_lr:
                    break

        report.wall_time_s = time.perf_counter() - started
        logger.info('Training finished after {} epochs, best validation MSE {} at epoch {}'.format(
            report.epochs_run, report.best_val_loss, report.best_epoch))
        return best_net, report

    @classmethod
    def to_payload(cls, net: Network) -> dict:
        return {'spec': net.spec.to_dict(),
                'weights': [w.tolist() for w in net.weights],
                'biases': [b.tolist() for b in net.biases]}

    @classmethod
    def from_payload(cls, payload) -> Network:
        """
        Validates a decoded checkpoint and rebuilds the network.
        """
        from rmfnn_app.serializers import CheckpointSerializer

        serializer = CheckpointSerializer(data=payload)
        if not serializer.is_valid():
            field_name = next(iter(serializer.errors))
            raise CheckpointError('Invalid checkpoint: {}'.format(serializer.errors[field_name]), field=field_name)
        return serializer.save()

    @classmethod
    def save_network(cls, net: Network, path: str):
        """
        Writes the checkpoint JSON with every weight and bias in '%.17g' form, so loading is bitwise-exact.
        """
        payload = cls.to_payload(net)
        text = '{{"spec": {}, "weights": {}, "biases": {}}}'.format(
            json.dumps(payload['spec']), format_floats(payload['weights']), format_floats(payload['biases']))
        with open(path, 'w') as checkpoint:
            checkpoint.write(text)

    @classmethod
    def load_network(cls, path: str) -> Network:
        with open(path) as checkpoint:
            content = checkpoint.read()
        try:
            payload = json.loads(content)
        except json.JSONDecodeError as error:
            raise CheckpointError('Malformed checkpoint {}: {}'.format(path, error.msg), offset=error.pos)
        return cls.from_payload(payload)
