import json
import os
from dataclasses import dataclass, asdict
from typing import List, Optional, Sequence
import numpy as np
import pandas as pd

from rmfnn_app.utils.constants import Method, CHECKPOINT_RESNN, CHECKPOINT_DNN, CHECKPOINT_LF, MANIFEST_FILE
from rmfnn_app.utils.exceptions import InvalidInput, CheckpointError
from rmfnn_app.utils.FidelityManager import FidelityManager, Dataset, Normalization
from rmfnn_app.utils.NetworkManager import NetworkManager
from rmfnn_app.utils.SurrogateBuilder import ResidualSurrogate, TargetSurrogate, CorrelationSurrogate, \
    CompositeSurrogate
from surrogate_lab.logger import logger


FLOAT_FORMAT = '%.17g'


@dataclass
class Bundle:
    surrogate: object
    manifest: dict
    residual: Optional[ResidualSurrogate] = None


def theta_columns(dim: int) -> List[str]:
    return ['theta_{}'.format(index) for index in range(dim)]


def first_error(errors) -> str:
    """
    Flattens a DRF error structure into 'field: message' for the first offending field.
    """
    path = list()
    while isinstance(errors, (dict, list)) and errors:
        if isinstance(errors, dict):
            key = next(iter(errors))
            path.append(str(key))
            errors = errors[key]
        else:
            errors = next((item for item in errors if item), errors[0])
    return '{}: {}'.format('.'.join(path), errors)


class ArtifactWriter:
    """
    The ArtifactWriter class has class methods to write and read the CSV and JSON artifacts of the experiments.
    Floats are written with 17 significant digits and read back exactly.
    """

    @classmethod
    def write_frame(cls, frame: pd.DataFrame, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='')
        return path

    @classmethod
    def read_frame(cls, path: str) -> pd.DataFrame:
        return pd.read_csv(path, float_precision='round_trip')

    @classmethod
    def write_rows(cls, rows: Sequence[dict], columns: Sequence[str], path: str) -> str:
        return cls.write_frame(pd.DataFrame(list(rows), columns=list(columns)), path)

    @classmethod
    def write_dataset(cls, data: Dataset, path: str) -> str:
        """
        Columns theta_0, ..., theta_{d-1}, q_lf, q_hf, provenance; q_hf is empty where it is unknown.
        """
        theta = data.normalization.invert(data.theta) if data.normalized else data.theta
        frame = pd.DataFrame(theta, columns=theta_columns(data.dim))
        frame['q_lf'] = data.q_lf
        frame['q_hf'] = data.q_hf
        frame['provenance'] = data.provenance
        return cls.write_frame(frame, path)

    @classmethod
    def read_dataset(cls, path: str, normalization: Normalization) -> Dataset:
        frame = cls.read_frame(path)
        columns = theta_columns(normalization.dim)
        missing = [column for column in columns + ['q_lf', 'q_hf', 'provenance'] if column not in frame.columns]
        if missing:
            raise InvalidInput('Dataset {} lacks the columns {}'.format(path, missing))
        return Dataset(frame[columns].to_numpy(dtype=np.float64), frame['q_lf'].to_numpy(dtype=np.float64),
                       frame['q_hf'].to_numpy(dtype=np.float64), frame['provenance'].to_numpy(dtype=object),
                       normalization)

    @classmethod
    def read_theta(cls, path: str, dim: int) -> np.ndarray:
        frame = cls.read_frame(path)
        columns = theta_columns(dim)
        if any(column not in frame.columns for column in columns):
            raise InvalidInput('{} needs the columns {}'.format(path, columns))
        return frame[columns].to_numpy(dtype=np.float64)

    @classmethod
    def write_predictions(cls, theta: np.ndarray, predictions: np.ndarray, path: str) -> str:
        frame = pd.DataFrame(theta, columns=theta_columns(theta.shape[1]))
        frame['prediction'] = predictions
        return cls.write_frame(frame, path)

    @classmethod
    def write_json(cls, payload: dict, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w') as output:
            json.dump(payload, output, indent=2, default=_json_default)
        return path

    @classmethod
    def read_json(cls, path: str) -> dict:
        with open(path) as source:
            return json.load(source)

    @classmethod
    def write_report(cls, payload: dict, path: str) -> str:
        """
        Validates the report against the report schema before writing it.
        """
        from rmfnn_app.serializers import ReportSerializer

        payload = json.loads(json.dumps(payload, default=_json_default))
        serializer = ReportSerializer(data=payload)
        if not serializer.is_valid():
            raise InvalidInput('Invalid report: {}'.format(first_error(serializer.errors)))
        return cls.write_json(payload, path)

    @classmethod
    def read_report(cls, path: str) -> dict:
        from rmfnn_app.serializers import ReportSerializer

        payload = cls.read_json(path)
        serializer = ReportSerializer(data=payload)
        if not serializer.is_valid():
            raise InvalidInput('Invalid report {}: {}'.format(path, first_error(serializer.errors)))
        return payload

    @classmethod
    def save_bundle(cls, directory: str, surrogate, problem: str, residual: Optional[ResidualSurrogate] = None,
                    plan: Optional[dict] = None, seeds: Optional[dict] = None, metrics: Optional[dict] = None,
                    h_hf: Optional[float] = None, h_lf: Optional[float] = None) -> str:
        """
        Writes the checkpoints of a surrogate and its manifest into directory.
        """
        from rmfnn_app.serializers import ManifestSerializer

        os.makedirs(directory, exist_ok=True)
        checkpoints, lf_source = dict(), 'none'
        residual_normalization = None
        if isinstance(surrogate, CompositeSurrogate):
            residual = surrogate.residual
            method, normalization = surrogate.method_tag, None
            if isinstance(surrogate.lf_source, TargetSurrogate):
                lf_source = 'network'
                normalization = surrogate.lf_source.normalization
                NetworkManager.save_network(surrogate.lf_source.net, os.path.join(directory, CHECKPOINT_LF))
                checkpoints['lf'] = CHECKPOINT_LF
            else:
                lf_source = 'direct'
            dim = len(residual.input_normalization.lower) - 1
            normalization = normalization or Normalization(residual.input_normalization.lower[:dim],
                                                           residual.input_normalization.upper[:dim])
        elif isinstance(surrogate, CorrelationSurrogate):
            method, lf_source = surrogate.method_tag, 'direct'
            residual_normalization = surrogate.input_normalization
            dim = len(residual_normalization.lower) - 1
            normalization = Normalization(residual_normalization.lower[:dim], residual_normalization.upper[:dim])
            NetworkManager.save_network(surrogate.net, os.path.join(directory, CHECKPOINT_DNN))
            checkpoints['dnn'] = CHECKPOINT_DNN
        elif isinstance(surrogate, TargetSurrogate):
            method, normalization = surrogate.method_tag, surrogate.normalization
            NetworkManager.save_network(surrogate.net, os.path.join(directory, CHECKPOINT_DNN))
            checkpoints['dnn'] = CHECKPOINT_DNN
        else:
            raise InvalidInput('Cannot save {!r}'.format(surrogate))
        if residual is not None:
            residual_normalization = residual.input_normalization
            NetworkManager.save_network(residual.net, os.path.join(directory, CHECKPOINT_RESNN))
            checkpoints['resnn'] = CHECKPOINT_RESNN

        manifest = {
            'method': str(method), 'problem': str(problem), 'plan': plan or {},
            'normalization': normalization.to_dict(),
            'residual_normalization': residual_normalization.to_dict() if residual_normalization else None,
            'lf_source': lf_source, 'checkpoints': checkpoints, 'h_hf': h_hf, 'h_lf': h_lf,
            'seeds': seeds or {}, 'metrics': metrics or {},
        }
        manifest = json.loads(json.dumps(manifest, default=_json_default))
        serializer = ManifestSerializer(data=manifest)
        if not serializer.is_valid():
            raise InvalidInput('Invalid manifest: {}'.format(first_error(serializer.errors)))
        cls.write_json(manifest, os.path.join(directory, MANIFEST_FILE))
        logger.info('Saved {} bundle to {}'.format(method, directory))
        return directory

    @classmethod
    def load_bundle(cls, directory: str) -> Bundle:
        """
        Rebuilds the surrogate of a bundle directory. Surrogates that query the low-fidelity model get it back from
        the problem and the stored step sizes.
        """
        from rmfnn_app.serializers import ManifestSerializer, NormalizationSerializer

        manifest_path = os.path.join(directory, MANIFEST_FILE)
        try:
            payload = cls.read_json(manifest_path)
        except json.JSONDecodeError as error:
            raise CheckpointError('Malformed manifest {}'.format(manifest_path), offset=error.pos)
        serializer = ManifestSerializer(data=payload)
        if not serializer.is_valid():
            field = next(iter(serializer.errors))
            raise CheckpointError('Invalid manifest: {}'.format(first_error(serializer.errors)), field=field)
        manifest = serializer.validated_data

        def normalization_of(key):
            return NormalizationSerializer().create(dict(manifest[key]))

        def network(name):
            return NetworkManager.load_network(os.path.join(directory, manifest['checkpoints'][name]))

        normalization = normalization_of('normalization')
        residual = None
        if 'resnn' in manifest['checkpoints']:
            residual = ResidualSurrogate(network('resnn'), normalization_of('residual_normalization'))
        method = manifest['method']
        lf_model = None
        if manifest['lf_source'] == 'direct':
            lf_model = FidelityManager.pair_for(manifest['problem'], manifest['h_hf'], manifest['h_lf']).q_lf

        if method == Method.RMFNN_ALT:
            if manifest['lf_source'] == 'network':
                source = TargetSurrogate(network('lf'), normalization, 'LF')
            else:
                source = lf_model
            surrogate = CompositeSurrogate(source, residual)
        elif method == Method.MFNN:
            surrogate = CorrelationSurrogate(network('dnn'), normalization_of('residual_normalization'), lf_model)
        else:
            surrogate = TargetSurrogate(network('dnn'), normalization, method)
        return Bundle(surrogate, dict(payload), residual)


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, '__dataclass_fields__'):
        return asdict(value)
    raise TypeError('{!r} is not JSON serializable'.format(value))
