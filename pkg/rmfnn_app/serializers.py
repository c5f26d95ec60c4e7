import numpy as np
from rest_framework import serializers

from rmfnn_app.utils.constants import ProblemId, Method, UINT64_MAX
from rmfnn_app.utils.exceptions import RmfnnError
from rmfnn_app.utils.FidelityManager import Normalization
from rmfnn_app.utils.NetworkManager import NetworkSpec, Network, TrainConfig
from rmfnn_app.utils.ExperimentRunner import ExperimentConfig, EMIT_CHOICES


class StrictFieldsMixin:
    """
    Rejects keys that are not declared fields, naming each of them.
    """

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class NetworkSpecSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of the network architecture.
    """
    input_dim = serializers.IntegerField(min_value=1)
    hidden_widths = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=True)
    output_dim = serializers.IntegerField(min_value=1, default=1)
    shortcut_period = serializers.IntegerField(min_value=0, default=0)
    seed = serializers.IntegerField(min_value=0, max_value=UINT64_MAX, default=0)

    def validate(self, attrs):
        try:
            NetworkSpec(**attrs)
        except RmfnnError as error:
            raise serializers.ValidationError({'hidden_widths': [str(error)]})
        return attrs

    def create(self, validated_data):
        return NetworkSpec(**validated_data)


class TrainConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of the training configuration. Missing values take the library defaults.
    """
    epochs = serializers.IntegerField(min_value=0, required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    initial_lr = serializers.FloatField(required=False)
    adam_beta1 = serializers.FloatField(required=False)
    adam_beta2 = serializers.FloatField(required=False)
    adam_eps = serializers.FloatField(required=False)
    tikhonov_lambda = serializers.FloatField(min_value=0, required=False)
    validation_fraction = serializers.FloatField(required=False)
    plateau_patience = serializers.IntegerField(min_value=1, required=False)
    plateau_factor = serializers.FloatField(required=False)
    min_lr = serializers.FloatField(required=False)
    seed = serializers.IntegerField(min_value=0, max_value=UINT64_MAX, required=False)

    def validate(self, attrs):
        try:
            TrainConfig(**attrs)
        except RmfnnError as error:
            raise serializers.ValidationError(str(error))
        return attrs

    def create(self, validated_data):
        return TrainConfig(**validated_data)


class CheckpointSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of a network checkpoint: the spec plus the weight matrices and bias vectors as nested lists.
    """
    spec = NetworkSpecSerializer()
    weights = serializers.ListField(child=serializers.ListField(child=serializers.ListField(
        child=serializers.FloatField())))
    biases = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))

    def validate(self, attrs):
        try:
            spec = NetworkSpec(**attrs['spec'])
            network = Network(spec, [np.array(w, dtype=np.float64) for w in attrs['weights']],
                              [np.array(b, dtype=np.float64) for b in attrs['biases']])
            network.validate()
        except (RmfnnError, ValueError) as error:
            raise serializers.ValidationError({'weights': [str(error)]})
        attrs['network'] = network
        return attrs

    def create(self, validated_data):
        return validated_data['network']


class NormalizationSerializer(StrictFieldsMixin, serializers.Serializer):
    lower = serializers.ListField(child=serializers.FloatField(), min_length=1)
    upper = serializers.ListField(child=serializers.FloatField(), min_length=1)

    def validate(self, attrs):
        try:
            Normalization(tuple(attrs['lower']), tuple(attrs['upper']))
        except RmfnnError as error:
            raise serializers.ValidationError(str(error))
        return attrs

    def create(self, validated_data):
        return Normalization(tuple(validated_data['lower']), tuple(validated_data['upper']))


class ManifestSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of the manifest of a surrogate bundle.
    """
    method = serializers.ChoiceField(choices=Method.choices)
    problem = serializers.ChoiceField(choices=ProblemId.choices)
    plan = serializers.DictField(required=False, default=dict)
    normalization = NormalizationSerializer()
    residual_normalization = NormalizationSerializer(required=False, allow_null=True, default=None)
    lf_source = serializers.ChoiceField(choices=['none', 'direct', 'network'], default='none')
    checkpoints = serializers.DictField(child=serializers.CharField())
    h_hf = serializers.FloatField(required=False, allow_null=True, default=None)
    h_lf = serializers.FloatField(required=False, allow_null=True, default=None)
    seeds = serializers.DictField(child=serializers.IntegerField(min_value=0), required=False, default=dict)
    metrics = serializers.DictField(required=False, default=dict)

    def validate(self, attrs):
        expected = {Method.RMFNN: {'dnn'}, Method.HFNN: {'dnn'}, Method.MFNN: {'dnn'}, Method.RMFNN_ALT: {'resnn'}}
        missing = expected.get(attrs['method'], set()) - set(attrs['checkpoints'])
        if missing:
            raise serializers.ValidationError({'checkpoints': ['Missing checkpoint(s): {}'.format(sorted(missing))]})
        if attrs['method'] in (Method.MFNN, Method.RMFNN_ALT) and attrs.get('residual_normalization') is None:
            raise serializers.ValidationError({'residual_normalization': ['Required for {}.'.format(attrs['method'])]})
        return attrs


class ToleranceBudgetSerializer(StrictFieldsMixin, serializers.Serializer):
    problem = serializers.ChoiceField(choices=ProblemId.choices)
    eps_tol = serializers.FloatField(min_value=0)
    n_theta = serializers.IntegerField(min_value=2)
    h_hf = serializers.FloatField(min_value=0)
    h_lf = serializers.FloatField(min_value=0)
    n = serializers.IntegerField(min_value=2)
    n_i = serializers.IntegerField(min_value=1)
    resnn_spec = NetworkSpecSerializer()
    resnn_cfg = TrainConfigSerializer()
    dnn_spec = NetworkSpecSerializer()
    dnn_cfg = TrainConfigSerializer()
    extrapolated = serializers.BooleanField()
    published_costs = serializers.DictField(child=serializers.FloatField(), required=False)

    def validate(self, attrs):
        if not attrs['h_hf'] < attrs['h_lf']:
            raise serializers.ValidationError({'h_hf': ['h_hf must be below h_lf.']})
        if not attrs['n_i'] < attrs['n']:
            raise serializers.ValidationError({'n_i': ['n_i must be below n.']})
        return attrs


class McEstimateSerializer(StrictFieldsMixin, serializers.Serializer):
    value = serializers.FloatField()
    stderr = serializers.FloatField(min_value=0)
    n_theta = serializers.IntegerField(min_value=2)
    seed = serializers.IntegerField(min_value=0, max_value=UINT64_MAX)
    wall_time_s = serializers.FloatField(min_value=0, required=False)


class ErrorReportSerializer(StrictFieldsMixin, serializers.Serializer):
    eps_mse = serializers.FloatField(min_value=0)
    eps_abs = serializers.FloatField(min_value=0)
    eps_rel = serializers.FloatField(min_value=0, allow_null=True)
    n_eval = serializers.IntegerField(min_value=1)
    reference = serializers.CharField()
    reference_value = serializers.FloatField()


class CostLedgerSerializer(StrictFieldsMixin, serializers.Serializer):
    w_hf = serializers.FloatField(min_value=0)
    w_lf = serializers.FloatField(min_value=0)
    w_dnn = serializers.FloatField(min_value=0)
    w_resnn = serializers.FloatField(min_value=0)
    w_t1 = serializers.FloatField(min_value=0)
    w_t2 = serializers.FloatField(min_value=0)
    n_i = serializers.IntegerField(min_value=0)
    n = serializers.IntegerField(min_value=0)
    n_theta = serializers.IntegerField(min_value=0)
    totals = serializers.DictField(child=serializers.FloatField())
    totals_with_training = serializers.DictField(child=serializers.FloatField())


class ReportSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of the report files written by the commands.
    """
    command = serializers.CharField()
    problem = serializers.ChoiceField(choices=ProblemId.choices, required=False)
    budget = ToleranceBudgetSerializer(required=False, allow_null=True)
    estimates = McEstimateSerializer(many=True, required=False)
    errors = ErrorReportSerializer(many=True, required=False)
    costs = CostLedgerSerializer(required=False, allow_null=True)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0, max_value=UINT64_MAX))
    training = serializers.DictField(required=False)
    summary = serializers.DictField(required=False)


class ExperimentConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """
    Serializer class of the experiment config files. Only the keys a command uses need to be given.
    """
    problem = serializers.ChoiceField(choices=ProblemId.choices, required=False)
    methods = serializers.ListField(child=serializers.ChoiceField(choices=Method.choices), min_length=1,
                                    required=False)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0, max_value=UINT64_MAX), min_length=1,
                                  required=False)
    output_dir = serializers.CharField(required=False)
    emit = serializers.ListField(child=serializers.ChoiceField(choices=EMIT_CHOICES), required=False)
    n_hf = serializers.ListField(child=serializers.IntegerField(min_value=2), min_length=1, required=False)
    architectures = serializers.ListField(child=serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=2, max_length=2), min_length=1, required=False)
    shortcut_period = serializers.IntegerField(min_value=0, required=False)
    epochs = serializers.IntegerField(min_value=0, required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    initial_lr = serializers.FloatField(min_value=0, required=False)
    tikhonov_lambda = serializers.FloatField(min_value=0, required=False)
    n_test = serializers.IntegerField(min_value=1, required=False)
    eps_tol = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=0.5), min_length=1,
                                    required=False)
    trials = serializers.IntegerField(min_value=1, required=False)
    n = serializers.IntegerField(min_value=2, required=False)
    n_i = serializers.IntegerField(min_value=1, required=False)
    n_theta = serializers.IntegerField(min_value=2, required=False)
    run_hfm = serializers.BooleanField(required=False)
    full_scale = serializers.BooleanField(required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    dt = serializers.FloatField(min_value=0, required=False)
    points = serializers.IntegerField(min_value=2, required=False)

    def validate(self, attrs):
        if 'n' in attrs and 'n_i' in attrs and attrs['n_i'] > attrs['n']:
            raise serializers.ValidationError({'n_i': ['n_i must not exceed n.']})
        if attrs.get('dt') == 0:
            raise serializers.ValidationError({'dt': ['dt must be positive.']})
        return attrs

    def create(self, validated_data):
        if 'architectures' in validated_data:
            validated_data['architectures'] = [tuple(pair) for pair in validated_data['architectures']]
        return ExperimentConfig(**validated_data)
