import unittest

from rmfnn_app.serializers import NetworkSpecSerializer, TrainConfigSerializer, CheckpointSerializer, \
    ManifestSerializer, ExperimentConfigSerializer, ReportSerializer
from rmfnn_app.utils.constants import Method
from rmfnn_app.utils.ExperimentRunner import ExperimentConfig
from rmfnn_app.utils.NetworkManager import NetworkManager, NetworkSpec, TrainConfig


class SerializersTestCase(unittest.TestCase):
    """
    Test cases for the serializers of the checkpoint, manifest, report and config files.
    """

    def test_01_network_spec(self):
        """Tests that a valid spec is created and a shortcut across unequal widths is refused."""
        serializer = NetworkSpecSerializer(data={'input_dim': 2, 'hidden_widths': [4, 4, 4], 'shortcut_period': 2})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.save(), NetworkSpec(2, (4, 4, 4), shortcut_period=2))
        serializer = NetworkSpecSerializer(data={'input_dim': 2, 'hidden_widths': [4, 5, 3], 'shortcut_period': 2})
        self.assertFalse(serializer.is_valid())
        self.assertIn('hidden_widths', serializer.errors)

    def test_02_unknown_fields_are_named(self):
        """Tests that every unknown key is reported by name."""
        serializer = NetworkSpecSerializer(data={'input_dim': 1, 'hidden_widths': [3], 'depth': 3, 'act': 'relu'})
        self.assertFalse(serializer.is_valid())
        self.assertEqual(set(serializer.errors), {'act', 'depth'})

    def test_03_train_config_defaults(self):
        """Tests that missing training values take the library defaults."""
        serializer = TrainConfigSerializer(data={'epochs': 10, 'batch_size': 5})
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.save(), TrainConfig(epochs=10, batch_size=5))
        serializer = TrainConfigSerializer(data={'plateau_factor': 1.5})
        self.assertFalse(serializer.is_valid())

    def test_04_checkpoint(self):
        """Tests that a checkpoint payload is turned into a network."""
        net = NetworkManager.init_network(NetworkSpec(1, (3,), seed=4))
        serializer = CheckpointSerializer(data=NetworkManager.to_payload(net))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        restored = serializer.save()
        self.assertEqual(restored.spec, net.spec)
        payload = NetworkManager.to_payload(net)
        payload['weights'] = payload['weights'][:1]
        serializer = CheckpointSerializer(data=payload)
        self.assertFalse(serializer.is_valid())
        self.assertIn('weights', serializer.errors)

    def test_05_manifest_needs_checkpoints(self):
        """Tests that a manifest names the checkpoints its method needs."""
        manifest = {'method': Method.RMFNN, 'problem': 'ivp', 'normalization': {'lower': [-1.0], 'upper': [1.0]},
                    'checkpoints': {'resnn': 'resnn.json'}}
        serializer = ManifestSerializer(data=manifest)
        self.assertFalse(serializer.is_valid())
        self.assertIn('checkpoints', serializer.errors)
        manifest['checkpoints']['dnn'] = 'dnn.json'
        serializer = ManifestSerializer(data=manifest)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['lf_source'], 'none')

    def test_06_manifest_residual_normalization(self):
        """Tests that the correlation surrogate needs the normalization of its (theta, Q_LF) inputs."""
        manifest = {'method': Method.MFNN, 'problem': 'ivp', 'normalization': {'lower': [-1.0], 'upper': [1.0]},
                    'checkpoints': {'dnn': 'dnn.json'}}
        serializer = ManifestSerializer(data=manifest)
        self.assertFalse(serializer.is_valid())
        self.assertIn('residual_normalization', serializer.errors)

    def test_07_experiment_config(self):
        """Tests that a config file is turned into an experiment config."""
        serializer = ExperimentConfigSerializer(data={'problem': 'ivp', 'eps_tol': ['1e-2'], 'seeds': [1, 2],
                                                      'architectures': [[7, 7], [25, 7]], 'output_dir': 'out'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertIsInstance(config, ExperimentConfig)
        self.assertEqual(config.eps_tol, [0.01])
        self.assertEqual(config.architectures, [(7, 7), (25, 7)])

    def test_08_experiment_config_errors(self):
        """Tests the rejected config files."""
        serializer = ExperimentConfigSerializer(data={'problem': 'heat'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('problem', serializer.errors)
        serializer = ExperimentConfigSerializer(data={'n': 10, 'n_i': 11})
        self.assertFalse(serializer.is_valid())
        self.assertIn('n_i', serializer.errors)
        serializer = ExperimentConfigSerializer(data={'learning_rate': 0.1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('learning_rate', serializer.errors)

    def test_09_report(self):
        """Tests the report schema."""
        report = {'command': 'mc', 'problem': 'pulsed', 'seeds': [3],
                  'estimates': [{'value': 1.2, 'stderr': 0.01, 'n_theta': 10, 'seed': 3}],
                  'summary': {'value': 1.2}}
        self.assertTrue(ReportSerializer(data=report).is_valid())
        report['seeds'] = [-1]
        serializer = ReportSerializer(data=report)
        self.assertFalse(serializer.is_valid())
        self.assertIn('seeds', serializer.errors)
