import os
import unittest
from unittest.mock import mock_open, patch

from .utils import load_config, env_or_config


class ProjectUtilsTestCase(unittest.TestCase):
    """
    Test cases for the project utils library.
    """

    @patch('builtins.open', mock_open(read_data='key: value'))
    def test_01_load_config_with_config_file(self):
        """Tests loading the config file when it exists."""
        config = load_config()
        self.assertDictEqual(config, {'key': 'value'})

    def test_02_load_config_without_config_file(self):
        """Tests loading the config file when it does not exist."""
        mo = mock_open()
        with patch('builtins.open', mo) as mocked_open:
            mocked_open.side_effect = FileNotFoundError
            config = load_config()
        self.assertDictEqual(config, {})

    @patch('builtins.open', mock_open())
    def test_03_load_config_without_config_file_when_none(self):
        """Tests loading the config file when it is empty."""
        config = load_config()
        self.assertDictEqual(config, {})

    @patch('builtins.open', mock_open(read_data='{"problem": "ivp", "eps_tol": [0.01]}'))
    def test_04_load_json_experiment_config(self):
        """Tests that JSON experiment configs are read by the same loader."""
        config = load_config('experiment.json')
        self.assertDictEqual(config, {'problem': 'ivp', 'eps_tol': [0.01]})

    def test_05_env_or_config(self):
        """Tests that an environment variable takes precedence over the config section."""
        with patch.dict(os.environ, {'RMFNN_WORKERS': '4'}):
            self.assertEqual(env_or_config('RMFNN_WORKERS', {'workers': 2}, 'workers'), '4')
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(env_or_config('RMFNN_WORKERS', {'workers': 2}, 'workers'), 2)
            self.assertEqual(env_or_config('RMFNN_WORKERS', {}, 'workers', 1), 1)
