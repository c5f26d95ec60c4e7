import yaml
from pathlib import Path
import os


CONFIG_FILE = os.path.join(Path(__file__).resolve().parent.parent, 'config.yml')


def load_config(config_file: str = CONFIG_FILE) -> dict:
    """
    Returns the content of a config file.
    The project config is read from config.yml at the repository root. Experiment configs are JSON files,
    which the YAML loader reads as well.
    """
    try:
        with open(config_file) as config:
            content = yaml.safe_load(config)
            if not content:
                return {}
    except FileNotFoundError:
        return {}
    return content


def env_or_config(env_name: str, config: dict, key: str, default=None):
    """
    Returns the value of the environment variable if it is set, otherwise the value from the config section.
    """
    return os.environ.get(env_name, config.get(key, default))
