"""
Django settings for the surrogate_lab project.

The project hosts the residual multi-fidelity surrogate experiments: the numerical library lives in
rmfnn_app.utils, the experiment runners are management commands, and the database keeps the ledger of
experiment runs and trials.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import os
import sys
import logging.config

# Whether the tests are being run
TEST_MODE = len(sys.argv) > 1 and sys.argv[1] == 'test'

from .utils import load_config, env_or_config


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

project_config = load_config()

# The project serves no HTTP traffic; the key is only needed by Django internals.
SECRET_KEY = os.environ.get('RMFNN_SECRET_KEY', 'rmfnn-lab-local-only-key')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rmfnn_app',
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases

db_config = project_config.get('database', {})
db_engine = env_or_config('RMFNN_DB_ENGINE', db_config, 'engine', 'sqlite3')
if db_engine == 'postgresql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': env_or_config('RMFNN_DB_NAME', db_config, 'name', ''),
            'USER': env_or_config('RMFNN_DB_USER', db_config, 'user', ''),
            'PASSWORD': env_or_config('RMFNN_DB_PASSWORD', db_config, 'password', ''),
            'HOST': env_or_config('RMFNN_DB_HOST', db_config, 'host', ''),
            'PORT': env_or_config('RMFNN_DB_PORT', db_config, 'port', ''),
            'TEST': {
                'NAME': env_or_config('RMFNN_DB_TEST_NAME', db_config, 'test_db_name', '')
            }
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': env_or_config('RMFNN_DB_NAME', db_config, 'name', str(BASE_DIR / 'db.sqlite3')),
        }
    }


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/4.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# custom settings

experiment_config = project_config.get('experiments', {})

# where the commands write their artifacts when --out is not given
RMFNN_OUTPUT_DIR = env_or_config('RMFNN_OUTPUT_DIR', experiment_config, 'output_dir', str(BASE_DIR / 'runs'))
# number of worker threads of the trial pool
RMFNN_WORKERS = int(experiment_config.get('workers', 1))


# logging

LOGGING_CONFIG = None
log_config = project_config.get('logging', {})
LOG_DIR = env_or_config('RMFNN_LOG_DIR', log_config, 'directory', str(BASE_DIR / 'logs'))
LOG_LEVEL = env_or_config('RMFNN_LOG_LEVEL', log_config, 'level', 'INFO')
os.makedirs(LOG_DIR, exist_ok=True)

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "generic": {
            "format": "{asctime} {levelname} {module} {filename} {lineno} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "file": {
            "level": LOG_LEVEL,
            "class": "logging.FileHandler",
            "filename": os.path.join(LOG_DIR, "general.log"),
            "formatter": "generic",
        },
        "console": {
            "level": "WARNING",
            "class": "logging.StreamHandler",
            "formatter": "generic",
        },
    },
    "loggers": {
        "rmfnn_logger": {
            "handlers": ["file", "console"],
            "level": LOG_LEVEL,
            "propagate": True,
        },
    },
}

logging.config.dictConfig(LOGGING)
