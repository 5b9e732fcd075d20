"""
Django settings for the rfim_desk project.

Everything tunable is read from the environment (optionally a .env file next to
manage.py), so experiment runs can be reconfigured without editing code.
"""

from pathlib import Path

import os

## python-dotenv
import dotenv

dotenv.load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def env_flag(name, default='false'):
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


# Only used by Django internals; nothing here is served over HTTP.
SECRET_KEY = os.getenv('SECRET_KEY', 'rfim-desk-local')

DEBUG = env_flag('RFIM_DEBUG')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'rfim',
]

# No database: the toolkit keeps all state in files it writes itself.

TIME_ZONE = 'UTC'

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Library knobs. Keys mirror rfim.conf.DEFAULTS; environment names are RFIM_<KEY>.

RFIM = {
    'ORACLE_MAX_FREE': int(os.getenv('RFIM_ORACLE_MAX_FREE', '24')),
    'GAP_MAX_FREE': int(os.getenv('RFIM_GAP_MAX_FREE', '12')),
    'MLSI_MAX_FREE': int(os.getenv('RFIM_MLSI_MAX_FREE', '10')),
    'SWEEP_MAX_FREE': int(os.getenv('RFIM_SWEEP_MAX_FREE', '10')),
    'DEFAULT_SEED': int(os.getenv('RFIM_DEFAULT_SEED', '0')),
    'WORKERS': int(os.getenv('RFIM_WORKERS', '1')),
    'PROGRESS': env_flag('RFIM_PROGRESS'),
    'POSTERIOR_MIN_HITS': int(os.getenv('RFIM_POSTERIOR_MIN_HITS', '500')),
    'SAMPLED_PINNINGS': int(os.getenv('RFIM_SAMPLED_PINNINGS', '1000')),
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'rfim': {
            'handlers': ['console'],
            'level': os.getenv('RFIM_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
