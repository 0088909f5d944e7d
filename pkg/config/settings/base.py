"""
Base settings to build other settings files upon.
"""

import environ

ROOT_DIR = environ.Path(__file__) - 3  # (kinbarrier/config/settings/base.py - 3 = kinbarrier/)
APPS_DIR = ROOT_DIR.path('kinbarrier')

env = environ.Env()

READ_DOT_ENV_FILE = env.bool('DJANGO_READ_DOT_ENV_FILE', default=False)
if READ_DOT_ENV_FILE:
    # OS environment variables take precedence over variables from .env
    env.read_env(str(ROOT_DIR.path('.env')))

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool('DJANGO_DEBUG', False)
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
# Only used by Django internals, the solver has no secrets.
SECRET_KEY = env('DJANGO_SECRET_KEY', default='kinbarrier-is-a-command-line-tool')
TIME_ZONE = 'UTC'
# https://docs.djangoproject.com/en/dev/ref/settings/#use-tz
USE_TZ = True

# DATABASES
# ------------------------------------------------------------------------------
# Nothing is stored in a database; all results are files below KB_OUTPUT_DIR.
DATABASES = {}

# APPS
# ------------------------------------------------------------------------------
LOCAL_APPS = [
    'kinbarrier.analysis.apps.AnalysisAppConfig',
    'kinbarrier.scenarios.apps.ScenariosAppConfig',
]
# https://docs.djangoproject.com/en/dev/ref/settings/#installed-apps
INSTALLED_APPS = LOCAL_APPS

# Your stuff...
# ------------------------------------------------------------------------------

#
# Worker pool for the data-parallel map over spatial cells
#
KB_WORKERS = env.int('KB_WORKERS', default=1)

#
# Root directory for scenario artifacts, one subdirectory per scenario
#
KB_OUTPUT_DIR = env('KB_OUTPUT_DIR', default='artifacts')

#
# Settings for tracking package versions in scenario manifests
#
# list of tuples of form (import_name, expression_returning_version_string)
TRACKED_DEPENDENCIES = [
    ('kinbarrier', 'kinbarrier.__version__'),
    ('django', 'django.__version__'),
    ('numpy', 'numpy.__version__'),
    ('scipy', 'scipy.__version__'),
    ('pandas', 'pandas.__version__'),
    ('yaml', 'yaml.__version__'),
]

# LOGGING
# ------------------------------------------------------------------------------
# See: https://docs.djangoproject.com/en/dev/ref/settings/#logging
# Log records go to standard error so that standard output of the
# management commands stays machine readable (e.g. verify --json).
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(levelname)s %(asctime)s %(module)s '
                      '%(process)d %(thread)d %(message)s'
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'kinbarrier': {
            'level': env('KB_LOG_LEVEL', default='INFO'),
            'handlers': ['console'],
            'propagate': True
        },
    }
}
