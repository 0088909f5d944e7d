"""
With these settings, tests run faster.
"""

from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = False
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# Your stuff...
# ------------------------------------------------------------------------------
KB_WORKERS = 1
KB_OUTPUT_DIR = env('KB_OUTPUT_DIR', default='/tmp/kinbarrier-test-artifacts')

# LOGGING
# ------------------------------------------------------------------------------
LOGGING['loggers']['kinbarrier']['level'] = 'INFO'  # noqa F405
