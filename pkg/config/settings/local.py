"""
Settings for working on kinbarrier itself: debug mode and chatty logging.
"""
from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool('DJANGO_DEBUG', True)

# LOGGING
# ------------------------------------------------------------------------------
LOGGING['loggers']['kinbarrier']['level'] = env('KB_LOG_LEVEL', default='DEBUG')  # noqa F405
