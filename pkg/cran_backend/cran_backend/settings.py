"""
Django settings for cran_backend project.

The project hosts the cache-enabled CRAN resource allocation library as a set
of Django apps. Only management commands are exposed; there are no URL routes.

Numerical knobs are read from the environment (a local `.env` file is loaded
first) so sweeps can be tuned without touching code.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# The project is never served; the key only satisfies Django's startup checks.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'cran-backend-local-only')

DEBUG = os.getenv('DJANGO_DEBUG', 'false').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'core_model',
    'scenarios',
    'dual_solver',
    'oracle',
    'experiments',
]

REST_FRAMEWORK = {
    'COMPACT_JSON': False,
    'STRICT_JSON': True,
    'UNICODE_JSON': False,
}

# Database
# Nothing is persisted; sqlite only keeps Django's checks quiet.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, '') else default


def _env_int(name, default):
    value = os.getenv(name)
    return int(value) if value not in (None, '') else default


# ── CRAN knobs ─────────────────────────────────────────────

CRAN_LOG_LEVEL = os.getenv('CRAN_LOG_LEVEL', 'INFO').upper()

# worker processes for Monte-Carlo drops; --threads overrides
CRAN_THREADS = _env_int('CRAN_THREADS', 1)

# relative slack tolerance used by check_feasibility
CRAN_FEASIBILITY_TOL = _env_float('CRAN_FEASIBILITY_TOL', 1e-6)

CRAN_SOLVER = {
    'mode': os.getenv('CRAN_SOLVER_MODE', 'exhaustive'),
    'tol': _env_float('CRAN_SOLVER_TOL', 1e-4),
    # max_iter = factor * (C + K)
    'max_iter_factor': _env_int('CRAN_SOLVER_MAX_ITER_FACTOR', 2000),
    'radius_safety': _env_float('CRAN_SOLVER_RADIUS_SAFETY', 1e3),
    # absolute floor (W) under |g| in the stopping rule
    'gap_floor': _env_float('CRAN_SOLVER_GAP_FLOOR', 1e-6),
    'recovery_pool': _env_int('CRAN_SOLVER_RECOVERY_POOL', 16),
    # near-minimal choices kept per subchannel, and skeletons examined beyond the pool
    'recovery_width': _env_int('CRAN_SOLVER_RECOVERY_WIDTH', 4),
    'recovery_budget': _env_int('CRAN_SOLVER_RECOVERY_BUDGET', 512),
}

CRAN_KKT_TOL = _env_float('CRAN_KKT_TOL', 1e-8)

CRAN_ORACLE_LIMIT = _env_int('CRAN_ORACLE_LIMIT', 10_000_000)

CRAN_PRESET_DIR = Path(os.getenv('CRAN_PRESET_DIR', BASE_DIR / 'presets'))

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        name: {'handlers': ['console'], 'level': CRAN_LOG_LEVEL, 'propagate': False}
        for name in ('core_model', 'scenarios', 'dual_solver', 'oracle', 'experiments', 'utils')
    },
}
