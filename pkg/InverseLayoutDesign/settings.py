"""
Django settings for the InverseLayoutDesign project.

The project has no web surface: Django provides settings, the management
commands that make up the CLI, the run ledger and the test runner.
"""
import os
from pathlib import Path

######################################################################
# General
######################################################################
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("SECRET_KEY", "inverse-layout-design-local")

DEBUG = os.environ.get("DEBUG") == "True"

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

TEST_RUNNER = 'core.runner.LayoutTestRunner'

######################################################################
# Apps
######################################################################
INSTALLED_APPS = [
    'core',
    'pipeline',
]

######################################################################
# Databases
######################################################################
if os.environ.get("DB_NAME"):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.environ.get("DB_NAME"),
            'USER': os.environ.get("DB_USER"),
            'PASSWORD': os.environ.get("DB_PASSWORD"),
            'HOST': os.environ.get("DB_HOST", "db"),
            'PORT': '5432',
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'ledger.sqlite3',
        }
    }

######################################################################
# Logging
######################################################################
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
        'core': {'handlers': ['console'], 'level': os.environ.get("LOG_LEVEL", "INFO")},
        'pipeline': {'handlers': ['console'], 'level': os.environ.get("LOG_LEVEL", "INFO")},
    },
}

######################################################################
# Layout design runs
######################################################################
LAYOUT_CONFIG = Path(os.environ.get("LAYOUT_CONFIG", BASE_DIR / "config" / "defaults.toml"))

LAYOUT_THREADS = int(os.environ.get("LAYOUT_THREADS", os.cpu_count() or 1))

######################################################################
# Localization
######################################################################
LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True
