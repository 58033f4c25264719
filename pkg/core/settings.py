"""
Settings for the SDNsec simulator.

Values come from the environment (a .env file is read first). The protocol
knobs live in the ``SDNSEC`` dict and are read through ``sdnsec.conf``; each
one can be overridden with an ``SDNSEC_<NAME>`` variable. ``DATABASE_URL``
points the run recorder at another database, and ``SDNSEC_LOG_LEVEL`` sets the
verbosity of the sdnsec loggers.

Django reference: https://docs.djangoproject.com/en/5.0/ref/settings/
"""

import os
from pathlib import Path

import dj_database_url
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SECRET_KEY', 'django-insecure-fallback-dev-key')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = ['127.0.0.1', 'localhost']


# Application definition

INSTALLED_APPS = [
    'sdnsec',
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'core.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database
# https://docs.djangoproject.com/en/5.0/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

db_from_env = dj_database_url.config(conn_max_age=600)
DATABASES['default'].update(db_from_env)


# Internationalization
# https://docs.djangoproject.com/en/5.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ==========================================
# SDNSEC PROTOCOL KNOBS
# ==========================================
def _env_number(name, default, cast=int):
    value = os.environ.get(name)
    return default if value in (None, '') else cast(value)


SDNSEC = {
    'REPLAY_THRESHOLD': _env_number('SDNSEC_REPLAY_THRESHOLD', 3),
    'REPLAY_WINDOW': _env_number('SDNSEC_REPLAY_WINDOW', 2 ** 16),
    'MISS_QUEUE_LIMIT': _env_number('SDNSEC_MISS_QUEUE_LIMIT', 64),
    'FAILOVER_TTL': _env_number('SDNSEC_FAILOVER_TTL', 86400),
    'DEFAULT_FLOW_TTL': _env_number('SDNSEC_DEFAULT_FLOW_TTL', 3600),
    'LINK_DELAY_MS': _env_number('SDNSEC_LINK_DELAY_MS', 1, float),
    'CONTROL_DELAY_MS': _env_number('SDNSEC_CONTROL_DELAY_MS', 2, float),
    'REPORT_BYTES': _env_number('SDNSEC_REPORT_BYTES', 14),
    'PVC_CPU_MPPS': _env_number('SDNSEC_PVC_CPU_MPPS', 17, float),
}


# ==========================================
# LOGGING
# ==========================================
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'sdnsec': {
            'handlers': ['console'],
            'level': os.environ.get('SDNSEC_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}


# ==========================================
# SECURITY & SESSION HARDENING
# ==========================================

# The admin is the only web surface.
SESSION_COOKIE_AGE = 30 * 60
SESSION_COOKIE_HTTPONLY = True
CSRF_COOKIE_HTTPONLY = True
SECURE_CONTENT_TYPE_NOSNIFF = True
X_FRAME_OPTIONS = 'DENY'
