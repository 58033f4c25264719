"""App-level settings with defaults.

Values come from ``settings.SDNSEC`` when Django is configured, otherwise the
defaults below apply.
"""
from django.conf import settings

DEFAULTS = {
    'REPLAY_THRESHOLD': 3,
    'REPLAY_WINDOW': 2 ** 16,
    'MISS_QUEUE_LIMIT': 64,
    'FAILOVER_TTL': 86400,
    'DEFAULT_FLOW_TTL': 3600,
    'LINK_DELAY_MS': 1,
    'CONTROL_DELAY_MS': 2,
    'REPORT_BYTES': 14,
    'PVC_CPU_MPPS': 17,
}


def get(name):
    if name not in DEFAULTS:
        raise KeyError(f"Unknown SDNsec setting: {name}")
    overrides = getattr(settings, 'SDNSEC', {}) if settings.configured else {}
    return overrides.get(name, DEFAULTS[name])
