"""App-level settings with defaults, read lazily from ``settings.RFIM``."""
from django.conf import settings

DEFAULTS = {
    'ORACLE_MAX_FREE': 24,
    'GAP_MAX_FREE': 12,
    'MLSI_MAX_FREE': 10,
    'SWEEP_MAX_FREE': 10,
    'DEFAULT_SEED': 0,
    'WORKERS': 1,
    'PROGRESS': False,
    'POSTERIOR_MIN_HITS': 500,
    'SAMPLED_PINNINGS': 1000,
}


def rfim_setting(name):
    if name not in DEFAULTS:
        raise KeyError(f"Unknown rfim setting {name!r}")
    overrides = getattr(settings, 'RFIM', {}) if settings.configured else {}
    return overrides.get(name, DEFAULTS[name])
