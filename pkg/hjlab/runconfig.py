"""
Experiment configuration: flat ``key = value`` files, command-line flags and
registry defaults, merged in that order of precedence (flags win) and checked
by :class:`hjlab.serializers.ExperimentConfigSerializer`.
"""
import logging
from dataclasses import replace
from pathlib import Path

from .exceptions import ConfigError
from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

CONFIG_KEYS = (
    'id', 'scheme', 'dx', 'cfl', 'T', 'x_min', 'x_max', 'c', 'eps', 'tol', 'window', 'snapshot_stride', 'boundary', 'x0',
)

BASE_DEFAULTS = {
    'scheme': 'godunov',
    'dx': 0.01,
    'cfl': 0.9,
    'T': 1.0,
    'x_min': -8.0,
    'x_max': 8.0,
    'c': 0.0,
    'eps': 0.5,
    'tol': 0.05,
    'window': (-4.0, 4.0),
    'snapshot_stride': None,
    'boundary': 'one_sided_upwind',
    'x0': 0.0,
}


def read_config_file(path):
    """Returns ``{key: (raw value, line number)}``."""
    entries = {}
    for number, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f'{path}:{number}: expected "key = value", got {raw.strip()!r}', line=number)
        if key not in CONFIG_KEYS:
            raise ConfigError(f'{path}:{number}: unknown key {key!r}', line=number)
        if key in entries:
            raise ConfigError(f'{path}:{number}: {key!r} is set twice', line=number)
        entries[key] = (value, number)
    return entries


def validate_config(values, lines=None):
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f'unknown config keys: {", ".join(unknown)}', details={'unknown': unknown})
    serializer = ExperimentConfigSerializer(data=values)
    if not serializer.is_valid():
        errors = {key: [str(m) for m in messages] for key, messages in serializer.errors.items()}
        first = next(iter(errors))
        line = (lines or {}).get(first)
        where = f' (line {line})' if line else ''
        raise ConfigError(f'invalid {first}{where}: {errors[first][0]}', line=line, details=errors)
    return dict(serializer.validated_data)


def merge_config(spec, file_values=None, flags=None):
    """Registry defaults < file < flags, validated as one mapping."""
    file_values = file_values or {}
    flags = {key: value for key, value in (flags or {}).items() if value is not None}
    merged = {**BASE_DEFAULTS, **spec.defaults}
    merged.update({key: value for key, (value, _) in file_values.items()})
    merged.update(flags)
    merged.pop('id', None)
    lines = {key: line for key, (_, line) in file_values.items() if key not in flags}
    return validate_config(merged, lines)


def parse_config(path=None, flags=None, experiment_id=None):
    """An experiment spec whose defaults carry the merged, validated config."""
    from .experiments import get_experiment

    file_values = read_config_file(path) if path else {}
    flags = dict(flags or {})
    experiment_id = flags.pop('id', None) or experiment_id
    if experiment_id is None:
        if 'id' not in file_values:
            raise ConfigError('no experiment id given in the config or on the command line')
        experiment_id = file_values['id'][0]
    file_values.pop('id', None)
    spec = get_experiment(experiment_id)
    config = merge_config(spec, file_values, flags)
    logger.debug(f'config for {spec.id}: {config}')
    return replace(spec, defaults=config)
