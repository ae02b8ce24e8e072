# utils/config.py
"""
Layered configuration: built-in defaults, vpr.toml, .env, then environment variables
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

import toml

from core.exceptions import ConfigurationError
from utils.logger import logger


# setting name -> (environment variable, TOML section, parser)
SETTINGS_SCHEMA = {
    'k': ('VPR_K', 'matching', int),
    'f': ('VPR_F', 'matching', int),
    'w': ('VPR_W', 'matching', int),
    'ds': ('VPR_DS', 'seqslam', int),
    'vmin': ('VPR_VMIN', 'seqslam', float),
    'vmax': ('VPR_VMAX', 'seqslam', float),
    'vstep': ('VPR_VSTEP', 'seqslam', float),
    'rwindow': ('VPR_RWINDOW', 'seqslam', int),
    'allowance': ('VPR_ALLOWANCE', 'eval', int),
    'log_level': ('VPR_LOG_LEVEL', 'logging', str),
}


class Config:
    """Application configuration"""

    API_VERSION = "1.0.0"

    # Matching defaults (K = smallest benchmark map, F = SeqSLAM trajectory length)
    DEFAULT_K = 200
    DEFAULT_F = 20
    DEFAULT_W = 1

    # SeqSLAM-style baseline
    DEFAULT_DS = 20
    DEFAULT_VMIN = 0.8
    DEFAULT_VMAX = 1.2
    DEFAULT_VSTEP = 0.1
    DEFAULT_RWINDOW = 10

    # Evaluation
    DEFAULT_ALLOWANCE = 1

    # Numerics
    ZERO_SPREAD_TOL = 1e-12
    RNG_NAME = "PCG64"

    # Descriptor
    DEFAULT_GRID_W = 64
    DEFAULT_GRID_H = 32
    DEFAULT_PATCH = 8

    # Bench
    DEFAULT_BENCH_SIZES = [500, 2000, 5000, 10000, 20000]
    DEFAULT_BENCH_QUERIES = 40
    BENCH_TECHNIQUES = 4

    # SIMM binary format
    SIMM_MAGIC = b"SIMM"
    MAX_MATRIX_ELEMENTS = 2 ** 31
    CSV_CHUNK_ROWS = 256
    RUN_RECORD = 'run.toml'

    DEFAULT_TOML = 'vpr.toml'
    LOG_LEVEL = "INFO"


def default_settings() -> Dict[str, Any]:
    """Built-in defaults keyed like SETTINGS_SCHEMA"""
    return {
        'k': Config.DEFAULT_K,
        'f': Config.DEFAULT_F,
        'w': Config.DEFAULT_W,
        'ds': Config.DEFAULT_DS,
        'vmin': Config.DEFAULT_VMIN,
        'vmax': Config.DEFAULT_VMAX,
        'vstep': Config.DEFAULT_VSTEP,
        'rwindow': Config.DEFAULT_RWINDOW,
        'allowance': Config.DEFAULT_ALLOWANCE,
        'log_level': Config.LOG_LEVEL,
    }


def _coerce(name: str, raw: Any, source: str) -> Any:
    parser = SETTINGS_SCHEMA[name][2]
    try:
        return parser(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Invalid value for '{name}' in {source}: {raw!r}")


def _read_env_file(env_path: Path) -> Dict[str, str]:
    env_vars = {}
    with open(env_path, 'r') as f:
        for line in f:
            line = line.strip()
            if line and '=' in line and not line.startswith('#'):
                key, value = line.split('=', 1)
                env_vars[key.strip()] = value.strip().strip('"').strip("'")
    return env_vars


def load_settings(config_path: Optional[str] = None, env_path: Optional[str] = '.env') -> Dict[str, Any]:
    """Load matcher settings, later layers overriding earlier ones"""
    settings = default_settings()

    # TOML file: explicit path must exist, the default one is optional
    toml_path = Path(config_path) if config_path else Path(Config.DEFAULT_TOML)
    if config_path and not toml_path.exists():
        raise ConfigurationError(f"Config file not found: {config_path}")
    if toml_path.exists():
        try:
            document = toml.load(toml_path)
        except toml.TomlDecodeError as e:
            raise ConfigurationError(f"Cannot parse {toml_path}: {e}")
        known_sections = {section for _, section, _ in SETTINGS_SCHEMA.values()}
        for section, values in document.items():
            if section not in known_sections or not isinstance(values, dict):
                logger.warning(f"Ignoring unknown config section [{section}]", "CONFIG")
                continue
            for key, value in values.items():
                if key not in SETTINGS_SCHEMA or SETTINGS_SCHEMA[key][1] != section:
                    logger.warning(f"Ignoring unknown key '{key}' in [{section}]", "CONFIG")
                    continue
                settings[key] = _coerce(key, value, str(toml_path))
        logger.debug(f"Settings loaded from {toml_path}", "CONFIG")

    # .env file, then real environment variables
    env_layers = []
    if env_path and Path(env_path).exists():
        env_layers.append((_read_env_file(Path(env_path)), env_path))
    env_layers.append((os.environ, 'environment'))

    for values, source in env_layers:
        for name, (env_name, _, _) in SETTINGS_SCHEMA.items():
            raw = values.get(env_name)
            if raw not in (None, ''):
                settings[name] = _coerce(name, raw, source)

    return settings
