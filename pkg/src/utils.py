"""
Configuration management.

ConfigManager is a process-wide singleton over `config_schema.yaml`. Every
schema leaf declares a value and a type; user files and programmatic
overrides are coerced to that type, so solver tolerances written as `1e-9`
(a string to YAML 1.1) still arrive as floats. Values outside a leaf's
`options` are refused.
"""
import logging
import threading
from collections.abc import Callable, Mapping
from contextlib import suppress
from pathlib import Path
from typing import Any

import yaml

_DEFAULT_CONFIG_PATH = Path('interimcore.yaml')
_SCHEMA_FILENAME = 'config_schema.yaml'

logger = logging.getLogger(__name__)

ConfigListener = Callable[[str, str, Any], None]

_COERCERS: dict[str, Callable[[Any], Any]] = {
    'float': float,
    'int': int,
    'str': str,
}


def _as_bool(value: Any) -> bool:
    match value:
        case bool():
            return value
        case str() if value.lower() in ('true', 'yes', 'on', '1'):
            return True
        case str() if value.lower() in ('false', 'no', 'off', '0'):
            return False
        case int():
            return bool(value)
    raise ValueError(f"not a boolean: {value!r}")


def _is_leaf(entry: Any) -> bool:
    return isinstance(entry, Mapping) and 'value' in entry


def _defaults(schema: Mapping[str, Any]) -> dict[str, Any]:
    """Schema tree with every leaf replaced by its default value."""
    return {
        key: entry['value'] if _is_leaf(entry) else _defaults(entry)
        for key, entry in schema.items()
        if isinstance(entry, Mapping)
    }


def _walk(tree: Any, keys: tuple[str, ...]) -> Any:
    """Follow keys through nested mappings; None when any is missing."""
    for key in keys:
        match tree:
            case Mapping() if key in tree:
                tree = tree[key]
            case _:
                return None
    return tree


def coerce_setting(entry: Mapping[str, Any] | None, value: Any, where: str = '') -> Any:
    """Convert a value to its schema type and check it against `options`."""
    if entry is None or value is None:
        return value
    kind = entry.get('type', 'str')
    try:
        converted = _as_bool(value) if kind == 'bool' else _COERCERS.get(kind, lambda v: v)(value)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{where or 'setting'} expects {kind}, got {value!r}") from e
    if kind == 'int' and isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{where or 'setting'} expects int, got {value!r}")
    options = entry.get('options')
    if options and converted not in options:
        raise ValueError(f"{where or 'setting'} must be one of {options}, got {converted!r}")
    return converted


class ConfigManager:
    """Thread-safe singleton holding the merged configuration tree."""

    _instance: 'ConfigManager | None' = None
    _lock = threading.Lock()

    def __init__(self, schema: dict[str, Any], config_path: Path) -> None:
        self.schema = schema
        self.config: dict[str, Any] = _defaults(schema)
        self.config_path = config_path
        self._listeners: list[ConfigListener] = []

    @classmethod
    def initialize(
        cls,
        schema_path: Path | str | None = None,
        config_path: Path | str | None = None,
    ) -> None:
        """Create the singleton once: schema defaults, then the user file if present."""
        if cls._instance is not None:
            return
        with cls._lock:
            if cls._instance is None:
                schema = cls.load_config_schema(schema_path)
                instance = cls(schema, Path(config_path) if config_path else _DEFAULT_CONFIG_PATH)
                instance.load_user_config()
                cls._instance = instance

    @classmethod
    def ensure_initialized(cls) -> 'ConfigManager':
        if cls._instance is None:
            cls.initialize()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """Drop the singleton so the next access re-reads schema and user file."""
        with cls._lock:
            cls._instance = None

    @classmethod
    def instance(cls) -> 'ConfigManager':
        if cls._instance is None:
            raise RuntimeError("ConfigManager not initialized")
        return cls._instance

    @classmethod
    def get_schema(cls) -> dict[str, Any]:
        return cls.instance().schema

    @classmethod
    def get_config_section(cls, *keys: str) -> dict[str, Any]:
        section = _walk(cls.ensure_initialized().config, keys)
        return section if isinstance(section, dict) else {}

    @classmethod
    def get_config_value(cls, *keys: str) -> Any:
        return _walk(cls.ensure_initialized().config, keys)

    @classmethod
    def value_or(cls, explicit: Any, *keys: str) -> Any:
        """`explicit` unless it is None, else the configured value.

        Solver entry points take tuning arguments defaulting to None and
        resolve them here, so library calls and the CLI share one default.
        """
        return explicit if explicit is not None else cls.get_config_value(*keys)

    @classmethod
    def set_config_value(cls, value: Any, *keys: str) -> None:
        """Set one setting (coerced to its schema type) and notify listeners."""
        if not keys:
            raise ValueError("At least one key required")
        instance = cls.ensure_initialized()
        entry = _walk(instance.schema, keys)
        value = coerce_setting(entry if _is_leaf(entry) else None, value, '.'.join(keys))

        with cls._lock:
            node = instance.config
            for key in keys[:-1]:
                node = node.setdefault(key, {})
            node[keys[-1]] = value
            listeners = list(instance._listeners)

        # Outside the lock: listeners may read the config
        for listener in listeners:
            listener(keys[0], keys[-1], value)

    @classmethod
    def add_listener(cls, listener: ConfigListener) -> None:
        """Register listener(section, key, value), called after every set."""
        cls.ensure_initialized()._listeners.append(listener)

    @classmethod
    def remove_listener(cls, listener: ConfigListener) -> None:
        with suppress(ValueError):
            cls.ensure_initialized()._listeners.remove(listener)

    @staticmethod
    def load_config_schema(schema_path: Path | str | None = None) -> dict[str, Any]:
        path = Path(schema_path) if schema_path else Path(__file__).parent / _SCHEMA_FILENAME
        return yaml.safe_load(path.read_text())

    def _merge(self, target: dict[str, Any], overrides: Mapping[str, Any], schema: Any, prefix: str) -> None:
        for key, value in overrides.items():
            where = f"{prefix}{key}"
            entry = schema.get(key) if isinstance(schema, Mapping) else None
            if isinstance(value, Mapping) and not _is_leaf(entry):
                self._merge(target.setdefault(key, {}), value, entry, f"{where}.")
                continue
            try:
                target[key] = coerce_setting(entry if _is_leaf(entry) else None, value, where)
            except ValueError as e:
                logger.warning(f"ignoring user setting: {e}")

    def load_user_config(self, config_path: Path | str | None = None) -> None:
        """Deep-merge a user YAML file over the current values.

        Missing files and malformed YAML leave the configuration untouched;
        single settings of the wrong type are skipped with a warning.
        """
        path = Path(config_path) if config_path else self.config_path
        if not path.is_file():
            return
        try:
            overrides = yaml.safe_load(path.read_text())
        except yaml.YAMLError as e:
            logger.warning(f"ignoring malformed config {path}: {e}")
            return
        if isinstance(overrides, Mapping):
            self._merge(self.config, overrides, self.schema, '')
            logger.debug(f"Merged user config from {path}")

    @classmethod
    def save_config(cls, config_path: Path | str | None = None) -> None:
        instance = cls.instance()
        path = Path(config_path) if config_path else instance.config_path
        path.write_text(yaml.safe_dump(instance.config, default_flow_style=False))

    @classmethod
    def reload_config(cls) -> None:
        """Back to schema defaults, then the user file again."""
        instance = cls.instance()
        instance.config = _defaults(instance.schema)
        instance.load_user_config()

    @classmethod
    def console_print(cls, message: str) -> None:
        """Operator status line; logged at INFO unless print_to_terminal is off."""
        if cls._instance is None:
            return
        if _walk(cls._instance.config, ('output_options', 'print_to_terminal')) is not False:
            logger.info(message)
