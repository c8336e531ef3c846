import dataclasses
import logging

from src.errors import ConfigError

logger = logging.getLogger(__name__)


class ConfigUtilities():
    """Conversions between config dataclasses and plain mappings (the YAML sections)."""

    def to_dict(config) -> dict:
        return {fld.name: getattr(config, fld.name) for fld in dataclasses.fields(config)}

    def from_dict(cls, data: dict | None, section: str = ""):
        """Builds cls from a mapping; missing keys keep their defaults.

        Parameters:
            - cls - dataclass type to build
            - data - mapping of field name to value, or None for all defaults
            - section - name used in error messages

        Returns:
            instance of cls
        """
        data = dict(data or {})
        names = {fld.name for fld in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown key '{unknown[0]}' in section '{section or cls.__name__}'")
        try:
            return cls(**data)
        except TypeError as err:
            raise ConfigError(f"section '{section or cls.__name__}': {err}") from err

    def merge(base, overrides: dict, section: str = ""):
        """Copy of base with the non-None entries of overrides applied."""
        values = ConfigUtilities.to_dict(base)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in values:
                raise ConfigError(f"unknown key '{key}' in section '{section or type(base).__name__}'")
            values[key] = value
        return ConfigUtilities.from_dict(type(base), values, section)
