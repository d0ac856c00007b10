"""Configuration settings for the legal reasoning engine."""

import logging
from contextvars import ContextVar
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from pydantic import BaseModel, ValidationError, field_validator
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

PACKAGE_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_TEMPLATES_DIR = PACKAGE_ROOT / "templates"
DEFAULT_EXEMPLARS_PATH = PACKAGE_ROOT / "data" / "exemplars.json"
DEFAULT_CREDENTIAL_ENV = "MALR_API_KEY"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_CONFIG_FILE_VALUES: ContextVar[Dict[str, Any]] = ContextVar("malr_config_file_values", default={})


class BackendKind(str, Enum):
    SCRIPTED = "scripted"
    HTTP = "http"


class ScriptedMode(str, Enum):
    """Behaviour of the scripted rule-world backend."""
    PERFECT = "perfect"
    AFFIRMATIVE = "affirmative"
    FLAWED = "flawed"


class OracleKind(str, Enum):
    HTTP_MODEL = "http_model"
    SCRIPTED = "scripted"
    CONSOLE = "console"


class EmbedderKind(str, Enum):
    TRIGRAM = "trigram"
    HTTP = "http"


class BackendSettings(BaseModel):
    """Completion backend settings."""
    kind: BackendKind = BackendKind.SCRIPTED
    endpoint: str = "http://localhost:8000/v1"
    model: str = "gpt-4-0125-preview"
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    request_timeout: float = 60.0
    retry_attempts: int = 3
    retry_base_delay: float = 0.5
    scripted_mode: ScriptedMode = ScriptedMode.PERFECT
    flawed_element: str = "subject"
    misdirect_reflection: bool = False

    @field_validator("retry_attempts")
    @classmethod
    def validate_retry_attempts(cls, v):
        if v < 1:
            raise ValueError("retry_attempts must be at least 1")
        return v


class OracleSettings(BaseModel):
    """Knowledge-feedback expert settings."""
    kind: OracleKind = OracleKind.SCRIPTED
    endpoint: str = "http://localhost:8001/v1"
    model: str = "legal-expert"
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    answers_path: Optional[str] = None


class EmbedderSettings(BaseModel):
    """Text embedding settings."""
    kind: EmbedderKind = EmbedderKind.TRIGRAM
    endpoint: str = "http://localhost:8000/v1"
    model: str = "text-embedding-3-small"
    dim: int = 256

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v):
        if v < 1:
            raise ValueError("dim must be positive")
        return v


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="MALR_",
        env_nested_delimiter="__",
        env_file=".env",
        case_sensitive=False,
        extra="ignore"
    )

    backend: BackendSettings = BackendSettings()
    oracle: OracleSettings = OracleSettings()
    embedder: EmbedderSettings = EmbedderSettings()

    templates_dir: Optional[str] = None
    exemplars_path: Optional[str] = None

    # Planner / trainer settings
    zeta: float = 0.8
    max_trials: int = 2

    # Processing settings
    worker_pool_size: int = 4
    deterministic: bool = False

    # Decoding settings
    temperature: float = 0.0
    max_output_tokens: int = 512

    # Logging settings
    log_level: str = "INFO"

    @field_validator("zeta")
    @classmethod
    def validate_zeta(cls, v):
        """Threshold must lie in (0, 1]."""
        if not 0.0 < v <= 1.0:
            raise ValueError("zeta must be in (0, 1]")
        return v

    @field_validator("max_trials", "worker_pool_size", "max_output_tokens")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @field_validator("temperature")
    @classmethod
    def validate_temperature(cls, v):
        if v < 0:
            raise ValueError("temperature must be non-negative")
        return v

    @field_validator("templates_dir", "exemplars_path")
    @classmethod
    def validate_path_exists(cls, v):
        """Referenced paths must exist when the settings are built."""
        if v is not None and not Path(v).exists():
            raise ValueError(f"path does not exist: {v}")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        level = str(v).upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"unknown log level: {v}")
        return level

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls,
        init_settings,
        env_settings,
        dotenv_settings,
        file_secret_settings
    ):
        return (init_settings, env_settings, dotenv_settings, YamlConfigSource(settings_cls), file_secret_settings)

    @property
    def resolved_templates_dir(self) -> Path:
        return Path(self.templates_dir) if self.templates_dir else DEFAULT_TEMPLATES_DIR

    @property
    def resolved_exemplars_path(self) -> Path:
        return Path(self.exemplars_path) if self.exemplars_path else DEFAULT_EXEMPLARS_PATH


class YamlConfigSource(PydanticBaseSettingsSource):
    """Settings source for the YAML config file; ranks below the environment."""

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return _CONFIG_FILE_VALUES.get().get(field_name), field_name, False

    def __call__(self) -> Dict[str, Any]:
        return {
            name: value for name, value in _CONFIG_FILE_VALUES.get().items()
            if name in self.settings_cls.model_fields
        }


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    cleaned: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, dict):
            value = _drop_none(value)
            if not value:
                continue
        if value is not None:
            cleaned[key] = value
    return cleaned


def load_settings(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Build settings from a YAML config file, the environment and flag overrides.

    Precedence, lowest first: config file, environment / .env, overrides.

    Args:
        config_path: Optional YAML file with a key-value tree
        overrides: Flag values; ``None`` entries are ignored

    Returns:
        Validated settings
    """
    file_values: Dict[str, Any] = {}
    if config_path:
        path = Path(config_path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                file_values = yaml.safe_load(f) or {}
        except (OSError, UnicodeDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}")
        if not isinstance(file_values, dict):
            raise ConfigurationError(f"Config file {path} must contain a mapping")

    token = _CONFIG_FILE_VALUES.set(file_values)
    try:
        settings = Settings(**_drop_none(overrides or {}))
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")
    finally:
        _CONFIG_FILE_VALUES.reset(token)
    logger.debug(f"Loaded settings (backend={settings.backend.kind.value}, oracle={settings.oracle.kind.value})")
    return settings


def get_settings() -> Settings:
    """Get application settings instance."""
    return load_settings()
