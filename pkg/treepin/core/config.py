"""Configuration management for treepin."""
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..core.exceptions import ConfigurationError
from .models import ModelSpec


class Config:
    """Configuration manager with environment variable support."""

    def __init__(self, env_file: Optional[str] = None):
        """Initialize config, optionally loading from .env file."""
        if env_file and Path(env_file).exists():
            self._load_env_file(env_file)

    @property
    def node_budget(self) -> int:
        """Largest d^n a recursive traversal may visit."""
        return self._int("TREEPIN_NODE_BUDGET", 100_000_000)

    @property
    def brute_force_limit(self) -> int:
        """Largest number of paths the brute-force oracle may enumerate."""
        return self._int("TREEPIN_BRUTE_FORCE_LIMIT", 1_000_000)

    @property
    def block_size(self) -> int:
        """Largest subtree evaluated as one vectorized block."""
        return self._int("TREEPIN_BLOCK_SIZE", 262_144)

    @property
    def threads(self) -> int:
        """Default worker count."""
        return max(1, self._int("TREEPIN_THREADS", 1))

    @property
    def enable_cache(self) -> bool:
        """Whether critical points are persisted on disk."""
        return os.getenv("TREEPIN_ENABLE_CACHE", "false").lower() in ("true", "1", "yes")

    @property
    def cache_dir(self) -> str:
        """Cache directory."""
        return os.getenv("TREEPIN_CACHE_DIR", "./.cache")

    @property
    def default_output_dir(self) -> str:
        """Default output directory for CSV files and run records."""
        return os.getenv("TREEPIN_OUTPUT_DIR", "./outputs")

    @property
    def log_level(self) -> str:
        """Logging level name."""
        return os.getenv("TREEPIN_LOG_LEVEL", "WARNING").upper()

    def validate(self) -> None:
        """Validate configuration."""
        if self.node_budget < 1:
            raise ConfigurationError("TREEPIN_NODE_BUDGET must be positive")
        if self.brute_force_limit < 1:
            raise ConfigurationError("TREEPIN_BRUTE_FORCE_LIMIT must be positive")
        if self.block_size < 2:
            raise ConfigurationError("TREEPIN_BLOCK_SIZE must be at least 2")

    @staticmethod
    def _int(name: str, default: int) -> int:
        try:
            return int(os.getenv(name, str(default)))
        except ValueError:
            return default

    def _load_env_file(self, env_file: str) -> None:
        """Load environment variables from .env file."""
        try:
            with open(env_file, 'r') as f:
                for line in f:
                    line = line.strip()
                    if line and not line.startswith('#') and '=' in line:
                        key, value = line.split('=', 1)
                        os.environ.setdefault(key.strip(), value.strip())
        except Exception as e:
            raise ConfigurationError(f"Failed to load {env_file}: {e}")


class RunConfig(BaseModel):
    """Settings for one CLI run, read from a JSON file and overridden by flags."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    model: ModelSpec = Field(default_factory=ModelSpec)
    beta: float = 1.0
    u: Optional[float] = None
    beta_grid: List[float] = Field(default_factory=lambda: [round(0.1 * i, 10) for i in range(41)])
    u_grid: List[float] = Field(default_factory=lambda: [round(0.25 * i, 10) for i in range(13)])
    n: int = Field(10, ge=1)
    n_list: List[int] = Field(default_factory=lambda: [6, 8, 10, 12])
    replicas: int = Field(20, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    threads: int = Field(default_factory=lambda: config.threads, ge=1)
    tolerance: float = Field(1e-9, ge=0)
    boundary_tol: float = Field(1e-9, ge=0)
    extrapolate: bool = False
    curve_points: int = Field(50, ge=2)

    @property
    def potential(self) -> float:
        """Defect potential: explicit u, else the model's own."""
        return self.model.u if self.u is None else self.u


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON run config and apply flag overrides (flags win)."""
    data: Dict[str, Any] = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to read config {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config {path} must hold a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"Invalid configuration: {problems}")


# Global config instance
config = Config()
