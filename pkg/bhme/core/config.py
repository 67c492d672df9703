from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from bhme import __version__
from bhme.core.errors import InvalidArgumentError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    APP_NAME: str = "bhme"
    APP_VERSION: str = __version__
    LOG_LEVEL: str = "INFO"

    # Priors: Gam(a, b) on every precision and hyper-precision
    PRIOR_GAMMA_SHAPE: float = 1e-2
    PRIOR_GAMMA_RATE: float = 1e-4

    # Coordinate ascent
    MAX_ITERATIONS: int = 800  # 200 annealed + 600 at terminal temperature
    MIN_ITERATIONS: int = 50
    TOLERANCE: float = 1e-6  # relative bound change per sweep
    XI_INIT: float = 1.0
    GATE_INIT_SD: float = 0.1
    ZETA_MAX_PASSES: int = 25  # sequential gate passes per q_Z update
    ZETA_TOLERANCE: float = 1e-10

    # Deterministic annealing
    ANNEALING_MODE: str = "literal"  # "literal", "clamped" or "none"
    ANNEALING_INITIAL: float = 5.85
    ANNEALING_DECAY: float = 0.97
    ANNEALING_SWITCH_ITERATION: int = 200
    ANNEALING_TERMINAL: float = 1.0

    # Model selection
    MAX_ENUMERATION_EXPERTS: int = 8
    SELECT_RESTARTS: int = 100  # toy-scale sweeps
    SWEEP_EXECUTOR: str = "local"  # "local", "process" or "celery"
    SWEEP_WORKERS: int = 0  # 0 = one per CPU

    # Celery / Redis (only used when SWEEP_EXECUTOR=celery)
    REDIS_URL: str = "redis://localhost:6379/0"
    CELERY_TASK_MAX_RETRIES: int = 3
    CELERY_TASK_RETRY_DELAY: int = 60  # seconds

    # Prediction
    PREDICT_MODE: str = "most-probable-expert"  # or "mixture-mean"
    GATING_MODE: str = "plugin"  # or "probit"

    # Data generation
    TOY_SIZE: int = 200
    TOY_NOISE_SD: float = 0.05
    ARM_LINK1: float = 0.8
    ARM_LINK2: float = 0.2
    ARM_TRAIN_SIZE: int = 1000  # default --n for generate arm


settings = Settings()


def load_settings(config_path: str | None = None) -> Settings:
    """Return settings, reading a flat KEY=VALUE file when one is given."""
    if config_path is None:
        return settings
    try:
        return Settings(_env_file=config_path)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}"
            for error in exc.errors()
        )
        raise InvalidArgumentError(f"{config_path}: {problems}") from exc
