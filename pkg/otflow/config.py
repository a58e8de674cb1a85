"""Configuration management for otflow"""
from pydantic_settings import BaseSettings, SettingsConfigDict

_LOG_LEVELS = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"}


class Settings(BaseSettings):
    """Numerical defaults, overridable through OTFLOW_* environment variables"""

    model_config = SettingsConfigDict(
        env_prefix="OTFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Algebraic tolerances
    tol: float = 1e-10
    prune_tol: float = 1e-14
    admissibility_tol: float = 1e-9
    soliton_tol: float = 1e-8  # relative to 1 + max|rho|

    # Integrator controls
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = 1.0
    first_sample: float = 0.01
    sample_growth: float = 1.5

    # Convergence diagnostics
    asymptotic_window: float = 0.01
    gh_tolerance: float = 0.02

    jobs: int = 1
    log_level: str = "INFO"

    def validate_config(self) -> None:
        """Validate numerical configuration"""
        for name in ("tol", "prune_tol", "admissibility_tol", "soliton_tol", "rtol", "atol",
                     "max_step", "first_sample", "asymptotic_window", "gh_tolerance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"OTFLOW_{name.upper()} must be positive")
        if self.sample_growth <= 1:
            raise ValueError("OTFLOW_SAMPLE_GROWTH must be greater than 1")
        if self.jobs < 1:
            raise ValueError("OTFLOW_JOBS must be at least 1")
        if self.log_level.upper() not in _LOG_LEVELS:
            raise ValueError(f"OTFLOW_LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}")


def get_settings() -> Settings:
    """Re-read the environment and return a validated Settings instance."""
    fresh = Settings()
    fresh.validate_config()
    return fresh


# Global settings instance
settings = get_settings()
