from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional
from importlib.metadata import version, PackageNotFoundError


class Settings(BaseSettings):
    """
    Automatically loads DCRB_* environment variables from .env file and validates types.
    """

    # Reproducibility
    SEED: Optional[int] = None

    # Execution
    JOBS: int = 1
    MAX_BRANCH_MEASUREMENTS: int = 16

    # Output
    OUTPUT_DIR: str = "./results"

    # Environment
    ENVIRONMENT: str = "development"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="DCRB_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )

    @property
    def package_version(self) -> str:
        """
        Reads version from pyproject.toml via installed package metadata.
        Falls back to development version if package not installed.
        """
        try:
            return version("dcrb")
        except PackageNotFoundError:
            return "0.1.0-dev"


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Accessor for the process-wide settings"""
    return settings
