from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict
import enum


class Experiment(str, enum.Enum):
    DISTORTION = "distortion"
    TIMING = "timing"
    PAIRWISE = "pairwise"
    VERIFY = "verify"


class Regime(str, enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    HIGH = "high"
    CUSTOM = "custom"


class InputFormat(str, enum.Enum):
    TT = "tt"
    CP = "cp"


class Family(str, enum.Enum):
    TT = "tt"
    CP = "cp"
    GAUSSIAN = "gaussian"
    VERY_SPARSE = "very_sparse"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="TENSORJL_")

    ORACLE_CAP: int = 10**7
    DENSE_MATRIX_CAP: int = 5 * 10**7
    MAX_JOBS: int = 1
    LOG_LEVEL: str = "INFO"
    SCHEMA_VERSION: int = 1
    RNG_ALGORITHM: str = "Philox4x64"
    TIMING_REPEATS: int = 20
    TIMING_WARMUPS: int = 3
    JACKKNIFE_BLOCKS: int = 100


settings = Settings()


__all__ = ["settings"]
