from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        extra="allow",
        env_prefix="txreach_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # cone counts: smallest k preserving reachability vs. smallest k giving a 2-spanner
    default_k: int = 12
    oracle_k: int = 20

    spanner_builder: Literal["auto", "naive", "range_tree"] = "auto"
    naive_spanner_max: int = 1500

    septree_leaf_size: int = 8
    separator_quantiles: int = 9
    separator_sample_size: int = 256
    separator_retries: int = 3
    # fitted crossings ~ c * sqrt(m) constants above this are reported as warnings
    crossing_constant_warn: float = 10.0

    index_block_size: int = 32
    index_scan_max: int = 64
    dynamic_rebuild_fraction: float = 0.5

    closure_max_n: int = 3000

    seed: int = 0
    progress: bool = False
    query_workers: int = 1

    SYSTEM: str = "txreach"
    SYSTEM_VERSION: str = "0.1.0"


app_settings = Settings()
