from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    # App
    app_name: str = "Maxwell-Stefan Transport Solver"
    log_level: str = "INFO"
    output_dir: str = "results"

    # Time stepping
    default_safety: float = 0.9
    iteration_tolerance: float = 1e-10

    # Numerical guards
    clip_tolerance: float = 1e-12
    singular_tolerance: float = 1e-14

    # Run audit
    closure_tolerance: float = 1e-12
    conservation_tolerance: float = 1e-10

    # Species order (1, 2, 3)
    species_names: str = "H,H2,H2+"

    class Config:
        env_file = ".env"
        env_prefix = "MSTRANSPORT_"
        case_sensitive = False
        extra = "ignore"  # Ignore extra fields in .env

    @property
    def species_names_list(self) -> list[str]:
        return [name.strip() for name in self.species_names.split(",")]


@lru_cache()
def get_settings() -> Settings:
    return Settings()
