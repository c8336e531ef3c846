import math
from dataclasses import dataclass

from src.config_utilities import ConfigUtilities
from src.errors import ConfigError

KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class EnvConfig:
    """Episode definition of the minimum-time charging problem.

    Temperatures are in degrees Celsius, currents in C-rate. soc_jitter draws the initial
    SOC uniformly within +-soc_jitter of soc_init from the reset seed.
    """

    soc_init: float = 0.3
    soc_ref: float = 0.8
    v_init: float = 3.6
    t_init: float = 27.0
    v_max: float = 4.2
    t_max: float = 47.0
    i_max: float = 1.8
    dt_ctrl: float = 60.0
    max_steps: int = 120
    observation_mode: str = "simplified"
    r_fast: float = -0.1
    k_volt: float = 100.0
    k_temp: float = 5.0
    soc_jitter: float = 0.0

    def __post_init__(self):
        for name in ("soc_init", "soc_ref", "v_init", "t_init", "v_max", "t_max", "i_max", "dt_ctrl",
                     "r_fast", "k_volt", "k_temp", "soc_jitter"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if not 0.0 <= self.soc_init < self.soc_ref <= 1.0:
            raise ConfigError(f"need 0 <= soc_init < soc_ref <= 1, got {self.soc_init} and {self.soc_ref}")
        if self.v_max <= self.v_init:
            raise ConfigError(f"v_max ({self.v_max}) must exceed v_init ({self.v_init})")
        if self.t_max <= self.t_init:
            raise ConfigError(f"t_max ({self.t_max}) must exceed t_init ({self.t_init})")
        if self.i_max <= 0 or self.dt_ctrl <= 0:
            raise ConfigError("i_max and dt_ctrl must be positive")
        if isinstance(self.max_steps, bool) or not isinstance(self.max_steps, int) or self.max_steps < 1:
            raise ConfigError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        if self.observation_mode not in ("full", "simplified"):
            raise ConfigError(f"observation_mode must be 'full' or 'simplified', got {self.observation_mode!r}")
        #keeps every reward non-positive
        if self.r_fast > 0 or self.k_volt < 0 or self.k_temp < 0:
            raise ConfigError("r_fast must be <= 0 and k_volt, k_temp >= 0")
        if self.soc_jitter < 0 or self.soc_init - self.soc_jitter < 0 or self.soc_init + self.soc_jitter >= self.soc_ref:
            raise ConfigError(f"soc_jitter {self.soc_jitter} leaves [0, soc_ref)")

    @property
    def t_init_K(self) -> float:
        return self.t_init + KELVIN_OFFSET

    @property
    def t_max_K(self) -> float:
        return self.t_max + KELVIN_OFFSET

    def to_dict(self) -> dict:
        return ConfigUtilities.to_dict(self)

    def from_dict(data: dict | None) -> "EnvConfig":
        return ConfigUtilities.from_dict(EnvConfig, data, "env")


@dataclass(frozen=True)
class AgingScenario:
    """Parameter perturbation of an aged cell; (1, 1) leaves the cell untouched."""

    film_resistance_multiplier: float = 1.0
    heat_generation_multiplier: float = 1.0

    def __post_init__(self):
        for name in ("film_resistance_multiplier", "heat_generation_multiplier"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be finite and positive, got {value!r}")

    @property
    def is_identity(self) -> bool:
        return self.film_resistance_multiplier == 1.0 and self.heat_generation_multiplier == 1.0

    def to_dict(self) -> dict:
        return ConfigUtilities.to_dict(self)

    def from_dict(data: dict | None) -> "AgingScenario":
        return ConfigUtilities.from_dict(AgingScenario, data, "scenario")


#what --scenario aged selects
DEFAULT_AGED_SCENARIO = AgingScenario(film_resistance_multiplier=2.0, heat_generation_multiplier=1.5)
