"""Model-free constant-current / constant-voltage reference charger.

The controller sees only what a charger measures (terminal voltage, cell temperature and
SOC) and holds the voltage and temperature limits by proportional current reduction. The
voltage band closes at v_hold: the current is already zero there, so a control period of
lag cannot carry the voltage past the hold.
"""
import math
from dataclasses import dataclass

from src.battery_env.charging_env import ChargingEnv
from src.battery_env.config import KELVIN_OFFSET, EnvConfig
from src.battery_env.rollout import EpisodeResult, run_episode
from src.config_utilities import ConfigUtilities
from src.errors import ConfigError


@dataclass(frozen=True)
class CcCvConfig:
    """cc_rate in C, v_hold in V, t_hold in degrees Celsius. k_volt is the current reduction
    in C per volt above v_taper = v_hold - cc_rate / k_volt, k_temp in C per kelvin above
    t_hold.

    k_volt times the cell's instantaneous resistance (about 0.1 V per C for the shipped
    cell) has to stay below 1, otherwise the hold oscillates from one period to the next.
    """

    cc_rate: float = 1.0
    v_hold: float = 4.2
    t_hold: float = 45.0
    k_volt: float = 5.0
    k_temp: float = 0.5
    cutoff_soc: float = 0.8

    def __post_init__(self):
        for name in ("cc_rate", "v_hold", "t_hold", "k_volt", "k_temp", "cutoff_soc"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        if self.cc_rate <= 0:
            raise ConfigError(f"cc_rate must be positive, got {self.cc_rate}")
        if self.k_volt <= 0 or self.k_temp < 0:
            raise ConfigError("k_volt must be positive and k_temp >= 0")
        if not 0.0 < self.cutoff_soc <= 1.0:
            raise ConfigError(f"cutoff_soc must lie in (0, 1], got {self.cutoff_soc}")

    def check(self, env_config: EnvConfig):
        """Raises ConfigError unless the charger fits inside the environment's limits."""
        if self.cc_rate > env_config.i_max:
            raise ConfigError(f"cc_rate {self.cc_rate} C exceeds i_max {env_config.i_max} C")
        if self.v_hold > env_config.v_max:
            raise ConfigError(f"v_hold {self.v_hold} V exceeds v_max {env_config.v_max} V")

    @property
    def v_taper(self) -> float:
        """Voltage where the current starts to fall; it reaches zero at v_hold."""
        return self.v_hold - self.cc_rate / self.k_volt

    @property
    def t_hold_K(self) -> float:
        return self.t_hold + KELVIN_OFFSET

    def to_dict(self) -> dict:
        return ConfigUtilities.to_dict(self)

    def from_dict(data: dict | None) -> "CcCvConfig":
        return ConfigUtilities.from_dict(CcCvConfig, data, "cccv")


def cccv_rate(v_terminal: float, T_cell: float, soc: float, cfg: CcCvConfig) -> float:
    """Commanded C-rate before normalization; T_cell in kelvin."""
    if soc >= cfg.cutoff_soc:
        return 0.0
    rate = cfg.cc_rate
    rate -= cfg.k_volt * max(0.0, v_terminal - cfg.v_taper)
    rate -= cfg.k_temp * max(0.0, T_cell - cfg.t_hold_K)
    return min(cfg.cc_rate, max(0.0, rate))


def cccv_controller(v_terminal: float, T_cell: float, soc: float, cfg: CcCvConfig, env_config: EnvConfig) -> float:
    """Normalized action of the CC-CV charger for one measurement.

    Below v_taper and t_hold the action corresponds to cc_rate exactly. Above either the
    current is reduced in proportion to the excess; from v_hold on it is zero (action -1).

    Parameters:
        - v_terminal - measured terminal voltage [V]
        - T_cell - measured cell temperature [K]
        - soc - bulk anode SOC
        - cfg - charger settings
        - env_config - environment whose i_max defines the action scale

    Returns:
        action in [-1, 1]
    """
    rate = cccv_rate(v_terminal, T_cell, soc, cfg)
    return min(1.0, max(-1.0, 2.0 * rate / env_config.i_max - 1.0))


def run_cccv_episode(env: ChargingEnv, cfg: CcCvConfig = None, seed: int | None = 0) -> EpisodeResult:
    """Charges one episode with the CC-CV controller closed around the environment's
    measurements.

    Returns:
        EpisodeResult, trajectory included
    """
    cfg = cfg or CcCvConfig()
    cfg.check(env.config)

    def policy(_obs):
        state = env.state
        return cccv_controller(state.v_terminal, state.T_cell, state.soc, cfg, env.config)

    return run_episode(env, policy, seed)
