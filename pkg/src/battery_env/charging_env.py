"""Episodic minimum-time charging environment on top of the reduced cell simulator.

The agent commands a normalized action in [-1, 1] that maps to a charging current in
[0, i_max] C. An episode ends when the bulk anode SOC reaches soc_ref, when the horizon
is exhausted, or when the simulator reports concentration saturation.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.errors import EnvironmentStateError, SimulationError
from src.spmet.grid import SimulatorContext, build_grid
from src.spmet.parameters import CellParameters, Discretization
from src.spmet.simulator import (CellState, VoltageBreakdown, bulk_soc, equilibrium_state, open_circuit_voltage,
                                 step, terminal_voltage)
from src.spmet.trajectory import TrajectoryRecorder
from .config import AgingScenario, EnvConfig

logger = logging.getLogger(__name__)

SOC_REACHED = "soc_reached"
TIMEOUT = "timeout"
SATURATION = "saturation"

V_INIT_TOLERANCE = 0.05  # [V]


@dataclass(frozen=True, eq=False)
class Observation:
    values: np.ndarray
    mode: str

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class RewardBreakdown:
    r_fast: float
    r_volt: float
    r_temp: float
    total: float


@dataclass(frozen=True, eq=False)
class Transition:
    """One replay tuple; reward is the total of the step's RewardBreakdown."""

    obs: Observation
    action: float
    reward: float
    next_obs: Observation
    done: bool
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.obs.mode != self.next_obs.mode or len(self.obs) != len(self.next_obs):
            raise ValueError("obs and next_obs must share mode and length")


@dataclass
class EnvState:
    cell: CellState
    steps: int = 0
    time_s: float = 0.0
    done: bool = False
    reason: str = ""
    v_terminal: float = float("nan")
    T_cell: float = float("nan")
    soc: float = float("nan")


def clamp_action(a: float) -> tuple[float, bool]:
    """Clamps a into [-1, 1]; the flag tells whether clamping changed it."""
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"action must be finite, got {a}")
    clamped = min(1.0, max(-1.0, a))
    return clamped, clamped != a


def scale_action(a: float, config: EnvConfig, Q_nominal: float) -> float:
    """Charging current magnitude [A] for a normalized action: -1 gives 0 A, +1 gives i_max C.

    Parameters:
        - a - normalized action, clamped into [-1, 1]
        - config - environment config (i_max)
        - Q_nominal - cell capacity [A h], defines 1C

    Returns:
        current magnitude in amperes (non-negative)
    """
    a, _ = clamp_action(a)
    return 0.5 * (a + 1.0) * config.i_max * Q_nominal


def reward(v_terminal: float, T_cell: float, config: EnvConfig) -> RewardBreakdown:
    """Fast-charging penalty plus linear voltage and temperature penalties. T_cell in kelvin."""
    r_volt = -config.k_volt * (v_terminal - config.v_max) if v_terminal >= config.v_max else 0.0
    r_temp = -config.k_temp * (T_cell - config.t_max_K) if T_cell >= config.t_max_K else 0.0
    return RewardBreakdown(config.r_fast, r_volt, r_temp, config.r_fast + r_volt + r_temp)


def violation_scores(trajectory: pd.DataFrame, config: EnvConfig) -> tuple[float, float]:
    """Maximum excess of terminal voltage over v_max [V] and of cell temperature over
    t_max [K]; positive values mean the constraint was violated.

    Parameters:
        - trajectory - frame with v_terminal_V and t_cell_K columns
        - config - environment config with the bounds

    Returns:
        (v_score, t_score)
    """
    if len(trajectory) == 0:
        raise ValueError("violation scores need a non-empty trajectory")
    v_score = float(np.max(trajectory["v_terminal_V"].to_numpy()) - config.v_max)
    t_score = float(np.max(trajectory["t_cell_K"].to_numpy()) - config.t_max_K)
    return v_score, t_score


class ChargingEnv():
    """Charging environment for one (parameters, config, scenario) triple.

    The simulator context, including the aging perturbation, is built once; reset and step
    only create new states. Instances are single-owner.
    """

    def __init__(self, params: CellParameters, config: EnvConfig = None, scenario: AgingScenario = None,
                 disc: Discretization = None) -> None:
        self.params = params
        self.config = config or EnvConfig()
        self.scenario = scenario or AgingScenario()
        self.disc = disc or Discretization()
        cell_params = params
        if self.scenario.film_resistance_multiplier != 1.0:
            cell_params = params.aged(self.scenario.film_resistance_multiplier)
        self.ctx: SimulatorContext = build_grid(cell_params, self.disc, self.scenario.heat_generation_multiplier)
        self.state: EnvState | None = None
        self.trajectory = TrajectoryRecorder(with_env=True)
        self.rng = np.random.default_rng()
        if not self.scenario.is_identity:
            logger.info("aging scenario: film x%g, heat x%g", self.scenario.film_resistance_multiplier,
                        self.scenario.heat_generation_multiplier)

    @property
    def observation_size(self) -> int:
        return self.ctx.state_count if self.config.observation_mode == "full" else 2

    def reset(self, seed: int | None = None) -> Observation:
        """Starts an episode at rest: particles balanced at soc_init, uniform electrolyte and
        T_cell = t_init.

        Parameters:
            - seed - seeds the initial-SOC jitter (no effect when soc_jitter is 0)

        Returns:
            the initial Observation
        """
        self.rng = np.random.default_rng(seed)
        cfg = self.config
        soc = cfg.soc_init
        if cfg.soc_jitter > 0:
            soc += self.rng.uniform(-cfg.soc_jitter, cfg.soc_jitter)
        cell = equilibrium_state(self.ctx, soc, cfg.t_init_K)

        ocv = open_circuit_voltage(self.ctx, cell)
        if abs(ocv - cfg.v_init) > V_INIT_TOLERANCE:
            logger.warning("open-circuit voltage %.3f V at SOC %.3f differs from v_init %.3f V", ocv, soc, cfg.v_init)

        self.state = EnvState(cell=cell, v_terminal=ocv, T_cell=cell.T_cell, soc=bulk_soc(self.ctx, cell))
        self.trajectory = TrajectoryRecorder(with_env=True)
        self.trajectory.record(0.0, 0.0, terminal_voltage(self.ctx, cell, 0.0), cell.T_cell, self.state.soc)
        return self.observe(cell)

    def observe(self, cell: CellState) -> Observation:
        """Affinely normalized observation: solid shells as c / c_s_max, electrolyte as
        c_e / c_e0 - 1 and temperature as (T - t_init) / (t_max - t_init)."""
        cfg = self.config
        temperature = (cell.T_cell - cfg.t_init_K) / (cfg.t_max - cfg.t_init)
        if cfg.observation_mode == "simplified":
            values = np.array([bulk_soc(self.ctx, cell), temperature])
        else:
            p = self.ctx.params
            values = np.concatenate((
                cell.c_s_anode / p.c_s_max_anode,
                cell.c_s_cathode / p.c_s_max_cathode,
                cell.c_e / p.c_e0 - 1.0,
                [temperature]))
        return Observation(values, cfg.observation_mode)

    def step(self, a: float) -> tuple[Observation, RewardBreakdown, bool, dict]:
        """Applies the scaled charging current for dt_ctrl seconds.

        Parameters:
            - a - normalized action; values outside [-1, 1] are clamped and flagged in info

        Returns:
            (next observation, reward breakdown, done, info) where info carries v_excess and
            t_excess, the instantaneous distances to the bounds
        """
        if self.state is None:
            raise EnvironmentStateError("reset must be called before step")
        if self.state.done:
            raise EnvironmentStateError(f"episode already terminated ({self.state.reason})")

        cfg = self.config
        action, clamped = clamp_action(a)
        if clamped:
            logger.debug("action %r clamped to %g", a, action)
        current = -scale_action(action, cfg, self.ctx.params.Q_nominal)

        prev = self.state
        cell = step(self.ctx, prev.cell, current, cfg.dt_ctrl)
        voltage, cell = self._voltage(cell, current, prev)
        soc = bulk_soc(self.ctx, cell)

        steps = prev.steps + 1
        reason = ""
        if cell.saturated:
            reason = SATURATION
        elif soc >= cfg.soc_ref:
            reason = SOC_REACHED
        elif steps >= cfg.max_steps:
            reason = TIMEOUT
        done = bool(reason)

        breakdown = reward(voltage.v_terminal, cell.T_cell, cfg)
        self.state = EnvState(cell=cell, steps=steps, time_s=prev.time_s + cfg.dt_ctrl, done=done, reason=reason,
                              v_terminal=voltage.v_terminal, T_cell=cell.T_cell, soc=soc)
        self.trajectory.record(self.state.time_s, current, voltage, cell.T_cell, soc,
                               action=action, reward=breakdown.total, done=done)
        if done:
            logger.debug("episode finished after %d steps: %s", steps, reason)

        info = {
            "v_excess": voltage.v_terminal - cfg.v_max,
            "t_excess": cell.T_cell - cfg.t_max_K,
            "v_terminal": voltage.v_terminal,
            "t_cell_K": cell.T_cell,
            "soc": soc,
            "current_A": current,
            "clamped": clamped,
            "reason": reason,
        }
        return self.observe(cell), breakdown, done, info

    def _voltage(self, cell: CellState, current: float, prev: EnvState) -> tuple[VoltageBreakdown, CellState]:
        try:
            return terminal_voltage(self.ctx, cell, current), cell
        except SimulationError as err:
            logger.info("voltage undefined after step, treating as saturation: %s", err)
            #fall back on the last valid reading
            last = VoltageBreakdown(prev.v_terminal, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan)
            return last, dataclasses.replace(cell, saturated=True)

    @property
    def charge_time_min(self) -> float:
        return self.state.time_s / 60.0 if self.state is not None else 0.0

    def violation_scores(self) -> tuple[float, float]:
        return violation_scores(self.trajectory.to_frame(), self.config)


def make_env(params: CellParameters, config: EnvConfig, scenario: AgingScenario = None,
             disc: Discretization = None):
    """Factory returning a zero-argument constructor, for training loops that need fresh
    environments."""
    def factory():
        return ChargingEnv(params, config, scenario, disc)
    return factory
