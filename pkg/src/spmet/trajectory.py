import logging
from pathlib import Path

import pandas as pd

from .simulator import VoltageBreakdown

logger = logging.getLogger(__name__)

BASE_COLUMNS = ["time_s", "current_A", "v_terminal_V", "t_cell_K", "soc_anode"]
BREAKDOWN_COLUMNS = ["eta_anode", "eta_cathode", "ocp_diff", "film_drop", "electrolyte_ohmic",
                     "concentration_polarization"]
ENV_COLUMNS = ["action", "reward", "done"]


class TrajectoryRecorder():
    """Collects one row per control instant and writes them as CSV.

    with_env adds the action, reward and done columns written by environment rollouts.
    Current is recorded with the simulator sign (negative while charging).
    """

    def __init__(self, with_env: bool = False) -> None:
        self.with_env = with_env
        self.rows = []

    def record(self, time_s: float, current: float, voltage: VoltageBreakdown, T_cell: float, soc_anode: float,
               action: float = float("nan"), reward: float = float("nan"), done: bool = False):
        row = {
            "time_s": float(time_s),
            "current_A": float(current),
            "v_terminal_V": float(voltage.v_terminal),
            "t_cell_K": float(T_cell),
            "soc_anode": float(soc_anode),
        }
        for name in BREAKDOWN_COLUMNS:
            row[name] = float(getattr(voltage, name))
        if self.with_env:
            row["action"] = float(action)
            row["reward"] = float(reward)
            row["done"] = bool(done)
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def columns(self) -> list:
        return BASE_COLUMNS + BREAKDOWN_COLUMNS + (ENV_COLUMNS if self.with_env else [])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns)

    def write_csv(self, path: str | Path) -> Path:
        """Writes the recorded rows; parent directories are created.

        Parameters:
            - path - destination file

        Returns:
            the path written to
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
        logger.debug("wrote %d trajectory rows to %s", len(self.rows), path)
        return path
