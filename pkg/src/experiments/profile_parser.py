import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from src.errors import ConfigError

logger = logging.getLogger(__name__)

TIME_COLUMN = "time_s"
CURRENT_COLUMN = "current_A"


@dataclass(frozen=True, eq=False)
class CurrentProfile:
    """Piecewise-constant current: currents[k] is applied on [k dt, (k + 1) dt).
    Negative current charges the cell."""

    currents: np.ndarray
    dt: float

    @property
    def duration_s(self) -> float:
        return len(self.currents) * self.dt


def read_profile(path: str | Path) -> CurrentProfile:
    """Reads a time/current CSV file.

    The file needs the columns time_s and current_A (lines starting with '#' are ignored).
    Times are the start of each interval, begin at 0 and are evenly spaced; the spacing
    is the interval length.

    Parameters:
        - path - profile file

    Returns:
        CurrentProfile
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError("Profile does not exist: " + str(path))
    try:
        frame = pd.read_csv(path, comment="#", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise ConfigError(f"{path}: cannot parse profile ({err})") from err

    missing = [name for name in (TIME_COLUMN, CURRENT_COLUMN) if name not in frame.columns]
    if missing:
        raise ConfigError(f"{path}: missing column '{missing[0]}'")
    try:
        times = frame[TIME_COLUMN].to_numpy(dtype=float)
        currents = frame[CURRENT_COLUMN].to_numpy(dtype=float)
    except ValueError as err:
        raise ConfigError(f"{path}: non-numeric entry ({err})") from err

    if len(times) < 2:
        raise ConfigError(f"{path}: need at least two rows to infer the interval length")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(currents))):
        raise ConfigError(f"{path}: profile contains missing or non-finite values")
    if times[0] != 0.0:
        raise ConfigError(f"{path}: profile must start at time 0, starts at {times[0]}")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ConfigError(f"{path}: times must be evenly spaced and increasing")
    logger.debug("read %d intervals of %g s from %s", len(currents), dt, path)
    return CurrentProfile(currents, dt)
