import dataclasses
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from src.errors import ParameterError

logger = logging.getLogger(__name__)

FARADAY = 96485.33212  # [C/mol]
R_GAS = 8.314462618  # [J/(mol K)]

PARAMS_ENV_VAR = "CHARGELAB_PARAMS"
DEFAULT_PARAMS_FILE = "graphite_nmc.yaml"
DEFAULT_PARAMS_DIR = Path(__file__).resolve().parents[2] / "params"


@dataclass(frozen=True, eq=False)
class OcpTable:
    """Open-circuit potential of one electrode as a function of stoichiometry.

    Evaluated by piecewise-linear interpolation; queries outside the table clamp
    to the end points.
    """

    stoichiometry: np.ndarray
    potential: np.ndarray
    source: str = ""

    def __post_init__(self):
        sto = np.asarray(self.stoichiometry, dtype=float)
        pot = np.asarray(self.potential, dtype=float)
        name = self.source or "ocp"
        if sto.ndim != 1 or pot.shape != sto.shape:
            raise ParameterError(name, "stoichiometry and potential must be vectors of equal length")
        if len(sto) < 4:
            raise ParameterError(name, f"needs at least 4 points, got {len(sto)}")
        if not (np.all(np.isfinite(sto)) and np.all(np.isfinite(pot))):
            raise ParameterError(name, "table contains non-finite values")
        if np.any(sto < 0.0) or np.any(sto > 1.0):
            raise ParameterError(name, "stoichiometry must lie in [0, 1]")
        if np.any(np.diff(sto) <= 0.0):
            raise ParameterError(name, "stoichiometry must be strictly increasing")
        object.__setattr__(self, "stoichiometry", sto)
        object.__setattr__(self, "potential", pot)

    def __call__(self, theta):
        return np.interp(theta, self.stoichiometry, self.potential)

    def from_csv(path: str | Path) -> "OcpTable":
        """Reads a two-column (stoichiometry, volts) text table. Lines starting with '#' and
        a non-numeric header line are skipped.

        Parameters:
            - path - path to the table

        Returns:
            OcpTable
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError("OCP table does not exist: " + str(path))
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=_header_rows(path), ndmin=2)
        if data.shape[1] != 2:
            raise ParameterError(path.name, f"expected 2 columns, got {data.shape[1]}")
        return OcpTable(data[:, 0], data[:, 1], source=path.name)


def _header_rows(path: Path) -> int:
    #loadtxt counts comment lines in skiprows too
    with open(path) as file:
        for index, line in enumerate(file):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                [float(v) for v in stripped.split(",")]
                return index
            except ValueError:
                return index + 1
    return 0


@dataclass(frozen=True)
class CellParameters:
    """Constants of a graphite/NMC cell for the reduced electrochemical-thermal model.

    Units are SI unless stated (Q_nominal in A h). The anode is the capacity-defining
    electrode: when a_anode is not given it is derived from Q_nominal so that 1C moves the
    anode bulk stoichiometry by exactly one unit per hour.
    """

    # solid phase
    D_s_anode: float
    D_s_cathode: float
    R_s_anode: float
    R_s_cathode: float
    c_s_max_anode: float
    c_s_max_cathode: float
    # electrolyte
    eps_e_anode: float
    eps_e_sep: float
    eps_e_cathode: float
    D_e_ref: float
    t_plus: float
    c_e0: float
    # geometry
    L_anode: float
    L_sep: float
    L_cathode: float
    A: float
    a_cathode: float
    # kinetics and resistances
    R_f_anode: float
    R_f_cathode: float
    kappa_eff: float
    alpha: float
    k_anode: float
    k_cathode: float
    # thermal
    m_cell: float
    c_p_th: float
    R_th: float
    T_amb: float
    # capacity and balancing
    Q_nominal: float
    cathode_stoich_at_zero: float
    ocp_anode: OcpTable
    ocp_cathode: OcpTable
    a_anode: float | None = None
    brug: float = 1.5
    gamma_act: float = 1.0
    F: float = FARADAY
    R_gas: float = R_GAS

    def __post_init__(self):
        self.validate()
        derived = 3.0 * 3600.0 * self.Q_nominal / (
            self.F * self.c_s_max_anode * self.A * self.L_anode * self.R_s_anode)
        if self.a_anode is None:
            object.__setattr__(self, "a_anode", derived)
        elif abs(self.a_anode - derived) > 1e-9 * derived:
            raise ParameterError("a_anode", f"inconsistent with Q_nominal (expected {derived:.10g}, got {self.a_anode:.10g})")

    def validate(self):
        """Checks every numeric field: finite, strictly positive, and the open-interval
        constraints on t_plus, alpha and the electrolyte volume fractions."""
        for fld in dataclasses.fields(self):
            value = getattr(self, fld.name)
            if isinstance(value, OcpTable) or (fld.name == "a_anode" and value is None):
                continue
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ParameterError(fld.name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(fld.name, "must be finite")
            if value <= 0.0:
                raise ParameterError(fld.name, f"must be strictly positive, got {value}")
        for name in ("t_plus", "alpha", "eps_e_anode", "eps_e_sep", "eps_e_cathode", "cathode_stoich_at_zero"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(name, f"must lie in (0, 1), got {value}")

    @property
    def eps_s_anode(self) -> float:
        return self.a_anode * self.R_s_anode / 3.0

    @property
    def eps_s_cathode(self) -> float:
        return self.a_cathode * self.R_s_cathode / 3.0

    @property
    def capacity_anode_Ah(self) -> float:
        return self.F * self.c_s_max_anode * self.eps_s_anode * self.A * self.L_anode / 3600.0

    @property
    def capacity_cathode_Ah(self) -> float:
        return self.F * self.c_s_max_cathode * self.eps_s_cathode * self.A * self.L_cathode / 3600.0

    def cathode_stoichiometry(self, anode_stoichiometry: float) -> float:
        """Equilibrium cathode stoichiometry paired with the given anode stoichiometry."""
        return self.cathode_stoich_at_zero - anode_stoichiometry * self.capacity_anode_Ah / self.capacity_cathode_Ah

    def aged(self, film_resistance_multiplier: float) -> "CellParameters":
        """Copy with both film resistances scaled."""
        return dataclasses.replace(
            self,
            R_f_anode=self.R_f_anode * film_resistance_multiplier,
            R_f_cathode=self.R_f_cathode * film_resistance_multiplier)

    def to_dict(self) -> dict:
        ret = {}
        for fld in dataclasses.fields(self):
            value = getattr(self, fld.name)
            ret[fld.name] = value.source if isinstance(value, OcpTable) else value
        return ret


@dataclass(frozen=True)
class Discretization:
    """Grid sizes and the inner integration step. The default split gives 61 states."""

    n_r_anode: int = 10
    n_r_cathode: int = 10
    n_x_anode: int = 15
    n_x_sep: int = 10
    n_x_cathode: int = 15
    dt_sim: float = 1.0

    def __post_init__(self):
        for name in ("n_r_anode", "n_r_cathode", "n_x_anode", "n_x_sep", "n_x_cathode"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ParameterError(name, f"must be an integer, got {value!r}")
            if value < 2:
                raise ParameterError(name, f"must be at least 2, got {value}")
        if not (isinstance(self.dt_sim, (int, float)) and math.isfinite(self.dt_sim) and self.dt_sim > 0):
            raise ParameterError("dt_sim", f"must be finite and positive, got {self.dt_sim!r}")

    @property
    def n_x(self) -> int:
        return self.n_x_anode + self.n_x_sep + self.n_x_cathode

    @property
    def state_count(self) -> int:
        return self.n_r_anode + self.n_r_cathode + self.n_x + 1

    def refined(self, factor: int, grid: bool = True, time: bool = True) -> "Discretization":
        """Copy with the grid counts multiplied and/or dt_sim divided by factor."""
        counts = {}
        if grid:
            counts = {name: getattr(self, name) * factor for name in
                      ("n_r_anode", "n_r_cathode", "n_x_anode", "n_x_sep", "n_x_cathode")}
        dt_sim = self.dt_sim / factor if time else self.dt_sim
        return dataclasses.replace(self, dt_sim=dt_sim, **counts)


def find_parameter_file(path: str | Path | None = None, verbose=False) -> Path:
    """Locates the cell parameter file.

    First the explicit path, then the directory (or file) named by the CHARGELAB_PARAMS
    environment variable, then the repository's params/ directory.

    Parameters:
        - path - explicit file path, or None

    Returns:
        Path to an existing parameter file.
    """
    candidates = []
    if path is not None:
        candidates.append(Path(path))
    elif os.environ.get(PARAMS_ENV_VAR):
        env_path = Path(os.environ[PARAMS_ENV_VAR])
        candidates.append(env_path / DEFAULT_PARAMS_FILE if env_path.is_dir() else env_path)
    candidates.append(DEFAULT_PARAMS_DIR / DEFAULT_PARAMS_FILE)

    for candidate in candidates:
        if verbose:
            logger.debug("looking for parameter file at %s", candidate)
        if candidate.is_file():
            return candidate.resolve()
        if path is not None:
            #explicit path given, don't fall back silently
            break
    raise FileNotFoundError("Parameter file not found: " + str(candidates[0]))


def load_parameters(path: str | Path | None = None) -> CellParameters:
    """Parses a YAML parameter file into CellParameters. OCP tables are referenced by path,
    relative to the parameter file.

    Parameters:
        - path - path to the parameter file; None searches the default locations

    Returns:
        CellParameters
    """
    path = find_parameter_file(path)
    with open(path) as file:
        raw = yaml.safe_load(file) or {}
    if not isinstance(raw, dict):
        raise ParameterError(path.name, "parameter file must be a mapping")

    known = {fld.name for fld in dataclasses.fields(CellParameters)}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(sorted(unknown)[0], "unknown parameter")

    values = {}
    for key, value in raw.items():
        if key in ("ocp_anode", "ocp_cathode"):
            values[key] = OcpTable.from_csv(path.parent / str(value))
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            values[key] = float(value)
        else:
            raise ParameterError(key, f"expected a number, got {value!r}")

    missing = [fld.name for fld in dataclasses.fields(CellParameters)
               if fld.name not in values and fld.default is dataclasses.MISSING]
    if missing:
        raise ParameterError(missing[0], "missing from parameter file " + str(path))
    logger.debug("loaded cell parameters from %s", path)
    return CellParameters(**values)
