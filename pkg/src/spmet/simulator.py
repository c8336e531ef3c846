"""Time integration and output equations of the single particle model with electrolyte and
thermal dynamics.

Sign convention: negative current charges the cell.
"""
import logging
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.linalg import lu_solve

from src.errors import ParameterError, SimulationError
from .grid import SimulatorContext

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CellState:
    """Full simulator state. saturated is set when a shell concentration had to be clipped
    into [0, c_s_max] (or the electrolyte was depleted); it is fatal for an episode."""

    c_s_anode: np.ndarray
    c_s_cathode: np.ndarray
    c_e: np.ndarray
    T_cell: float
    saturated: bool = False

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.c_s_anode, self.c_s_cathode, self.c_e, [self.T_cell]))

    def __len__(self):
        return len(self.c_s_anode) + len(self.c_s_cathode) + len(self.c_e) + 1


@dataclass(frozen=True)
class VoltageBreakdown:
    """Terminal voltage and its signed contributions; v_terminal is their sum."""

    v_terminal: float
    eta_anode: float
    eta_cathode: float
    ocp_diff: float
    film_drop: float
    electrolyte_ohmic: float
    concentration_polarization: float

    def contributions(self) -> tuple:
        return (self.eta_cathode, self.eta_anode, self.ocp_diff, self.film_drop,
                self.electrolyte_ohmic, self.concentration_polarization)

    def as_dict(self) -> dict:
        return {fld.name: getattr(self, fld.name) for fld in fields(self)}


def equilibrium_state(ctx: SimulatorContext, soc_anode: float, T_cell: float) -> CellState:
    """Spatially uniform state at rest: both particles at the balanced stoichiometries for the
    given anode SOC and the electrolyte at its initial concentration.

    Parameters:
        - ctx - simulator context
        - soc_anode - anode bulk stoichiometry in [0, 1]
        - T_cell - cell temperature [K]

    Returns:
        CellState
    """
    p = ctx.params
    theta_c = p.cathode_stoichiometry(soc_anode)
    for name, theta, table in (("soc_anode", soc_anode, p.ocp_anode), ("cathode stoichiometry", theta_c, p.ocp_cathode)):
        low, high = table.stoichiometry[0], table.stoichiometry[-1]
        if not (0.0 < theta < 1.0 and low <= theta <= high):
            raise ParameterError(name, f"{theta:.4f} cannot be realized inside the OCP table range [{low}, {high}]")
    if not (math.isfinite(T_cell) and T_cell > 0):
        raise ParameterError("T_cell", f"must be positive, got {T_cell}")
    return CellState(
        c_s_anode=np.full(ctx.anode.n, soc_anode * p.c_s_max_anode),
        c_s_cathode=np.full(ctx.cathode.n, theta_c * p.c_s_max_cathode),
        c_e=np.full(ctx.electrolyte.n, p.c_e0),
        T_cell=float(T_cell))


def bulk_soc(ctx: SimulatorContext, state: CellState, electrode="anode") -> float:
    """Volume-weighted mean shell concentration over c_s_max, the discrete form of
    3/(c_max R^3) * integral of r^2 c dr."""
    grid = ctx.particle(electrode)
    conc = state.c_s_anode if electrode == "anode" else state.c_s_cathode
    return float(np.dot(grid.volumes, conc) / (grid.volumes.sum() * grid.c_max))


def solid_lithium(ctx: SimulatorContext, state: CellState, electrode="anode") -> float:
    """Moles of lithium in one particle of the given electrode."""
    grid = ctx.particle(electrode)
    conc = state.c_s_anode if electrode == "anode" else state.c_s_cathode
    return float(np.dot(grid.volumes, conc))


def electrolyte_lithium(ctx: SimulatorContext, state: CellState) -> float:
    """Moles of lithium in the electrolyte (porosity and volume weighted)."""
    return float(np.dot(ctx.electrolyte.mass, state.c_e))


def surface_concentration(ctx: SimulatorContext, state: CellState, electrode: str, current: float) -> float:
    """Extrapolates the outer shell to the particle surface using the boundary flux."""
    grid = ctx.particle(electrode)
    conc = state.c_s_anode if electrode == "anode" else state.c_s_cathode
    flux = grid.flux_per_amp * current
    return float(conc[-1] - 0.5 * grid.dr * flux / grid.diffusivity)


def kinetic_overpotential(current: float, active_area: float, i0: float, T: float, alpha: float,
                          F: float, R_gas: float) -> float:
    """(R T / (alpha F)) * asinh(current / (2 * active_area * i0)); active_area is a * A * L."""
    return R_gas * T / (alpha * F) * math.asinh(current / (2.0 * active_area * i0))


def exchange_current_density(k: float, c_e: float, c_ss: float, c_max: float, alpha: float) -> float:
    return k * (c_e ** alpha) * (c_ss ** alpha) * ((c_max - c_ss) ** alpha)


def terminal_voltage(ctx: SimulatorContext, state: CellState, I: float) -> VoltageBreakdown:
    """Evaluates the output equation term by term.

    Parameters:
        - ctx - simulator context
        - state - current cell state
        - I - applied current [A], negative when charging

    Returns:
        VoltageBreakdown whose v_terminal is the sum of its contributions
    """
    p = ctx.params
    css_a = surface_concentration(ctx, state, "anode", I)
    css_c = surface_concentration(ctx, state, "cathode", I)
    if not 0.0 < css_a < p.c_s_max_anode:
        raise SimulationError(f"anode surface concentration {css_a:.6g} outside (0, {p.c_s_max_anode})")
    if not 0.0 < css_c < p.c_s_max_cathode:
        raise SimulationError(f"cathode surface concentration {css_c:.6g} outside (0, {p.c_s_max_cathode})")
    c_e_anode_end = state.c_e[0]
    c_e_cathode_end = state.c_e[-1]
    if c_e_anode_end <= 0.0 or c_e_cathode_end <= 0.0:
        raise SimulationError("electrolyte boundary concentration must be positive")

    slices = ctx.electrolyte.region_slices
    c_e_avg_a = float(np.mean(state.c_e[slices["anode"]]))
    c_e_avg_c = float(np.mean(state.c_e[slices["cathode"]]))
    i0_a = exchange_current_density(p.k_anode, c_e_avg_a, css_a, p.c_s_max_anode, p.alpha)
    i0_c = exchange_current_density(p.k_cathode, c_e_avg_c, css_c, p.c_s_max_cathode, p.alpha)

    T = state.T_cell
    area_a = p.a_anode * p.A * p.L_anode
    area_c = p.a_cathode * p.A * p.L_cathode
    eta_cathode = kinetic_overpotential(-I, area_c, i0_c, T, p.alpha, p.F, p.R_gas)
    eta_anode = -kinetic_overpotential(I, area_a, i0_a, T, p.alpha, p.F, p.R_gas)
    ocp_diff = float(p.ocp_cathode(css_c / p.c_s_max_cathode) - p.ocp_anode(css_a / p.c_s_max_anode))
    film_drop = -(p.R_f_cathode / area_c + p.R_f_anode / area_a) * I
    electrolyte_ohmic = -((p.L_cathode + 2.0 * p.L_sep + p.L_anode) / (2.0 * p.A * p.kappa_eff)) * I
    k_conc = 2.0 * p.R_gas * T / p.F * (1.0 - p.t_plus) * p.gamma_act
    concentration = k_conc * (math.log(c_e_cathode_end) - math.log(c_e_anode_end))

    v_terminal = eta_cathode + eta_anode + ocp_diff + film_drop + electrolyte_ohmic + concentration
    return VoltageBreakdown(
        v_terminal=v_terminal,
        eta_anode=eta_anode,
        eta_cathode=eta_cathode,
        ocp_diff=ocp_diff,
        film_drop=film_drop,
        electrolyte_ohmic=electrolyte_ohmic,
        concentration_polarization=concentration)


def open_circuit_voltage(ctx: SimulatorContext, state: CellState) -> float:
    """U+(SOC_p) - U-(SOC_n) evaluated at the bulk stoichiometries."""
    p = ctx.params
    return float(p.ocp_cathode(bulk_soc(ctx, state, "cathode")) - p.ocp_anode(bulk_soc(ctx, state, "anode")))


def joule_heat(I: float, ocv: float, v_terminal: float) -> float:
    return I * (ocv - v_terminal)


def heat_rate(ctx: SimulatorContext, state: CellState, I: float, v: VoltageBreakdown) -> float:
    """Heat generated by the applied current [W]: I * (OCV(bulk SOC) - V_T).

    Positive whenever charging (I < 0) with V_T above the open-circuit voltage.
    """
    if I == 0.0:
        return 0.0
    return joule_heat(I, open_circuit_voltage(ctx, state), v.v_terminal)


def inner_step_count(ctx: SimulatorContext, dt_ctrl: float) -> int:
    dt_sim = ctx.disc.dt_sim
    n = int(round(dt_ctrl / dt_sim))
    if dt_ctrl <= 0 or n < 1 or abs(n * dt_sim - dt_ctrl) > 1e-9 * dt_ctrl:
        raise SimulationError(f"dt_ctrl = {dt_ctrl} s is not a positive integer multiple of dt_sim = {dt_sim} s")
    return n


def step(ctx: SimulatorContext, state: CellState, I: float, dt_ctrl: float) -> CellState:
    """Advances the cell by dt_ctrl seconds at constant current I using inner steps of dt_sim.

    Diffusion is advanced with backward Euler on the factored finite-volume matrices; the
    thermal state uses the exact exponential update with the heat rate held over the inner
    step. Shell concentrations leaving [0, c_s_max] are clipped and the returned state is
    flagged saturated (integration stops there); the same happens when the surface
    concentration reaches a limit and the voltage can no longer be evaluated.

    Parameters:
        - ctx - simulator context
        - state - state at the start of the interval
        - I - applied current [A], negative when charging
        - dt_ctrl - interval length [s], a multiple of dt_sim

    Returns:
        CellState at the end of the interval
    """
    n_inner = inner_step_count(ctx, dt_ctrl)
    if state.saturated:
        return state

    p = ctx.params
    dt = ctx.disc.dt_sim
    decay = math.exp(-dt / ctx.thermal_time_constant)
    anode, cathode, elec = ctx.anode, ctx.cathode, ctx.electrolyte

    boundary_a = np.zeros(anode.n)
    boundary_a[-1] = -anode.flux_per_amp * I * anode.surface_area
    boundary_c = np.zeros(cathode.n)
    boundary_c[-1] = -cathode.flux_per_amp * I * cathode.surface_area
    source_e = elec.source_per_amp * I

    c_a, c_c, c_e, T = state.c_s_anode, state.c_s_cathode, state.c_e, state.T_cell
    saturated = False
    for _ in range(n_inner):
        q_dot = 0.0
        if I != 0.0:
            current = CellState(c_a, c_c, c_e, T)
            try:
                voltage = terminal_voltage(ctx, current, I)
            except SimulationError as err:
                #surface pinned at a concentration limit
                logger.info("stopping inner integration: %s", err)
                saturated = True
                break
            q_dot = heat_rate(ctx, current, I, voltage) * ctx.heat_multiplier

        c_a = lu_solve(anode.factor, anode.volumes * c_a + dt * boundary_a)
        c_c = lu_solve(cathode.factor, cathode.volumes * c_c + dt * boundary_c)
        c_e = lu_solve(elec.factor, elec.mass * c_e + dt * source_e)
        T = p.T_amb + (T - p.T_amb) * decay + q_dot * p.R_th * (1.0 - decay)

        if (np.any(c_a < 0.0) or np.any(c_a > p.c_s_max_anode)
                or np.any(c_c < 0.0) or np.any(c_c > p.c_s_max_cathode)
                or np.any(c_e <= 0.0)):
            logger.info("concentration left its admissible range at I = %.3f A; clipping", I)
            c_a = np.clip(c_a, 0.0, p.c_s_max_anode)
            c_c = np.clip(c_c, 0.0, p.c_s_max_cathode)
            c_e = np.maximum(c_e, 1e-6 * p.c_e0)
            saturated = True
            break

    return CellState(c_a, c_c, c_e, float(T), saturated)
