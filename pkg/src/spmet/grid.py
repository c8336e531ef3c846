import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor

from src.errors import ParameterError
from .parameters import CellParameters, Discretization

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ParticleGrid:
    """Equal-thickness shells of one spherical particle.

    Shell k spans [faces[k], faces[k+1]]; interface_areas[k] is the area of the face between
    shell k-1 and shell k (index 0 is the centre and has zero area).
    """

    radius: float
    diffusivity: float
    c_max: float
    faces: np.ndarray
    volumes: np.ndarray
    interface_areas: np.ndarray
    dr: float
    surface_area: float
    flux_per_amp: float  # outward molar flux [mol/(m^2 s)] per ampere of applied current
    operator: np.ndarray  # mol/s per unit concentration, column sums vanish
    factor: tuple  # LU factors of diag(volumes) - dt_sim * operator

    @property
    def n(self) -> int:
        return len(self.volumes)


@dataclass(frozen=True, eq=False)
class ElectrolyteGrid:
    """Finite volumes across anode, separator and cathode (anode collector at x = 0)."""

    widths: np.ndarray
    centers: np.ndarray
    faces: np.ndarray
    porosity: np.ndarray
    diffusivity: np.ndarray
    mass: np.ndarray  # porosity * width * plate area [m^3]
    current_profile: np.ndarray  # i_e / I at each face [1/m^2]
    source_per_amp: np.ndarray  # mol/s per node per ampere
    operator: np.ndarray
    factor: tuple
    region_slices: dict

    @property
    def n(self) -> int:
        return len(self.widths)


@dataclass(frozen=True, eq=False)
class SimulatorContext:
    """Everything precomputed for one (parameters, discretization) pair. Immutable and safe
    to share between threads."""

    params: CellParameters
    disc: Discretization
    anode: ParticleGrid
    cathode: ParticleGrid
    electrolyte: ElectrolyteGrid
    heat_multiplier: float = 1.0

    @property
    def state_count(self) -> int:
        return self.anode.n + self.cathode.n + self.electrolyte.n + 1

    @property
    def thermal_time_constant(self) -> float:
        p = self.params
        return p.m_cell * p.c_p_th * p.R_th

    @property
    def one_c_current(self) -> float:
        return self.params.Q_nominal

    def particle(self, electrode: str) -> ParticleGrid:
        match electrode:
            case "anode":
                return self.anode
            case "cathode":
                return self.cathode
            case _:
                raise ValueError("electrode must be 'anode' or 'cathode', got " + repr(electrode))


def _build_particle(radius, diffusivity, c_max, n, dt, flux_per_amp) -> ParticleGrid:
    faces = np.linspace(0.0, radius, n + 1)
    volumes = 4.0 / 3.0 * math.pi * (faces[1:] ** 3 - faces[:-1] ** 3)
    interface_areas = 4.0 * math.pi * faces[:-1] ** 2
    dr = radius / n

    operator = np.zeros((n, n))
    for k in range(1, n):
        g = diffusivity * interface_areas[k] / dr
        operator[k, k] -= g
        operator[k, k - 1] += g
        operator[k - 1, k - 1] -= g
        operator[k - 1, k] += g

    factor = lu_factor(np.diag(volumes) - dt * operator)
    return ParticleGrid(
        radius=radius,
        diffusivity=diffusivity,
        c_max=c_max,
        faces=faces,
        volumes=volumes,
        interface_areas=interface_areas,
        dr=dr,
        surface_area=4.0 * math.pi * radius ** 2,
        flux_per_amp=flux_per_amp,
        operator=operator,
        factor=factor)


def _build_electrolyte(params: CellParameters, disc: Discretization) -> ElectrolyteGrid:
    regions = (
        ("anode", disc.n_x_anode, params.L_anode, params.eps_e_anode),
        ("sep", disc.n_x_sep, params.L_sep, params.eps_e_sep),
        ("cathode", disc.n_x_cathode, params.L_cathode, params.eps_e_cathode),
    )
    widths, porosity, slices = [], [], {}
    start = 0
    for name, count, length, eps in regions:
        widths.extend([length / count] * count)
        porosity.extend([eps] * count)
        slices[name] = slice(start, start + count)
        start += count
    widths = np.array(widths)
    porosity = np.array(porosity)
    diffusivity = params.D_e_ref * porosity ** params.brug
    faces = np.concatenate(([0.0], np.cumsum(widths)))
    centers = 0.5 * (faces[:-1] + faces[1:])
    n = len(widths)

    #piecewise-linear electrolyte current per unit applied current, evaluated on faces
    x_sep = params.L_anode
    x_cat = params.L_anode + params.L_sep
    profile = np.empty(n + 1)
    for i, x in enumerate(faces):
        if i <= disc.n_x_anode:
            profile[i] = x / params.L_anode
        elif i <= disc.n_x_anode + disc.n_x_sep:
            profile[i] = 1.0
        else:
            profile[i] = 1.0 - (x - x_cat) / params.L_cathode
    profile[0] = 0.0
    profile[disc.n_x_anode] = 1.0
    profile[-1] = 0.0
    profile /= params.A
    logger.debug("electrolyte regions end at x = %.3g m and %.3g m", x_sep, x_cat)

    operator = np.zeros((n, n))
    for i in range(n - 1):
        g = params.A / (widths[i] / (2.0 * diffusivity[i]) + widths[i + 1] / (2.0 * diffusivity[i + 1]))
        operator[i, i] -= g
        operator[i, i + 1] += g
        operator[i + 1, i + 1] -= g
        operator[i + 1, i] += g

    mass = porosity * widths * params.A
    source_per_amp = (1.0 - params.t_plus) / params.F * params.A * np.diff(profile)
    factor = lu_factor(np.diag(mass) - disc.dt_sim * operator)
    return ElectrolyteGrid(
        widths=widths,
        centers=centers,
        faces=faces,
        porosity=porosity,
        diffusivity=diffusivity,
        mass=mass,
        current_profile=profile,
        source_per_amp=source_per_amp,
        operator=operator,
        factor=factor,
        region_slices=slices)


def build_grid(params: CellParameters, disc: Discretization, heat_multiplier: float = 1.0) -> SimulatorContext:
    """Precomputes shell volumes, interface areas, node spacings, the electrolyte current
    profile and the factored implicit diffusion matrices.

    Parameters:
        - params - cell parameters (validated again here)
        - disc - grid sizes and inner step
        - heat_multiplier - scale applied to the heat generation rate (aging)

    Returns:
        SimulatorContext
    """
    if not isinstance(params, CellParameters):
        raise TypeError("params must be CellParameters, got " + type(params).__name__)
    params.validate()
    if not (math.isfinite(heat_multiplier) and heat_multiplier > 0):
        raise ParameterError("heat_multiplier", f"must be finite and positive, got {heat_multiplier}")

    p = params
    anode = _build_particle(
        p.R_s_anode, p.D_s_anode, p.c_s_max_anode, disc.n_r_anode, disc.dt_sim,
        flux_per_amp=1.0 / (p.a_anode * p.F * p.A * p.L_anode))
    cathode = _build_particle(
        p.R_s_cathode, p.D_s_cathode, p.c_s_max_cathode, disc.n_r_cathode, disc.dt_sim,
        flux_per_amp=-1.0 / (p.a_cathode * p.F * p.A * p.L_cathode))
    electrolyte = _build_electrolyte(p, disc)

    ctx = SimulatorContext(params, disc, anode, cathode, electrolyte, heat_multiplier)
    logger.debug("built grid with %d states", ctx.state_count)
    return ctx
