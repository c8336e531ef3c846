"""Independent numerical checks for the simulator and the networks."""
import logging

import numpy as np
import pandas as pd

from src.errors import ParameterError, SimulationError
from src.spmet.grid import SimulatorContext, build_grid
from src.spmet.parameters import CellParameters, Discretization
from src.spmet.simulator import bulk_soc, equilibrium_state, step, terminal_voltage
from src.spmet.trajectory import TrajectoryRecorder
from src.tiny_nn.mlp import Mlp, backward, flatten, forward, forward_with_cache, unflatten

logger = logging.getLogger(__name__)

MAX_REFINED_STATES = 10_000
MAX_REFINED_STEPS = 5_000_000
ZERO_SCALE = 1e-10
GRADIENT_FLOOR = 1e-4
GRADIENT_PARTS = ("all", "params", "inputs", "action")


def coulomb_counting_oracle(currents, dt: float, Q_nominal: float, soc_init: float) -> np.ndarray:
    """SOC after each interval of a piecewise-constant current profile by coulomb counting.

    Currents use the simulator sign, so a charging profile (negative currents) raises the
    SOC by |I| dt / (3600 Q_nominal) per interval.

    Parameters:
        - currents - current per interval [A]
        - dt - interval length [s]
        - Q_nominal - capacity [A h]
        - soc_init - SOC at t = 0

    Returns:
        array of len(currents) + 1 SOC values starting with soc_init
    """
    currents = np.asarray(currents, dtype=float)
    charge = np.concatenate(([0.0], np.cumsum(-currents * dt)))
    return soc_init + charge / (3600.0 * Q_nominal)


def simulate_profile(ctx: SimulatorContext, currents, dt: float, soc_init: float, T_init: float) -> pd.DataFrame:
    """Open-loop run from the equilibrium state at soc_init, one row per interval end.

    The run stops early, with a warning, when the cell saturates.

    Parameters:
        - ctx - simulator context
        - currents - current per interval [A], negative while charging
        - dt - interval length [s]
        - soc_init - initial bulk anode SOC
        - T_init - initial temperature [K]

    Returns:
        trajectory frame (time_s, current_A, v_terminal_V, t_cell_K, soc_anode, voltage terms)
    """
    currents = np.asarray(currents, dtype=float)
    if not np.all(np.isfinite(currents)):
        raise ValueError("current profile must be finite")
    state = equilibrium_state(ctx, soc_init, T_init)
    recorder = TrajectoryRecorder()
    recorder.record(0.0, 0.0, terminal_voltage(ctx, state, 0.0), state.T_cell, bulk_soc(ctx, state))
    for k, current in enumerate(currents):
        state = step(ctx, state, current, dt)
        if state.saturated:
            logger.warning("cell saturated during interval %d (t = %g s); profile truncated", k, k * dt)
            break
        try:
            voltage = terminal_voltage(ctx, state, current)
        except SimulationError as err:
            logger.warning("voltage undefined after interval %d: %s; profile truncated", k, err)
            break
        recorder.record((k + 1) * dt, current, voltage, state.T_cell, bulk_soc(ctx, state))
    return recorder.to_frame()


def fine_grid_reference(params: CellParameters, currents, dt: float, factor: int, soc_init: float, T_init: float,
                        disc: Discretization = None, refine_grid=True, refine_time=True) -> pd.DataFrame:
    """Re-runs a profile with the grid counts multiplied and/or dt_sim divided by factor.

    Parameters:
        - params - cell parameters
        - currents, dt, soc_init, T_init - as for simulate_profile
        - factor - refinement factor, at least 2
        - disc - base discretization (defaults to Discretization())
        - refine_grid, refine_time - which refinements to apply

    Returns:
        trajectory frame of the refined run
    """
    disc = disc or Discretization()
    if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 2:
        raise ParameterError("factor", f"must be an integer >= 2, got {factor!r}")
    refined = disc.refined(int(factor), grid=refine_grid, time=refine_time)
    inner_steps = len(currents) * dt / refined.dt_sim
    if refined.state_count > MAX_REFINED_STATES or inner_steps > MAX_REFINED_STEPS:
        raise ParameterError("factor", f"refinement by {factor} needs {refined.state_count} states and "
                                       f"{inner_steps:.0f} inner steps, over the limit")
    logger.debug("fine-grid reference with %d states, dt_sim = %g s", refined.state_count, refined.dt_sim)
    return simulate_profile(build_grid(params, refined), currents, dt, soc_init, T_init)


def convergence_ratio(coarse: pd.DataFrame, mid: pd.DataFrame, fine: pd.DataFrame, column: str = "t_cell_K") -> float:
    """Ratio of successive sup-norm differences for runs refined by a constant factor; close
    to the factor raised to the order of the scheme.

    Returns:
        max|coarse - mid| / max|mid - fine|
    """
    n = min(len(coarse), len(mid), len(fine))
    if n == 0:
        raise ValueError("convergence ratio needs non-empty trajectories")
    a, b, c = (frame[column].to_numpy()[:n] for frame in (coarse, mid, fine))
    upper = np.max(np.abs(a - b))
    lower = np.max(np.abs(b - c))
    if lower == 0.0:
        return float("inf") if upper > 0.0 else float("nan")
    return float(upper / lower)


def _relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> float:
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, floor); pairs both below 1e-10 count as 0."""
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    if analytic.size == 0:
        return 0.0
    diff = np.abs(analytic - numeric)
    both_zero = np.maximum(np.abs(analytic), np.abs(numeric)) < ZERO_SCALE
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.where(both_zero, 0.0, diff / scale)))


def _kink_free(mlp: Mlp, samples: np.ndarray, margin: float) -> np.ndarray:
    """Rows whose hidden pre-activations all stay at least margin away from the rectifier
    kink."""
    _, cache = forward_with_cache(mlp, samples)
    keep = np.ones(len(samples), dtype=bool)
    for _, z in cache[:-1]:
        keep &= np.min(np.abs(z), axis=1) >= margin
    return samples[keep]


def gradient_check(mlp: Mlp, samples, h: float = 1e-6, part: str = "all", seed: int = 0,
                   kink_margin: float = 1e-4, floor: float = GRADIENT_FLOOR) -> float:
    """Compares the reverse-mode gradients of L = sum(u * mlp(x)) with central differences.

    u is a fixed random upstream drawn from seed. The error is elementwise,
    |analytic - numeric| / max(|analytic|, |numeric|, floor). Entries below floor, where the
    difference quotient carries rounding noise of about eps |L| / h, are thereby compared in
    absolute terms; entries that are both below 1e-10 count as 0.
    Samples sitting within kink_margin of a rectifier kink are skipped.

    Parameters:
        - mlp - network
        - samples - (N, n_inputs) inputs
        - h - difference step
        - part - 'params', 'inputs', 'action' (last input only) or 'all'
        - seed - seed of the upstream vector
        - kink_margin - exclusion distance from the kink, 0 keeps every sample
        - floor - smallest denominator of the relative error

    Returns:
        worst elementwise error
    """
    if h <= 0 or floor <= 0:
        raise ValueError(f"h and floor must be positive, got {h} and {floor}")
    if part not in GRADIENT_PARTS:
        raise ValueError(f"part must be one of {GRADIENT_PARTS}, got {part!r}")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if kink_margin > 0:
        kept = _kink_free(mlp, samples, kink_margin)
        if len(kept) < len(samples):
            logger.debug("skipping %d samples near a kink", len(samples) - len(kept))
        samples = kept
    if len(samples) == 0:
        logger.warning("no samples left for the gradient check")
        return 0.0

    upstream = np.random.default_rng(seed).standard_normal((len(samples), mlp.n_outputs))
    grads, input_grad = backward(mlp, samples, upstream)

    def loss(net, x):
        return float(np.sum(upstream * forward(net, x)))

    def row_loss(x):
        return np.sum(upstream * forward(mlp, x), axis=1)

    errors = []
    if part in ("all", "params"):
        theta = flatten(mlp)
        numeric = np.empty_like(theta)
        for i in range(len(theta)):
            plus, minus = theta.copy(), theta.copy()
            plus[i] += h
            minus[i] -= h
            numeric[i] = (loss(unflatten(mlp, plus), samples) - loss(unflatten(mlp, minus), samples)) / (2.0 * h)
        errors.append(_relative_error(grads, numeric, floor))

    if part in ("all", "inputs", "action"):
        columns = [mlp.n_inputs - 1] if part == "action" else range(mlp.n_inputs)
        numeric = np.empty((len(samples), len(columns)))
        analytic = input_grad[:, list(columns)]
        for j, col in enumerate(columns):
            #rows are independent, so a whole column is perturbed at once
            plus, minus = samples.copy(), samples.copy()
            plus[:, col] += h
            minus[:, col] -= h
            numeric[:, j] = (row_loss(plus) - row_loss(minus)) / (2.0 * h)
        errors.append(_relative_error(analytic, numeric, floor))
    return max(errors)
