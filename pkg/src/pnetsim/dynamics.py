"""Single-step dynamics of the production network model.

One time step executes, in order: shock retrieval, demand formation
(household, exogenous, and business-to-business), productive capacities
under labor and input constraints, realized output with strict proportional
rationing, inventory update, and labor-force adjustment.

Rate-based updates (inventory-gap closing, hiring and firing, the aggregate
consumption recursion) scale consistently with the step size ``dt`` so that
fixed points are independent of ``dt``; at ``dt = 1`` day the update is
exactly the daily recursion. Quantities defined instantaneously each step
(output, demand, realized allocations) are recomputed from scratch, so the
allocation identity c + f + sum(O) = x holds at every stored state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .economy import (
    CriticalitySets,
    Economy,
    derive_criticality_sets,
    initial_inventories,
)
from .errors import ModelStateError
from .shocks import Scenario, ShockSchedule

PRODUCTION_FUNCTIONS = (
    "leontief",
    "strongly_critical",
    "half_critical",
    "weakly_critical",
    "linear",
)

#: Default consumption adjustment speed: 0.6 quarters expressed per day.
RHO_PER_DAY = 1.0 - (1.0 - 0.6) / 90.0

#: Sectors that do not fire workers during a pandemic (public
#: administration and education), by sector code.
DEFAULT_NO_FIRING = frozenset({"O84", "P85"})


@dataclass(frozen=True)
class BehavioralParams:
    """Behavioral and adjustment-speed parameters of the model."""

    rho: float = RHO_PER_DAY
    delta_s: float = 0.75
    m: float | None = None  # None: derived as sum(c0) / sum(l0)
    L_share: float = 1.0
    tau: float = 14.0
    gamma_F: float = 28.0
    gamma_H: float | None = None  # None: hiring takes twice as long as firing
    prod_fn: str = "half_critical"
    no_firing_sectors: frozenset[str] = DEFAULT_NO_FIRING

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho = {self.rho} outside (0, 1)")
        if not 0.0 < self.L_share <= 1.0:
            raise ValueError(f"L_share = {self.L_share} outside (0, 1]")
        if self.tau < 1.0 or self.gamma_F < 1.0:
            raise ValueError("tau and gamma_F must be at least one day")
        if self.gamma_H is not None and self.gamma_H < 1.0:
            raise ValueError("gamma_H must be at least one day")
        if self.prod_fn not in PRODUCTION_FUNCTIONS:
            raise ValueError(
                f"unknown production function {self.prod_fn!r}; "
                f"expected one of {PRODUCTION_FUNCTIONS}"
            )

    @property
    def hiring_speed(self) -> float:
        return self.gamma_H if self.gamma_H is not None else 2.0 * self.gamma_F

    def share_consumed(self, economy: Economy) -> float:
        if self.m is not None:
            return self.m
        return float(economy.c0.sum() / economy.l0.sum())


@dataclass
class SimState:
    """Full model state at time ``t`` (days since the simulation epoch)."""

    t: float
    x: np.ndarray  # gross output
    d: np.ndarray  # total demand
    l: np.ndarray  # labor compensation
    c: np.ndarray  # realized household consumption
    f: np.ndarray  # realized exogenous consumption
    O: np.ndarray  # realized B2B orders, supplier i -> buyer j
    S: np.ndarray  # stocks of input i held by buyer j
    c_agg_d: float  # aggregate desired household demand
    l_perm: float  # permanent-income expectation
    # Demand memory feeding the next step's order formation. Equal to ``d``
    # at whole-day steps; with sub-day steps it relaxes toward ``d`` on a
    # one-day timescale so that trajectories converge as dt shrinks.
    d_mem: np.ndarray | None = None

    @property
    def demand_memory(self) -> np.ndarray:
        return self.d if self.d_mem is None else self.d_mem

    def copy(self) -> "SimState":
        return SimState(
            self.t, self.x.copy(), self.d.copy(), self.l.copy(),
            self.c.copy(), self.f.copy(), self.O.copy(), self.S.copy(),
            self.c_agg_d, self.l_perm,
            None if self.d_mem is None else self.d_mem.copy(),
        )


def initial_state(economy: Economy) -> SimState:
    """Pre-shock equilibrium: supply equals demand, stocks at target."""
    return SimState(
        t=0.0,
        x=economy.x0.copy(),
        d=economy.x0.copy(),
        l=economy.l0.copy(),
        c=economy.c0.copy(),
        f=economy.f0.copy(),
        O=economy.Z.copy(),
        S=initial_inventories(economy),
        c_agg_d=float(economy.c0.sum()),
        l_perm=float(economy.l0.sum()),
        d_mem=economy.x0.copy(),
    )


# ---------------------------------------------------------------------------
# Demand side
# ---------------------------------------------------------------------------

def intermediate_demand(
    state: SimState, economy: Economy, params: BehavioralParams
) -> np.ndarray:
    """Desired B2B orders: replace yesterday's demand, close inventory gaps.

    ``O_d[i, j] = A[i, j] d_j(t-1) + (S_target[i, j] - S[i, j](t-1)) / tau``,
    clamped at zero.
    """
    target = initial_inventories(economy)
    raw = economy.A * state.d[np.newaxis, :] + (target - state.S) / params.tau
    return np.maximum(raw, 0.0)


def household_preferences(theta0: np.ndarray, eps_D: np.ndarray) -> np.ndarray:
    """Consumption shares re-normalized under the demand shock."""
    weighted = (1.0 - eps_D) * theta0
    total = weighted.sum()
    if total <= 0.0:
        warnings.warn(
            "all household demand fully shocked; preferences left at baseline",
            stacklevel=2,
        )
        return np.array(theta0, dtype=float, copy=True)
    return weighted / total


def aggregate_demand_reduction(
    theta0: np.ndarray, eps_D: np.ndarray, delta_s: float
) -> float:
    """Share of shocked consumption that households save rather than shift."""
    return float(delta_s * (1.0 - np.sum(theta0 * (1.0 - eps_D))))


def compensated_labor_income(l_now: float, l_baseline: float, b: float) -> float:
    """Labor income after the government reimburses fraction b of losses."""
    return l_now + b * max(l_baseline - l_now, 0.0)


def permanent_income(
    prev_zeta: float,
    rho: float,
    zeta_L: float,
    L_share: float,
    l_baseline: float,
    in_pandemic: bool,
) -> tuple[float, float]:
    """Household expectation of long-run labor income.

    ``zeta`` is the expected retained fraction of baseline income; before
    the pandemic it is 1 and the caller seeds it to ``zeta_L`` when the
    first lockdown starts. Afterwards it follows a first-order recursion
    whose fixed point is ``1 - (1 - zeta_L) / L_share``.
    """
    if L_share <= 0.0:
        raise ValueError("L_share must be positive")
    if not in_pandemic:
        return l_baseline, 1.0
    zeta = 1.0 - rho + rho * prev_zeta - (1.0 - rho) * (1.0 - zeta_L) / L_share
    return zeta * l_baseline, zeta


def lockdown_income_retention(scenario: Scenario, economy: Economy) -> float:
    """Retained fraction of aggregate labor income at the first lockdown."""
    order = scenario.index_for(economy.codes)
    eps = scenario.eps_S_L1[order]
    total = economy.l0.sum()
    if total <= 0:
        return 1.0
    return float(1.0 - np.sum(eps * economy.l0) / total)


def aggregate_consumption(
    state: SimState,
    economy: Economy,
    params: BehavioralParams,
    eps_tilde_D: float,
    l_comp: float,
    l_perm: float,
) -> float:
    """One step of the aggregate household demand recursion."""
    m = params.share_consumed(economy)
    return _consumption_update(
        state.c_agg_d, eps_tilde_D, params.rho, m, l_comp, l_perm
    )


def _consumption_update(
    c_prev: float, eps_tilde_D: float, rho: float, m: float,
    l_comp: float, l_perm: float,
) -> float:
    if c_prev <= 0.0 or m * l_comp <= 0.0 or m * l_perm <= 0.0:
        raise ModelStateError(
            "nonpositive argument in the consumption recursion "
            f"(c_prev={c_prev:g}, m*l={m * l_comp:g}, m*l_p={m * l_perm:g})"
        )
    log_c = (
        rho * math.log(c_prev)
        + 0.5 * (1.0 - rho) * math.log(m * l_comp)
        + 0.5 * (1.0 - rho) * math.log(m * l_perm)
    )
    return (1.0 - eps_tilde_D * (1.0 - rho)) * math.exp(log_c)


# ---------------------------------------------------------------------------
# Supply side
# ---------------------------------------------------------------------------

def labor_capacity(
    state: SimState, economy: Economy, eps_S: np.ndarray
) -> np.ndarray:
    """Output producible with the available workforce.

    The workforce itself is capped at ``(1 - eps_S) l0``, so capacity never
    exceeds ``(1 - eps_S) x0``. Sectors with no baseline labor are inert.
    """
    l_max = (1.0 - eps_S) * economy.l0
    l_avail = np.minimum(state.l, l_max)
    safe_l0 = np.where(economy.l0 > 0, economy.l0, 1.0)
    return np.where(economy.l0 > 0, (l_avail / safe_l0) * economy.x0, 0.0)


def _input_capacity(
    S: np.ndarray,
    A: np.ndarray,
    sets: CriticalitySets,
    x0: np.ndarray,
    prod_fn: str,
) -> np.ndarray:
    recipe = A > 0.0
    safe_A = np.where(recipe, A, 1.0)
    ratio = np.where(recipe, S / safe_A, np.inf)

    def masked_min(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return np.min(np.where(mask, values, np.inf), axis=0)

    if prod_fn == "leontief":
        return masked_min(ratio, recipe)
    if prod_fn == "strongly_critical":
        mask = recipe & (sets.critical_mask | sets.important_mask)
        return masked_min(ratio, mask)
    if prod_fn == "weakly_critical":
        return masked_min(ratio, recipe & sets.critical_mask)
    if prod_fn == "half_critical":
        hard = masked_min(ratio, recipe & sets.critical_mask)
        softened = 0.5 * (ratio + x0[np.newaxis, :])
        soft = masked_min(softened, recipe & sets.important_mask)
        return np.minimum(hard, soft)
    if prod_fn == "linear":
        denom = A.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(denom > 0, S.sum(axis=0) / np.where(denom > 0, denom, 1.0),
                           np.inf)
        return out
    raise ValueError(f"unknown production function {prod_fn!r}")


def input_constrained_capacity(
    state: SimState,
    economy: Economy,
    sets: CriticalitySets,
    prod_fn: str,
) -> np.ndarray:
    """Output producible from current stocks under the chosen bottleneck rule.

    Inputs absent from the recipe (``A[i, j] = 0``) never bind; sectors
    whose considered input set is empty are unconstrained (+inf).
    """
    return _input_capacity(state.S, economy.A, sets, economy.x0, prod_fn)


def realized_output(
    x_cap: np.ndarray, x_inp: np.ndarray, d: np.ndarray
) -> np.ndarray:
    """Output is the least of labor capacity, input capacity, and demand."""
    return np.minimum(np.minimum(x_cap, x_inp), d)


def ration(
    x: np.ndarray,
    d: np.ndarray,
    c_d: np.ndarray,
    f_d: np.ndarray,
    O_d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Strict proportional rationing: every customer gets the fill ratio x/d."""
    for name, arr in (("x", x), ("d", d), ("c_d", c_d), ("f_d", f_d), ("O_d", O_d)):
        if np.any(arr < 0):
            raise ValueError(f"{name} contains negative entries")
    assert np.allclose(d, c_d + f_d + O_d.sum(axis=1), rtol=1e-9, atol=1e-9), \
        "total demand does not match its components"
    scale = np.where(d > 0, x / np.where(d > 0, d, 1.0), 0.0)
    return c_d * scale, f_d * scale, O_d * scale[:, np.newaxis]


def update_inventories(
    S_prev: np.ndarray, O: np.ndarray, A: np.ndarray, x: np.ndarray
) -> np.ndarray:
    """Stocks gain deliveries and lose inputs consumed; never negative."""
    return np.maximum(S_prev + O - A * x[np.newaxis, :], 0.0)


def adjust_labor(
    state: SimState,
    economy: Economy,
    params: BehavioralParams,
    x_cap: np.ndarray,
    x_inp: np.ndarray,
    d: np.ndarray,
    eps_S: np.ndarray,
) -> np.ndarray:
    """Hire toward binding demand/input limits, fire when capacity idles."""
    return _labor_update(
        state.l, economy, params, x_cap, x_inp, d, eps_S, dt=1.0,
        no_fire=_no_fire_mask(economy, params),
    )


def _no_fire_mask(economy: Economy, params: BehavioralParams) -> np.ndarray:
    mask = np.zeros(economy.n_sectors, dtype=bool)
    for code in params.no_firing_sectors:
        if code in economy.sectors.positions:
            mask[economy.sectors.position(code)] = True
    return mask


def _labor_update(
    l_prev: np.ndarray,
    economy: Economy,
    params: BehavioralParams,
    x_cap: np.ndarray,
    x_inp: np.ndarray,
    d: np.ndarray,
    eps_S: np.ndarray,
    dt: float,
    no_fire: np.ndarray,
) -> np.ndarray:
    safe_x0 = np.where(economy.x0 > 0, economy.x0, 1.0)
    wage_share = np.where(economy.x0 > 0, economy.l0 / safe_x0, 0.0)
    delta = wage_share * (np.minimum(x_inp, d) - x_cap)
    speed = np.where(delta >= 0, params.hiring_speed, params.gamma_F)
    l_new = l_prev + dt * delta / speed
    l_new = np.where(no_fire & (delta < 0), l_prev, l_new)
    l_max = (1.0 - eps_S) * economy.l0
    return np.clip(l_new, 0.0, l_max)


# ---------------------------------------------------------------------------
# Full step
# ---------------------------------------------------------------------------

@dataclass
class ModelContext:
    """Precomputed run-constant quantities shared by every step of a run."""

    economy: Economy
    params: BehavioralParams
    schedule: ShockSchedule
    sets: CriticalitySets = field(init=False)
    S_target: np.ndarray = field(init=False)
    theta0: np.ndarray = field(init=False)
    m: float = field(init=False)
    l0_sum: float = field(init=False)
    zeta_L: float = field(init=False)
    no_fire: np.ndarray = field(init=False)

    def __post_init__(self):
        economy = self.economy
        self.sets = derive_criticality_sets(economy)
        self.S_target = initial_inventories(economy)
        self.theta0 = economy.theta0
        self.m = self.params.share_consumed(economy)
        self.l0_sum = float(economy.l0.sum())
        self.zeta_L = lockdown_income_retention(self.schedule.scenario, economy)
        self.no_fire = _no_fire_mask(economy, self.params)


def _zeta_next(ctx: ModelContext, t_prev: float, t_new: float,
               zeta_prev: float, rho_eff: float) -> float:
    start = ctx.schedule.pandemic_start
    if start is None or t_new < start:
        return 1.0
    if t_prev < start or t_prev == start == 0.0:
        # Expectations drop to the shocked income level the day the first
        # lockdown begins.
        return ctx.zeta_L
    return (
        1.0 - rho_eff + rho_eff * zeta_prev
        - (1.0 - rho_eff) * (1.0 - ctx.zeta_L) / ctx.params.L_share
    )


def _advance(ctx: ModelContext, state: SimState, t_new: float, dt: float) -> SimState:
    economy, params = ctx.economy, ctx.params
    sample = ctx.schedule.at(t_new)
    rho_eff = params.rho if dt == 1.0 else params.rho ** dt

    # Demand formation (uses t-1 demand, stocks, labor, and expectations).
    f_d = (1.0 - sample.eps_F) * economy.f0
    theta = household_preferences(ctx.theta0, sample.eps_D)
    eps_tilde = aggregate_demand_reduction(ctx.theta0, sample.eps_D, params.delta_s)
    l_comp = compensated_labor_income(float(state.l.sum()), ctx.l0_sum, sample.b)
    zeta = _zeta_next(ctx, state.t, t_new, state.l_perm / ctx.l0_sum, rho_eff)
    l_perm = zeta * ctx.l0_sum
    c_agg = _consumption_update(
        state.c_agg_d, eps_tilde, rho_eff, ctx.m, l_comp, l_perm
    )
    c_d = theta * c_agg
    d_prev = state.demand_memory
    O_d = np.maximum(
        economy.A * d_prev[np.newaxis, :] + (ctx.S_target - state.S) / params.tau,
        0.0,
    )
    d_new = O_d.sum(axis=1) + c_d + f_d

    # Productive capacities.
    x_cap = labor_capacity(state, economy, sample.eps_S)
    x_inp = _input_capacity(state.S, economy.A, ctx.sets, economy.x0, params.prod_fn)

    # Realized output and strict proportional rationing.
    x_new = realized_output(x_cap, x_inp, d_new)
    scale = np.where(d_new > 0, x_new / np.where(d_new > 0, d_new, 1.0), 0.0)
    c_new = c_d * scale
    f_new = f_d * scale
    O_new = O_d * scale[:, np.newaxis]

    # Stock and workforce adjustment, scaled by the step size.
    S_new = np.maximum(
        state.S + dt * (O_new - economy.A * x_new[np.newaxis, :]), 0.0
    )
    l_new = _labor_update(
        state.l, economy, params, x_cap, x_inp, d_new, sample.eps_S,
        dt=dt, no_fire=ctx.no_fire,
    )
    d_mem = d_new if dt == 1.0 else d_prev + dt * (d_new - d_prev)

    new = SimState(t_new, x_new, d_new, l_new, c_new, f_new, O_new, S_new,
                   c_agg, l_perm, d_mem)
    _check_state(new, economy, sample.eps_S)
    return new


def _check_state(state: SimState, economy: Economy, eps_S: np.ndarray) -> None:
    """Model invariants, active in test builds (python without -O)."""
    if not __debug__:  # pragma: no cover
        return
    allocated = state.c + state.f + state.O.sum(axis=1)
    scale = np.maximum(np.abs(state.x), 1e-300)
    assert np.all(np.abs(allocated - state.x) <= 1e-12 * scale + 1e-12), \
        "allocation does not conserve output"
    assert np.all(state.S >= 0.0), "negative inventory"
    l_max = (1.0 - eps_S) * economy.l0
    assert np.all(state.l >= 0.0) and np.all(state.l <= l_max * (1 + 1e-12) + 1e-12), \
        "labor outside its admissible band"
    assert np.all(state.x >= 0.0), "negative output"


def step(
    state: SimState,
    economy: Economy,
    scenario: Scenario,
    params: BehavioralParams,
    dt: float = 1.0,
) -> SimState:
    """Advance the model from ``state.t`` to ``state.t + dt`` (dt <= 1 day)."""
    if not 0.0 < dt <= 1.0:
        raise ValueError(f"dt = {dt} outside (0, 1]")
    ctx = ModelContext(economy, params, ShockSchedule(scenario, economy))
    return _advance(ctx, state, state.t + dt, dt)
