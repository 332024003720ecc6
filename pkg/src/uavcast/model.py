"""Exact system model: channels, SIC ordering, multicast capacities, feasibility.

Everything here evaluates the true (non-approximated) model; the SCA loops
use these functions to audit their surrogate solutions.  All rates are in
nats.  Positions live in the internally shifted frame where every
coordinate is strictly positive (see ScenarioConfig.coord_offset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LN2 = math.log(2.0)

# Constraint-check tolerances: far below solver tolerances, so a reported
# violation is a real one and not round-off.
TOL_GEOM = 1e-6     # meters
TOL_POW = 1e-9      # watts
TOL_RATE = 1e-6     # nats
P_FLOOR = 1e-8      # watts; keeps GP/log transforms well defined


class ScenarioError(ValueError):
    """A scenario violates one of its structural invariants."""


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one run (internal frame)."""

    num_groups: int
    users_per_group: tuple[int, ...]
    num_slots: int
    horizon: float                 # seconds
    v_max: float                   # m/s
    altitude: float                # meters
    p_max: float                   # watts
    noise_power: float             # watts, linear
    pathloss_ref: float            # linear gain at 1 m
    coverage_radius: float         # meters
    start_point: np.ndarray        # (2,) shifted meters
    end_point: np.ndarray          # (2,) shifted meters
    min_rate: np.ndarray           # (G, N) nats
    disk_center: np.ndarray        # (2,) shifted meters
    coord_offset: float
    eps_traj: float = 1e-2         # meters
    eps_power: float = 1e-3        # watts
    rng_seed: int = 0
    user_speed_range: tuple[float, float] = (0.0, 0.0)
    poisson_lambda: float = 0.0
    constraint_slots: str = "full"  # rate-floor/epigraph rows at every slot ("full") or all but the last ("interior")
    name: str = "scenario"

    @property
    def s_max(self) -> float:
        return self.v_max * self.horizon / self.num_slots

    @property
    def slot_duration(self) -> float:
        return self.horizon / self.num_slots

    def validate(self) -> None:
        if self.num_groups < 1 or len(self.users_per_group) != self.num_groups:
            raise ScenarioError("users_per_group must list one positive size per group")
        if any(u < 1 for u in self.users_per_group):
            raise ScenarioError("every group needs at least one user")
        if self.num_slots < 1:
            raise ScenarioError("num_slots must be >= 1")
        for fname in ("p_max", "noise_power", "pathloss_ref", "altitude", "horizon", "v_max"):
            if getattr(self, fname) <= 0:
                raise ScenarioError(f"{fname} must be positive")
        if self.eps_traj <= 0 or self.eps_power <= 0:
            raise ScenarioError("stopping tolerances must be positive")
        if self.min_rate.shape != (self.num_groups, self.num_slots):
            raise ScenarioError("min_rate must have shape (num_groups, num_slots)")
        if (self.min_rate < 0).any():
            raise ScenarioError("min_rate entries must be non-negative")
        reach = float(np.linalg.norm(self.start_point - self.end_point))
        if reach > self.num_slots * self.s_max + TOL_GEOM:
            raise ScenarioError(
                f"end point unreachable: |q0-qN|={reach:.6g} m exceeds the "
                f"{self.num_slots}*{self.s_max:.6g} m travel budget")
        if self.constraint_slots not in ("full", "interior"):
            raise ScenarioError("constraint_slots must be 'full' or 'interior'")
        lo = min(np.min(self.start_point), np.min(self.end_point),
                 np.min(self.disk_center) - self.coverage_radius)
        if lo <= 0:
            raise ScenarioError("internal frame must keep all coordinates positive")

    def min_rate_scaled(self, factor: float) -> "ScenarioConfig":
        return replace(self, min_rate=self.min_rate * factor)


def internal_frame_config(**kwargs) -> ScenarioConfig:
    """Build a config from original-frame coordinates (disk centered at origin).

    Applies the positivity shift to start/end points and records the disk
    center; min_rate may be a scalar (nats) or a full (G, N) array.
    """
    radius = kwargs["coverage_radius"]
    offset = kwargs.pop("coord_offset", 2.0 * radius + 1.0)
    g = kwargs["num_groups"]
    n = kwargs["num_slots"]
    min_rate = np.asarray(kwargs.pop("min_rate", 0.0), dtype=float)
    if min_rate.ndim == 0:
        min_rate = np.full((g, n), float(min_rate))
    start = np.asarray(kwargs.pop("start_point"), dtype=float) + offset
    end = np.asarray(kwargs.pop("end_point"), dtype=float) + offset
    cfg = ScenarioConfig(start_point=start, end_point=end, min_rate=min_rate,
                         disk_center=np.full(2, offset), coord_offset=offset, **kwargs)
    cfg.validate()
    return cfg


@dataclass
class UserTrace:
    """Per-slot user positions: one (U_g, N, 2) array per group (internal frame)."""

    positions: list[np.ndarray]

    @property
    def num_slots(self) -> int:
        return self.positions[0].shape[1]

    def at_slot(self, n: int) -> list[np.ndarray]:
        """Positions at slot n (1-based), one (U_g, 2) array per group."""
        return [p[:, n - 1, :] for p in self.positions]

    def is_static(self) -> bool:
        return all(np.ptp(p, axis=1).max(initial=0.0) == 0.0 for p in self.positions)

    def validate_containment(self, center: np.ndarray, radius: float) -> None:
        for g, p in enumerate(self.positions):
            d = np.linalg.norm(p - center, axis=-1)
            if (d > radius + TOL_GEOM).any():
                raise ScenarioError(f"group {g} has positions outside the coverage disk")


@dataclass
class Trajectory:
    """UAV breaking points q[0..N], shape (N+1, 2)."""

    points: np.ndarray

    def validate(self, config: ScenarioConfig) -> None:
        if self.points.shape != (config.num_slots + 1, 2):
            raise ScenarioError("trajectory must have N+1 breaking points")
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if (steps > config.s_max + TOL_GEOM).any():
            raise ScenarioError("consecutive breaking points exceed the speed budget")
        if (np.linalg.norm(self.points[0] - config.start_point) > TOL_GEOM or
                np.linalg.norm(self.points[-1] - config.end_point) > TOL_GEOM):
            raise ScenarioError("trajectory endpoints differ from the configured ones")


@dataclass
class PowerSchedule:
    """Transmit powers per group and slot, shape (G, N), watts."""

    watts: np.ndarray

    def validate(self, config: ScenarioConfig) -> None:
        if self.watts.shape != (config.num_groups, config.num_slots):
            raise ScenarioError("power schedule must have shape (G, N)")
        if (self.watts < P_FLOOR - 1e-15).any():
            raise ScenarioError("powers must stay at or above the positive floor")
        if (self.watts.sum(axis=0) > config.p_max + TOL_POW).any():
            raise ScenarioError("per-slot power budget exceeded")


@dataclass
class SlotChannelState:
    """Derived per-slot quantities for one breaking point."""

    gains: list[np.ndarray]          # per group, (U_g,)
    rep_gains: np.ndarray            # (G,) group representative (minimum) gains
    interferers: list[frozenset]     # per group: groups whose signals cannot be canceled
    dist_sq_bound: np.ndarray | None = None   # (G,) epigraph on max squared 3-D distance
    ipn_bound: np.ndarray | None = None       # (G,) epigraph on interference-plus-noise


@dataclass
class FeasibilityViolation:
    kind: str        # "speed" | "min_rate" | "sum_power"
    slot: int
    group: int | None
    margin: float    # positive amount by which the constraint is violated


@dataclass
class RunResult:
    trajectory: Trajectory
    powers: PowerSchedule
    rates: np.ndarray                 # (G, N) nats, recomputed through the exact model
    objective_history: list[float]    # per outer iteration, exact model
    converged: bool
    iterations: int
    infeasible_slots: list[int] = field(default_factory=list)
    qos_scale: float = 1.0            # < 1 when the relaxation policy kicked in
    seed: int = 0
    mode: str = "offline-fixed"
    log: list[dict] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return float(self.rates.sum())


# ---------------------------------------------------------------------------
# Channel model
# ---------------------------------------------------------------------------

def channel_gain(q: np.ndarray, r: np.ndarray, altitude: float, ref_gain: float) -> float:
    """Free-space pathloss gain between the UAV at q and a user at r."""
    d2 = float(np.sum((np.asarray(q, dtype=float) - np.asarray(r, dtype=float)) ** 2))
    return ref_gain / (altitude ** 2 + d2)


def group_gains(q: np.ndarray, positions: list[np.ndarray],
                altitude: float, ref_gain: float) -> list[np.ndarray]:
    out = []
    for pos in positions:
        d2 = np.sum((pos - q) ** 2, axis=1)
        out.append(ref_gain / (altitude ** 2 + d2))
    return out


def representative_gain(gains: np.ndarray) -> float:
    """The group's multicast bottleneck: minimum gain over its users."""
    gains = np.asarray(gains, dtype=float)
    if gains.size == 0:
        raise ScenarioError("representative gain of an empty group is undefined")
    return float(gains.min())


def sic_order(rep_gains: np.ndarray) -> list[frozenset]:
    """For each group, the set of groups whose signals it cannot cancel.

    Strictly larger representative gain means uncancelable; exact ties are
    broken by group index, the lower index counting as the weaker channel.
    """
    rep = np.asarray(rep_gains, dtype=float)
    out = []
    for g in range(rep.size):
        stronger = {j for j in range(rep.size)
                    if (rep[j], j) > (rep[g], g)}
        out.append(frozenset(stronger))
    return out


def slot_state(q: np.ndarray, positions: list[np.ndarray],
               altitude: float, ref_gain: float) -> SlotChannelState:
    gains = group_gains(q, positions, altitude, ref_gain)
    rep = np.array([representative_gain(gv) for gv in gains])
    return SlotChannelState(gains=gains, rep_gains=rep, interferers=sic_order(rep))


def multicast_capacity(p_slot: np.ndarray, state: SlotChannelState, g: int,
                       noise_power: float) -> float:
    """Per-slot multicast rate of group g in nats."""
    h = state.rep_gains[g]
    interference = h * sum(p_slot[j] for j in state.interferers[g])
    return math.log1p(p_slot[g] * h / (interference + noise_power))


def slot_capacities(p_slot: np.ndarray, state: SlotChannelState,
                    noise_power: float) -> np.ndarray:
    return np.array([multicast_capacity(p_slot, state, g, noise_power)
                     for g in range(state.rep_gains.size)])


def rates_matrix(trajectory: Trajectory, powers: PowerSchedule, trace: UserTrace,
                 config: ScenarioConfig) -> np.ndarray:
    """Exact per-group per-slot rates for a full run, shape (G, N)."""
    out = np.zeros((config.num_groups, config.num_slots))
    for n in range(1, config.num_slots + 1):
        st = slot_state(trajectory.points[n], trace.at_slot(n),
                        config.altitude, config.pathloss_ref)
        out[:, n - 1] = slot_capacities(powers.watts[:, n - 1], st, config.noise_power)
    return out


def total_objective(trajectory: Trajectory, powers: PowerSchedule, trace: UserTrace,
                    config: ScenarioConfig) -> float:
    return float(rates_matrix(trajectory, powers, trace, config).sum())


def objective_upper_bound(config: ScenarioConfig) -> float:
    """Zero-interference, overhead, full-power bound on the total rate."""
    best = math.log1p(config.p_max * config.pathloss_ref
                      / (config.altitude ** 2 * config.noise_power))
    return config.num_slots * config.num_groups * best


def check_feasibility(trajectory: Trajectory, powers: PowerSchedule, trace: UserTrace,
                      config: ScenarioConfig,
                      min_rate: np.ndarray | None = None) -> list[FeasibilityViolation]:
    """Every violated speed/min-rate/sum-power constraint with its margin."""
    min_rate = config.min_rate if min_rate is None else min_rate
    out: list[FeasibilityViolation] = []
    steps = np.linalg.norm(np.diff(trajectory.points, axis=0), axis=1)
    for n, step in enumerate(steps, start=1):
        if step > config.s_max + TOL_GEOM:
            out.append(FeasibilityViolation("speed", n, None, float(step - config.s_max)))
    sums = powers.watts.sum(axis=0)
    for n in range(1, config.num_slots + 1):
        if sums[n - 1] > config.p_max + TOL_POW:
            out.append(FeasibilityViolation("sum_power", n, None,
                                            float(sums[n - 1] - config.p_max)))
    rates = rates_matrix(trajectory, powers, trace, config)
    for g in range(config.num_groups):
        for n in range(1, config.num_slots + 1):
            short = min_rate[g, n - 1] - rates[g, n - 1]
            if short > TOL_RATE:
                out.append(FeasibilityViolation("min_rate", n, g, float(short)))
    return out


def straight_line_trajectory(config: ScenarioConfig) -> Trajectory:
    """Uniform interpolation from start to end; feasible by the reach invariant."""
    frac = np.linspace(0.0, 1.0, config.num_slots + 1)[:, None]
    pts = config.start_point[None, :] * (1.0 - frac) + config.end_point[None, :] * frac
    return Trajectory(points=pts)


def uniform_powers(config: ScenarioConfig) -> PowerSchedule:
    """Strictly interior start: half the budget split evenly across groups."""
    p = np.full((config.num_groups, config.num_slots),
                config.p_max / (2.0 * config.num_groups))
    return PowerSchedule(watts=p)


def bits_from_nats(x: np.ndarray | float) -> np.ndarray | float:
    return x / LN2


def nats_from_bits(x: np.ndarray | float) -> np.ndarray | float:
    return x * LN2
