"""Per-slot online planning: observe current user positions, pick the next
breaking point and powers for this slot only, keeping enough distance budget
to reach the fixed terminal point in time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mobility as mobility_mod
from . import model, power, trajectory
from .model import PowerSchedule, RunResult, ScenarioConfig, Trajectory

MAX_SLOT_ASM_ITER = 10


class SlotObservations:
    """Duck-typed stand-in for UserTrace serving a single observed slot."""

    def __init__(self, per_slot: dict[int, list[np.ndarray]]):
        self.per_slot = per_slot

    def at_slot(self, n: int) -> list[np.ndarray]:
        return self.per_slot[n]


@dataclass
class OnlineState:
    slot: int                      # slot about to be planned (1-based)
    uav: np.ndarray                # q[slot-1]
    positions: list[np.ndarray]    # observed at the start of the slot
    s_remain: float                # distance budget after this slot's move


def s_remain(config: ScenarioConfig, n: int) -> float:
    return config.s_max * (config.num_slots - n)


def _straight_step(uav: np.ndarray, target: np.ndarray, s_max: float,
                   budget_after: float | None = None) -> np.ndarray:
    """Step from `uav` toward `target`, strictly inside the speed budget.

    With `budget_after` given, the step also leaves |result - target| within
    that remaining budget (the induction that guarantees terminal arrival).
    """
    gap = target - uav
    dist = float(np.linalg.norm(gap))
    if dist <= s_max or dist == 0.0:
        return target.copy()
    step = s_max * (1.0 - 5e-4)
    if budget_after is not None:
        step = max(step, dist - budget_after * (1.0 - 1e-9))
    return uav + gap * (min(step, s_max) / dist)


def plan_slot(state: OnlineState, config: ScenarioConfig, p_prev_slot: np.ndarray,
              reachability: bool = True,
              max_outer: int = MAX_SLOT_ASM_ITER) -> tuple[np.ndarray, np.ndarray, float]:
    """Joint next-point/power choice for one slot.

    Returns (q[n], p[:, n], qos_scale).  The warm start steps straight toward
    the terminal point, which satisfies both distance budgets by induction.
    """
    n = state.slot
    obs = SlotObservations({n: state.positions})
    warm_q = _straight_step(state.uav, config.end_point, config.s_max,
                            budget_after=state.s_remain) \
        if reachability else state.uav.copy()

    points = np.tile(warm_q, (config.num_slots + 1, 1))
    points[config.num_slots] = config.end_point
    points[n - 1] = state.uav
    points[n] = warm_q  # the free slot keeps its warm start even when n == N

    p_fixed = np.tile(p_prev_slot[:, None], (1, config.num_slots))
    reach = {n: state.s_remain} if (reachability and n < config.num_slots) else None

    qos_scale = 1.0
    q_n = warm_q
    p_n = p_prev_slot.copy()

    # Carried-over powers can violate the rate floors at the new user
    # positions, which no trajectory choice can repair; restore QoS with one
    # power pass at the warm point before alternating.  The pass expands
    # around the uniform split: a linearization anchored at a QoS-violating
    # point can make the (inner-approximated) constraint set empty.
    st = model.slot_state(warm_q, state.positions, config.altitude,
                          config.pathloss_ref)
    rates = model.slot_capacities(p_n, st, config.noise_power)
    if (rates < config.min_rate[:, n - 1] - model.TOL_RATE).any():
        links = [None] * config.num_slots
        links[n - 1] = power.SlotLink(rep_gains=st.rep_gains,
                                      interferers=st.interferers)
        uniform = model.uniform_powers(config).watts
        pw = power.solve_power(links, config, uniform, min_rate=config.min_rate,
                               slots=[n])
        qos_scale *= pw.qos_scale
        p_n = pw.watts[:, n - 1].copy()

    for _ in range(max_outer):
        p_fixed[:, n - 1] = p_n
        tr = trajectory.refine_points(points, p_fixed, obs, config,
                                      free_slots=[n], objective_slots=[n],
                                      min_rate=config.min_rate * qos_scale,
                                      reach=reach)
        qos_scale *= tr.qos_scale
        q_move = float(np.linalg.norm(tr.trajectory.points[n] - q_n))
        q_n = tr.trajectory.points[n].copy()
        points[n] = q_n

        links = [None] * config.num_slots
        st = model.slot_state(q_n, state.positions, config.altitude, config.pathloss_ref)
        links[n - 1] = power.SlotLink(rep_gains=st.rep_gains, interferers=st.interferers)
        pw = power.solve_power(links, config, p_fixed,
                               min_rate=config.min_rate * qos_scale, slots=[n])
        qos_scale *= pw.qos_scale
        p_move = float(np.linalg.norm(pw.watts[:, n - 1] - p_n))
        p_n = pw.watts[:, n - 1].copy()
        if q_move <= config.eps_traj and p_move <= config.eps_power:
            break
    return q_n, p_n, qos_scale


def plan_final_slot(positions: list[np.ndarray], config: ScenarioConfig,
                    p_prev_slot: np.ndarray) -> tuple[np.ndarray, float]:
    """Powers for the last slot at the fixed terminal point."""
    n = config.num_slots
    st = model.slot_state(config.end_point, positions, config.altitude,
                          config.pathloss_ref)
    links = [None] * n
    links[n - 1] = power.SlotLink(rep_gains=st.rep_gains, interferers=st.interferers)
    p_fixed = np.tile(p_prev_slot[:, None], (1, n))
    pw = power.solve_power(links, config, p_fixed, min_rate=config.min_rate,
                           slots=[n])
    return pw.watts[:, n - 1].copy(), pw.qos_scale


def run_online(config: ScenarioConfig, reachability: bool = True,
               trace: model.UserTrace | None = None,
               max_outer: int = MAX_SLOT_ASM_ITER) -> RunResult:
    """Sequence the per-slot solves, interleaved with user movement.

    When `trace` is given, observations replay it (no fresh randomness);
    otherwise users evolve through the seeded mobility model, with per-slot
    Poisson group resizing when the scenario sets a positive lambda.
    """
    config.validate()
    n_total = config.num_slots
    population = None
    if trace is None:
        population = mobility_mod.DynamicPopulation(
            config=config, mobility=mobility_mod.mobility_from_config(config))

    points = np.zeros((n_total + 1, 2))
    points[0] = config.start_point
    powers = np.zeros((config.num_groups, n_total))
    rates = np.zeros((config.num_groups, n_total))
    p_prev = model.uniform_powers(config).watts[:, 0]
    infeasible: list[int] = []
    history: list[float] = []
    log: list[dict] = []

    for n in range(1, n_total + 1):
        positions = trace.at_slot(n) if trace is not None else population.advance(n)
        budget = s_remain(config, n)
        try:
            if reachability and n == n_total:
                q_n = config.end_point.copy()
                p_n, scale = plan_final_slot(positions, config, p_prev)
            else:
                state = OnlineState(slot=n, uav=points[n - 1], positions=positions,
                                    s_remain=budget)
                q_n, p_n, scale = plan_slot(state, config, p_prev,
                                            reachability=reachability,
                                            max_outer=max_outer)
            if scale < 1.0:
                infeasible.append(n)
        except (trajectory.TrajectoryInfeasibleError, power.PowerInfeasibleError):
            infeasible.append(n)
            q_n = _straight_step(points[n - 1], config.end_point, config.s_max) \
                if reachability else points[n - 1].copy()
            p_n = p_prev.copy()

        if reachability and n < n_total:
            gap = float(np.linalg.norm(q_n - config.end_point))
            if gap > budget + model.TOL_GEOM:
                raise AssertionError(f"slot {n}: remaining-distance budget violated "
                                     f"({gap:.6g} > {budget:.6g})")
        points[n] = q_n
        powers[:, n - 1] = p_n
        st = model.slot_state(q_n, positions, config.altitude, config.pathloss_ref)
        rates[:, n - 1] = model.slot_capacities(p_n, st, config.noise_power)
        history.append(float(rates[:, : n].sum()))
        p_prev = p_n
        log.append({"kind": "snapshot", "slot": n,
                    "uav": q_n.copy(),
                    "positions": [p.copy() for p in positions],
                    "powers": p_n.copy(),
                    "rates": rates[:, n - 1].copy()})

    traj = Trajectory(points=points)
    return RunResult(trajectory=traj, powers=PowerSchedule(powers), rates=rates,
                     objective_history=history, converged=True,
                     iterations=n_total, infeasible_slots=infeasible,
                     qos_scale=1.0, seed=config.rng_seed, mode="online", log=log)
