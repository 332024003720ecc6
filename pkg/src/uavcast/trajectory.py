"""Trajectory refinement: repeated GP condensation around the latest iterate.

Each pass freezes the SIC order sets at the current breaking points, builds
the condensed geometric program in the epigraph variables, solves its
log-space image, and accepts the move only if the exact total rate did not
drop (order sets can flip between iterates, so monotonicity is audited on
the true model rather than assumed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import condense, convex, model
from .condense import GpExpansionPoint, dist_key, ipn_key, x_key, y_key
from .model import ScenarioConfig, Trajectory, UserTrace

MAX_SCA_ITER = 50
QOS_RELAX_FACTOR = 0.5
QOS_RELAX_ATTEMPTS = 3
_WARM_INFLATION = 1e-4
_FORCED_PATH_TOL = 1e-9


class TrajectoryInfeasibleError(RuntimeError):
    """The condensed program stayed infeasible after the QoS relaxation policy."""


@dataclass
class TrajectoryStepResult:
    trajectory: Trajectory
    dist_sq_bound: np.ndarray    # (G, N)
    ipn_bound: np.ndarray        # (G, N)
    iterations: int
    converged: bool
    movement: float
    qos_scale: float
    records: list[dict] = field(default_factory=list)


def initialize_epigraphs(trajectory: Trajectory, trace, powers: np.ndarray,
                         config: ScenarioConfig,
                         slots: list[int] | None = None
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Tight epigraph values: max squared distance and exact
    interference-plus-noise under the current SIC ordering.

    Slots outside `slots` get positive placeholders (never used by the
    program but kept positive so expansion validation stays uniform).
    """
    g_count, n_count = config.num_groups, config.num_slots
    dist_sq = np.full((g_count, n_count), config.altitude ** 2)
    ipn = np.full((g_count, n_count), config.noise_power)
    for n in (range(1, n_count + 1) if slots is None else slots):
        q = trajectory.points[n]
        positions = trace.at_slot(n)
        st = model.slot_state(q, positions, config.altitude, config.pathloss_ref)
        for g in range(g_count):
            d2 = np.sum((positions[g] - q) ** 2, axis=1)
            dist_sq[g, n - 1] = config.altitude ** 2 + float(d2.max())
            interf = st.rep_gains[g] * sum(powers[j, n - 1] for j in st.interferers[g])
            ipn[g, n - 1] = interf + config.noise_power
    return dist_sq, ipn


def _epigraph_slots(config: ScenarioConfig, slots: list[int]) -> list[int]:
    if config.constraint_slots == "interior" and config.num_slots > 1:
        return [n for n in slots if n < config.num_slots]
    return slots


def build_condensed_gp(expansion: GpExpansionPoint, trace: UserTrace,
                       min_rate: np.ndarray, config: ScenarioConfig,
                       free_slots: list[int], epi_slots: list[int],
                       reach: dict[int, float] | None = None
                       ) -> tuple[convex.GeometricProgram, dict]:
    """Condensed GP around `expansion` with the given free breaking points.

    `epi_slots` selects where epigraph variables and QoS/interference rows
    exist; the objective covers the same slots.  `reach` adds a remaining
    distance budget |q[n] - q[N]| <= reach[n] for online planning.
    """
    g_count, n_total = config.num_groups, config.num_slots
    point = expansion.point()

    constants: dict = {}
    for n in range(n_total + 1):
        if n not in free_slots:
            constants[x_key(n)] = float(expansion.q[n, 0])
            constants[y_key(n)] = float(expansion.q[n, 1])

    var_order: list = []
    for n in free_slots:
        var_order += [x_key(n), y_key(n)]
    for n in epi_slots:
        for g in range(g_count):
            var_order += [dist_key(g, n), ipn_key(g, n)]

    constraints: list[convex.Posynomial] = []

    def add_ratio(num: convex.Posynomial, den: convex.Posynomial) -> None:
        condensed = den.condense(point)
        posy = (num * condensed ** -1.0).bind(constants)
        if posy.keys():
            constraints.append(posy)

    for n in free_slots:
        num, den = condense.speed_ratio_parts(n, config.s_max)
        add_ratio(num, den)
        if n + 1 <= n_total and (n + 1) not in free_slots:
            num, den = condense.speed_ratio_parts(n + 1, config.s_max)
            add_ratio(num, den)
        if reach and n in reach:
            num, den = condense.step_ratio_parts(
                (x_key(n), y_key(n)), (x_key(n_total), y_key(n_total)), reach[n] ** 2)
            add_ratio(num, den)

    obj = convex.Monomial.of(1.0)
    for n in epi_slots:
        positions = trace.at_slot(n)
        # Order sets frozen at the expansion trajectory for this whole program.
        orders = model.slot_state(expansion.q[n], positions, config.altitude,
                                  config.pathloss_ref).interferers
        for g in range(g_count):
            for u in range(positions[g].shape[0]):
                num, den = condense.distance_ratio_parts(
                    g, n, positions[g][u], config.altitude)
                add_ratio(num, den)
            gamma = condense.gamma_monomial(
                g, n, float(expansion.p_fixed[g, n - 1]), config.pathloss_ref, point)
            obj = obj * gamma
            if min_rate[g, n - 1] > 0.0:
                constraints.append(
                    condense.min_rate_posynomial(gamma, float(min_rate[g, n - 1])))
            interferer_power = float(sum(
                expansion.p_fixed[j, n - 1] for j in orders[g]))
            constraints.append(condense.interference_posynomial(
                g, n, interferer_power, config.pathloss_ref, config.noise_power))

    gp = convex.GeometricProgram(objective=obj, constraints=constraints,
                                 var_order=var_order)
    return gp, constants


def _exact_objective(points: np.ndarray, p_fixed: np.ndarray, trace,
                     config: ScenarioConfig, slots: list[int]) -> float:
    total = 0.0
    for n in slots:
        st = model.slot_state(points[n], trace.at_slot(n),
                              config.altitude, config.pathloss_ref)
        total += float(model.slot_capacities(p_fixed[:, n - 1], st,
                                             config.noise_power).sum())
    return total


def _qos_shortfall(points: np.ndarray, p_fixed: np.ndarray, trace,
                   config: ScenarioConfig, slots: list[int],
                   min_rate: np.ndarray) -> float:
    """Worst rate deficit (nats) across groups/slots at fixed powers."""
    worst = 0.0
    for n in slots:
        st = model.slot_state(points[n], trace.at_slot(n),
                              config.altitude, config.pathloss_ref)
        rates = model.slot_capacities(p_fixed[:, n - 1], st, config.noise_power)
        worst = max(worst, float((min_rate[:, n - 1] - rates).max()))
    return worst


def refine_points(points: np.ndarray, p_fixed: np.ndarray, trace,
                  config: ScenarioConfig, free_slots: list[int],
                  objective_slots: list[int], min_rate: np.ndarray,
                  reach: dict[int, float] | None = None,
                  epi_slots: list[int] | None = None,
                  max_sca_iter: int = MAX_SCA_ITER,
                  eps: float | None = None) -> TrajectoryStepResult:
    """Run the condensation/solve loop on the selected free breaking points."""
    eps = config.eps_traj if eps is None else eps
    epi_slots = objective_slots if epi_slots is None else epi_slots
    traj = Trajectory(points=points.copy())
    dist_sq, ipn = initialize_epigraphs(traj, trace, p_fixed, config,
                                        slots=objective_slots)

    qos_scale = 1.0
    best_obj = _exact_objective(traj.points, p_fixed, trace, config, objective_slots)
    records: list[dict] = []
    movement = 0.0
    converged = not free_slots
    iterations = 0

    if not free_slots:
        return TrajectoryStepResult(traj, dist_sq, ipn, 0, True, 0.0, qos_scale, records)

    moved = False
    for t1 in range(1, max_sca_iter + 1):
        # Re-anchor tight epigraphs each pass: SIC orders are recomputed from
        # the current breaking points, and values carried across an order
        # flip would describe the wrong interference pattern.
        dist_sq, ipn = initialize_epigraphs(traj, trace, p_fixed, config,
                                            slots=objective_slots)
        short = _qos_shortfall(traj.points, p_fixed, trace, config, epi_slots,
                               min_rate * qos_scale)
        if short > model.TOL_RATE:
            # Fixed powers cannot meet the (possibly flipped) rate floors at
            # this iterate; relaxing is only sound before any move was made.
            if moved:
                converged = True
                break
            if qos_scale <= QOS_RELAX_FACTOR ** QOS_RELAX_ATTEMPTS + 1e-12:
                raise TrajectoryInfeasibleError(
                    "rate reservation unattainable with the fixed powers even "
                    f"after relaxing it to {qos_scale:.3g} of its value")
            qos_scale *= QOS_RELAX_FACTOR
            continue

        expansion = GpExpansionPoint(q=traj.points, dist_sq_bound=dist_sq,
                                     ipn_bound=ipn, p_fixed=p_fixed)
        expansion.validate()
        gp, _ = build_condensed_gp(expansion, trace, min_rate * qos_scale,
                                   config, free_slots, epi_slots, reach)
        warm = expansion.point()
        for n in epi_slots:
            for g in range(config.num_groups):
                warm[dist_key(g, n)] *= 1.0 + _WARM_INFLATION
                warm[ipn_key(g, n)] *= 1.0 + _WARM_INFLATION
        program = convex.gp_to_convex(gp, warm_point=warm)
        report = convex.solve(program, t0=1e3 if moved else 1.0)
        if report.status == "infeasible":
            if moved:
                converged = True
                break
            if qos_scale <= QOS_RELAX_FACTOR ** QOS_RELAX_ATTEMPTS + 1e-12:
                raise TrajectoryInfeasibleError(
                    "condensed trajectory program infeasible even after relaxing "
                    f"the rate reservation to {qos_scale:.3g} of its value")
            qos_scale *= QOS_RELAX_FACTOR
            continue

        values = {k: math.exp(v) for k, v in zip(gp.var_order, report.x)}
        new_points = traj.points.copy()
        for n in free_slots:
            new_points[n] = (values[x_key(n)], values[y_key(n)])

        # The condensed program guarantees the rate floors only under the
        # frozen SIC orders; crossing an order-flip boundary can break them
        # in the exact model.  Damp the step until the true floors hold and
        # the exact objective does not drop.
        accepted = None
        for frac in (1.0, 0.7, 0.5, 0.35, 0.25, 0.15, 0.08, 0.04):
            cand = traj.points + frac * (new_points - traj.points)
            short = _qos_shortfall(cand, p_fixed, trace, config, epi_slots,
                                   min_rate * qos_scale)
            if short > model.TOL_RATE:
                continue
            obj_cand = _exact_objective(cand, p_fixed, trace, config, objective_slots)
            if obj_cand >= best_obj - 1e-12 * (1.0 + abs(best_obj)):
                accepted = (cand, obj_cand, frac)
                break
        iterations = t1
        if accepted is None:
            records.append({"iteration": t1, "movement": 0.0, "objective": best_obj,
                            "rejected": True})
            converged = True
            break

        cand, obj_new, frac = accepted
        movement = float(np.linalg.norm(cand - traj.points))
        traj = Trajectory(points=cand)
        best_obj = obj_new
        moved = True
        records.append({"iteration": t1, "movement": movement, "objective": obj_new,
                        "step_fraction": frac, "rejected": False})
        if movement <= eps:
            converged = True
            break

    dist_sq, ipn = initialize_epigraphs(traj, trace, p_fixed, config,
                                        slots=objective_slots)
    return TrajectoryStepResult(traj, dist_sq, ipn, iterations, converged,
                                movement, qos_scale, records)


def solve_trajectory(p_fixed: np.ndarray, trace: UserTrace, config: ScenarioConfig,
                     init: Trajectory, min_rate: np.ndarray | None = None,
                     max_sca_iter: int = MAX_SCA_ITER) -> TrajectoryStepResult:
    """Full-horizon trajectory pass of the alternating optimization."""
    min_rate = config.min_rate if min_rate is None else min_rate
    n_total = config.num_slots
    free_slots = list(range(1, n_total))
    slots = list(range(1, n_total + 1))

    reach_len = float(np.linalg.norm(config.start_point - config.end_point))
    slack = n_total * config.s_max - reach_len
    if not free_slots or slack <= _FORCED_PATH_TOL * max(1.0, reach_len):
        # No freedom: endpoints pin the whole path (N=1, or the travel budget
        # exactly equals the straight-line length).
        traj = model.straight_line_trajectory(config) if free_slots else init
        dist_sq, ipn = initialize_epigraphs(traj, trace, p_fixed, config)
        return TrajectoryStepResult(traj, dist_sq, ipn, 0, True, 0.0, 1.0, [])

    return refine_points(init.points, p_fixed, trace, config, free_slots, slots,
                         min_rate, reach=None,
                         epi_slots=_epigraph_slots(config, slots),
                         max_sca_iter=max_sca_iter)
