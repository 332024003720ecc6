"""Alternating optimization driver: trajectory pass, then power pass, until
both blocks stop moving.  Also hosts the parameter sweeps behind the
figure-style experiments."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import mobility as mobility_mod
from . import model, power, trajectory
from .model import (PowerSchedule, RunResult, ScenarioConfig, UserTrace,
                    total_objective)

MAX_ASM_ITER = 30
_ASCENT_SLACK = 1e-6

SWEEP_PARAMS = ("T", "N", "U_g", "G", "p_max", "lambda")


def run_offline(config: ScenarioConfig, trace: UserTrace,
                mode: str = "offline-fixed",
                max_asm_iter: int = MAX_ASM_ITER) -> RunResult:
    """Alternate the two subproblems from a straight-line/uniform start."""
    config.validate()
    if mode not in ("offline-fixed", "offline-mobile"):
        raise ValueError(f"unknown offline mode {mode!r}")
    if mode == "offline-fixed" and not trace.is_static():
        raise model.ScenarioError("offline-fixed mode requires a static user trace")
    trace.validate_containment(config.disk_center, config.coverage_radius)

    traj = model.straight_line_trajectory(config)
    powers = model.uniform_powers(config).watts
    qos_scale = 1.0
    bound = model.objective_upper_bound(config)
    log: list[dict] = []

    history = [total_objective(traj, PowerSchedule(powers), trace, config)]
    converged = False
    iterations = 0
    for t in range(1, max_asm_iter + 1):
        tr = trajectory.solve_trajectory(powers, trace, config, traj,
                                         min_rate=config.min_rate * qos_scale)
        qos_scale *= tr.qos_scale
        q_move = float(np.linalg.norm(tr.trajectory.points - traj.points))
        obj_after_traj = total_objective(tr.trajectory, PowerSchedule(powers),
                                         trace, config)
        if obj_after_traj < history[-1] - _ASCENT_SLACK:
            raise AssertionError("trajectory pass decreased the exact objective")

        links = power.slot_links(tr.trajectory.points, trace, config)
        pw = power.solve_power(links, config, powers,
                               min_rate=config.min_rate * qos_scale)
        qos_scale *= pw.qos_scale
        p_move = float(np.linalg.norm(pw.watts - powers))
        traj, powers = tr.trajectory, pw.watts

        obj_now = total_objective(traj, PowerSchedule(powers), trace, config)
        if obj_now < obj_after_traj - _ASCENT_SLACK:
            raise AssertionError("power pass decreased the exact objective")
        if obj_now > bound + 1e-9:
            raise AssertionError("objective exceeded its analytic upper bound")
        history.append(obj_now)
        iterations = t
        log.append({"kind": "asm", "iteration": t, "objective": obj_now,
                    "q_move": q_move, "p_move": p_move,
                    "traj_records": tr.records, "power_records": pw.records})
        if q_move <= config.eps_traj and p_move <= config.eps_power:
            converged = True
            break

    schedule = PowerSchedule(powers)
    schedule.validate(config)
    traj.validate(config)
    violations = model.check_feasibility(traj, schedule, trace, config,
                                         min_rate=config.min_rate * qos_scale)
    if violations:
        v = violations[0]
        raise AssertionError(f"final solution violates {v.kind} at slot {v.slot} "
                             f"by {v.margin:.3g}")

    rates = model.rates_matrix(traj, schedule, trace, config)
    return RunResult(trajectory=traj, powers=schedule, rates=rates,
                     objective_history=history, converged=converged,
                     iterations=iterations, qos_scale=qos_scale,
                     seed=config.rng_seed, mode=mode, log=log)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    param: str
    value: float
    seed: int
    objective: float | None
    converged: bool
    qos_scale: float
    error: str | None = None


def _config_for(config: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    if param == "T":
        return replace(config, horizon=float(value))
    if param == "N":
        n_new = int(value)
        horizon = config.s_max * n_new / config.v_max
        g = config.num_groups
        return replace(config, num_slots=n_new, horizon=horizon,
                       min_rate=np.full((g, n_new), float(config.min_rate[0, 0])))
    if param == "U_g":
        return replace(config, users_per_group=(int(value),) * config.num_groups)
    if param == "G":
        total = int(np.sum(config.users_per_group))
        g_new = int(value)
        if total % g_new != 0:
            raise ValueError(f"{total} users cannot split into {g_new} equal groups")
        per = total // g_new
        return replace(config, num_groups=g_new, users_per_group=(per,) * g_new,
                       min_rate=np.full((g_new, config.num_slots),
                                        float(config.min_rate[0, 0])))
    if param == "p_max":
        return replace(config, p_max=float(value))
    if param == "lambda":
        return replace(config, poisson_lambda=float(value))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def _pooled_trace(config: ScenarioConfig) -> UserTrace:
    """Trace whose walkers are keyed by a global user index so regrouping the
    same total population leaves every walk unchanged."""
    mob = mobility_mod.mobility_from_config(config)
    mob.validate()
    static = mob.speed_range[1] == 0.0
    groups = []
    offset = 0
    for g in range(config.num_groups):
        u_count = config.users_per_group[g]
        arr = np.zeros((u_count, config.num_slots, 2))
        for u in range(u_count):
            rng = mobility_mod.user_rng(config.rng_seed, 0, offset + u)
            pos = mobility_mod.uniform_disk_point(rng, mob.disk_center, mob.coverage_radius)
            arr[u, 0] = pos
            for n in range(1, config.num_slots):
                pos = pos if static else mobility_mod.step_user(pos, rng, mob)
                arr[u, n] = pos
        groups.append(arr)
        offset += u_count
    return UserTrace(positions=groups)


def sweep(config: ScenarioConfig, param: str, values: list[float], seeds: list[int],
          mode: str = "offline-fixed", reachability: bool = True) -> list[SweepRow]:
    """One run per (value, seed); failures are recorded and the sweep continues."""
    from . import online as online_mod  # local import to avoid a cycle

    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    rows: list[SweepRow] = []
    for value in values:
        for seed in seeds:
            try:
                cfg = replace(_config_for(config, param, value), rng_seed=int(seed))
                cfg.validate()
                if mode == "online":
                    result = online_mod.run_online(cfg, reachability=reachability)
                else:
                    trace = _pooled_trace(cfg) if param == "G" else \
                        mobility_mod.generate_trace(cfg)
                    result = run_offline(cfg, trace, mode=mode)
                rows.append(SweepRow(param=param, value=float(value), seed=int(seed),
                                     objective=result.objective,
                                     converged=result.converged,
                                     qos_scale=result.qos_scale))
            except Exception as exc:  # noqa: BLE001 — keep batch experiments alive
                rows.append(SweepRow(param=param, value=float(value), seed=int(seed),
                                     objective=None, converged=False,
                                     qos_scale=float("nan"), error=str(exc)))
    return rows
