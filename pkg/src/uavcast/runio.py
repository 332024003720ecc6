"""Scenario ingestion and result persistence.

Formats: flat `key = value` text for scenarios and run summaries (human
diffable), comma-separated tables for numeric series.  Tables round to nine
significant digits; the summary's config echo keeps full float precision so
a reload reproduces the run exactly.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model
from .model import (PowerSchedule, RunResult, ScenarioConfig, Trajectory, UserTrace,
                    internal_frame_config)

_FMT = "{:.9g}"


class LoadError(ValueError):
    """A scenario or result file failed validation; message names the field."""


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LoadError(f"malformed line (expected key = value): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(value: str) -> list[float]:
    return [float(v) for v in value.split(",") if v.strip() != ""]


_REQUIRED = ("num_groups", "users_per_group", "num_slots", "horizon_s", "v_max_mps",
             "altitude_m", "p_max_w", "noise_power_db", "pathloss_ref_db",
             "coverage_radius_m", "start_xy_m", "end_xy_m", "min_rate_bps")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def scenario_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    packaged = importlib.resources.files("uavcast") / "scenarios" / f"{name_or_path}.scn"
    with importlib.resources.as_file(packaged) as fp:
        if fp.exists():
            return fp
    raise LoadError(f"scenario {name_or_path!r} is neither a file nor a shipped name")


def load_scenario(name_or_path: str) -> tuple[ScenarioConfig, UserTrace | None]:
    """Parse and fully validate a scenario; dB fields become linear, rates
    become nats, coordinates shift into the positive internal frame.

    Returns an optional static trace when the file pins user positions.
    """
    path = scenario_path(name_or_path)
    kv = _parse_kv(path.read_text())
    for field in _REQUIRED:
        if field not in kv:
            raise LoadError(f"scenario {path.name}: missing required field {field!r}")

    try:
        num_groups = int(kv["num_groups"])
        users = tuple(int(v) for v in kv["users_per_group"].split(","))
        num_slots = int(kv["num_slots"])
    except ValueError as exc:
        raise LoadError(f"scenario {path.name}: bad integer field ({exc})") from exc

    speed = tuple(_floats(kv.get("user_speed_range_mps", "0,0")))
    if len(speed) != 2:
        raise LoadError(f"scenario {path.name}: user_speed_range_mps needs two values")

    try:
        config = internal_frame_config(
            name=kv.get("name", path.stem),
            num_groups=num_groups,
            users_per_group=users,
            num_slots=num_slots,
            horizon=float(kv["horizon_s"]),
            v_max=float(kv["v_max_mps"]),
            altitude=float(kv["altitude_m"]),
            p_max=float(kv["p_max_w"]),
            noise_power=db_to_linear(float(kv["noise_power_db"])),
            pathloss_ref=db_to_linear(float(kv["pathloss_ref_db"])),
            coverage_radius=float(kv["coverage_radius_m"]),
            start_point=_floats(kv["start_xy_m"]),
            end_point=_floats(kv["end_xy_m"]),
            min_rate=model.nats_from_bits(float(kv["min_rate_bps"])),
            eps_traj=float(kv.get("eps_traj_m", "0.01")),
            eps_power=float(kv.get("eps_power_w", "0.001")),
            rng_seed=int(kv.get("rng_seed", "0")),
            user_speed_range=(speed[0], speed[1]),
            poisson_lambda=float(kv.get("poisson_lambda", "0")),
            constraint_slots=kv.get("constraint_slots", "full"),
        )
    except model.ScenarioError as exc:
        raise LoadError(f"scenario {path.name}: {exc}") from exc

    trace = None
    pinned: list[np.ndarray] = []
    if any(k.startswith("positions_group_") for k in kv):
        for g in range(1, num_groups + 1):
            key = f"positions_group_{g}"
            if key not in kv:
                raise LoadError(f"scenario {path.name}: missing {key!r} "
                                "(all groups must pin positions together)")
            pts = []
            for pair in kv[key].split(";"):
                xy = [float(v) for v in pair.split(":")]
                if len(xy) != 2:
                    raise LoadError(f"scenario {path.name}: bad pair in {key!r}")
                pts.append([xy[0] + config.coord_offset, xy[1] + config.coord_offset])
            pinned.append(np.array(pts))
        users = tuple(p.shape[0] for p in pinned)
        config = internal_frame_config(
            name=config.name, num_groups=num_groups, users_per_group=users,
            num_slots=num_slots, horizon=config.horizon, v_max=config.v_max,
            altitude=config.altitude, p_max=config.p_max,
            noise_power=config.noise_power, pathloss_ref=config.pathloss_ref,
            coverage_radius=config.coverage_radius,
            start_point=np.asarray(_floats(kv["start_xy_m"])),
            end_point=np.asarray(_floats(kv["end_xy_m"])),
            min_rate=model.nats_from_bits(float(kv["min_rate_bps"])),
            eps_traj=config.eps_traj, eps_power=config.eps_power,
            rng_seed=config.rng_seed, user_speed_range=config.user_speed_range,
            poisson_lambda=config.poisson_lambda,
            constraint_slots=config.constraint_slots)
        trace = UserTrace(positions=[
            np.repeat(p[:, None, :], num_slots, axis=1) for p in pinned])
        trace.validate_containment(config.disk_center, config.coverage_radius)
    return config, trace


# ---------------------------------------------------------------------------
# Result persistence
# ---------------------------------------------------------------------------

def _unshift(xy: np.ndarray, offset: float) -> np.ndarray:
    return np.asarray(xy) - offset


def _config_echo(config: ScenarioConfig) -> list[str]:
    def join(arr) -> str:
        return ",".join(repr(float(v)) for v in np.asarray(arr).ravel())

    return [
        f"config.name = {config.name}",
        f"config.num_groups = {config.num_groups}",
        f"config.users_per_group = {','.join(str(u) for u in config.users_per_group)}",
        f"config.num_slots = {config.num_slots}",
        f"config.horizon = {config.horizon!r}",
        f"config.v_max = {config.v_max!r}",
        f"config.altitude = {config.altitude!r}",
        f"config.p_max = {config.p_max!r}",
        f"config.noise_power = {config.noise_power!r}",
        f"config.pathloss_ref = {config.pathloss_ref!r}",
        f"config.coverage_radius = {config.coverage_radius!r}",
        f"config.start_point = {join(config.start_point)}",
        f"config.end_point = {join(config.end_point)}",
        f"config.min_rate = {join(config.min_rate)}",
        f"config.disk_center = {join(config.disk_center)}",
        f"config.coord_offset = {config.coord_offset!r}",
        f"config.eps_traj = {config.eps_traj!r}",
        f"config.eps_power = {config.eps_power!r}",
        f"config.rng_seed = {config.rng_seed}",
        f"config.user_speed_range = {join(config.user_speed_range)}",
        f"config.poisson_lambda = {config.poisson_lambda!r}",
        f"config.constraint_slots = {config.constraint_slots}",
    ]


def config_from_echo(kv: dict[str, str]) -> ScenarioConfig:
    def arr(key, shape=None):
        a = np.array(_floats(kv[key]))
        return a.reshape(shape) if shape else a

    g = int(kv["config.num_groups"])
    n = int(kv["config.num_slots"])
    cfg = ScenarioConfig(
        name=kv.get("config.name", "scenario"),
        num_groups=g,
        users_per_group=tuple(int(v) for v in kv["config.users_per_group"].split(",")),
        num_slots=n,
        horizon=float(kv["config.horizon"]),
        v_max=float(kv["config.v_max"]),
        altitude=float(kv["config.altitude"]),
        p_max=float(kv["config.p_max"]),
        noise_power=float(kv["config.noise_power"]),
        pathloss_ref=float(kv["config.pathloss_ref"]),
        coverage_radius=float(kv["config.coverage_radius"]),
        start_point=arr("config.start_point"),
        end_point=arr("config.end_point"),
        min_rate=arr("config.min_rate", (g, n)),
        disk_center=arr("config.disk_center"),
        coord_offset=float(kv["config.coord_offset"]),
        eps_traj=float(kv["config.eps_traj"]),
        eps_power=float(kv["config.eps_power"]),
        rng_seed=int(kv["config.rng_seed"]),
        user_speed_range=tuple(_floats(kv["config.user_speed_range"])),
        poisson_lambda=float(kv["config.poisson_lambda"]),
        constraint_slots=kv.get("config.constraint_slots", "full"),
    )
    return cfg


def save_result(result: RunResult, outdir: str | Path, config: ScenarioConfig,
                trace: UserTrace | None = None) -> None:
    """Write trajectory/power tables, the run summary, the user trace, and
    (for online runs) per-slot position snapshots."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    off = config.coord_offset

    rows = ["n,x,y"]
    for n, q in enumerate(result.trajectory.points):
        x, y = _unshift(q, off)
        rows.append(f"{n}," + _FMT.format(x) + "," + _FMT.format(y))
    (out / "trajectory.csv").write_text("\n".join(rows) + "\n")

    rows = ["n,g,p_watts,rate_nats,rate_bits"]
    for n in range(1, config.num_slots + 1):
        for g in range(result.powers.watts.shape[0]):
            p = result.powers.watts[g, n - 1]
            c = result.rates[g, n - 1]
            rows.append(f"{n},{g + 1}," + ",".join(
                _FMT.format(v) for v in (p, c, model.bits_from_nats(c))))
    (out / "powers.csv").write_text("\n".join(rows) + "\n")

    lines = [
        f"objective_nats = {result.objective!r}",
        f"objective_bits = {model.bits_from_nats(result.objective)!r}",
        f"converged = {str(result.converged).lower()}",
        f"iterations = {result.iterations}",
        f"seed = {result.seed}",
        f"mode = {result.mode}",
        f"qos_scale = {result.qos_scale!r}",
        "infeasible_slots = " + ",".join(str(s) for s in result.infeasible_slots),
        "objective_history = " + ",".join(repr(v) for v in result.objective_history),
    ]
    lines += _config_echo(config)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")

    snapshots = [rec for rec in result.log if rec.get("kind") == "snapshot"]
    trace_rows = ["n,g,u,x,y"]
    if snapshots:
        for rec in snapshots:
            for g, pts in enumerate(rec["positions"]):
                for u, xy in enumerate(pts):
                    x, y = _unshift(xy, off)
                    trace_rows.append(f"{rec['slot']},{g + 1},{u + 1},"
                                      + _FMT.format(x) + "," + _FMT.format(y))
    elif trace is not None:
        for n in range(1, config.num_slots + 1):
            for g, pts in enumerate(trace.at_slot(n)):
                for u, xy in enumerate(pts):
                    x, y = _unshift(xy, off)
                    trace_rows.append(f"{n},{g + 1},{u + 1},"
                                      + _FMT.format(x) + "," + _FMT.format(y))
    (out / "trace.csv").write_text("\n".join(trace_rows) + "\n")

    for rec in snapshots:
        rows = ["kind,g,u,x,y"]
        x, y = _unshift(rec["uav"], off)
        rows.append("uav,,," + _FMT.format(x) + "," + _FMT.format(y))
        for g, pts in enumerate(rec["positions"]):
            for u, xy in enumerate(pts):
                x, y = _unshift(xy, off)
                rows.append(f"user,{g + 1},{u + 1}," + _FMT.format(x) + "," + _FMT.format(y))
        (out / f"snapshot_{rec['slot']:02d}.csv").write_text("\n".join(rows) + "\n")


def save_sweep(rows, outdir: str | Path) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["param,value,seed,objective_nats,objective_bits,converged,qos_scale,error"]
    for r in rows:
        obj = "" if r.objective is None else _FMT.format(r.objective)
        bits = "" if r.objective is None else _FMT.format(model.bits_from_nats(r.objective))
        qos = "" if math.isnan(r.qos_scale) else _FMT.format(r.qos_scale)
        err = (r.error or "").replace(",", ";").replace("\n", " ")
        lines.append(f"{r.param},{_FMT.format(r.value)},{r.seed},{obj},{bits},"
                     f"{str(r.converged).lower()},{qos},{err}")
    path = out / "sweep.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Reload + verification
# ---------------------------------------------------------------------------

@dataclass
class SavedRun:
    config: ScenarioConfig
    trajectory: Trajectory
    powers: PowerSchedule
    rates: np.ndarray
    objective: float
    qos_scale: float
    mode: str
    slot_positions: dict[int, list[np.ndarray]]   # internal frame


def _read_csv(path: Path) -> list[list[str]]:
    lines = path.read_text().strip().splitlines()
    return [line.split(",") for line in lines[1:]]


def load_result(outdir: str | Path) -> SavedRun:
    out = Path(outdir)
    for fname in ("summary.txt", "trajectory.csv", "powers.csv", "trace.csv"):
        if not (out / fname).exists():
            raise LoadError(f"missing result artifact {fname!r} in {out}")
    kv = _parse_kv((out / "summary.txt").read_text())
    config = config_from_echo(kv)
    off = config.coord_offset

    traj_rows = _read_csv(out / "trajectory.csv")
    pts = np.zeros((len(traj_rows), 2))
    for row in traj_rows:
        pts[int(row[0])] = (float(row[1]) + off, float(row[2]) + off)
    g_count, n_count = config.num_groups, config.num_slots
    watts = np.zeros((g_count, n_count))
    rates = np.zeros((g_count, n_count))
    for row in _read_csv(out / "powers.csv"):
        n, g = int(row[0]), int(row[1])
        watts[g - 1, n - 1] = float(row[2])
        rates[g - 1, n - 1] = float(row[3])

    per_slot: dict[int, list[list[np.ndarray]]] = {}
    for row in _read_csv(out / "trace.csv"):
        n, g = int(row[0]), int(row[1])
        xy = np.array([float(row[3]) + off, float(row[4]) + off])
        per_slot.setdefault(n, [[] for _ in range(g_count)])[g - 1].append(xy)
    slot_positions = {n: [np.array(group) for group in groups]
                      for n, groups in per_slot.items()}

    return SavedRun(config=config, trajectory=Trajectory(points=pts),
                    powers=PowerSchedule(watts=watts), rates=rates,
                    objective=float(kv["objective_nats"]),
                    qos_scale=float(kv["qos_scale"]), mode=kv["mode"],
                    slot_positions=slot_positions)


def trace_from_result(outdir: str | Path) -> UserTrace:
    """Rebuild a UserTrace from a saved run so it can replay offline.

    Requires constant group sizes across slots (an online run with Poisson
    resizing has no dense trace representation).
    """
    saved = load_result(outdir)
    cfg = saved.config
    groups: list[np.ndarray] = []
    for g in range(cfg.num_groups):
        per_slot = []
        for n in range(1, cfg.num_slots + 1):
            if n not in saved.slot_positions:
                raise LoadError(f"trace.csv has no rows for slot {n}")
            per_slot.append(saved.slot_positions[n][g])
        sizes = {p.shape[0] for p in per_slot}
        if len(sizes) != 1:
            raise LoadError(f"group {g + 1} changes size across slots; "
                            "a dense trace cannot represent it")
        groups.append(np.stack(per_slot, axis=1))
    return UserTrace(positions=groups)


def verify_result(outdir: str | Path, rel_tol: float = 1e-6) -> list[str]:
    """Recompute rates/objective and re-check constraints; returns problems."""
    saved = load_result(outdir)
    cfg = saved.config
    problems: list[str] = []

    recomputed = np.zeros_like(saved.rates)
    for n in range(1, cfg.num_slots + 1):
        if n not in saved.slot_positions:
            problems.append(f"trace.csv has no rows for slot {n}")
            continue
        st = model.slot_state(saved.trajectory.points[n], saved.slot_positions[n],
                              cfg.altitude, cfg.pathloss_ref)
        recomputed[:, n - 1] = model.slot_capacities(
            saved.powers.watts[:, n - 1], st, cfg.noise_power)
    obj = float(recomputed.sum())
    if abs(obj - saved.objective) > rel_tol * max(1.0, abs(saved.objective)):
        problems.append(f"objective mismatch: recomputed {obj!r} vs stored "
                        f"{saved.objective!r}")

    steps = np.linalg.norm(np.diff(saved.trajectory.points, axis=0), axis=1)
    for n, step in enumerate(steps, start=1):
        if step > cfg.s_max + 1e-4:   # table rounding allows ~1e-7 m slack
            problems.append(f"speed violation at slot {n}: step {step:.6g} m")
    sums = saved.powers.watts.sum(axis=0)
    for n in range(1, cfg.num_slots + 1):
        if sums[n - 1] > cfg.p_max + 1e-6:
            problems.append(f"sum_power violation at slot {n}: {sums[n - 1]:.9g} W")
    scaled = cfg.min_rate * saved.qos_scale
    for g in range(cfg.num_groups):
        for n in range(1, cfg.num_slots + 1):
            if recomputed[g, n - 1] < scaled[g, n - 1] - 1e-5:
                problems.append(f"min_rate violation at slot {n} group {g + 1}")
    return problems
