"""User movement: lattice-direction random walk inside the coverage disk.

Each user draws, per slot, a direction from the eight compass angles and a
speed uniform on a closed interval; overshoots reflect specularly off the
disk boundary.  Group sizes can vary per slot from a Poisson target with
LIFO departures.  Every stream is derived from (seed, group, user) so runs
are reproducible and independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ScenarioConfig, UserTrace

DIRECTIONS = np.array([k * math.pi / 4.0 for k in range(8)])
_SIZE_STREAM = 0x5153  # sub-stream tag for group-size draws
_MAX_BOUNCES = 16


@dataclass
class MobilityConfig:
    speed_range: tuple[float, float]   # [v1, v2] m/s
    coverage_radius: float
    disk_center: np.ndarray
    slot_duration: float
    poisson_lambda: float = 0.0

    def validate(self) -> None:
        v1, v2 = self.speed_range
        if not (0.0 <= v1 <= v2):
            raise ValueError("speed range must satisfy 0 <= v1 <= v2")
        if self.poisson_lambda < 0.0:
            raise ValueError("poisson_lambda must be non-negative")


def mobility_from_config(config: ScenarioConfig) -> MobilityConfig:
    return MobilityConfig(speed_range=config.user_speed_range,
                          coverage_radius=config.coverage_radius,
                          disk_center=config.disk_center,
                          slot_duration=config.slot_duration,
                          poisson_lambda=config.poisson_lambda)


def user_rng(seed: int, group: int, user: int) -> np.random.Generator:
    return np.random.default_rng((seed, group, user))


def uniform_disk_point(rng: np.random.Generator, center: np.ndarray,
                       radius: float) -> np.ndarray:
    r = radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return center + r * np.array([math.cos(theta), math.sin(theta)])


def reflect_into_disk(start: np.ndarray, end: np.ndarray, center: np.ndarray,
                      radius: float) -> np.ndarray:
    """Specular reflection of the segment start->end at the disk boundary."""
    p0, p1 = start.copy(), end.copy()
    for _ in range(_MAX_BOUNCES):
        if np.linalg.norm(p1 - center) <= radius:
            return p1
        d = p1 - p0
        f = p0 - center
        a = float(d @ d)
        b = 2.0 * float(f @ d)
        c = float(f @ f) - radius ** 2
        disc = b * b - 4.0 * a * c
        if a == 0.0 or disc < 0.0:
            break
        tau = (-b + math.sqrt(disc)) / (2.0 * a)
        tau = min(max(tau, 0.0), 1.0)
        hit = p0 + tau * d
        normal = (hit - center) / radius
        rest = p1 - hit
        p0, p1 = hit, hit + rest - 2.0 * float(rest @ normal) * normal
    # Degenerate numerics: clamp radially as a last resort.
    off = p1 - center
    return center + off * (radius / np.linalg.norm(off))


def step_user(position: np.ndarray, rng: np.random.Generator,
              mobility: MobilityConfig) -> np.ndarray:
    """One slot of movement: lattice direction, uniform speed, reflected."""
    theta = DIRECTIONS[rng.integers(0, DIRECTIONS.size)]
    v1, v2 = mobility.speed_range
    speed = rng.uniform(v1, v2)
    disp = speed * mobility.slot_duration * np.array([math.cos(theta), math.sin(theta)])
    return reflect_into_disk(position, position + disp,
                             mobility.disk_center, mobility.coverage_radius)


def generate_trace(config: ScenarioConfig,
                   mobility: MobilityConfig | None = None) -> UserTrace:
    """Seed-deterministic trace: uniform placement, then per-slot walk."""
    mobility = mobility_from_config(config) if mobility is None else mobility
    mobility.validate()
    static = mobility.speed_range[1] == 0.0
    groups = []
    for g in range(config.num_groups):
        u_count = config.users_per_group[g]
        arr = np.zeros((u_count, config.num_slots, 2))
        for u in range(u_count):
            rng = user_rng(config.rng_seed, g, u)
            pos = uniform_disk_point(rng, mobility.disk_center, mobility.coverage_radius)
            arr[u, 0] = pos
            for n in range(1, config.num_slots):
                pos = pos if static else step_user(pos, rng, mobility)
                arr[u, n] = pos
        groups.append(arr)
    return UserTrace(positions=groups)


def vary_group_sizes(current_sizes: list[int], lam: float,
                     rng: np.random.Generator) -> tuple[list[int], list[list[int]], list[list[int]]]:
    """Per-group Poisson targets (clamped to >= 1) with arrival/departure lists.

    Departures are LIFO on arrival index so long-lived users persist;
    arrival indices continue past the current maximum.
    """
    new_sizes: list[int] = []
    arrivals: list[list[int]] = []
    departures: list[list[int]] = []
    for g, size in enumerate(current_sizes):
        target = max(1, int(rng.poisson(lam)))
        if target > size:
            arrivals.append(list(range(size, target)))
            departures.append([])
        elif target < size:
            arrivals.append([])
            departures.append(list(range(target, size)))
        else:
            arrivals.append([])
            departures.append([])
        new_sizes.append(target)
    return new_sizes, arrivals, departures


@dataclass
class DynamicPopulation:
    """Per-slot user population for online runs with varying group sizes.

    Maintains one walker per (group, arrival index); resizing reuses the
    lowest indices so retained users keep their walk state.
    """

    config: ScenarioConfig
    mobility: MobilityConfig
    sizes: list[int] = field(default_factory=list)
    _positions: list[list[np.ndarray]] = field(default_factory=list)
    _rngs: list[list[np.random.Generator]] = field(default_factory=list)
    _next_uid: list[int] = field(default_factory=list)
    _size_rng: np.random.Generator | None = None

    def __post_init__(self):
        self.mobility.validate()
        self.sizes = list(self.config.users_per_group)
        self._positions = [[] for _ in range(self.config.num_groups)]
        self._rngs = [[] for _ in range(self.config.num_groups)]
        self._next_uid = [0] * self.config.num_groups
        self._size_rng = np.random.default_rng((self.config.rng_seed, _SIZE_STREAM))

    def _spawn(self, g: int) -> None:
        # Fresh arrival index per group so re-arrivals draw new streams.
        uid = self._next_uid[g]
        self._next_uid[g] += 1
        rng = user_rng(self.config.rng_seed, g, uid)
        pos = uniform_disk_point(rng, self.mobility.disk_center,
                                 self.mobility.coverage_radius)
        self._rngs[g].append(rng)
        self._positions[g].append(pos)

    def _resize(self) -> None:
        new_sizes, _, _ = vary_group_sizes(
            self.sizes, self.mobility.poisson_lambda, self._size_rng)
        for g in range(self.config.num_groups):
            while len(self._positions[g]) < new_sizes[g]:
                self._spawn(g)
            del self._positions[g][new_sizes[g]:]
            del self._rngs[g][new_sizes[g]:]
        self.sizes = new_sizes

    def advance(self, slot: int) -> list[np.ndarray]:
        """Positions observed at the start of `slot` (1-based)."""
        static = self.mobility.speed_range[1] == 0.0
        if slot == 1:
            if self.mobility.poisson_lambda > 0.0:
                self.sizes, _, _ = vary_group_sizes(
                    self.sizes, self.mobility.poisson_lambda, self._size_rng)
            for g in range(self.config.num_groups):
                for _ in range(self.sizes[g]):
                    self._spawn(g)
        else:
            if not static:
                for g in range(self.config.num_groups):
                    for u in range(len(self._positions[g])):
                        self._positions[g][u] = step_user(
                            self._positions[g][u], self._rngs[g][u], self.mobility)
            if self.mobility.poisson_lambda > 0.0:
                self._resize()
        return [np.array(self._positions[g]) for g in range(self.config.num_groups)]
