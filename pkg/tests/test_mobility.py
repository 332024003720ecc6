"""Random-walk mobility: direction lattice, disk containment and reflection,
distributional sanity, Poisson group resizing, and determinism."""

import math

import numpy as np
import pytest

from uavcast import mobility
from uavcast.mobility import (DIRECTIONS, DynamicPopulation, MobilityConfig,
                              generate_trace, reflect_into_disk, step_user,
                              vary_group_sizes)

from conftest import make_config


class FakeRng:
    """Deterministic stand-in exposing the two draws step_user makes."""

    def __init__(self, direction_index, speed):
        self._dir = direction_index
        self._speed = speed

    def integers(self, lo, hi):
        return self._dir

    def uniform(self, lo=0.0, hi=1.0):
        return self._speed


def disk_mobility(speed=(0.0, 3.0), radius=50.0, slot=2.0, lam=0.0):
    return MobilityConfig(speed_range=speed, coverage_radius=radius,
                          disk_center=np.array([101.0, 101.0]),
                          slot_duration=slot, poisson_lambda=lam)


class TestStepUser:
    def test_zero_speed_stays_put(self, rng):
        mob = disk_mobility(speed=(0.0, 0.0))
        pos = mob.disk_center + np.array([3.0, -4.0])
        assert np.array_equal(step_user(pos, rng, mob), pos)

    def test_axis_aligned_displacement(self):
        mob = disk_mobility(speed=(2.0, 2.0), slot=2.0)
        pos = mob.disk_center.copy()
        new = step_user(pos, FakeRng(direction_index=0, speed=2.0), mob)
        assert np.allclose(new - pos, [4.0, 0.0], atol=1e-12)

    def test_diagonal_displacement(self):
        mob = disk_mobility(speed=(1.0, 1.0), slot=2.0)
        pos = mob.disk_center.copy()
        new = step_user(pos, FakeRng(direction_index=1, speed=1.0), mob)
        assert np.allclose(new - pos, [2 / math.sqrt(2), 2 / math.sqrt(2)], atol=1e-12)

    def test_direction_frequencies_and_containment(self):
        mob = disk_mobility(speed=(0.5, 3.0))
        rng = np.random.default_rng(7)
        pos = mob.disk_center.copy()
        counts = np.zeros(8)
        n = 100_000
        for _ in range(n):
            new = step_user(pos, rng, mob)
            assert np.linalg.norm(new - mob.disk_center) <= mob.coverage_radius + 1e-9
            delta = new - pos
            if np.linalg.norm(delta) > 1e-12:
                ang = math.atan2(delta[1], delta[0]) % (2 * math.pi)
                idx = int(round(ang / (math.pi / 4))) % 8
                # reflected steps leave the lattice; skip those for the tally
                if abs(ang - DIRECTIONS[idx]) < 1e-9:
                    counts[idx] += 1
            pos = new
        total = counts.sum()
        p = 1.0 / 8.0
        sigma = math.sqrt(p * (1 - p) * total)
        assert np.abs(counts - total * p).max() <= 3.0 * sigma


class TestReflection:
    def test_specular_reflection_preserves_path_length(self):
        center = np.array([0.0, 0.0])
        start = np.array([48.0, 0.0])
        end = np.array([53.0, 0.0])  # 5 m path, 2 m beyond the rim
        out = reflect_into_disk(start, end, center, 50.0)
        assert np.linalg.norm(out - center) <= 50.0 + 1e-9
        hit = np.array([50.0, 0.0])
        travelled = np.linalg.norm(hit - start) + np.linalg.norm(out - hit)
        assert travelled == pytest.approx(5.0, abs=1e-9)
        assert out == pytest.approx([47.0, 0.0])

    def test_oblique_reflection_stays_inside(self, rng):
        center = np.array([0.0, 0.0])
        for _ in range(200):
            ang = rng.uniform(0, 2 * math.pi)
            start = 49.0 * np.array([math.cos(ang), math.sin(ang)])
            end = start + rng.uniform(-6, 6, size=2)
            out = reflect_into_disk(start, end, center, 50.0)
            assert np.linalg.norm(out - center) <= 50.0 + 1e-9


class TestGenerateTrace:
    def test_deterministic(self):
        cfg = make_config(num_groups=2, users_per_group=(3, 2), num_slots=5,
                          horizon=10.0, user_speed_range=(0.0, 3.0), seed=42)
        t1, t2 = generate_trace(cfg), generate_trace(cfg)
        for a, b in zip(t1.positions, t2.positions):
            assert np.array_equal(a, b)

    def test_zero_speed_reduces_to_static(self):
        cfg = make_config(num_groups=2, users_per_group=(2, 2), num_slots=4,
                          user_speed_range=(0.0, 0.0), seed=3)
        trace = generate_trace(cfg)
        assert trace.is_static()

    def test_containment_all_slots(self):
        cfg = make_config(num_groups=3, users_per_group=(4, 4, 4), num_slots=8,
                          horizon=16.0, user_speed_range=(0.0, 3.0), seed=9)
        trace = generate_trace(cfg)
        trace.validate_containment(cfg.disk_center, cfg.coverage_radius)

    def test_initial_positions_disk_uniform_ks(self):
        # r^2/R^2 of a uniform disk point is Uniform(0,1); KS at alpha = 0.01
        cfg = make_config(num_groups=1, users_per_group=(2000,), num_slots=1,
                          horizon=5.0, seed=11)
        trace = generate_trace(cfg)
        pts = trace.positions[0][:, 0, :]
        u = np.sort(np.sum((pts - cfg.disk_center) ** 2, axis=1) / cfg.coverage_radius ** 2)
        n = u.size
        grid = np.arange(1, n + 1) / n
        ks = max(np.abs(grid - u).max(), np.abs(u - (grid - 1.0 / n)).max())
        assert ks <= 1.628 / math.sqrt(n)  # critical value at alpha = 0.01

    def test_nested_users_extend_prior_ones(self):
        small = make_config(num_groups=2, users_per_group=(3, 3), num_slots=3,
                            user_speed_range=(0.0, 3.0), horizon=6.0, seed=5)
        large = make_config(num_groups=2, users_per_group=(5, 5), num_slots=3,
                            user_speed_range=(0.0, 3.0), horizon=6.0, seed=5)
        ts, tl = generate_trace(small), generate_trace(large)
        for g in range(2):
            assert np.array_equal(tl.positions[g][:3], ts.positions[g])


class TestGroupSizeVariation:
    def test_mean_of_clamped_draws(self):
        lam = 5.0
        rng = np.random.default_rng(13)
        draws = []
        sizes = [3]
        for _ in range(100_000):
            sizes, _, _ = vary_group_sizes(sizes, lam, rng)
            draws.append(sizes[0])
        draws = np.asarray(draws, dtype=float)
        # clamped mean: E[max(1, X)] = lam + P(X = 0) for Poisson(lam)
        want = lam + math.exp(-lam)
        sigma = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - want) <= 3.0 * sigma

    def test_clamp_floor_at_tiny_lambda(self):
        rng = np.random.default_rng(3)
        sizes = [4, 2, 7]
        for _ in range(200):
            sizes, _, _ = vary_group_sizes(sizes, 1e-9, rng)
            assert sizes == [1, 1, 1]

    def test_arrival_departure_lists(self):
        rng = np.random.default_rng(1)
        sizes, arrivals, departures = vary_group_sizes([3], 40.0, rng)
        assert sizes[0] > 3 and arrivals[0] == list(range(3, sizes[0]))
        sizes2, arrivals2, departures2 = vary_group_sizes([50], 1e-9, rng)
        assert sizes2 == [1] and departures2[0] == list(range(1, 50))


class TestDynamicPopulation:
    def _population(self, lam, seed=17):
        cfg = make_config(num_groups=2, users_per_group=(3, 3), num_slots=6,
                          horizon=12.0, user_speed_range=(0.0, 3.0),
                          poisson_lambda=lam, seed=seed)
        return cfg, DynamicPopulation(config=cfg,
                                      mobility=mobility.mobility_from_config(cfg))

    def test_lambda_zero_keeps_configured_sizes(self):
        cfg, pop = self._population(0.0)
        for n in range(1, 7):
            pos = pop.advance(n)
            assert [p.shape[0] for p in pos] == [3, 3]

    def test_departures_are_lifo(self):
        cfg, pop = self._population(4.0, seed=23)
        prev = pop.advance(1)
        for n in range(2, 7):
            before = [p.copy() for p in pop._positions]
            rngs_before = [list(r) for r in pop._rngs]
            cur = pop.advance(n)
            for g in range(2):
                kept = min(len(before[g]), cur[g].shape[0])
                # survivors occupy the same leading indices (LIFO departures)
                assert len(pop._rngs[g][:kept]) == kept
                assert all(a is b for a, b in zip(rngs_before[g][:kept],
                                                  pop._rngs[g][:kept]))

    def test_containment_and_determinism(self):
        cfg, pop1 = self._population(5.0, seed=31)
        _, pop2 = self._population(5.0, seed=31)
        for n in range(1, 7):
            a, b = pop1.advance(n), pop2.advance(n)
            for pa, pb in zip(a, b):
                assert np.array_equal(pa, pb)
                assert np.all(np.linalg.norm(pa - cfg.disk_center, axis=1)
                              <= cfg.coverage_radius + 1e-9)
