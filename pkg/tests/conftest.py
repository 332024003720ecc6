import numpy as np
import pytest

from uavcast import model


def make_config(num_groups=1, users_per_group=None, num_slots=2, horizon=8.0,
                v_max=10.0, p_max=2.0, min_rate_nats=0.0, start=(-20.0, 0.0),
                end=(20.0, 0.0), seed=0, **kwargs) -> model.ScenarioConfig:
    """Small internal-frame scenario with the usual physical constants."""
    users = users_per_group or (1,) * num_groups
    return model.internal_frame_config(
        name=kwargs.pop("name", "test"),
        num_groups=num_groups,
        users_per_group=tuple(users),
        num_slots=num_slots,
        horizon=horizon,
        v_max=v_max,
        altitude=kwargs.pop("altitude", 25.0),
        p_max=p_max,
        noise_power=kwargs.pop("noise_power", 1e-9),
        pathloss_ref=kwargs.pop("pathloss_ref", 1e-3),
        coverage_radius=kwargs.pop("coverage_radius", 50.0),
        start_point=start,
        end_point=end,
        min_rate=min_rate_nats,
        rng_seed=seed,
        **kwargs,
    )


def fixed_trace(config: model.ScenarioConfig, groups) -> model.UserTrace:
    """Static trace from original-frame positions, one list of (x, y) per group."""
    arrays = []
    for pts in groups:
        arr = np.asarray(pts, dtype=float) + config.coord_offset
        arrays.append(np.repeat(arr[:, None, :], config.num_slots, axis=1))
    return model.UserTrace(positions=arrays)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
