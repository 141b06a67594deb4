import numpy as np
import pytest

from acgd.envs.registries import BlockStackParams, PickAndStowParams
from acgd.params import TaskParam, ParamRegistry, interpolate, sample_value, sample_assignment
from common.domain import ResetClass, ResetMode
from common.errors import ConfigurationError


@pytest.fixture
def registry():
    return BlockStackParams.generate()


def test_interpolate_endpoints():
    param = TaskParam('x', 0.1, 0.2, 0.9, 0.4, -5.0, 5.0)
    assert interpolate(param, 0.0) == (0.1, 0.2)
    assert interpolate(param, 1.0) == pytest.approx((0.9, 0.4), abs=1e-12)


def test_interpolate_midpoint():
    param = TaskParam('x', 0.0, 0.0, 2.0, 0.4, -5.0, 5.0)
    mu, sigma = interpolate(param, 0.5)
    assert mu == pytest.approx(1.0, abs=1e-12)
    assert sigma == pytest.approx(0.2, abs=1e-12)


def test_easiest_assignment_is_deterministic(registry, rng):
    assignment = sample_assignment(registry, 0.0, ResetMode.REGULAR, rng)
    assert assignment.values == {p.name: p.mu_init for p in registry}
    assert assignment.delta_used == 0.0
    assert assignment.reset_mode is ResetMode.REGULAR


def test_demonstration_assignment_skips_regular_only_parameters(registry, rng):
    assignment = sample_assignment(registry, 0.7, ResetMode.DEMONSTRATION, rng)
    regular_only = {p.name for p in registry if p.reset_class is ResetClass.REGULAR_ONLY}
    assert regular_only
    assert not regular_only & set(assignment.values)
    assert set(assignment.values) == {p.name for p in registry if p.demo_compatible}


def test_sampled_moments_at_full_difficulty():
    param = TaskParam('x', 0.0, 0.0, 1.0, 0.2, -10.0, 10.0)
    rng = np.random.default_rng(99)
    samples = np.array([sample_value(param, 1.0, rng) for _ in range(10_000)])
    assert abs(samples.mean() - 1.0) <= 3 * 0.2 / 100
    assert abs(samples.std() - 0.2) <= 0.1 * 0.2


def test_out_of_bounds_draws_are_clamped(rng):
    param = TaskParam('x', 5.0, 0.01, 5.0, 0.01, 0.0, 0.1)
    assert sample_value(param, 0.5, rng) == 0.1


def test_integer_parameters_are_rounded(rng):
    param = TaskParam('steps', 10.0, 3.0, 20.0, 3.0, 10.0, 25.0, integer=True)
    values = [sample_value(param, 0.5, rng) for _ in range(200)]
    assert all(v == int(v) and 10 <= v <= 25 for v in values)


def test_uniform_distribution_stays_in_bounds(rng):
    param = TaskParam('u', 0.5, 0.1, 0.5, 0.1, 0.0, 1.0, distribution='uniform')
    values = np.array([sample_value(param, 1.0, rng) for _ in range(1000)])
    half_width = np.sqrt(3.0) * 0.1
    assert values.min() >= 0.5 - half_width
    assert values.max() <= 0.5 + half_width


def test_empty_registry_gives_empty_assignment(rng):
    assert sample_assignment(ParamRegistry(), 0.5, ResetMode.REGULAR, rng).values == {}


def test_delta_outside_unit_interval(registry, rng):
    with pytest.raises(ValueError):
        sample_assignment(registry, 1.5, ResetMode.REGULAR, rng)


def test_task_param_validation():
    with pytest.raises(ConfigurationError):
        TaskParam('x', 0.0, -1.0, 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        TaskParam('x', 0.0, 0.0, 0.0, 0.0, 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        TaskParam('x', 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, distribution='cauchy')


def test_registry_config_round_trip(registry):
    restored = ParamRegistry.from_config(registry.to_config())
    assert restored.names == registry.names
    assert list(restored) == list(registry)


def test_registry_override(registry):
    declaration = registry['block_distance'].to_dict()
    declaration['mu_end'] = 0.4
    overridden = registry.override([declaration])
    assert overridden['block_distance'].mu_end == 0.4
    assert overridden.names == registry.names

    with pytest.raises(ConfigurationError):
        registry.override([dict(declaration, name='no_such_parameter')])


def test_registry_rejects_duplicates():
    param = TaskParam('x', 0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        ParamRegistry([param, param])


def test_subclass_registries_replace_shared_declarations():
    stow = PickAndStowParams.generate()
    stack = BlockStackParams.generate()
    assert stow['block_size'].mu_init != stack['block_size'].mu_init
    assert 'gripper_speed' in stow.names and 'gripper_speed' in stack.names
    assert 'box_width' in stow.names and 'box_width' not in stack.names
