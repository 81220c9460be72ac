import numpy as np
import pytest
from hypothesis import given, strategies as st

from supremal.config import DEFAULT_TOL
from supremal.convexity import check_level_convex
from supremal.envelope import (
    EnvelopeResult,
    envelope,
    envelope_1d,
    envelope_at,
    envelope_caratheodory,
    envelope_levelsweep,
    lsc_envelope_grid,
    verify_certificate,
)
from supremal.errors import GridTooCoarse, NotCoercive
from supremal.fields import CoercivityTag, GridSpec, ScalarField, builtin, sample
from supremal.oracle import quad_mesh
from supremal.fields import Domain

GRID65 = GridSpec((-2, -2), (2, 2), 65)
GRID17 = GridSpec((-2, -2), (2, 2), 17)
GRID9 = GridSpec((-2, -2), (2, 2), 9)
LINE = GridSpec(-2, 2, 401)


@pytest.fixture(scope="module")
def example_env():
    return envelope(builtin("example-4-5"), GRID65)


def random_field_2d(seed, grid=GRID9):
    rng = np.random.default_rng(seed)
    nodes = grid.nodes()
    bumps = rng.uniform(-1, 1, grid.size)
    vals = np.sum(nodes ** 2, axis=1) + bumps
    return ScalarField.sampled(grid, vals, CoercivityTag(1.0, 2.0, 1.0))


def random_field_1d(seed, n=101):
    rng = np.random.default_rng(seed)
    grid = GridSpec(-2, 2, n)
    x = grid.axes()[0]
    vals = x ** 2 + rng.uniform(-1, 1, n)
    return ScalarField.sampled(grid, vals, CoercivityTag(1.0, 2.0, 1.0))


# fixed values

def test_double_well_envelope_closed_form():
    env = envelope(builtin("double-well-1d"), LINE)
    x = LINE.axes()[0]
    expected = np.where(np.abs(x) <= 1, 0.0, (x ** 2 - 1) ** 2)
    np.testing.assert_allclose(env.values, expected, atol=1e-12)


def test_example_zero_set_is_the_segment(example_env):
    # zero level set of the envelope is [-1, 1] x {0}
    nodes = GRID65.nodes()
    zero = nodes[example_env.values.ravel() <= 1e-12]
    assert np.all(zero[:, 1] == 0) and zero[:, 0].min() == -1 and zero[:, 0].max() == 1
    assert example_env.value_at((0.0, 0.0)) <= 1e-3
    assert example_env.sublevel_hull(0.0).kind == "segment"


def test_example_envelope_on_the_strip(example_env):
    # for |xi1| <= 1 the envelope is xi2**2: (+-1, xi2) lie in the level set
    nodes = GRID65.nodes()
    strip = np.abs(nodes[:, 0]) <= 1
    np.testing.assert_allclose(example_env.values.ravel()[strip], nodes[strip, 1] ** 2, atol=1e-12)


def test_example_off_grid_value(example_env):
    # frozen from the levelsweep hull sequence (553 distinct hulls on 65x65)
    value, cert = envelope_at(example_env, (0.3, 0.1))
    assert value == 0.015625
    assert len(example_env.hulls) == 553
    assert verify_certificate(cert, (0.3, 0.1), value)


def test_certificates_verify(example_env):
    nodes = GRID65.nodes()
    for k in range(0, GRID65.size, 97):
        assert verify_certificate(example_env.certificates[k], nodes[k], example_env.values.ravel()[k])


def test_levelsweep_preconditions():
    with pytest.raises(NotCoercive):
        envelope_levelsweep(builtin("dist-halfplane"), GRID9)
    flat = ScalarField.sampled(GRID9, np.ones(81) * 5, CoercivityTag(1.0, 1.0, 0.0))
    with pytest.raises(GridTooCoarse):
        envelope_levelsweep(flat, GRID9)


def test_lsc_envelope_lowers_annotated_nodes():
    grid = GridSpec(-1, 1, 5)
    f = ScalarField.sampled(grid, [1, 1, 2, 1, 1], limits={2: (0.5, 3.0)})
    assert lsc_envelope_grid(f).values.tolist() == [1, 1, 0.5, 1, 1]
    g = ScalarField.sampled(grid, [1, 1, 2, 1, 1])
    assert lsc_envelope_grid(g) is g


def test_round_trip(tmp_path, example_env):
    example_env.save(tmp_path / "e.csv", tmp_path / "e.json")
    back = EnvelopeResult.load(tmp_path / "e.csv", tmp_path / "e.json")
    np.testing.assert_array_equal(back.values, example_env.values)
    np.testing.assert_array_equal(back.field_values, example_env.field_values)
    assert back.certificates_dict() == example_env.certificates_dict()
    assert envelope_at(back, (0.3, 0.1))[0] == 0.015625


# oracle equivalence

def test_oracle_equivalence_1d(rng):
    for seed in range(5):
        f = random_field_1d(seed)
        env = envelope_1d(f, f.grid)
        nodes = f.grid.nodes()
        for k in rng.choice(f.grid.size, 20, replace=False):
            ref, _ = envelope_caratheodory(f, nodes[k], nodes)
            assert abs(env.values.ravel()[k] - ref) <= DEFAULT_TOL.level


@pytest.mark.parametrize("name", ["example-4-5", "four-well", "two-disc-well"])
def test_oracle_equivalence_2d(name, rng):
    f = sample(builtin(name), GRID17)
    env = envelope_levelsweep(f, GRID17)
    nodes = GRID17.nodes()
    for k in rng.choice(GRID17.size, 20, replace=False):
        ref, cert = envelope_caratheodory(f, nodes[k], nodes)
        assert abs(env.values.ravel()[k] - ref) <= 1e-4
        assert verify_certificate(cert, nodes[k], ref)


# invariants

@given(st.integers(0, 2**31 - 1))
def test_dominance_and_level_convexity_2d(seed):
    f = random_field_2d(seed)
    env = envelope_levelsweep(f, GRID9, certificates=False)
    assert np.all(env.values <= env.field_values + 1e-15)
    assert check_level_convex(env.as_field(), GRID9)


@given(st.integers(0, 2**31 - 1))
def test_dominance_1d(seed):
    f = random_field_1d(seed, 41)
    env = envelope_1d(f, f.grid)
    assert np.all(env.values <= env.field_values)
    assert check_level_convex(env.as_field(), f.grid)


@pytest.mark.parametrize("name", ["sq-norm", "max-norm", "abs-2d"])
def test_equality_for_level_convex_fields(name):
    env = envelope(builtin(name), GRID17)
    np.testing.assert_array_equal(env.values, env.field_values)


@given(st.integers(0, 2**31 - 1))
def test_idempotence(seed):
    f = random_field_2d(seed)
    once = envelope_levelsweep(f, GRID9, certificates=False)
    twice = envelope_levelsweep(once.as_field(), GRID9, certificates=False)
    assert np.max(np.abs(twice.values - once.values)) <= DEFAULT_TOL.level
    g = random_field_1d(seed, 41)
    a = envelope_1d(g, g.grid)
    b = envelope_1d(a.as_field(), g.grid)
    np.testing.assert_array_equal(a.values, b.values)


@given(st.integers(0, 2**31 - 1), st.floats(0, 2))
def test_order_consistency(seed, lift):
    f = random_field_2d(seed)
    bump = np.random.default_rng(seed + 1).uniform(0, lift, GRID9.size)
    g = ScalarField.sampled(GRID9, f.values.ravel() + bump, f.coercivity)
    ef = envelope_levelsweep(f, GRID9, certificates=False)
    eg = envelope_levelsweep(g, GRID9, certificates=False)
    assert np.all(ef.values <= eg.values + DEFAULT_TOL.level)


@pytest.fixture(scope="module")
def jensen_envs():
    return [envelope(builtin(n), GRID17, certificates=False) for n in ("example-4-5", "four-well")]


@given(st.integers(0, 2**31 - 1))
def test_supremal_jensen_on_envelope(jensen_envs, seed):
    rng = np.random.default_rng(seed)
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]]) + rng.uniform(-0.2, 0.2, (4, 2))
    nodes, cells, boundary = quad_mesh(Domain.polygon(corners), 5)
    xibar = rng.uniform(-0.8, 0.8, 2)
    u = nodes @ xibar + np.where(boundary, 0.0, rng.uniform(-0.04, 0.04, len(nodes)))
    p = nodes[cells]
    grads = np.linalg.solve(p[:, 1:] - p[:, :1], (u[cells][:, 1:] - u[cells][:, :1])[..., None])[..., 0]
    a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    areas = 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    np.testing.assert_allclose(areas @ grads / areas.sum(), xibar, atol=1e-9)
    for env in jensen_envs:
        top = max(envelope_at(env, g)[0] for g in grads)
        assert envelope_at(env, xibar)[0] <= top + DEFAULT_TOL.level
