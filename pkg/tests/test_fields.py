import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from supremal.errors import CoercivityViolation, OutOfBounds, UnknownField
from supremal.fields import (
    BoundaryDatum,
    CoercivityTag,
    Domain,
    GridSpec,
    ScalarField,
    builtin,
    builtin_names,
    load_field,
    random_fourier_field,
    sample,
    save_field,
)

CLOSED_FORMS = {
    "double-well-1d": lambda x: (x[:, 0] ** 2 - 1) ** 2,
    "example-4-5": lambda x: (x[:, 0] ** 2 - 1) ** 2 + x[:, 1] ** 2,
    "halfline-kink": lambda x: np.where(x[:, 0] <= 0, -x[:, 0], 0.0),
    "dist-halfplane": lambda x: np.maximum(-x[:, 0], 0.0),
    "abs": lambda x: np.abs(x[:, 0]),
    "abs-2d": lambda x: np.hypot(x[:, 0], x[:, 1]),
    "sq-norm": lambda x: x[:, 0] ** 2 + x[:, 1] ** 2,
    "sq-norm-1d": lambda x: x[:, 0] ** 2,
    "max-norm": lambda x: np.max(np.abs(x), axis=1),
    "four-well": lambda x: np.min(
        [np.sum((x - w) ** 2, axis=1) for w in ([1, 0], [-1, 0], [0, 1], [0, -1])], axis=0),
    "two-disc-well": lambda x: np.maximum(
        np.minimum(np.hypot(x[:, 0] - 1, x[:, 1]), np.hypot(x[:, 0] + 1, x[:, 1])) - 0.5, 0.0) ** 2,
}


def test_registry_is_covered():
    assert set(builtin_names()) == set(CLOSED_FORMS)


@pytest.mark.parametrize("name", sorted(CLOSED_FORMS))
def test_builtin_matches_closed_form(name, rng):
    f = builtin(name)
    pts = rng.uniform(-3, 3, (1000, f.dim))
    got = f.eval(pts if f.dim == 2 else pts[:, 0])
    np.testing.assert_array_equal(got, CLOSED_FORMS[name](pts))


@pytest.mark.parametrize("name", sorted(CLOSED_FORMS))
def test_builtin_respects_coercivity_tag(name, rng):
    f = builtin(name)
    if f.coercivity is None:
        pytest.skip("untagged field")
    pts = rng.uniform(-6, 6, (4000, f.dim))
    vals = f.eval(pts if f.dim == 2 else pts[:, 0])
    assert np.all(vals - f.coercivity.gamma(np.linalg.norm(pts, axis=1)) >= -1e-12)


def test_unknown_builtin():
    with pytest.raises(UnknownField):
        builtin("no-such-field")


def test_scalar_and_array_evaluation():
    f = builtin("example-4-5")
    assert f.eval([0.0, 0.0]) == 1.0
    assert f.eval(np.zeros((3, 4, 2))).shape == (3, 4)
    g = builtin("abs")
    assert g.eval(-2.5) == 2.5
    assert g.eval(np.array([-1.0, 2.0])).tolist() == [1.0, 2.0]


def test_sampled_field_out_of_bounds():
    f = sample(builtin("abs"), GridSpec(-1, 1, 5))
    with pytest.raises(OutOfBounds):
        f.eval(1.5)


def test_sampled_coercivity_violation():
    grid = GridSpec(-2, 2, 5)
    with pytest.raises(CoercivityViolation):
        ScalarField.sampled(grid, np.zeros(5), CoercivityTag(1.0, 2.0, 0.0))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(0, 0, 5)
    with pytest.raises(ValueError):
        GridSpec((0, 0), (1, 1), (1, 3))
    g = GridSpec((-1, -2), (1, 2), 3)
    assert g.shape == (3, 3)
    assert g.nodes()[1].tolist() == [-1.0, 0.0]


@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_interpolation_reproduces_nodes(nx, ny, seed):
    grid = GridSpec((-1.3, 0.2), (0.7, 2.9), (nx, ny))
    vals = np.random.default_rng(seed).normal(size=grid.shape)
    f = ScalarField.sampled(grid, vals)
    np.testing.assert_array_equal(f.eval(grid.nodes()), vals.ravel())


@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_interpolation_reproduces_nodes_1d(n, seed):
    grid = GridSpec(-2.0, 3.5, n)
    vals = np.random.default_rng(seed).normal(size=n)
    f = ScalarField.sampled(grid, vals)
    np.testing.assert_array_equal(f.eval(grid.nodes()[:, 0]), vals)


@given(st.integers(0, 2**31 - 1))
def test_random_fourier_fields_are_coercive(seed):
    f = random_fourier_field(np.random.default_rng(seed))
    x = np.linspace(-8, 8, 801)
    assert np.all(f.eval(x) >= f.coercivity.gamma(np.abs(x)) - 1e-12)


def test_field_round_trip(tmp_path):
    f = sample(builtin("four-well"), GridSpec((-2, -2), (2, 2), 9))
    save_field(f, tmp_path / "f.json")
    g = load_field(tmp_path / "f.json")
    np.testing.assert_array_equal(g.values, f.values)
    assert g.grid == f.grid and g.coercivity == f.coercivity
    assert json.dumps(g.to_dict()) == json.dumps(f.to_dict())
    h = ScalarField.from_dict(builtin("abs").to_dict())
    assert h.expression == "abs(x)"


def test_field_file_rejects_unknown_keys():
    with pytest.raises(ValueError):
        ScalarField.from_dict({"dim": 1, "expression": "x", "colour": "red"})


def test_domain_orientation_and_measure():
    d = Domain.polygon([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert d.measure == 1.0
    n, b = d.halfplanes()
    assert np.all(d.vertices @ n.T <= b[None, :] + 1e-12)
    assert d.contains([[0.5, 0.5], [1.5, 0.5]]).tolist() == [True, False]
    assert Domain.interval(-1, 3).measure == 4.0
    with pytest.raises(ValueError):
        Domain.polygon([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]])
    assert Domain.from_dict(d.to_dict()).vertices.tolist() == d.vertices.tolist()


def test_boundary_datum():
    u = BoundaryDatum((2.0, -1.0), 0.5)
    assert u([1.0, 1.0]) == 1.5
    assert u(np.array([[0, 0], [1, 0]])).tolist() == [0.5, 2.5]
    assert u.to_dict() == {"kind": "affine", "xi0": [2.0, -1.0], "c": 0.5}
