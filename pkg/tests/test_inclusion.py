import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from supremal.errors import NotBracketed, NotInteriorPoint, VerdictWasNotExists
from supremal.fields import BoundaryDatum, Domain, GridSpec, builtin
from supremal.geometry import PointLocation, hull, locate
from supremal.inclusion import (
    InclusionTarget,
    PiecewiseAffineFunction,
    affine_solution,
    pyramid_cell,
    pyramid_function,
    solve_P,
    vitali_fill,
    zigzag_1d,
)

FOUR = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
QUAD = Domain.polygon([[0, 0], [1, 0], [1, 0.6], [0.2, 1]])
UNIT = Domain.interval(0.0, 1.0)


def in_set(grads, E, tol=1e-9):
    d = np.linalg.norm(grads[:, None, :] - E[None, :, :], axis=2)
    return bool(np.all(d.min(axis=1) <= tol))


def test_zigzag_double_well():
    u = zigzag_1d(InclusionTarget([[-1.0], [1.0]], [0.0]), UNIT, 4)
    assert u.sup_deviation() == 0.125
    assert set(u.gradients()[:, 0]) == {-1.0, 1.0}
    assert u.values[0] == 0.0 and u.values[-1] == 0.0
    assert u.residual_fraction == 0.0
    np.testing.assert_allclose(u.nodal_gradients(), u.gradients(), atol=1e-12)


def test_zigzag_uses_nearest_bracket():
    u = zigzag_1d(InclusionTarget([[-3.0], [-1.0], [0.5], [2.0]], [0.0]), UNIT, 3, c=1.0)
    assert set(u.gradients()[:, 0]) == {-1.0, 0.5}
    assert u.evaluate([[0.0], [1.0]]).tolist() == [1.0, 1.0]


def test_zigzag_in_set_is_affine():
    u = zigzag_1d(InclusionTarget([[0.3], [2.0]], [0.3]), UNIT)
    assert len(u.cells) == 1 and u.sup_deviation() == 0.0


def test_zigzag_needs_bracket():
    with pytest.raises(NotBracketed):
        zigzag_1d(InclusionTarget([[1.0], [2.0]], [0.0]), UNIT)


def test_four_well_pyramid_is_a_square():
    body, u = pyramid_cell(InclusionTarget(FOUR, [0.0, 0.0]))
    assert sorted(map(tuple, body.vertices.tolist())) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert in_set(u.gradients(), FOUR)
    np.testing.assert_allclose(u.nodal_gradients(), u.gradients(), atol=1e-12)
    assert u.values[0] == 1.0 and np.all(u.values[1:] == 0.0)


def test_diagonal_wells_give_a_diamond():
    E = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    body, _ = pyramid_cell(InclusionTarget(E, [0.0, 0.0]))
    assert sorted(map(tuple, body.vertices.tolist())) == [(-1, 0), (0, -1), (0, 1), (1, 0)]


def test_pyramid_in_set_is_affine():
    u = pyramid_function(InclusionTarget(FOUR, [1.0, 0.0]))
    assert np.all(u.gradients() == [1.0, 0.0])


def test_vitali_four_well_on_quad():
    u = vitali_fill(InclusionTarget(FOUR, [0.0, 0.0]), QUAD, residual_tol=1e-2)
    assert u.residual_fraction <= 1e-2 and not u.residual_too_large
    assert in_set(u.gradients(), FOUR)
    assert np.max(np.abs(u.mean_gradient())) <= 1e-9
    assert np.all(QUAD.contains(u.nodes, 1e-12))


def test_vitali_reports_when_budget_runs_out():
    u = vitali_fill(InclusionTarget(FOUR, [0.0, 0.0]), QUAD, residual_tol=1e-4, max_cells=50)
    assert u.residual_too_large and u.residual_fraction > 1e-4


@pytest.mark.parametrize("scale", [0.2, 0.1, 0.05])
def test_vitali_scale_cap_bounds_distance(scale):
    # greedy placement puts the largest copies first, so a small budget suffices
    u = vitali_fill(InclusionTarget(FOUR, [0.0, 0.0]), Domain.box(), residual_tol=5e-2, max_scale=scale,
                    max_cells=200)
    # the pyramid has height r over the datum
    assert u.sup_deviation() == pytest.approx(scale, rel=1e-12)


def test_solve_double_well():
    u, rep = solve_P(builtin("double-well-1d"), 0.0, GridSpec(-2, 2, 401), UNIT, pieces=4)
    assert rep.ess_sup == 0.0 and rep.relaxed_value == 0.0 and rep.sup_distance == 0.125
    assert rep.to_dict()["verdict"]["decision"] == "exists"


def test_solve_four_well():
    u, rep = solve_P(builtin("four-well"), (0.0, 0.0), GridSpec((-2, -2), (2, 2), 65), QUAD)
    assert rep.ess_sup == 0.0 and rep.residual_fraction <= 1e-2


def test_solve_refuses_after_not_exists():
    with pytest.raises(VerdictWasNotExists):
        solve_P(builtin("example-4-5"), (0.0, 0.0), GridSpec((-2, -2), (2, 2), 33), Domain.box())


def test_solve_in_level_set_is_affine():
    u, rep = solve_P(builtin("abs"), 1.5, GridSpec(-2, 2, 81), UNIT)
    assert len(u.cells) == 1 and rep.ess_sup == 1.5


def test_round_trip(tmp_path):
    u = vitali_fill(InclusionTarget(FOUR, [0.0, 0.0]), QUAD, residual_tol=0.1)
    u.save(tmp_path / "m.json", tmp_path / "g.csv")
    back = PiecewiseAffineFunction.load(tmp_path / "m.json")
    assert back.to_dict() == u.to_dict()
    np.testing.assert_array_equal(back.gradients(), u.gradients())
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert len(lines) == len(u.cells) + 1


# invariants

angles = st.lists(st.floats(0, 2 * np.pi, allow_nan=False), min_size=3, max_size=7, unique=True)


def random_target(angs, radii_seed, centre=(0.3, -0.2)):
    rng = np.random.default_rng(radii_seed)
    r = rng.uniform(0.5, 2.0, len(angs))
    E = np.asarray(centre) + np.column_stack([r * np.cos(angs), r * np.sin(angs)])
    return E


@given(angles, st.integers(0, 2**31 - 1))
def test_pyramid_gradients_in_set_and_trace_is_affine(angs, seed):
    E = random_target(angs, seed)
    xi0 = np.array([0.3, -0.2])
    body = hull(E)
    assume(body.kind == "polygon" and body.signed_distance(xi0[None, :])[0] > 1e-3)
    _, u = pyramid_cell(InclusionTarget(E, xi0))
    assert in_set(u.gradients(), E)
    np.testing.assert_allclose(u.nodal_gradients(), u.gradients(), atol=1e-8 * max(1, np.abs(u.nodes).max()))
    # rim nodes carry the datum exactly
    assert np.all(u.values[1:] == u.datum(u.nodes[1:]))
    np.testing.assert_allclose(u.mean_gradient(), xi0, atol=1e-9)


@given(angles, st.integers(0, 2**31 - 1))
def test_vitali_invariants(angs, seed):
    E = random_target(angs, seed)
    xi0 = np.array([0.3, -0.2])
    body = hull(E)
    assume(body.kind == "polygon" and body.signed_distance(xi0[None, :])[0] > 1e-2)
    u = vitali_fill(InclusionTarget(E, xi0), QUAD, residual_tol=0.3, max_cells=100)
    assert in_set(u.gradients(), E)
    np.testing.assert_allclose(u.mean_gradient(), xi0, atol=1e-9)
    boundary = QUAD.boundary_samples(8)
    np.testing.assert_array_equal(u.evaluate(boundary), u.datum(boundary))


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=6), st.floats(-3, 3))
def test_one_dimensional_necessity(E, xi0):
    E = np.array(E)
    bracketed = E.min() < xi0 < E.max() or np.any(np.abs(E - xi0) <= 1e-9)
    target = InclusionTarget(E[:, None], [xi0])
    if bracketed:
        u = zigzag_1d(target, UNIT)
        assert in_set(u.gradients(), E[:, None])
    else:
        with pytest.raises(NotBracketed):
            zigzag_1d(target, UNIT)


@given(angles, st.integers(0, 2**31 - 1), st.floats(0, 1), st.booleans())
def test_two_dimensional_necessity(angs, seed, t, outside):
    E = random_target(angs, seed)
    body = hull(E)
    assume(body.kind == "polygon")
    v = body.vertices
    k = seed % len(v)
    xi0 = (1 - t) * v[k] + t * v[(k + 1) % len(v)]  # on an edge
    if outside:
        _, _, n = body.edges()
        xi0 = xi0 + 0.1 * n[k]
    assume(np.min(np.linalg.norm(E - xi0, axis=1)) > 1e-6)
    assert locate(body, xi0) is not PointLocation.INTERIOR
    with pytest.raises(NotInteriorPoint):
        InclusionTarget(E, xi0).validate()
    with pytest.raises(NotInteriorPoint):
        pyramid_cell(InclusionTarget(E, xi0))
    with pytest.raises(NotInteriorPoint):
        vitali_fill(InclusionTarget(E, xi0), QUAD)


@given(st.floats(-1.9, 1.9), st.floats(0.05, 2), st.floats(0.05, 2), st.integers(1, 40))
def test_zigzag_closeness_halves(xi0, down, up, pieces):
    E = np.array([[xi0 - down], [xi0 + up]])
    a = zigzag_1d(InclusionTarget(E, [xi0]), UNIT, pieces).sup_deviation()
    b = zigzag_1d(InclusionTarget(E, [xi0]), UNIT, 2 * pieces).sup_deviation()
    assert b == pytest.approx(a / 2, rel=0.1)


@pytest.mark.parametrize("E", [FOUR, np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], float),
                               np.array([[2, 0], [-1, 1.5], [-1, -1.5]])])
def test_vitali_closeness_halves(E):
    d = [vitali_fill(InclusionTarget(E, [0.0, 0.0]), QUAD, residual_tol=0.1, max_scale=s,
                     max_cells=200).sup_deviation()
         for s in (0.1, 0.05)]
    assert d[1] == pytest.approx(d[0] / 2, rel=0.1)


def test_affine_solution_trace():
    u = affine_solution(BoundaryDatum((1.0, 2.0), 3.0), QUAD)
    assert u.sup_deviation() == 0.0 and u.residual_fraction == pytest.approx(0.0, abs=1e-15)
