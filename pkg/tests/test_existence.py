import json

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from supremal.config import DEFAULT_TOL
from supremal.envelope import envelope
from supremal.errors import NotApplicable
from supremal.existence import (
    Branch,
    Decision,
    ExistenceVerdict,
    Uniqueness,
    decide_affine,
    decide_general,
    decide_sweep,
    flatness_components,
    flatness_necessary_check,
    relaxed_value_affine,
    resolution_margin,
    uniqueness_probe,
)
from supremal.fields import BoundaryDatum, CoercivityTag, Domain, GridSpec, ScalarField, builtin, builtin_names
from supremal.fields import random_fourier_field
from supremal.inclusion import affine_solution, zigzag_1d, InclusionTarget
from supremal.oracle import audit_solution

GRID65 = GridSpec((-2, -2), (2, 2), 65)
GRID17 = GridSpec((-2, -2), (2, 2), 17)
LINE = GridSpec(-2, 2, 401)


@pytest.fixture(scope="module")
def example_env():
    return envelope(builtin("example-4-5"), GRID65, certificates=False)


def test_example_not_exists(example_env):
    v = decide_affine(builtin("example-4-5"), (0.0, 0.0), env=example_env)
    assert v.decision is Decision.NOT_EXISTS
    assert v.normal == (0.0, 1.0)
    assert v.relaxed_value == 0.0 and v.f_value == 1.0
    assert v.certificate["level_set_kind"] == "segment"


def test_example_sweep_along_the_segment(example_env):
    f = builtin("example-4-5")
    margin = resolution_margin(GRID65)
    for s in np.round(np.arange(-1.4, 1.41, 0.1), 10):
        v = decide_affine(f, (s, 0.0), env=example_env)
        if abs(s) < 1 - margin:
            assert v.decision is Decision.NOT_EXISTS and v.normal == (0.0, 1.0)
        elif abs(s) > 1 + margin:
            assert v.decision is Decision.EXISTS and v.branch is Branch.IN_LEVEL_SET_OF_F


def test_example_off_segment_exists_in_level_set(example_env):
    v = decide_affine(builtin("example-4-5"), (1.5, 0.5), env=example_env)
    assert v.exists and v.branch is Branch.IN_LEVEL_SET_OF_F


def test_double_well_interior():
    v = decide_affine(builtin("double-well-1d"), 0.0, LINE)
    assert v.exists and v.branch is Branch.INTERIOR_OF_ENVELOPE_LEVEL_SET
    assert v.relaxed_value == 0.0 and v.margins["boundary_distance"] == 1.0


def test_abs_in_level_set():
    v = decide_affine(builtin("abs"), 0.7, LINE)
    assert v.exists and v.branch is Branch.IN_LEVEL_SET_OF_F and v.relaxed_value == 0.7


def test_four_well_interior():
    v = decide_affine(builtin("four-well"), (0.0, 0.0), GRID65)
    assert v.exists and v.branch is Branch.INTERIOR_OF_ENVELOPE_LEVEL_SET
    assert v.relaxed_value == 0.0


def test_sampled_field_needs_no_grid():
    f = ScalarField.sampled(LINE, (LINE.axes()[0] ** 2 - 1) ** 2, CoercivityTag(1.0, 2.0, 2.0))
    assert decide_affine(f, 0.25).exists


def test_verdict_round_trip(example_env):
    v = decide_affine(builtin("example-4-5"), (0.25, 0.0), env=example_env)
    d = json.loads(json.dumps(v.to_dict()))
    back = ExistenceVerdict.from_dict(d)
    assert back.to_dict() == v.to_dict()
    assert "not_exists" in v.summary()


def test_decide_sweep_matches_single_calls():
    pts = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.5)]
    f = builtin("example-4-5")
    out = decide_sweep(f, pts, GRID17)
    assert [v.decision for v in out] == [decide_affine(f, p, GRID17).decision for p in pts]


def test_relaxed_value_certificate():
    value, cert = relaxed_value_affine(builtin("double-well-1d"), 0.3, LINE, with_certificate=True)
    assert value == 0.0
    assert abs(sum(w * p[0] for p, w, _ in cert) - 0.3) < 1e-12


def test_decide_general():
    f = builtin("double-well-1d")
    u = zigzag_1d(InclusionTarget(np.array([[-1.0], [1.0]]), (0.0,)), Domain.interval(0, 1), 4)
    v = decide_general(f, u, LINE)
    assert v.exists and v.sufficient and v.relaxed_value == 0.0
    g = builtin("example-4-5")
    w = decide_general(g, affine_solution(BoundaryDatum((0.0, 0.0)), Domain.box()), GRID17)
    assert w.decision is Decision.UNKNOWN and w.certificate["failing_cells"]


def test_flatness():
    rep = flatness_necessary_check(builtin("two-disc-well"), (0.0, 0.0), 0.2, GRID65)
    assert rep.constant and rep.max_deviation == 0.0
    # no flat half-ball for the segment example: the envelope grows like xi2**2
    rep = flatness_necessary_check(builtin("example-4-5"), (0.0, 0.0), 0.5, GRID65)
    assert not rep.constant and rep.max_deviation == 0.25
    with pytest.raises(NotApplicable):
        flatness_necessary_check(builtin("abs"), 1.0, 0.1, LINE)


def test_flatness_components():
    env = envelope(builtin("double-well-1d"), LINE, certificates=False)
    comps = flatness_components(env)
    assert len(comps) == 1 and comps[0]["flat"] and comps[0]["max"] == 0.0


def test_uniqueness_probe(example_env):
    assert uniqueness_probe(example_env.as_field(), (0.0, 0.0), GRID65) is Uniqueness.UNIQUE_AFFINE
    assert uniqueness_probe(builtin("abs"), 1.0, LINE) is Uniqueness.UNIQUE_AFFINE
    flat = ScalarField.analytic("maximum(abs(x), 1.0)", 1)
    assert uniqueness_probe(flat, 0.0, LINE) is Uniqueness.POSSIBLY_NON_UNIQUE


# invariants

def _grid(f):
    return GridSpec(-2, 2, 161) if f.dim == 1 else GRID17


DECIDABLE = [n for n in builtin_names() if builtin(n).dim == 1 or builtin(n).coercivity is not None]


@pytest.fixture(scope="module")
def lattice_verdicts():
    out = {}
    for name in DECIDABLE:
        f = builtin(name)
        env = envelope(f, _grid(f), certificates=False)
        ticks = np.linspace(-1.5, 1.5, 9)
        pts = ticks[:, None] if f.dim == 1 else np.array([(a, b) for a in ticks for b in ticks])
        out[name] = (env, [decide_affine(f, p, env=env) for p in pts])
    return out


@pytest.mark.parametrize("name", DECIDABLE)
def test_verdict_dichotomy_under_clear_margins(lattice_verdicts, name):
    env, verdicts = lattice_verdicts[name]
    need = resolution_margin(env.grid)
    for v in verdicts:
        gap = v.margins["level_gap"]
        if abs(gap) <= 10 * DEFAULT_TOL.level and gap > DEFAULT_TOL.level:
            continue
        if gap > DEFAULT_TOL.level and abs(v.margins["boundary_distance"]) <= need:
            if not (env.grid.dim == 2 and v.margins["boundary_distance"] <= DEFAULT_TOL.geom):
                continue
        assert v.decision is not Decision.UNKNOWN, (name, v.xi0, v.margins)


@pytest.mark.parametrize("name", DECIDABLE)
def test_not_exists_implies_unique_relaxed_minimizer(lattice_verdicts, name):
    env, verdicts = lattice_verdicts[name]
    lc = env.as_field()
    for v in verdicts:
        if v.decision is Decision.NOT_EXISTS:
            p = v.xi0 if lc.dim == 2 else v.xi0[0]
            assert uniqueness_probe(lc, p, env.grid) is Uniqueness.UNIQUE_AFFINE


@pytest.mark.parametrize("name", DECIDABLE)
def test_in_level_set_verdicts_are_witnessed(lattice_verdicts, name):
    env, verdicts = lattice_verdicts[name]
    f = builtin(name)
    domain = Domain.interval(0, 1) if f.dim == 1 else Domain.box()
    for v in verdicts:
        if v.branch is Branch.IN_LEVEL_SET_OF_F:
            u = affine_solution(BoundaryDatum(v.xi0), domain)
            assert audit_solution(f, u, v.relaxed_value).passed


SCALABLE = ["example-4-5", "four-well", "two-disc-well", "double-well-1d", "sq-norm", "abs"]


@given(st.sampled_from(SCALABLE), st.integers(0, 2**31 - 1), st.floats(0.2, 5.0), st.floats(-3.0, 3.0))
def test_verdict_invariant_under_value_rescaling(name, seed, scale, shift):
    f = builtin(name)
    tag = f.coercivity
    g = ScalarField.analytic(f"({scale!r}) * ({f.expression}) + ({shift!r})", f.dim,
                             CoercivityTag(scale * tag.a, tag.p, scale * tag.b - shift))
    grid = _grid(f)
    rng = np.random.default_rng(seed)
    p = np.round(rng.uniform(-1.5, 1.5, f.dim) * 8) / 8
    a = decide_affine(f, p, grid)
    gap = a.margins["level_gap"]
    assume(gap <= 0 or gap > 100 * DEFAULT_TOL.level * max(1.0, 1 / scale))
    b = decide_affine(g, p, grid)
    assert a.decision is b.decision and a.branch is b.branch
    assert a.normal == b.normal


@given(st.integers(0, 2**31 - 1))
def test_one_dimensional_totality(seed):
    rng = np.random.default_rng(seed)
    f = random_fourier_field(rng, n_modes=6, amplitude=3.0)
    xi0 = rng.uniform(-2.0, 2.0)
    v = decide_affine(f, xi0, GridSpec(-6, 6, 1201))
    assert v.decision is not Decision.NOT_EXISTS
