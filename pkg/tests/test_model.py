import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhimpact import (
    PontryaginState,
    SystemSpec,
    disk_scenario,
    energy,
    lagrangian,
    legendre,
    legendre_inv,
    state_from_qv,
)
from nhimpact.errors import (
    BlowUpError,
    GeometryError,
    RankDropError,
    SingularMetricError,
    SpecificationError,
)
from nhimpact.scenarios import bouncing_particle_scenario


def varying_metric_system():
    """Two dofs, configuration-dependent metric, nonzero potential, one constraint."""

    def M(q):
        return np.array([[2 + math.cos(q[1]), 0.3, 0.0],
                         [0.3, 1 + 0.5 * math.sin(q[0]) ** 2, 0.1],
                         [0.0, 0.1, 1.5]])

    return SystemSpec(
        dim=3,
        mass_matrix=M,
        potential=lambda q: 0.5 * q[0] ** 2 + math.cos(q[2]),
        constraint_forms=lambda q: np.array([[math.sin(q[2]), -1.0, 0.2]]),
        boundary_fn=lambda q: q[0] - 5.0,
        boundary_gradient=lambda q: np.array([1.0, 0.0, 0.0]),
        n_constraints=1,
    )


finite = st.floats(-3, 3, allow_nan=False)
vec3 = st.lists(finite, min_size=3, max_size=3).map(np.array)


def test_lagrangian_free_particle():
    spec = bouncing_particle_scenario(2, wall=10.0).system
    assert lagrangian(spec, [0, 0], [3, 4]) == 12.5


@pytest.mark.parametrize(
    "params, v, expected",
    [
        ({}, [0, 1, 1, 0], 1.0),
        ({"m": 2, "I": 3, "J": 4}, [1, 1, 1, 1], 5.5),
    ],
)
def test_lagrangian_disk(params, v, expected):
    spec = disk_scenario(**params).system
    assert lagrangian(spec, [0.3, -2.0, 1.0, 0.7], v) == pytest.approx(expected, abs=1e-15)


def test_lagrangian_rejects_wrong_dimension(disk):
    with pytest.raises(SpecificationError):
        lagrangian(disk, [0, 0, 0], [0, 0, 0, 0])


def test_energy_examples(disk):
    spec1 = bouncing_particle_scenario(1, wall=10.0).system
    assert energy(spec1, PontryaginState(0, [0.0], [0.0], [0.0])) == 0.0
    assert energy(spec1, PontryaginState(0, [0.0], [2.0], [2.0])) == 2.0
    s = PontryaginState(0, [0, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0])
    assert energy(disk, s) == pytest.approx(1.0, abs=1e-15)


def test_energy_off_legendre_graph_uses_full_triple():
    spec = bouncing_particle_scenario(1, wall=10.0).system
    # p.v - L with p != v: 3*2 - 2 = 4
    assert energy(spec, PontryaginState(0, [0.0], [2.0], [3.0])) == 4.0


def test_legendre_identity_metric():
    spec = bouncing_particle_scenario(3, wall=10.0).system
    v = np.array([0.1, -2.0, 5.0])
    np.testing.assert_array_equal(legendre(spec, np.zeros(3), v), v)


def test_legendre_disk():
    spec = disk_scenario(m=2, I=3, J=4).system
    np.testing.assert_allclose(legendre(spec, np.zeros(4), np.ones(4)), [2, 2, 3, 4], atol=0)


def test_legendre_round_trip_random():
    spec = varying_metric_system()
    rng = np.random.default_rng(1)
    for _ in range(100):
        q, v = rng.normal(size=3), rng.normal(size=3) * 3
        assert np.max(np.abs(legendre_inv(spec, q, legendre(spec, q, v)) - v)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(q=vec3, v=vec3)
def test_energy_on_legendre_graph_is_kinetic_plus_potential(q, v):
    spec = varying_metric_system()
    s = state_from_qv(spec, 0.0, q, v)
    expected = 0.5 * v @ spec.M(q) @ v + spec.V(q)
    assert energy(spec, s) == pytest.approx(expected, abs=1e-12 * max(1.0, abs(expected)))


@settings(max_examples=60, deadline=None)
@given(q=vec3, v=vec3)
def test_hyperregularity_round_trip(q, v):
    spec = varying_metric_system()
    assert np.linalg.cond(spec.M(q)) < 1e6
    back = legendre_inv(spec, q, legendre(spec, q, v))
    assert np.max(np.abs(back - v)) <= 1e-10


def test_finite_difference_derivatives_match_analytic():
    spec = disk_scenario(R=1.7).system
    q = np.array([0.2, -1.0, 0.4, 0.9])
    fd = SystemSpec(4, spec.mass_matrix, spec.potential, spec.constraint_forms,
                    spec.boundary_fn, spec.boundary_gradient, n_constraints=2)
    np.testing.assert_allclose(fd.dmu(q), spec.dmu(q), atol=1e-8)
    np.testing.assert_allclose(fd.dM(q), spec.dM(q), atol=1e-8)
    np.testing.assert_allclose(fd.grad_V(q), spec.grad_V(q), atol=1e-8)


def test_finite_difference_gradient_of_potential():
    spec = varying_metric_system()
    q = np.array([0.4, 0.1, 1.2])
    np.testing.assert_allclose(spec.grad_V(q), [0.4, 0.0, -math.sin(1.2)], atol=1e-8)


def test_non_finite_state_is_blow_up():
    with pytest.raises(BlowUpError):
        PontryaginState(0.0, [np.nan], [0.0], [0.0])
    with pytest.raises(BlowUpError):
        PontryaginState(0.0, [0.0], [np.inf], [0.0])


def test_state_arrays_are_read_only():
    s = PontryaginState(0.0, [1.0], [2.0], [2.0])
    with pytest.raises(ValueError):
        s.q[0] = 3.0


def _spec(**overrides):
    base = dict(
        dim=2,
        mass_matrix=lambda q: np.eye(2),
        potential=lambda q: 0.0,
        constraint_forms=lambda q: np.array([[1.0, q[0]]]),
        boundary_fn=lambda q: q[1],
        boundary_gradient=lambda q: np.array([0.0, 1.0]),
        n_constraints=1,
    )
    base.update(overrides)
    return SystemSpec(**base)


def test_validate_accepts_regular_system():
    _spec().validate_at([0.3, -1.0])


def test_validate_rejects_indefinite_metric():
    spec = _spec(mass_matrix=lambda q: np.diag([1.0, -1.0]))
    with pytest.raises(SingularMetricError):
        spec.validate_at([0.0, -1.0])


def test_validate_rejects_asymmetric_metric():
    spec = _spec(mass_matrix=lambda q: np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(SpecificationError):
        spec.validate_at([0.0, -1.0])


def test_validate_rejects_rank_drop():
    spec = _spec(constraint_forms=lambda q: np.array([[0.0, 0.0]]))
    with pytest.raises(RankDropError):
        spec.validate_at([0.0, -1.0])


def test_validate_rejects_singular_boundary():
    spec = _spec(boundary_gradient=lambda q: np.zeros(2))
    with pytest.raises(GeometryError):
        spec.validate_at([0.0, 0.0])


def test_legendre_inv_singular_metric():
    spec = _spec(mass_matrix=lambda q: np.diag([1.0, 0.0]))
    with pytest.raises(SingularMetricError):
        legendre_inv(spec, [0.0, 0.0], [1.0, 1.0])


@pytest.mark.parametrize("dim, m", [(0, 0), (2, 2), (2, -1)])
def test_bad_dimensions(dim, m):
    with pytest.raises(SpecificationError):
        _spec(dim=dim, n_constraints=m)
