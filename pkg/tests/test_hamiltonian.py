import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhimpact import (
    HamiltonianState,
    SimConfig,
    SystemSpec,
    Trajectory,
    disk_scenario,
    energy,
    equivalence_check,
    hamiltonian,
    hamiltonian_step,
    resolve_impact,
    run_simulation,
    state_from_qp,
    state_from_qv,
)
from nhimpact.errors import SpecificationError, StructuralMismatchError
from nhimpact.hamiltonian import project_momentum
from nhimpact.scenarios import bouncing_particle_scenario
from helpers import disk_on_wall
from oracles import rolling_disk_closed_form
from systems import skewed_system


def test_hamiltonian_zero_momentum_is_potential():
    spec = skewed_system()
    q = np.array([0.3, -0.2, 0.1])
    assert hamiltonian(spec, q, np.zeros(3)) == pytest.approx(spec.V(q), abs=1e-15)


def test_hamiltonian_free_particle():
    spec = bouncing_particle_scenario(1).system
    assert hamiltonian(spec, [0.0], [2.0]) == 2.0


def test_hamiltonian_disk_diagonal_metric():
    spec = disk_scenario(m=2, I=3, J=4).system
    assert hamiltonian(spec, [0, 0, 0, 1.0], [2, 2, 3, 4]) == pytest.approx(5.5, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_hamiltonian_equals_energy_on_legendre_graph(seed):
    spec = skewed_system()
    rng = np.random.default_rng(seed)
    q = rng.uniform(-0.5, 0.5, 3)
    p = project_momentum(spec, q, rng.normal(size=3))
    s = state_from_qp(spec, 0.0, q, p)
    assert hamiltonian(spec, q, p) == pytest.approx(energy(spec, s), rel=1e-12, abs=1e-12)
    assert np.max(np.abs(spec.mu(q) @ s.v)) <= 1e-12


def _oscillator():
    return SystemSpec(1, lambda q: np.eye(1), lambda q: 0.5 * float(q[0] ** 2),
                      lambda q: np.zeros((0, 1)), lambda q: q[0] - 100.0, lambda q: np.ones(1),
                      potential_gradient=lambda q: np.array(q, dtype=float))


def test_harmonic_oscillator_matches_cos_sin():
    spec = _oscillator()
    s = HamiltonianState(0.0, [1.0], [0.0])
    h = 0.01
    for _ in range(628):
        s = hamiltonian_step(spec, s, h)
    assert s.q[0] == pytest.approx(math.cos(s.t), abs=1e-9)
    assert s.p[0] == pytest.approx(-math.sin(s.t), abs=1e-9)


def test_disk_circular_rolling_matches_closed_form():
    R, vt, vp = 1.0, 1.0, 0.5
    spec = disk_scenario(R=R, wall=1e6).system
    q0 = np.array([0.0, 0.0, 0.0, 0.3])
    s0 = state_from_qv(spec, 0.0, q0, [R * vt * math.cos(0.3), R * vt * math.sin(0.3), vt, vp])
    s = HamiltonianState.from_pontryagin(s0)
    h = 1e-2
    for _ in range(1000):
        s = hamiltonian_step(spec, s, h)
    np.testing.assert_allclose(s.q, rolling_disk_closed_form(s.t, R, vt, vp, phi0=0.3), atol=1e-8)
    assert hamiltonian(spec, s.q, s.p) == pytest.approx(hamiltonian(spec, s0.q, s0.p), abs=1e-10)
    assert np.max(np.abs(spec.mu(s.q) @ np.linalg.solve(spec.M(s.q), s.p))) <= 1e-12


def test_step_rejects_nonpositive_h():
    spec = bouncing_particle_scenario(1).system
    with pytest.raises(SpecificationError):
        hamiltonian_step(spec, HamiltonianState(0.0, [0.0], [1.0]), 0.0)


def test_round_trip_through_pontryagin_state():
    spec = disk_scenario(m=2, I=3, J=4).system
    _, s = disk_on_wall({"m": 2, "I": 3, "J": 4, "R": 1}, 0.7, 1.2, -0.4)
    back = HamiltonianState.from_pontryagin(s).to_pontryagin(spec)
    np.testing.assert_allclose(back.v, s.v, atol=1e-15)


def _rolling_config(**kw):
    base = dict(scenario="disk", parameters={"wall": 2.4}, initial_q=[0, 0, 0, 0],
                initial_v=[1, 0, 1, 1], t1=4.0, h=1e-3)
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture(scope="module")
def paired_runs():
    cfg = _rolling_config()
    return cfg, run_simulation(cfg, "lagrangian"), run_simulation(cfg, "hamiltonian")


def test_lagrangian_and_hamiltonian_runs_agree(paired_runs):
    cfg, tl, th = paired_runs
    assert len(tl.events) == len(th.events) == 1
    spec = disk_scenario(wall=2.4).system
    assert equivalence_check(spec, tl, th) <= 1e-6
    assert abs(tl.events[0].t_impact - th.events[0].t_impact) <= 1e-10


def test_equivalence_of_identical_runs_is_zero(paired_runs):
    _, tl, _ = paired_runs
    assert equivalence_check(disk_scenario(wall=2.4).system, tl, tl) == 0.0


def test_equivalence_negative_control():
    cfg = _rolling_config()
    tl = run_simulation(cfg)
    th = run_simulation(_rolling_config(initial_v=[1.001, 0, 1.001, 1]), "hamiltonian")
    assert equivalence_check(disk_scenario(wall=2.4).system, tl, th) > 1e-4


def test_equivalence_structural_mismatch(paired_runs):
    _, tl, _ = paired_runs
    empty = Trajectory(arcs=[tl.arcs[0]], events=[])
    with pytest.raises(StructuralMismatchError):
        equivalence_check(disk_scenario(wall=2.4).system, tl, empty)


def test_hamiltonian_conserved_across_impact():
    spec, s = disk_on_wall({"m": 1, "I": 2, "J": 0.5, "R": 1}, 1.1, 0.8, 0.9)
    ev = resolve_impact(spec, s)
    assert hamiltonian(spec, ev.post.q, ev.post.p) == pytest.approx(hamiltonian(spec, s.q, s.p), abs=1e-12)
