"""Simulation of nonholonomic mechanical systems with elastic impacts."""

from .constraints import distribution_at, impact_subspaces, project_velocity
from .dynamics import constrained_acceleration, energy_monitor, integrate, step
from .hamiltonian import (
    HamiltonianState,
    equivalence_check,
    hamiltonian,
    hamiltonian_step,
)
from .impact import locate_crossing, resolve_impact, zeno_guard
from .model import (
    ImpactEvent,
    PontryaginState,
    SystemSpec,
    Tolerances,
    Trajectory,
    energy,
    lagrangian,
    legendre,
    legendre_inv,
    state_from_qp,
    state_from_qv,
)
from .runner import SimConfig, compare_formulations, config_from_dict, run_simulation
from .scenarios import bouncing_particle_scenario, disk_scenario, get_scenario

__version__ = "0.1.0"
