"""Submodularity certificates, projections and propagation engines for acyclic diffusion models."""

__version__ = "0.1.0"

from .certify import certify_model, certify_vertex, falsify_equivalence, theorem2_check
from .lattice import (
    apply_connection,
    connection_matrix,
    enumerate_submodularity_triples,
    mobius_transform,
    zeta_transform,
)
from .maximize import MonteCarlo, brute_force_opt, greedy_select
from .model import (
    ModelError,
    Network,
    dump_network,
    ic_coefficients,
    ic_table,
    load_network,
    lt_coefficients,
    lt_table,
    read_network,
)
from .project import project_model, project_multi, project_vertex
from .simulate import (
    estimate_spread,
    exact_distribution,
    exact_multi_distribution,
    exact_spread,
    propagate_blueprint,
    sample_blueprint,
    sample_live_pattern,
    simulate_cltm,
    simulate_multi,
    simulate_once,
)
