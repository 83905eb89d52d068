"""Bernoulli percolation driven by Gaussian free fields on finite graphs."""
from .couplings import (
    EdgeEnvironment,
    OverlayEnvironment,
    Schedule,
    ScheduleOverflowError,
    arcsin_prediction,
    bridge_prob,
    constant_env,
    edwards_sokal_backward,
    edwards_sokal_forward,
    env_centered,
    env_overlay,
    env_shifted,
    schedule_q,
)
from .derivatives import LambdaCheck, lambda_derivative_check
from .gff import IsingLaw, SignModulus, dirichlet_energy, ising_exact, sample_gff, sign_modulus, xs_closed_form
from .graph import (
    EdgeListError,
    Graph,
    GraphError,
    OverlayGraph,
    ball,
    build_box,
    build_glued_boxes,
    directed_neighborhood,
    edge_set,
    load_edge_list,
    vertex_set,
)
from .harness import Estimate, ExperimentSpec, run
from .multiscale import ScaleFields, ScaleStack, build_scales, check_properties, cs_bound_check, sample_scale_fields
from .percolation import (
    EventSpec,
    ExactResult,
    PercConfig,
    cluster_labels,
    connect,
    connect_boundary,
    exact_event,
    holds,
    pivotal,
    sample_perc,
)
from .walk import (
    CapacityResult,
    GreenMatrix,
    SingularDomainError,
    capacity,
    estimate_decay,
    green_dirichlet,
    green_walk_sum,
    heat_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityResult",
    "EdgeEnvironment",
    "EdgeListError",
    "Estimate",
    "EventSpec",
    "ExactResult",
    "ExperimentSpec",
    "Graph",
    "GraphError",
    "GreenMatrix",
    "IsingLaw",
    "LambdaCheck",
    "OverlayEnvironment",
    "OverlayGraph",
    "PercConfig",
    "ScaleFields",
    "ScaleStack",
    "Schedule",
    "ScheduleOverflowError",
    "SignModulus",
    "SingularDomainError",
    "arcsin_prediction",
    "ball",
    "bridge_prob",
    "build_box",
    "build_glued_boxes",
    "build_scales",
    "capacity",
    "check_properties",
    "cluster_labels",
    "connect",
    "connect_boundary",
    "constant_env",
    "cs_bound_check",
    "directed_neighborhood",
    "dirichlet_energy",
    "edge_set",
    "edwards_sokal_backward",
    "edwards_sokal_forward",
    "env_centered",
    "env_overlay",
    "env_shifted",
    "estimate_decay",
    "exact_event",
    "green_dirichlet",
    "green_walk_sum",
    "heat_kernel",
    "holds",
    "ising_exact",
    "lambda_derivative_check",
    "load_edge_list",
    "pivotal",
    "run",
    "sample_gff",
    "sample_perc",
    "sample_scale_fields",
    "schedule_q",
    "sign_modulus",
    "vertex_set",
    "xs_closed_form",
]
