"""
Dense random multigraphs and their multigraphon limits
"""
from multigraph_limits.densities import graphon_density_mc, hom_density_mc, sampled_pattern_distribution
from multigraph_limits.exact_oracle import (
    DistributionTable,
    enumerate_and_solve,
    exact_homdensity,
    exact_pag_distribution,
    polya_probability,
    stationary_probability,
)
from multigraph_limits.generators import (
    RngStream,
    ball_replacement_step,
    configuration_model,
    edge_reconnect_step,
    pag,
    polya_urn,
    w_random,
)
from multigraph_limits.graph_core import AdjacencyMatrix, DegreeSequence, UrnConfiguration
from multigraph_limits.multigraphon import (
    EmpiricalEdgeStationaryMultigraphon,
    Multigraphon,
    PoissonGammaMultigraphon,
    StepMultigraphon,
)

__version__ = "1.0.0"

__all__ = [
    "AdjacencyMatrix",
    "DegreeSequence",
    "DistributionTable",
    "EmpiricalEdgeStationaryMultigraphon",
    "Multigraphon",
    "PoissonGammaMultigraphon",
    "RngStream",
    "StepMultigraphon",
    "UrnConfiguration",
    "ball_replacement_step",
    "configuration_model",
    "edge_reconnect_step",
    "enumerate_and_solve",
    "exact_homdensity",
    "exact_pag_distribution",
    "graphon_density_mc",
    "hom_density_mc",
    "pag",
    "polya_probability",
    "polya_urn",
    "sampled_pattern_distribution",
    "stationary_probability",
    "w_random",
]
