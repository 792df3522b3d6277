"""Maximal-quantum-efficiency (MQE) networks.

Given users in the plane whose direct quantum links obey an exponential
rate-loss law, find for every pair the relayed path that best trades
capacitance (bits per channel use) against trusted-node security, and take
the union of those paths as the network topology.
"""

from .geometry import (
    UserSet,
    distance_cdf,
    distance_matrix,
    distance_pdf,
    load_users,
    mean_distance_ratio,
    sample_users,
    save_users,
)
from .qchannel import (
    Q_INF,
    IncompleteTableError,
    PathDescriptor,
    capacitance_matrix,
    describe_path,
    efficiency_value,
    link_capacitance,
    network_efficiency,
    path_capacitance,
    path_efficiency,
    path_security,
    security_penalty_rate,
)
from .optimizer import (
    MaxMinSequence,
    MQENetwork,
    OptimalPath,
    ReconstructionError,
    brute_force_optimal,
    build_mqe,
    network_document,
    optimal_m,
    pollack_maxmin,
    reconstruct_path,
    save_network,
    write_edge_list,
)
from .metrics import (
    NetworkObservables,
    betweenness_histogram,
    density_scaling,
    fc_capacitance_stats,
    modified_betweenness,
    observables,
)
from .theory import (
    NumericError,
    RegimeDiagram,
    alpha_bar,
    alpha_c_step,
    first_transition,
    mst_longest_edge,
    q_fc,
    q_fc_large_extent,
    q_fc_small_extent,
    q_mst,
    regime_diagram,
    single_pair_efficiency,
    step_alpha,
)
from .harness import (
    SweepCell,
    SweepConfig,
    SweepResult,
    default_alpha_grid,
    derive_seed,
    run_cell,
    run_sweep,
)

__version__ = "0.1.0"
