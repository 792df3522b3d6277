"""Observables of an optimized network: capacitance, length, density, betweenness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .optimizer import MQENetwork


@dataclass(frozen=True)
class NetworkObservables:
    q_star: float      # mean optimal-path capacitance, bits/use
    l_star: float      # mean topological path length
    q_min: float       # worst pair's path capacitance
    rho: float         # link density 2|E| / (N(N-1))
    efficiency: float  # mean optimal-path efficiency


def observables(net: MQENetwork) -> NetworkObservables:
    """Aggregate the per-pair path table into the network-level observables.

    Each unordered pair enters once; path capacitance, length and efficiency
    are direction-independent so this equals the ordered-pair average.
    """
    caps, lens, effs = [], [], []
    for pth in net.paths.values():
        caps.append(pth.capacitance)
        lens.append(pth.length)
        effs.append(pth.efficiency)
    npairs = len(caps)
    n = net.n
    return NetworkObservables(
        q_star=math.fsum(caps) / npairs,
        l_star=math.fsum(lens) / npairs,
        q_min=min(caps),
        rho=2.0 * len(net.edges) / (n * (n - 1)),
        efficiency=math.fsum(effs) / npairs,
    )


def modified_betweenness(net: MQENetwork) -> np.ndarray:
    """Per-node count of chosen optimal paths crossing it as an intermediate.

    Counts ordered pairs: each stored chain serves both orientations, so an
    intermediate node collects 2 per unordered pair routed through it.
    """
    counts = np.zeros(net.n, dtype=np.int64)
    for pth in net.paths.values():
        for v in pth.nodes[1:-1]:
            counts[v] += 2
    return counts


def betweenness_histogram(counts: np.ndarray):
    """(value, multiplicity) pairs of a betweenness table, for CSV export."""
    values, freq = np.unique(np.asarray(counts), return_counts=True)
    return values, freq


def density_scaling(n_values, rho_values):
    """Effective decay exponent of density versus network size.

    Least-squares slope of log(rho) against log(N); returns (omega, stderr)
    with the convention rho ~ N**(-omega).
    """
    n_values = np.asarray(n_values, dtype=float)
    rho_values = np.asarray(rho_values, dtype=float)
    if n_values.size < 3 or rho_values.size != n_values.size:
        raise ValueError("need at least 3 sizes with matching densities")
    res = stats.linregress(np.log(n_values), np.log(rho_values))
    return -res.slope, res.stderr


def fc_capacitance_stats(q0: np.ndarray):
    """(mean, min) direct-link capacitance of the all-pairs network."""
    off = q0[~np.eye(q0.shape[0], dtype=bool)]
    return float(off.mean()), float(off.min())
