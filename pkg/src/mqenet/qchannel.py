"""Link capacitance, path capacitance/security, and the efficiency functional.

Sign conventions used throughout the package: link and path capacitances are
in bits per channel use (base-2 logs); the per-intermediate-node security
penalty uses the natural log, ln(1-p). Mixing the bases is deliberate and
normative — it is what makes the direct-to-relayed transition sit at
alpha = 1/2 for p = 1 - 1/e.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import UserSet, distance_matrix

LN2 = math.log(2.0)

# Infinite-capacitance sentinel for zero-length links and the matrix diagonal.
# It compares above every finite capacitance; arithmetic with it is restricted
# to min/max selections.
Q_INF = math.inf


class IncompleteTableError(ValueError):
    """A per-pair path table does not cover all ordered pairs."""


def link_capacitance(d, lambda0: float = 1.0):
    """Secret bits per channel use of a direct lossy link of length d.

    Evaluated as -log1p(-exp(-d/lambda0)) / ln 2, which stays accurate both
    for d << lambda0 (where q is large) and d >> lambda0 (where q decays
    like exp(-d/lambda0)). d = 0 returns the Q_INF sentinel.
    """
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    scalar = np.ndim(d) == 0
    dd = np.asarray(d, dtype=float)
    if np.any(dd < 0.0):
        raise ValueError("distances must be non-negative")
    with np.errstate(divide="ignore"):
        q = -np.log1p(-np.exp(-dd / lambda0)) / LN2
    return float(q) if scalar else q


def capacitance_matrix(u: UserSet) -> np.ndarray:
    """Direct-link capacitances for every user pair; diagonal is Q_INF."""
    q = link_capacitance(distance_matrix(u))
    np.fill_diagonal(q, Q_INF)
    return q


@dataclass(frozen=True)
class PathDescriptor:
    """A simple path with its bottleneck capacitance and security."""

    nodes: tuple[int, ...]
    capacitance: float
    security: float

    @property
    def length(self) -> int:
        """Topological length (number of edges)."""
        return len(self.nodes) - 1


def path_capacitance(nodes, q0: np.ndarray) -> float:
    """Capacitance of a path: the minimum over its link capacitances."""
    nodes = tuple(int(v) for v in nodes)
    if len(nodes) < 2:
        raise ValueError("a path needs at least one edge")
    if len(set(nodes)) != len(nodes):
        raise ValueError("repeated node: paths must be simple")
    a = np.asarray(nodes)
    return float(np.min(q0[a[:-1], a[1:]]))


def path_security(length: int, p: float) -> float:
    """Probability (1-p)^(length-1) that no intermediate node is malicious."""
    if length < 1:
        raise ValueError("topological length must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return float((1.0 - p) ** (length - 1))


def describe_path(nodes, q0: np.ndarray, p: float) -> PathDescriptor:
    """Build a PathDescriptor from a node sequence and the link matrix."""
    nodes = tuple(int(v) for v in nodes)
    cap = path_capacitance(nodes, q0)
    return PathDescriptor(nodes=nodes, capacitance=cap, security=path_security(len(nodes) - 1, p))


def security_penalty_rate(alpha: float, p: float) -> float:
    """Efficiency cost per intermediate node, alpha * ln(1-p); -inf at p = 1."""
    if p >= 1.0:
        return -math.inf
    return alpha * math.log1p(-p)


def efficiency_value(capacitance: float, n_intermediate: int, alpha: float, p: float) -> float:
    """(1-alpha)*q + alpha*ln(1-p)*m.

    Every optimizer and every exhaustive cross-check in the package funnels
    through this one expression, so their results compare exactly.
    """
    cap = 0.0 if alpha == 1.0 else (1.0 - alpha) * capacitance
    if n_intermediate == 0:
        return cap
    pen = security_penalty_rate(alpha, p)
    if pen == -math.inf:
        return -math.inf
    return cap + pen * n_intermediate


def path_efficiency(path: PathDescriptor, alpha: float, p: float) -> float:
    """Efficiency of one path at trade-off weight alpha.

    Affine in alpha: equals the capacitance at alpha = 0 and the log
    security at alpha = 1. p = 1 with at least one intermediate node gives
    the -inf sentinel.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    return efficiency_value(path.capacitance, path.length - 1, alpha, p)


def network_efficiency(paths, alpha: float, p: float) -> float:
    """Mean path efficiency over all N(N-1) ordered pairs.

    ``paths`` maps ordered pairs (a, b) with a != b, covering every pair of
    0..N-1, to PathDescriptor-like objects.
    """
    n = 0
    for a, b in paths:
        if a == b:
            raise IncompleteTableError("path table contains a self pair")
        n = max(n, a, b)
    n += 1
    if len(paths) != n * (n - 1):
        raise IncompleteTableError(
            f"path table has {len(paths)} entries, expected {n * (n - 1)} ordered pairs"
        )
    total = math.fsum(path_efficiency(pd, alpha, p) for pd in paths.values())
    return total / len(paths)
