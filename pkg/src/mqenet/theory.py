"""Closed-form and quadrature references for the optimizer.

Covers the step thresholds of the direct-to-relayed transitions, the
single-pair regime map over (distance, alpha), the mean capacitance of the
all-pairs direct-link network, and the spanning-tree bottleneck estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import SQRT2, distance_pdf
from .qchannel import LN2, efficiency_value, link_capacitance, security_penalty_rate


class NumericError(RuntimeError):
    """A quadrature or root bracket failed to converge."""


_mean_log_ratio_cache: float | None = None


def single_pair_efficiency(m: int, d: float, lambda0: float, alpha: float, p: float) -> float:
    """Efficiency of a chain of m evenly spaced relays bridging distance d.

    m = 0 is the direct link. This is the asymptotic model of a dense user
    population: relays sit exactly at the d/(m+1) subdivision points.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if d <= 0:
        raise ValueError("d must be positive")
    q = link_capacitance(d / (m + 1), lambda0)
    return efficiency_value(q, m, alpha, p)


def alpha_c_step(m: int, p: float) -> float:
    """Weight below which m relays beat m-1 relays, for close pairs.

    Closed form [1 - delta(m) ln(1-p)]**-1 with
    delta(m) = ln 2 / (ln(m+1) - ln m); the d -> 0 limit of step_alpha.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if p == 1.0:
        return 0.0
    delta = LN2 / (math.log(m + 1) - math.log(m))
    return 1.0 / (1.0 - delta * math.log1p(-p))


def _crossing_alpha(dq: float, dm: int, p: float) -> float:
    """Tie weight solving (1-a)*dq + a*ln(1-p)*dm = 0.

    Both efficiencies are affine in alpha, so the crossing is analytic;
    bisection on the same condition is kept in the test suite as a
    cross-check.
    """
    if p == 1.0:
        return 0.0
    c = math.log1p(-p)
    a = dq / (dq - c * dm)
    if not (dq > 0.0 and 0.0 < a < 1.0):
        raise NumericError(f"no crossing in (0, 1): dq={dq!r}, dm={dm}, p={p!r}")
    return a


def step_alpha(m: int, p: float, d_over_lambda: float = 0.0) -> float:
    """Weight where m relays tie with m-1 at separation d; closed form at d=0."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if d_over_lambda < 0:
        raise ValueError("d_over_lambda must be non-negative")
    if d_over_lambda == 0.0:
        return alpha_c_step(m, p)
    if p == 1.0:
        return 0.0
    dq = link_capacitance(d_over_lambda / (m + 1)) - link_capacitance(d_over_lambda / m)
    return _crossing_alpha(dq, 1, p)


def first_transition(d_over_lambda: float, p: float, m_max: int | None = None):
    """Largest direct-to-relayed tie weight over m, and the relay count there.

    For well separated pairs a single relay cannot pay for itself and the
    first transition jumps straight to several relays; the scan bound grows
    with d because the preferred relay spacing is of order the decay length.
    """
    if d_over_lambda <= 0:
        raise ValueError("d_over_lambda must be positive")
    if p == 1.0:
        return 0.0, 1
    if m_max is None:
        m_max = math.ceil(10.0 * d_over_lambda) + 10
    q_direct = link_capacitance(d_over_lambda)
    best_a, best_m = -1.0, 0
    for m in range(1, m_max + 1):
        dq = link_capacitance(d_over_lambda / (m + 1)) - q_direct
        a = _crossing_alpha(dq, m, p)
        if a > best_a:
            best_a, best_m = a, m
    return best_a, best_m


@dataclass
class RegimeDiagram:
    """Optimal relay counts over a (distance, alpha) grid, with boundaries."""

    d_over_lambda: np.ndarray
    alpha: np.ndarray
    m_opt: np.ndarray        # (n_d, n_alpha) optimal relay count
    mbar: np.ndarray         # (n_d,) relay count adopted at the first transition
    alpha_first: np.ndarray  # (n_d,) weight of the first transition
    step_boundaries: dict[int, np.ndarray]  # m -> per-d tie weight with m-1


def regime_diagram(d_over_lambda, p: float, alphas=None, boundary_m_max: int = 8) -> RegimeDiagram:
    """Map the optimal relay count over distances and trade-off weights.

    The m grid entry is the direct argmax of single_pair_efficiency over
    m (ties to smaller m); the boundary curves come from the analytic tie
    weights, so the two views cross-validate each other.
    """
    d = np.atleast_1d(np.asarray(d_over_lambda, dtype=float))
    if np.any(d <= 0):
        raise ValueError("d_over_lambda must be positive")
    if alphas is None:
        alphas = np.linspace(0.01, 1.0, 100)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    pen = security_penalty_rate(1.0, p)  # ln(1-p)

    m_opt = np.zeros((d.size, alphas.size), dtype=np.int32)
    mbar = np.zeros(d.size, dtype=np.int32)
    alpha_first = np.zeros(d.size)
    for i, di in enumerate(d):
        m_max = math.ceil(10.0 * di) + 10
        ms = np.arange(m_max + 1)
        qs = link_capacitance(di / (ms + 1.0))
        # efficiency is affine in alpha: rows m, columns alpha
        eff = (1.0 - alphas)[None, :] * qs[:, None] + (alphas[None, :] * pen) * ms[:, None]
        if p == 1.0:
            eff[1:, :] = -np.inf
        m_opt[i] = np.argmax(eff, axis=0)  # first max <=> smallest m
        alpha_first[i], mbar[i] = first_transition(float(di), p, m_max=m_max)

    boundaries = {
        m: np.array([step_alpha(m, p, float(di)) for di in d])
        for m in range(1, boundary_m_max + 1)
    }
    return RegimeDiagram(
        d_over_lambda=d, alpha=alphas, m_opt=m_opt,
        mbar=mbar, alpha_first=alpha_first, step_boundaries=boundaries,
    )


def q_fc(L_over_lambda: float) -> float:
    """Mean direct-link capacitance over the square, by adaptive quadrature.

    Integrates the pair-distance density against the link capacitance,
    splitting at the density's slope discontinuity.
    """
    r = float(L_over_lambda)
    if r <= 0:
        raise ValueError("L_over_lambda must be positive")
    res = quad(
        lambda z: distance_pdf(z) * link_capacitance(z * r),
        0.0, SQRT2, points=[1.0], limit=400, epsabs=1e-13, epsrel=1e-9,
        full_output=1,
    )
    if len(res) > 3:
        raise NumericError(f"quadrature did not converge: {res[3]}")
    val, abserr = res[0], res[1]
    if not np.isfinite(val) or abserr > max(1e-12, 1e-6 * abs(val)):
        raise NumericError(f"quadrature error {abserr!r} too large for value {val!r}")
    return val


def _mean_log_ratio() -> float:
    global _mean_log_ratio_cache
    if _mean_log_ratio_cache is None:
        val, _ = quad(
            lambda z: math.log(z) * distance_pdf(z), 0.0, SQRT2,
            points=[1.0], limit=400, epsabs=1e-13, epsrel=1e-12,
        )
        _mean_log_ratio_cache = val
    return _mean_log_ratio_cache


def q_fc_small_extent(L_over_lambda: float) -> float:
    """Small-extent form of q_fc: -(ln of the scaled distance, averaged)/ln 2."""
    if L_over_lambda <= 0:
        raise ValueError("L_over_lambda must be positive")
    return -(_mean_log_ratio() + math.log(L_over_lambda)) / LN2


def q_fc_large_extent(L_over_lambda: float) -> float:
    """Large-extent tail of q_fc, (2 pi / ln 2) * (lambda0/L)**2."""
    if L_over_lambda <= 0:
        raise ValueError("L_over_lambda must be positive")
    return (2.0 * math.pi / LN2) / (L_over_lambda * L_over_lambda)


def mst_longest_edge(n: int) -> float:
    """Longest-edge fraction of the side for a spanning tree on n >> 1 points."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return math.sqrt(math.log(n) / (math.pi * n))


def q_mst(n: int, L_over_lambda: float) -> float:
    """Bottleneck capacitance estimate for tree-like routing.

    The worst link of the maximum spanning tree dominates most optimal
    paths, so its capacitance approximates the network-wide mean.
    """
    if L_over_lambda <= 0:
        raise ValueError("L_over_lambda must be positive")
    return link_capacitance(L_over_lambda * mst_longest_edge(n))


def alpha_bar(L_over_lambda: float, p: float) -> float:
    """Weight below which the whole network settles into tree-like routing.

    Evaluates the first-transition weight at the largest possible pair
    separation (the square diagonal); scales like 1/L for large extents.
    """
    if L_over_lambda <= 0:
        raise ValueError("L_over_lambda must be positive")
    return first_transition(SQRT2 * L_over_lambda, p)[0]
