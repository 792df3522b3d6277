"""Per-pair optimal paths via max-min matrix iteration, and their union network.

The engine iterates Q(m)[j,k] = max_l min(Q0[j,l], Q(m-1)[l,k]), whose entry
at step m is the best bottleneck capacitance over routes with at most m
intermediate nodes. Because the security penalty is linear in m, the optimal
trade-off for a pair is the argmax over m of (1-alpha)*Q(m) + alpha*ln(1-p)*m,
with ties resolved toward smaller m (prefer security when indifferent).
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import UserSet, distance_matrix
from .qchannel import (
    capacitance_matrix,
    efficiency_value,
    link_capacitance,
    path_security,
    security_penalty_rate,
)

try:  # pragma: no cover - exercised indirectly
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

_USE_NUMBA = _HAVE_NUMBA and not os.environ.get("MQENET_NO_NUMBA")


class ReconstructionError(RuntimeError):
    """A constrained path could not be rebuilt; indicates an internal inconsistency."""


# --------------------------------------------------------------------------
# max-min matrix iteration


if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _maxmin_update_numba(q0, qp, cols, out):  # pragma: no cover - jitted
        n = q0.shape[0]
        for ji in prange(n):
            for ci in range(cols.shape[0]):
                k = cols[ci]
                best = -np.inf
                for l in range(n):
                    v = q0[ji, l]
                    w = qp[l, k]
                    m = v if v < w else w
                    if m > best:
                        best = m
                out[ji, k] = best


def _maxmin_update_numpy(q0, qp, cols, out, budget=32 * 1024 * 1024):
    n = q0.shape[0]
    qsub = qp[:, cols]
    bj = max(1, budget // (n * max(1, cols.size)))
    for j0 in range(0, n, bj):
        blk = np.minimum(q0[j0 : j0 + bj, :, None], qsub[None, :, :]).max(axis=1)
        out[j0 : j0 + bj, cols] = blk


def _maxmin_update(q0, qp, cols, out):
    # Both kernels only select values (no float arithmetic), so they agree
    # bitwise and are schedule-independent.
    if _USE_NUMBA:
        _maxmin_update_numba(q0, qp, cols, out)
    else:
        _maxmin_update_numpy(q0, qp, cols, out)


def _maxmin_stream(q0: np.ndarray):
    """Yield (m, Q(m)) from m = 0 until the iteration reaches its fixed point.

    Only columns that changed in the previous step can change in the next
    one, so the update set shrinks as pairs converge.
    """
    n = q0.shape[0]
    yield 0, q0
    qp = q0
    cols = np.arange(n)
    m = 0
    while cols.size:
        out = qp.copy()
        _maxmin_update(q0, qp, cols, out)
        changed = cols[(out[:, cols] != qp[:, cols]).any(axis=0)]
        if changed.size == 0:
            return
        m += 1
        if m > n - 2:
            raise AssertionError("max-min iteration did not converge within N-2 steps")
        yield m, out
        qp = out
        cols = changed


@dataclass
class MaxMinSequence:
    """Matrices Q(0)..Q(M); the step after Q(M) would reproduce it."""

    mats: list[np.ndarray]

    @property
    def converged_m(self) -> int:
        return len(self.mats) - 1

    def __getitem__(self, m: int) -> np.ndarray:
        return self.mats[m]

    def __len__(self) -> int:
        return len(self.mats)


def pollack_maxmin(q0: np.ndarray) -> MaxMinSequence:
    """Full max-min iteration up to convergence.

    Keeps every intermediate matrix; for large instances prefer build_mqe,
    which streams the same update keeping only two matrices plus the
    per-pair argmax trace.
    """
    q0 = np.asarray(q0, dtype=float)
    if q0.ndim != 2 or q0.shape[0] != q0.shape[1] or q0.shape[0] < 2:
        raise ValueError("q0 must be a square matrix of size >= 2")
    if not np.array_equal(q0, q0.T):
        raise ValueError("q0 must be symmetric")
    mats = [qm.copy() if m == 0 else qm for m, qm in _maxmin_stream(q0)]
    return MaxMinSequence(mats=mats)


def _cap_term(qm: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 1.0:
        return np.zeros_like(qm)
    return (1.0 - alpha) * qm


def _best_over_stream(stream, alpha, p, q_ceiling=None):
    """Running argmax over m of (1-alpha)*Q(m) + pen*m, ties to smaller m.

    Returns (m_star, q_star, eff) matrices. When a finite q_ceiling (the
    largest link capacitance) is given, stops as soon as not even a path of
    that capacitance could beat the current worst pair: the penalty is
    linear in m while the capacitance gain is bounded.
    """
    pen = security_penalty_rate(alpha, p)
    it = iter(stream)
    _, q0m = next(it)
    best_eff = _cap_term(q0m, alpha)
    best_m = np.zeros(q0m.shape, dtype=np.int32)
    best_q = q0m.copy()

    def hopeless(next_m: int) -> bool:
        if not pen < 0 or q_ceiling is None or math.isinf(q_ceiling):
            return False
        cap_ceiling = 0.0 if alpha == 1.0 else (1.0 - alpha) * q_ceiling
        return cap_ceiling + pen * next_m <= best_eff.min()

    if pen == -math.inf or hopeless(1):
        return best_m, best_q, best_eff
    for m, qm in it:
        eff = _cap_term(qm, alpha) + pen * m
        upd = eff > best_eff
        if upd.any():
            best_eff = np.where(upd, eff, best_eff)
            best_m = np.where(upd, np.int32(m), best_m)
            best_q = np.where(upd, qm, best_q)
        if hopeless(m + 1):
            break
    return best_m, best_q, best_eff


def optimal_m(seq: MaxMinSequence, alpha: float, p: float):
    """Per-pair best intermediate-node budget and the efficiency it attains.

    Returns (m_star, efficiency) as N x N arrays; ties go to the smaller m.
    At p = 1 every relayed path is worthless and m_star is 0 everywhere.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    best_m, _, best_eff = _best_over_stream(enumerate(seq.mats), alpha, p)
    return best_m, best_eff


# --------------------------------------------------------------------------
# path reconstruction


@dataclass(frozen=True, slots=True)
class OptimalPath:
    """One chosen optimal path for a user pair."""

    nodes: tuple[int, ...]
    capacitance: float
    security: float
    efficiency: float
    m_star: int
    bottleneck: tuple[int, int]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


def _bfs_tree(adj: np.ndarray, src: int, max_depth: int | None = None):
    """BFS distances and parents from src over a boolean adjacency matrix.

    Deterministic: a newly reached node is claimed by its smallest-index
    neighbour in the previous frontier. Nodes beyond max_depth keep
    distance -1.
    """
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int32)
    parent = np.full(n, -1, dtype=np.int32)
    dist[src] = 0
    frontier = np.array([src], dtype=np.int64)
    d = 0
    while frontier.size and (max_depth is None or d < max_depth):
        d += 1
        reach = adj[frontier].any(axis=0)
        reach &= dist < 0
        new = np.nonzero(reach)[0]
        if new.size == 0:
            break
        sub = adj[np.ix_(frontier, new)]
        parent[new] = frontier[sub.argmax(axis=0)]
        dist[new] = d
        frontier = new
    return dist, parent


def _walk_to_root(parent: np.ndarray, node: int) -> list[int]:
    seq = [int(node)]
    while parent[seq[-1]] >= 0:
        seq.append(int(parent[seq[-1]]))
    return seq


def _splice_pair(l, n_, dist_l, par_l, dist_n, par_n, j, k, max_edges):
    """Shortest j->l / cross (l,n) / n->k splice that stays simple, or None."""
    options = []
    d_jl, d_nk = int(dist_l[j]), int(dist_n[k])
    if d_jl >= 0 and d_nk >= 0 and d_jl + 1 + d_nk <= max_edges:
        options.append((d_jl + 1 + d_nk, 0))
    d_jn, d_lk = int(dist_n[j]), int(dist_l[k])
    if d_jn >= 0 and d_lk >= 0 and d_jn + 1 + d_lk <= max_edges:
        options.append((d_jn + 1 + d_lk, 1))
    options.sort()
    for _, orient in options:
        if orient == 0:
            leg_a = _walk_to_root(par_l, j)  # j .. l
            leg_b = _walk_to_root(par_n, k)[::-1]  # n .. k
        else:
            leg_a = _walk_to_root(par_n, j)  # j .. n
            leg_b = _walk_to_root(par_l, k)[::-1]  # l .. k
        nodes = leg_a + leg_b
        if len(set(nodes)) == len(nodes):
            return nodes
    return None


def _constrained_path_exhaustive(adj, j, k, l, n_, max_edges):
    """Depth-limited search for the shortest simple j->k path crossing (l, n_).

    Only used when the spliced BFS legs overlap, which requires degenerate
    link capacitances; iterative deepening keeps the first (shortest,
    lexicographically smallest) solution deterministic.
    """
    nbrs = [np.nonzero(adj[v])[0].tolist() for v in range(adj.shape[0])]
    target = {int(l), int(n_)}

    def dfs(path, used, crossed, budget):
        v = path[-1]
        for w in nbrs[v]:
            crossed_w = crossed or {v, w} == target
            if w == k:
                if crossed_w:
                    return path + [k]
                continue
            if w in used or budget == 1:
                continue
            used.add(w)
            path.append(w)
            found = dfs(path, used, crossed_w, budget - 1)
            if found is not None:
                return found
            path.pop()
            used.remove(w)
        return None

    for limit in range(2, max_edges + 1):
        found = dfs([j], {j}, False, limit)
        if found is not None:
            return found
    return None


def _sorted_pair(a, b):
    return (a, b) if a < b else (b, a)


def _make_optimal_path(nodes, bottleneck, q_star, m_star, alpha, p) -> OptimalPath:
    nodes = tuple(int(v) for v in nodes)
    return OptimalPath(
        nodes=nodes,
        capacitance=float(q_star),
        security=path_security(len(nodes) - 1, p),
        efficiency=efficiency_value(float(q_star), int(m_star), alpha, p),
        m_star=int(m_star),
        bottleneck=_sorted_pair(int(bottleneck[0]), int(bottleneck[1])),
    )


def _candidate_edges(q0: np.ndarray, q_star: float) -> list[tuple[int, int]]:
    hit = np.triu(q0 == q_star, 1)
    return sorted(zip(*(idx.tolist() for idx in np.nonzero(hit))))


def reconstruct_path(q0, pair, m_star, q_star, alpha, p) -> OptimalPath:
    """Rebuild one optimal path from its argmax trace.

    The bottleneck value q_star is some entry Q0[l, n]; the path is the
    shortest route from j to k through that link inside the subgraph of
    links with capacitance >= q_star. Value ties are resolved by trying
    candidate bottleneck links in lexicographic order.
    """
    j, k = int(pair[0]), int(pair[1])
    if j == k:
        raise ValueError("pair must consist of two distinct nodes")
    if m_star == 0:
        return _make_optimal_path((j, k), (j, k), q0[j, k], 0, alpha, p)
    cands = _candidate_edges(q0, q_star)
    if not cands:
        raise ReconstructionError(f"q_star={q_star!r} is not a link capacitance")
    adj = q0 >= q_star
    np.fill_diagonal(adj, False)
    max_edges = int(m_star) + 1
    for l, n_ in cands:
        dist_l, par_l = _bfs_tree(adj, l)
        dist_n, par_n = _bfs_tree(adj, n_)
        nodes = _splice_pair(l, n_, dist_l, par_l, dist_n, par_n, j, k, max_edges)
        if nodes is not None:
            return _make_optimal_path(nodes, (l, n_), q_star, m_star, alpha, p)
    for l, n_ in cands:
        nodes = _constrained_path_exhaustive(adj, j, k, l, n_, max_edges)
        if nodes is not None:
            return _make_optimal_path(nodes, (l, n_), q_star, m_star, alpha, p)
    raise ReconstructionError(f"no simple path of <= {max_edges} edges for pair ({j}, {k})")


def _reconstruct_all(q0, m_star, q_star, alpha, p):
    """Paths for every unordered pair, grouped by bottleneck value.

    Pairs sharing a bottleneck value share the threshold subgraph, so the
    two BFS trees per candidate link are computed once per group.
    """
    n = q0.shape[0]
    paths: dict[tuple[int, int], OptimalPath] = {}
    n_degenerate = 0
    n_mismatch = 0

    dj, dk = np.nonzero(np.triu(m_star == 0, 1))
    q_direct = q0[dj, dk]
    eff_direct = _cap_term(q_direct, alpha)
    for a, b, qv, ev in zip(dj.tolist(), dk.tolist(), q_direct.tolist(), eff_direct.tolist()):
        paths[(a, b)] = OptimalPath(
            nodes=(a, b), capacitance=qv, security=1.0,
            efficiency=ev, m_star=0, bottleneck=(a, b),
        )

    rj, rk = np.nonzero(np.triu(m_star > 0, 1))
    groups: dict[float, list[tuple[int, int]]] = {}
    for a, b, qv in zip(rj.tolist(), rk.tolist(), q_star[rj, rk].tolist()):
        groups.setdefault(qv, []).append((a, b))

    # Presorted upper-triangle values give exact candidate lookup, and the
    # threshold graph grows incrementally as the groups descend in value, so
    # edge insertion costs O(N^2) over the whole run instead of per group.
    iu, ju = np.triu_indices(n, 1)
    vals = q0[iu, ju]
    order = np.argsort(vals, kind="stable")
    svals, si, sj = vals[order], iu[order], ju[order]
    adj = np.zeros((n, n), dtype=bool)
    ptr = svals.size  # edges svals[ptr:] are already in adj

    for qv in sorted(groups, reverse=True):
        pair_list = groups[qv]
        lo = np.searchsorted(svals, qv, "left")
        hi = np.searchsorted(svals, qv, "right")
        cands = sorted(zip(si[lo:hi].tolist(), sj[lo:hi].tolist()))
        if not cands:
            raise ReconstructionError(f"bottleneck value {qv!r} not present in q0")
        if lo < ptr:
            aa, bb = si[lo:ptr], sj[lo:ptr]
            adj[aa, bb] = True
            adj[bb, aa] = True
            ptr = lo
        if len(cands) > 1:
            n_degenerate += len(pair_list)
        depth = max(int(m_star[a, b]) for a, b in pair_list)
        unresolved = pair_list
        for l, n_ in cands:
            if not unresolved:
                break
            dist_l, par_l = _bfs_tree(adj, l, max_depth=depth)
            dist_n, par_n = _bfs_tree(adj, n_, max_depth=depth)
            still = []
            for a, b in unresolved:
                ms = int(m_star[a, b])
                nodes = _splice_pair(l, n_, dist_l, par_l, dist_n, par_n, a, b, ms + 1)
                if nodes is None:
                    still.append((a, b))
                    continue
                paths[(a, b)] = _make_optimal_path(nodes, (l, n_), qv, ms, alpha, p)
                if len(nodes) - 1 != ms + 1:
                    n_mismatch += 1
            unresolved = still
        for a, b in unresolved:  # degenerate overlaps only
            ms = int(m_star[a, b])
            for l, n_ in cands:
                nodes = _constrained_path_exhaustive(adj, a, b, l, n_, ms + 1)
                if nodes is not None:
                    paths[(a, b)] = _make_optimal_path(nodes, (l, n_), qv, ms, alpha, p)
                    if len(nodes) - 1 != ms + 1:
                        n_mismatch += 1
                    break
            else:
                raise ReconstructionError(f"no constrained path for pair ({a}, {b})")
    return paths, n_degenerate, n_mismatch


# --------------------------------------------------------------------------
# network assembly


@dataclass
class MQENetwork:
    """Union of the chosen optimal paths over all user pairs."""

    users: UserSet
    alpha: float
    p: float
    paths: dict[tuple[int, int], OptimalPath]  # keyed a < b
    edges: frozenset[tuple[int, int]]
    n_degenerate_pairs: int = 0
    n_length_mismatch: int = 0

    @property
    def n(self) -> int:
        return self.users.n

    def path(self, a: int, b: int) -> OptimalPath:
        """Chosen path for the ordered pair (a, b)."""
        if a == b:
            raise ValueError("pair must consist of two distinct nodes")
        if a < b:
            return self.paths[(a, b)]
        pth = self.paths[(b, a)]
        return OptimalPath(
            nodes=pth.nodes[::-1],
            capacitance=pth.capacitance,
            security=pth.security,
            efficiency=pth.efficiency,
            m_star=pth.m_star,
            bottleneck=pth.bottleneck,
        )

    def ordered_paths(self):
        """Iterate ((a, b), path) over all N(N-1) ordered pairs."""
        for (a, b), pth in self.paths.items():
            yield (a, b), pth
            yield (b, a), self.path(b, a)


def build_mqe(users: UserSet, alpha: float, p: float, q0: np.ndarray | None = None) -> MQENetwork:
    """Optimal paths for every pair of users and their union network.

    Streams the max-min iteration (two matrices resident at a time) and
    reconstructs one deterministic optimal path per pair.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if q0 is None:
        q0 = capacitance_matrix(users)
    n = q0.shape[0]
    off = ~np.eye(n, dtype=bool)
    q_ceiling = float(q0[off].max())
    best_m, best_q, _ = _best_over_stream(_maxmin_stream(q0), alpha, p, q_ceiling=q_ceiling)
    paths, n_deg, n_mis = _reconstruct_all(q0, best_m, best_q, alpha, p)
    edges = set()
    for pth in paths.values():
        seq = pth.nodes
        edges.update(_sorted_pair(seq[i], seq[i + 1]) for i in range(len(seq) - 1))
    return MQENetwork(
        users=users,
        alpha=alpha,
        p=p,
        paths=paths,
        edges=frozenset(edges),
        n_degenerate_pairs=n_deg,
        n_length_mismatch=n_mis,
    )


# --------------------------------------------------------------------------
# exhaustive cross-check


def brute_force_optimal(q0: np.ndarray, alpha: float, p: float, pair):
    """Best simple path by exhaustive enumeration (n <= 10).

    Returns (path, degeneracy) where degeneracy is the number of simple
    paths attaining the maximal efficiency exactly.
    """
    n = q0.shape[0]
    if n > 10:
        raise ValueError("exhaustive enumeration is limited to n <= 10 nodes")
    j, k = int(pair[0]), int(pair[1])
    if j == k:
        raise ValueError("pair must consist of two distinct nodes")
    ql = q0.tolist()
    others = [v for v in range(n) if v != j and v != k]
    best_nodes = None
    best_eff = -math.inf
    best_q = None
    degeneracy = 0
    for r in range(0, len(others) + 1):
        for mid in itertools.permutations(others, r):
            nodes = (j, *mid, k)
            qmin = math.inf
            prev = j
            for v in nodes[1:]:
                qe = ql[prev][v]
                if qe < qmin:
                    qmin = qe
                prev = v
            eff = efficiency_value(qmin, r, alpha, p)
            if eff > best_eff:
                best_eff = eff
                best_nodes = nodes
                best_q = qmin
                degeneracy = 1
            elif eff == best_eff:
                degeneracy += 1
    bott = None
    for a, b in zip(best_nodes[:-1], best_nodes[1:]):
        if ql[a][b] == best_q:
            bott = _sorted_pair(a, b)
            break
    path = OptimalPath(
        nodes=best_nodes,
        capacitance=best_q,
        security=path_security(len(best_nodes) - 1, p),
        efficiency=best_eff,
        m_star=len(best_nodes) - 2,
        bottleneck=bott,
    )
    return path, degeneracy


# --------------------------------------------------------------------------
# export


def network_document(net: MQENetwork) -> dict:
    """Structured dict describing the network (JSON-serializable)."""
    u = net.users
    d_lam = distance_matrix(u)
    edges = [
        [i, jn, d_lam[i, jn] * u.lambda0, link_capacitance(float(d_lam[i, jn]))]
        for i, jn in sorted(net.edges)
    ]
    paths = [
        [a, b, list(pth.nodes), pth.m_star, pth.capacitance, pth.efficiency]
        for (a, b), pth in sorted(net.paths.items())
    ]
    return {
        "n": net.n,
        "L": u.L,
        "lambda0": u.lambda0,
        "alpha": net.alpha,
        "p": net.p,
        "seed": u.seed,
        "edges": edges,
        "paths": paths,
    }


def save_network(net: MQENetwork, path) -> None:
    """Write the structured network document as JSON."""
    Path(path).write_text(json.dumps(network_document(net)) + "\n")


def write_edge_list(net: MQENetwork, path) -> None:
    """Plain edge list, one "i j d_ij q_ij" per line."""
    doc_edges = network_document(net)["edges"]
    lines = [f"{i} {jn} {d:.17g} {q:.17g}" for i, jn, d, q in doc_edges]
    Path(path).write_text("\n".join(lines) + "\n")
