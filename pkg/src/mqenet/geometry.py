"""Spatial user configurations on a square and the analytic pair-distance law."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

SQRT2 = math.sqrt(2.0)

_cdf_table_cache: tuple[np.ndarray, np.ndarray] | None = None


@dataclass
class UserSet:
    """N users inside an L x L square.

    ``points`` and ``L`` are kept in whatever units they were supplied in
    (the same units as ``lambda0``), so files round-trip bit-for-bit.
    All capacitance formulas consume the views in units of the decay
    length, ``points_lam`` and ``side_lam``.
    """

    points: np.ndarray  # (n, 2), same units as lambda0
    L: float
    lambda0: float = 1.0
    seed: int | None = None  # None for explicitly supplied coordinates

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("points must be an (n, 2) array with n >= 2")
        if not self.L > 0 or not self.lambda0 > 0:
            raise ValueError("L and lambda0 must be positive")
        if pts.min() < 0.0 or pts.max() > self.L:
            raise ValueError("coordinates must lie inside [0, L] x [0, L]")
        pts.setflags(write=False)
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def points_lam(self) -> np.ndarray:
        """Coordinates in units of the decay length."""
        return self.points / self.lambda0

    @property
    def side_lam(self) -> float:
        """Square side in units of the decay length."""
        return self.L / self.lambda0


def sample_users(n: int, L: float, seed: int, lambda0: float = 1.0) -> UserSet:
    """Draw n users uniformly in the square, reproducibly.

    Uses numpy's PCG64 generator with explicit seeding, so the same
    (n, L, seed) always yields bit-identical coordinates, independent of
    platform or caller parallelism.
    """
    if n < 2:
        raise ValueError("need at least 2 users")
    if L <= 0 or lambda0 <= 0:
        raise ValueError("L and lambda0 must be positive")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2)) * L
    return UserSet(points=pts, L=L, lambda0=lambda0, seed=seed)


def distance_matrix(u: UserSet) -> np.ndarray:
    """Pairwise Euclidean distances in units of lambda0 (zero diagonal).

    Coincident users are permitted but flagged: a zero-length link gets
    infinite capacitance downstream, so they are worth knowing about.
    """
    p = u.points_lam
    d = np.hypot(p[:, 0, None] - p[None, :, 0], p[:, 1, None] - p[None, :, 1])
    iu = np.triu_indices(u.n, 1)
    n_dup = int(np.count_nonzero(d[iu] == 0.0))
    if n_dup:
        warnings.warn(
            f"{n_dup} coincident user pair(s); their zero-length links get "
            "infinite capacitance",
            stacklevel=2,
        )
    return d


def distance_pdf(z):
    """Density of the distance between two uniform points in the unit square.

    Two-branch expression with support [0, sqrt(2)]; continuous at the
    branch junction z = 1. Accepts scalars or arrays.
    """
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zz < 0.0):
        raise ValueError("z must be non-negative")
    out = np.zeros_like(zz)
    lo = zz <= 1.0
    zl = zz[lo]
    out[lo] = 2.0 * zl * (np.pi - 4.0 * zl + zl * zl)
    hi = (zz > 1.0) & (zz <= SQRT2)
    zh = zz[hi]
    out[hi] = 2.0 * zh * (
        4.0 * np.arcsin(1.0 / zh) - (2.0 + np.pi) + 4.0 * np.sqrt(zh * zh - 1.0) - zh * zh
    )
    return float(out[0]) if scalar else out


def distance_cdf(z):
    """Cumulative counterpart of distance_pdf, tabulated by quadrature."""
    scalar = np.ndim(z) == 0
    zz = np.clip(np.atleast_1d(np.asarray(z, dtype=float)), 0.0, SQRT2)
    grid, cum = _cdf_table()
    out = np.interp(zz, grid, cum)
    return float(out[0]) if scalar else out


def _cdf_table():
    global _cdf_table_cache
    if _cdf_table_cache is None:
        grid = np.linspace(0.0, SQRT2, 20001)
        pdf = distance_pdf(grid)
        cum = np.concatenate(([0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))))
        cum /= cum[-1]
        _cdf_table_cache = (grid, cum)
    return _cdf_table_cache


def mean_distance_ratio() -> float:
    """Mean pair distance over the unit square (about 0.5214)."""
    val, _ = quad(
        lambda t: t * distance_pdf(t), 0.0, SQRT2,
        points=[1.0], limit=200, epsabs=1e-13, epsrel=1e-13,
    )
    return val


def save_users(u: UserSet, path) -> None:
    """Plain-text export: header "L <value> lambda0 <value>", one "x y" per line.

    Values are written with 17 significant digits so they parse back to
    the exact same floats.
    """
    lines = [f"L {u.L:.17g} lambda0 {u.lambda0:.17g}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in u.points)
    Path(path).write_text("\n".join(lines) + "\n")


def load_users(path) -> UserSet:
    """Read a coordinates file written by save_users (or by hand)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty coordinates file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "L" or head[2] != "lambda0":
        raise ValueError(f"{path}: header must be 'L <value> lambda0 <value>'")
    L, lambda0 = float(head[1]), float(head[3])
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad coordinate line {ln!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return UserSet(points=np.asarray(rows, dtype=float), L=L, lambda0=lambda0, seed=None)
