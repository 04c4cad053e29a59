"""Subjective-score fitting, baseline metrics, correlation and clustering."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy import ndimage

from .erqa import enumerate_shifts, _shift_key, _windows
from .frame_io import Frame, FrameSequence, to_luma

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Bradley-Terry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRecord:
    item_a: Hashable
    item_b: Hashable
    wins_a: float
    wins_b: float

    def __post_init__(self):
        if self.item_a == self.item_b:
            raise ValueError(f"self-comparison of {self.item_a!r}")
        if self.wins_a < 0 or self.wins_b < 0 or self.wins_a + self.wins_b < 1:
            raise ValueError("a comparison needs non-negative wins summing to at least 1")


@dataclass
class AbilityVector:
    abilities: dict
    iterations_used: int
    converged: bool
    loglik_trace: list[float] = field(default_factory=list, repr=False)

    def ranking(self) -> list:
        return sorted(self.abilities, key=lambda k: -self.abilities[k])

    def display_scores(self) -> dict:
        """``ln(ability)`` shifted so the weakest item sits at 0."""
        logs = {k: math.log(v) for k, v in self.abilities.items()}
        low = min(logs.values())
        return {k: v - low for k, v in logs.items()}


class BradleyTerryError(ValueError):
    pass


def _components(items: list, edges: dict[tuple[int, int], float]) -> list[list]:
    parent = list(range(len(items)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in edges:
        parent[find(i)] = find(j)
    groups = defaultdict(list)
    for i, item in enumerate(items):
        groups[find(i)].append(item)
    return sorted(groups.values(), key=lambda g: str(g[0]))


def bt_loglik(p: np.ndarray, wins: np.ndarray) -> float:
    """Log-likelihood of the win matrix ``wins[i, j]`` (i beat j) under abilities ``p``."""
    lp = np.log(p)
    pair = np.logaddexp(lp[:, None], lp[None, :])
    mask = wins > 0
    return float(np.sum(wins[mask] * (lp[:, None] - pair)[mask]))


def bt_fit(
    records: Sequence[ComparisonRecord],
    max_iter: int = 10000,
    tol: float = 1e-9,
    alpha: float = 0.0,
) -> AbilityVector:
    """Maximum-likelihood Bradley-Terry abilities via the MM iteration.

    ``p_i <- W_i / sum_j n_ij / (p_i + p_j)``, renormalized to sum 1, from a
    uniform start.  ``alpha`` adds pseudo-wins to both sides of every record,
    which makes the MLE exist when some item never wins or never loses.
    """
    if not records:
        raise BradleyTerryError("no comparisons given")
    items: list = []
    index = {}
    for r in records:
        for it in (r.item_a, r.item_b):
            if it not in index:
                index[it] = len(items)
                items.append(it)
    n = len(items)
    wins = np.zeros((n, n))
    for r in records:
        i, j = index[r.item_a], index[r.item_b]
        wins[i, j] += r.wins_a + alpha
        wins[j, i] += r.wins_b + alpha

    games = wins + wins.T
    edges = {(i, j): games[i, j] for i in range(n) for j in range(i + 1, n) if games[i, j] > 0}
    comps = _components(items, edges)
    if len(comps) > 1:
        desc = "; ".join("{" + ", ".join(map(str, c)) + "}" for c in comps)
        raise BradleyTerryError(f"comparison graph is disconnected: components {desc}")

    w = wins.sum(axis=1)
    losses = wins.sum(axis=0)
    never_won = [items[i] for i in range(n) if w[i] == 0]
    never_lost = [items[i] for i in range(n) if losses[i] == 0]
    if never_won or never_lost:
        parts = []
        if never_won:
            parts.append("zero wins: " + ", ".join(map(str, never_won)))
        if never_lost:
            parts.append("zero losses: " + ", ".join(map(str, never_lost)))
        raise BradleyTerryError(
            "maximum-likelihood abilities do not exist (" + "; ".join(parts) + "); "
            "use alpha > 0 to smooth"
        )

    p = np.full(n, 1.0 / n)
    trace = [bt_loglik(p, wins)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        denom = (games / (p[:, None] + p[None, :])).sum(axis=1)
        new = w / denom
        new /= new.sum()
        delta = np.max(np.abs(new - p))
        p = new
        trace.append(bt_loglik(p, wins))
        if delta < tol:
            converged = True
            break
    return AbilityVector(
        abilities={items[i]: float(p[i]) for i in range(n)},
        iterations_used=it,
        converged=converged,
        loglik_trace=trace,
    )


# --------------------------------------------------------------------------
# Correlation
# --------------------------------------------------------------------------


def _pair_vectors(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError("need at least 3 observations")
    return x, y


def plcc(x, y) -> float:
    """Pearson linear correlation coefficient."""
    x, y = _pair_vectors(x, y)
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined: zero variance")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    x = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def srcc(x, y) -> float:
    """Spearman rank correlation (Pearson on average ranks)."""
    x, y = _pair_vectors(x, y)
    return plcc(average_ranks(x), average_ranks(y))


# --------------------------------------------------------------------------
# K-medoids (PAM)
# --------------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    rows: list[str]
    cols: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.rows)} rows x {len(self.cols)} cols"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix has missing or non-finite values")


@dataclass
class KMedoidsResult:
    medoids: list[str]
    assignment: dict[str, str]
    cost: float
    build_cost: float
    dropped_columns: list[str]
    labels: np.ndarray = field(repr=False)
    medoid_index: list[int] = field(repr=False)


def standardize(values: np.ndarray, cols: Sequence[str] | None = None) -> tuple[np.ndarray, list[str]]:
    """Z-score columns; zero-variance columns are dropped and reported."""
    values = np.asarray(values, dtype=np.float64)
    cols = list(cols) if cols is not None else [str(i) for i in range(values.shape[1])]
    std = values.std(axis=0)
    keep = std > 0
    dropped = [c for c, k in zip(cols, keep) if not k]
    if dropped:
        log.warning("dropping constant feature columns: %s", ", ".join(dropped))
    z = (values[:, keep] - values[:, keep].mean(axis=0)) / std[keep]
    return z, dropped


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def pam(dist: np.ndarray, k: int, seed: int = 0) -> tuple[list[int], float, float]:
    """PAM on a precomputed distance matrix.

    Returns ``(medoids, final_cost, build_cost)``.  The seed only fixes the
    order in which candidates are visited, which settles exact ties.
    """
    n = dist.shape[0]
    order = np.random.default_rng(seed).permutation(n)

    medoids: list[int] = []
    nearest = np.full(n, np.inf)
    for _ in range(k):
        best, best_cost = -1, np.inf
        for c in order:
            if c in medoids:
                continue
            cost = np.minimum(nearest, dist[c]).sum()
            if cost < best_cost:
                best, best_cost = int(c), cost
        medoids.append(best)
        nearest = np.minimum(nearest, dist[best])
    build_cost = float(nearest.sum())

    cost = build_cost
    while True:
        d_m = dist[medoids]  # (k, n)
        best_swap, best_cost = None, cost
        for mi in range(k):
            others = np.delete(d_m, mi, axis=0)
            base = others.min(axis=0) if others.size else np.full(n, np.inf)
            for c in order:
                if c in medoids:
                    continue
                trial = np.minimum(base, dist[c]).sum()
                # strict improvement beyond rounding noise prevents cycling
                if trial < best_cost - 1e-12 * max(1.0, abs(best_cost)):
                    best_swap, best_cost = (mi, int(c)), trial
        if best_swap is None:
            break
        medoids[best_swap[0]] = best_swap[1]
        cost = float(dist[medoids].min(axis=0).sum())
    return medoids, cost, build_cost


def kmedoids(features: FeatureMatrix, k: int = 6, seed: int = 0, zscore: bool = True) -> KMedoidsResult:
    """Cluster models and return the medoid of each cluster as its representative."""
    n = len(features.rows)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if zscore:
        x, dropped = standardize(features.values, features.cols)
    else:
        x, dropped = features.values, []
    dist = pairwise_distances(x)
    medoids, cost, build_cost = pam(dist, k, seed)
    labels = np.argmin(dist[medoids], axis=0)
    # a medoid always belongs to its own cluster, even at zero-distance ties
    for ci, m in enumerate(medoids):
        labels[m] = ci
    names = features.rows
    return KMedoidsResult(
        medoids=[names[m] for m in medoids],
        assignment={names[i]: names[medoids[labels[i]]] for i in range(n)},
        cost=cost,
        build_cost=build_cost,
        dropped_columns=dropped,
        labels=labels,
        medoid_index=list(medoids),
    )


# --------------------------------------------------------------------------
# PSNR / SSIM
# --------------------------------------------------------------------------


def _same_shape(gt, dist) -> tuple[np.ndarray, np.ndarray]:
    a, b = Frame.of(gt).data, Frame.of(dist).data
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse_to_psnr(mse: float) -> float:
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def psnr(gt, dist) -> float:
    """PSNR in dB with peak 1.0; identical frames give ``inf``."""
    a, b = _same_shape(gt, dist)
    return mse_to_psnr(float(np.mean((a - b) ** 2)))


SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def ssim_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def ssim(gt, dist) -> float:
    """Mean single-scale SSIM over every fully-inside 11x11 Gaussian window."""
    a = to_luma(gt).data
    b = to_luma(dist).data
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"frame too small for SSIM: need at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    g = ssim_window()
    r = SSIM_WINDOW // 2

    def filt(img):
        out = ndimage.correlate1d(img, g, axis=0, mode="constant")
        out = ndimage.correlate1d(out, g, axis=1, mode="constant")
        return out[r:-r, r:-r]

    c1, c2 = SSIM_K1**2, SSIM_K2**2
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# --------------------------------------------------------------------------
# Global shift diagnostics
# --------------------------------------------------------------------------


def global_shift_psnr(gt, dist, radius: int = 5) -> tuple[int, int, float]:
    """Whole-frame shift of ``dist`` relative to ``gt`` that maximizes PSNR.

    Uses the same convention as the metric: shift ``(dx, dy)`` compares
    ``gt[y, x]`` with ``dist[y + dy, x + dx]`` over the overlap.
    """
    a, b = _same_shape(gt, dist)
    best = None
    for dx, dy in enumerate_shifts(radius):
        win = _windows(a.shape[:2], dx, dy)
        if win is None:
            continue
        s, t = win
        mse = float(np.mean((a[s] - b[t]) ** 2))
        key = (mse, *_shift_key((dx, dy)))
        if best is None or key < best[0]:
            best = (key, dx, dy)
    if best is None:
        raise ValueError("no shift overlaps the frame")
    (mse, *_), dx, dy = best
    return dx, dy, mse_to_psnr(mse)


@dataclass
class ShiftHistogram:
    radius: int
    grid: np.ndarray  # counts, indexed [dy + radius, dx + radius]
    per_frame: list[tuple[int, int, float]]

    def count(self, dx: int, dy: int) -> int:
        return int(self.grid[dy + self.radius, dx + self.radius])


def shift_distribution(gt: FrameSequence | Sequence, dist: FrameSequence | Sequence, radius: int = 5) -> ShiftHistogram:
    gt, dist = list(gt), list(dist)
    if len(gt) != len(dist):
        raise ValueError(f"length mismatch: {len(gt)} vs {len(dist)} frames")
    grid = np.zeros((2 * radius + 1, 2 * radius + 1), dtype=np.int64)
    per_frame = []
    for g, d in zip(gt, dist):
        dx, dy, value = global_shift_psnr(g, d, radius)
        grid[dy + radius, dx + radius] += 1
        per_frame.append((dx, dy, value))
    return ShiftHistogram(radius=radius, grid=grid, per_frame=per_frame)
