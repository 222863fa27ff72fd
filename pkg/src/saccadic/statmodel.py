"""
Joint distributions of saccade amplitude and orientation.

A :class:`JointSaccadeDistribution` stores a kernel density estimate of
``p(d, phi)`` on a regular ``amp_bins x ori_bins`` grid, with ``d`` in degrees
of visual angle on ``[0, amp_max]`` and ``phi`` in degrees on ``[0, 360)``.
Densities are per square degree: ``sum(density) * cell_area == 1``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize
from scipy.fft import dct
from scipy.special import kolmogorov, ndtr

from .eyedata import FixationSequence, as_sample_array, saccade_vectors
from .errors import ConfigurationError, EstimationError, StarvedCellError, ValidationError

DEFAULT_AMP_BINS = 80
DEFAULT_AMP_MAX = 20.0
DEFAULT_ORI_BINS = 120
AMP_BANDWIDTH_FLOOR = 0.1
ORI_BANDWIDTH_FLOOR = 1.0
GRID = 3


@dataclass
class JointSaccadeDistribution:
    amp_bins: int
    amp_max: float
    ori_bins: int
    density: np.ndarray
    bandwidth_d: float
    bandwidth_phi: float
    sample_count: int

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=np.float64)
        if self.density.shape != (self.amp_bins, self.ori_bins):
            raise ValidationError(
                f"density shape {self.density.shape} != ({self.amp_bins}, {self.ori_bins})"
            )
        if np.any(self.density < 0) or not np.all(np.isfinite(self.density)):
            raise ValidationError("density must be finite and non-negative")
        if not (self.bandwidth_d > 0 and self.bandwidth_phi > 0):
            raise ValidationError("bandwidths must be positive")
        mass = self.density.sum() * self.cell_area
        if abs(mass - 1.0) > 1e-6:
            raise ValidationError(f"density integrates to {mass}, expected 1")

    @property
    def amp_step(self) -> float:
        return self.amp_max / self.amp_bins

    @property
    def ori_step(self) -> float:
        return 360.0 / self.ori_bins

    @property
    def cell_area(self) -> float:
        return self.amp_step * self.ori_step

    @property
    def amp_centers(self) -> np.ndarray:
        return (np.arange(self.amp_bins) + 0.5) * self.amp_step

    @property
    def ori_centers(self) -> np.ndarray:
        return (np.arange(self.ori_bins) + 0.5) * self.ori_step

    def probabilities(self) -> np.ndarray:
        """Probability mass per bin (sums to one)."""
        return self.density * self.cell_area

    def amplitude_marginal(self) -> np.ndarray:
        """Probability mass per amplitude bin."""
        return self.probabilities().sum(axis=1)

    def orientation_marginal(self) -> np.ndarray:
        return self.probabilities().sum(axis=0)

    def same_grid(self, other: "JointSaccadeDistribution") -> bool:
        return (
            self.amp_bins == other.amp_bins
            and self.ori_bins == other.ori_bins
            and math.isclose(self.amp_max, other.amp_max)
        )

    def circular_mean_orientation(self) -> float:
        """Mean direction (deg) of the orientation marginal."""
        w = self.orientation_marginal()
        rad = np.radians(self.ori_centers)
        return float(np.degrees(np.arctan2((w * np.sin(rad)).sum(), (w * np.cos(rad)).sum())) % 360)

    def to_dict(self) -> dict:
        return {
            "amp_bins": self.amp_bins,
            "amp_max_deg": self.amp_max,
            "ori_bins": self.ori_bins,
            "bandwidth_d_deg": self.bandwidth_d,
            "bandwidth_phi_deg": self.bandwidth_phi,
            "sample_count": self.sample_count,
            "density": [float(v) for v in self.density.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JointSaccadeDistribution":
        amp_bins, ori_bins = int(data["amp_bins"]), int(data["ori_bins"])
        return cls(
            amp_bins=amp_bins,
            amp_max=float(data["amp_max_deg"]),
            ori_bins=ori_bins,
            density=np.asarray(data["density"], dtype=np.float64).reshape(amp_bins, ori_bins),
            bandwidth_d=float(data["bandwidth_d_deg"]),
            bandwidth_phi=float(data["bandwidth_phi_deg"]),
            sample_count=int(data["sample_count"]),
        )


@dataclass
class SpatialDistributionSet:
    """Nine joint distributions, one per cell of a 3x3 partition of the image.

    ``cells[i][j]`` governs rows ``[i*H/3, (i+1)*H/3)`` and columns
    ``[j*W/3, (j+1)*W/3)``.
    """

    cells: list[list[JointSaccadeDistribution]]
    width: int
    height: int

    def __post_init__(self):
        if len(self.cells) != GRID or any(len(row) != GRID for row in self.cells):
            raise ValidationError("a spatial distribution set needs exactly 3x3 cells")
        first = self.cells[0][0]
        if not all(first.same_grid(c) for row in self.cells for c in row):
            raise ValidationError("all cells must share the same bin grid")

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        j = min(int(x * GRID // self.width), GRID - 1)
        i = min(int(y * GRID // self.height), GRID - 1)
        return max(i, 0), max(j, 0)

    def cell_for(self, x: float, y: float) -> JointSaccadeDistribution:
        i, j = self.cell_index(x, y)
        return self.cells[i][j]

    def pooled(self) -> JointSaccadeDistribution:
        """Sample-count weighted mixture of the nine cells."""
        flat = [c for row in self.cells for c in row]
        weights = np.array([c.sample_count for c in flat], dtype=np.float64)
        weights /= weights.sum()
        density = sum(w * c.density for w, c in zip(weights, flat))
        ref = flat[0]
        density = density / (density.sum() * ref.cell_area)
        return JointSaccadeDistribution(
            ref.amp_bins,
            ref.amp_max,
            ref.ori_bins,
            density,
            float(sum(w * c.bandwidth_d for w, c in zip(weights, flat))),
            float(sum(w * c.bandwidth_phi for w, c in zip(weights, flat))),
            int(sum(c.sample_count for c in flat)),
        )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cells": [[c.to_dict() for c in row] for row in self.cells],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpatialDistributionSet":
        cells = [[JointSaccadeDistribution.from_dict(c) for c in row] for row in data["cells"]]
        return cls(cells, int(data["width"]), int(data["height"]))


class KsResult(NamedTuple):
    statistic: float
    p_value: float


class BotevBandwidth(NamedTuple):
    bandwidth_d: float
    bandwidth_phi: float
    converged: bool


# --------------------------------------------------------------------------
# serialization


def save_distribution(dist, path) -> None:
    Path(path).write_text(json.dumps(dist.to_dict()), encoding="utf-8")


def load_distribution(path):
    """Load either a single joint distribution or a 3x3 spatial set."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "cells" in data:
        return SpatialDistributionSet.from_dict(data)
    return JointSaccadeDistribution.from_dict(data)


# --------------------------------------------------------------------------
# bandwidth selection


def _circular_std_deg(phi_deg: np.ndarray) -> float:
    rad = np.radians(phi_deg)
    r = math.hypot(np.mean(np.cos(rad)), np.mean(np.sin(rad)))
    if r >= 1.0:
        return 0.0
    if r <= 0.0:
        return math.inf
    return math.degrees(math.sqrt(-2.0 * math.log(r)))


def silverman_bandwidth(samples) -> tuple[float, float]:
    """Rule-of-thumb bandwidths ``sigma_k * n**(-1/6)`` for a 2D Gaussian kernel.

    The orientation spread is the circular standard deviation. Zero spread
    is floored at 0.1 deg (amplitude) and 1 deg (orientation).
    """
    arr = as_sample_array(samples)
    n = len(arr)
    if n < 2:
        raise EstimationError(f"bandwidth selection needs at least 2 samples, got {n}")
    factor = n ** (-1.0 / 6.0)
    h_d = float(np.std(arr[:, 0], ddof=1)) * factor
    sd_phi = _circular_std_deg(arr[:, 1])
    # an orientation spread beyond a uniform circle carries no information
    h_phi = min(sd_phi, 360.0) * factor
    return max(h_d, AMP_BANDWIDTH_FLOOR), max(h_phi, ORI_BANDWIDTH_FLOOR)


def _isj_fixed_point(t, n, k_sq, a_sq):
    ell = 7
    f = 2.0 * math.pi ** (2 * ell) * np.sum(k_sq**ell * a_sq * np.exp(-k_sq * math.pi**2 * t))
    for s in range(ell - 1, 1, -1):
        k0 = np.prod(np.arange(1, 2 * s, 2)) / math.sqrt(2 * math.pi)
        const = (1 + 0.5 ** (s + 0.5)) / 3.0
        time = (2 * const * k0 / (n * f)) ** (2.0 / (3 + 2 * s))
        f = 2.0 * math.pi ** (2 * s) * np.sum(k_sq**s * a_sq * np.exp(-k_sq * math.pi**2 * time))
    return t - (2.0 * n * math.sqrt(math.pi) * f) ** (-0.4)


def isj_bandwidth(x: np.ndarray, grid_size: int = 2**14, maxiter: int = 100) -> float | None:
    """Improved Sheather-Jones bandwidth via the diffusion fixed point.

    Returns ``None`` when the fixed-point equation has no root in the
    search interval or the solver does not converge.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    lo, hi = x.min(), x.max()
    span = hi - lo
    if span <= 0:
        return None
    lo, hi = lo - span / 10.0, hi + span / 10.0
    span = hi - lo
    counts, _ = np.histogram(x, bins=grid_size, range=(lo, hi))
    a = dct(counts / n, type=2)
    k_sq = np.arange(1, grid_size, dtype=np.float64) ** 2
    a_sq = (a[1:] / 2.0) ** 2

    def g(t):
        return _isj_fixed_point(t, n, k_sq, a_sq)

    upper = 0.1
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for _ in range(4):
            g_lo, g_hi = g(1e-12), g(upper)
            if np.isfinite(g_lo) and np.isfinite(g_hi) and g_lo * g_hi < 0:
                break
            upper *= 2.0
        else:
            return None
        try:
            t_star, info = optimize.brentq(g, 1e-12, upper, maxiter=maxiter, full_output=True)
        except (RuntimeError, ValueError):
            return None
    if not info.converged or not t_star > 0:
        return None
    return math.sqrt(t_star) * span


def _unwrap_angles(phi_deg: np.ndarray) -> np.ndarray:
    """Rotate angles so the widest empty arc sits at the 0/360 seam."""
    s = np.sort(np.mod(phi_deg, 360.0))
    gaps = np.diff(np.concatenate([s, [s[0] + 360.0]]))
    start = s[(np.argmax(gaps) + 1) % len(s)]
    return np.mod(phi_deg - start, 360.0)


def botev_bandwidth(samples, maxiter: int = 100) -> BotevBandwidth:
    """Per-dimension diffusion (improved Sheather-Jones) bandwidths.

    Falls back to :func:`silverman_bandwidth` for any dimension whose fixed
    point does not converge; ``converged`` is then ``False`` and a
    ``RuntimeWarning`` is emitted.
    """
    arr = as_sample_array(samples)
    if len(arr) < 50:
        raise EstimationError(f"diffusion bandwidth needs at least 50 samples, got {len(arr)}")
    fallback = silverman_bandwidth(arr)
    h_d = isj_bandwidth(arr[:, 0], maxiter=maxiter)
    h_phi = isj_bandwidth(_unwrap_angles(arr[:, 1]), maxiter=maxiter)
    converged = h_d is not None and h_phi is not None
    if not converged:
        warnings.warn("diffusion bandwidth did not converge; using rule-of-thumb", RuntimeWarning)
    return BotevBandwidth(
        float(max(h_d, AMP_BANDWIDTH_FLOOR)) if h_d is not None else fallback[0],
        float(max(h_phi, ORI_BANDWIDTH_FLOOR)) if h_phi is not None else fallback[1],
        converged,
    )


def resolve_bandwidth(samples, bandwidth) -> tuple[float, float]:
    if isinstance(bandwidth, str):
        if bandwidth == "silverman":
            return silverman_bandwidth(samples)
        if bandwidth in ("botev", "isj", "diffusion"):
            h = botev_bandwidth(samples)
            return h.bandwidth_d, h.bandwidth_phi
        raise ConfigurationError(f"unknown bandwidth rule {bandwidth!r}")
    h_d, h_phi = (float(v) for v in bandwidth)
    if not (h_d > 0 and h_phi > 0):
        raise ConfigurationError(f"bandwidths must be positive, got {bandwidth}")
    return h_d, h_phi


# --------------------------------------------------------------------------
# estimation


def _amplitude_weights(d, edges, h):
    """Kernel mass of each sample in each amplitude bin, reflected at d = 0."""
    z = (edges[:, None] - d[None, :]) / h
    zr = (edges[:, None] + d[None, :]) / h
    cdf = ndtr(z) + ndtr(zr)
    return np.diff(cdf, axis=0)


def _orientation_weights(phi, edges, h):
    """Kernel mass of each sample in each orientation bin, wrapped on the circle."""
    wraps = int(math.ceil(6.0 * h / 360.0))
    out = np.zeros((len(edges) - 1, len(phi)))
    for k in range(-wraps - 1, wraps + 2):
        z = (edges[:, None] - (phi[None, :] + 360.0 * k)) / h
        out += np.diff(ndtr(z), axis=0)
    return out


def estimate_joint(
    samples,
    amp_bins: int = DEFAULT_AMP_BINS,
    amp_max: float = DEFAULT_AMP_MAX,
    ori_bins: int = DEFAULT_ORI_BINS,
    bandwidth="silverman",
) -> JointSaccadeDistribution:
    """Gaussian kernel density estimate of saccade amplitude and orientation.

    Parameters
    ----------
    samples : sequence of SaccadeSample or (n, 2) array
        Amplitudes (deg) and orientations (deg). Zero-amplitude saccades
        are ignored since their orientation is undefined.
    amp_bins, amp_max, ori_bins : grid geometry
    bandwidth : {"silverman", "botev"} or (h_d, h_phi)
        Rule name or explicit kernel standard deviations in degrees.

    Notes
    -----
    Each sample's kernel mass is integrated over every bin; orientation is
    wrapped around the circle and amplitude mass below zero is reflected
    back. The result is renormalized over the grid.
    """
    if amp_bins < 1 or ori_bins < 1 or not amp_max > 0:
        raise ConfigurationError("bin counts and amp_max must be positive")
    arr = as_sample_array(samples)
    usable = arr[arr[:, 0] > 0]
    if len(usable) < 2:
        raise EstimationError(f"need at least 2 non-zero saccades, got {len(usable)}")
    if usable[:, 0].max() > amp_max:
        raise ValidationError(
            f"amp_max {amp_max} below the largest amplitude {usable[:, 0].max():.4g}"
        )
    h_d, h_phi = resolve_bandwidth(usable, bandwidth)
    d, phi = usable[:, 0], np.mod(usable[:, 1], 360.0)
    amp_edges = np.linspace(0.0, amp_max, amp_bins + 1)
    ori_edges = np.linspace(0.0, 360.0, ori_bins + 1)
    mass = _amplitude_weights(d, amp_edges, h_d) @ _orientation_weights(phi, ori_edges, h_phi).T
    total = mass.sum()
    if not total > 0:
        raise EstimationError("kernel mass vanished on the grid")
    cell_area = (amp_max / amp_bins) * (360.0 / ori_bins)
    return JointSaccadeDistribution(
        amp_bins, float(amp_max), ori_bins, mass / (total * cell_area), h_d, h_phi, len(usable)
    )


def cell_of_points(xy: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    rows = np.clip((xy[:, 1] * GRID // height).astype(int), 0, GRID - 1)
    cols = np.clip((xy[:, 0] * GRID // width).astype(int), 0, GRID - 1)
    return rows, cols


def spatial_samples(
    sequences: Sequence[FixationSequence], ppd: float
) -> tuple[list[list[np.ndarray]], int, int]:
    """Saccades grouped by the 3x3 cell of their origin fixation."""
    if not sequences:
        raise EstimationError("no fixation sequences given")
    width, height = sequences[0].width, sequences[0].height
    buckets = [[[] for _ in range(GRID)] for _ in range(GRID)]
    for seq in sequences:
        if (seq.width, seq.height) != (width, height):
            raise ValidationError("all sequences must share the same image geometry")
        xy = seq.xy()
        if len(xy) < 2:
            continue
        amp, ori = saccade_vectors(xy, ppd)
        rows, cols = cell_of_points(xy[:-1], width, height)
        for r, c, a, o in zip(rows, cols, amp, ori):
            buckets[r][c].append((a, o))
    cells = [[np.array(b, dtype=np.float64).reshape(-1, 2) for b in row] for row in buckets]
    return cells, width, height


def estimate_spatial_set(
    sequences: Sequence[FixationSequence],
    ppd: float,
    amp_bins: int = DEFAULT_AMP_BINS,
    amp_max: float = DEFAULT_AMP_MAX,
    ori_bins: int = DEFAULT_ORI_BINS,
    bandwidth="silverman",
    min_samples: int = 2,
) -> SpatialDistributionSet:
    """Estimate one joint distribution per 3x3 cell of the origin fixation."""
    cells, width, height = spatial_samples(sequences, ppd)
    counts = {(i, j): int((cells[i][j][:, 0] > 0).sum()) for i in range(GRID) for j in range(GRID)}
    starved = [k for k, v in counts.items() if v < max(min_samples, 2)]
    if starved:
        raise StarvedCellError(starved, counts, max(min_samples, 2))
    estimated = [
        [estimate_joint(cells[i][j], amp_bins, amp_max, ori_bins, bandwidth) for j in range(GRID)]
        for i in range(GRID)
    ]
    return SpatialDistributionSet(estimated, width, height)


# --------------------------------------------------------------------------
# evaluation


class DensityLookup:
    """Bilinear interpolation stencil for fixed query points on a bin grid.

    The stencil depends only on the grid geometry, so one lookup can be
    applied to the density of every cell sharing that grid.
    """

    def __init__(self, amp_bins, amp_max, ori_bins, d, phi):
        d = np.asarray(d, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        if np.any(d < 0):
            raise ValidationError("saccade amplitude must be non-negative")
        self.shape = np.broadcast(d, phi).shape
        d, phi = np.broadcast_arrays(d, phi)
        amp_step = amp_max / amp_bins
        ori_step = 360.0 / ori_bins
        u = np.clip(d / amp_step - 0.5, 0.0, amp_bins - 1)
        i0 = np.minimum(np.floor(u).astype(np.intp), max(amp_bins - 2, 0))
        wu = u - i0
        i1 = np.minimum(i0 + 1, amp_bins - 1)
        v = np.mod(phi, 360.0) / ori_step - 0.5
        j_floor = np.floor(v)
        wv = v - j_floor
        j0 = np.mod(j_floor.astype(np.intp), ori_bins)
        j1 = np.mod(j0 + 1, ori_bins)
        self.ori_bins = ori_bins
        self.flat = [
            (i0 * ori_bins + j0).ravel(),
            (i0 * ori_bins + j1).ravel(),
            (i1 * ori_bins + j0).ravel(),
            (i1 * ori_bins + j1).ravel(),
        ]
        self.weights = [
            ((1 - wu) * (1 - wv)).ravel(),
            ((1 - wu) * wv).ravel(),
            (wu * (1 - wv)).ravel(),
            (wu * wv).ravel(),
        ]
        self.outside = (d > amp_max).ravel()

    def apply(self, density: np.ndarray) -> np.ndarray:
        flat = density.ravel()
        out = sum(w * flat[idx] for idx, w in zip(self.flat, self.weights))
        out[self.outside] = 0.0
        return out.reshape(self.shape)


def evaluate_density(dist: JointSaccadeDistribution, d, phi):
    """Density at ``(d, phi)``: bilinear between bin centers, circular in phi.

    Amplitudes beyond ``amp_max`` have zero density; below the first bin
    center and above the last one the edge value is held.
    """
    lookup = DensityLookup(dist.amp_bins, dist.amp_max, dist.ori_bins, d, phi)
    out = lookup.apply(dist.density)
    return float(out) if out.ndim == 0 else out


def kl_divergence(p, q, eps: float = 1e-12) -> float:
    """``sum p * ln(p / q)`` after normalizing both and flooring ``q`` at ``eps``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {q.shape}")
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValidationError("distributions must have positive mass")
    p = p / p.sum()
    q = np.maximum(q / q.sum(), eps)
    mask = p > 0
    return float(max(np.sum(p[mask] * np.log(p[mask] / q[mask])), 0.0))


# --------------------------------------------------------------------------
# two-sample two-dimensional Kolmogorov-Smirnov test


def _quadrant_fractions(points: np.ndarray, origins: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Fraction of ``points`` in each quadrant around every origin.

    Quadrants split at ``x <= x0`` / ``y <= y0``; returns ``(m, 4)``.
    """
    n = len(points)
    xs = np.sort(points[:, 0])
    ys = np.sort(points[:, 1])
    left = np.searchsorted(xs, origins[:, 0], side="right")
    below = np.searchsorted(ys, origins[:, 1], side="right")
    both = np.empty(len(origins), dtype=np.int64)
    px, py = points[:, 0], points[:, 1]
    for start in range(0, len(origins), chunk):
        o = origins[start : start + chunk]
        both[start : start + chunk] = np.count_nonzero(
            (px[None, :] <= o[:, :1]) & (py[None, :] <= o[:, 1:2]), axis=1
        )
    out = np.column_stack([both, left - both, below - both, n - left - below + both])
    return out / n


def ks2d_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of the two largest quadrant discrepancies, origins taken in each set."""
    d_a = np.abs(_quadrant_fractions(a, a) - _quadrant_fractions(b, a)).max()
    d_b = np.abs(_quadrant_fractions(a, b) - _quadrant_fractions(b, b)).max()
    return float(0.5 * (d_a + d_b))


def _pearson(x: np.ndarray) -> float:
    sx, sy = x[:, 0].std(), x[:, 1].std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.mean((x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())) / (sx * sy))


def ks2d_test(a, b, n_draw: int = 5000, seed: int = 0) -> KsResult:
    """Peacock-style two-sample KS test in the (amplitude, orientation) plane.

    Sets larger than ``n_draw`` are subsampled without replacement; the
    same seeded index draw is used for both sets, so the test is symmetric
    in its arguments. The p-value uses the asymptotic Kolmogorov
    distribution with the correlation-adjusted effective sample size.
    """
    a = as_sample_array(a)
    b = as_sample_array(b)
    if len(a) < 10 or len(b) < 10:
        raise ValidationError(f"KS test needs at least 10 samples per set, got {len(a)} and {len(b)}")
    if n_draw < 10:
        raise ConfigurationError("n_draw must be at least 10")

    def draw(x):
        if len(x) <= n_draw:
            return x
        return x[np.random.default_rng(seed).choice(len(x), n_draw, replace=False)]

    a, b = draw(a), draw(b)
    stat = ks2d_statistic(a, b)
    n_eff = len(a) * len(b) / (len(a) + len(b))
    rr = math.sqrt(1.0 - 0.5 * (_pearson(a) ** 2 + _pearson(b) ** 2))
    sq = math.sqrt(n_eff)
    lam = sq * stat / (1.0 + rr * (0.25 - 0.75 / sq))
    return KsResult(stat, float(min(1.0, kolmogorov(lam))))
