"""
Stochastic scanpath generation.

The next fixation is drawn from a transition probability over every pixel
``x`` given the previous fixation ``x_prev``::

    p(x | x_prev) ~ saliency(x) * memory(x) * prior(d(x, x_prev), phi(x, x_prev))

``candidate_count`` pixels are sampled from it and the winner maximizes
``saliency * prior / distance``. A profile whose ``distribution`` is ``None``
uses a flat prior (``prior == 1`` everywhere).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateMapError, ValidationError
from .eyedata import (
    DEFAULT_PPD,
    FixationPoint,
    SaliencyGrid,
    as_sample_array,
    displacement_polar,
    saccade_vectors,
)
from .statmodel import (
    DEFAULT_AMP_MAX,
    DensityLookup,
    JointSaccadeDistribution,
    SpatialDistributionSet,
    estimate_joint,
    evaluate_density,
    kl_divergence,
    load_distribution,
)

SALIENCY_FLOOR = 1e-9
IOR_TRUNCATE = 4.0
D_FLOOR = 0.25


@dataclass
class ViewerProfile:
    """Configuration of one simulated viewer population.

    Attributes
    ----------
    distribution : SpatialDistributionSet, JointSaccadeDistribution or None
        Saccade prior. A single distribution applies everywhere; ``None``
        stands for the flat prior.
    candidate_count : int
        Number of candidates drawn per step.
    memory_span : int
        Fixations needed for an attended location to fully recover.
    ppd : float
        Pixels per degree of visual angle.
    inhibition_radius : float
        Std (deg) of the Gaussian inhibition around attended locations.
    jacobian_correction : bool
        Divide the prior by the saccade amplitude when mapping it to pixels.
    """

    distribution: SpatialDistributionSet | JointSaccadeDistribution | None
    candidate_count: int = 5
    memory_span: int = 5
    ppd: float = DEFAULT_PPD
    inhibition_radius: float = 2.0
    jacobian_correction: bool = False

    def __post_init__(self):
        if self.candidate_count < 1:
            raise ConfigurationError("candidate_count must be >= 1")
        if self.memory_span < 0:
            raise ConfigurationError("memory_span must be >= 0")
        if not self.ppd > 0:
            raise ConfigurationError("ppd must be positive")
        if not self.inhibition_radius > 0:
            raise ConfigurationError("inhibition_radius must be positive")

    def prior_at(self, x: float, y: float) -> JointSaccadeDistribution | None:
        if isinstance(self.distribution, SpatialDistributionSet):
            return self.distribution.cell_for(x, y)
        return self.distribution

    def with_uniform_prior(self) -> "ViewerProfile":
        return replace(self, distribution=None)

    def non_spatial(self) -> "ViewerProfile":
        """Same profile with the 3x3 set collapsed to its pooled distribution."""
        if isinstance(self.distribution, SpatialDistributionSet):
            return replace(self, distribution=self.distribution.pooled())
        return self

    def reference_distribution(self) -> JointSaccadeDistribution | None:
        if isinstance(self.distribution, SpatialDistributionSet):
            return self.distribution.pooled()
        return self.distribution


@dataclass
class MemoryState:
    """Recently attended locations, newest first, with their ages in fixations."""

    capacity: int
    attended: list[tuple[FixationPoint, int]] = field(default_factory=list)

    def push(self, point: FixationPoint) -> None:
        """Attend ``point``: age everything, forget the fully recovered ones."""
        kept = [
            (p, age + 1)
            for p, age in self.attended
            if age + 1 < self.capacity and _pixel(p) != _pixel(point)
        ]
        self.attended = ([(point, 0)] + kept) if self.capacity > 0 else []


@dataclass
class Scanpath:
    image_id: str
    seed: int
    fixations: list[FixationPoint]

    def xy(self) -> np.ndarray:
        return np.array([(f.x, f.y) for f in self.fixations], dtype=np.float64).reshape(-1, 2)


# --------------------------------------------------------------------------
# model terms


def _residual(age: int, span: int) -> float:
    if span <= 0:
        return 0.0
    return max(0.0, 1.0 - age / span)


def memory_weight(x, memory: MemoryState, profile: ViewerProfile) -> float:
    """Inhibition-of-return factor in ``[0, 1]`` at pixel ``x = (col, row)``.

    Points are snapped to the pixel containing them before measuring
    distances.

    Each remembered location multiplies the factor by
    ``1 - r(age) * G(dist)`` where ``r(age) = max(0, 1 - age/T)`` and ``G`` is
    a unit-peak Gaussian of std ``s = inhibition_radius * ppd`` pixels,
    truncated to zero beyond ``4 s``.
    """
    px, py = _pixel(x)
    sigma = profile.inhibition_radius * profile.ppd
    reach = IOR_TRUNCATE * sigma
    factor = 1.0
    for loc, age in memory.attended:
        r = _residual(age, memory.capacity)
        lx, ly = _pixel(loc)
        dist_sq = (px - lx) ** 2 + (py - ly) ** 2
        if r > 0 and dist_sq <= reach**2:
            factor *= 1.0 - r * math.exp(-dist_sq / (2.0 * sigma**2))
    return min(max(factor, 0.0), 1.0)


def _xy(x) -> tuple[float, float]:
    if isinstance(x, FixationPoint):
        return float(x.x), float(x.y)
    return float(x[0]), float(x[1])


def _pixel(x) -> tuple[int, int]:
    px, py = _xy(x)
    return int(math.floor(px)), int(math.floor(py))


class _Simulator:
    """Per-(saliency, profile) state shared by every step and path.

    Prior kernels tabulate the prior at every pixel displacement up to
    ``amp_max``; a step only touches the window of the image they cover.
    """

    def __init__(self, saliency: SaliencyGrid, profile: ViewerProfile):
        dist = profile.distribution
        if isinstance(dist, SpatialDistributionSet) and (dist.width, dist.height) != (
            saliency.width,
            saliency.height,
        ):
            raise ValidationError(
                f"saliency is {saliency.width}x{saliency.height} but the distribution set "
                f"was estimated on {dist.width}x{dist.height}"
            )
        peak = saliency.values.max()
        if not peak > 0:
            raise ValidationError("saliency map is zero everywhere")
        self.profile = profile
        self.height, self.width = saliency.shape
        self.saliency = np.maximum(saliency.values, SALIENCY_FLOOR * peak)
        sigma = profile.inhibition_radius * profile.ppd
        self.sigma_sq2 = 2.0 * sigma**2
        # memory locations sit on whole pixels, so one truncated Gaussian serves them all
        reach = IOR_TRUNCATE * sigma
        self._ior_r = int(math.floor(reach))
        off = np.arange(-self._ior_r, self._ior_r + 1, dtype=np.float64) ** 2
        dist_sq = off[:, None] + off[None, :]
        self._ior = np.where(dist_sq <= reach**2, np.exp(-dist_sq / self.sigma_sq2), 0.0)
        self._kernels: dict[int, np.ndarray] = {}
        self._lookup = None
        ref = profile.prior_at(0, 0)
        self.radius = None if ref is None else int(math.ceil(ref.amp_max * profile.ppd))

    def kernel(self, dist: JointSaccadeDistribution) -> np.ndarray:
        key = id(dist)
        if key not in self._kernels:
            if self._lookup is None:
                offsets = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
                d, phi = displacement_polar(offsets[None, :], offsets[:, None], self.profile.ppd)
                self._lookup = DensityLookup(dist.amp_bins, dist.amp_max, dist.ori_bins, d, phi)
                self._jacobian = (
                    1.0 / np.maximum(d, D_FLOOR) if self.profile.jacobian_correction else None
                )
            k = self._lookup.apply(dist.density)
            if self._jacobian is not None:
                k = k * self._jacobian
            self._kernels[key] = k
        return self._kernels[key]

    def warm(self) -> None:
        dist = self.profile.distribution
        if isinstance(dist, SpatialDistributionSet):
            for row in dist.cells:
                for c in row:
                    self.kernel(c)
        elif dist is not None:
            self.kernel(dist)

    def window(self, col: int, row: int):
        """Image slices of the region reachable from ``(col, row)`` and the
        matching kernel slices (``None`` for the flat prior)."""
        if self.radius is None:
            return slice(0, self.height), slice(0, self.width), None
        r = self.radius
        r0, r1 = max(row - r, 0), min(row + r + 1, self.height)
        c0, c1 = max(col - r, 0), min(col + r + 1, self.width)
        ks = (slice(r0 - row + r, r1 - row + r), slice(c0 - col + r, c1 - col + r))
        return slice(r0, r1), slice(c0, c1), ks

    def apply_memory(self, prob: np.ndarray, memory: MemoryState, rows: slice, cols: slice) -> None:
        """Multiply ``prob`` (the ``rows x cols`` window) by the memory factor in place."""
        k = self._ior_r
        for loc, age in memory.attended:
            r = _residual(age, memory.capacity)
            if r <= 0:
                continue
            lx, ly = _pixel(loc)
            r0, r1 = max(rows.start, ly - k), min(rows.stop, ly + k + 1)
            c0, c1 = max(cols.start, lx - k), min(cols.stop, lx + k + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            term = self._ior[r0 - ly + k : r1 - ly + k, c0 - lx + k : c1 - lx + k] * -r
            term += 1.0
            prob[r0 - rows.start : r1 - rows.start, c0 - cols.start : c1 - cols.start] *= term

    def transition_window(self, x_prev, memory: MemoryState):
        col, row = _pixel(x_prev)
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise ValidationError(f"previous fixation ({col}, {row}) outside the image")
        rows, cols, ks = self.window(col, row)
        dist = self.profile.prior_at(col, row)
        if dist is None:
            prob = self.saliency[rows, cols].copy()
        else:
            prob = self.saliency[rows, cols] * self.kernel(dist)[ks]
        self.apply_memory(prob, memory, rows, cols)
        total = prob.sum()
        if not (total > 0 and math.isfinite(total)):
            raise DegenerateMapError(
                f"transition probability vanished around ({col}, {row}); "
                "increase amp_max or decrease inhibition_radius"
            )
        prob /= total
        return prob, rows, cols

    def sample(self, prob: np.ndarray, rows: slice, cols: slice, n: int, rng) -> list[tuple[int, int]]:
        idx = _inverse_cdf(prob.ravel(), n, rng)
        w = cols.stop - cols.start
        return [(int(cols.start + i % w), int(rows.start + i // w)) for i in idx]

    def score(self, candidates, x_prev) -> np.ndarray:
        px, py = _xy(x_prev)
        cand = np.array([_xy(c) for c in candidates], dtype=np.float64).reshape(-1, 2)
        d, phi = displacement_polar(cand[:, 0] - px, cand[:, 1] - py, self.profile.ppd)
        sal = self.saliency[cand[:, 1].astype(np.intp), cand[:, 0].astype(np.intp)]
        dist = self.profile.prior_at(px, py)
        prior = np.ones_like(d) if dist is None else np.asarray(evaluate_density(dist, d, phi))
        return sal * prior / np.maximum(d, D_FLOOR)

    def select(self, candidates, x_prev) -> FixationPoint:
        scores = self.score(candidates, x_prev)
        best = scores.max()
        tied = [c for c, s in zip(candidates, scores) if s == best]
        col, row = min(tied, key=lambda c: (int(c[1]) * self.width + int(c[0])))
        return FixationPoint(float(col), float(row))

    def run(self, n_fixations: int, seed: int, image_id: str = "") -> Scanpath:
        if n_fixations < 1:
            raise ConfigurationError("n_fixations must be >= 1")
        rng = np.random.default_rng(seed)
        first = FixationPoint(float(rng.integers(self.width)), float(rng.integers(self.height)), 0)
        path = [first]
        memory = MemoryState(self.profile.memory_span)
        memory.push(first)
        for k in range(1, n_fixations):
            prob, rows, cols = self.transition_window(path[-1], memory)
            cands = self.sample(prob, rows, cols, self.profile.candidate_count, rng)
            nxt = self.select(cands, path[-1])
            nxt = FixationPoint(nxt.x, nxt.y, k)
            path.append(nxt)
            memory.push(nxt)
        return Scanpath(image_id, seed, path)


def _inverse_cdf(flat: np.ndarray, n: int, rng) -> np.ndarray:
    cdf = np.cumsum(flat)
    # first index reaching the total mass is the last pixel with positive mass
    last = int(np.searchsorted(cdf, cdf[-1], side="left"))
    return np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), last)


def transition_map(
    x_prev, saliency: SaliencyGrid, memory: MemoryState, profile: ViewerProfile
) -> SaliencyGrid:
    """Full-image transition probability from ``x_prev`` (snapped to its pixel)."""
    sim = _Simulator(saliency, profile)
    prob, rows, cols = sim.transition_window(x_prev, memory)
    out = np.zeros(saliency.shape)
    out[rows, cols] = prob
    return SaliencyGrid(out / out.sum(), "sum-to-one")


def sample_candidates(prob_map: SaliencyGrid, n: int, rng) -> list[tuple[int, int]]:
    """``n`` i.i.d. pixel draws ``(col, row)`` by inverse CDF over the grid."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    values = prob_map.values
    if not values.sum() > 0:
        raise ValidationError("probability map has no mass")
    w = values.shape[1]
    idx = _inverse_cdf(values.ravel(), n, rng)
    return [(int(i % w), int(i // w)) for i in idx]


def selection_scores(candidates, saliency: SaliencyGrid, x_prev, profile: ViewerProfile) -> np.ndarray:
    """``saliency * prior / max(distance, 0.25 deg)`` for each candidate."""
    return _Simulator(saliency, profile).score(candidates, x_prev)


def select_fixation(candidates, saliency: SaliencyGrid, x_prev, profile: ViewerProfile) -> FixationPoint:
    """Candidate with the highest selection score; ties go to the lowest
    row-major pixel index."""
    if len(candidates) == 0:
        raise ValidationError("no candidates to select from")
    return _Simulator(saliency, profile).select(list(candidates), x_prev)


def generate_scanpath(
    saliency: SaliencyGrid, profile: ViewerProfile, n_fixations: int, seed: int, image_id: str = ""
) -> Scanpath:
    """One scanpath; the first fixation is uniform over the image."""
    return _Simulator(saliency, profile).run(n_fixations, seed, image_id)


def batch_generate(
    saliency: SaliencyGrid,
    profile: ViewerProfile,
    n_scanpaths: int,
    n_fixations: int,
    master_seed: int,
    image_id: str = "",
    workers: int = 1,
) -> list[Scanpath]:
    """Generate ``n_scanpaths`` paths; path ``k`` is seeded with ``master_seed ^ k``."""
    if n_scanpaths < 1:
        raise ConfigurationError("n_scanpaths must be >= 1")
    sim = _Simulator(saliency, profile)
    sim.warm()
    seeds = [master_seed ^ k for k in range(n_scanpaths)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: sim.run(n_fixations, s, image_id), seeds))
    return [sim.run(n_fixations, s, image_id) for s in seeds]


# --------------------------------------------------------------------------
# plausibility


def scanpath_saccades(paths: Sequence[Scanpath], ppd: float) -> np.ndarray:
    chunks = [np.column_stack(saccade_vectors(p.xy(), ppd)) for p in paths if len(p.fixations) > 1]
    return np.vstack(chunks) if chunks else np.empty((0, 2))


def scanpath_plausibility(
    generated: Sequence[Scanpath], reference, ppd: float = DEFAULT_PPD, bandwidth="silverman"
) -> tuple[float, float]:
    """KL divergences (reference || generated) of amplitude and joint distributions.

    ``reference`` is a :class:`JointSaccadeDistribution` or raw saccade
    samples, which are estimated on the default grid (widened to cover the
    largest amplitude). Generated saccades longer than the grid's
    ``amp_max`` are discarded.
    """
    samples = scanpath_saccades(generated, ppd)
    if len(samples) < 100:
        raise ValidationError(f"plausibility needs at least 100 saccades, got {len(samples)}")
    if not isinstance(reference, JointSaccadeDistribution):
        ref_samples = as_sample_array(reference)
        amp_max = max(DEFAULT_AMP_MAX, float(math.ceil(ref_samples[:, 0].max())))
        reference = estimate_joint(ref_samples, amp_max=amp_max, bandwidth=bandwidth)
    kept = samples[samples[:, 0] <= reference.amp_max]
    est = estimate_joint(
        kept, reference.amp_bins, reference.amp_max, reference.ori_bins, bandwidth=bandwidth
    )
    kl_amp = kl_divergence(reference.amplitude_marginal(), est.amplitude_marginal())
    kl_joint = kl_divergence(reference.probabilities(), est.probabilities())
    return kl_amp, kl_joint


# --------------------------------------------------------------------------
# files

SCANPATH_COLUMNS = ("scanpath_id", "seed", "index", "x", "y")


def format_scanpaths(paths: Sequence[Scanpath]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCANPATH_COLUMNS)
    for k, p in enumerate(paths):
        for i, f in enumerate(p.fixations):
            writer.writerow([k, p.seed, i, format(f.x, ".17g"), format(f.y, ".17g")])
    return buf.getvalue()


def parse_scanpaths(text: str, image_id: str = "") -> list[Scanpath]:
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in SCANPATH_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ValidationError(f"scanpath CSV is missing column(s): {', '.join(missing)}")
    paths: dict[str, Scanpath] = {}
    for row in reader:
        sid = row["scanpath_id"]
        if sid not in paths:
            paths[sid] = Scanpath(image_id, int(row["seed"]), [])
        paths[sid].fixations.append(
            FixationPoint(float(row["x"]), float(row["y"]), int(row["index"]))
        )
    for p in paths.values():
        p.fixations.sort(key=lambda f: f.index)
    return list(paths.values())


def load_profile(path) -> ViewerProfile:
    """Read a profile JSON; ``distribution_path`` is relative to the file.

    A null ``distribution_path`` selects the flat prior.
    """
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    dist_path = data.get("distribution_path")
    dist = None
    if dist_path:
        dist_path = Path(dist_path)
        if not dist_path.is_absolute():
            dist_path = path.parent / dist_path
        dist = load_distribution(dist_path)
    return ViewerProfile(
        distribution=dist,
        candidate_count=int(data.get("candidate_count", 5)),
        memory_span=int(data.get("memory_span", 5)),
        ppd=float(data.get("ppd", DEFAULT_PPD)),
        inhibition_radius=float(data.get("inhibition_radius_deg", 2.0)),
        jacobian_correction=bool(data.get("jacobian_correction", False)),
    )


def save_profile(profile: ViewerProfile, path, distribution_path) -> None:
    data = {
        "candidate_count": profile.candidate_count,
        "memory_span": profile.memory_span,
        "ppd": profile.ppd,
        "inhibition_radius_deg": profile.inhibition_radius,
        "distribution_path": None if distribution_path is None else str(distribution_path),
        "jacobian_correction": profile.jacobian_correction,
    }
    Path(path).write_text(json.dumps(data, indent=2), encoding="utf-8")
