"""
Synthetic viewers for tests, demos and the acceptance suite.

Each age group is described by an analytic saccade prior per 3x3 cell:
a gamma amplitude law times a von Mises mixture over orientation. Corner
and edge cells send most saccades toward the image center; every cell
carries a horizontal component whose weight grows with age, and young
groups add an upward component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .eyedata import FixationPoint, FixationSequence, SaliencyGrid, format_fixation_log
from .statmodel import (
    DEFAULT_AMP_BINS,
    DEFAULT_AMP_MAX,
    DEFAULT_ORI_BINS,
    GRID,
    JointSaccadeDistribution,
    SpatialDistributionSet,
)


@dataclass(frozen=True)
class GroupModel:
    name: str
    amp_shape: float
    amp_scale: float
    horizontal: float
    upward: float
    central: float
    kappa: float = 4.0


GROUPS = {
    "2yo": GroupModel("2yo", 2.5, 1.2, horizontal=0.15, upward=0.25, central=0.6),
    "4-6yo": GroupModel("4-6yo", 2.5, 1.5, horizontal=0.25, upward=0.15, central=0.6),
    "6-10yo": GroupModel("6-10yo", 2.5, 1.7, horizontal=0.35, upward=0.1, central=0.55),
    "adults": GroupModel("adults", 2.5, 2.0, horizontal=0.5, upward=0.05, central=0.45),
}


def center_direction(i: int, j: int) -> float | None:
    """Orientation (deg, screen-up positive) from cell ``(i, j)`` toward the center cell."""
    if (i, j) == (1, 1):
        return None
    return math.degrees(math.atan2(i - 1, 1 - j)) % 360.0


def _orientation_components(group: GroupModel, i: int, j: int):
    """``(weight, mean_deg, kappa)`` triples of the cell's orientation mixture."""
    comps = [(group.horizontal / 2, 0.0, 8.0), (group.horizontal / 2, 180.0, 8.0)]
    if group.upward > 0:
        comps.append((group.upward, 90.0, 8.0))
    direction = center_direction(i, j)
    rest = 1.0 - group.horizontal - group.upward
    if direction is None:
        comps.append((rest, 0.0, 0.0))
    else:
        comps.append((rest * group.central, direction, group.kappa))
        comps.append((rest * (1 - group.central), 0.0, 0.0))
    return comps


def analytic_density(group: GroupModel, i: int, j: int, d, phi_deg) -> np.ndarray:
    """Unnormalized analytic cell density at amplitudes ``d`` and orientations ``phi``."""
    amp = stats.gamma.pdf(d, group.amp_shape, scale=group.amp_scale)
    ori = np.zeros(np.broadcast(d, phi_deg).shape)
    rad = np.radians(phi_deg)
    for w, mu, kappa in _orientation_components(group, i, j):
        if kappa == 0:
            ori = ori + w / (2 * math.pi)
        else:
            ori = ori + w * stats.vonmises.pdf(rad, kappa, loc=math.radians(mu))
    return amp * ori


def sample_cell(group: GroupModel, i: int, j: int, n: int, rng) -> np.ndarray:
    """``(n, 2)`` draws of ``(amplitude, orientation)`` from the analytic cell law."""
    comps = _orientation_components(group, i, j)
    weights = np.array([c[0] for c in comps])
    which = rng.choice(len(comps), size=n, p=weights / weights.sum())
    phi = np.empty(n)
    for k, (_, mu, kappa) in enumerate(comps):
        sel = which == k
        if kappa == 0:
            phi[sel] = rng.uniform(0, 360, sel.sum())
        else:
            phi[sel] = np.degrees(rng.vonmises(math.radians(mu), kappa, sel.sum()))
    amp = rng.gamma(group.amp_shape, group.amp_scale, n)
    return np.column_stack([amp, np.mod(phi, 360.0)])


def analytic_distribution(
    group: GroupModel,
    i: int,
    j: int,
    amp_bins: int = DEFAULT_AMP_BINS,
    amp_max: float = DEFAULT_AMP_MAX,
    ori_bins: int = DEFAULT_ORI_BINS,
) -> JointSaccadeDistribution:
    amp_step, ori_step = amp_max / amp_bins, 360.0 / ori_bins
    d = (np.arange(amp_bins) + 0.5) * amp_step
    phi = (np.arange(ori_bins) + 0.5) * ori_step
    dens = analytic_density(group, i, j, d[:, None], phi[None, :])
    dens /= dens.sum() * amp_step * ori_step
    return JointSaccadeDistribution(amp_bins, amp_max, ori_bins, dens, amp_step, ori_step, 1000)


def analytic_spatial_set(group: GroupModel | str, width: int, height: int, **grid) -> SpatialDistributionSet:
    """The known 3x3 prior of a synthetic group, tabulated on a bin grid."""
    if isinstance(group, str):
        group = GROUPS[group]
    cells = [[analytic_distribution(group, i, j, **grid) for j in range(GRID)] for i in range(GRID)]
    return SpatialDistributionSet(cells, width, height)


def simulate_sequences(
    group: GroupModel | str,
    width: int,
    height: int,
    n_observers: int,
    n_images: int,
    n_fixations: int,
    ppd: float = 28.0,
    seed: int = 0,
    amp_max: float = DEFAULT_AMP_MAX,
) -> list[FixationSequence]:
    """Random walks whose saccades follow the group's cell laws.

    Saccades leaving the image or longer than ``amp_max`` are redrawn. The
    first fixation of each trial sits at the image center, mimicking the
    central fixation cross.
    """
    if isinstance(group, str):
        group = GROUPS[group]
    rng = np.random.default_rng(seed)
    out = []
    for obs in range(n_observers):
        for img in range(n_images):
            x, y = width / 2.0, height / 2.0
            points = [FixationPoint(x, y, 0)]
            for k in range(1, n_fixations):
                i = min(int(y * GRID // height), GRID - 1)
                j = min(int(x * GRID // width), GRID - 1)
                while True:
                    amp, phi = sample_cell(group, i, j, 1, rng)[0]
                    nx = x + amp * ppd * math.cos(math.radians(phi))
                    ny = y - amp * ppd * math.sin(math.radians(phi))
                    if amp <= amp_max and 0 <= nx < width and 0 <= ny < height:
                        break
                x, y = nx, ny
                points.append(FixationPoint(x, y, k))
            out.append(
                FixationSequence(f"{group.name}-o{obs}", f"img{img}", group.name, points, width, height)
            )
    return out


def synthetic_log(groups, width: int, height: int, n_observers=8, n_images=4, n_fixations=16, ppd=28.0, seed=0) -> str:
    """CSV fixation log for several groups (first fixations included)."""
    seqs = []
    for k, g in enumerate(groups):
        seqs += simulate_sequences(g, width, height, n_observers, n_images, n_fixations, ppd, seed + 7919 * k)
    return format_fixation_log(seqs)


def blob_saliency(width: int, height: int, n_blobs: int = 6, seed: int = 0, background: float = 0.02) -> SaliencyGrid:
    """A structured saliency map: Gaussian blobs of assorted size over a faint floor."""
    rng = np.random.default_rng(seed)
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    out = np.full((height, width), background)
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0.1, 0.9) * width, rng.uniform(0.1, 0.9) * height
        s = rng.uniform(0.03, 0.08) * min(width, height)
        out += rng.uniform(0.5, 1.0) * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * s * s))
    return SaliencyGrid(out).normalized()
