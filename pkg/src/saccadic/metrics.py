"""
Saliency metrics: map-vs-map (CC, SIM, EMD) and map-vs-fixations
(NSS, AUC-Judd, AUC-Borji).

All functions accept :class:`SaliencyGrid` objects or plain 2D arrays, and
fixations either as :class:`FixationPoint` sequences or ``(n, 2)`` arrays of
``(x, y)`` pixel coordinates. A fixation belongs to pixel
``(floor(y), floor(x))``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import MetricError, ValidationError
from .eyedata import FixationPoint, SaliencyGrid, fixations_xy, pixel_indices

EMD_DOWNSAMPLE = 32
METRIC_NAMES = ("cc", "sim", "emd", "auc_judd", "auc_borji", "nss")
REPORT_COLUMNS = ("image_id", "group_id", "model") + METRIC_NAMES

_RANGES = {
    "cc": (-1.0, 1.0),
    "sim": (0.0, 1.0),
    "emd": (0.0, math.inf),
    "auc_judd": (0.0, 1.0),
    "auc_borji": (0.0, 1.0),
    "nss": (-math.inf, math.inf),
}


def _values(s) -> np.ndarray:
    if isinstance(s, SaliencyGrid):
        return s.values
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError(f"saliency map must be 2D and non-empty, got shape {arr.shape}")
    return arr


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise ValidationError(
            f"map dimensions differ: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}"
        )
    return a, b


def _as_distribution(a: np.ndarray) -> np.ndarray:
    if a.min() < 0:
        raise MetricError("distribution-based metrics need a non-negative map")
    total = a.sum()
    if not total > 0:
        raise MetricError("cannot normalize an all-zero map")
    return a / total


def _fixation_values(s: np.ndarray, fixations) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map values at fixated pixels, plus their row/col indices."""
    if isinstance(fixations, np.ndarray):
        xy = fixations.reshape(-1, 2)
    else:
        xy = fixations_xy(list(fixations))
    if len(xy) == 0:
        raise MetricError("no fixations to score")
    rows, cols = pixel_indices(xy, s.shape[1], s.shape[0])
    return s[rows, cols], rows, cols


# --------------------------------------------------------------------------
# map vs map


def cc(a, b) -> float:
    """Pearson linear correlation over all pixels."""
    a, b = _pair(a, b)
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise MetricError("correlation is undefined for a constant map")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def sim(a, b) -> float:
    """Histogram intersection of the two maps normalized to sum one."""
    a, b = _pair(a, b)
    return float(np.minimum(_as_distribution(a), _as_distribution(b)).sum())


def _area_matrix(n: int, m: int) -> np.ndarray:
    """``(m, n)`` averaging weights mapping ``n`` unit cells onto ``m`` equal bins."""
    edges_out = np.linspace(0.0, n, m + 1)
    lo = np.maximum(edges_out[:-1, None], np.arange(n)[None, :])
    hi = np.minimum(edges_out[1:, None], np.arange(1, n + 1)[None, :])
    return np.clip(hi - lo, 0.0, None)


def downsample_area(a: np.ndarray, target: int) -> np.ndarray:
    """Area-weighted block sum to at most ``target`` cells per side.

    Mass is preserved exactly; fractional pixel overlaps are split pro rata.
    """
    h, w = a.shape
    mh, mw = min(h, target), min(w, target)
    if (mh, mw) == (h, w):
        return a.copy()
    return _area_matrix(h, mh) @ a @ _area_matrix(w, mw).T


def _ground_distance(h: int, w: int) -> np.ndarray:
    r, c = np.divmod(np.arange(h * w), w)
    return np.hypot(r[:, None] - r[None, :], c[:, None] - c[None, :])


def _pot():
    # keep POT from probing (and importing) heavy deep-learning backends
    for name in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot


def emd(a, b, downsample: int = EMD_DOWNSAMPLE) -> float:
    """Earth mover's distance between two maps.

    Both maps are normalized, area-averaged to at most ``downsample`` cells
    per side, and compared by exact optimal transport with Euclidean ground
    distance measured in downsampled cells.
    """
    if downsample < 1:
        raise ValidationError(f"downsample must be >= 1, got {downsample}")
    a, b = _pair(a, b)
    pa = downsample_area(_as_distribution(a), downsample)
    pb = downsample_area(_as_distribution(b), downsample)
    pa, pb = pa / pa.sum(), pb / pb.sum()
    if np.array_equal(pa, pb):
        return 0.0
    ot = _pot()
    cost = _ground_distance(*pa.shape)
    value = ot.emd2(pa.ravel(), pb.ravel(), cost, numItermax=10_000_000)
    return float(max(value, 0.0))


# --------------------------------------------------------------------------
# map vs fixations


def nss(s, fixations) -> float:
    """Mean z-scored saliency at fixated pixels."""
    s = _values(s)
    std = s.std()
    if std == 0:
        raise MetricError("NSS is undefined for a constant map")
    vals, _, _ = _fixation_values(s, fixations)
    return float(np.mean((vals - s.mean()) / std))


def _roc_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    """Area under the ROC curve with thresholds at the positive scores.

    Scores equal to a threshold count as above it. The curve is anchored at
    (0, 0) and (1, 1) and integrated with the trapezoid rule.
    """
    if len(pos) == 0 or len(neg) == 0:
        raise MetricError("AUC needs both positive and negative samples")
    thresholds = np.unique(pos)[::-1]
    neg_sorted = np.sort(neg)
    pos_sorted = np.sort(pos)
    tp = (len(pos) - np.searchsorted(pos_sorted, thresholds, "left")) / len(pos)
    fp = (len(neg) - np.searchsorted(neg_sorted, thresholds, "left")) / len(neg)
    tpr = np.concatenate([[0.0], tp, [1.0]])
    fpr = np.concatenate([[0.0], fp, [1.0]])
    return float(np.trapezoid(tpr, fpr) if hasattr(np, "trapezoid") else np.trapz(tpr, fpr))


def auc_judd(s, fixations, jitter: bool = False) -> float:
    """AUC with fixated pixels as positives and all other pixels as negatives.

    With ``jitter`` a tiny index-proportional ramp breaks ties between
    equal-valued pixels; off by default so ties count as above threshold.
    """
    s = _values(s)
    if jitter:
        span = float(s.max() - s.min()) or 1.0
        s = s + np.arange(s.size).reshape(s.shape) * (1e-10 * span / s.size)
    pos, rows, cols = _fixation_values(s, fixations)
    mask = np.ones(s.shape, dtype=bool)
    mask[rows, cols] = False
    return _roc_auc(pos, s[mask])


def auc_borji(s, fixations, n_splits: int = 100, rng: int | np.random.Generator = 0) -> float:
    """Mean AUC over ``n_splits`` draws of uniformly random negative pixels.

    Each split draws as many negatives as there are fixations, uniformly over
    all pixels (fixated ones included).
    """
    if n_splits < 1:
        raise ValidationError(f"n_splits must be >= 1, got {n_splits}")
    s = _values(s)
    rng = np.random.default_rng(rng)
    pos, _, _ = _fixation_values(s, fixations)
    flat = s.ravel()
    scores = [_roc_auc(pos, flat[rng.integers(0, flat.size, len(pos))]) for _ in range(n_splits)]
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# reports


@dataclass
class MetricReport:
    """The six metric values; ``None`` marks a field that could not be computed.

    ``errors`` maps the name of each unavailable field to the reason.
    """

    cc: float | None = None
    sim: float | None = None
    emd: float | None = None
    auc_judd: float | None = None
    auc_borji: float | None = None
    nss: float | None = None
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if value is None:
                continue
            lo, hi = _RANGES[name]
            if not (lo - 1e-9 <= value <= hi + 1e-9) or math.isnan(value):
                raise ValidationError(f"{name}={value} outside its range [{lo}, {hi}]")

    def values(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def csv_row(self, image_id: str = "", group_id: str = "", model: str = "") -> list[str]:
        """One row matching :data:`REPORT_COLUMNS`; unavailable fields are blank."""
        cells = [image_id, group_id, model]
        cells += ["" if v is None else repr(float(v)) for v in self.values().values()]
        return cells


def format_report_rows(rows, extra_columns: tuple[str, ...] = ()) -> str:
    """CSV text for ``(image_id, group_id, model, report[, extras...])`` tuples."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS + tuple(extra_columns))
    for image_id, group_id, model, report, *extras in rows:
        cells = report.csv_row(image_id, group_id, model)
        cells += ["" if v is None else repr(float(v)) for v in extras]
        writer.writerow(cells)
    return buf.getvalue()


def evaluate_all(
    s,
    human_map,
    fixations,
    n_splits: int = 100,
    rng: int | np.random.Generator = 0,
    downsample: int = EMD_DOWNSAMPLE,
) -> MetricReport:
    """Score ``s`` against a human map (CC, SIM, EMD) and raw fixations (rest).

    A metric that is undefined for these inputs is left as ``None`` with its
    reason in ``errors``; dimension mismatches still raise.
    """
    _pair(s, human_map)
    if isinstance(fixations, (list, tuple)) and fixations and isinstance(fixations[0], FixationPoint):
        fixations = fixations_xy(fixations)
    jobs = {
        "cc": lambda: cc(s, human_map),
        "sim": lambda: sim(s, human_map),
        "emd": lambda: emd(s, human_map, downsample),
        "auc_judd": lambda: auc_judd(s, fixations),
        "auc_borji": lambda: auc_borji(s, fixations, n_splits, rng),
        "nss": lambda: nss(s, fixations),
    }
    out, errors = {}, {}
    for name, job in jobs.items():
        try:
            out[name] = job()
        except MetricError as exc:
            out[name] = None
            errors[name] = str(exc)
    return MetricReport(**out, errors=errors)
