"""
Eye-tracking ingestion: fixation logs, saccade extraction, human saliency
maps and center-bias statistics.

Coordinates follow the screen convention of the logs: ``x`` is the column
(0 at the left edge), ``y`` the row (0 at the top edge). A fixation at
``(x, y)`` belongs to pixel ``(floor(y), floor(x))`` of a ``(height, width)``
array.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, ParseError, ValidationError

LOG_COLUMNS = ("observer_id", "image_id", "group_id", "index", "x", "y", "duration_ms")
DEFAULT_PPD = 28.0
SGF_MAGIC = b"SGF1"
NORMALIZATIONS = ("raw", "sum-to-one", "max-one", "z-scored")
N_CROWNS = 10


@dataclass(frozen=True)
class FixationPoint:
    x: float
    y: float
    index: int = 0
    duration: float | None = None


@dataclass
class FixationSequence:
    observer_id: str
    image_id: str
    group_id: str
    fixations: list[FixationPoint]
    width: int
    height: int

    def __post_init__(self):
        for f in self.fixations:
            if not (0 <= f.x < self.width and 0 <= f.y < self.height):
                raise ValidationError(
                    f"fixation {f.index} at ({f.x}, {f.y}) outside {self.width}x{self.height}"
                )

    def xy(self) -> np.ndarray:
        """Fixation coordinates as an ``(n, 2)`` array of ``(x, y)``."""
        return fixations_xy(self.fixations)


@dataclass(frozen=True)
class SaccadeSample:
    amplitude: float
    orientation: float

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValidationError(f"amplitude must be >= 0, got {self.amplitude}")
        if not 0 <= self.orientation < 360:
            raise ValidationError(f"orientation must lie in [0, 360), got {self.orientation}")


@dataclass(frozen=True)
class CrownHistogram:
    shares: tuple[float, ...]

    def __post_init__(self):
        if len(self.shares) != N_CROWNS:
            raise ValidationError(f"expected {N_CROWNS} crown shares, got {len(self.shares)}")
        if min(self.shares) < 0 or abs(sum(self.shares) - 1.0) > 1e-9:
            raise ValidationError("crown shares must be non-negative and sum to one")

    def last_crowns_share(self, k: int = 4) -> float:
        """Cumulative share of the ``k`` outermost crowns."""
        return float(sum(self.shares[-k:]))


@dataclass
class SaliencyGrid:
    """A non-negative scalar field over the image domain.

    ``values`` is stored as a ``(height, width)`` float64 array.
    """

    values: np.ndarray
    normalization: str = "raw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) == 0:
            raise ValidationError(f"saliency grid must be 2D and non-empty, got {self.values.shape}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"unknown normalization tag {self.normalization!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("saliency grid contains non-finite values")
        if self.normalization != "z-scored" and self.values.min() < 0:
            raise ValidationError("saliency values must be non-negative")
        if self.normalization == "sum-to-one" and abs(self.values.sum() - 1.0) > 1e-9:
            raise ValidationError(f"grid tagged sum-to-one sums to {self.values.sum()!r}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def normalized(self) -> "SaliencyGrid":
        total = self.values.sum()
        if total <= 0:
            raise ValidationError("cannot normalize an all-zero saliency grid")
        return SaliencyGrid(self.values / total, "sum-to-one")

    def max_one(self) -> "SaliencyGrid":
        peak = self.values.max()
        if peak <= 0:
            raise ValidationError("cannot scale an all-zero saliency grid")
        return SaliencyGrid(self.values / peak, "max-one")


# --------------------------------------------------------------------------
# fixation logs


def parse_fixation_log(
    text: str | bytes, width: int, height: int, drop_first: bool = True
) -> list[FixationSequence]:
    """Parse a fixation log into per-trial sequences.

    Parameters
    ----------
    text : str or bytes
        CSV content with the mandatory header
        ``observer_id,image_id,group_id,index,x,y,duration_ms``.
    width, height : int
        Image geometry in pixels; every fixation must fall in
        ``[0, width) x [0, height)``.
    drop_first : bool
        Discard the first fixation of every trial (it is imposed by the
        central fixation cross, not by the content).

    Returns
    -------
    list of FixationSequence
        One per ``(observer_id, image_id)`` trial, in order of first
        appearance. Trials left empty after dropping are omitted.
    """
    if width <= 0 or height <= 0:
        raise ConfigurationError(f"image geometry must be positive, got {width}x{height}")
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not text.strip():
        return []

    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    missing = [c for c in LOG_COLUMNS if c not in header]
    if missing:
        raise ValidationError(f"fixation log header is missing column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in LOG_COLUMNS}

    trials: dict[tuple[str, str], list] = {}
    groups: dict[tuple[str, str], str] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            index = int(row[col["index"]])
            x = float(row[col["x"]])
            y = float(row[col["y"]])
            raw_dur = row[col["duration_ms"]].strip()
            duration = float(raw_dur) if raw_dur else None
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", lineno)
        if not (0 <= x < width and 0 <= y < height):
            raise ValidationError(
                f"line {lineno}: fixation ({x}, {y}) outside image {width}x{height}"
            )
        key = (row[col["observer_id"]].strip(), row[col["image_id"]].strip())
        group = row[col["group_id"]].strip()
        if groups.setdefault(key, group) != group:
            raise ParseError(f"trial {key} changes group_id from {groups[key]!r} to {group!r}", lineno)
        trials.setdefault(key, []).append((index, lineno, FixationPoint(x, y, index, duration)))

    sequences = []
    for key, rows in trials.items():
        rows.sort(key=lambda r: r[0])
        for (a, _, _), (b, line_b, _) in zip(rows, rows[1:]):
            if a == b:
                raise ParseError(f"duplicate fixation index {b} in trial {key}", line_b)
        points = [r[2] for r in rows]
        if drop_first:
            points = points[1:]
        if points:
            sequences.append(FixationSequence(key[0], key[1], groups[key], points, width, height))
    return sequences


def read_fixation_log(path, width: int, height: int, drop_first: bool = True):
    return parse_fixation_log(Path(path).read_text(encoding="utf-8"), width, height, drop_first)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def format_fixation_log(sequences: Iterable[FixationSequence]) -> str:
    """Serialize sequences back to the CSV log format (all fixations kept)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for seq in sequences:
        for f in seq.fixations:
            writer.writerow(
                [
                    seq.observer_id,
                    seq.image_id,
                    seq.group_id,
                    f.index,
                    _fmt(f.x),
                    _fmt(f.y),
                    "" if f.duration is None else _fmt(f.duration),
                ]
            )
    return buf.getvalue()


def fixations_xy(fixations: Sequence[FixationPoint]) -> np.ndarray:
    return np.array([(f.x, f.y) for f in fixations], dtype=np.float64).reshape(-1, 2)


def pixel_indices(xy: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the pixels containing ``xy`` points."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    cols = np.floor(xy[:, 0]).astype(np.intp)
    rows = np.floor(xy[:, 1]).astype(np.intp)
    if np.any((cols < 0) | (cols >= width) | (rows < 0) | (rows >= height)):
        raise ValidationError(f"fixation outside image {width}x{height}")
    return rows, cols


# --------------------------------------------------------------------------
# saccades


def saccade_vectors(xy: np.ndarray, ppd: float = DEFAULT_PPD) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes (deg) and orientations (deg, [0, 360)) between consecutive points.

    Orientation is measured counterclockwise from the rightward axis with
    screen-up positive, so an upward saccade has orientation 90.
    """
    if not ppd > 0:
        raise ConfigurationError(f"pixels per degree must be positive, got {ppd}")
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if len(xy) < 2:
        return np.empty(0), np.empty(0)
    step = np.diff(xy, axis=0)
    return displacement_polar(step[:, 0], step[:, 1], ppd)


def displacement_polar(dx, dy, ppd: float):
    """Polar coordinates (deg of visual angle, deg) of pixel displacements."""
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    amplitude = np.hypot(dx, dy) / ppd
    orientation = np.degrees(np.arctan2(-dy, dx))
    orientation = np.mod(orientation, 360.0)
    # mod can round tiny negatives up to exactly 360
    orientation = np.where((orientation >= 360.0) | (amplitude == 0), 0.0, orientation)
    return amplitude, orientation


def saccades_from_sequence(seq: FixationSequence, ppd: float = DEFAULT_PPD) -> list[SaccadeSample]:
    amp, ori = saccade_vectors(seq.xy(), ppd)
    return [SaccadeSample(float(a), float(o)) for a, o in zip(amp, ori)]


def saccade_array(sequences: Iterable[FixationSequence], ppd: float = DEFAULT_PPD) -> np.ndarray:
    """Stack the saccades of many sequences into an ``(n, 2)`` array."""
    chunks = [np.column_stack(saccade_vectors(s.xy(), ppd)) for s in sequences]
    chunks = [c for c in chunks if len(c)]
    return np.vstack(chunks) if chunks else np.empty((0, 2))


def as_sample_array(samples) -> np.ndarray:
    """Coerce SaccadeSample lists or ``(n, 2)`` arrays to a float array."""
    if isinstance(samples, np.ndarray):
        arr = samples.astype(np.float64, copy=False)
    else:
        samples = list(samples)
        if samples and isinstance(samples[0], SaccadeSample):
            arr = np.array([(s.amplitude, s.orientation) for s in samples], dtype=np.float64)
        else:
            arr = np.asarray(samples, dtype=np.float64)
    return arr.reshape(-1, 2)


# --------------------------------------------------------------------------
# human saliency maps and center bias


def gaussian_kernel(sigma: float, truncate: float = 4.0) -> np.ndarray:
    radius = int(math.ceil(truncate * sigma))
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    sq = r[:, None] ** 2 + r[None, :] ** 2
    kernel = np.exp(-sq / (2.0 * sigma**2))
    kernel[sq > (truncate * sigma) ** 2] = 0.0
    return kernel


def fixation_saliency_map(
    fixations: Sequence[FixationPoint] | np.ndarray,
    width: int,
    height: int,
    sigma: float = DEFAULT_PPD,
) -> SaliencyGrid:
    """Human saliency map: fixation counts blurred by a truncated Gaussian.

    Each fixation contributes an isotropic Gaussian (std ``sigma`` pixels,
    cut off at ``4 * sigma``) centered on its pixel; the result sums to one.
    """
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    xy = fixations if isinstance(fixations, np.ndarray) else fixations_xy(fixations)
    if len(xy) == 0:
        raise ValidationError("a saliency map needs at least one fixation")
    rows, cols = pixel_indices(xy, width, height)
    counts = np.zeros((height, width))
    np.add.at(counts, (rows, cols), 1.0)
    blurred = fftconvolve(counts, gaussian_kernel(sigma), mode="same")
    blurred = np.clip(blurred, 0.0, None)
    # FFT round-off leaves ~1e-17 noise where the kernel is exactly zero
    blurred[blurred < 1e-12 * blurred.max()] = 0.0
    return SaliencyGrid(blurred / blurred.sum(), "sum-to-one")


def center_bias_crowns(
    fixations: Sequence[FixationPoint] | np.ndarray, width: int, height: int
) -> CrownHistogram:
    """Share of fixations in each of 10 concentric crowns around the image center.

    Circle ``k`` has radius ``k/10`` of the center-to-top-left-corner
    distance. Fixations past the last circle (other corners of non-square
    images) are counted in the outermost crown.
    """
    xy = fixations if isinstance(fixations, np.ndarray) else fixations_xy(fixations)
    if len(xy) == 0:
        raise ValidationError("crown histogram needs at least one fixation")
    cx, cy = width / 2.0, height / 2.0
    outer = math.hypot(cx, cy)
    rho = np.hypot(xy[:, 0] - cx, xy[:, 1] - cy)
    crown = np.clip(np.ceil(N_CROWNS * rho / outer).astype(int), 1, N_CROWNS)
    counts = np.bincount(crown - 1, minlength=N_CROWNS)
    return CrownHistogram(tuple(float(c) for c in counts / counts.sum()))


# --------------------------------------------------------------------------
# saliency grid files


def load_saliency(path) -> SaliencyGrid:
    """Load a saliency grid from a grayscale PNG or an ``SGF1`` float file.

    PNG values are rescaled to ``[0, 1]`` by the bit depth and the grid is
    renormalized to sum to one. SGF files are returned untouched (``raw``).
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == SGF_MAGIC:
        return read_sgf(path)
    from PIL import Image

    with Image.open(path) as img:
        if img.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.float64)
            scale = 65535.0
        elif img.mode == "L":
            arr = np.asarray(img, dtype=np.float64)
            scale = 255.0
        else:
            arr = np.asarray(img.convert("L"), dtype=np.float64)
            scale = 255.0
    return SaliencyGrid(arr / scale).normalized()


def save_saliency_png(grid: SaliencyGrid, path, bits: int = 8) -> None:
    """Write a grid as a grayscale PNG, scaled so its maximum is full white."""
    from PIL import Image

    scaled = grid.max_one().values
    if bits == 8:
        img = Image.fromarray(np.round(scaled * 255).astype(np.uint8), mode="L")
    elif bits == 16:
        img = Image.fromarray(np.round(scaled * 65535).astype(np.uint16))
    else:
        raise ConfigurationError(f"bits must be 8 or 16, got {bits}")
    img.save(path, format="PNG")


def write_sgf(grid: SaliencyGrid, path) -> None:
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(SGF_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(grid.values.astype("<f4").tobytes())


def read_sgf(path) -> SaliencyGrid:
    data = Path(path).read_bytes()
    if data[:4] != SGF_MAGIC:
        raise ValidationError(f"{path}: not an SGF1 file")
    w, h = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes for {w}x{h}, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(np.float64)
    return SaliencyGrid(values)
