"""
Command-line front end: ``saccadic {estimate,generate,evaluate,sweep-nc,analyze}``.

Every command is also available as a plain function (``cmd_*``) returning
the data it wrote, which is what the test-suite drives. Exit codes: 0 on
success, 2 for invalid input, 3 when estimation is starved of data, 4 for a
degenerate transition map, 1 for any other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .engine import (
    ViewerProfile,
    batch_generate,
    format_scanpaths,
    load_profile,
    parse_scanpaths,
    scanpath_plausibility,
)
from .errors import DegenerateMapError, EstimationError, SaccadicError, ValidationError
from .eyedata import (
    DEFAULT_PPD,
    N_CROWNS,
    SaliencyGrid,
    center_bias_crowns,
    fixation_saliency_map,
    load_saliency,
    parse_fixation_log,
    read_fixation_log,
    saccade_array,
    save_saliency_png,
)
from .metrics import METRIC_NAMES, evaluate_all, format_report_rows
from .statmodel import (
    DEFAULT_AMP_BINS,
    DEFAULT_AMP_MAX,
    DEFAULT_ORI_BINS,
    GRID,
    JointSaccadeDistribution,
    estimate_joint,
    estimate_spatial_set,
    ks2d_test,
    load_distribution,
    save_distribution,
    spatial_samples,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_STARVED = 3
EXIT_DEGENERATE = 4


@dataclass
class RunConfig:
    """Resolved parameters of one command run, written next to its outputs."""

    command: str
    seed: int | None
    out: str
    ppd: float
    params: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> None:
        text = json.dumps(asdict(self), indent=2, sort_keys=True, default=str)
        (out_dir / "run_config.json").write_text(text + "\n", encoding="utf-8")


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name) or "_"


def _require_files(*paths) -> None:
    missing = [str(p) for p in paths if p is not None and not Path(p).is_file()]
    if missing:
        raise ValidationError(f"input file(s) not found: {', '.join(missing)}")


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _num(value) -> str:
    return "" if value is None else repr(float(value))


def parse_bandwidth(text: str):
    """``silverman``, ``botev`` or an explicit ``h_d,h_phi`` pair in degrees."""
    if text in ("silverman", "botev"):
        return text
    try:
        h_d, h_phi = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"bandwidth must be silverman, botev or 'h_d,h_phi', got {text!r}")
    return (h_d, h_phi)


def parse_range(text: str) -> list[int]:
    """``1..9``, ``1-9`` or a comma list such as ``1,3,5``."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-)\s*(\d+)\s*", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        values = list(range(lo, hi + 1))
    else:
        try:
            values = [int(v) for v in text.split(",")]
        except ValueError:
            raise ValidationError(f"cannot parse range {text!r}")
    if not values or min(values) < 1 or max(values) > 64:
        raise ValidationError(f"Nc values must lie in [1, 64], got {text!r}")
    return values


def _group_sequences(sequences, groups=None) -> dict[str, list]:
    out: dict[str, list] = {}
    for seq in sequences:
        out.setdefault(seq.group_id, []).append(seq)
    if groups:
        unknown = [g for g in groups if g not in out]
        if unknown:
            raise ValidationError(f"group(s) not in the log: {', '.join(unknown)}")
        out = {g: out[g] for g in groups}
    return dict(sorted(out.items()))


def _apply_overrides(
    profile: ViewerProfile,
    nc=None,
    memory_span=None,
    ppd=None,
    grid="3x3",
    uniform_prior=False,
    jacobian_correction=False,
) -> ViewerProfile:
    from dataclasses import replace

    changes = {}
    if nc is not None:
        changes["candidate_count"] = nc
    if memory_span is not None:
        changes["memory_span"] = memory_span
    if ppd is not None:
        changes["ppd"] = ppd
    if jacobian_correction:
        changes["jacobian_correction"] = True
    profile = replace(profile, **changes) if changes else profile
    if grid == "1x1":
        profile = profile.non_spatial()
    if uniform_prior:
        profile = profile.with_uniform_prior()
    return profile


def _scanpath_map(paths, width: int, height: int, ppd: float) -> SaliencyGrid:
    xy = np.concatenate([p.xy() for p in paths])
    return fixation_saliency_map(xy, width, height, sigma=ppd)


# --------------------------------------------------------------------------
# estimate


def cmd_estimate(
    log,
    width: int,
    height: int,
    out,
    ppd: float = DEFAULT_PPD,
    grid: str = "3x3",
    groups=None,
    bandwidth="silverman",
    amp_bins: int = DEFAULT_AMP_BINS,
    amp_max: float = DEFAULT_AMP_MAX,
    ori_bins: int = DEFAULT_ORI_BINS,
    min_samples: int = 2,
    drop_first: bool = True,
    stream=None,
) -> dict[str, list[Path]]:
    """Estimate per-group saccade distributions from a fixation log.

    Writes ``<group>_spatial.json`` (3x3 set, unless ``grid == "1x1"``) and
    ``<group>_pooled.json`` (one distribution over all saccades) and prints
    per-cell sample counts. Returns the written paths per group.
    """
    stream = stream or sys.stdout
    _require_files(log)
    out_dir = _out_dir(out)
    sequences = read_fixation_log(log, width, height, drop_first=drop_first)
    by_group = _group_sequences(sequences, groups)
    if not by_group:
        raise EstimationError("the fixation log contains no trials")
    grid_kw = dict(amp_bins=amp_bins, amp_max=amp_max, ori_bins=ori_bins, bandwidth=bandwidth)
    # estimate everything first so a starved group leaves no partial output
    results = {}
    for group, seqs in by_group.items():
        if grid == "3x3":
            cells, _, _ = spatial_samples(seqs, ppd)
            counts = [[int((cells[i][j][:, 0] > 0).sum()) for j in range(GRID)] for i in range(GRID)]
            print(f"{group}: per-cell saccades {counts}", file=stream)
            spatial = estimate_spatial_set(seqs, ppd, min_samples=min_samples, **grid_kw)
        else:
            spatial = None
        samples = saccade_array(seqs, ppd)
        print(f"{group}: {len(samples)} saccades pooled", file=stream)
        results[group] = (spatial, estimate_joint(samples, **grid_kw))
    written = {}
    for group, (spatial, pooled) in results.items():
        paths = []
        if spatial is not None:
            p = out_dir / f"{_safe_name(group)}_spatial.json"
            save_distribution(spatial, p)
            paths.append(p)
        p = out_dir / f"{_safe_name(group)}_pooled.json"
        save_distribution(pooled, p)
        paths.append(p)
        written[group] = paths
    RunConfig(
        "estimate",
        None,
        str(out),
        ppd,
        dict(log=str(log), width=width, height=height, grid=grid, groups=list(by_group),
             bandwidth=bandwidth, amp_bins=amp_bins, amp_max=amp_max, ori_bins=ori_bins,
             min_samples=min_samples, drop_first=drop_first),
    ).write(out_dir)
    return written


# --------------------------------------------------------------------------
# generate


def cmd_generate(
    saliency,
    profile,
    out,
    seed: int,
    n_scanpaths: int = 20,
    n_fixations: int = 15,
    image_id: str | None = None,
    workers: int = 1,
    **overrides,
) -> tuple[Path, Path]:
    """Generate scanpaths and render their saliency map (sigma = ppd pixels).

    ``profile`` is a :class:`ViewerProfile` or a profile JSON path;
    ``overrides`` are passed to the profile (``nc``, ``memory_span``,
    ``ppd``, ``grid``, ``uniform_prior``, ``jacobian_correction``).
    Returns the paths of ``scanpaths.csv`` and ``scanpath_saliency.png``.
    """
    if seed is None:
        raise ValidationError("a seed is required")
    if not isinstance(profile, ViewerProfile):
        _require_files(saliency, profile)
        profile = load_profile(profile)
    else:
        _require_files(saliency)
    profile = _apply_overrides(profile, **overrides)
    out_dir = _out_dir(out)
    grid = load_saliency(saliency)
    image_id = image_id if image_id is not None else Path(saliency).stem
    try:
        paths = batch_generate(grid, profile, n_scanpaths, n_fixations, seed, image_id, workers)
    except DegenerateMapError as exc:
        raise DegenerateMapError(f"scanpath generation failed: {exc}") from exc
    csv_path = out_dir / "scanpaths.csv"
    csv_path.write_text(format_scanpaths(paths), encoding="utf-8")
    png_path = out_dir / "scanpath_saliency.png"
    save_saliency_png(_scanpath_map(paths, grid.width, grid.height, profile.ppd), png_path)
    RunConfig(
        "generate",
        seed,
        str(out),
        profile.ppd,
        dict(saliency=str(saliency), n_scanpaths=n_scanpaths, n_fixations=n_fixations,
             candidate_count=profile.candidate_count, memory_span=profile.memory_span,
             inhibition_radius=profile.inhibition_radius, uniform_prior=profile.distribution is None,
             jacobian_correction=profile.jacobian_correction, overrides=overrides),
    ).write(out_dir)
    return csv_path, png_path


# --------------------------------------------------------------------------
# evaluate


@dataclass
class EvaluationJob:
    image_id: str
    group_id: str
    model: str
    predicted: Path
    human: Path | None = None


def _load_prediction(path: Path, width: int, height: int, ppd: float):
    """A saliency grid plus the scanpaths it came from (``None`` for maps)."""
    if path.suffix.lower() == ".csv":
        paths = parse_scanpaths(path.read_text(encoding="utf-8"), path.stem)
        if not paths:
            raise ValidationError(f"{path}: no scanpaths")
        return _scanpath_map(paths, width, height, ppd), paths
    return load_saliency(path), None


def read_manifest(path) -> list[EvaluationJob]:
    """Manifest CSV with columns ``image_id,group_id,model,predicted[,human]``.

    File paths are relative to the manifest.
    """
    path = Path(path)
    reader = csv.DictReader(io.StringIO(path.read_text(encoding="utf-8")))
    need = ("image_id", "group_id", "model", "predicted")
    missing = [c for c in need if c not in (reader.fieldnames or [])]
    if missing:
        raise ValidationError(f"manifest is missing column(s): {', '.join(missing)}")
    jobs = []
    for row in reader:
        human = row.get("human") or None
        jobs.append(
            EvaluationJob(
                row["image_id"],
                row["group_id"],
                row["model"],
                path.parent / row["predicted"],
                None if human is None else path.parent / human,
            )
        )
    return jobs


def cmd_evaluate(
    jobs: list[EvaluationJob],
    fixations,
    out,
    seed: int,
    ppd: float = DEFAULT_PPD,
    reference_dist=None,
    n_splits: int = 100,
    drop_first: bool = True,
) -> list[tuple]:
    """Score each job's prediction against human data; writes ``metrics.csv``/``.json``.

    Human fixations come from the ``fixations`` log filtered on the job's
    image and group. Without a human map file the human map is rendered
    from those fixations. With ``reference_dist`` two KL columns are added
    (blank for predictions that are maps rather than scanpath CSVs).
    """
    if seed is None:
        raise ValidationError("a seed is required")
    _require_files(fixations, reference_dist, *[j.predicted for j in jobs], *[j.human for j in jobs])
    out_dir = _out_dir(out)
    ref = load_distribution(reference_dist) if reference_dist else None
    if ref is not None and not isinstance(ref, JointSaccadeDistribution):
        ref = ref.pooled()
    log_text = Path(fixations).read_text(encoding="utf-8")
    rows = []
    parsed = {}
    for k, job in enumerate(jobs):
        human = load_saliency(job.human) if job.human else None
        if human is None and job.predicted.suffix.lower() == ".csv":
            raise ValidationError(
                f"{job.predicted}: a scanpath prediction needs a human map to fix the image size"
            )
        width, height = (human or load_saliency(job.predicted)).shape[::-1]
        if (width, height) not in parsed:
            parsed[width, height] = parse_fixation_log(log_text, width, height, drop_first=drop_first)
        seqs = [
            s for s in parsed[width, height] if s.image_id == job.image_id and s.group_id == job.group_id
        ]
        if not seqs:
            raise ValidationError(f"no fixations for image {job.image_id!r}, group {job.group_id!r}")
        fx = np.concatenate([s.xy() for s in seqs])
        if human is None:
            human = fixation_saliency_map(fx, width, height, sigma=ppd)
        predicted, paths = _load_prediction(job.predicted, width, height, ppd)
        if predicted.shape != human.shape:
            raise ValidationError(
                f"dimension mismatch for {job.image_id}: predicted {predicted.width}x{predicted.height}, "
                f"human {human.width}x{human.height}"
            )
        report = evaluate_all(predicted, human, fx, n_splits=n_splits, rng=[seed, k])
        extras = []
        if ref is not None:
            if paths is None:
                print(f"note: {job.predicted} is a map; KL columns left blank", file=sys.stderr)
                extras = [None, None]
            else:
                extras = list(scanpath_plausibility(paths, ref, ppd))
        rows.append((job.image_id, job.group_id, job.model, report, *extras))
    extra_cols = ("kl_amplitude", "kl_joint") if ref is not None else ()
    (out_dir / "metrics.csv").write_text(format_report_rows(rows, extra_cols), encoding="utf-8")
    payload = [
        {
            "image_id": r[0],
            "group_id": r[1],
            "model": r[2],
            **r[3].to_dict(),
            **dict(zip(extra_cols, r[4:])),
        }
        for r in rows
    ]
    (out_dir / "metrics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    RunConfig(
        "evaluate",
        seed,
        str(out),
        ppd,
        dict(jobs=[asdict(j) for j in jobs], fixations=str(fixations), n_splits=n_splits,
             reference_dist=None if reference_dist is None else str(reference_dist)),
    ).write(out_dir)
    return rows


# --------------------------------------------------------------------------
# sweep-nc

SWEEP_COLUMNS = ("nc", "kl_amplitude", "kl_joint") + METRIC_NAMES


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def cmd_sweep_nc(
    saliency_maps,
    profile,
    out,
    seed: int,
    nc_values=range(1, 10),
    repetitions: int = 1,
    n_scanpaths: int = 20,
    n_fixations: int = 15,
    reference_dist=None,
    ground_truth=None,
    n_splits: int = 100,
    **overrides,
) -> list[dict]:
    """KL plausibility (and optional metric means) as a function of Nc.

    For every Nc, each saliency map gets ``n_scanpaths`` scanpaths per
    repetition. KL divergences pool all maps of one repetition and are
    averaged over repetitions. The same seeds are reused across Nc values,
    so rows differ only through Nc. With a ``ground_truth`` fixation log,
    maps are matched to trials by file stem and metric means are filled in.
    Writes ``sweep_nc.csv`` and returns its rows.
    """
    if seed is None:
        raise ValidationError("a seed is required")
    if repetitions < 1:
        raise ValidationError("repetitions must be >= 1")
    nc_values = list(nc_values)
    if not nc_values or min(nc_values) < 1 or max(nc_values) > 64:
        raise ValidationError("Nc values must lie in [1, 64]")
    saliency_maps = [Path(p) for p in saliency_maps]
    if not isinstance(profile, ViewerProfile):
        _require_files(profile)
        profile = load_profile(profile)
    _require_files(*saliency_maps, reference_dist, ground_truth)
    overrides.pop("nc", None)
    base = _apply_overrides(profile, **overrides)
    ref = load_distribution(reference_dist) if reference_dist else base.reference_distribution()
    if ref is None:
        raise ValidationError("a uniform-prior sweep needs --reference-dist")
    if not isinstance(ref, JointSaccadeDistribution):
        ref = ref.pooled()
    out_dir = _out_dir(out)
    grids = [load_saliency(p) for p in saliency_maps]
    truth = {}
    if ground_truth is not None:
        text = Path(ground_truth).read_text(encoding="utf-8")
        for path, grid in zip(saliency_maps, grids):
            seqs = [s for s in parse_fixation_log(text, grid.width, grid.height) if s.image_id == path.stem]
            if not seqs:
                raise ValidationError(f"ground truth has no trials for image {path.stem!r}")
            fx = np.concatenate([s.xy() for s in seqs])
            truth[path.stem] = (fx, fixation_saliency_map(fx, grid.width, grid.height, base.ppd))
    from dataclasses import replace

    rows = []
    for nc in nc_values:
        prof = replace(base, candidate_count=nc)
        kls, metrics = [], {m: [] for m in METRIC_NAMES}
        for rep in range(repetitions):
            paths_all = []
            for k, (path, grid) in enumerate(zip(saliency_maps, grids)):
                paths = batch_generate(grid, prof, n_scanpaths, n_fixations, _derived_seed(seed, rep, k), path.stem)
                paths_all += paths
                if truth:
                    fx, human = truth[path.stem]
                    pred = _scanpath_map(paths, grid.width, grid.height, prof.ppd)
                    report = evaluate_all(pred, human, fx, n_splits, rng=[seed, rep, k])
                    for m, v in report.values().items():
                        if v is not None:
                            metrics[m].append(v)
            kls.append(scanpath_plausibility(paths_all, ref, prof.ppd))
        row = {"nc": nc, "kl_amplitude": float(np.mean([a for a, _ in kls])),
               "kl_joint": float(np.mean([j for _, j in kls]))}
        for m in METRIC_NAMES:
            row[m] = float(np.mean(metrics[m])) if metrics[m] else None
        rows.append(row)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([row["nc"]] + [_num(row[c]) for c in SWEEP_COLUMNS[1:]])
    (out_dir / "sweep_nc.csv").write_text(buf.getvalue(), encoding="utf-8")
    RunConfig(
        "sweep-nc",
        seed,
        str(out),
        base.ppd,
        dict(saliency=[str(p) for p in saliency_maps], nc_values=nc_values, repetitions=repetitions,
             n_scanpaths=n_scanpaths, n_fixations=n_fixations,
             reference_dist=None if reference_dist is None else str(reference_dist),
             ground_truth=None if ground_truth is None else str(ground_truth)),
    ).write(out_dir)
    return rows


# --------------------------------------------------------------------------
# analyze


def cmd_analyze(
    log,
    width: int,
    height: int,
    out,
    seed: int,
    ppd: float = DEFAULT_PPD,
    n_draw: int = 5000,
    bandwidth="silverman",
    drop_first: bool = True,
) -> dict:
    """Center-bias crowns, per-group distributions and the pairwise KS matrix.

    Writes ``crowns.csv``, ``<group>_joint.json``, ``<group>_amplitude.csv``
    and ``ks_matrix.csv`` (one row per ordered group pair).
    """
    if seed is None:
        raise ValidationError("a seed is required")
    _require_files(log)
    out_dir = _out_dir(out)
    by_group = _group_sequences(read_fixation_log(log, width, height, drop_first=drop_first))
    if not by_group:
        raise EstimationError("the fixation log contains no trials")
    crowns, samples = {}, {}
    for group, seqs in by_group.items():
        xy = np.concatenate([s.xy() for s in seqs])
        crowns[group] = (center_bias_crowns(xy, width, height), len(xy))
        samples[group] = saccade_array(seqs, ppd)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group_id", "n_fixations"] + [f"crown_{k}" for k in range(1, N_CROWNS + 1)])
    for group, (hist, n) in crowns.items():
        writer.writerow([group, n] + [repr(v) for v in hist.shares])
    (out_dir / "crowns.csv").write_text(buf.getvalue(), encoding="utf-8")

    dists = {}
    for group, s in samples.items():
        dist = estimate_joint(s, amp_max=max(DEFAULT_AMP_MAX, float(np.ceil(s[:, 0].max()))), bandwidth=bandwidth)
        dists[group] = dist
        save_distribution(dist, out_dir / f"{_safe_name(group)}_joint.json")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["amplitude_deg", "density"])
        marginal = dist.amplitude_marginal() / dist.amp_step
        for c, v in zip(dist.amp_centers, marginal):
            writer.writerow([repr(float(c)), repr(float(v))])
        (out_dir / f"{_safe_name(group)}_amplitude.csv").write_text(buf.getvalue(), encoding="utf-8")

    groups = list(samples)
    ks = {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group_a", "group_b", "statistic", "p_value"])
    for a in groups:
        for b in groups:
            res = ks2d_test(samples[a], samples[b], n_draw=n_draw, seed=seed)
            ks[(a, b)] = res
            writer.writerow([a, b, repr(res.statistic), repr(res.p_value)])
    (out_dir / "ks_matrix.csv").write_text(buf.getvalue(), encoding="utf-8")
    RunConfig(
        "analyze",
        seed,
        str(out),
        ppd,
        dict(log=str(log), width=width, height=height, n_draw=n_draw, bandwidth=bandwidth,
             drop_first=drop_first),
    ).write(out_dir)
    return {"crowns": crowns, "distributions": dists, "ks": ks}


# --------------------------------------------------------------------------
# argument parsing


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _grid(text: str) -> str:
    if text not in ("3x3", "1x1"):
        raise argparse.ArgumentTypeError("grid must be 3x3 or 1x1")
    return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--ppd", type=float, default=None, help="pixels per degree (default 28)")
    common.add_argument("--grid", type=_grid, default="3x3", help="3x3 spatial cells or 1x1 pooled")
    common.add_argument("--nc", type=int, default=None, help="candidates per step")
    common.add_argument("--memory-span", type=int, default=None, help="inhibition memory span T")
    common.add_argument("--uniform-prior", action="store_true", help="replace the saccade prior by 1")
    common.add_argument("--jacobian-correction", action="store_true",
                        help="divide the prior by the amplitude when mapping to pixels")

    parser = argparse.ArgumentParser(prog="saccadic", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="estimate saccade distributions from a log")
    p.add_argument("log")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--groups", help="comma-separated group filter")
    p.add_argument("--bandwidth", type=parse_bandwidth, default="silverman")
    p.add_argument("--amp-bins", type=int, default=DEFAULT_AMP_BINS)
    p.add_argument("--amp-max", type=float, default=DEFAULT_AMP_MAX)
    p.add_argument("--ori-bins", type=int, default=DEFAULT_ORI_BINS)
    p.add_argument("--min-samples", type=int, default=2)
    p.add_argument("--keep-first", action="store_true", help="keep each trial's first fixation")

    p = sub.add_parser("generate", parents=[common], help="generate scanpaths on a saliency map")
    p.add_argument("saliency")
    p.add_argument("--profile", required=True)
    p.add_argument("--n-scanpaths", type=int, default=20)
    p.add_argument("--n-fixations", type=int, default=15)
    p.add_argument("--image-id")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against human data")
    p.add_argument("--predicted", help="saliency map or scanpath CSV")
    p.add_argument("--human", help="human saliency map (rendered from fixations if absent)")
    p.add_argument("--fixations", required=True, help="human fixation log")
    p.add_argument("--image-id")
    p.add_argument("--group", default="", help="group_id of the human trials")
    p.add_argument("--model", default="model")
    p.add_argument("--manifest", help="CSV listing image_id,group_id,model,predicted[,human]")
    p.add_argument("--reference-dist", help="distribution JSON for KL plausibility columns")
    p.add_argument("--n-splits", type=int, default=100)
    p.add_argument("--keep-first", action="store_true")

    p = sub.add_parser("sweep-nc", parents=[common], help="KL plausibility as a function of Nc")
    p.add_argument("saliency", nargs="+")
    p.add_argument("--profile", required=True)
    p.add_argument("--nc-range", type=parse_range, default=list(range(1, 10)))
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--n-scanpaths", type=int, default=20)
    p.add_argument("--n-fixations", type=int, default=15)
    p.add_argument("--reference-dist")
    p.add_argument("--ground-truth", help="fixation log matched to maps by file stem")

    p = sub.add_parser("analyze", parents=[common], help="crowns, distributions and KS matrix")
    p.add_argument("log")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--n-draw", type=int, default=5000)
    p.add_argument("--bandwidth", type=parse_bandwidth, default="silverman")
    p.add_argument("--keep-first", action="store_true")
    return parser


def _profile_overrides(args) -> dict:
    return dict(nc=args.nc, memory_span=args.memory_span, ppd=args.ppd, grid=args.grid,
                uniform_prior=args.uniform_prior, jacobian_correction=args.jacobian_correction)


def _dispatch(args) -> None:
    ppd = args.ppd if args.ppd is not None else DEFAULT_PPD
    if args.command in ("generate", "evaluate", "sweep-nc", "analyze") and args.seed is None:
        raise ValidationError(f"{args.command} requires --seed")
    if args.command == "estimate":
        groups = args.groups.split(",") if args.groups else None
        cmd_estimate(args.log, args.width, args.height, args.out, ppd, args.grid, groups,
                     args.bandwidth, args.amp_bins, args.amp_max, args.ori_bins,
                     args.min_samples, not args.keep_first)
    elif args.command == "generate":
        cmd_generate(args.saliency, args.profile, args.out, args.seed, args.n_scanpaths,
                     args.n_fixations, args.image_id, args.workers, **_profile_overrides(args))
    elif args.command == "evaluate":
        if args.manifest:
            _require_files(args.manifest)
            jobs = read_manifest(args.manifest)
        elif args.predicted:
            image_id = args.image_id if args.image_id is not None else Path(args.predicted).stem
            jobs = [EvaluationJob(image_id, args.group, args.model, Path(args.predicted),
                                  Path(args.human) if args.human else None)]
        else:
            raise ValidationError("evaluate needs --predicted or --manifest")
        cmd_evaluate(jobs, args.fixations, args.out, args.seed, ppd, args.reference_dist,
                     args.n_splits, not args.keep_first)
    elif args.command == "sweep-nc":
        cmd_sweep_nc(args.saliency, args.profile, args.out, args.seed, args.nc_range,
                     args.repetitions, args.n_scanpaths, args.n_fixations, args.reference_dist,
                     args.ground_truth, **_profile_overrides(args))
    elif args.command == "analyze":
        cmd_analyze(args.log, args.width, args.height, args.out, args.seed, ppd, args.n_draw,
                    args.bandwidth, not args.keep_first)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARVED
    except DegenerateMapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SaccadicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
