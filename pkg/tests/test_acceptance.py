"""End-to-end acceptance criteria.

Each test prints one ``PASS``/``FAIL`` line with the measured quantities and
wall time, then asserts. Timing limits are part of each criterion.
"""

import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from saccadic.cli import cmd_sweep_nc
from saccadic.engine import ViewerProfile, batch_generate, save_profile, scanpath_saccades
from saccadic.eyedata import SaliencyGrid, fixation_saliency_map, write_sgf
from saccadic.metrics import auc_borji, auc_judd, cc, emd, nss, sim
from saccadic.statmodel import estimate_joint, save_distribution, kl_divergence, ks2d_statistic, ks2d_test
from saccadic.synthetic import analytic_spatial_set, blob_saliency
from test_statmodel import analytic_bins, mixture_samples

pytestmark = pytest.mark.acceptance

W, H = 1024, 768


@contextmanager
def criterion(capsys, number, title, limit_s):
    """Time the body and print one verdict line; the body fills ``state``."""
    state = {"ok": False, "detail": ""}
    start = time.perf_counter()
    try:
        yield state
    finally:
        elapsed = time.perf_counter() - start
        in_time = elapsed < limit_s
        verdict = "PASS" if state["ok"] and in_time else "FAIL"
        with capsys.disabled():
            print(
                f"\n[{verdict}] criterion {number} ({title}): {state['detail']}; "
                f"{elapsed:.1f}s (limit {limit_s:.0f}s)"
            )
    assert state["ok"], state["detail"]
    assert in_time, f"took {elapsed:.1f}s, limit {limit_s}s"


def test_criterion_1_metric_oracles(capsys):
    rng = np.random.default_rng(1)
    with criterion(capsys, 1, "metric oracles", 10) as c:
        a = rng.random((48, 64))
        left = np.zeros((48, 64))
        left[:, :32] = rng.random((48, 32)) + 0.1
        right = np.zeros((48, 64))
        right[:, 32:] = rng.random((48, 32)) + 0.1
        const = np.full((48, 64), 0.3)
        fx = np.column_stack([rng.uniform(0, 64, 200), rng.uniform(0, 48, 200)])
        uniform_fx = np.column_stack([rng.uniform(0, 64, 10_000), rng.uniform(0, 48, 10_000)])
        got = {
            "cc": cc(a, a),
            "sim": sim(a, a),
            "sim_disjoint": sim(left, right),
            "emd": emd(a, a),
            "judd": auc_judd(const, fx),
            "borji": auc_borji(const, fx),
            "nss": nss(a, uniform_fx),
        }
        c["ok"] = (
            abs(got["cc"] - 1) <= 1e-9
            and abs(got["sim"] - 1) <= 1e-9
            and got["sim_disjoint"] == 0
            and abs(got["emd"]) <= 1e-9
            and abs(got["judd"] - 0.5) <= 0.02
            and abs(got["borji"] - 0.5) <= 0.02
            and abs(got["nss"]) <= 0.05
        )
        c["detail"] = ", ".join(f"{k}={v:.4g}" for k, v in got.items())


def _lp_transport(p, q):
    """Exact transport cost by a dense linear program over the coupling."""
    h, w = p.shape
    r, col = np.divmod(np.arange(h * w), w)
    cost = np.hypot(r[:, None] - r[None, :], col[:, None] - col[None, :])
    n = h * w
    rows = np.kron(np.eye(n), np.ones(n))
    cols = np.kron(np.ones(n), np.eye(n))
    res = linprog(
        cost.ravel(),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.concatenate([p.ravel(), q.ravel()]),
        bounds=(0, None),
        method="highs",
    )
    assert res.status == 0
    return res.fun


def test_criterion_2_emd_exactness(capsys):
    rng = np.random.default_rng(2)
    with criterion(capsys, 2, "EMD exactness", 30) as c:
        errors = []
        for _ in range(50):
            p, q = rng.random((8, 8)), rng.random((8, 8))
            p, q = p / p.sum(), q / q.sum()
            errors.append(abs(emd(p, q) - _lp_transport(p, q)))
        c["ok"] = max(errors) < 1e-6
        c["detail"] = f"50 pairs, max |emd - LP| = {max(errors):.2e}"


def test_criterion_3_kde_recovery(capsys):
    rng = np.random.default_rng(3)
    with criterion(capsys, 3, "KDE recovery", 20) as c:
        samples = mixture_samples(10_000, rng)
        dist = estimate_joint(samples[samples[:, 0] <= 20])
        kl = kl_divergence(analytic_bins(dist), dist.probabilities())
        c["ok"] = kl < 0.05
        c["detail"] = f"KL(analytic || estimated) = {kl:.4f}"


def test_criterion_4_ks_calibration(capsys):
    rng = np.random.default_rng(4)
    with criterion(capsys, 4, "KS calibration", 120) as c:
        p_same = np.array(
            [ks2d_test(mixture_samples(100, rng), mixture_samples(100, rng)).p_value for _ in range(500)]
        )
        rate = float(np.mean(p_same < 0.05))

        def shifted(mean):
            d = rng.normal(mean, 3.0, 100).clip(0.05)
            return np.column_stack([d, rng.uniform(0, 360, 100)])

        a, b = shifted(4.0), shifted(13.0)
        p_test = ks2d_test(a, b).p_value
        pooled, observed = np.vstack([a, b]), ks2d_statistic(a, b)
        n_perm = 2000
        hits = sum(
            ks2d_statistic(*np.split(pooled[rng.permutation(200)], [100])) >= observed for _ in range(n_perm)
        )
        p_perm = (1 + hits) / (1 + n_perm)
        c["ok"] = abs(rate - 0.05) <= 0.02 and p_test < 0.001 and p_perm < 0.001
        c["detail"] = f"null rejection rate {rate:.3f}; shifted p={p_test:.2e}, permutation p={p_perm:.2e}"


def test_criterion_5_engine_closed_loop(capsys):
    with criterion(capsys, 5, "engine closed loop", 60) as c:
        spatial = analytic_spatial_set("adults", W, H)
        reference = spatial.pooled()
        profile = ViewerProfile(spatial, candidate_count=5)
        flat = SaliencyGrid(np.ones((H, W)))
        paths = batch_generate(flat, profile, 200, 15, 5)
        samples = scanpath_saccades(paths, profile.ppd)
        kept = samples[samples[:, 0] <= reference.amp_max]
        est = estimate_joint(kept, reference.amp_bins, reference.amp_max, reference.ori_bins)
        kl_joint = kl_divergence(reference.probabilities(), est.probabilities())
        mode_ref = int(np.argmax(reference.amplitude_marginal()))
        mode_gen = int(np.argmax(est.amplitude_marginal()))
        c["ok"] = kl_joint < 0.5 and abs(mode_gen - mode_ref) <= 1
        c["detail"] = (
            f"kl_joint={kl_joint:.3f}, amplitude mode bin {mode_gen} vs prior {mode_ref} "
            f"({reference.amp_step:g} deg bins)"
        )


def test_criterion_6_nc_u_curve(capsys, tmp_path):
    with criterion(capsys, 6, "Nc U-curve", 300) as c:
        spatial = analytic_spatial_set("adults", W, H)
        maps = []
        for k in range(5):
            path = tmp_path / f"blob{k}.sgf"
            write_sgf(blob_saliency(W, H, seed=100 + k), path)
            maps.append(path)
        save_distribution(spatial, tmp_path / "adults_dist.json")
        save_profile(ViewerProfile(spatial), tmp_path / "adults.json", "adults_dist.json")
        rows = cmd_sweep_nc(maps, tmp_path / "adults.json", tmp_path / "out", seed=7, n_scanpaths=20)
        kl = {r["nc"]: r["kl_joint"] for r in rows}
        low = min(kl[n] for n in range(3, 8))
        c["ok"] = kl[1] > low and kl[9] > low
        c["detail"] = "kl_joint by Nc: " + ", ".join(f"{n}:{v:.3f}" for n, v in kl.items())


def test_criterion_7_ablation_ordering(capsys):
    with criterion(capsys, 7, "ablation ordering", 300) as c:
        spatial = analytic_spatial_set("adults", W, H)
        full = ViewerProfile(spatial)
        models = {"full": full, "nsv": full.non_spatial(), "uniform": full.with_uniform_prior()}
        wins, lines = 0, []
        for rep in range(5):
            sal = blob_saliency(W, H, seed=200 + rep)
            truth = batch_generate(sal, full, 40, 15, 10_000 + rep)
            fx = np.concatenate([p.xy() for p in truth])
            scores = {}
            for k, (name, profile) in enumerate(models.items()):
                paths = batch_generate(sal, profile, 40, 15, 100 * rep + k + 1)
                predicted = fixation_saliency_map(np.concatenate([p.xy() for p in paths]), W, H, full.ppd)
                scores[name] = nss(predicted, fx)
            ordered = scores["full"] >= scores["nsv"] >= scores["uniform"]
            wins += ordered
            lines.append("/".join(f"{v:.3f}" for v in scores.values()) + ("+" if ordered else "-"))
        c["ok"] = wins >= 4
        c["detail"] = f"ordered in {wins}/5 (nss full/nsv/uniform: {'; '.join(lines)})"


def test_criterion_8_invariant_suites(capsys):
    tests_dir = Path(__file__).parent
    with criterion(capsys, 8, "invariant suites", 120) as c:
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-m", "property", "-p", "no:cacheprovider", str(tests_dir)],
            capture_output=True,
            text=True,
            cwd=tests_dir.parent,
        )
        summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
        c["ok"] = proc.returncode == 0
        c["detail"] = f"property tests at 100 examples each: {summary}"


def test_criterion_9_throughput(capsys):
    spatial = analytic_spatial_set("adults", W, H)
    sal = blob_saliency(W, H, seed=9)
    with criterion(capsys, 9, "throughput", 5) as c:
        paths = batch_generate(sal, ViewerProfile(spatial), 20, 15, 9)
        c["ok"] = len(paths) == 20 and all(len(p.fixations) == 15 for p in paths)
        c["detail"] = "20 scanpaths x 15 fixations on 768x1024, single core"
