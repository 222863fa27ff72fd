import csv
import io
import json

import numpy as np
import pytest
from PIL import Image

from saccadic.cli import cmd_sweep_nc, main
from saccadic.engine import ViewerProfile, parse_scanpaths, save_profile, scanpath_plausibility
from saccadic.eyedata import SaliencyGrid, parse_fixation_log, save_saliency_png, write_sgf
from saccadic.statmodel import ks2d_statistic, load_distribution, save_distribution
from saccadic.synthetic import analytic_spatial_set, blob_saliency, synthetic_log

W, H, PPD = 300, 240, 10.0
GROUPS4 = ["2yo", "4-6yo", "6-10yo", "adults"]


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    (root / "log.csv").write_text(synthetic_log(GROUPS4, W, H, n_observers=16, n_images=3, n_fixations=20, ppd=PPD, seed=5))
    spatial = analytic_spatial_set("adults", W, H)
    save_distribution(spatial, root / "adults_true.json")
    save_distribution(spatial.pooled(), root / "adults_pooled_true.json")
    save_profile(ViewerProfile(spatial, ppd=PPD), root / "profile.json", "adults_true.json")
    for k in range(3):
        write_sgf(blob_saliency(W, H, seed=k), root / f"img{k}.sgf")
    return root


def run(*argv):
    return main([str(a) for a in argv])


# -- estimate ------------------------------------------------------------------


def test_estimate_fans_out_per_group(world, tmp_path, capsys):
    assert run("estimate", world / "log.csv", "--width", W, "--height", H, "--ppd", PPD, "--out", tmp_path) == 0
    names = sorted(p.name for p in tmp_path.glob("*.json") if p.name != "run_config.json")
    assert names == sorted([f"{g}_spatial.json" for g in GROUPS4] + [f"{g}_pooled.json" for g in GROUPS4])
    assert "per-cell saccades" in capsys.readouterr().out
    assert len(load_distribution(tmp_path / "adults_spatial.json").cells) == 3


def test_estimate_single_cell_grid_writes_pooled_only(world, tmp_path):
    assert run("estimate", world / "log.csv", "--width", W, "--height", H, "--grid", "1x1", "--out", tmp_path) == 0
    assert not list(tmp_path.glob("*_spatial.json"))
    assert len(list(tmp_path.glob("*_pooled.json"))) == 4


def test_estimate_missing_header_column(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("observer_id,image_id,index,x,y,duration_ms\n")
    assert run("estimate", tmp_path / "bad.csv", "--width", 10, "--height", 10, "--out", tmp_path / "o") == 2
    assert "group_id" in capsys.readouterr().err


def test_estimate_starved_cell_exits_non_zero(tmp_path, capsys):
    text = "observer_id,image_id,group_id,index,x,y,duration_ms\n" + "".join(
        f"o,i,g,{k},{5 + k},5,\n" for k in range(10)
    )
    (tmp_path / "thin.csv").write_text(text)
    code = run("estimate", tmp_path / "thin.csv", "--width", W, "--height", H, "--out", tmp_path / "o")
    assert code == 3
    assert "(0,1)=0" in capsys.readouterr().err
    assert not list((tmp_path / "o").glob("*.json"))


# -- generate ------------------------------------------------------------------


def test_generate_defaults_and_determinism(world, tmp_path):
    args = ["generate", world / "img0.sgf", "--profile", world / "profile.json", "--seed", 42]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    text = (tmp_path / "a" / "scanpaths.csv").read_text()
    assert len(text.splitlines()) == 1 + 20 * 15
    assert text == (tmp_path / "b" / "scanpaths.csv").read_text()
    a = np.asarray(Image.open(tmp_path / "a" / "scanpath_saliency.png"))
    b = np.asarray(Image.open(tmp_path / "b" / "scanpath_saliency.png"))
    assert a.dtype == np.uint8 and a.shape == (H, W)
    np.testing.assert_array_equal(a, b)
    cfg_a, cfg_b = (json.loads((tmp_path / d / "run_config.json").read_text()) for d in "ab")
    assert cfg_a.pop("out") != cfg_b.pop("out")
    assert cfg_a == cfg_b


def test_generate_uniform_prior_ablation(world, tmp_path):
    assert run("generate", world / "img1.sgf", "--profile", world / "profile.json", "--seed", 1,
               "--uniform-prior", "--n-scanpaths", 3, "--n-fixations", 5, "--out", tmp_path) == 0
    cfg = json.loads((tmp_path / "run_config.json").read_text())
    assert cfg["params"]["uniform_prior"] is True
    base = tmp_path / "base"
    run("generate", world / "img1.sgf", "--profile", world / "profile.json", "--seed", 1,
        "--n-scanpaths", 3, "--n-fixations", 5, "--out", base)
    assert (tmp_path / "scanpaths.csv").read_text() != (base / "scanpaths.csv").read_text()


def test_generate_requires_seed(world, tmp_path, capsys):
    assert run("generate", world / "img0.sgf", "--profile", world / "profile.json", "--out", tmp_path) == 2
    assert "--seed" in capsys.readouterr().err


def test_generate_degenerate_map_exit(tmp_path, capsys):
    dens = np.zeros((80, 120))
    dens[-1] = 1.0
    dens /= dens.sum() * 0.25 * 3
    from saccadic.statmodel import JointSaccadeDistribution

    save_distribution(JointSaccadeDistribution(80, 20.0, 120, dens, 0.5, 5.0, 10), tmp_path / "far.json")
    save_profile(ViewerProfile(None, ppd=1.0), tmp_path / "p.json", "far.json")
    write_sgf(SaliencyGrid(np.ones((10, 10))), tmp_path / "s.sgf")
    assert run("generate", tmp_path / "s.sgf", "--profile", tmp_path / "p.json", "--seed", 1, "--out", tmp_path / "o") == 4
    assert "scanpath generation failed" in capsys.readouterr().err


def test_generate_does_not_touch_inputs(world, tmp_path):
    before = {p.name: p.read_bytes() for p in world.iterdir() if p.is_file()}
    run("generate", world / "img2.sgf", "--profile", world / "profile.json", "--seed", 3,
        "--n-scanpaths", 2, "--n-fixations", 4, "--out", tmp_path)
    assert {p.name: p.read_bytes() for p in world.iterdir() if p.is_file()} == before


# -- evaluate ------------------------------------------------------------------


@pytest.fixture(scope="module")
def generated(world, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    for k in range(3):
        for model, extra in [("sv", []), ("uniform", ["--uniform-prior"])]:
            d = out / f"{model}{k}"
            assert run("generate", world / f"img{k}.sgf", "--profile", world / "profile.json", "--seed", 10 + k,
                       "--out", d, *extra) == 0
    return out


def test_evaluate_self_prediction(world, generated, tmp_path):
    png = generated / "sv0" / "scanpath_saliency.png"
    assert run("evaluate", "--predicted", png, "--human", png, "--fixations", world / "log.csv",
               "--image-id", "img0", "--group", "adults", "--seed", 1, "--out", tmp_path) == 0
    (row,) = rows(tmp_path / "metrics.csv")
    assert float(row["cc"]) == pytest.approx(1.0) and float(row["sim"]) == pytest.approx(1.0)
    assert float(row["emd"]) == pytest.approx(0.0, abs=1e-9)
    assert json.loads((tmp_path / "metrics.json").read_text())[0]["model"] == "model"


def test_evaluate_manifest_gives_one_row_per_triple(world, generated, tmp_path):
    lines = ["image_id,group_id,model,predicted,human"]
    for k in range(3):
        for model in ("sv", "uniform"):
            lines.append(f"img{k},adults,{model},{generated}/{model}{k}/scanpaths.csv,{generated}/sv{k}/scanpath_saliency.png")
    (tmp_path / "manifest.csv").write_text("\n".join(lines) + "\n")
    assert run("evaluate", "--manifest", tmp_path / "manifest.csv", "--fixations", world / "log.csv",
               "--seed", 2, "--ppd", PPD, "--out", tmp_path / "o") == 0
    out = rows(tmp_path / "o" / "metrics.csv")
    assert len(out) == 6
    assert [(r["image_id"], r["model"]) for r in out][:2] == [("img0", "sv"), ("img0", "uniform")]


def test_evaluate_reference_columns_match_engine(world, generated, tmp_path):
    sp = generated / "sv1" / "scanpaths.csv"
    assert run("evaluate", "--predicted", sp, "--human", generated / "sv1" / "scanpath_saliency.png",
               "--fixations", world / "log.csv", "--image-id", "img1", "--group", "adults", "--seed", 1,
               "--ppd", PPD, "--reference-dist", world / "adults_pooled_true.json", "--out", tmp_path) == 0
    (row,) = rows(tmp_path / "metrics.csv")
    expected = scanpath_plausibility(parse_scanpaths(sp.read_text()), load_distribution(world / "adults_pooled_true.json"), PPD)
    assert (float(row["kl_amplitude"]), float(row["kl_joint"])) == pytest.approx(expected, abs=1e-12)


def test_evaluate_dimension_mismatch(world, tmp_path, capsys):
    small = SaliencyGrid(np.ones((20, 30)) + np.eye(20, 30))
    save_saliency_png(small, tmp_path / "small.png")
    save_saliency_png(blob_saliency(W, H), tmp_path / "big.png")
    code = run("evaluate", "--predicted", tmp_path / "small.png", "--human", tmp_path / "big.png",
               "--fixations", world / "log.csv", "--image-id", "img0", "--group", "adults", "--seed", 1, "--out", tmp_path / "o")
    assert code == 2
    err = capsys.readouterr().err
    assert "30x20" in err and f"{W}x{H}" in err


# -- sweep-nc --------------------------------------------------------------------


def test_sweep_schema_rows_and_determinism(world, tmp_path):
    base = ["sweep-nc", world / "img0.sgf", "--profile", world / "profile.json", "--nc-range", "1..3",
            "--n-scanpaths", 10, "--seed", 7]
    assert run(*base, "--out", tmp_path / "a") == 0
    assert run(*base, "--out", tmp_path / "b") == 0
    assert run(*base, "--repetitions", 2, "--out", tmp_path / "c") == 0
    a, c = rows(tmp_path / "a" / "sweep_nc.csv"), rows(tmp_path / "c" / "sweep_nc.csv")
    assert [r["nc"] for r in a] == ["1", "2", "3"]
    assert list(a[0]) == list(c[0]) == ["nc", "kl_amplitude", "kl_joint", "cc", "sim", "emd", "auc_judd", "auc_borji", "nss"]
    assert a[0]["cc"] == ""
    assert a != c
    assert (tmp_path / "a" / "sweep_nc.csv").read_bytes() == (tmp_path / "b" / "sweep_nc.csv").read_bytes()


def test_sweep_with_ground_truth_fills_metrics(world, tmp_path):
    result = cmd_sweep_nc([world / "img0.sgf"], world / "profile.json", tmp_path, seed=3, nc_values=[2],
                          n_scanpaths=10, ground_truth=world / "log.csv", n_splits=5)
    assert result[0]["nss"] is not None and -1 <= result[0]["cc"] <= 1


def test_sweep_rejects_out_of_range_nc(world, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("sweep-nc", world / "img0.sgf", "--profile", world / "profile.json", "--nc-range", "0..3",
               "--seed", 1, "--out", tmp_path)
    assert exc.value.code == 2


# -- analyze ------------------------------------------------------------------------


def _two_group_log(tmp_path, groups, n_obs=6):
    (tmp_path / "log.csv").write_text(synthetic_log(groups, W, H, n_observers=n_obs, n_images=3, ppd=PPD, seed=1))
    return tmp_path / "log.csv"


def test_analyze_two_groups(tmp_path):
    log = _two_group_log(tmp_path, ["2yo", "adults"], n_obs=10)
    assert run("analyze", log, "--width", W, "--height", H, "--ppd", PPD, "--seed", 4, "--out", tmp_path / "o") == 0
    crowns = rows(tmp_path / "o" / "crowns.csv")
    assert [r["group_id"] for r in crowns] == ["2yo", "adults"]
    assert sum(float(crowns[0][f"crown_{k}"]) for k in range(1, 11)) == pytest.approx(1.0)
    ks = {(r["group_a"], r["group_b"]): (float(r["statistic"]), float(r["p_value"])) for r in rows(tmp_path / "o" / "ks_matrix.csv")}
    assert len(ks) == 4
    assert ks[("2yo", "2yo")][1] == 1.0 and ks[("adults", "adults")][1] == 1.0
    assert ks[("2yo", "adults")] == ks[("adults", "2yo")]
    assert (tmp_path / "o" / "adults_joint.json").exists() and (tmp_path / "o" / "2yo_amplitude.csv").exists()


def test_analyze_single_group(tmp_path):
    log = _two_group_log(tmp_path, ["4-6yo"])
    assert run("analyze", log, "--width", W, "--height", H, "--seed", 4, "--out", tmp_path / "o") == 0
    (row,) = rows(tmp_path / "o" / "ks_matrix.csv")
    assert float(row["p_value"]) == pytest.approx(1.0)


def test_analyze_distinct_groups_agree_with_permutation_oracle(tmp_path):
    from saccadic.eyedata import saccade_array
    from saccadic.synthetic import GroupModel, simulate_sequences

    near = GroupModel("near", 6.0, 0.3, horizontal=0.8, upward=0.0, central=0.5)
    far = GroupModel("far", 6.0, 1.2, horizontal=0.0, upward=0.6, central=0.5)
    seqs = simulate_sequences(near, W, H, 5, 2, 16, PPD, 1) + simulate_sequences(far, W, H, 5, 2, 16, PPD, 2)
    from saccadic.eyedata import format_fixation_log

    (tmp_path / "log.csv").write_text(format_fixation_log(seqs))
    assert run("analyze", tmp_path / "log.csv", "--width", W, "--height", H, "--ppd", PPD, "--seed", 4, "--out", tmp_path / "o") == 0
    ks = {(r["group_a"], r["group_b"]): float(r["p_value"]) for r in rows(tmp_path / "o" / "ks_matrix.csv")}
    assert ks[("far", "near")] < 0.001
    parsed = parse_fixation_log((tmp_path / "log.csv").read_text(), W, H)
    a = saccade_array([s for s in parsed if s.group_id == "near"], PPD)
    b = saccade_array([s for s in parsed if s.group_id == "far"], PPD)
    rng = np.random.default_rng(0)
    pooled, observed = np.vstack([a, b]), ks2d_statistic(a, b)
    null = [ks2d_statistic(*np.split(pooled[rng.permutation(len(pooled))], [len(a)])) for _ in range(1000)]
    assert (1 + sum(v >= observed for v in null)) / 1001 < 0.002
