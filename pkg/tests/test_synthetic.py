import numpy as np
import pytest
from scipy import stats

from saccadic.synthetic import (
    GROUPS,
    analytic_distribution,
    analytic_spatial_set,
    blob_saliency,
    center_direction,
    sample_cell,
    simulate_sequences,
)


@pytest.mark.parametrize("cell, expected", [((0, 0), 315.0), ((0, 1), 270.0), ((1, 2), 180.0), ((2, 0), 45.0)])
def test_center_direction_points_at_the_middle(cell, expected):
    assert center_direction(*cell) == pytest.approx(expected)
    assert center_direction(1, 1) is None


def test_samples_follow_the_tabulated_law(rng):
    group = GROUPS["6-10yo"]
    dist = analytic_distribution(group, 0, 2)
    draws = sample_cell(group, 0, 2, 20_000, rng)
    draws = draws[draws[:, 0] < dist.amp_max]
    # orientation histogram on 12 coarse bins against the tabulated marginal
    observed = np.histogram(draws[:, 1], bins=12, range=(0, 360))[0]
    expected = dist.orientation_marginal().reshape(12, -1).sum(axis=1)
    expected = expected / expected.sum() * observed.sum()
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_spatial_set_cells_are_normalized():
    spatial = analytic_spatial_set("2yo", 300, 200)
    for row in spatial.cells:
        for cell in row:
            assert (cell.density * cell.cell_area).sum() == pytest.approx(1.0, abs=1e-9)


def test_groups_grow_their_saccades_with_age():
    means = [g.amp_shape * g.amp_scale for g in GROUPS.values()]
    assert means == sorted(means)


def test_walks_start_centred_and_stay_inside():
    seqs = simulate_sequences("adults", 200, 150, 3, 2, 12, ppd=8.0, seed=1)
    assert len(seqs) == 6
    for s in seqs:
        xy = s.xy()
        assert tuple(xy[0]) == (100.0, 75.0)
        assert (xy[:, 0] >= 0).all() and (xy[:, 0] < 200).all()
        assert (xy[:, 1] >= 0).all() and (xy[:, 1] < 150).all()


def test_blob_maps_are_seeded_and_positive():
    a, b = blob_saliency(80, 60, seed=4), blob_saliency(80, 60, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values.min() > 0
    assert not np.array_equal(a.values, blob_saliency(80, 60, seed=5).values)
