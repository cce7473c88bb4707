import numpy as np
import pytest

from oracles import dense_preview_lstsq
from stone.core import stone_transform
from stone.embedding import ProlongationSpec, restrict, vectorize
from stone.errors import DimensionError, IncompletePreviewError, WindowError
from stone.preview import preview, preview_from_stream, rebin
from stone.sampling import acquire, build_schedule


def test_rebin_one_sample_per_group_is_reindexing():
    rng = np.random.default_rng(1)
    side, n = 8, 4
    d2 = (side // n) ** 2
    offsets = rng.integers(0, d2, size=n * n)
    rows = np.arange(n * n) * d2 + offsets
    values = rng.standard_normal(n * n)
    binned = rebin(rows, values, side, n)
    assert np.array_equal(binned.values, values)
    assert np.array_equal(binned.counts, np.ones(n * n))


def test_rebin_duplicates_with_equal_values():
    # rows 0 and 1 share group 0 (delta^2 = 4)
    binned = rebin([0, 1, 4, 8, 12], [5.0, 5.0, 2.0, 1.0, 0.0], 4, 2)
    assert binned.values[0] == 5.0
    assert binned.counts[0] == 2


def test_rebin_arithmetic_mean():
    binned = rebin([0, 2, 4, 8, 12], [1.0, 3.0, 0.5, 0.25, -1.0], 4, 2)
    assert binned.values[0] == 2.0


def test_rebin_reports_empty_groups():
    with pytest.raises(IncompletePreviewError) as exc:
        rebin([0, 1, 2], [1.0, 2.0, 3.0], 4, 2)
    assert exc.value.empty_groups == [1, 2, 3]


def test_rebin_validation():
    with pytest.raises(DimensionError):
        rebin([0], [1.0], 4, 8)  # preview larger than source
    with pytest.raises(DimensionError):
        rebin([0, 1], [1.0], 4, 2)
    with pytest.raises(DimensionError):
        rebin([99], [1.0], 4, 2)


def test_preview_constant_stream():
    side = 8
    sched = build_schedule(side, 3)
    c = 0.375
    stream = acquire([np.full((side, side), c)], sched, side * side)
    for n in (1, 2, 4, 8):
        pv = preview_from_stream(stream, side * side - 1, n)
        assert np.abs(pv.image - c).max() < 1e-12
        assert pv.bins_hit == n * n


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_block_constant_images_recovered_exactly(n):
    # any image constant on delta x delta patches satisfies the preview
    # equation exactly, for every window offset
    side = 8
    rng = np.random.default_rng(40 + n)
    coarse = rng.random((n, n))
    img = np.kron(coarse, np.ones((side // n, side // n)))
    sched = build_schedule(side, 17)
    stream = acquire([img] * 2, sched, side * side)
    spec = ProlongationSpec(fine_side=side, coarse_side=n)
    expect = restrict(vectorize(img), spec)
    for at in range(n * n - 1, 2 * side * side):
        pv = preview_from_stream(stream, at, n)
        assert np.abs(vectorize(pv.image) - expect).max() < 1e-10


def test_full_sampling_preview_reproduces_image():
    side = 16
    img = np.random.default_rng(5).random((side, side))
    sched = build_schedule(side, 23)
    stream = acquire([img], sched, side * side)
    pv = preview_from_stream(stream, side * side - 1, side)
    assert np.abs(pv.image - img).max() < 1e-10


def test_window_property_gives_complete_bins_everywhere():
    side = 8
    img = np.random.default_rng(6).random((side, side))
    sched = build_schedule(side, 29)
    stream = acquire([img] * 3, sched, side * side)
    for n in (1, 2, 4, 8):
        n2 = n * n
        for at in range(n2 - 1, len(stream)):
            pv = preview_from_stream(stream, at, n)
            assert pv.bins_hit == n2


def test_single_pixel_preview_is_latest_group_mean():
    side = 4
    img = np.random.default_rng(7).random((side, side))
    sched = build_schedule(side, 2)
    stream = acquire([img], sched, side * side)
    for at in range(len(stream)):
        pv = preview_from_stream(stream, at, 1)
        assert pv.image.shape == (1, 1)
        assert pv.image[0, 0] == stream.values[at]


def test_sliding_window_changes_one_group():
    side = 8
    n = 4
    img = np.random.default_rng(8).random((side, side))
    sched = build_schedule(side, 55)
    stream = acquire([img] * 2, sched, side * side)
    prev_rows, _ = stream.window(n * n - 1, n * n)
    for at in range(n * n, len(stream)):
        rows, _ = stream.window(at, n * n)
        assert np.setdiff1d(rows, prev_rows).size <= 1
        prev_rows = rows


def test_preview_provenance_metadata():
    side = 8
    img = np.random.default_rng(9).random((side, side))
    sched = build_schedule(side, 1)
    stream = acquire([img], sched, side * side)
    pv = preview_from_stream(stream, 30, 4)
    assert pv.source_side == side
    assert pv.window_start == 15
    assert pv.window_count == 16
    assert pv.side == 4


def test_insufficient_history_is_rejected():
    side = 4
    img = np.ones((side, side))
    stream = acquire([img], build_schedule(side, 0), side * side)
    with pytest.raises(WindowError):
        preview_from_stream(stream, 2, 2)


def test_preview_refuses_incomplete_bins():
    binned = rebin([0, 4, 8, 12], np.ones(4), 4, 2)
    hacked = type(binned)(
        values=binned.values,
        counts=np.array([1, 1, 0, 1]),
        fine_side=4,
        coarse_side=2,
    )
    with pytest.raises(IncompletePreviewError):
        preview(hacked)


def test_least_squares_optimality_against_dense_oracle():
    # duplicated rows with noisy values: the re-binned preview must match
    # the dense least-squares solve of || R S P u - b ||^2
    side, n = 8, 4
    rng = np.random.default_rng(11)
    img = rng.random((side, side))
    coeffs = stone_transform(vectorize(img))
    d2 = (side // n) ** 2
    rows = list(np.arange(n * n) * d2 + rng.integers(0, d2, size=n * n))
    rows += list(rng.integers(0, side * side, size=10))  # duplicates allowed
    values = coeffs[rows] + 0.01 * rng.standard_normal(len(rows))

    u_fast = stone_transform(rebin(rows, values, side, n).values)
    u_dense = dense_preview_lstsq(rows, values, side, n)
    assert np.abs(u_fast - u_dense).max() < 1e-8


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_transform_preserves_mean_and_variance(k):
    # mean is preserved exactly and the deviation from it keeps its
    # variance (population convention)
    v = np.random.default_rng(60 + k).random(4**k)
    sv = stone_transform(v)
    assert abs(sv.mean() - v.mean()) < 1e-10
    assert abs(np.var(sv) - np.var(v)) < 1e-10
