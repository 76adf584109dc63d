import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occlubench.core import OcclusionTrack, PoseSequence3D
from occlubench.metrics import (
    ABSENT, EmptySelectionError, MetricReport, ReportKey, aggregate_runs, detector_error_stats, mpjpe,
    normalized_mpjpe, occluded_count_histogram, occlusion_duration_stats, occlusion_rate_per_joint,
    per_joint_mpjpe, run_lengths, slice_sums,
)

from conftest import random_labels, random_seq3d


def test_mpjpe_hand_example():
    gt = np.zeros((1, 17, 3))
    pred = np.zeros((1, 17, 3))
    pred[0, :, 0] = np.arange(17)  # joint j off by j mm
    assert mpjpe(pred, gt, exclude=()) == pytest.approx(np.arange(17).mean())
    assert mpjpe(pred, gt) == pytest.approx(np.arange(1, 17).mean())  # hip excluded by default
    pj = per_joint_mpjpe(pred, gt)
    assert np.isnan(pj[0]) and pj[16] == 16


def test_slices_partition_overall(rng):
    gt = random_seq3d(rng, 40)
    pred = gt.replace(coords=gt.coords + rng.normal(0, 20, gt.coords.shape))
    sums = slice_sums(pred, gt, labels=gt.occlusion)
    assert sums["overall"].count == sums["visible"].count + sums["occluded"].count
    assert sums["overall"].total == pytest.approx(sums["visible"].total + sums["occluded"].total)
    assert mpjpe(pred, gt) == pytest.approx(sums["overall"].total / sums["overall"].count)


def test_empty_slice_raises_and_per_joint_is_nan(rng):
    gt = random_seq3d(rng, 5, p=0.0)
    with pytest.raises(EmptySelectionError):
        mpjpe(gt, gt, slice="occluded", labels=gt.occlusion)
    assert np.isnan(per_joint_mpjpe(gt, gt, slice="occluded", labels=gt.occlusion)).all()


def test_slice_needs_labels(rng):
    with pytest.raises(ValueError):
        mpjpe(np.zeros((2, 17, 3)), np.zeros((2, 17, 3)), slice="visible")
    with pytest.raises(ValueError):
        mpjpe(np.zeros((2, 17, 3)), np.zeros((2, 17, 3)), slice="sideways")


def test_unknown_exclusion_rejected():
    with pytest.raises(ValueError):
        mpjpe(np.zeros((2, 17, 3)), np.zeros((2, 17, 3)), exclude=("Tail",))


def test_frames_window(rng):
    gt = np.zeros((10, 17, 3))
    pred = np.zeros((10, 17, 3))
    pred[5:, :, 2] = 4.0
    assert mpjpe(pred, gt, frames=slice(5, 10)) == 4.0
    assert mpjpe(pred, gt, frames=slice(0, 5)) == 0.0


def test_shape_mismatch(rng):
    with pytest.raises(ValueError):
        mpjpe(np.zeros((2, 17, 3)), np.zeros((3, 17, 3)))


def test_normalized():
    assert normalized_mpjpe(10.5, 10.0) == pytest.approx(0.5)
    assert normalized_mpjpe({0.01: 3.0, 0.05: 9.0}, {0.01: 1.0, 0.05: 1.0}) == {0.01: 2.0, 0.05: 8.0}
    with pytest.raises(KeyError):
        normalized_mpjpe({"a": 1.0}, {"b": 1.0})


def test_aggregate_runs():
    s = aggregate_runs([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5 and s.std == pytest.approx(np.sqrt(5 / 3)) and s.n == 4
    assert aggregate_runs([7.0]).std == 0.0
    assert aggregate_runs({"a": [1.0, 3.0]})["a"].mean == 2.0
    with pytest.raises(ValueError):
        aggregate_runs([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), max_size=60))
def test_run_lengths_sum(flags):
    runs = run_lengths(flags)
    assert runs.sum() == sum(flags)
    assert np.all(runs > 0)
    assert len(runs) == sum(1 for i, f in enumerate(flags) if f and (i == 0 or not flags[i - 1]))


def test_duration_stats_per_action():
    a = np.array([[0], [1], [1], [1], [0], [1], [0]])
    b = np.array([[1], [1], [0], [0], [0], [0], [0]])
    never = np.zeros((7, 1), dtype=int)
    stats = occlusion_duration_stats({"a": a, "b": b, "c": never})
    assert stats.average.tolist() == [2.0]  # mean of 2 (a) and 2 (b); c never occluded
    assert stats.maximum.tolist() == [3.0]
    stats = occlusion_duration_stats({"a": [a, b]})
    assert stats.average.tolist() == [2.0] and stats.maximum.tolist() == [3.0]


def test_histogram_and_rates():
    labels = np.array([[0, 0, 0], [1, 2, 0], [1, 1, 1]])
    hist = occluded_count_histogram(labels)
    assert hist.counts.tolist() == [1, 0, 1, 1]
    assert hist.mean_fraction == pytest.approx(5 / 9)
    np.testing.assert_allclose(occlusion_rate_per_joint(labels), [2 / 3, 2 / 3, 1 / 3])
    two = occluded_count_histogram([labels, labels])
    assert two.frames == 6 and two.mean_fraction == hist.mean_fraction


def test_detector_stats_population_std(rng):
    gt = np.zeros((4, 2, 2))
    det = np.zeros((4, 2, 2))
    det[:, 0, 0] = [1, 2, 3, 4]
    labels = np.array([[1, 0]] * 4)
    stats = detector_error_stats(det, gt, labels)
    assert stats["SelfOccluded"].mean == 2.5
    assert stats["SelfOccluded"].std == pytest.approx(np.std([1, 2, 3, 4]))
    assert stats["Visible"].mean == 0 and stats["Visible"].count == 4
    assert stats["ExternallyOccluded"] is ABSENT


def test_detector_stats_frame_order_invariant(rng):
    gt = rng.normal(size=(50, 17, 2))
    det = gt + rng.normal(size=gt.shape)
    labels = random_labels(rng, 50)
    perm = rng.permutation(50)
    a = detector_error_stats(det, gt, labels)
    b = detector_error_stats(det[perm], gt[perm], labels[perm])
    assert a == b


def test_report_partition_violations():
    rep = MetricReport()
    base = ReportKey("m", 0.01, None)
    rep.add(base._replace(slice="overall"), 1.0, 0.0, 10)
    rep.add(base._replace(slice="visible"), 1.0, 0.0, 6)
    rep.add(base._replace(slice="occluded"), 1.0, 0.0, 4)
    assert rep.partition_violations() == []
    rep.add(base._replace(slice="occluded"), 1.0, 0.0, 3)
    assert rep.partition_violations() == [base._replace(slice="overall")]
    with pytest.raises(ValueError):
        rep.add(base, 1.0, -1.0, 1)


def test_sequences_with_restricted_joints(rng):
    gt = PoseSequence3D(rng.normal(size=(3, 2, 3)), OcclusionTrack(np.zeros((3, 2), np.int8)), joints=("Hip", "RWrist"))
    pred = gt.replace(coords=gt.coords + [1.0, 0, 0])
    assert mpjpe(pred, gt) == pytest.approx(1.0)
    assert per_joint_mpjpe(pred, gt, exclude=()).tolist() == pytest.approx([1.0, 1.0])
