import numpy as np
import pytest

from occlubench.core import CameraModel
from occlubench.geometry import (
    DEFAULT_DISTANCE_EDGES, DEFAULT_ORIENTATION_EDGES, DegenerateGeometryError, HeatmapGrid, bin_heatmap,
    bin_velocity, camera_distance, frame_geometry, keypoint_speeds, orientation_angle, velocity_profile,
)
from occlubench.skeleton import H36M17
from occlubench.synthetic import REST_POSE, look_at_camera, rot_z


def test_default_grids():
    assert len(DEFAULT_ORIENTATION_EDGES) == 19 and DEFAULT_ORIENTATION_EDGES[1] == 10.0
    assert len(DEFAULT_DISTANCE_EDGES) == 17 and DEFAULT_DISTANCE_EDGES[1] == 0.5


def test_rest_pose_faces_plus_y():
    # camera on +y looking back at the subject sees the front: 180 degrees
    cam = look_at_camera([0.0, 5000.0, 1000.0], [0.0, 0.0, 1000.0])
    assert orientation_angle(REST_POSE, cam) == pytest.approx(180.0, abs=1e-9)
    assert orientation_angle(REST_POSE @ rot_z(np.pi).T, cam) == pytest.approx(0.0, abs=1e-9)
    assert orientation_angle(REST_POSE @ rot_z(np.pi / 2).T, cam) == pytest.approx(90.0, abs=1e-9)


def test_world_and_camera_space_agree(camera):
    pose = REST_POSE @ rot_z(0.7).T
    in_cam = camera.world_to_camera(pose)
    assert orientation_angle(in_cam, camera, space="camera") == pytest.approx(orientation_angle(pose, camera), abs=1e-9)
    assert camera_distance(in_cam, camera, space="camera") == pytest.approx(camera_distance(pose, camera), abs=1e-9)


def test_distance_in_metres():
    cam = CameraModel(1000, 1000, 500, 500)  # at the origin
    pose = np.zeros((17, 3)) + [0.0, 0.0, 3000.0]
    assert camera_distance(pose, cam) == pytest.approx(3.0)


def test_degenerate_pose():
    pose = np.zeros((17, 3))
    with pytest.raises(DegenerateGeometryError):
        orientation_angle(pose, CameraModel(1000, 1000, 500, 500))
    orient, dist = frame_geometry(pose[None], CameraModel(1000, 1000, 500, 500), space="world")
    assert np.isnan(orient[0]) and dist[0] == 0.0


def test_heatmap_edges_and_spill():
    grid = bin_heatmap([[0.0, 0.0, 1.0], [180.0, 8.0, 2.0], [10.0, 0.5, 3.0], [181.0, 1.0, 4.0], [5.0, -0.1, 5.0]])
    assert grid.counts[0, 0] == 1 and grid.counts[-1, -1] == 1 and grid.counts[1, 1] == 1
    assert grid.spill == 2 and grid.total == 5
    assert grid.mean[-1, -1] == 2.0 and np.isnan(grid.mean[3, 3])


def test_heatmap_merge(rng):
    s = np.column_stack([rng.uniform(0, 180, 100), rng.uniform(0, 8, 100), rng.uniform(0, 50, 100)])
    whole = bin_heatmap(s)
    merged = bin_heatmap(s[:40]).merge(bin_heatmap(s[40:]))
    assert np.array_equal(whole.counts, merged.counts)
    np.testing.assert_allclose(whole.sums, merged.sums)
    with pytest.raises(ValueError):
        whole.merge(HeatmapGrid(np.linspace(0, 180, 10)))
    with pytest.raises(ValueError):
        HeatmapGrid(np.array([0.0, 0.0, 1.0]))


def test_velocity_binning_clamps_ends():
    bins = bin_velocity([1e-5, 1e-2, 0.5, 1e2, 1e5], [1.0, 2.0, 3.0, 4.0, 5.0])
    assert len(bins) == 20
    assert bins[0].count == 2 and bins[0].mean_error == 1.5
    assert bins[-1].count == 2 and bins[-1].mean_error == 4.5
    assert sum(b.count for b in bins) == 5
    assert bins[5].mean_error is None


def test_velocity_profile(rng):
    c2 = np.cumsum(np.ones((5, 17, 2)), axis=0)
    speeds = keypoint_speeds(c2)
    np.testing.assert_allclose(speeds, np.sqrt(2))
    gt = rng.normal(size=(5, 17, 3))
    bins = velocity_profile(c2, gt + 1.0, gt, exclude=("Hip",))
    assert sum(b.count for b in bins) == 4 * 16
    with pytest.raises(ValueError):
        keypoint_speeds(c2[:1])
    assert H36M17.joints[0] == "Hip"
