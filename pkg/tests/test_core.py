import numpy as np
import pytest

from occlubench.core import (
    CameraModel, DepthError, OcclusionTrack, PoseSequence2D, PoseSequence3D, Visibility,
    center_on_root, project, validate_sequence,
)
from occlubench.skeleton import BM3D, COCO17, H36M17, SkeletonSchema, get_schema

from conftest import identity_camera, random_seq2d, random_seq3d


def test_h36m_layout():
    assert H36M17.joints[0] == "Hip" and H36M17.joints[16] == "RWrist"
    assert H36M17.index("LShoulder") == 11 and H36M17.index("RShoulder") == 14
    assert H36M17.root == "Hip"
    assert H36M17.index("nose") == H36M17.index("Neck")
    with pytest.raises(KeyError):
        H36M17.index("Tail")
    with pytest.raises(IndexError):
        H36M17.index(17)


def test_schema_rejects_cycles_and_bad_parents():
    with pytest.raises(ValueError):
        SkeletonSchema("X", ("a", "b"), (1, 0))
    with pytest.raises(ValueError):
        SkeletonSchema("X", ("a", "b"), (-1, 5))


@pytest.mark.parametrize("tag", [H36M17.tag, BM3D.tag, COCO17.tag])
def test_schemas_are_registered(tag):
    assert get_schema(tag).num_joints == 17


def test_sequences_are_immutable(rng):
    seq = random_seq2d(rng)
    with pytest.raises(ValueError):
        seq.coords[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        seq.occlusion.labels[0, 0] = 1


def test_coords_shape_checked():
    with pytest.raises(ValueError):
        PoseSequence2D(np.zeros((3, 17, 3)))
    with pytest.raises(ValueError):
        PoseSequence3D(np.zeros((3, 17)))


def test_multi_hypothesis_shape():
    seq = PoseSequence3D(np.zeros((4, 5, 17, 3)))
    assert seq.num_hypotheses == 5 and seq.num_joints == 17
    assert PoseSequence3D(np.zeros((4, 17, 3))).num_hypotheses is None


def test_occlusion_track_from_binary():
    t = OcclusionTrack.from_binary([[0, 1], [1, 0]])
    assert t.labels.tolist() == [[0, Visibility.ExternallyOccluded], [Visibility.ExternallyOccluded, 0]]
    assert t.occluded.tolist() == [[False, True], [True, False]]


def test_validate_collects_all_violations(rng):
    coords = rng.normal(size=(4, 17, 2))
    coords[1, 3, 0] = np.nan
    labels = np.zeros((4, 17), dtype=np.int8)
    labels[2, 5] = 7
    conf = np.ones((4, 17))
    conf[0, 0] = 1.5
    res = validate_sequence(PoseSequence2D(coords, OcclusionTrack(labels), conf, width=0))
    kinds = sorted(v.kind for v in res.violations)
    assert kinds == ["confidence", "label", "non-finite", "resolution"]
    assert not res.ok
    assert validate_sequence(random_seq2d(rng)).ok


def test_validate_ignores_missing_columns():
    coords = np.zeros((2, 17, 3))
    coords[:, 9] = np.nan
    seq = PoseSequence3D(coords, missing={"Neck"})
    assert validate_sequence(seq).ok


def test_camera_rejects_non_rotation():
    with pytest.raises(ValueError):
        CameraModel(1000, 1000, 500, 500, np.diag([1.0, 1.0, 1.001]))
    with pytest.raises(ValueError):
        CameraModel(0, 1000, 500, 500)


def test_projection_matches_pinhole_formula(camera, rng):
    pts = rng.normal(0, 300, size=(6, 17, 3)) + [0, 0, 1000]
    uv = project(pts, camera)
    cam_pts = (pts - 0) @ camera.R.T + camera.t
    expect_u = camera.fx * cam_pts[..., 0] / cam_pts[..., 2] + camera.cx
    expect_v = camera.fy * cam_pts[..., 1] / cam_pts[..., 2] + camera.cy
    np.testing.assert_allclose(uv[..., 0], expect_u, rtol=1e-12)
    np.testing.assert_allclose(uv[..., 1], expect_v, rtol=1e-12)


def test_camera_round_trip_and_position(camera, rng):
    pts = rng.normal(size=(10, 3)) * 1000
    np.testing.assert_allclose(camera.camera_to_world(camera.world_to_camera(pts)), pts, atol=1e-9)
    np.testing.assert_allclose(camera.world_to_camera(camera.position), 0, atol=1e-9)
    np.testing.assert_allclose(camera.position, [4000, -3000, 1500], atol=1e-9)


def test_project_depth_error():
    cam = identity_camera()
    pts = np.ones((2, 17, 3))
    pts[1, 4, 2] = -1.0
    with pytest.raises(DepthError) as err:
        project(pts, cam, space="camera")
    assert (err.value.frame, err.value.joint) == (1, 4)


def test_center_on_root(rng):
    seq = center_on_root(random_seq3d(rng))
    assert np.all(seq.coords[:, 0] == 0)
    multi = PoseSequence3D(rng.normal(size=(3, 2, 17, 3)))
    assert np.all(center_on_root(multi).coords[:, :, 0] == 0)


def test_joint_index_by_name_and_alias(rng):
    seq = random_seq2d(rng)
    assert seq.joint_index("RWrist") == 16
    assert seq.joint_index("pelvis") == 0
    with pytest.raises(IndexError):
        seq.joint_index(40)
