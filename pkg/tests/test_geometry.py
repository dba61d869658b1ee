import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egoexplore.geometry import (
    CameraModel,
    build_projection,
    build_sight_lines,
    grid_traversal,
    local_to_offsets,
    project,
    project_values,
)
from egoexplore.sensor import SegImage
from oracles import coverage, ground_point, segment_cells


def test_horizon_row_value(cam):
    assert cam.horizon_row == pytest.approx(128.0 - 128.5 * math.tan(math.radians(30)), abs=1e-12)
    assert cam.horizon_row == pytest.approx(53.81, abs=0.01)


def test_pixel_on_horizon_unmapped():
    # principal point chosen so that row 100 is exactly the horizon
    cam = CameraModel(focal_px=100.0, principal_v=100 + 100 * math.tan(math.radians(30)))
    assert cam.horizon_row == pytest.approx(100.0)
    fwd, left, hits = cam.ground_points()
    assert not hits[100].any()
    assert hits[101].all()


def test_bottom_centre_distance(cam, proj):
    fwd, left, hits = cam.ground_points()
    u, v = 128, 256
    exact = ground_point(u, v, cam.focal_px, cam.cu, cam.cv, cam.height_m, cam.pitch_rad)
    assert fwd[v, u] == pytest.approx(exact[0], rel=1e-12)
    assert left[v, u] == pytest.approx(0.0, abs=1e-12)
    # the bottom edge of the image is exactly 45 degrees below the axis; the bottom row's
    # pixel centre sits half a pixel above it
    edge = cam.height_m / math.tan(math.radians(30 + 45))
    assert edge == pytest.approx(0.3215, abs=1e-3)
    centre = cam.height_m / math.tan(math.radians(30) + math.atan(128 / 128.5))
    assert fwd[v, u] == pytest.approx(centre, rel=1e-12)
    assert abs(fwd[v, u] - edge) < 0.003
    assert proj.offset(u, v) == (math.floor(fwd[v, u] / 0.05 + 0.5), 0)


def test_ground_points_match_matrix_oracle(cam):
    fwd, left, hits = cam.ground_points()
    rng = np.random.default_rng(0)
    for _ in range(300):
        u, v = int(rng.integers(257)), int(rng.integers(257))
        g = ground_point(u, v, cam.focal_px, cam.cu, cam.cv, cam.height_m, cam.pitch_rad)
        if g is None:
            assert not hits[v, u]
            continue
        assert hits[v, u]
        assert fwd[v, u] == pytest.approx(g[0], rel=1e-9, abs=1e-9)
        assert left[v, u] == pytest.approx(g[1], rel=1e-9, abs=1e-9)


def test_projection_coverage_matches_oracle(cam, proj, vis_oracle):
    pix = vis_oracle.pix
    assert int(proj.mapped.sum()) == len(pix)
    for (u, v), cell in pix.items():
        assert proj.offset(u, v) == cell
    assert {tuple(c) for c in proj.covered.tolist()} == set(pix.values())


def test_binning_bound_and_range(cam, proj):
    fwd, left, _ = cam.ground_points()
    m = proj.mapped
    cf, cl = proj.cell_forward[m] * 0.05, proj.cell_left[m] * 0.05
    err = np.hypot(cf - fwd[m], cl - left[m])
    assert err.max() <= 0.05 / math.sqrt(2) + 1e-12
    assert np.hypot(fwd[m], left[m]).max() <= cam.max_range_m
    assert not m[: int(math.floor(cam.horizon_row)) + 1].any()


def test_projection_is_cached_and_pose_free(cam):
    assert build_projection(cam, 0.05) is build_projection(cam, 0.05)


def test_project_zero_and_single_pixel(proj):
    z = np.zeros(proj.shape)
    assert not project(SegImage(z, z.astype(bool)), proj).any()
    img = np.zeros(proj.shape)
    u, v = 100, 200
    img[v, u] = 0.6
    m = project(SegImage(img, img > 0), proj)
    assert np.count_nonzero(m) == 1
    r, c = np.argwhere(m)[0]
    assert m[r, c] == 0.6
    f, l = local_to_offsets(proj, r, c)
    assert (int(f), int(l)) == proj.offset(u, v)


def test_semantic_image_projects_only_free_channel(proj):
    conf = np.zeros(proj.shape + (3,))
    conf[..., 1] = 1.0
    assert not project(SegImage(conf, np.zeros(proj.shape, bool)), proj).any()


def test_project_linearity_and_monotonicity(proj):
    rng = np.random.default_rng(3)
    a, b = rng.random(proj.shape), rng.random(proj.shape)
    lhs = project_values(2.0 * a - 0.5 * b, proj)
    rhs = 2.0 * project_values(a, proj) - 0.5 * project_values(b, proj)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)
    c = a.copy()
    c[rng.random(proj.shape) < 0.3] += 0.5
    assert (project_values(c, proj) >= project_values(a, proj) - 1e-12).all()


def test_dimension_mismatch(proj):
    with pytest.raises(ValueError):
        project_values(np.zeros((10, 10)), proj)


@settings(max_examples=400, deadline=None)
@given(a=st.integers(-60, 60), b=st.integers(-60, 60))
def test_traversal_matches_strip_oracle(a, b):
    cells = grid_traversal(a, b)
    assert cells[0] == (0, 0) and cells[-1] == (a, b)
    assert set(cells[1:]) == segment_cells(a, b)
    # consecutive cells are 8-neighbours and never repeat
    for (x0, y0), (x1, y1) in zip(cells, cells[1:]):
        assert max(abs(x1 - x0), abs(y1 - y0)) == 1
    assert len(set(cells)) == len(cells)


def test_diagonal_corner_touch_excluded():
    assert segment_cells(3, 3) == {(1, 1), (2, 2), (3, 3)}
    assert grid_traversal(2, 2) == [(0, 0), (1, 1), (2, 2)]


def test_sight_lines_layout():
    lines = build_sight_lines(np.array([[3, 1], [0, 0], [-2, 0]]))
    assert lines.indptr.tolist()[0] == 0
    rows = [lines.cells[lines.indptr[k]:lines.indptr[k + 1]].tolist() for k in range(3)]
    assert rows[0][-1] == [3, 1]
    assert rows[1] == []
    assert rows[2] == [[-1, 0], [-2, 0]]


def test_coverage_oracle_agrees_with_matrix_pinhole(cam):
    # spot check the fast vectorised oracle against the per-pixel version
    pix = coverage(cam, 0.05, 10.0)
    for (u, v) in list(pix)[::5000]:
        g = ground_point(u, v, cam.focal_px, cam.cu, cam.cv, cam.height_m, cam.pitch_rad)
        assert pix[(u, v)] == (math.floor(g[0] / 0.05 + 0.5), math.floor(g[1] / 0.05 + 0.5))
