import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egoexplore.env import EnvConfig, ExplorationEnv
from egoexplore.mapping import (
    EgoMapPair,
    MapConfig,
    action_motion,
    apply_action_transform,
    export_maps,
    extract_state,
    integrate,
    shift_rotate,
    stamp_collision,
    stamp_trajectory,
    world_anchored,
    world_anchored_map,
)
from egoexplore.pnm import read_pnm
from egoexplore.world import Action, Heading, Pose, build_graph, footprint_offsets
from helpers import open_room
from oracles import MapExpansion, robot_to_world


def random_maps(side=129, seed=0) -> EgoMapPair:
    rng = np.random.default_rng(seed)
    m = EgoMapPair(side)
    m.aem[:] = rng.normal(size=(side, side)).astype(np.float32)
    m.bem[:] = rng.random((side, side)) < 0.3
    return m


def test_forward_shifts_content_down_eight_rows():
    m = random_maps()
    before = m.aem.copy()
    apply_action_transform(m, Action.FORWARD, collided=False)
    assert np.array_equal(m.aem[8:], before[:-8])
    assert not m.aem[:8].any() and not m.bem[:8].any()


def test_strafe_left_shifts_content_right():
    m = random_maps()
    before = m.aem.copy()
    apply_action_transform(m, Action.STRAFE_LEFT, collided=False)
    assert np.array_equal(m.aem[:, 8:], before[:, :-8])


def test_turn_left_rotates_clockwise():
    m = random_maps()
    before = m.aem.copy()
    apply_action_transform(m, Action.TURN_LEFT, collided=False)
    assert np.array_equal(m.aem, np.rot90(before, -1))
    # a feature straight ahead ends up on the robot's right after turning left
    m = EgoMapPair(129)
    m.aem[64 - 10, 64] = 1
    apply_action_transform(m, Action.TURN_LEFT, collided=False)
    assert m.aem[64, 64 + 10] == 1


def test_collision_is_identity():
    m = random_maps()
    a, b = m.aem.copy(), m.bem.copy()
    apply_action_transform(m, Action.FORWARD, collided=True)
    assert np.array_equal(m.aem, a) and np.array_equal(m.bem, b)


@pytest.mark.parametrize("action", list(Action))
def test_action_then_inverse_is_identity_in_bounds(action):
    m = random_maps(seed=int(action))
    a, b = m.aem.copy(), m.bem.copy()
    apply_action_transform(m, action, False)
    apply_action_transform(m, action.inverse, False)
    f, l, _ = action_motion(action)
    keep = np.ones_like(b)
    if f > 0:
        keep[-f:] = False
    elif f < 0:
        keep[:-f] = False
    if l > 0:
        keep[:, -l:] = False
    elif l < 0:
        keep[:, :-l] = False
    assert np.array_equal(m.aem[keep], a[keep])
    assert np.array_equal(m.bem[keep], b[keep])
    assert not m.aem[~keep].any()


def test_integrate_threshold_is_strict():
    m = EgoMapPair(129)
    local = np.zeros((41, 41))
    local[10, 10] = 0.8
    local[10, 11] = 0.8000001
    integrate(m, local)
    r, c = 64 - 20 + 10, 64 - 20 + 10
    assert m.aem[r, c] == np.float32(0.8)
    assert not m.bem[r, c]
    assert m.bem[r, c + 1]


def test_integrate_zero_and_twice():
    m = random_maps()
    a, b = m.aem.copy(), m.bem.copy()
    integrate(m, np.zeros((41, 41)))
    assert np.array_equal(m.aem, a) and np.array_equal(m.bem, b)
    m = EgoMapPair(129)
    local = np.random.default_rng(0).random((41, 41))
    integrate(m, local)
    once_a, once_b = m.aem.copy(), m.bem.copy()
    integrate(m, local)
    np.testing.assert_array_equal(m.aem, 2 * once_a)
    assert np.array_equal(m.bem, once_b)


def test_integrate_clips_large_local_grid():
    m = EgoMapPair(21)
    integrate(m, np.ones((41, 41)))
    assert (m.aem == 1).all() and m.bem.all()
    with pytest.raises(ValueError):
        integrate(m, np.ones((40, 40)))


def test_stamps():
    fp = footprint_offsets(0.15, 0.05)
    m = EgoMapPair()
    stamp_trajectory(m, fp)
    assert np.count_nonzero(m.aem == 20.0) == len(fp) == np.count_nonzero(m.aem)
    assert m.bem.sum() == len(fp)
    stamp_trajectory(m, fp)
    assert np.count_nonzero(m.aem == 40.0) == len(fp)
    c = EgoMapPair()
    far = fp + np.array([8, 0])
    stamp_collision(c, far)
    assert np.count_nonzero(c.aem == -20.0) == len(far) and not c.bem.any()
    stamp_trajectory(c, fp)
    overlap = {tuple(x) for x in fp.tolist()} & {tuple(x) for x in far.tolist()}
    assert np.count_nonzero(c.aem == 0.0) == c.aem.size - 2 * len(fp) + len(overlap)


def test_stamp_offsets_are_robot_frame():
    m = EgoMapPair(129)
    stamp_trajectory(m, [(3, 0), (0, 2)])
    # forward is up (lower row), left is lower column
    assert m.aem[61, 64] == 20 and m.aem[64, 62] == 20


def test_extract_state_examples():
    m = EgoMapPair()
    m.aem[:] = 2.5
    s = extract_state(m)
    assert s.shape == (257, 257, 2) and (s == 2.5).all()
    m = EgoMapPair()
    c = m.center
    m.aem[c, c] = 1
    s = extract_state(m)
    assert np.argwhere(s[..., 0]).tolist() == [[128, 128]]
    assert np.argwhere(s[..., 1]).tolist() == [[128, 128]]
    m = EgoMapPair()
    m.aem[c + 3, c] = 1
    s = extract_state(m)
    assert np.argwhere(s[..., 0]).tolist() == [[131, 128]]
    assert np.argwhere(s[..., 1]).tolist() == [[129, 128]]


def test_extract_state_matches_bruteforce_window():
    m = random_maps(1025, seed=5)
    s = extract_state(m)
    c = 512
    for i, j in np.random.default_rng(1).integers(0, 257, size=(200, 2)):
        assert s[i, j, 0] == m.aem[c + i - 128, c + j - 128]
        assert s[i, j, 1] == m.aem[c + 3 * (i - 128), c + 3 * (j - 128)]


def test_extract_state_locality():
    m = random_maps(1025, seed=2)
    s = extract_state(m).copy()
    lo, hi = 512 - 385, 512 + 385 + 1
    mask = np.ones((1025, 1025), dtype=bool)
    mask[lo:hi, lo:hi] = False
    m.aem[mask] = 1e6
    assert np.array_equal(extract_state(m), s)


def test_extract_state_rejects_small_map():
    with pytest.raises(ValueError):
        extract_state(EgoMapPair(513))


def test_map_config_validation():
    with pytest.raises(ValueError):
        MapConfig(map_side_cells=700).validate()
    with pytest.raises(ValueError):
        MapConfig(map_side_cells=1024).validate()


def test_world_anchored_after_reset(vis_oracle):
    plan = open_room()
    env = ExplorationEnv(plan, build_graph(plan, 0.15), EnvConfig())
    start = Pose(50, 50, Heading.WEST)
    env.reset(start)
    fp = footprint_offsets(0.15, 0.05)
    expected = {(50 + dx, 50 + dy) for dx, dy in fp.tolist()}
    expected |= vis_oracle.free_cells(plan.occupancy, 50, 50, int(Heading.WEST))
    got = {(int(x), int(y)) for y, x in np.argwhere(env.world_map)}
    assert got == expected


@settings(max_examples=60, deadline=None)
@given(ix=st.integers(0, 60), iy=st.integers(0, 60), heading=st.integers(0, 3), seed=st.integers(0, 10 ** 6))
def test_world_anchored_matches_pointwise(ix, iy, heading, seed):
    ego = np.random.default_rng(seed).random((41, 41)) < 0.2
    pose = Pose(ix, iy, heading)
    out = world_anchored(ego, pose, (60, 70), fill=False)
    ref = np.zeros((60, 70), dtype=bool)
    for r, c in np.argwhere(ego):
        dx, dy = robot_to_world(heading, 20 - r, 20 - c)
        x, y = ix + dx, iy + dy
        if 0 <= x < 70 and 0 <= y < 60:
            ref[y, x] = True
    assert np.array_equal(out, ref)


def _random_sequence(mp, exp, rng, steps, radius=20, side=129):
    """Drive the production maps and the expansion oracle with the same random inputs."""
    threshold = 0.8
    for t in range(steps):
        kind = rng.random()
        if kind < 0.6:
            local = np.where(rng.random((2 * radius + 1,) * 2) < 0.5, rng.random((2 * radius + 1,) * 2), 0.0)
            local[rng.random(local.shape) < 0.05] = 0.8
            integrate(mp, local, threshold)
            exp.add_grid(local, threshold)
        elif kind < 0.7:
            fp = rng.integers(-4, 5, size=(12, 2))
            stamp_trajectory(mp, fp)
            for f, l in fp.tolist():
                exp.add_local([f], [l], [20.0], [True])
        elif kind < 0.75:
            fp = rng.integers(-4, 5, size=(6, 2))
            stamp_collision(mp, fp)
            for f, l in fp.tolist():
                exp.add_local([f], [l], [-20.0], [False])
        a = Action(int(rng.integers(6)))
        f, l, q = action_motion(a)
        if rng.random() < 0.1:  # noisy odometry can request arbitrary lattice motion
            f, l = (int(x) for x in rng.integers(-12, 13, size=2))
        shift_rotate(mp, f, l, q)
        exp.move(f, l, q)
        yield t


def test_aem_matches_expansion_oracle():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        mp, exp = EgoMapPair(129), MapExpansion(129)
        for _ in _random_sequence(mp, exp, rng, 200):
            pass
        assert np.array_equal(mp.aem, exp.aem())
        assert np.array_equal(mp.bem, exp.bem())


def test_world_frame_bem_is_monotone():
    rng = np.random.default_rng(9)
    mp, exp = EgoMapPair(129), MapExpansion(129)
    prev = set()
    for _ in _random_sequence(mp, exp, rng, 200):
        # cells only disappear by leaving the map window
        cells = exp.absolute_binary_cells()
        gone = prev - cells
        for x, y in gone:
            fx, fy = {0: (1, 0), 1: (0, 1), 2: (-1, 0), 3: (0, -1)}[exp.h]
            dx, dy = x - exp.x, y - exp.y
            r, c = exp.c - (dx * fx + dy * fy), exp.c - (-dx * fy + dy * fx)
            assert not (0 <= r < 129 and 0 <= c < 129)
        prev = cells


def test_world_map_matches_dual_bookkeeping(vis_oracle, plan7, graph7):
    """Noiseless random episode: world-frame BEM equals a parallel oracle map built from visibility sets."""
    cfg = EnvConfig()
    env = ExplorationEnv(plan7, graph7, cfg)
    rng = np.random.default_rng(21)
    pos = graph7.positions()
    start = Pose(*pos[rng.integers(len(pos))], int(rng.integers(4)))
    env.reset(start)
    fp = footprint_offsets(0.15, 0.05)
    seen = {(start.ix + dx, start.iy + dy) for dx, dy in fp.tolist()}
    counts = [int(env.world_map.sum())]
    for t in range(60):
        env.observe()
        p = env.pose
        seen |= vis_oracle.free_cells(plan7.occupancy, p.ix, p.iy, int(p.heading))
        res = env.step(int(rng.integers(6)))
        if not env.records[-1].collided and not Action(env.records[-1].action).is_turn:
            seen |= {(env.pose.ix + dx, env.pose.iy + dy) for dx, dy in fp.tolist()}
        counts.append(int(env.world_map.sum()))
        assert res.new_free_cells == counts[-1] - counts[-2]
    p = env.pose  # the last step already sensed at its destination
    seen |= vis_oracle.free_cells(plan7.occupancy, p.ix, p.iy, int(p.heading))
    final = world_anchored_map(env.maps, env.pose, plan7.occupancy.shape)
    got = {(int(x), int(y)) for y, x in np.argwhere(final)}
    assert got == seen
    assert all(b >= a for a, b in zip(counts, counts[1:]))


def test_turn_only_episode_matches_world_frame_union(vis_oracle, plan7, graph7):
    env = ExplorationEnv(plan7, graph7, EnvConfig())
    pos = graph7.positions()
    start = Pose(*pos[len(pos) // 3], 0)
    env.reset(start)
    fp = footprint_offsets(0.15, 0.05)
    union = {(start.ix + dx, start.iy + dy) for dx, dy in fp.tolist()}
    for a in [Action.TURN_LEFT, Action.TURN_LEFT, Action.TURN_RIGHT, Action.TURN_LEFT, Action.TURN_LEFT]:
        env.observe()
        union |= vis_oracle.free_cells(plan7.occupancy, env.pose.ix, env.pose.iy, int(env.pose.heading))
        env.step(a)
    union |= vis_oracle.free_cells(plan7.occupancy, env.pose.ix, env.pose.iy, int(env.pose.heading))
    got = {(int(x), int(y)) for y, x in np.argwhere(env.world_map)}
    assert got == union


def test_export_maps(tmp_path):
    m = EgoMapPair(129)
    m.aem[3, 4] = 20
    m.aem[5, 6] = -20
    m.bem[7, 8] = True
    meta = export_maps(m, tmp_path / "snap")
    assert meta["aem_min"] == -20 and meta["aem_max"] == 20
    bem = read_pnm(tmp_path / "snap_bem.pgm")
    assert bem[7, 8] == 255 and bem.sum() == 255
    aem = read_pnm(tmp_path / "snap_aem.pgm")
    assert aem[3, 4] == 255 and aem[5, 6] == 0 and aem[0, 0] in (127, 128)
    assert "aem_min = -20.0" in (tmp_path / "snap_aem.cfg").read_text()
