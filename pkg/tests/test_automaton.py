"""Control-lattice automaton: config, state shapes, and reference traces."""
import numpy as np
import pytest

from confinement.automaton import (
    ControlState,
    DecoderConfig,
    World,
    default_buffer_height,
)
from confinement.code import make_code
from confinement.kernels_numpy import INF


# ------------------------------------------------------- configuration ---

@pytest.mark.parametrize('L,Z', [
    (3, 3), (5, 4), (9, 6), (13, 7), (15, 7), (23, 8),
    (35, 9), (36, 9), (51, 10), (53, 10),
])
def test_default_buffer_height_values(L, Z):
    assert default_buffer_height(L) == Z


def test_default_buffer_height_is_minimal():
    # smallest Z with (3/2)^Z >= L, in exact integer arithmetic
    for L in range(3, 200):
        Z = default_buffer_height(L)
        assert 3 ** Z >= L * 2 ** Z
        assert 3 ** (Z - 1) < L * 2 ** (Z - 1)


def test_config_resolves_defaults_against_size():
    cfg = DecoderConfig().resolve(15)
    assert cfg.v == 3
    assert cfg.m_max == 15
    assert cfg.Z == 7
    assert cfg.tie_break == "hashed"


def test_config_explicit_fields_survive_resolution():
    cfg = DecoderConfig(v=2, m_max=6, Z=0, tie_break="priority").resolve(15)
    assert (cfg.v, cfg.m_max, cfg.Z) == (2, 6, 0)
    assert cfg.tie_mode == 0
    assert DecoderConfig().resolve(15).tie_mode == 1


def test_config_rejects_unknown_tie_break():
    with pytest.raises(ValueError):
        DecoderConfig(tie_break="coin-flip").resolve(9)


# ------------------------------------------------------- control state ---

def test_control_state_shapes_and_dtypes():
    c1 = ControlState(d=1, L=8, Z=4)
    assert c1.s.shape == (8, 5) and c1.s.dtype == np.int8
    assert c1.m.shape == (4, 8, 5) and c1.m.dtype == np.int32
    assert c1.c.shape == (8, 5) and c1.c.dtype == np.uint8
    assert (c1.s == 1).all() and (c1.m == INF).all() and (c1.c == 0).all()
    c2 = ControlState(d=2, L=5, Z=3)
    assert c2.s.shape == (5, 5, 4)
    assert c2.m.shape == (6, 5, 5, 4)


def test_defect_count_and_sites():
    c = ControlState(d=1, L=8, Z=4)
    c.s[3, 1] = -1
    c.s[6, 0] = -1
    assert c.n_defects == 2
    assert {tuple(x) for x in c.defect_sites()} == {(3, 1), (6, 0)}


def test_control_copy_is_independent():
    c = ControlState(d=1, L=8, Z=4)
    dup = c.copy()
    dup.s[0, 0] = -1
    dup.m[0, 0, 0] = 3
    assert c.s[0, 0] == 1 and c.m[0, 0, 0] == INF


# ----------------------------------------------------------- the world ---

@pytest.mark.parametrize('d,L', [(1, 8), (2, 5)])
def test_noiseless_world_is_a_fixed_point(d, L):
    world = World.fresh(d, L, seed=0)
    E0, C0 = world.code.E.copy(), world.code.C.copy()
    s0, m0 = world.control.s.copy(), world.control.m.copy()
    for _ in range(5):
        world.step()
    assert world.t == 5
    assert np.array_equal(world.code.E, E0)
    assert np.array_equal(world.code.C, C0)
    assert np.array_equal(world.control.s, s0)
    assert np.array_equal(world.control.m, m0)


def test_measurement_fault_rides_the_conveyor_and_fuses():
    """A single outcome flip spawns a vertical defect pair that self-destructs.

    Round 1: the flipped outcome ingests one defect, which drifts to z=1.
    Round 2: the now-correct outcome differs from the stale record, so a
    second defect enters and drifts to z=1 while the first reaches z=2; the
    pair is vertical, and z-directed feedback fuses it with no correction.
    """
    world = World.fresh(1, 8, config=DecoderConfig(Z=4), seed=0)
    mask = np.zeros(8, dtype=np.uint8)
    mask[3] = 1
    world.step(meas_flips=mask)
    assert {tuple(x) for x in world.control.defect_sites()} == {(3, 1)}
    world.step()
    assert world.control.n_defects == 0
    assert not world.code.C.any()
    assert not world.code.E.any()
    assert (world.code.sigma_prev == 1).all()


def test_wall_only_lattice_removes_a_static_pair():
    """With no buffer the cycle degenerates to plain spatial message passing."""
    world = World.fresh(1, 12, config=DecoderConfig(Z=0), seed=0)
    world.code.E[4:8] = 1  # anyons at sites 4 and 8, distance 4
    for _ in range(4):
        world.step()
        if world.control.n_defects == 0:
            break
    assert world.control.n_defects == 0
    assert not (world.code.E ^ world.code.C).any()
    # stale message chains decay root-first; a few quiet rounds flush them
    for _ in range(6):
        world.step()
        if (world.control.m == INF).all():
            break
    assert (world.control.m == INF).all()


def test_wall_only_feedback_moves_defects_toward_each_other():
    world = World.fresh(1, 12, config=DecoderConfig(Z=0), seed=0)
    world.code.E[4:8] = 1
    # round 1: three relaxation sweeps cannot span distance 4 yet, so the
    # defects only broadcast; round 2 they sense each other and both move in
    world.step()
    sites = sorted(int(r) for r, _ in world.control.defect_sites())
    assert sites == [4, 8]
    assert not world.code.C.any()
    world.step()
    sites = sorted(int(r) for r, _ in world.control.defect_sites())
    assert sites == [5, 7]
    assert set(np.flatnonzero(world.code.C)) == {4, 7}


def test_explicit_masks_and_salts_make_steps_reproducible():
    runs = []
    for _ in range(2):
        world = World.fresh(1, 10, seed=42)
        rng = np.random.default_rng(7)
        for t in range(30):
            world.code.E ^= (rng.random(10) < 0.08).astype(np.uint8)
            mask = (rng.random(10) < 0.05).astype(np.uint8)
            world.step(meas_flips=mask, tie_salt=1000 + t)
        runs.append((world.code.E.copy(), world.code.C.copy(),
                     world.control.s.copy(), world.control.m.copy()))
    for a, b in zip(runs[0], runs[1]):
        assert np.array_equal(a, b)


def test_world_measure_and_ingest_flags_syndrome_changes():
    world = World.fresh(1, 8, config=DecoderConfig(Z=3), seed=0)
    world.code.E[2] = 1
    world.measure_and_ingest(np.zeros(8, dtype=np.uint8))
    assert {tuple(x) for x in world.control.defect_sites()} == {(2, 0), (3, 0)}
    # the record advanced, so repeating the measurement is silent
    world.measure_and_ingest(np.zeros(8, dtype=np.uint8))
    assert {tuple(x) for x in world.control.defect_sites()} == {(2, 0), (3, 0)}


def test_drift_carries_defects_and_messages_upward():
    world = World.fresh(1, 8, config=DecoderConfig(Z=3), seed=0)
    world.control.s[2, 0] = -1
    world.control.m[0, 5, 0] = 4
    world.vertical_drift()
    assert {tuple(x) for x in world.control.defect_sites()} == {(2, 1)}
    assert world.control.m[0, 5, 1] == 4
    assert world.control.m[0, 5, 0] == INF


def test_wall_multiplies_arrivals():
    world = World.fresh(1, 8, config=DecoderConfig(Z=2), seed=0)
    world.control.s[4, 1] = -1  # one step below the wall
    world.vertical_drift()
    assert {tuple(x) for x in world.control.defect_sites()} == {(4, 2)}
    world.control.s[4, 1] = -1  # a second defect arrives at an occupied wall
    world.vertical_drift()
    assert world.control.n_defects == 0


def test_draw_meas_flips_rates():
    world = World.fresh(2, 5, seed=0)
    assert not world.draw_meas_flips(0.0).any()
    assert world.draw_meas_flips(1.0).all()
    assert world.draw_meas_flips(0.5).shape == (5, 5)


def test_snapshot_mentions_defects():
    world = World.fresh(1, 8, config=DecoderConfig(Z=2), seed=0)
    world.control.s[3, 1] = -1
    text = world.snapshot()
    assert "defects=1" in text
    assert "X" in text
    assert "wall" in text


def test_message_slot_count_tracks_dimension():
    assert World.fresh(1, 8, seed=0).control.m.shape[0] == 4
    assert World.fresh(2, 5, seed=0).control.m.shape[0] == 6
