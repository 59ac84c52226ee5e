"""Code layer: geometry, syndromes, correction frame, logical readout."""
import numpy as np
import pytest

from confinement.code import (
    CodeGeometry,
    CodeState,
    apply_correction,
    logical_class,
    majority_vote_decode,
    make_code,
    measure_syndromes,
    syndrome_deltas,
    true_syndrome,
)


# ------------------------------------------------------------- geometry ---

@pytest.mark.parametrize('d', [0, 3, -1])
def test_geometry_rejects_bad_dimension(d):
    with pytest.raises(ValueError):
        CodeGeometry(d=d, L=8)


@pytest.mark.parametrize('L', [0, 1, 2])
def test_geometry_rejects_small_lattice(L):
    with pytest.raises(ValueError):
        CodeGeometry(d=1, L=L)


def test_geometry_counts():
    g1 = CodeGeometry(d=1, L=8)
    assert g1.n_sites == 8
    assert g1.n_links == 8
    g2 = CodeGeometry(d=2, L=5)
    assert g2.n_sites == 25
    assert g2.n_links == 50


def test_link_endpoints_1d_wraps():
    g = CodeGeometry(d=1, L=8)
    assert g.link_endpoints(3) == (3, 4)
    assert g.link_endpoints(7) == (7, 0)


def test_link_endpoints_2d_both_axes():
    g = CodeGeometry(d=2, L=4)
    assert g.link_endpoints((0, 1, 2)) == ((1, 2), (2, 2))
    assert g.link_endpoints((1, 1, 2)) == ((1, 2), (1, 3))
    # periodic wrap on each axis
    assert g.link_endpoints((0, 3, 0)) == ((3, 0), (0, 0))
    assert g.link_endpoints((1, 0, 3)) == ((0, 3), (0, 0))


# ------------------------------------------------------------ syndromes ---

def test_single_flip_flags_its_two_endpoints():
    state = make_code(1, 8)
    state.E[3] = 1
    sigma = true_syndrome(state)
    expected = np.ones(8, dtype=np.int8)
    expected[3] = expected[4] = -1
    assert np.array_equal(sigma, expected)


def _site_parity_oracle_2d(state):
    """Independent parity count: walk every link and tally its endpoints."""
    g = state.geom
    F = state.E ^ state.C
    count = np.zeros((g.L, g.L), dtype=np.int64)
    for axis in range(2):
        for i in range(g.L):
            for j in range(g.L):
                if F[axis, i, j]:
                    a, b = g.link_endpoints((axis, i, j))
                    count[a] += 1
                    count[b] += 1
    return np.where(count % 2 == 1, -1, 1).astype(np.int8)


def test_two_flips_sharing_a_site_cancel_there():
    state = make_code(2, 4)
    state.E[0, 1, 1] = 1  # joins (1,1)-(2,1)
    state.E[1, 1, 1] = 1  # joins (1,1)-(1,2)
    sigma = true_syndrome(state)
    expected = np.ones((4, 4), dtype=np.int8)
    expected[2, 1] = expected[1, 2] = -1  # shared endpoint (1,1) stays +1
    assert np.array_equal(sigma, expected)
    assert np.array_equal(sigma, _site_parity_oracle_2d(state))


@pytest.mark.parametrize('d,L', [(1, 9), (2, 5)])
def test_random_syndromes_match_parity_oracle(d, L):
    rng = np.random.default_rng(7)
    for _ in range(10):
        state = make_code(d, L, init_rate=0.3, rng=rng)
        sigma = true_syndrome(state)
        if d == 1:
            F = state.E ^ state.C
            count = np.zeros(L, dtype=np.int64)
            for i in range(L):
                if F[i]:
                    a, b = state.geom.link_endpoints(i)
                    count[a] += 1
                    count[b] += 1
            expected = np.where(count % 2 == 1, -1, 1).astype(np.int8)
        else:
            expected = _site_parity_oracle_2d(state)
        assert np.array_equal(sigma, expected)


def test_measurement_without_noise_is_exact():
    rng = np.random.default_rng(3)
    state = make_code(1, 10, init_rate=0.4, rng=rng)
    sigma = measure_syndromes(state, p_meas=0.0)
    assert np.array_equal(sigma, true_syndrome(state))
    assert np.array_equal(state.sigma_meas, sigma)


def test_measurement_flip_mask_inverts_exactly_those_sites():
    state = make_code(1, 8)
    mask = np.zeros(8, dtype=np.uint8)
    mask[2] = mask[5] = 1
    sigma = measure_syndromes(state, p_meas=0.0, meas_flips=mask)
    expected = np.ones(8, dtype=np.int8)
    expected[2] = expected[5] = -1
    assert np.array_equal(sigma, expected)


def test_measurement_rate_one_inverts_everything():
    state = make_code(2, 4)
    rng = np.random.default_rng(0)
    sigma = measure_syndromes(state, p_meas=1.0, rng=rng)
    assert (sigma == -1).all()


def test_syndrome_deltas_fire_once_then_settle():
    state = make_code(1, 8)
    state.E[3] = 1
    measure_syndromes(state, p_meas=0.0)
    delta = syndrome_deltas(state)
    assert set(np.flatnonzero(delta)) == {3, 4}
    measure_syndromes(state, p_meas=0.0)
    assert not syndrome_deltas(state).any()


# ----------------------------------------------------- correction frame ---

@pytest.mark.parametrize('d,L', [(1, 9), (2, 4)])
def test_corrections_never_create_syndrome_deltas(d, L):
    """A committed correction co-flips the stale record, so it stays silent."""
    rng = np.random.default_rng(11)
    state = make_code(d, L, init_rate=0.3, rng=rng)
    measure_syndromes(state, p_meas=0.0)
    syndrome_deltas(state)
    for _ in range(25):
        if d == 1:
            apply_correction(state, int(rng.integers(0, L)))
        else:
            apply_correction(state, (int(rng.integers(0, 2)),
                                     int(rng.integers(0, L)),
                                     int(rng.integers(0, L))))
        measure_syndromes(state, p_meas=0.0)
        assert not syndrome_deltas(state).any()


def test_correction_applied_twice_restores_state():
    state = make_code(1, 8)
    state.E[2] = 1
    C0, sp0 = state.C.copy(), state.sigma_prev.copy()
    apply_correction(state, 5)
    apply_correction(state, 5)
    assert np.array_equal(state.C, C0)
    assert np.array_equal(state.sigma_prev, sp0)


def test_contractible_corrections_preserve_logical_class():
    state = make_code(2, 4)
    before = logical_class(state)
    # boundary of one plaquette: a contractible loop of four links
    for link in ((0, 1, 1), (0, 1, 2), (1, 1, 1), (1, 2, 1)):
        apply_correction(state, link)
    assert (true_syndrome(state) == 1).all()
    assert logical_class(state) == before


# ------------------------------------------------------ logical readout ---

def test_logical_class_of_clean_states_is_trivial():
    assert logical_class(make_code(1, 9)) == (0,)
    assert logical_class(make_code(2, 5)) == (0, 0)


def test_plaquette_loop_is_trivial_2d():
    state = make_code(2, 4)
    for link in ((0, 1, 1), (0, 1, 2), (1, 1, 1), (1, 2, 1)):
        state.E[link] ^= 1
    assert (true_syndrome(state) == 1).all()
    assert logical_class(state) == (0, 0)


def test_winding_loop_is_nontrivial_1d():
    state = make_code(1, 9)
    state.E[:] = 1
    assert (true_syndrome(state) == 1).all()
    assert logical_class(state) == (1,)


def test_noncontractible_loops_set_one_bit_each_2d():
    state = make_code(2, 4)
    state.E[0, :, 2] = 1  # loop winding along axis 0
    assert (true_syndrome(state) == 1).all()
    assert logical_class(state) == (1, 0)
    state = make_code(2, 4)
    state.E[1, 2, :] = 1  # loop winding along axis 1
    assert (true_syndrome(state) == 1).all()
    assert logical_class(state) == (0, 1)


def test_majority_vote_empty_is_trivial():
    assert majority_vote_decode(make_code(1, 9)) == (0,)


def test_majority_vote_below_half_is_trivial():
    L = 9
    state = make_code(1, L)
    state.E[: L // 2 - 1] = 1  # 3 of 9 flipped
    assert majority_vote_decode(state) == (0,)


def test_majority_vote_contiguous_majority_is_nontrivial():
    state = make_code(1, 9)
    state.E[2:7] = 1  # 5 contiguous of 9
    # oracle: the lighter coset representative is the complement
    w = int(state.E.sum())
    assert w > state.geom.L - w
    assert majority_vote_decode(state) == (1,)


def test_majority_vote_rejects_2d():
    with pytest.raises(ValueError):
        majority_vote_decode(make_code(2, 4))


# --------------------------------------------------------- construction ---

def test_seeded_construction_requires_rng():
    with pytest.raises(ValueError):
        make_code(1, 8, init_rate=0.5)


def test_seeded_construction_records_initial_class():
    rng = np.random.default_rng(5)
    for _ in range(20):
        state = make_code(1, 9, init_rate=0.5, rng=rng)
        assert state.initial_logical == logical_class(state)


def test_copy_is_independent():
    rng = np.random.default_rng(1)
    state = make_code(2, 4, init_rate=0.3, rng=rng)
    dup = state.copy()
    dup.E[0, 0, 0] ^= 1
    dup.sigma_prev[0, 0] *= -1
    assert not np.array_equal(dup.E, state.E)
    assert not np.array_equal(dup.sigma_prev, state.sigma_prev)
    assert dup.initial_logical == state.initial_logical


def test_state_dtypes_and_shapes():
    state = make_code(2, 5)
    assert state.E.shape == (2, 5, 5) and state.E.dtype == np.uint8
    assert state.C.shape == (2, 5, 5) and state.C.dtype == np.uint8
    assert state.sigma_prev.shape == (5, 5) and state.sigma_prev.dtype == np.int8
    state = make_code(1, 5)
    assert state.E.shape == (5,)
    assert state.sigma_prev.shape == (5,)
