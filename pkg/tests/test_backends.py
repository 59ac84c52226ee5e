"""Bit-for-bit equivalence of the compiled and pure-numpy kernel backends.

Every kernel is driven with identical randomized inputs under both backends
and the full mutated state is compared exactly. Randomness lives outside the
kernels, so equality must be exact, not approximate.
"""
import numpy as np
import pytest

from confinement.backend import (
    active_backend_name,
    get_kernels_for,
    set_backend,
)
from confinement.kernels_numpy import INF

KNP = get_kernels_for("numpy")
KNB = get_kernels_for("numba")


def _random_state_1d(rng, L=11, Z=4, defect_rate=0.2, msg_rate=0.2):
    E = (rng.random(L) < 0.3).astype(np.uint8)
    C = (rng.random(L) < 0.2).astype(np.uint8)
    sigma_prev = np.where(rng.random(L) < 0.3, -1, 1).astype(np.int8)
    s = np.where(rng.random((L, Z + 1)) < defect_rate, -1, 1).astype(np.int8)
    m = np.full((4, L, Z + 1), INF, dtype=np.int32)
    mask = rng.random(m.shape) < msg_rate
    m[mask] = rng.integers(1, L + 1, mask.sum())
    return E, C, sigma_prev, s, m


def _random_state_2d(rng, L=5, Z=3, defect_rate=0.15, msg_rate=0.15):
    E = (rng.random((2, L, L)) < 0.25).astype(np.uint8)
    C = (rng.random((2, L, L)) < 0.15).astype(np.uint8)
    sigma_prev = np.where(rng.random((L, L)) < 0.3, -1, 1).astype(np.int8)
    s = np.where(rng.random((L, L, Z + 1)) < defect_rate, -1, 1).astype(np.int8)
    m = np.full((6, L, L, Z + 1), INF, dtype=np.int32)
    mask = rng.random(m.shape) < msg_rate
    m[mask] = rng.integers(1, L + 1, mask.sum())
    return E, C, sigma_prev, s, m


def _copies(arrays):
    return tuple(a.copy() for a in arrays)


def _assert_same(label, got_np, got_nb):
    for i, (a, b) in enumerate(zip(got_np, got_nb)):
        assert np.array_equal(a, b), f"{label}: array {i} diverged"


# ------------------------------------------------------------ primitives ---

def test_hash_mix_agrees():
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 2 ** 63, 50):
        assert KNP.splitmix64(int(x)) == KNB.splitmix64(int(x))


@pytest.mark.parametrize('trial', range(8))
def test_source_and_relax_1d(trial):
    rng = np.random.default_rng(100 + trial)
    _, _, _, s, m = _random_state_1d(rng)
    Z = s.shape[1] - 1
    sa, ma = _copies((s, m))
    sb, mb = _copies((s, m))
    KNP.source_1d(sa, ma, Z)
    KNB.source_1d(sb, mb, Z)
    _assert_same("source_1d", (sa, ma), (sb, mb))
    out_a = KNP.relax_1d(sa, ma, Z, 11, 3)
    out_b = KNB.relax_1d(sb, mb, Z, 11, 3)
    assert np.array_equal(out_a, out_b)


@pytest.mark.parametrize('trial', range(8))
def test_source_and_relax_2d(trial):
    rng = np.random.default_rng(200 + trial)
    _, _, _, s, m = _random_state_2d(rng)
    Z = s.shape[2] - 1
    sa, ma = _copies((s, m))
    sb, mb = _copies((s, m))
    KNP.source_2d(sa, ma, Z)
    KNB.source_2d(sb, mb, Z)
    _assert_same("source_2d", (sa, ma), (sb, mb))
    out_a = KNP.relax_2d(sa, ma, Z, 5, 3)
    out_b = KNB.relax_2d(sb, mb, Z, 5, 3)
    assert np.array_equal(out_a, out_b)


@pytest.mark.parametrize('modified', [False, True])
def test_drift_agrees(modified):
    rng = np.random.default_rng(11)
    for _ in range(6):
        _, _, _, s, m = _random_state_1d(rng, Z=5)
        sa, ma = _copies((s, m))
        sb, mb = _copies((s, m))
        KNP.drift_1d(sa, ma, 5, modified)
        KNB.drift_1d(sb, mb, 5, modified)
        _assert_same("drift_1d", (sa, ma), (sb, mb))
        _, _, _, s, m = _random_state_2d(rng, Z=4)
        sa, ma = _copies((s, m))
        sb, mb = _copies((s, m))
        KNP.drift_2d(sa, ma, 4, modified)
        KNB.drift_2d(sb, mb, 4, modified)
        _assert_same("drift_2d", (sa, ma), (sb, mb))


@pytest.mark.parametrize('tie_mode', [0, 1])
@pytest.mark.parametrize('greedy', [False, True])
def test_feedback_1d_agrees(tie_mode, greedy):
    rng = np.random.default_rng(31)
    for trial in range(6):
        E, C, sp, s, m = _random_state_1d(rng, msg_rate=0.5)
        Z = s.shape[1] - 1
        salt = np.uint64(rng.integers(0, 2 ** 63))
        a = _copies((s, m, C, sp))
        b = _copies((s, m, C, sp))
        KNP.feedback_1d(a[0], a[1], a[2], a[3], Z, False, greedy, tie_mode,
                        salt, False, None)
        KNB.feedback_1d(b[0], b[1], b[2], b[3], Z, False, greedy, tie_mode,
                        salt, False, np.zeros_like(s, dtype=np.uint8))
        _assert_same("feedback_1d", a, b)


@pytest.mark.parametrize('tie_mode', [0, 1])
@pytest.mark.parametrize('greedy', [False, True])
def test_feedback_2d_agrees(tie_mode, greedy):
    rng = np.random.default_rng(37)
    for trial in range(6):
        E, C, sp, s, m = _random_state_2d(rng, msg_rate=0.4)
        Z = s.shape[2] - 1
        salt = np.uint64(rng.integers(0, 2 ** 63))
        a = _copies((s, m, C, sp))
        b = _copies((s, m, C, sp))
        KNP.feedback_2d(a[0], a[1], a[2], a[3], Z, False, greedy, tie_mode,
                        salt, False, None)
        KNB.feedback_2d(b[0], b[1], b[2], b[3], Z, False, greedy, tie_mode,
                        salt, False, np.zeros_like(s, dtype=np.uint8))
        _assert_same("feedback_2d", a, b)


@pytest.mark.parametrize('d', [1, 2])
def test_measure_ingest_agrees(d):
    rng = np.random.default_rng(41)
    for _ in range(6):
        if d == 1:
            E, C, sp, s, _ = _random_state_1d(rng)
            mf = (rng.random(E.shape[0]) < 0.2).astype(np.uint8)
            fn_a, fn_b = KNP.measure_ingest_1d, KNB.measure_ingest_1d
        else:
            E, C, sp, s, _ = _random_state_2d(rng)
            mf = (rng.random(E.shape[1:]) < 0.2).astype(np.uint8)
            fn_a, fn_b = KNP.measure_ingest_2d, KNB.measure_ingest_2d
        a = _copies((E, C, sp, s))
        b = _copies((E, C, sp, s))
        fn_a(a[0], a[1], a[2], a[3], mf)
        fn_b(b[0], b[1], b[2], b[3], mf)
        _assert_same(f"measure_ingest_{d}d", a, b)


# --------------------------------------------------------- compound ops ---

@pytest.mark.parametrize('tie_mode', [0, 1])
def test_noisy_trajectories_agree_1d(tie_mode):
    rng = np.random.default_rng(53)
    L, Z, rounds = 11, 5, 40
    qf = (rng.random((rounds, L)) < 0.08).astype(np.uint8)
    mf = (rng.random((rounds, L)) < 0.05).astype(np.uint8)
    salts = rng.integers(0, 2 ** 63, rounds).astype(np.uint64)
    states = []
    for K in (KNP, KNB):
        E = np.zeros(L, dtype=np.uint8)
        C = np.zeros(L, dtype=np.uint8)
        sp = np.ones(L, dtype=np.int8)
        s = np.ones((L, Z + 1), dtype=np.int8)
        m = np.full((4, L, Z + 1), INF, dtype=np.int32)
        K.evolve_rounds_1d(E, C, sp, s, m, qf, mf, Z, 3, L, False, False,
                           tie_mode, salts)
        states.append((E, C, sp, s, m))
    _assert_same("evolve_rounds_1d", states[0], states[1])


@pytest.mark.parametrize('tie_mode', [0, 1])
def test_noisy_trajectories_agree_2d(tie_mode):
    rng = np.random.default_rng(59)
    L, Z, rounds = 5, 4, 25
    qf = (rng.random((rounds, 2, L, L)) < 0.02).astype(np.uint8)
    mf = (rng.random((rounds, L, L)) < 0.02).astype(np.uint8)
    salts = rng.integers(0, 2 ** 63, rounds).astype(np.uint64)
    states = []
    for K in (KNP, KNB):
        E = np.zeros((2, L, L), dtype=np.uint8)
        C = np.zeros((2, L, L), dtype=np.uint8)
        sp = np.ones((L, L), dtype=np.int8)
        s = np.ones((L, L, Z + 1), dtype=np.int8)
        m = np.full((6, L, L, Z + 1), INF, dtype=np.int32)
        K.evolve_rounds_2d(E, C, sp, s, m, qf, mf, Z, 3, L, False, False,
                           tie_mode, salts)
        states.append((E, C, sp, s, m))
    _assert_same("evolve_rounds_2d", states[0], states[1])


@pytest.mark.parametrize('d', [1, 2])
def test_offline_runs_agree(d):
    rng = np.random.default_rng(61)
    for trial in range(6):
        L, Z = (13, 5) if d == 1 else (5, 4)
        cap = 8 * (L + Z + 1)
        salts = rng.integers(0, 2 ** 63, cap).astype(np.uint64)
        if d == 1:
            E = (rng.random(L) < 0.25).astype(np.uint8)
            C = np.zeros(L, dtype=np.uint8)
            sp = np.ones(L, dtype=np.int8)
            s = np.ones((L, Z + 1), dtype=np.int8)
            m = np.full((4, L, Z + 1), INF, dtype=np.int32)
            run_a, run_b = KNP.offline_run_1d, KNB.offline_run_1d
        else:
            E = (rng.random((2, L, L)) < 0.08).astype(np.uint8)
            C = np.zeros((2, L, L), dtype=np.uint8)
            sp = np.ones((L, L), dtype=np.int8)
            s = np.ones((L, L, Z + 1), dtype=np.int8)
            m = np.full((6, L, L, Z + 1), INF, dtype=np.int32)
            run_a, run_b = KNP.offline_run_2d, KNB.offline_run_2d
        a = _copies((E, C, sp, s, m))
        b = _copies((E, C, sp, s, m))
        ra = run_a(a[0], a[1], a[2], a[3], a[4], Z, 3, L, False, False, 1,
                   salts, cap)
        rb = run_b(b[0], b[1], b[2], b[3], b[4], Z, 3, L, False, False, 1,
                   salts, cap)
        assert ra == rb
        _assert_same(f"offline_run_{d}d", a, b)


@pytest.mark.parametrize('d', [1, 2])
def test_randomized_event_units_agree(d):
    rng = np.random.default_rng(67)
    L, Z = (9, 4) if d == 1 else (5, 3)
    n_control = (L ** d) * (Z + 1)
    for trial in range(6):
        if d == 1:
            E, C, sp, s, m = _random_state_1d(rng, L=L, Z=Z)
            mf = (rng.random(L) < 0.1).astype(np.uint8)
            unit_a, unit_b = KNP.poisson_unit_1d, KNB.poisson_unit_1d
        else:
            E, C, sp, s, m = _random_state_2d(rng, L=L, Z=Z)
            mf = (rng.random((L, L)) < 0.1).astype(np.uint8)
            unit_a, unit_b = KNP.poisson_unit_2d, KNB.poisson_unit_2d
        c = np.zeros_like(s, dtype=np.uint8)
        sites = rng.integers(0, n_control, L ** d).astype(np.int64)
        actions = (rng.random(L ** d) < 0.75).astype(np.uint8)
        salt = np.uint64(rng.integers(0, 2 ** 63))
        a = _copies((E, C, sp, s, m, c))
        b = _copies((E, C, sp, s, m, c))
        unit_a(a[0], a[1], a[2], a[3], a[4], a[5], mf, sites, actions, Z, 3,
               L, False, False, 1, salt)
        unit_b(b[0], b[1], b[2], b[3], b[4], b[5], mf, sites, actions, Z, 3,
               L, False, False, 1, salt)
        _assert_same(f"poisson_unit_{d}d", a, b)


@pytest.mark.parametrize('d', [1, 2])
def test_single_site_pulls_agree(d):
    rng = np.random.default_rng(71)
    L, Z = (9, 4) if d == 1 else (5, 3)
    for trial in range(6):
        if d == 1:
            _, _, _, s, m = _random_state_1d(rng, L=L, Z=Z, msg_rate=0.5)
        else:
            _, _, _, s, m = _random_state_2d(rng, L=L, Z=Z, msg_rate=0.4)
        ma, mb = m.copy(), m.copy()
        for _ in range(10):
            if d == 1:
                r, z = int(rng.integers(0, L)), int(rng.integers(0, Z + 1))
                KNP.pull_site_1d(s, ma, r, z, Z, L)
                KNB.pull_site_1d(s, mb, r, z, Z, L)
            else:
                i, j = int(rng.integers(0, L)), int(rng.integers(0, L))
                z = int(rng.integers(0, Z + 1))
                KNP.pull_site_2d(s, ma, i, j, z, Z, L)
                KNB.pull_site_2d(s, mb, i, j, z, Z, L)
        assert np.array_equal(ma, mb)


# ----------------------------------------------------------- selection ---

def test_backend_selection_roundtrip():
    original = active_backend_name()
    try:
        set_backend("numpy")
        assert active_backend_name() == "numpy"
        set_backend("numba")
        assert active_backend_name() == "numba"
        with pytest.raises(ValueError):
            set_backend("fortran")
    finally:
        set_backend(original)


def test_backends_expose_identical_kernel_names():
    public = [n for n in dir(KNP) if not n.startswith("_") and callable(getattr(KNP, n))]
    for name in public:
        assert hasattr(KNB, name), f"numba backend is missing {name}"
