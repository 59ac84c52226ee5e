"""Pure-numpy kernels for the control-lattice automaton.

Reference implementations of the hot operations; the numba backend mirrors
these exactly (equivalence is pinned by tests). All functions are free
functions over bare arrays so both backends share signatures.

Conventions
-----------
Control lattice: spatial torus Z_L^d times buffer layers z = 0..Z, with
z = Z the back wall. d=1 arrays: s[L, Z+1] (int8, -1 = defect),
m[4, L, Z+1] (int32). d=2: s[L, L, Z+1], m[6, L, L, Z+1].

Message slots are indexed by *move* direction: slot q at site y holds the
value of a message indicating a defect in direction q from y. Slot order is
the feedback priority order: d=1 (+x, -x, +z, -z), d=2 (+x, -x, +y, -y,
+z, -z). Values are L1 path lengths; anything above m_max becomes INF.
Wall sites carry spatial slots only (z slots stay INF) and pull spatial
messages from wall sites only. Propagation pulls treat defects one step
behind as distance-0 sources, so stored values equal exact L1 distances
within the (closed) emission cones.
"""
from __future__ import annotations

import numpy as np

INF = np.int32(1 << 30)

# feedback moves that change z, per d: slot index -> dz
_Z_SLOTS_1D = (2, 3)
_Z_SLOTS_2D = (4, 5)


def splitmix64(x: int) -> int:
    """Deterministic 64-bit mix used for hashed tie-breaking (both backends)."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (x ^ (x >> 31)) & 0xFFFFFFFFFFFFFFFF


def _clamp(arr: np.ndarray, m_max: int) -> np.ndarray:
    return np.where(arr > m_max, INF, arr).astype(np.int32)


# ---------------------------------------------------------------- d = 1 ---

def source_1d(s: np.ndarray, m: np.ndarray, Z: int) -> None:
    """Deposit value-1 messages at the axis neighbors of every defect.

    Kept as a standalone op for the API; the relaxation pull below already
    treats defects as distance-0 sources, which subsumes these deposits.
    """
    L = s.shape[0]
    for r, z in np.argwhere(s == -1):
        m[0, (r - 1) % L, z] = min(m[0, (r - 1) % L, z], 1)  # defect toward +x
        m[1, (r + 1) % L, z] = min(m[1, (r + 1) % L, z], 1)
        if z < Z:  # wall defects source spatial messages only
            if z - 1 >= 0:
                m[2, r, z - 1] = min(m[2, r, z - 1], 1)
            if z + 1 <= Z - 1:  # z slots exist on bulk sites only
                m[3, r, z + 1] = min(m[3, r, z + 1], 1)


def propagate_1d(s: np.ndarray, m: np.ndarray, Z: int, m_max: int) -> np.ndarray:
    """One synchronous pull sub-step; returns the new message field."""
    L = s.shape[0]
    Zp1 = Z + 1
    new = np.full_like(m, INF)

    defect = s == -1

    for slot, shift in ((0, -1), (1, +1)):
        # spatial slot: pull from the row one step toward the defect,
        # transverse z offsets -1..1 in the bulk, none on the wall.
        msrc = np.roll(m[slot], shift, axis=0)
        dsrc = np.roll(defect, shift, axis=0)
        # padded along z so dz = -1/+1 reads INF / no-defect at the edges
        mp = np.full((L, Zp1 + 2), INF, dtype=np.int64)
        mp[:, 1:-1] = msrc
        dp = np.zeros((L, Zp1 + 2), dtype=bool)
        dp[:, 1:-1] = dsrc
        best = np.full((L, Zp1), np.int64(INF))
        for dz in (-1, 0, 1):
            inc = 1 + abs(dz)
            cand = mp[:, 1 + dz: 1 + dz + Zp1] + inc
            cand = np.where(dp[:, 1 + dz: 1 + dz + Zp1], np.minimum(cand, inc), cand)
            best = np.minimum(best, cand)
        # wall row: d-dimensional pull (same layer, no transverse offsets)
        wall = msrc[:, Z].astype(np.int64) + 1
        wall = np.where(dsrc[:, Z], np.minimum(wall, 1), wall)
        best[:, Z] = wall
        new[slot] = _clamp(best, m_max)

    if Z > 0:
        for slot, dz in ((2, +1), (3, -1)):
            # z slot: pull from the layer one step toward the defect,
            # transverse x offsets -1..1; slots exist on bulk sites only.
            best = np.full((L, Zp1), np.int64(INF))
            lo, hi = (0, Z - 1) if slot == 2 else (1, Z)
            # target layers: slot 2 targets 0..Z-1 (sources z+1), slot 3 targets 1..Z-1
            for dr in (-1, 0, 1):
                inc = 1 + abs(dr)
                msrc = np.roll(m[slot], -dr, axis=0)  # value at (r+dr, .)
                dsrc = np.roll(defect, -dr, axis=0)
                if slot == 2:
                    # sources at z+1; wall z-slot reads INF, wall defects don't source z
                    cand = msrc[:, 1:].astype(np.int64) + inc
                    src_is_bulk = np.zeros(Zp1 - 1, dtype=bool)
                    src_is_bulk[: Z - 1] = True  # source layers 1..Z-1
                    cand = np.where(dsrc[:, 1:] & src_is_bulk[None, :],
                                    np.minimum(cand, inc), cand)
                    best[:, :Z] = np.minimum(best[:, :Z], cand)
                else:
                    cand = msrc[:, : Z - 1].astype(np.int64) + inc  # sources 0..Z-2
                    cand = np.where(dsrc[:, : Z - 1], np.minimum(cand, inc), cand)
                    best[:, 1:Z] = np.minimum(best[:, 1:Z], cand)
            out = _clamp(best, m_max)
            out[:, Z] = INF  # no z slots on the wall
            if slot == 3:
                out[:, 0] = INF
            new[slot] = out

    return new


def relax_1d(s, m, Z, m_max, sweeps) -> np.ndarray:
    """`sweeps` pull sub-steps; stops early at a fixed point. Returns new m."""
    cur = m
    for _ in range(sweeps):
        nxt = propagate_1d(s, cur, Z, m_max)
        if np.array_equal(nxt, cur):
            return nxt
        cur = nxt
    return cur


def drift_1d(s: np.ndarray, m: np.ndarray, Z: int, modified: bool) -> None:
    """Conveyor step: layers move up one (defects two under modified rules,
    from z >= 2); the wall multiplies arrivals and discards their messages."""
    if Z == 0:
        return
    L = s.shape[0]
    new_s = np.ones_like(s)
    wall = s[:, Z].copy()
    for z in range(Z):
        step = 2 if (modified and z >= 2) else 1
        t = z + step
        if t >= Z:
            wall *= s[:, z]
        else:
            new_s[:, t] = s[:, z]
    new_s[:, Z] = wall
    s[:] = new_s

    m[:, :, 1:Z] = m[:, :, 0:Z - 1].copy()
    m[:, :, 0] = INF


def _move_defect_1d(s, C, sigma_prev, r, z, slot, L, use_cooldown, c) -> tuple:
    """Execute one feedback move; returns (r2, z2, survived)."""
    if slot == 0:
        r2, z2 = (r + 1) % L, z
        link = r
    elif slot == 1:
        r2, z2 = (r - 1) % L, z
        link = r2
    elif slot == 2:
        r2, z2 = r, z + 1
        link = -1
    else:
        r2, z2 = r, z - 1
        link = -1
    if link >= 0:
        C[link] ^= 1
        sigma_prev[link] = -sigma_prev[link]
        sigma_prev[(link + 1) % L] = -sigma_prev[(link + 1) % L]
    s[r, z] = 1
    s[r2, z2] = -s[r2, z2]
    if use_cooldown:
        c[r2, z2] = 1
    return r2, z2, s[r2, z2] == -1


def feedback_1d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown, c) -> None:
    """Move every defect toward its smallest stored message.

    Defects are processed sequentially in flat site order over the
    pre-feedback defect list, with live state updates (arrivals multiply, so
    adjacent pairs fuse instead of swapping). Messages stay frozen.
    """
    L = s.shape[0]
    Zp1 = Z + 1
    defects = np.argwhere(s == -1)

    if greedy:
        for r, z in defects:
            if s[r, z] != -1:
                continue
            for slot in (0, 1):
                r2 = (r + 1) % L if slot == 0 else (r - 1) % L
                if s[r2, z] == -1:
                    _move_defect_1d(s, C, sigma_prev, r, z, slot, L,
                                    use_cooldown, c)
                    break
        defects = defects[s[defects[:, 0], defects[:, 1]] == -1]

    for r, z in defects:
        if s[r, z] != -1:
            continue
        if use_cooldown and c[r, z] == 1:
            continue
        vals = m[:, r, z]
        best = vals.min()
        if best >= INF:
            continue
        tied = np.flatnonzero(vals == best)
        if tie_mode == 0 or len(tied) == 1:
            slot = int(tied[0])
        else:
            h = splitmix64((int(tie_salt) + (int(r) * Zp1 + int(z)) *
                            0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
            slot = int(tied[h % len(tied)])
        r2, z2, alive = _move_defect_1d(s, C, sigma_prev, r, z, slot, L,
                                        use_cooldown, c)
        if modified and slot not in (0, 1) and alive:
            _move_defect_1d(s, C, sigma_prev, r2, z2, 0, L, use_cooldown, c)


def measure_ingest_1d(E, C, sigma_prev, s, meas_flips) -> None:
    """Measure E xor C (with given outcome-flip mask), ingest syndrome
    changes as defect flips at z = 0, advance sigma_prev."""
    F = E ^ C
    par = F ^ np.roll(F, 1)
    sigma = np.where(par == 1, -1, 1).astype(np.int8)
    if meas_flips is not None:
        sigma = np.where(meas_flips == 1, -sigma, sigma).astype(np.int8)
    delta = sigma != sigma_prev
    s[delta, 0] *= -1
    sigma_prev[:] = sigma


def sync_round_1d(E, C, sigma_prev, s, m, meas_flips, Z, v, m_max,
                  modified, greedy, tie_mode, tie_salt) -> None:
    """One full synchronous decoder round (noise is applied by the caller)."""
    measure_ingest_1d(E, C, sigma_prev, s, meas_flips)
    drift_1d(s, m, Z, modified)
    m[:] = relax_1d(s, m, Z, m_max, v)
    feedback_1d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown=False, c=None)


def _terminal_1d(E, C, sigma_prev, s) -> tuple:
    """(terminal, clean) for a noiseless run: terminal once the control is
    defect-free with no syndrome deltas left to ingest (nothing can change
    after that); clean additionally requires a syndrome-free residual."""
    F = E ^ C
    par = F ^ np.roll(F, 1)
    sigma = np.where(par == 1, -1, 1).astype(np.int8)
    terminal = (not (s == -1).any()) and (sigma == sigma_prev).all()
    return terminal, terminal and not par.any()


def offline_run_1d(E, C, sigma_prev, s, m, Z, v, m_max, modified, greedy,
                   tie_mode, tie_salts, cap) -> tuple:
    """Noiseless rounds until the decoder reaches a terminal state.

    Returns (rounds_used, clean). Mutates the given state in place; callers
    probe on copies.
    """
    no_flips = np.zeros(E.shape[0], dtype=np.uint8)
    for t in range(cap):
        terminal, clean = _terminal_1d(E, C, sigma_prev, s)
        if terminal:
            return t, clean
        sync_round_1d(E, C, sigma_prev, s, m, no_flips, Z, v, m_max,
                      modified, greedy, tie_mode, int(tie_salts[t]))
    return cap, _terminal_1d(E, C, sigma_prev, s)[1]


def evolve_rounds_1d(E, C, sigma_prev, s, m, qubit_flips, meas_flips, Z, v,
                     m_max, modified, greedy, tie_mode, tie_salts) -> None:
    """Noisy rounds, one per row of the pre-drawn flip masks."""
    for t in range(qubit_flips.shape[0]):
        E ^= qubit_flips[t]
        sync_round_1d(E, C, sigma_prev, s, m, meas_flips[t], Z, v, m_max,
                      modified, greedy, tie_mode, int(tie_salts[t]))


def pull_site_1d(s, m, r, z, Z, m_max) -> None:
    """Refresh all slots at one site from live neighbor values (async use)."""
    L = s.shape[0]
    for slot in range(4):
        best = int(INF)
        if slot < 2:
            r2 = (r + 1) % L if slot == 0 else (r - 1) % L
            dzs = (0,) if z == Z else (-1, 0, 1)
            for dz in dzs:
                z2 = z + dz
                if z2 < 0 or z2 > Z:
                    continue
                inc = 1 + abs(dz)
                if s[r2, z2] == -1:
                    best = min(best, inc)
                val = int(m[slot, r2, z2])
                if val < INF:
                    best = min(best, val + inc)
        else:
            if z == Z or (slot == 3 and z == 0):
                m[slot, r, z] = INF
                continue
            z2 = z + 1 if slot == 2 else z - 1
            for dr in (-1, 0, 1):
                r2 = (r + dr) % L
                inc = 1 + abs(dr)
                if s[r2, z2] == -1 and z2 < Z:
                    best = min(best, inc)
                val = int(m[slot, r2, z2])
                if val < INF:
                    best = min(best, val + inc)
        m[slot, r, z] = INF if best > m_max else best


def poisson_unit_1d(E, C, sigma_prev, s, m, c, meas_flips, event_sites,
                    event_actions, Z, v, m_max, modified, greedy, tie_mode,
                    tie_salt) -> None:
    """One unit of Poissonian time: global measure/ingest/drift, then the
    pre-drawn site events (action 0 = defect motion, 1 = message pull)."""
    L = E.shape[0]
    Zp1 = Z + 1
    measure_ingest_1d(E, C, sigma_prev, s, meas_flips)
    drift_1d(s, m, Z, modified)
    for k in range(event_sites.shape[0]):
        site = int(event_sites[k])
        r, z = site // Zp1, site % Zp1
        if event_actions[k] == 1:
            pull_site_1d(s, m, r, z, Z, m_max)
        else:
            if s[r, z] == -1 and c[r, z] == 0:
                vals = m[:, r, z]
                best = vals.min()
                if best < INF:
                    tied = np.flatnonzero(vals == best)
                    if tie_mode == 0 or len(tied) == 1:
                        slot = int(tied[0])
                    else:
                        h = splitmix64((int(tie_salt) + k * 0x9E3779B97F4A7C15)
                                       & 0xFFFFFFFFFFFFFFFF)
                        slot = int(tied[h % len(tied)])
                    r2, z2, alive = _move_defect_1d(s, C, sigma_prev, r, z,
                                                    slot, L, True, c)
                    if modified and slot not in (0, 1) and alive:
                        _move_defect_1d(s, C, sigma_prev, r2, z2, 0, L,
                                        True, c)
        c[r, z] = 0  # any update at a site clears its cooldown


# ---------------------------------------------------------------- d = 2 ---

def source_2d(s: np.ndarray, m: np.ndarray, Z: int) -> None:
    """Deposit value-1 messages at the axis neighbors of every defect (d=2)."""
    L = s.shape[0]
    for i, j, z in np.argwhere(s == -1):
        m[0, (i - 1) % L, j, z] = min(m[0, (i - 1) % L, j, z], 1)
        m[1, (i + 1) % L, j, z] = min(m[1, (i + 1) % L, j, z], 1)
        m[2, i, (j - 1) % L, z] = min(m[2, i, (j - 1) % L, z], 1)
        m[3, i, (j + 1) % L, z] = min(m[3, i, (j + 1) % L, z], 1)
        if z < Z:
            if z - 1 >= 0:
                m[4, i, j, z - 1] = min(m[4, i, j, z - 1], 1)
            if z + 1 <= Z - 1:
                m[5, i, j, z + 1] = min(m[5, i, j, z + 1], 1)


def propagate_2d(s: np.ndarray, m: np.ndarray, Z: int, m_max: int) -> np.ndarray:
    """One synchronous pull sub-step (d=2); returns the new message field."""
    L = s.shape[0]
    Zp1 = Z + 1
    new = np.full_like(m, INF)
    defect = s == -1

    spatial = ((0, 0, -1), (1, 0, +1), (2, 1, -1), (3, 1, +1))
    for slot, axis, shift in spatial:
        msrc = np.roll(m[slot], shift, axis=axis)  # value one step toward defect
        dsrc = np.roll(defect, shift, axis=axis)
        perp_axis = 1 - axis
        best = np.full((L, L, Zp1), np.int64(INF))
        wall_best = np.full((L, L), np.int64(INF))
        for dp in (-1, 0, 1):
            mq = np.roll(msrc, -dp, axis=perp_axis)
            dq = np.roll(dsrc, -dp, axis=perp_axis)
            mp = np.full((L, L, Zp1 + 2), INF, dtype=np.int64)
            mp[:, :, 1:-1] = mq
            dpad = np.zeros((L, L, Zp1 + 2), dtype=bool)
            dpad[:, :, 1:-1] = dq
            for dz in (-1, 0, 1):
                inc = 1 + abs(dp) + abs(dz)
                cand = mp[:, :, 1 + dz: 1 + dz + Zp1] + inc
                cand = np.where(dpad[:, :, 1 + dz: 1 + dz + Zp1],
                                np.minimum(cand, inc), cand)
                best = np.minimum(best, cand)
            # wall row: pull from wall sites only, spatial transverse offsets
            inc = 1 + abs(dp)
            wall = mq[:, :, Z].astype(np.int64) + inc
            wall = np.where(dq[:, :, Z], np.minimum(wall, inc), wall)
            wall_best = np.minimum(wall_best, wall)
        best[:, :, Z] = wall_best
        new[slot] = _clamp(best, m_max)

    if Z > 0:
        for slot, up in ((4, True), (5, False)):
            best = np.full((L, L, Zp1), np.int64(INF))
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    inc = 1 + abs(di) + abs(dj)
                    msrc = np.roll(np.roll(m[slot], -di, axis=0), -dj, axis=1)
                    dsrc = np.roll(np.roll(defect, -di, axis=0), -dj, axis=1)
                    if up:
                        cand = msrc[:, :, 1:].astype(np.int64) + inc
                        src_is_bulk = np.zeros(Zp1 - 1, dtype=bool)
                        src_is_bulk[: Z - 1] = True
                        cand = np.where(dsrc[:, :, 1:] & src_is_bulk[None, None, :],
                                        np.minimum(cand, inc), cand)
                        best[:, :, :Z] = np.minimum(best[:, :, :Z], cand)
                    else:
                        cand = msrc[:, :, : Z - 1].astype(np.int64) + inc
                        cand = np.where(dsrc[:, :, : Z - 1],
                                        np.minimum(cand, inc), cand)
                        best[:, :, 1:Z] = np.minimum(best[:, :, 1:Z], cand)
            out = _clamp(best, m_max)
            out[:, :, Z] = INF
            if not up:
                out[:, :, 0] = INF
            new[slot] = out

    return new


def relax_2d(s, m, Z, m_max, sweeps) -> np.ndarray:
    cur = m
    for _ in range(sweeps):
        nxt = propagate_2d(s, cur, Z, m_max)
        if np.array_equal(nxt, cur):
            return nxt
        cur = nxt
    return cur


def drift_2d(s: np.ndarray, m: np.ndarray, Z: int, modified: bool) -> None:
    if Z == 0:
        return
    new_s = np.ones_like(s)
    wall = s[:, :, Z].copy()
    for z in range(Z):
        step = 2 if (modified and z >= 2) else 1
        t = z + step
        if t >= Z:
            wall *= s[:, :, z]
        else:
            new_s[:, :, t] = s[:, :, z]
    new_s[:, :, Z] = wall
    s[:] = new_s
    m[:, :, :, 1:Z] = m[:, :, :, 0:Z - 1].copy()
    m[:, :, :, 0] = INF


def _move_defect_2d(s, C, sigma_prev, i, j, z, slot, L, use_cooldown, c) -> tuple:
    if slot == 0:
        i2, j2, z2 = (i + 1) % L, j, z
        link = (0, i, j)
    elif slot == 1:
        i2, j2, z2 = (i - 1) % L, j, z
        link = (0, i2, j)
    elif slot == 2:
        i2, j2, z2 = i, (j + 1) % L, z
        link = (1, i, j)
    elif slot == 3:
        i2, j2, z2 = i, (j - 1) % L, z
        link = (1, i, j2)
    elif slot == 4:
        i2, j2, z2 = i, j, z + 1
        link = None
    else:
        i2, j2, z2 = i, j, z - 1
        link = None
    if link is not None:
        axis, li, lj = link
        C[axis, li, lj] ^= 1
        if axis == 0:
            a, b = (li, lj), ((li + 1) % L, lj)
        else:
            a, b = (li, lj), (li, (lj + 1) % L)
        sigma_prev[a] = -sigma_prev[a]
        sigma_prev[b] = -sigma_prev[b]
    s[i, j, z] = 1
    s[i2, j2, z2] = -s[i2, j2, z2]
    if use_cooldown:
        c[i2, j2, z2] = 1
    return i2, j2, z2, s[i2, j2, z2] == -1


def feedback_2d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown, c) -> None:
    L = s.shape[0]
    Zp1 = Z + 1
    defects = np.argwhere(s == -1)

    if greedy:
        for i, j, z in defects:
            if s[i, j, z] != -1:
                continue
            for slot in (0, 1, 2, 3):
                if slot == 0:
                    i2, j2 = (i + 1) % L, j
                elif slot == 1:
                    i2, j2 = (i - 1) % L, j
                elif slot == 2:
                    i2, j2 = i, (j + 1) % L
                else:
                    i2, j2 = i, (j - 1) % L
                if s[i2, j2, z] == -1:
                    _move_defect_2d(s, C, sigma_prev, i, j, z, slot, L,
                                    use_cooldown, c)
                    break
        defects = defects[s[defects[:, 0], defects[:, 1], defects[:, 2]] == -1]

    for i, j, z in defects:
        if s[i, j, z] != -1:
            continue
        if use_cooldown and c[i, j, z] == 1:
            continue
        vals = m[:, i, j, z]
        best = vals.min()
        if best >= INF:
            continue
        tied = np.flatnonzero(vals == best)
        if tie_mode == 0 or len(tied) == 1:
            slot = int(tied[0])
        else:
            flat = (int(i) * L + int(j)) * Zp1 + int(z)
            h = splitmix64((int(tie_salt) + flat * 0x9E3779B97F4A7C15)
                           & 0xFFFFFFFFFFFFFFFF)
            slot = int(tied[h % len(tied)])
        i2, j2, z2, alive = _move_defect_2d(s, C, sigma_prev, i, j, z, slot,
                                            L, use_cooldown, c)
        if modified and slot not in (0, 1) and alive:
            _move_defect_2d(s, C, sigma_prev, i2, j2, z2, 0, L,
                            use_cooldown, c)


def measure_ingest_2d(E, C, sigma_prev, s, meas_flips) -> None:
    F = E ^ C
    par = F[0] ^ np.roll(F[0], 1, axis=0) ^ F[1] ^ np.roll(F[1], 1, axis=1)
    sigma = np.where(par == 1, -1, 1).astype(np.int8)
    if meas_flips is not None:
        sigma = np.where(meas_flips == 1, -sigma, sigma).astype(np.int8)
    delta = sigma != sigma_prev
    s[delta, 0] *= -1
    sigma_prev[:] = sigma


def sync_round_2d(E, C, sigma_prev, s, m, meas_flips, Z, v, m_max,
                  modified, greedy, tie_mode, tie_salt) -> None:
    measure_ingest_2d(E, C, sigma_prev, s, meas_flips)
    drift_2d(s, m, Z, modified)
    m[:] = relax_2d(s, m, Z, m_max, v)
    feedback_2d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown=False, c=None)


def _terminal_2d(E, C, sigma_prev, s) -> tuple:
    F = E ^ C
    par = F[0] ^ np.roll(F[0], 1, axis=0) ^ F[1] ^ np.roll(F[1], 1, axis=1)
    sigma = np.where(par == 1, -1, 1).astype(np.int8)
    terminal = (not (s == -1).any()) and (sigma == sigma_prev).all()
    return terminal, terminal and not par.any()


def offline_run_2d(E, C, sigma_prev, s, m, Z, v, m_max, modified, greedy,
                   tie_mode, tie_salts, cap) -> tuple:
    L = E.shape[1]
    no_flips = np.zeros((L, L), dtype=np.uint8)
    for t in range(cap):
        terminal, clean = _terminal_2d(E, C, sigma_prev, s)
        if terminal:
            return t, clean
        sync_round_2d(E, C, sigma_prev, s, m, no_flips, Z, v, m_max,
                      modified, greedy, tie_mode, int(tie_salts[t]))
    return cap, _terminal_2d(E, C, sigma_prev, s)[1]


def evolve_rounds_2d(E, C, sigma_prev, s, m, qubit_flips, meas_flips, Z, v,
                     m_max, modified, greedy, tie_mode, tie_salts) -> None:
    for t in range(qubit_flips.shape[0]):
        E ^= qubit_flips[t]
        sync_round_2d(E, C, sigma_prev, s, m, meas_flips[t], Z, v, m_max,
                      modified, greedy, tie_mode, int(tie_salts[t]))


def pull_site_2d(s, m, i, j, z, Z, m_max) -> None:
    L = s.shape[0]
    for slot in range(6):
        best = int(INF)
        if slot < 4:
            if slot == 0:
                i2, j2 = (i + 1) % L, j
            elif slot == 1:
                i2, j2 = (i - 1) % L, j
            elif slot == 2:
                i2, j2 = i, (j + 1) % L
            else:
                i2, j2 = i, (j - 1) % L
            perp_is_i = slot >= 2
            dzs = (0,) if z == Z else (-1, 0, 1)
            for dp in (-1, 0, 1):
                ii = (i2 + dp) % L if perp_is_i else i2
                jj = j2 if perp_is_i else (j2 + dp) % L
                for dz in dzs:
                    z2 = z + dz
                    if z2 < 0 or z2 > Z:
                        continue
                    inc = 1 + abs(dp) + abs(dz)
                    if s[ii, jj, z2] == -1:
                        best = min(best, inc)
                    val = int(m[slot, ii, jj, z2])
                    if val < INF:
                        best = min(best, val + inc)
        else:
            if z == Z or Z == 0 or (slot == 5 and z == 0):
                m[slot, i, j, z] = INF
                continue
            z2 = z + 1 if slot == 4 else z - 1
            if z2 < 0 or z2 > Z:
                m[slot, i, j, z] = INF
                continue
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii, jj = (i + di) % L, (j + dj) % L
                    inc = 1 + abs(di) + abs(dj)
                    if s[ii, jj, z2] == -1 and z2 < Z:
                        best = min(best, inc)
                    val = int(m[slot, ii, jj, z2])
                    if val < INF:
                        best = min(best, val + inc)
        m[slot, i, j, z] = INF if best > m_max else best


def poisson_unit_2d(E, C, sigma_prev, s, m, c, meas_flips, event_sites,
                    event_actions, Z, v, m_max, modified, greedy, tie_mode,
                    tie_salt) -> None:
    L = E.shape[1]
    Zp1 = Z + 1
    measure_ingest_2d(E, C, sigma_prev, s, meas_flips)
    drift_2d(s, m, Z, modified)
    for k in range(event_sites.shape[0]):
        site = int(event_sites[k])
        z = site % Zp1
        ij = site // Zp1
        i, j = ij // L, ij % L
        if event_actions[k] == 1:
            pull_site_2d(s, m, i, j, z, Z, m_max)
        else:
            if s[i, j, z] == -1 and c[i, j, z] == 0:
                vals = m[:, i, j, z]
                best = vals.min()
                if best < INF:
                    tied = np.flatnonzero(vals == best)
                    if tie_mode == 0 or len(tied) == 1:
                        slot = int(tied[0])
                    else:
                        h = splitmix64((int(tie_salt) + k * 0x9E3779B97F4A7C15)
                                       & 0xFFFFFFFFFFFFFFFF)
                        slot = int(tied[h % len(tied)])
                    i2, j2, z2, alive = _move_defect_2d(s, C, sigma_prev,
                                                        i, j, z, slot, L,
                                                        True, c)
                    if modified and slot not in (0, 1) and alive:
                        _move_defect_2d(s, C, sigma_prev, i2, j2, z2, 0, L,
                                        True, c)
        c[i, j, z] = 0
