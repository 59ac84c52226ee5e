"""Numba kernels for the control-lattice automaton.

Exact twins of kernels_numpy (same signatures, same semantics); cross-backend
equivalence is pinned by tests. Compiled lazily with cache=True so repeat
runs skip compilation.
"""
from __future__ import annotations

import numpy as np
from numba import njit

INF = np.int32(1 << 30)
_INF64 = np.int64(1 << 30)
_PHI = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def splitmix64(x):
    x = np.uint64(x) + _PHI
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def _tie_index(tie_salt, key, n_tied):
    h = splitmix64(np.uint64(tie_salt) + np.uint64(key) * _PHI)
    return int(h % np.uint64(n_tied))


# ---------------------------------------------------------------- d = 1 ---

@njit(cache=True)
def source_1d(s, m, Z):
    L = s.shape[0]
    for r in range(L):
        for z in range(Z + 1):
            if s[r, z] != -1:
                continue
            rm, rp = (r - 1) % L, (r + 1) % L
            if m[0, rm, z] > 1:
                m[0, rm, z] = 1
            if m[1, rp, z] > 1:
                m[1, rp, z] = 1
            if z < Z:
                if z - 1 >= 0 and m[2, r, z - 1] > 1:
                    m[2, r, z - 1] = 1
                if z + 1 <= Z - 1 and m[3, r, z + 1] > 1:
                    m[3, r, z + 1] = 1


@njit(cache=True)
def propagate_1d(s, m, Z, m_max):
    L = s.shape[0]
    Zp1 = Z + 1
    new = np.full((4, L, Zp1), INF, dtype=np.int32)
    for r in range(L):
        for z in range(Zp1):
            for slot in range(2):
                r2 = (r + 1) % L if slot == 0 else (r - 1) % L
                best = _INF64
                if z == Z:
                    v = np.int64(m[slot, r2, Z]) + 1
                    if s[r2, Z] == -1 and 1 < v:
                        v = np.int64(1)
                    if v < best:
                        best = v
                else:
                    for dz in range(-1, 2):
                        z2 = z + dz
                        if z2 < 0 or z2 > Z:
                            continue
                        inc = 1 + (dz if dz >= 0 else -dz)
                        v = np.int64(m[slot, r2, z2]) + inc
                        if s[r2, z2] == -1 and inc < v:
                            v = np.int64(inc)
                        if v < best:
                            best = v
                if best <= m_max:
                    new[slot, r, z] = np.int32(best)
            if z < Z:
                # slot 2: defect toward +z (sources one layer up)
                z2 = z + 1
                best = _INF64
                for dr in range(-1, 2):
                    r2 = (r + dr) % L
                    inc = 1 + (dr if dr >= 0 else -dr)
                    v = np.int64(m[2, r2, z2]) + inc
                    if s[r2, z2] == -1 and z2 < Z and inc < v:
                        v = np.int64(inc)
                    if v < best:
                        best = v
                if best <= m_max:
                    new[2, r, z] = np.int32(best)
                # slot 3: defect toward -z (sources one layer down)
                if z > 0:
                    z2 = z - 1
                    best = _INF64
                    for dr in range(-1, 2):
                        r2 = (r + dr) % L
                        inc = 1 + (dr if dr >= 0 else -dr)
                        v = np.int64(m[3, r2, z2]) + inc
                        if s[r2, z2] == -1 and inc < v:
                            v = np.int64(inc)
                        if v < best:
                            best = v
                    if best <= m_max:
                        new[3, r, z] = np.int32(best)
    return new


@njit(cache=True)
def _equal_m(a, b):
    n = a.size
    af = a.ravel()
    bf = b.ravel()
    for k in range(n):
        if af[k] != bf[k]:
            return False
    return True


@njit(cache=True)
def relax_1d(s, m, Z, m_max, sweeps):
    cur = m
    for _ in range(sweeps):
        nxt = propagate_1d(s, cur, Z, m_max)
        if _equal_m(nxt, cur):
            return nxt
        cur = nxt
    return cur


@njit(cache=True)
def drift_1d(s, m, Z, modified):
    if Z == 0:
        return
    L = s.shape[0]
    new_s = np.ones_like(s)
    for r in range(L):
        new_s[r, Z] = s[r, Z]
    for z in range(Z):
        step = 2 if (modified and z >= 2) else 1
        t = z + step
        for r in range(L):
            if t >= Z:
                new_s[r, Z] *= s[r, z]
            else:
                new_s[r, t] = s[r, z]
    s[:] = new_s
    for slot in range(4):
        for r in range(L):
            for z in range(Z - 1, 0, -1):
                m[slot, r, z] = m[slot, r, z - 1]
            m[slot, r, 0] = INF


@njit(cache=True)
def _move_defect_1d(s, C, sigma_prev, r, z, slot, L, use_cooldown, c):
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
        lp = (link + 1) % L
        sigma_prev[lp] = -sigma_prev[lp]
    s[r, z] = 1
    s[r2, z2] = -s[r2, z2]
    if use_cooldown:
        c[r2, z2] = 1
    return r2, z2, s[r2, z2] == -1


@njit(cache=True)
def feedback_1d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown, c):
    L = s.shape[0]
    Zp1 = Z + 1
    nd = 0
    for r in range(L):
        for z in range(Zp1):
            if s[r, z] == -1:
                nd += 1
    drs = np.empty(nd, dtype=np.int64)
    dzs = np.empty(nd, dtype=np.int64)
    k = 0
    for r in range(L):
        for z in range(Zp1):
            if s[r, z] == -1:
                drs[k] = r
                dzs[k] = z
                k += 1

    if greedy:
        for idx in range(nd):
            r, z = drs[idx], dzs[idx]
            if s[r, z] != -1:
                continue
            for slot in range(2):
                r2 = (r + 1) % L if slot == 0 else (r - 1) % L
                if s[r2, z] == -1:
                    _move_defect_1d(s, C, sigma_prev, r, z, slot, L,
                                    use_cooldown, c)
                    break
        # greedy only removes defects; drop the removed ones from the list
        k = 0
        for idx in range(nd):
            if s[drs[idx], dzs[idx]] == -1:
                drs[k] = drs[idx]
                dzs[k] = dzs[idx]
                k += 1
        nd = k

    for idx in range(nd):
        r, z = drs[idx], dzs[idx]
        if s[r, z] != -1:
            continue
        if use_cooldown and c[r, z] == 1:
            continue
        best = m[0, r, z]
        for slot in range(1, 4):
            if m[slot, r, z] < best:
                best = m[slot, r, z]
        if best >= INF:
            continue
        n_tied = 0
        for slot in range(4):
            if m[slot, r, z] == best:
                n_tied += 1
        pick = 0
        if tie_mode != 0 and n_tied > 1:
            pick = _tie_index(tie_salt, r * Zp1 + z, n_tied)
        chosen = 0
        cnt = 0
        for slot in range(4):
            if m[slot, r, z] == best:
                if cnt == pick:
                    chosen = slot
                    break
                cnt += 1
        slot = chosen
        r2, z2, alive = _move_defect_1d(s, C, sigma_prev, r, z, slot, L,
                                        use_cooldown, c)
        if modified and slot >= 2 and alive:
            _move_defect_1d(s, C, sigma_prev, r2, z2, 0, L, use_cooldown, c)


@njit(cache=True)
def measure_ingest_1d(E, C, sigma_prev, s, meas_flips):
    L = E.shape[0]
    for r in range(L):
        par = (E[(r - 1) % L] ^ C[(r - 1) % L]) ^ (E[r] ^ C[r])
        sig = np.int8(-1) if par == 1 else np.int8(1)
        if meas_flips[r] == 1:
            sig = -sig
        if sig != sigma_prev[r]:
            s[r, 0] = -s[r, 0]
        sigma_prev[r] = sig


@njit(cache=True)
def sync_round_1d(E, C, sigma_prev, s, m, meas_flips, Z, v, m_max,
                  modified, greedy, tie_mode, tie_salt):
    measure_ingest_1d(E, C, sigma_prev, s, meas_flips)
    drift_1d(s, m, Z, modified)
    m[:] = relax_1d(s, m, Z, m_max, v)
    feedback_1d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                False, np.zeros((1, 1), dtype=np.uint8))


@njit(cache=True)
def _any_defect_1d(s):
    L, Zp1 = s.shape
    for r in range(L):
        for z in range(Zp1):
            if s[r, z] == -1:
                return True
    return False


@njit(cache=True)
def _terminal_1d(E, C, sigma_prev, s):
    L = E.shape[0]
    trivial = True
    pending = False
    for r in range(L):
        rm = L - 1 if r == 0 else r - 1
        par = (E[r] ^ C[r]) ^ (E[rm] ^ C[rm])
        if par == 1:
            trivial = False
        sigma = -1 if par == 1 else 1
        if sigma != sigma_prev[r]:
            pending = True
    terminal = (not _any_defect_1d(s)) and (not pending)
    return terminal, terminal and trivial


@njit(cache=True)
def offline_run_1d(E, C, sigma_prev, s, m, Z, v, m_max, modified, greedy,
                   tie_mode, tie_salts, cap):
    no_flips = np.zeros(E.shape[0], dtype=np.uint8)
    for t in range(cap):
        terminal, clean = _terminal_1d(E, C, sigma_prev, s)
        if terminal:
            return t, clean
        sync_round_1d(E, C, sigma_prev, s, m, no_flips, Z, v, m_max,
                      modified, greedy, tie_mode, tie_salts[t])
    return cap, _terminal_1d(E, C, sigma_prev, s)[1]


@njit(cache=True)
def evolve_rounds_1d(E, C, sigma_prev, s, m, qubit_flips, meas_flips, Z, v,
                     m_max, modified, greedy, tie_mode, tie_salts):
    for t in range(qubit_flips.shape[0]):
        E ^= qubit_flips[t]
        sync_round_1d(E, C, sigma_prev, s, m, meas_flips[t], Z, v, m_max,
                      modified, greedy, tie_mode, tie_salts[t])


@njit(cache=True)
def pull_site_1d(s, m, r, z, Z, m_max):
    L = s.shape[0]
    for slot in range(4):
        best = _INF64
        if slot < 2:
            r2 = (r + 1) % L if slot == 0 else (r - 1) % L
            if z == Z:
                if s[r2, Z] == -1:
                    best = np.int64(1)
                v = np.int64(m[slot, r2, Z]) + 1
                if v < best:
                    best = v
            else:
                for dz in range(-1, 2):
                    z2 = z + dz
                    if z2 < 0 or z2 > Z:
                        continue
                    inc = 1 + (dz if dz >= 0 else -dz)
                    if s[r2, z2] == -1 and inc < best:
                        best = np.int64(inc)
                    v = np.int64(m[slot, r2, z2]) + inc
                    if v < best:
                        best = v
        else:
            if z == Z or (slot == 3 and z == 0):
                m[slot, r, z] = INF
                continue
            z2 = z + 1 if slot == 2 else z - 1
            for dr in range(-1, 2):
                r2 = (r + dr) % L
                inc = 1 + (dr if dr >= 0 else -dr)
                if s[r2, z2] == -1 and z2 < Z and inc < best:
                    best = np.int64(inc)
                v = np.int64(m[slot, r2, z2]) + inc
                if v < best:
                    best = v
        m[slot, r, z] = INF if best > m_max else np.int32(best)


@njit(cache=True)
def poisson_unit_1d(E, C, sigma_prev, s, m, c, meas_flips, event_sites,
                    event_actions, Z, v, m_max, modified, greedy, tie_mode,
                    tie_salt):
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
                best = m[0, r, z]
                for slot in range(1, 4):
                    if m[slot, r, z] < best:
                        best = m[slot, r, z]
                if best < INF:
                    n_tied = 0
                    for slot in range(4):
                        if m[slot, r, z] == best:
                            n_tied += 1
                    pick = 0
                    if tie_mode != 0 and n_tied > 1:
                        pick = _tie_index(tie_salt, k, n_tied)
                    chosen = 0
                    cnt = 0
                    for slot in range(4):
                        if m[slot, r, z] == best:
                            if cnt == pick:
                                chosen = slot
                                break
                            cnt += 1
                    slot = chosen
                    r2, z2, alive = _move_defect_1d(s, C, sigma_prev, r, z,
                                                    slot, L, True, c)
                    if modified and slot >= 2 and alive:
                        _move_defect_1d(s, C, sigma_prev, r2, z2, 0, L,
                                        True, c)
        c[r, z] = 0


# ---------------------------------------------------------------- d = 2 ---

@njit(cache=True)
def source_2d(s, m, Z):
    L = s.shape[0]
    for i in range(L):
        for j in range(L):
            for z in range(Z + 1):
                if s[i, j, z] != -1:
                    continue
                if m[0, (i - 1) % L, j, z] > 1:
                    m[0, (i - 1) % L, j, z] = 1
                if m[1, (i + 1) % L, j, z] > 1:
                    m[1, (i + 1) % L, j, z] = 1
                if m[2, i, (j - 1) % L, z] > 1:
                    m[2, i, (j - 1) % L, z] = 1
                if m[3, i, (j + 1) % L, z] > 1:
                    m[3, i, (j + 1) % L, z] = 1
                if z < Z:
                    if z - 1 >= 0 and m[4, i, j, z - 1] > 1:
                        m[4, i, j, z - 1] = 1
                    if z + 1 <= Z - 1 and m[5, i, j, z + 1] > 1:
                        m[5, i, j, z + 1] = 1


@njit(cache=True)
def propagate_2d(s, m, Z, m_max):
    L = s.shape[0]
    Zp1 = Z + 1
    new = np.full((6, L, L, Zp1), INF, dtype=np.int32)
    for i in range(L):
        for j in range(L):
            for z in range(Zp1):
                for slot in range(4):
                    if slot == 0:
                        i2, j2 = (i + 1) % L, j
                    elif slot == 1:
                        i2, j2 = (i - 1) % L, j
                    elif slot == 2:
                        i2, j2 = i, (j + 1) % L
                    else:
                        i2, j2 = i, (j - 1) % L
                    perp_is_i = slot >= 2
                    best = _INF64
                    for dp in range(-1, 2):
                        ii = (i2 + dp) % L if perp_is_i else i2
                        jj = j2 if perp_is_i else (j2 + dp) % L
                        adp = dp if dp >= 0 else -dp
                        if z == Z:
                            inc = 1 + adp
                            v = np.int64(m[slot, ii, jj, Z]) + inc
                            if s[ii, jj, Z] == -1 and inc < v:
                                v = np.int64(inc)
                            if v < best:
                                best = v
                        else:
                            for dz in range(-1, 2):
                                z2 = z + dz
                                if z2 < 0 or z2 > Z:
                                    continue
                                inc = 1 + adp + (dz if dz >= 0 else -dz)
                                v = np.int64(m[slot, ii, jj, z2]) + inc
                                if s[ii, jj, z2] == -1 and inc < v:
                                    v = np.int64(inc)
                                if v < best:
                                    best = v
                    if best <= m_max:
                        new[slot, i, j, z] = np.int32(best)
                if z < Z:
                    # slot 4: defect toward +z
                    z2 = z + 1
                    best = _INF64
                    for di in range(-1, 2):
                        for dj in range(-1, 2):
                            ii, jj = (i + di) % L, (j + dj) % L
                            inc = 1 + (di if di >= 0 else -di) + \
                                (dj if dj >= 0 else -dj)
                            v = np.int64(m[4, ii, jj, z2]) + inc
                            if s[ii, jj, z2] == -1 and z2 < Z and inc < v:
                                v = np.int64(inc)
                            if v < best:
                                best = v
                    if best <= m_max:
                        new[4, i, j, z] = np.int32(best)
                    # slot 5: defect toward -z
                    if z > 0:
                        z2 = z - 1
                        best = _INF64
                        for di in range(-1, 2):
                            for dj in range(-1, 2):
                                ii, jj = (i + di) % L, (j + dj) % L
                                inc = 1 + (di if di >= 0 else -di) + \
                                    (dj if dj >= 0 else -dj)
                                v = np.int64(m[5, ii, jj, z2]) + inc
                                if s[ii, jj, z2] == -1 and inc < v:
                                    v = np.int64(inc)
                                if v < best:
                                    best = v
                        if best <= m_max:
                            new[5, i, j, z] = np.int32(best)
    return new


@njit(cache=True)
def relax_2d(s, m, Z, m_max, sweeps):
    cur = m
    for _ in range(sweeps):
        nxt = propagate_2d(s, cur, Z, m_max)
        if _equal_m(nxt, cur):
            return nxt
        cur = nxt
    return cur


@njit(cache=True)
def drift_2d(s, m, Z, modified):
    if Z == 0:
        return
    L = s.shape[0]
    new_s = np.ones_like(s)
    for i in range(L):
        for j in range(L):
            new_s[i, j, Z] = s[i, j, Z]
    for z in range(Z):
        step = 2 if (modified and z >= 2) else 1
        t = z + step
        for i in range(L):
            for j in range(L):
                if t >= Z:
                    new_s[i, j, Z] *= s[i, j, z]
                else:
                    new_s[i, j, t] = s[i, j, z]
    s[:] = new_s
    for slot in range(6):
        for i in range(L):
            for j in range(L):
                for z in range(Z - 1, 0, -1):
                    m[slot, i, j, z] = m[slot, i, j, z - 1]
                m[slot, i, j, 0] = INF


@njit(cache=True)
def _move_defect_2d(s, C, sigma_prev, i, j, z, slot, L, use_cooldown, c):
    if slot == 0:
        i2, j2, z2 = (i + 1) % L, j, z
        C[0, i, j] ^= 1
        sigma_prev[i, j] = -sigma_prev[i, j]
        sigma_prev[(i + 1) % L, j] = -sigma_prev[(i + 1) % L, j]
    elif slot == 1:
        i2, j2, z2 = (i - 1) % L, j, z
        C[0, i2, j] ^= 1
        sigma_prev[i2, j] = -sigma_prev[i2, j]
        sigma_prev[i, j] = -sigma_prev[i, j]
    elif slot == 2:
        i2, j2, z2 = i, (j + 1) % L, z
        C[1, i, j] ^= 1
        sigma_prev[i, j] = -sigma_prev[i, j]
        sigma_prev[i, (j + 1) % L] = -sigma_prev[i, (j + 1) % L]
    elif slot == 3:
        i2, j2, z2 = i, (j - 1) % L, z
        C[1, i, j2] ^= 1
        sigma_prev[i, j2] = -sigma_prev[i, j2]
        sigma_prev[i, j] = -sigma_prev[i, j]
    elif slot == 4:
        i2, j2, z2 = i, j, z + 1
    else:
        i2, j2, z2 = i, j, z - 1
    s[i, j, z] = 1
    s[i2, j2, z2] = -s[i2, j2, z2]
    if use_cooldown:
        c[i2, j2, z2] = 1
    return i2, j2, z2, s[i2, j2, z2] == -1


@njit(cache=True)
def feedback_2d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                use_cooldown, c):
    L = s.shape[0]
    Zp1 = Z + 1
    nd = 0
    for i in range(L):
        for j in range(L):
            for z in range(Zp1):
                if s[i, j, z] == -1:
                    nd += 1
    dis = np.empty(nd, dtype=np.int64)
    djs = np.empty(nd, dtype=np.int64)
    dzs = np.empty(nd, dtype=np.int64)
    k = 0
    for i in range(L):
        for j in range(L):
            for z in range(Zp1):
                if s[i, j, z] == -1:
                    dis[k] = i
                    djs[k] = j
                    dzs[k] = z
                    k += 1

    if greedy:
        for idx in range(nd):
            i, j, z = dis[idx], djs[idx], dzs[idx]
            if s[i, j, z] != -1:
                continue
            for slot in range(4):
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
        # greedy only removes defects; drop the removed ones from the list
        k = 0
        for idx in range(nd):
            if s[dis[idx], djs[idx], dzs[idx]] == -1:
                dis[k] = dis[idx]
                djs[k] = djs[idx]
                dzs[k] = dzs[idx]
                k += 1
        nd = k

    for idx in range(nd):
        i, j, z = dis[idx], djs[idx], dzs[idx]
        if s[i, j, z] != -1:
            continue
        if use_cooldown and c[i, j, z] == 1:
            continue
        best = m[0, i, j, z]
        for slot in range(1, 6):
            if m[slot, i, j, z] < best:
                best = m[slot, i, j, z]
        if best >= INF:
            continue
        n_tied = 0
        for slot in range(6):
            if m[slot, i, j, z] == best:
                n_tied += 1
        pick = 0
        if tie_mode != 0 and n_tied > 1:
            pick = _tie_index(tie_salt, (i * L + j) * Zp1 + z, n_tied)
        chosen = 0
        cnt = 0
        for slot in range(6):
            if m[slot, i, j, z] == best:
                if cnt == pick:
                    chosen = slot
                    break
                cnt += 1
        slot = chosen
        i2, j2, z2, alive = _move_defect_2d(s, C, sigma_prev, i, j, z, slot,
                                            L, use_cooldown, c)
        if modified and slot >= 2 and alive:
            _move_defect_2d(s, C, sigma_prev, i2, j2, z2, 0, L,
                            use_cooldown, c)


@njit(cache=True)
def measure_ingest_2d(E, C, sigma_prev, s, meas_flips):
    L = E.shape[1]
    for i in range(L):
        for j in range(L):
            par = (E[0, i, j] ^ C[0, i, j]) ^ \
                  (E[0, (i - 1) % L, j] ^ C[0, (i - 1) % L, j]) ^ \
                  (E[1, i, j] ^ C[1, i, j]) ^ \
                  (E[1, i, (j - 1) % L] ^ C[1, i, (j - 1) % L])
            sig = np.int8(-1) if par == 1 else np.int8(1)
            if meas_flips[i, j] == 1:
                sig = -sig
            if sig != sigma_prev[i, j]:
                s[i, j, 0] = -s[i, j, 0]
            sigma_prev[i, j] = sig


@njit(cache=True)
def sync_round_2d(E, C, sigma_prev, s, m, meas_flips, Z, v, m_max,
                  modified, greedy, tie_mode, tie_salt):
    measure_ingest_2d(E, C, sigma_prev, s, meas_flips)
    drift_2d(s, m, Z, modified)
    m[:] = relax_2d(s, m, Z, m_max, v)
    feedback_2d(s, m, C, sigma_prev, Z, modified, greedy, tie_mode, tie_salt,
                False, np.zeros((1, 1, 1), dtype=np.uint8))


@njit(cache=True)
def _any_defect_2d(s):
    L = s.shape[0]
    Zp1 = s.shape[2]
    for i in range(L):
        for j in range(L):
            for z in range(Zp1):
                if s[i, j, z] == -1:
                    return True
    return False


@njit(cache=True)
def _terminal_2d(E, C, sigma_prev, s):
    L = E.shape[1]
    trivial = True
    pending = False
    for i in range(L):
        im = L - 1 if i == 0 else i - 1
        for j in range(L):
            jm = L - 1 if j == 0 else j - 1
            par = ((E[0, i, j] ^ C[0, i, j]) ^ (E[0, im, j] ^ C[0, im, j])
                   ^ (E[1, i, j] ^ C[1, i, j]) ^ (E[1, i, jm] ^ C[1, i, jm]))
            if par == 1:
                trivial = False
            sigma = -1 if par == 1 else 1
            if sigma != sigma_prev[i, j]:
                pending = True
    terminal = (not _any_defect_2d(s)) and (not pending)
    return terminal, terminal and trivial


@njit(cache=True)
def offline_run_2d(E, C, sigma_prev, s, m, Z, v, m_max, modified, greedy,
                   tie_mode, tie_salts, cap):
    L = E.shape[1]
    no_flips = np.zeros((L, L), dtype=np.uint8)
    for t in range(cap):
        terminal, clean = _terminal_2d(E, C, sigma_prev, s)
        if terminal:
            return t, clean
        sync_round_2d(E, C, sigma_prev, s, m, no_flips, Z, v, m_max,
                      modified, greedy, tie_mode, tie_salts[t])
    return cap, _terminal_2d(E, C, sigma_prev, s)[1]


@njit(cache=True)
def evolve_rounds_2d(E, C, sigma_prev, s, m, qubit_flips, meas_flips, Z, v,
                     m_max, modified, greedy, tie_mode, tie_salts):
    for t in range(qubit_flips.shape[0]):
        E ^= qubit_flips[t]
        sync_round_2d(E, C, sigma_prev, s, m, meas_flips[t], Z, v, m_max,
                      modified, greedy, tie_mode, tie_salts[t])


@njit(cache=True)
def pull_site_2d(s, m, i, j, z, Z, m_max):
    L = s.shape[0]
    for slot in range(6):
        best = _INF64
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
            for dp in range(-1, 2):
                ii = (i2 + dp) % L if perp_is_i else i2
                jj = j2 if perp_is_i else (j2 + dp) % L
                adp = dp if dp >= 0 else -dp
                if z == Z:
                    inc = 1 + adp
                    if s[ii, jj, Z] == -1 and inc < best:
                        best = np.int64(inc)
                    v = np.int64(m[slot, ii, jj, Z]) + inc
                    if v < best:
                        best = v
                else:
                    for dz in range(-1, 2):
                        z2 = z + dz
                        if z2 < 0 or z2 > Z:
                            continue
                        inc = 1 + adp + (dz if dz >= 0 else -dz)
                        if s[ii, jj, z2] == -1 and inc < best:
                            best = np.int64(inc)
                        v = np.int64(m[slot, ii, jj, z2]) + inc
                        if v < best:
                            best = v
        else:
            if z == Z or (slot == 5 and z == 0):
                m[slot, i, j, z] = INF
                continue
            z2 = z + 1 if slot == 4 else z - 1
            for di in range(-1, 2):
                for dj in range(-1, 2):
                    ii, jj = (i + di) % L, (j + dj) % L
                    inc = 1 + (di if di >= 0 else -di) + \
                        (dj if dj >= 0 else -dj)
                    if s[ii, jj, z2] == -1 and z2 < Z and inc < best:
                        best = np.int64(inc)
                    v = np.int64(m[slot, ii, jj, z2]) + inc
                    if v < best:
                        best = v
        m[slot, i, j, z] = INF if best > m_max else np.int32(best)


@njit(cache=True)
def poisson_unit_2d(E, C, sigma_prev, s, m, c, meas_flips, event_sites,
                    event_actions, Z, v, m_max, modified, greedy, tie_mode,
                    tie_salt):
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
                best = m[0, i, j, z]
                for slot in range(1, 6):
                    if m[slot, i, j, z] < best:
                        best = m[slot, i, j, z]
                if best < INF:
                    n_tied = 0
                    for slot in range(6):
                        if m[slot, i, j, z] == best:
                            n_tied += 1
                    pick = 0
                    if tie_mode != 0 and n_tied > 1:
                        pick = _tie_index(tie_salt, k, n_tied)
                    chosen = 0
                    cnt = 0
                    for slot in range(6):
                        if m[slot, i, j, z] == best:
                            if cnt == pick:
                                chosen = slot
                                break
                            cnt += 1
                    slot = chosen
                    i2, j2, z2, alive = _move_defect_2d(s, C, sigma_prev,
                                                        i, j, z, slot, L,
                                                        True, c)
                    if modified and slot >= 2 and alive:
                        _move_defect_2d(s, C, sigma_prev, i2, j2, z2, 0, L,
                                        True, c)
        c[i, j, z] = 0
