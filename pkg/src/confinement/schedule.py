"""Update-timing policies: synchronous, Poissonian, uniform-window, marching.

Four ways of clocking the same local dynamics:

- synchronous: one global decoder round per unit of time.
- poisson: noise, measurement/ingestion and drift stay on the global unit
  clock; processing is randomized -- per unit, L^d events land on uniformly
  random control sites, each a message pull with probability v/(1+v), else a
  cooldown-checked defect motion.
- uniform_window: every code column owns an asynchronous processor that
  fires after i.i.d waiting times drawn from [1-eps, 1+eps] and then runs
  the full local cycle (own-site measurement/ingestion, column drift, a
  message push reaching as far as v synchronous steps would, feedback under
  cooldown). Qubit noise still arrives at integer wall-clock times.
- marching_soldiers: Poisson column proposals accepted only when the
  proposing column's simulation time does not exceed any neighbor's; each
  accepted firing is one local synchronous-step equivalent.

Cooldown discipline for the asynchronous variants: a defect moved into a
site sets that site's cooldown bit; feedback at a site requires the bit
clear; a column clears its own bits when it fires, after its feedback.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import backend
from . import kernels_numpy as KNP
from .automaton import World
from .code import true_syndrome
from .kernels_numpy import INF, splitmix64
from .rng import spawn_generator

__all__ = [
    "ScheduleSpec",
    "parse_schedule",
    "next_events",
    "fire_column",
    "SynchronousEngine",
    "PoissonEngine",
    "UniformWindowEngine",
    "MarchingSoldiersEngine",
    "make_engine",
    "is_quiet",
    "run_until_quiet",
]

SYNCHRONOUS = "synchronous"
POISSON = "poisson"
UNIFORM_WINDOW = "uniform_window"
MARCHING = "marching_soldiers"

_KINDS = (SYNCHRONOUS, POISSON, UNIFORM_WINDOW, MARCHING)

# sub-stream tags for per-engine generators (arbitrary distinct constants)
_NOISE_STREAM = 300
_SITE_STREAM = 301
_PROPOSAL_STREAM = 302


@dataclass(frozen=True)
class ScheduleSpec:
    """A timing policy; epsilon is the uniform-window half-width."""

    kind: str = SYNCHRONOUS
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"schedule kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == UNIFORM_WINDOW:
            if self.epsilon is None or not 0.0 < self.epsilon < 1.0:
                raise ValueError(
                    f"uniform_window needs 0 < epsilon < 1, got {self.epsilon}")
        elif self.epsilon is not None:
            raise ValueError(f"epsilon only applies to uniform_window, got kind {self.kind}")

    def label(self) -> str:
        if self.kind == SYNCHRONOUS:
            return "sync"
        if self.kind == POISSON:
            return "poisson"
        if self.kind == UNIFORM_WINDOW:
            return f"window:{self.epsilon:g}"
        return "marching"


def parse_schedule(text: str) -> ScheduleSpec:
    """Parse a CLI schedule spec: sync | poisson | window:EPS | marching."""
    t = text.strip().lower()
    if t in ("sync", "synchronous"):
        return ScheduleSpec(SYNCHRONOUS)
    if t == "poisson":
        return ScheduleSpec(POISSON)
    if t in ("marching", "marching_soldiers"):
        return ScheduleSpec(MARCHING)
    if t.startswith(("window:", "uniform_window:")):
        try:
            eps = float(t.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad uniform_window epsilon in {text!r}") from exc
        return ScheduleSpec(UNIFORM_WINDOW, epsilon=eps)
    raise ValueError(
        f"unknown schedule {text!r}; expected sync | poisson | window:EPS | marching")


# ------------------------------------------------------- timing policies ---


def next_events(spec: ScheduleSpec, n_sites: int, horizon: float, rng,
                v: int = 3) -> list[tuple[float, int, str]]:
    """Ordered (time, site, action) events up to the horizon.

    synchronous yields one global "round" event (site -1) per unit time;
    poisson yields n_sites events per unit, each "message" w.p. v/(1+v)
    else "move"; uniform_window yields per-site "update" events at
    accumulated gaps from [1-eps, 1+eps]; marching_soldiers yields Poisson
    "propose" events (acceptance is resolved by the engine, not the clock).
    """
    events: list[tuple[float, int, str]] = []
    if spec.kind == SYNCHRONOUS:
        t = 1.0
        while t <= horizon:
            events.append((t, -1, "round"))
            t += 1.0
        return events
    if spec.kind in (POISSON, MARCHING):
        action = "propose" if spec.kind == MARCHING else None
        n_units = int(np.ceil(horizon))
        for u in range(n_units):
            times = np.sort(rng.random(n_sites)) + u
            sites = rng.integers(0, n_sites, n_sites)
            kinds = rng.random(n_sites) < v / (1.0 + v)
            for t, site, is_msg in zip(times, sites, kinds):
                if t <= horizon:
                    events.append((float(t), int(site),
                                   action or ("message" if is_msg else "move")))
        return events
    # uniform_window: per-site renewal clocks
    lo, hi = 1.0 - spec.epsilon, 1.0 + spec.epsilon
    for site in range(n_sites):
        t = 0.0
        while True:
            t += lo + (hi - lo) * rng.random()
            if t > horizon:
                break
            events.append((float(t), site, "update"))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


# -------------------------------------------------- column-local update ---


def _column_measure_ingest(world: World, site: tuple, meas_flip: bool) -> None:
    """Own-site measurement of E xor C and ingestion of the change at z=0."""
    code, control = world.code, world.control
    F = code.E ^ code.C
    L = code.geom.L
    if control.d == 1:
        (r,) = site
        par = int(F[r - 1] ^ F[r]) if r > 0 else int(F[L - 1] ^ F[0])
        sigma = -1 if par else 1
        if meas_flip:
            sigma = -sigma
        if sigma != code.sigma_prev[r]:
            control.s[r, 0] *= -1
            code.sigma_prev[r] = sigma
    else:
        i, j = site
        par = int(F[0, i, j] ^ F[0, (i - 1) % L, j]
                  ^ F[1, i, j] ^ F[1, i, (j - 1) % L])
        sigma = -1 if par else 1
        if meas_flip:
            sigma = -sigma
        if sigma != code.sigma_prev[i, j]:
            control.s[i, j, 0] *= -1
            code.sigma_prev[i, j] = sigma


def _column_drift(world: World, site: tuple) -> None:
    """The conveyor restricted to one column (drift is column-local)."""
    control = world.control
    Z = control.Z
    if Z == 0:
        return
    s_col = control.s[site]  # view, shape (Z+1,)
    new = np.ones_like(s_col)
    wall = s_col[Z]
    for z in range(Z):
        step = 2 if (world.config.modified_rules and z >= 2) else 1
        t = z + step
        if t >= Z:
            wall *= s_col[z]
        else:
            new[t] = s_col[z]
    new[Z] = wall
    s_col[:] = new
    m_col = control.m[(slice(None),) + site]  # (n_slots, Z+1)
    m_col[:, 1:Z] = m_col[:, 0:Z - 1].copy()
    m_col[:, 0] = INF


def _merge(m: np.ndarray, slot: int, site: tuple, z: int, val: int, m_max: int) -> None:
    if val > m_max:
        return
    idx = (slot,) + site + (z,)
    if val < m[idx]:
        m[idx] = val


def _push_column_messages(world: World, site: tuple, v: int) -> None:
    """Push the column's message values and defect emissions into the
    v-step forward cones (min-merged), then refresh the column's own slots
    from live depth-1 neighbor values."""
    control, cfg = world.control, world.config
    s, m = control.s, control.m
    L, Z, d = control.L, control.Z, control.d
    m_max = cfg.m_max
    if d == 1:
        spatial = ((0, (-1,)), (1, (+1,)))     # slot, flow direction
        vertical = ((2, -1), (3, +1))          # slot, target z step
        perp_axes: tuple = ()
    else:
        spatial = ((0, (-1, 0)), (1, (+1, 0)), (2, (0, -1)), (3, (0, +1)))
        vertical = ((4, -1), (5, +1))
        perp_axes = (0, 1)

    def targets_spatial(origin, flow, k, perp):
        base = tuple((origin[a] + flow[a] * k) % L for a in range(d))
        if d == 1:
            yield base, 0
        else:
            perp_axis = 0 if flow[0] == 0 else 1
            for o in range(-k, k + 1):
                pos = list(base)
                pos[perp_axis] = (pos[perp_axis] + o) % L
                yield tuple(pos), abs(o)

    for z in range(Z + 1):
        here = site + (z,)
        is_defect = s[here] == -1
        # spatial slots: flow opposite the move direction, one column per step
        for slot, move in spatial:
            flow = tuple(-x for x in move)
            x0 = int(m[(slot,) + here])
            for src_val, active in ((x0, x0 < INF), (0, is_defect)):
                if not active:
                    continue
                for k in range(1, v + 1):
                    for pos, operp in targets_spatial(site, flow, k, perp_axes):
                        if z == Z:
                            # wall sources feed the wall and the bulk below
                            _merge(m, slot, pos, Z, src_val + k + operp, m_max)
                            for z2 in range(max(0, Z - k), Z):
                                _merge(m, slot, pos, z2,
                                       src_val + k + operp + (Z - z2), m_max)
                        else:
                            for z2 in range(max(0, z - k), min(Z - 1, z + k) + 1):
                                _merge(m, slot, pos, z2,
                                       src_val + k + operp + abs(z2 - z), m_max)
        # vertical slots: flow opposite the move direction layer by layer
        if Z == 0 or z == Z:
            continue  # wall carries no vertical slots and never sources them
        for slot, dz_target in vertical:
            x0 = int(m[(slot,) + here])
            for src_val, active in ((x0, x0 < INF), (0, is_defect)):
                if not active:
                    continue
                for k in range(1, v + 1):
                    z2 = z + dz_target * k
                    if z2 < (0 if dz_target == -1 else 1) or z2 > Z - 1:
                        break
                    if d == 1:
                        for o in range(-k, k + 1):
                            _merge(m, slot, ((site[0] + o) % L,), z2,
                                   src_val + k + abs(o), m_max)
                    else:
                        for oi in range(-k, k + 1):
                            for oj in range(-k, k + 1):
                                pos = ((site[0] + oi) % L, (site[1] + oj) % L)
                                _merge(m, slot, pos, z2,
                                       src_val + k + abs(oi) + abs(oj), m_max)

    pull = KNP.pull_site_1d if d == 1 else KNP.pull_site_2d
    for z in range(Z + 1):
        pull(s, m, *site, z, Z, m_max)


def _column_feedback(world: World, site: tuple, tie_salt: int) -> None:
    """Cooldown-checked feedback for the column's defects, in z order."""
    control, cfg = world.control, world.config
    s, m, c = control.s, control.m, control.c
    L, Z, d = control.L, control.Z, control.d
    Zp1 = Z + 1
    move = KNP._move_defect_1d if d == 1 else KNP._move_defect_2d
    zs = [z for z in range(Zp1) if s[site + (z,)] == -1]
    for z in zs:
        here = site + (z,)
        if s[here] != -1 or c[here] == 1:
            continue
        vals = m[(slice(None),) + here]
        best = vals.min()
        if best >= INF:
            continue
        tied = np.flatnonzero(vals == best)
        if cfg.tie_mode == 0 or len(tied) == 1:
            slot = int(tied[0])
        else:
            flat = site[0] * Zp1 + z if d == 1 else (site[0] * L + site[1]) * Zp1 + z
            h = splitmix64((int(tie_salt) + flat * 0x9E3779B97F4A7C15)
                           & 0xFFFFFFFFFFFFFFFF)
            slot = int(tied[h % len(tied)])
        out = move(s, world.code.C, world.code.sigma_prev, *site, z, slot, L,
                   True, c)
        alive = out[-1]
        spatial_slots = (0, 1) if d == 1 else (0, 1, 2, 3)
        if cfg.modified_rules and slot not in spatial_slots and alive:
            move(s, world.code.C, world.code.sigma_prev, *out[:-1], 0, L, True, c)


def fire_column(world: World, site, rng, p_meas: float = 0.0,
                push_v: int | None = None) -> None:
    """One asynchronous firing of a code column: the full local cycle.

    Runs own-site measurement/ingestion, the column-local conveyor step, a
    message push honoring velocity v, and cooldown-checked feedback; ends by
    clearing the column's own cooldown bits (checks happen before the clear,
    so a defect parked here by a neighbor waits out exactly one firing).
    """
    site = (int(site),) if np.isscalar(site) else tuple(int(x) for x in site)
    v = world.config.v if push_v is None else push_v
    meas_flip = bool(p_meas > 0.0 and rng.random() < p_meas)
    _column_measure_ingest(world, site, meas_flip)
    _column_drift(world, site)
    _push_column_messages(world, site, v)
    salt = int(rng.integers(0, 2 ** 63))
    _column_feedback(world, site, salt)
    world.control.c[site] = 0


# ----------------------------------------------------------- engines ---


class SynchronousEngine:
    """Global decoder rounds; one per unit of time."""

    def __init__(self, world: World, noise, seed: int):
        self.world = world
        self.noise = noise
        self.rng = spawn_generator(seed, _NOISE_STREAM)
        self.t = 0.0

    def advance(self, units: int) -> None:
        w = self.world
        shape = (w.control.L,) * w.control.d
        for _ in range(units):
            self.noise.sample(w.code, self.rng)
            rate = self.noise.meas_rate
            mf = (self.rng.random(shape) < rate).astype(np.uint8) if rate > 0 \
                else np.zeros(shape, dtype=np.uint8)
            w.step(meas_flips=mf, tie_salt=self.rng.integers(0, 2 ** 63))
            self.t += 1.0


class PoissonEngine:
    """Randomized sequential processing on the global unit clock."""

    def __init__(self, world: World, noise, seed: int):
        self.world = world
        self.noise = noise
        self.rng = spawn_generator(seed, _NOISE_STREAM)
        self.t = 0.0

    def advance(self, units: int) -> None:
        w = self.world
        k = backend.get_kernels()
        unit = k.poisson_unit_1d if w.control.d == 1 else k.poisson_unit_2d
        L, Z, d = w.control.L, w.control.Z, w.control.d
        shape = (L,) * d
        n_control = (L ** d) * (Z + 1)
        n_events = L ** d
        v = w.config.v
        for _ in range(units):
            self.noise.sample(w.code, self.rng)
            rate = self.noise.meas_rate
            mf = (self.rng.random(shape) < rate).astype(np.uint8) if rate > 0 \
                else np.zeros(shape, dtype=np.uint8)
            sites = self.rng.integers(0, n_control, n_events).astype(np.int64)
            actions = (self.rng.random(n_events) < v / (1.0 + v)).astype(np.uint8)
            salt = np.uint64(self.rng.integers(0, 2 ** 63))
            unit(w.code.E, w.code.C, w.code.sigma_prev, w.control.s,
                 w.control.m, w.control.c, mf, sites, actions, Z, v,
                 w.config.m_max, w.config.modified_rules,
                 w.config.greedy_adjacent_fuse, w.config.tie_mode, salt)
            self.t += 1.0


class UniformWindowEngine:
    """Per-column renewal clocks with gaps i.i.d from [1-eps, 1+eps].

    Each column owns its RNG sub-stream, so the trace is reproducible from
    (seed, config) regardless of how events interleave. Qubit noise lands
    at integer wall-clock times from its own stream.
    """

    def __init__(self, world: World, noise, seed: int, epsilon: float):
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"uniform_window needs 0 < epsilon < 1, got {epsilon}")
        self.world = world
        self.noise = noise
        self.epsilon = epsilon
        self.noise_rng = spawn_generator(seed, _NOISE_STREAM)
        L, d = world.control.L, world.control.d
        self.columns = [(r,) for r in range(L)] if d == 1 else \
            [(i, j) for i in range(L) for j in range(L)]
        self.site_rngs = [spawn_generator(seed, _SITE_STREAM, idx)
                          for idx in range(len(self.columns))]
        self.t = 0.0
        self._noise_applied_until = 0
        self.fired = np.zeros(len(self.columns), dtype=np.int64)
        self._heap = [(self._gap(idx), idx) for idx in range(len(self.columns))]
        heapq.heapify(self._heap)

    def _gap(self, idx: int) -> float:
        return 1.0 - self.epsilon + 2.0 * self.epsilon * self.site_rngs[idx].random()

    def _apply_noise_until(self, t: float) -> None:
        while self._noise_applied_until + 1 <= t:
            self._noise_applied_until += 1
            self.noise.sample(self.world.code, self.noise_rng)

    def advance(self, units: int) -> None:
        t_end = self.t + units
        while self._heap and self._heap[0][0] <= t_end:
            tf, idx = heapq.heappop(self._heap)
            self._apply_noise_until(tf)
            fire_column(self.world, self.columns[idx], self.site_rngs[idx],
                        p_meas=self.noise.meas_rate)
            self.fired[idx] += 1
            heapq.heappush(self._heap, (tf + self._gap(idx), idx))
        self._apply_noise_until(t_end)
        self.t = t_end


class MarchingSoldiersEngine:
    """Poisson proposals gated by the simulation-surface rule.

    A proposed column fires only if its simulation time does not exceed any
    neighbor's; an accepted firing advances its t_sim by one, keeping
    |t_sim(r) - t_sim(r')| <= 1 across every edge.
    """

    def __init__(self, world: World, noise, seed: int):
        self.world = world
        self.noise = noise
        self.noise_rng = spawn_generator(seed, _NOISE_STREAM)
        self.proposal_rng = spawn_generator(seed, _PROPOSAL_STREAM)
        L, d = world.control.L, world.control.d
        self.columns = [(r,) for r in range(L)] if d == 1 else \
            [(i, j) for i in range(L) for j in range(L)]
        self.site_rngs = [spawn_generator(seed, _SITE_STREAM, idx)
                          for idx in range(len(self.columns))]
        self.t_sim = np.zeros((L,) * d, dtype=np.int64)
        self.t = 0.0

    def _neighbors(self, site: tuple):
        L = self.world.control.L
        if len(site) == 1:
            (r,) = site
            return (((r - 1) % L,), ((r + 1) % L,))
        i, j = site
        return (((i - 1) % L, j), ((i + 1) % L, j),
                (i, (j - 1) % L), (i, (j + 1) % L))

    def accepts(self, site: tuple) -> bool:
        return all(self.t_sim[site] <= self.t_sim[nb]
                   for nb in self._neighbors(site))

    def advance(self, units: int) -> None:
        n = len(self.columns)
        for _ in range(units):
            self.noise.sample(self.world.code, self.noise_rng)
            for idx in self.proposal_rng.integers(0, n, n):
                site = self.columns[int(idx)]
                if not self.accepts(site):
                    continue
                fire_column(self.world, site, self.site_rngs[int(idx)],
                            p_meas=self.noise.meas_rate)
                self.t_sim[site] += 1
            self.t += 1.0


def make_engine(spec: ScheduleSpec, world: World, noise, seed: int):
    """Engine for a schedule spec; all engines expose advance(units)."""
    if spec.kind == SYNCHRONOUS:
        return SynchronousEngine(world, noise, seed)
    if spec.kind == POISSON:
        return PoissonEngine(world, noise, seed)
    if spec.kind == UNIFORM_WINDOW:
        return UniformWindowEngine(world, noise, seed, spec.epsilon)
    return MarchingSoldiersEngine(world, noise, seed)


def is_quiet(world: World) -> bool:
    """Defect-free with no syndrome change left to ingest."""
    no_defects = not (world.control.s == -1).any()
    settled = bool((true_syndrome(world.code) == world.code.sigma_prev).all())
    return no_defects and settled


def run_until_quiet(engine, max_units: int, chunk: int = 1) -> int:
    """Advance until quiet; returns the units consumed (= max_units if the
    budget runs out first -- callers check is_quiet to distinguish)."""
    used = 0
    while used < max_units:
        if is_quiet(engine.world):
            return used
        engine.advance(chunk)
        used += chunk
    return used
