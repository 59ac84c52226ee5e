"""Monte Carlo experiment drivers and estimators.

Everything here is deterministic given (parameters, seed): trial ``k`` draws
all of its randomness from ``trial_generator(seed, k)``, so results are
independent of trial execution order and of the worker count, and aggregation
is a commutative reduction over per-trial sufficient statistics.

Observables:

- logical error rate ``p_log``: failure fraction after evolving the noisy
  decoder for a fixed number of rounds (default: L) and then decoding
  offline.
- memory time ``t_mem``: expected time until offline decoding of the evolving
  state first fails, estimated with an exponential MLE under right-censoring
  (total observed time / number of observed failures).
- order parameters: magnetization overlap m = 1 - 2*weight(E xor C)/L,
  susceptibility chi = L*(<m^2> - <|m|>^2), and the normalized Binder
  cumulant B = 3/2 - <m^4>/(2<m^2>^2).
- decoding-time curve ``T_dec(t)`` after a quench from a rate-1/2 randomized
  sector, and its saturation time ``t_indep``.
- adversarial diagnostics: single-pair random-walk bias scan, Cantor-string
  deletion patterns, isolated-burst erosion, and spacetime cluster
  decomposition.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np

from .automaton import DecoderConfig, default_buffer_height
from .backend import get_kernels
from .code import make_code
from .noise import IIDNoise
from .rng import trial_generator
from .schedule import (
    MARCHING,
    POISSON,
    SYNCHRONOUS,
    UNIFORM_WINDOW,
    ScheduleSpec,
    parse_schedule,
)

INF = np.int32(1 << 30)

CSV_COLUMNS = [
    "experiment", "code", "d", "L", "Z", "v", "schedule", "p_flip", "p_meas",
    "metric", "value", "stderr", "n_trials", "censored", "seed",
]

__all__ = [
    "CSV_COLUMNS",
    "TrialRecord",
    "PlogResult",
    "TmemResult",
    "OrderParams",
    "DecodeTimeCurve",
    "BiasPoint",
    "offline_decode",
    "estimate_plog",
    "estimate_tmem",
    "order_params",
    "estimate_crossing",
    "weighted_linear_root",
    "scaling_collapse",
    "fit_collapse",
    "decode_time_curve",
    "t_indep_from",
    "fit_linear_vs_quadratic",
    "bias_scan",
    "cantor_string",
    "cantor_weight",
    "erode_burst",
    "cluster_decompose",
    "result_row",
]


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    """One trial's outcome, reproducible bit-exactly from (params, seed, k)."""

    experiment: str
    d: int
    L: int
    seed: int
    trial_index: int
    failed: bool
    censored: bool
    time: float          # failure time, decode time, or rounds evolved
    logical: tuple


@dataclass(frozen=True)
class PlogResult:
    p_log: float
    stderr: float
    n_trials: int
    n_failures: int


@dataclass(frozen=True)
class TmemResult:
    t_mem: float
    stderr: float
    censored_fraction: float
    n_trials: int
    n_failures: int


@dataclass(frozen=True)
class OrderParams:
    m_abs: float
    m_abs_err: float
    chi: float
    chi_err: float
    binder: float
    binder_err: float
    n_trials: int
    n_samples: int


@dataclass(frozen=True)
class DecodeTimeCurve:
    probe_times: tuple
    t_dec: tuple
    plateau: float
    band: float
    t_indep: int


@dataclass(frozen=True)
class BiasPoint:
    r: int
    p: float
    p_shrink: float
    p_grow: float
    p_other: float
    expected_shrink: float
    n_samples: int

    @property
    def z_score(self) -> float:
        sig = max(math.sqrt(self.p_shrink * (1 - self.p_shrink) / self.n_samples),
                  1e-9)
        return (self.p_shrink - self.expected_shrink) / sig


def result_row(experiment, d, L, Z, v, schedule, p_flip, p_meas, metric,
               value, stderr, n_trials, censored, seed, code=None) -> dict:
    """One frozen-schema output row (CSV_COLUMNS order)."""
    return {
        "experiment": experiment,
        "code": code if code is not None else ("rep1d" if d == 1 else "toric2d"),
        "d": d, "L": L, "Z": Z, "v": v,
        "schedule": schedule,
        "p_flip": p_flip, "p_meas": p_meas,
        "metric": metric, "value": value, "stderr": stderr,
        "n_trials": n_trials, "censored": censored, "seed": seed,
    }


# --------------------------------------------------------------------------
# shared plumbing
# --------------------------------------------------------------------------

def _resolved(config: DecoderConfig | None, L: int) -> DecoderConfig:
    return (config or DecoderConfig()).resolve(L)


def _schedule(spec) -> ScheduleSpec:
    if spec is None:
        return ScheduleSpec(SYNCHRONOUS)
    if isinstance(spec, ScheduleSpec):
        return spec
    return parse_schedule(spec)


def _fresh_arrays(d: int, L: int, Z: int, rng=None, init_rate: float = 0.0):
    if d == 1:
        shape_q, shape_s = (L,), (L,)
        m = np.full((4, L, Z + 1), INF, dtype=np.int32)
        s = np.ones((L, Z + 1), dtype=np.int8)
    else:
        shape_q, shape_s = (2, L, L), (L, L)
        m = np.full((6, L, L, Z + 1), INF, dtype=np.int32)
        s = np.ones((L, L, Z + 1), dtype=np.int8)
    if init_rate > 0.0:
        E = (rng.random(shape_q) < init_rate).astype(np.uint8)
    else:
        E = np.zeros(shape_q, dtype=np.uint8)
    C = np.zeros(shape_q, dtype=np.uint8)
    sigma_prev = np.ones(shape_s, dtype=np.int8)
    return E, C, sigma_prev, s, m


def _offline(K, d, E, C, sigma_prev, s, m, Z, cfg, salts, cap):
    fn = K.offline_run_1d if d == 1 else K.offline_run_2d
    return fn(E, C, sigma_prev, s, m, Z, cfg.v, cfg.m_max, cfg.modified_rules,
              cfg.greedy_adjacent_fuse, cfg.tie_mode, salts, cap)


def _logical_failed(d: int, L: int, E, C, clean: bool) -> bool:
    """Offline verdict: d=1 by global majority, d=2 by homology class."""
    if not clean:
        return True
    F = E ^ C
    if d == 1:
        return 2 * int(F.sum()) >= L
    cls = (int(F[0, 0, :].sum()) % 2, int(F[1, :, 0].sum()) % 2)
    return cls != (0, 0)


def _logical_class(d: int, E, C) -> tuple:
    F = E ^ C
    if d == 1:
        L = F.shape[0]
        return (1,) if 2 * int(F.sum()) >= L else (0,)
    return (int(F[0, 0, :].sum()) % 2, int(F[1, :, 0].sum()) % 2)


def _draw_salts(rng, n: int) -> np.ndarray:
    return rng.integers(0, 2 ** 63, size=max(n, 1), dtype=np.uint64)


def _map_trials(worker, n_trials: int, workers: int):
    """Sum worker(lo, hi) tuples over a partition of range(n_trials)."""
    if workers <= 1 or n_trials <= 1:
        return worker(0, n_trials)
    workers = min(workers, n_trials)
    bounds = np.linspace(0, n_trials, workers + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(worker, a, b) for a, b in chunks]))
    out = parts[0]
    for part in parts[1:]:
        out = tuple(x + y for x, y in zip(out, part))
    return out


def _run_chunk(job):
    worker, lo, hi = job
    return worker(lo, hi)


# --------------------------------------------------------------------------
# offline decoding
# --------------------------------------------------------------------------

def offline_decode(world, cap: int | None = None, rng=None, readout=None):
    """Noiseless decode of a snapshot of ``world`` (the original untouched).

    Runs the decoder synchronously with p=0 until no defects remain anywhere
    (bulk and wall) or ``cap`` rounds pass. Returns ``(success, T, logical)``
    where ``success`` means the run terminated defect-free, ``T`` is the
    number of rounds used, and ``logical`` is the class read out afterwards:
    global majority vote for d=1 (default per ``readout``) or the homology
    class for d=2.
    """
    code, ctl, cfg = world.code, world.control, world.config
    d, L, Z = code.geom.d, code.geom.L, ctl.Z
    if cap is None:
        cap = 8 * (L + Z + 1)
    if rng is None:
        rng = world.rng
    if readout is None:
        readout = "majority" if d == 1 else "class"
    K = get_kernels()
    E, C = code.E.copy(), code.C.copy()
    sp, s, m = code.sigma_prev.copy(), ctl.s.copy(), ctl.m.copy()
    salts = _draw_salts(rng, cap)
    rounds, clean = _offline(K, d, E, C, sp, s, m, Z, cfg, salts, cap)
    if readout == "majority":
        if d != 1:
            raise ValueError("majority readout is only defined for d=1")
        F = E ^ C
        logical = (1,) if 2 * int(F.sum()) >= L else (0,)
    else:
        logical = _logical_class(d, E, C)
    return bool(clean), int(rounds), logical


# --------------------------------------------------------------------------
# logical error rate
# --------------------------------------------------------------------------

def estimate_plog(d, L, noise, *, trials, rounds=None, schedule=None,
                  config=None, seed=0, cap=None, workers=1,
                  records=None) -> PlogResult:
    """Failure fraction after ``rounds`` noisy decoder rounds (default: L).

    Each trial evolves a fresh encoded state under ``noise`` and the given
    schedule, then decodes offline; failure is a nontrivial readout (majority
    for d=1, homology class for d=2) or a decode that does not terminate
    within ``cap`` rounds.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = _schedule(schedule)
    cfg = _resolved(config, L)
    Z = cfg.Z
    rounds = L if rounds is None else int(rounds)
    cap = 8 * (L + Z + 1) if cap is None else int(cap)

    if spec.kind == SYNCHRONOUS and isinstance(noise, IIDNoise):
        trial = _PlogSyncIID(d, L, noise, rounds, cfg, seed, cap)
    elif spec.kind == POISSON and isinstance(noise, IIDNoise):
        trial = _PlogPoissonIID(d, L, noise, rounds, cfg, seed, cap)
    elif spec.kind == SYNCHRONOUS:
        trial = _PlogSyncModel(d, L, noise, rounds, cfg, seed, cap)
    elif spec.kind in (UNIFORM_WINDOW, MARCHING) and isinstance(noise, IIDNoise):
        trial = _PlogEngine(d, L, noise, rounds, cfg, seed, cap, spec)
    else:
        raise ValueError(
            f"unsupported schedule/noise combination: {spec.label()} with "
            f"{type(noise).__name__}")

    fails, n = _map_trials(trial, trials, workers)
    if records is not None:
        for k in range(trials):
            failed = trial.one(k)
            records.append(TrialRecord("plog", d, L, seed, k, bool(failed),
                                       False, float(rounds), ()))
    f = fails / n
    stderr = math.sqrt(f * (1.0 - f) / n)
    return PlogResult(f, stderr, n, fails)


class _PlogSyncIID:
    """Synchronous i.i.d. trials via the bulk evolve kernel."""

    def __init__(self, d, L, noise, rounds, cfg, seed, cap):
        self.d, self.L, self.noise = d, L, noise
        self.rounds, self.cfg, self.seed, self.cap = rounds, cfg, seed, cap

    def one(self, k: int) -> bool:
        d, L, cfg = self.d, self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        E, C, sp, s, m = _fresh_arrays(d, L, cfg.Z)
        pf, pm = self.noise.flip_rate, self.noise.meas_rate
        qshape = (self.rounds,) + E.shape
        sshape = (self.rounds,) + sp.shape
        qf = (rng.random(qshape) < pf).astype(np.uint8)
        mf = (rng.random(sshape) < pm).astype(np.uint8)
        salts = _draw_salts(rng, self.rounds + self.cap)
        fn = K.evolve_rounds_1d if d == 1 else K.evolve_rounds_2d
        fn(E, C, sp, s, m, qf, mf, cfg.Z, cfg.v, cfg.m_max,
           cfg.modified_rules, cfg.greedy_adjacent_fuse, cfg.tie_mode,
           salts[:self.rounds])
        _, clean = _offline(K, d, E, C, sp, s, m, cfg.Z, cfg,
                            salts[self.rounds:], self.cap)
        return _logical_failed(d, L, E, C, bool(clean))

    def __call__(self, lo: int, hi: int):
        fails = sum(self.one(k) for k in range(lo, hi))
        return fails, hi - lo


class _PlogPoissonIID:
    """Poissonian trials: L^d control events per unit time, one global
    measurement round per unit, cooldown between a site's updates."""

    def __init__(self, d, L, noise, rounds, cfg, seed, cap):
        self.d, self.L, self.noise = d, L, noise
        self.rounds, self.cfg, self.seed, self.cap = rounds, cfg, seed, cap

    def one(self, k: int) -> bool:
        d, L, cfg = self.d, self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        E, C, sp, s, m = _fresh_arrays(d, L, cfg.Z)
        c = np.zeros(s.shape, dtype=np.uint8)
        pf, pm = self.noise.flip_rate, self.noise.meas_rate
        n_events = L ** d
        n_sites = (L ** d) * (cfg.Z + 1)
        fn = K.poisson_unit_1d if d == 1 else K.poisson_unit_2d
        for _ in range(self.rounds):
            flips = (rng.random(E.shape) < pf).astype(np.uint8)
            E ^= flips
            mf = (rng.random(sp.shape) < pm).astype(np.uint8)
            sites = rng.integers(0, n_sites, n_events).astype(np.int64)
            actions = (rng.random(n_events) < cfg.v / (1 + cfg.v)).astype(np.uint8)
            salt = np.uint64(rng.integers(0, 2 ** 63, dtype=np.uint64))
            fn(E, C, sp, s, m, c, mf, sites, actions, cfg.Z, cfg.v, cfg.m_max,
               cfg.modified_rules, cfg.greedy_adjacent_fuse, cfg.tie_mode, salt)
        salts = _draw_salts(rng, self.cap)
        _, clean = _offline(K, d, E, C, sp, s, m, cfg.Z, cfg, salts, self.cap)
        return _logical_failed(d, L, E, C, bool(clean))

    def __call__(self, lo: int, hi: int):
        fails = sum(self.one(k) for k in range(lo, hi))
        return fails, hi - lo


class _PlogSyncModel:
    """Synchronous trials for stateful noise models (adversarial etc.)."""

    def __init__(self, d, L, noise, rounds, cfg, seed, cap):
        self.d, self.L, self.noise = d, L, noise
        self.rounds, self.cfg, self.seed, self.cap = rounds, cfg, seed, cap

    def one(self, k: int) -> bool:
        d, L, cfg = self.d, self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        state = make_code(d, L)
        E, C, sp = state.E, state.C, state.sigma_prev
        _, _, _, s, m = _fresh_arrays(d, L, cfg.Z)
        pm = getattr(self.noise, "meas_rate", 0.0)
        noise = self.noise
        if hasattr(noise, "reset"):
            noise.reset()
        fn = K.sync_round_1d if d == 1 else K.sync_round_2d
        for _ in range(self.rounds):
            noise.sample(state, rng)
            mf = (rng.random(sp.shape) < pm).astype(np.uint8)
            salt = np.uint64(rng.integers(0, 2 ** 63, dtype=np.uint64))
            fn(E, C, sp, s, m, mf, cfg.Z, cfg.v, cfg.m_max,
               cfg.modified_rules, cfg.greedy_adjacent_fuse, cfg.tie_mode, salt)
        salts = _draw_salts(rng, self.cap)
        _, clean = _offline(K, d, E, C, sp, s, m, cfg.Z, cfg, salts, self.cap)
        return _logical_failed(d, L, E, C, bool(clean))

    def __call__(self, lo: int, hi: int):
        fails = sum(self.one(k) for k in range(lo, hi))
        return fails, hi - lo


class _PlogEngine:
    """Generic engine-driven trials (uniform-window, marching soldiers)."""

    def __init__(self, d, L, noise, rounds, cfg, seed, cap, spec):
        self.d, self.L, self.noise = d, L, noise
        self.rounds, self.cfg, self.seed, self.cap = rounds, cfg, seed, cap
        self.spec = spec

    def one(self, k: int) -> bool:
        from .automaton import World
        from .schedule import make_engine

        d, L, cfg = self.d, self.L, self.cfg
        rng = trial_generator(self.seed, k)
        world = World(make_code(d, L), cfg, rng=rng)
        engine = make_engine(self.spec, world, self.noise,
                             seed=int(rng.integers(0, 2 ** 62)))
        engine.advance(self.rounds)
        success, _, logical = offline_decode(world, cap=self.cap, rng=rng)
        if not success:
            return True
        return logical != ((0,) if d == 1 else (0, 0))

    def __call__(self, lo: int, hi: int):
        fails = sum(self.one(k) for k in range(lo, hi))
        return fails, hi - lo


# --------------------------------------------------------------------------
# memory time
# --------------------------------------------------------------------------

def estimate_tmem(d, L, noise, *, max_rounds, trials, probe_interval=None,
                  schedule=None, config=None, seed=0, probe="offline",
                  cap=None, workers=1, records=None) -> TmemResult:
    """Expected time until offline decoding first fails.

    Every ``probe_interval`` rounds (default L) the evolving state is probed:
    ``probe="offline"`` decodes a snapshot offline, ``probe="majority"``
    (d=1 only) reads the instantaneous global majority. The first failing
    probe marks the failure at its interval's start (a conservative
    under-estimate). Right-censored trials stop at ``max_rounds``; t_mem is
    the exponential MLE (total observed time / observed failures), infinite
    when nothing failed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = _schedule(schedule)
    if spec.kind != SYNCHRONOUS:
        raise ValueError("memory-time estimation is implemented for the "
                         "synchronous schedule")
    if probe == "majority" and d != 1:
        raise ValueError("majority probing is only defined for d=1")
    cfg = _resolved(config, L)
    probe_interval = L if probe_interval is None else int(probe_interval)
    if probe_interval < 1:
        raise ValueError("probe_interval must be >= 1")
    cap = 8 * (L + cfg.Z + 1) if cap is None else int(cap)

    trial = _TmemTrial(d, L, noise, int(max_rounds), probe_interval, cfg,
                       seed, probe, cap)
    total_time, n_failures, n = _map_trials(trial, trials, workers)
    censored = n - n_failures
    if records is not None:
        for k in range(trials):
            t, failed = trial.one(k)
            records.append(TrialRecord("tmem", d, L, seed, k, bool(failed),
                                       not failed, float(t), ()))
    if n_failures == 0:
        return TmemResult(math.inf, math.inf, 1.0, n, 0)
    t_mem = total_time / n_failures
    stderr = t_mem / math.sqrt(n_failures)
    return TmemResult(t_mem, stderr, censored / n, n, n_failures)


class _TmemTrial:
    def __init__(self, d, L, noise, max_rounds, interval, cfg, seed, probe, cap):
        self.d, self.L, self.noise = d, L, noise
        self.max_rounds, self.interval = max_rounds, interval
        self.cfg, self.seed, self.probe, self.cap = cfg, seed, probe, cap

    def one(self, k: int):
        """Returns (observed duration, failed?)."""
        d, L, cfg = self.d, self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        iid = isinstance(self.noise, IIDNoise)
        state = None
        if iid:
            E, C, sp, s, m = _fresh_arrays(d, L, cfg.Z)
            pf, pm = self.noise.flip_rate, self.noise.meas_rate
        else:
            state = make_code(d, L)
            E, C, sp = state.E, state.C, state.sigma_prev
            _, _, _, s, m = _fresh_arrays(d, L, cfg.Z)
            pm = getattr(self.noise, "meas_rate", 0.0)
            if hasattr(self.noise, "reset"):
                self.noise.reset()
        evolve = K.evolve_rounds_1d if d == 1 else K.evolve_rounds_2d
        sync = K.sync_round_1d if d == 1 else K.sync_round_2d
        t = 0
        while t < self.max_rounds:
            n = min(self.interval, self.max_rounds - t)
            if iid:
                qf = (rng.random((n,) + E.shape) < pf).astype(np.uint8)
                mf = (rng.random((n,) + sp.shape) < pm).astype(np.uint8)
                salts = _draw_salts(rng, n)
                evolve(E, C, sp, s, m, qf, mf, cfg.Z, cfg.v, cfg.m_max,
                       cfg.modified_rules, cfg.greedy_adjacent_fuse,
                       cfg.tie_mode, salts)
            else:
                for _ in range(n):
                    self.noise.sample(state, rng)
                    mf = (rng.random(sp.shape) < pm).astype(np.uint8)
                    salt = np.uint64(rng.integers(0, 2 ** 63, dtype=np.uint64))
                    sync(E, C, sp, s, m, mf, cfg.Z, cfg.v, cfg.m_max,
                         cfg.modified_rules, cfg.greedy_adjacent_fuse,
                         cfg.tie_mode, salt)
            t += n
            if self.probe == "majority":
                failed = 2 * int((E ^ C).sum()) >= L
            else:
                salts = _draw_salts(rng, self.cap)
                _, clean = _offline(K, d, E.copy(), C.copy(), sp.copy(),
                                    s.copy(), m.copy(), cfg.Z, self.cfg,
                                    salts, self.cap)
                failed = _logical_failed(d, L, E, C, bool(clean))
            if failed:
                return t - n, True   # the probe bin's start
        return self.max_rounds, False

    def __call__(self, lo: int, hi: int):
        total, fails = 0.0, 0
        for k in range(lo, hi):
            t, failed = self.one(k)
            total += t
            fails += failed
        return total, fails, hi - lo


# --------------------------------------------------------------------------
# order parameters
# --------------------------------------------------------------------------

def order_params(L, p, *, d=1, trials=64, samples=48, stride=None,
                 burn_in=None, config=None, depolarizing=True, seed=0,
                 workers=1) -> OrderParams:
    """Steady-state magnetization observables for the synchronous decoder.

    Each trial burns in (default 30*L rounds), then records
    m = 1 - 2*weight(E xor C)/L every ``stride`` rounds (default L).
    ``depolarizing=True`` quotes p as a depolarizing rate (flip and
    measurement error rates both 2p/3). Errors are jackknife over trials.
    """
    if d != 1:
        raise ValueError("order parameters are defined for the d=1 chain")
    cfg = _resolved(config, L)
    stride = L if stride is None else int(stride)
    burn_in = 30 * L if burn_in is None else int(burn_in)
    trial = _OrderTrial(L, p, cfg, burn_in, samples, stride, depolarizing, seed)
    sum_abs, sum_m2, sum_m4, arr_abs, arr_m2, arr_m4, n = _map_trials(
        _OrderChunk(trial), trials, workers)
    mabs = np.asarray(arr_abs)
    m2 = np.asarray(arr_m2)
    m4 = np.asarray(arr_m4)

    M_abs, M2, M4 = mabs.mean(), m2.mean(), m4.mean()
    binder = 1.5 - M4 / (2.0 * M2 * M2)
    chi = L * (M2 - M_abs * M_abs)

    jk_b, jk_c = [], []
    for i in range(n):
        a = (mabs.sum() - mabs[i]) / (n - 1)
        b2 = (m2.sum() - m2[i]) / (n - 1)
        b4 = (m4.sum() - m4[i]) / (n - 1)
        jk_b.append(1.5 - b4 / (2.0 * b2 * b2))
        jk_c.append(L * (b2 - a * a))
    jk_b, jk_c = np.asarray(jk_b), np.asarray(jk_c)
    binder_err = math.sqrt((n - 1) * np.mean((jk_b - jk_b.mean()) ** 2))
    chi_err = math.sqrt((n - 1) * np.mean((jk_c - jk_c.mean()) ** 2))
    m_abs_err = mabs.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return OrderParams(float(M_abs), float(m_abs_err), float(chi),
                       float(chi_err), float(binder), float(binder_err),
                       n, samples)


class _OrderTrial:
    def __init__(self, L, p, cfg, burn_in, samples, stride, depolarizing, seed):
        self.L, self.p, self.cfg = L, p, cfg
        self.burn_in, self.samples, self.stride = burn_in, samples, stride
        self.depolarizing, self.seed = depolarizing, seed

    def one(self, k: int):
        L, cfg = self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        pf = pm = (2.0 * self.p / 3.0) if self.depolarizing else self.p
        E, C, sp, s, m = _fresh_arrays(1, L, cfg.Z)

        def run(n):
            qf = (rng.random((n, L)) < pf).astype(np.uint8)
            mf = (rng.random((n, L)) < pm).astype(np.uint8)
            salts = _draw_salts(rng, n)
            K.evolve_rounds_1d(E, C, sp, s, m, qf, mf, cfg.Z, cfg.v,
                               cfg.m_max, cfg.modified_rules,
                               cfg.greedy_adjacent_fuse, cfg.tie_mode, salts)

        if self.burn_in > 0:
            run(self.burn_in)
        t_abs = t2 = t4 = 0.0
        for _ in range(self.samples):
            run(self.stride)
            mag = 1.0 - 2.0 * float((E ^ C).sum()) / L
            t_abs += abs(mag)
            t2 += mag * mag
            t4 += mag ** 4
        ns = self.samples
        return t_abs / ns, t2 / ns, t4 / ns


class _OrderChunk:
    def __init__(self, trial):
        self.trial = trial

    def __call__(self, lo: int, hi: int):
        arr_abs, arr_m2, arr_m4 = [], [], []
        for k in range(lo, hi):
            a, b, c = self.trial.one(k)
            arr_abs.append(a)
            arr_m2.append(b)
            arr_m4.append(c)
        return (sum(arr_abs), sum(arr_m2), sum(arr_m4),
                arr_abs, arr_m2, arr_m4, hi - lo)


# --------------------------------------------------------------------------
# crossings and collapse
# --------------------------------------------------------------------------

def estimate_crossing(p_values, curves, sizes=None):
    """Crossing point of failure/observable curves for the two largest sizes.

    ``curves`` maps L -> array over ``p_values``. Returns the linearly
    interpolated zero of delta(p) = f_Lmax(p) - f_Lnext(p) at its first sign
    change, or the least-squares linear root if the deltas never change sign
    within the grid; None when the root falls outside the grid entirely.
    """
    p = np.asarray(p_values, dtype=float)
    Ls = sorted(curves) if sizes is None else sorted(sizes)
    if len(Ls) < 2:
        raise ValueError("need at least two system sizes")
    hi, lo = Ls[-1], Ls[-2]
    delta = np.asarray(curves[hi], dtype=float) - np.asarray(curves[lo], dtype=float)
    for i in range(len(p) - 1):
        if delta[i] < 0 <= delta[i + 1]:
            return float(p[i] + (p[i + 1] - p[i]) * (-delta[i])
                         / (delta[i + 1] - delta[i]))
    root = weighted_linear_root(p, delta)
    if root is not None and p.min() - (p.max() - p.min()) <= root <= \
            p.max() + (p.max() - p.min()):
        return root
    return None


def weighted_linear_root(x, y, sigma=None):
    """Root of a (weighted) least-squares line through (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
    if coef[1] == 0.0:
        return None
    return float(-coef[0] / coef[1])


def scaling_collapse(curves, p_c, nu, y_exponent=0.0):
    """Mean squared mismatch between rescaled curves.

    ``curves`` maps L -> (p_array, y_array). Each curve is rescaled to
    x = (p_c - p)/p_c * L^(1/nu), y' = y * L^y_exponent, and every curve is
    compared with every other by linear interpolation over the overlap of
    their x-domains. Raises ValueError if no pair of domains overlaps.
    """
    if len(curves) < 3:
        raise ValueError("need at least three system sizes for a collapse")
    resc = {}
    for L, (p, y) in curves.items():
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        x = (p_c - p) / p_c * float(L) ** (1.0 / nu)
        order = np.argsort(x)
        resc[L] = (x[order], y[order] * float(L) ** y_exponent)
    total, count = 0.0, 0
    sizes = sorted(resc)
    for i, Li in enumerate(sizes):
        xi, yi = resc[Li]
        for Lj in sizes:
            if Lj == Li:
                continue
            xj, yj = resc[Lj]
            mask = (xi >= xj.min()) & (xi <= xj.max())
            if not mask.any():
                continue
            yj_at = np.interp(xi[mask], xj, yj)
            total += float(((yi[mask] - yj_at) ** 2).sum())
            count += int(mask.sum())
    if count == 0:
        raise ValueError("rescaled curves have no overlapping domain")
    return total / count


def fit_collapse(curves, pc_grid, nu_grid, y_exponent_grid=(0.0,)):
    """Grid search minimizing the collapse residual; returns (params, residual)."""
    best, best_res = None, math.inf
    for pc, nu, ye in product(pc_grid, nu_grid, y_exponent_grid):
        try:
            res = scaling_collapse(curves, pc, nu, ye)
        except ValueError:
            continue
        if res < best_res:
            best, best_res = (float(pc), float(nu), float(ye)), res
    if best is None:
        raise ValueError("no parameter combination produced overlapping curves")
    return best, best_res


# --------------------------------------------------------------------------
# decoding-time curve (initialization experiment)
# --------------------------------------------------------------------------

def decode_time_curve(d, L, p, *, trials, probe_times=None, config=None,
                      depolarizing=True, init_rate=0.5, cap=None, seed=0,
                      workers=1) -> DecodeTimeCurve:
    """Mean offline decoding time T_dec(t) after a quench.

    Trials start from a rate-``init_rate`` randomized error sector (the
    encoded-at-t=0 product-state quench) and evolve under synchronous i.i.d.
    noise; at each probe time a snapshot is decoded offline and its decoding
    time, winsorized at ``cap`` (default 8L, counting non-terminating decodes
    at the cap), is averaged. Also reports the saturation time ``t_indep``.
    """
    cfg = _resolved(config, L)
    if probe_times is None:
        step = max(1, L // 5) if d == 1 else max(1, L // 3)
        horizon = 12 * L if d == 1 else 14 * L
        probe_times = list(range(0, horizon + 1, step))
    probe_times = [int(t) for t in probe_times]
    if sorted(probe_times) != probe_times:
        raise ValueError("probe_times must be sorted ascending")
    cap = 8 * L if cap is None else int(cap)
    trial = _CurveTrial(d, L, p, cfg, probe_times, depolarizing, init_rate,
                        cap, seed)
    sums, n = _map_trials(trial, trials, workers)
    T = np.asarray(sums) / n
    plateau, band, t_indep = t_indep_from(probe_times, T)
    return DecodeTimeCurve(tuple(probe_times), tuple(float(x) for x in T),
                           float(plateau), float(band), int(t_indep))


class _CurveTrial:
    def __init__(self, d, L, p, cfg, probes, depolarizing, init_rate, cap, seed):
        self.d, self.L, self.p, self.cfg = d, L, p, cfg
        self.probes, self.depolarizing = probes, depolarizing
        self.init_rate, self.cap, self.seed = init_rate, cap, seed

    def one(self, k: int):
        d, L, cfg = self.d, self.L, self.cfg
        K = get_kernels()
        rng = trial_generator(self.seed, k)
        pf = pm = (2.0 * self.p / 3.0) if self.depolarizing else self.p
        E, C, sp, s, m = _fresh_arrays(d, L, cfg.Z, rng=rng,
                                       init_rate=self.init_rate)
        evolve = K.evolve_rounds_1d if d == 1 else K.evolve_rounds_2d
        out = np.zeros(len(self.probes))
        t_cur = 0
        for i, t in enumerate(self.probes):
            if t > t_cur:
                n = t - t_cur
                qf = (rng.random((n,) + E.shape) < pf).astype(np.uint8)
                mf = (rng.random((n,) + sp.shape) < pm).astype(np.uint8)
                salts = _draw_salts(rng, n)
                evolve(E, C, sp, s, m, qf, mf, cfg.Z, cfg.v, cfg.m_max,
                       cfg.modified_rules, cfg.greedy_adjacent_fuse,
                       cfg.tie_mode, salts)
                t_cur = t
            salts = _draw_salts(rng, self.cap)
            rounds, _ = _offline(K, d, E.copy(), C.copy(), sp.copy(),
                                 s.copy(), m.copy(), cfg.Z, cfg, salts,
                                 self.cap)
            out[i] = min(int(rounds), self.cap)
        return out

    def __call__(self, lo: int, hi: int):
        sums = np.zeros(len(self.probes))
        for k in range(lo, hi):
            sums += self.one(k)
        return sums, hi - lo


def t_indep_from(probe_times, T):
    """Saturation point of a decoding-time curve.

    The plateau is the mean of the last quarter of the curve; the tolerance
    band is the larger of 3x the tail's scatter, 5% of the curve's total
    drop, and 0.5 rounds. The curve is smoothed with a centered 5-point
    moving average (endpoints kept raw), and t_indep is the first probe time
    from which the smoothed curve stays inside the band.
    """
    T = np.asarray(T, dtype=float)
    probes = list(probe_times)
    q = max(4, len(probes) // 4)
    plateau = T[-q:].mean()
    band = max(3.0 * T[-q:].std(), 0.05 * max(T.max() - plateau, 0.0), 0.5)
    S = np.convolve(T, np.ones(5) / 5, mode="same")
    S[:2], S[-2:] = T[:2], T[-2:]
    t_indep = probes[-1]
    for k in range(len(probes)):
        if np.all(np.abs(S[k:] - plateau) <= band):
            t_indep = probes[k]
            break
    return float(plateau), float(band), int(t_indep)


def fit_linear_vs_quadratic(sizes, values):
    """Least-squares y = a + b*L against y = a + b*L^2, AIC-compared."""
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    n = len(x)
    out = {}
    for name, X in (("linear", np.vstack([np.ones_like(x), x]).T),
                    ("quadratic", np.vstack([np.ones_like(x), x * x]).T)):
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(((X @ coef - y) ** 2).sum())
        aic = n * math.log(rss / n + 1e-12) + 4
        out[name] = {"intercept": float(coef[0]), "slope": float(coef[1]),
                     "rss": rss, "aic": aic}
    out["slope"] = out["linear"]["slope"]
    out["linear_preferred"] = (out["linear"]["slope"] > 0
                               and out["linear"]["aic"] < out["quadratic"]["aic"])
    return out


# --------------------------------------------------------------------------
# single-pair bias scan
# --------------------------------------------------------------------------

def bias_scan(p, r_values, samples, *, L=96, anchor=30, seed=0):
    """Empirical one-round transition probabilities of a tracked pair.

    For each separation r: place the pair on a ring of L sites with fully
    seeded defects, apply one draw of the mirrored single-pair noise (each
    tuple n >= 1 fires with probability p, placing inner anyons at distance
    4n-2 from the pair), run one fully-relaxed decoder cycle (Z=0, v=m_max=L),
    and record the new pair separation. Compares P(r -> r-2) against
    (1-p)^floor((r+2)/4).
    """
    from .noise import shrink_probability

    K = get_kernels()
    out = {}
    for ri, r in enumerate(r_values):
        rng = trial_generator(seed, ri)
        A, B = anchor, anchor + r
        n_max = (L - r) // 8
        dec = inc = other = 0
        for i in range(samples):
            E = np.zeros(L, dtype=np.uint8)
            E[A:B] = 1
            C = np.zeros(L, dtype=np.uint8)
            par = E ^ np.roll(E, 1)
            sp = np.where(par == 1, -1, 1).astype(np.int8)
            s = np.ones((L, 1), dtype=np.int8)
            s[A, 0] = -1
            s[B, 0] = -1
            m = np.full((4, L, 1), INF, dtype=np.int32)
            for n in range(1, n_max + 1):
                if rng.random() < p:
                    E[(B + 4 * n - 2) % L] ^= 1
                    E[(A - 4 * n + 1) % L] ^= 1
            no_flips = np.zeros(L, dtype=np.uint8)
            K.sync_round_1d(E, C, sp, s, m, no_flips, 0, L, L,
                            False, False, 1, np.uint64(i))
            F = E ^ C
            pos = np.flatnonzero(F ^ np.roll(F, 1))
            sep = None
            if len(pos) == 2:
                dist = int(pos[1] - pos[0])
                sep = min(dist, L - dist)
            if sep == r - 2:
                dec += 1
            elif sep == r + 2:
                inc += 1
            else:
                other += 1
        out[r] = BiasPoint(r, p, dec / samples, inc / samples, other / samples,
                           shrink_probability(r, p), samples)
    return out


# --------------------------------------------------------------------------
# Cantor strings
# --------------------------------------------------------------------------

def cantor_string(L, q, min_segment=1):
    """Recursive deletion pattern on a non-contractible line of L links.

    Start from the full line; split into q equal segments and delete the
    last; recurse on the survivors until segments reach ``min_segment``
    (segments that cannot be split q ways evenly are kept whole). Returns
    the sorted flipped-link indices.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    if min_segment < 1:
        raise ValueError("min_segment must be >= 1")
    links = []

    def rec(start, length):
        if length <= min_segment or length % q != 0:
            links.extend(range(start, start + length))
            return
        seg = length // q
        for j in range(q - 1):
            rec(start + j * seg, seg)

    rec(0, int(L))
    return np.array(links, dtype=np.int64)


def cantor_weight(L, q):
    """Closed-form pattern weight L*((q-1)/q)^log_q(L) for L a power of q."""
    return L * ((q - 1) / q) ** (math.log(L) / math.log(q))


# --------------------------------------------------------------------------
# burst erosion
# --------------------------------------------------------------------------

def erode_burst(w, *, L=None, Z=None, trials=1000, config=None, seed=0):
    """Fraction of isolated width-w bursts fully eroded by the noiseless decoder.

    Each trial flips a contiguous run of w links at a random position on an
    otherwise clean ring, ingests the syndrome, and runs the decoder with
    p=0. Success requires termination with no defects anywhere (wall
    included) and an exactly trivial final error class.
    """
    L = max(16, 8 * w) if L is None else int(L)
    Z = 10 * w if Z is None else int(Z)
    cfg = (config or DecoderConfig(Z=Z)).resolve(L)
    K = get_kernels()
    ok = 0
    for k in range(trials):
        rng = trial_generator(seed, k)
        E, C, sp, s, m = _fresh_arrays(1, L, cfg.Z)
        r0 = int(rng.integers(0, L))
        for i in range(w):
            E[(r0 + i) % L] ^= 1
        no_flips = np.zeros(L, dtype=np.uint8)
        K.measure_ingest_1d(E, C, sp, s, no_flips)
        cap = 8 * (L + cfg.Z + 1)
        salts = _draw_salts(rng, cap)
        _, clean = _offline(K, 1, E, C, sp, s, m, cfg.Z, cfg, salts, cap)
        if clean and int((E ^ C).sum()) == 0:
            ok += 1
    return ok / trials


# --------------------------------------------------------------------------
# spacetime cluster decomposition
# --------------------------------------------------------------------------

def _is_clustered(idx, pts, W, B):
    """Definition check: is pts[idx] inside some width-W box whose
    B-thick surrounding shell contains no other points?"""
    pt = pts[idx]
    D = pts.shape[1]
    lo = np.ceil(pt - W).astype(np.int64)
    ranges = [range(int(lo[i]), int(pt[i]) + 1) for i in range(D)]
    for a in product(*ranges):
        a = np.asarray(a, dtype=float)
        in_big = np.all((pts >= a - B) & (pts <= a + W + B), axis=1)
        in_box = np.all((pts >= a) & (pts <= a + W), axis=1)
        if not np.any(in_big & ~in_box):
            return True
    return False


def cluster_decompose(points, w, b, n, k_levels):
    """Iterative deletion of (w*n^k, b*n^k)-clustered spacetime points.

    ``points`` is an (N, D) integer array of noise events. Level k deletes,
    simultaneously, every point of N_k lying inside some infinity-norm box of
    width w*n^k whose b*n^k-thick surrounding shell is empty of other N_k
    points. Returns [N_0, N_1, ..., N_{k_levels}].
    """
    if w >= b:
        raise ValueError("need w < b")
    if n <= 1:
        raise ValueError("need n > 1")
    pts = np.asarray(points, dtype=np.int64)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2:
        raise ValueError("points must be an (N, D) array")
    levels = [pts]
    for k in range(k_levels):
        cur = levels[-1]
        if len(cur) == 0:
            levels.append(cur)
            continue
        W, B = w * n ** k, b * n ** k
        # Points whose nearest neighbor is beyond W+B in infinity norm are
        # clustered by any box that contains them; only the rest need the
        # anchor enumeration.
        if len(cur) == 1:
            nearest = np.array([np.inf])
        else:
            diff = np.abs(cur[:, None, :] - cur[None, :, :]).max(axis=2)
            diff = diff.astype(float)
            np.fill_diagonal(diff, np.inf)
            nearest = diff.min(axis=1)
        keep = [i for i in range(len(cur))
                if nearest[i] <= W + B and not _is_clustered(i, cur, W, B)]
        levels.append(cur[keep] if keep else cur[:0])
    return levels
