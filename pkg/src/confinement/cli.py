"""Command-line entry point: config parsing, dispatch, and row emission.

Subcommands
-----------
plog         logical error rate after a fixed number of noisy rounds
tmem         memory time (censored-exponential MLE over probed trials)
sweep        grid sweep of p_log or an order parameter over L x p
transition   sweep plus a crossing estimate from the two largest sizes
init         decoding-time curve after a quench, with saturation time
adversarial  single-pair adversary: p_log, t_mem, or the walk-bias scan
field        memory time of the power-law field-following baseline decoder
cantor       recursive-deletion pattern: weight and offline decode verdict
clusters     spacetime cluster decomposition of sampled noise histories

Conventions
-----------
- Data rows go to --out (default stdout); progress goes to stderr only.
- Output is CSV (default) or JSONL with one frozen 15-column schema; every
  row echoes the resolved configuration (code, d, L, Z, v, schedule, rates,
  seed). Non-finite values are serialized as empty (CSV) / null (JSONL).
- --Z accepts an integer or "log32" (buffer height ceil(log_{3/2} L)).
- --p accepts a single probability or an inclusive range "start:stop:step".
- --depolarizing quotes p as a depolarizing strength; the echoed p_flip /
  p_meas columns always carry the resolved per-sector rates.
- --config FILE supplies defaults from a flat JSON object keyed by option
  names (underscored); explicit flags override the file.
- Trial k of every estimator draws from an independent substream hashed from
  (seed, k), so results are independent of --workers and identical across
  reruns with the same configuration and seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import experiments as xp
from .automaton import DecoderConfig, World, default_buffer_height
from .code import make_code
from .experiments import CSV_COLUMNS, result_row
from .fieldsim import FieldWorld, field_step
from .noise import BlockedSinglePairNoise, IIDNoise, NoiseLog
from .rng import trial_generator
from .schedule import parse_schedule

SUBCOMMANDS = ("plog", "tmem", "sweep", "transition", "init", "adversarial",
               "field", "cantor", "clusters")


def progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------

def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad L list {text!r}; expected e.g. '15' or '9,15,23'") from exc
    if not sizes:
        raise ValueError("L list is empty")
    for L in sizes:
        if L < 3:
            raise ValueError(f"L must be >= 3, got {L}")
    return sizes


def parse_probs(text: str) -> list[float]:
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = (float(tok) for tok in parts)
        if step <= 0:
            raise ValueError(f"range step must be positive, got {step}")
        vals = [round(v, 12) for v in np.arange(start, stop + step / 2, step)]
    else:
        vals = [float(text)]
    if not vals:
        raise ValueError(f"range {text!r} is empty")
    for v in vals:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"probability {v} outside [0, 1]")
    return vals


def parse_height(text, L: int) -> int:
    if str(text).strip().lower() == "log32":
        return default_buffer_height(L)
    Z = int(text)
    if Z < 0:
        raise ValueError(f"Z must be >= 0, got {Z}")
    return Z


def parse_times(text: str) -> list[int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"bad probe-times {text!r}; expected start:stop:step")
    start, stop, step = (int(tok) for tok in parts)
    if step <= 0 or stop < start:
        raise ValueError(f"bad probe-times {text!r}")
    return list(range(start, stop + 1, step))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _sanitize(value, null):
    if isinstance(value, float) and not math.isfinite(value):
        return null
    return value


class RowWriter:
    """Single writer serializing rows to CSV or JSONL, flushed per row."""

    def __init__(self, path: str, fmt: str):
        self.fmt = fmt
        self._own = path not in ("-", "", None)
        self.fh = open(path, "w", newline="") if self._own else sys.stdout
        self._csv = None
        self.rows = 0

    def write(self, row: dict) -> None:
        if self.fmt == "csv":
            if self._csv is None:
                self._csv = csv.DictWriter(self.fh, fieldnames=CSV_COLUMNS)
                self._csv.writeheader()
            self._csv.writerow({k: _sanitize(v, "") for k, v in row.items()})
        else:
            self.fh.write(json.dumps({k: _sanitize(v, None)
                                      for k, v in row.items()}) + "\n")
        self.fh.flush()
        self.rows += 1

    def close(self) -> None:
        if self._own:
            self.fh.close()


# --------------------------------------------------------------------------
# argument specification
# --------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", metavar="FILE",
                    help="flat JSON object of option defaults; flags override")
    sp.add_argument("--code", choices=("rep1d", "toric2d"), default="rep1d",
                    help="code family: rep1d (d=1) or toric2d (d=2)")
    sp.add_argument("--L", help="system size or comma list, e.g. 9,15,23")
    sp.add_argument("--Z", default="log32",
                    help='buffer height: integer >= 0 or "log32" (default)')
    sp.add_argument("--v", type=int, default=3, help="message velocity (default 3)")
    sp.add_argument("--m-max", type=int, default=None,
                    help="message clamp (default: L)")
    sp.add_argument("--schedule", default="sync",
                    help="sync | poisson | window:EPS | marching")
    sp.add_argument("--modified-rules", action="store_true",
                    help="enable the modified local update rules")
    sp.add_argument("--tie-break", choices=("priority", "hashed"),
                    default="hashed", help="pull tie-breaking policy")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1,
                    help="worker processes farming trials (default 1)")
    sp.add_argument("--out", default="-", help="output path (default stdout)")
    sp.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def _add_rates(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", help="error probability or range start:stop:step")
    sp.add_argument("--p-meas", default=None,
                    help="measurement error probability (default: same as p)")
    sp.add_argument("--depolarizing", action="store_true",
                    help="quote p as a depolarizing strength (rates 2p/3)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="confinement",
        description="Monte Carlo experiments for the confining message-passing "
                    "decoder and its baselines.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("plog", help="logical error rate after fixed rounds")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--rounds", type=int, default=None,
                    help="noisy rounds before decoding (default: L)")
    sp.add_argument("--dump-noise", metavar="FILE", default=None,
                    help="run a single recorded trial and write its noise log")
    sp.add_argument("--replay", metavar="FILE", default=None,
                    help="replay a recorded noise log instead of sampling")

    sp = sub.add_parser("tmem", help="memory time")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--max-rounds", type=int, required=True)
    sp.add_argument("--probe-interval", type=int, default=None,
                    help="rounds between failure probes (default: L)")
    sp.add_argument("--probe", choices=("offline", "majority"), default="offline")

    sp = sub.add_parser("sweep", help="grid sweep over L x p")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--observable", choices=("plog", "binder", "m", "chi"),
                    default="plog")
    sp.add_argument("--rounds", type=int, default=None)
    sp.add_argument("--samples", type=int, default=48,
                    help="order-parameter samples per trial")
    sp.add_argument("--stride", type=int, default=None,
                    help="rounds between order-parameter samples (default: L)")
    sp.add_argument("--burn-in", type=int, default=None,
                    help="equilibration rounds (default: 30L)")

    sp = sub.add_parser("transition", help="sweep plus crossing estimate")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--observable", choices=("plog", "binder"), default="plog")
    sp.add_argument("--rounds", type=int, default=None)
    sp.add_argument("--samples", type=int, default=48)
    sp.add_argument("--stride", type=int, default=None)
    sp.add_argument("--burn-in", type=int, default=None)

    sp = sub.add_parser("init", help="decoding-time curve after a quench")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--probe-times", default=None,
                    help="probe times start:stop:step (default: auto)")
    sp.add_argument("--init-rate", type=float, default=0.5,
                    help="initial error-sector rate (default 0.5)")
    sp.add_argument("--cap", type=int, default=None,
                    help="offline decode winsorization cap (default 8L)")

    sp = sub.add_parser("adversarial", help="single-pair adversary experiments")
    _add_common(sp)
    sp.add_argument("--p", help="adversary tuple probability")
    sp.add_argument("--observable", choices=("plog", "tmem", "bias"),
                    default="plog")
    sp.add_argument("--r0", type=int, default=3, help="reseeding separation")
    sp.add_argument("--block-width", type=int, default=None)
    sp.add_argument("--rounds", type=int, default=None)
    sp.add_argument("--max-rounds", type=int, default=None)
    sp.add_argument("--probe-interval", type=int, default=None)
    sp.add_argument("--r-values", default="3,5,7,9,11,13,15,17,19,21",
                    help="bias scan separations (comma list)")
    sp.add_argument("--samples", type=int, default=10000,
                    help="bias scan samples per separation")

    sp = sub.add_parser("field", help="power-law field-decoder memory time")
    _add_common(sp)
    sp.add_argument("--p", help="error probability or range")
    sp.add_argument("--alpha", type=float, required=True,
                    help="force-law exponent (force ~ 1/r^alpha)")
    sp.add_argument("--charged", action="store_true",
                    help="signed-charge variant (d=1 only)")
    sp.add_argument("--max-rounds", type=int, required=True)
    sp.add_argument("--probe-interval", type=int, default=None)

    sp = sub.add_parser("cantor", help="recursive-deletion pattern decode")
    _add_common(sp)
    sp.add_argument("--q", type=int, required=True, help="subdivision arity")
    sp.add_argument("--min-segment", type=int, default=1)

    sp = sub.add_parser("clusters", help="spacetime cluster decomposition")
    _add_common(sp); _add_rates(sp)
    sp.add_argument("--rounds", type=int, required=True,
                    help="noise history length in rounds")
    sp.add_argument("--w", type=int, default=1, help="base box width")
    sp.add_argument("--b", type=int, default=4, help="base shell thickness")
    sp.add_argument("--n", type=int, default=20, help="level scale factor")
    sp.add_argument("--levels", type=int, default=2)
    return ap


def parse_config(argv, parser: argparse.ArgumentParser | None = None):
    """Parse argv; a --config JSON file supplies defaults, flags override."""
    parser = parser or build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file {args.config}: {exc}")
        if not isinstance(file_values, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
        sub_parser = _subparser_for(parser, args.subcommand)
        valid = {a.dest for a in sub_parser._actions}
        defaults = {}
        for key, value in file_values.items():
            dest = key.replace("-", "_")
            if dest not in valid or dest in ("help", "config", "subcommand"):
                parser.error(
                    f"unknown config key {key!r} for subcommand "
                    f"{args.subcommand!r}; valid keys: "
                    f"{', '.join(sorted(d for d in valid if d != 'help'))}")
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            defaults[dest] = value
        sub_parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _subparser_for(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise LookupError(name)


# --------------------------------------------------------------------------
# shared resolution
# --------------------------------------------------------------------------

class _Resolved:
    """Validated run parameters shared by the subcommand drivers."""

    def __init__(self, args, parser, need_p=True):
        self.args = args
        if args.L is None:
            parser.error(f"{args.subcommand} requires --L "
                         "(or an \"L\" entry in the config file)")
        try:
            self.sizes = parse_sizes(args.L)
            self.d = 1 if args.code == "rep1d" else 2
            self.code = args.code
            self.schedule = parse_schedule(args.schedule)
            if need_p:
                if getattr(args, "p", None) is None:
                    parser.error(f"{args.subcommand} requires --p")
                self.p_values = parse_probs(args.p)
                pm = getattr(args, "p_meas", None)
                self.p_meas = None if pm is None else float(pm)
            else:
                self.p_values, self.p_meas = [0.0], None
            self.heights = {L: parse_height(args.Z, L) for L in self.sizes}
        except ValueError as exc:
            parser.error(str(exc))
        if args.trials < 1:
            parser.error(f"trials must be >= 1, got {args.trials}")
        if args.workers < 1:
            parser.error(f"workers must be >= 1, got {args.workers}")
        self.seed = args.seed
        self.trials = args.trials
        self.workers = args.workers

    def decoder_config(self, L: int) -> DecoderConfig:
        a = self.args
        return DecoderConfig(v=a.v, m_max=a.m_max, Z=self.heights[L],
                             modified_rules=a.modified_rules,
                             tie_break=a.tie_break).resolve(L)

    def iid_noise(self, p: float) -> IIDNoise:
        depol = getattr(self.args, "depolarizing", False)
        return IIDNoise(p, self.p_meas, depolarizing=depol)

    def row(self, L, metric, value, stderr, *, p_flip=0.0, p_meas=0.0,
            censored=0.0, n_trials=None, experiment=None, schedule=None,
            v=None, Z=None):
        cfg = self.decoder_config(L)
        return result_row(
            experiment or self.args.subcommand, self.d, L,
            cfg.Z if Z is None else Z, cfg.v if v is None else v,
            schedule or self.schedule.label(), p_flip, p_meas, metric,
            value, stderr, self.trials if n_trials is None else n_trials,
            censored, self.seed, code=self.code)


# --------------------------------------------------------------------------
# subcommand drivers
# --------------------------------------------------------------------------

def _run_plog(args, parser, writer):
    if args.dump_noise and args.replay:
        parser.error("--dump-noise and --replay are mutually exclusive")
    if args.replay:
        return _run_replay(args, parser, writer)
    rc = _Resolved(args, parser)
    if args.dump_noise:
        return _run_dump(rc, parser, writer)
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        for p in rc.p_values:
            noise = rc.iid_noise(p)
            res = xp.estimate_plog(rc.d, L, noise, trials=rc.trials,
                                   rounds=args.rounds, schedule=rc.schedule,
                                   config=dcfg, seed=rc.seed,
                                   workers=rc.workers)
            writer.write(rc.row(L, "p_log", res.p_log, res.stderr,
                                p_flip=noise.flip_rate, p_meas=noise.meas_rate))
            progress(f"plog L={L} p={p:g}: {res.p_log:.4f} "
                     f"+/- {res.stderr:.4f} ({res.n_trials} trials)")
    return 0


def _run_dump(rc, parser, writer):
    args = rc.args
    if len(rc.sizes) != 1 or len(rc.p_values) != 1 or rc.trials != 1:
        parser.error("--dump-noise records a single trial: use one L, one p, "
                     "and --trials 1")
    L, p = rc.sizes[0], rc.p_values[0]
    if rc.schedule.label() != "sync":
        parser.error("--dump-noise supports the sync schedule only")
    dcfg = rc.decoder_config(L)
    noise = rc.iid_noise(p)
    rounds = L if args.rounds is None else args.rounds
    # Noise draws come from their own stream so the world's salt stream is
    # identical under --replay, making the replayed trajectory exact.
    noise_rng = trial_generator(rc.seed, 0)
    world = World(make_code(rc.d, L), dcfg, rng=trial_generator(rc.seed, 1))
    log = NoiseLog()
    site_shape = (L,) * rc.d
    for t in range(rounds):
        log.record(t, "flip", noise.sample(world.code, noise_rng))
        mf = (noise_rng.random(site_shape) < noise.meas_rate).astype(np.uint8)
        log.record(t, "meas", np.flatnonzero(mf))
        world.step(meas_flips=mf)
    ok, _, logical = xp.offline_decode(world)
    failed = (not ok) or logical != ((0,) if rc.d == 1 else (0, 0))
    log.dump(args.dump_noise)
    writer.write(rc.row(L, "p_log", float(failed), 0.0, n_trials=1,
                        p_flip=noise.flip_rate, p_meas=noise.meas_rate))
    progress(f"dumped {len(log.events)} noise events to {args.dump_noise}")
    return 0


def _run_replay(args, parser, writer):
    rc = _Resolved(args, parser, need_p=False)
    if len(rc.sizes) != 1:
        parser.error("--replay uses a single L")
    L = rc.sizes[0]
    dcfg = rc.decoder_config(L)
    log = NoiseLog.load(args.replay)
    horizon = args.rounds
    if horizon is None:
        horizon = 1 + max((ev["round"] for ev in log.events), default=L - 1)
    world = World(make_code(rc.d, L), dcfg, rng=trial_generator(rc.seed, 1))
    site_shape = (L,) * rc.d
    for t in range(horizon):
        flat = world.code.E.reshape(-1)
        for q in log.locations_for(t, "flip"):
            flat[q] ^= 1
        mf = np.zeros(site_shape, dtype=np.uint8)
        for q in log.locations_for(t, "meas"):
            mf.reshape(-1)[q] = 1
        world.step(meas_flips=mf)
    ok, _, logical = xp.offline_decode(world)
    failed = (not ok) or logical != ((0,) if rc.d == 1 else (0, 0))
    writer.write(rc.row(L, "p_log", float(failed), 0.0, n_trials=1,
                        schedule="replay"))
    progress(f"replayed {horizon} rounds from {args.replay}")
    return 0


def _run_tmem(args, parser, writer):
    rc = _Resolved(args, parser)
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        for p in rc.p_values:
            noise = rc.iid_noise(p)
            res = xp.estimate_tmem(rc.d, L, noise, max_rounds=args.max_rounds,
                                   trials=rc.trials,
                                   probe_interval=args.probe_interval,
                                   schedule=rc.schedule, config=dcfg,
                                   seed=rc.seed, probe=args.probe,
                                   workers=rc.workers)
            writer.write(rc.row(L, "t_mem", res.t_mem, res.stderr,
                                p_flip=noise.flip_rate, p_meas=noise.meas_rate,
                                censored=res.censored_fraction))
            progress(f"tmem L={L} p={p:g}: {res.t_mem:.1f} +/- {res.stderr:.1f}"
                     f" (censored {res.censored_fraction:.0%})")
    return 0


def _order_metric(observable):
    return {"binder": "binder", "m": "m_abs", "chi": "chi"}[observable]


def _run_sweep(args, parser, writer):
    rc = _Resolved(args, parser)
    if args.observable != "plog":
        if rc.d != 1:
            parser.error("order-parameter sweeps require --code rep1d")
        if args.p_meas is not None:
            parser.error("order-parameter sweeps draw measurement errors at "
                         "the flip rate; --p-meas is not supported")
    _sweep_cells(rc, args, writer)
    return 0


def _sweep_cells(rc, args, writer):
    """Emit one row per (L, p); returns {L: [value per p]} for reuse."""
    curves = {}
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        curves[L] = []
        for p in rc.p_values:
            if args.observable == "plog":
                noise = rc.iid_noise(p)
                res = xp.estimate_plog(rc.d, L, noise, trials=rc.trials,
                                       rounds=args.rounds,
                                       schedule=rc.schedule, config=dcfg,
                                       seed=rc.seed, workers=rc.workers)
                value, stderr, metric = res.p_log, res.stderr, "p_log"
                rates = (noise.flip_rate, noise.meas_rate)
            else:
                op = xp.order_params(L, p, trials=rc.trials,
                                     samples=args.samples, stride=args.stride,
                                     burn_in=args.burn_in, config=dcfg,
                                     depolarizing=args.depolarizing,
                                     seed=rc.seed, workers=rc.workers)
                metric = _order_metric(args.observable)
                value, stderr = {
                    "binder": (op.binder, op.binder_err),
                    "m_abs": (op.m_abs, op.m_abs_err),
                    "chi": (op.chi, op.chi_err),
                }[metric]
                r = (2.0 * p / 3.0) if args.depolarizing else p
                rates = (r, r)
            curves[L].append(value)
            writer.write(rc.row(L, metric, value, stderr,
                                p_flip=rates[0], p_meas=rates[1]))
            progress(f"{args.subcommand} L={L} p={p:g}: {metric}="
                     f"{value:.4f} +/- {stderr:.4f}")
    return curves


def _run_transition(args, parser, writer):
    rc = _Resolved(args, parser)
    if len(rc.sizes) < 2:
        parser.error("transition needs at least two sizes in --L")
    if len(rc.p_values) < 2:
        parser.error("transition needs a --p range with at least two points")
    if args.observable != "plog":
        if rc.d != 1:
            parser.error("order-parameter sweeps require --code rep1d")
        if args.p_meas is not None:
            parser.error("order-parameter sweeps draw measurement errors at "
                         "the flip rate; --p-meas is not supported")
    curves = _sweep_cells(rc, args, writer)
    crossing = xp.estimate_crossing(rc.p_values, curves)
    grid_err = 0.5 * (rc.p_values[1] - rc.p_values[0])
    L_top = max(rc.sizes)
    writer.write(rc.row(L_top, "p_cross",
                        crossing if crossing is not None else math.nan,
                        grid_err))
    progress(f"transition crossing: {crossing}")
    return 0


def _run_init(args, parser, writer):
    rc = _Resolved(args, parser)
    if len(rc.p_values) != 1:
        parser.error("init uses a single --p")
    if args.p_meas is not None:
        parser.error("init draws measurement errors at the flip rate; "
                     "--p-meas is not supported")
    p = rc.p_values[0]
    probe_times = None if args.probe_times is None else parse_times(args.probe_times)
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        curve = xp.decode_time_curve(rc.d, L, p, trials=rc.trials,
                                     probe_times=probe_times, config=dcfg,
                                     depolarizing=args.depolarizing,
                                     init_rate=args.init_rate, cap=args.cap,
                                     seed=rc.seed, workers=rc.workers)
        r = (2.0 * p / 3.0) if args.depolarizing else p
        pm = r
        for t, td in zip(curve.probe_times, curve.t_dec):
            writer.write(rc.row(L, f"t_dec@{t}", td, 0.0, p_flip=r, p_meas=pm))
        writer.write(rc.row(L, "plateau", curve.plateau, curve.band,
                            p_flip=r, p_meas=pm))
        writer.write(rc.row(L, "t_indep", float(curve.t_indep), 0.0,
                            p_flip=r, p_meas=pm))
        progress(f"init L={L}: t_indep={curve.t_indep} "
                 f"plateau={curve.plateau:.2f}")
    return 0


def _run_adversarial(args, parser, writer):
    rc = _Resolved(args, parser)
    if rc.d != 1:
        parser.error("the single-pair adversary is defined on rep1d")
    if args.observable == "bias":
        try:
            r_values = [int(tok) for tok in args.r_values.split(",")]
        except ValueError:
            parser.error(f"bad --r-values {args.r_values!r}")
        for p in rc.p_values:
            pts = xp.bias_scan(p, r_values, args.samples, L=rc.sizes[0],
                               seed=rc.seed)
            for r, pt in pts.items():
                err = math.sqrt(max(pt.p_shrink * (1 - pt.p_shrink), 1e-12)
                                / pt.n_samples)
                writer.write(rc.row(rc.sizes[0], f"p_shrink_r{r}",
                                    pt.p_shrink, err, p_flip=p,
                                    n_trials=pt.n_samples, Z=0, schedule="sync"))
                progress(f"bias p={p:g} r={r}: {pt.p_shrink:.4f} "
                         f"(expect {pt.expected_shrink:.4f}, z={pt.z_score:+.2f})")
        return 0
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        for p in rc.p_values:
            noise = BlockedSinglePairNoise(p, r0=args.r0,
                                           block_width=args.block_width)
            if args.observable == "plog":
                res = xp.estimate_plog(rc.d, L, noise, trials=rc.trials,
                                       rounds=args.rounds, config=dcfg,
                                       seed=rc.seed, workers=rc.workers)
                writer.write(rc.row(L, "p_log", res.p_log, res.stderr,
                                    p_flip=p))
                progress(f"adversarial L={L} p={p:g}: p_log={res.p_log:.4f}")
            else:
                if args.max_rounds is None:
                    parser.error("adversarial tmem requires --max-rounds")
                res = xp.estimate_tmem(rc.d, L, noise,
                                       max_rounds=args.max_rounds,
                                       trials=rc.trials,
                                       probe_interval=args.probe_interval,
                                       config=dcfg, seed=rc.seed,
                                       workers=rc.workers)
                writer.write(rc.row(L, "t_mem", res.t_mem, res.stderr,
                                    p_flip=p,
                                    censored=res.censored_fraction))
                progress(f"adversarial L={L} p={p:g}: t_mem={res.t_mem:.1f}")
    return 0


def _field_tmem(d, L, alpha, charged, p, max_rounds, interval, trials, seed):
    total, fails = 0.0, 0
    for k in range(trials):
        rng = trial_generator(seed, k)
        world = FieldWorld.fresh(d, L, alpha, charged=charged)
        noise = IIDNoise(p)
        t, failed_at = 0, None
        while t < max_rounds:
            n = min(interval, max_rounds - t)
            for _ in range(n):
                field_step(world, noise, rng)
            t += n
            F = world.code.E ^ world.code.C
            if d == 1:
                failed = 2 * int(F.sum()) >= L
            else:
                failed = (int(F[0, 0, :].sum()) % 2,
                          int(F[1, :, 0].sum()) % 2) != (0, 0)
            if failed:
                failed_at = t - n
                break
        if failed_at is None:
            total += max_rounds
        else:
            total += failed_at
            fails += 1
    if fails == 0:
        return math.inf, math.inf, 1.0
    t_mem = total / fails
    return t_mem, t_mem / math.sqrt(fails), (trials - fails) / trials


def _run_field(args, parser, writer):
    rc = _Resolved(args, parser)
    if args.alpha <= 0:
        parser.error(f"alpha must be positive, got {args.alpha}")
    if args.charged and rc.d != 1:
        parser.error("the charged field variant is defined on rep1d")
    label = f"field:{args.alpha:g}" + (":charged" if args.charged else "")
    for L in rc.sizes:
        interval = L if args.probe_interval is None else args.probe_interval
        for p in rc.p_values:
            t_mem, stderr, cens = _field_tmem(
                rc.d, L, args.alpha, args.charged, p, args.max_rounds,
                interval, rc.trials, rc.seed)
            writer.write(rc.row(L, "t_mem", t_mem, stderr, p_flip=p,
                                censored=cens, schedule=label, Z=0, v=1))
            progress(f"field L={L} p={p:g} alpha={args.alpha:g}: "
                     f"t_mem={t_mem:.1f} (censored {cens:.0%})")
    return 0


def _run_cantor(args, parser, writer):
    rc = _Resolved(args, parser, need_p=False)
    if rc.d != 1:
        parser.error("cantor patterns live on the rep1d chain")
    from .backend import get_kernels
    K = get_kernels()
    for L in rc.sizes:
        dcfg = rc.decoder_config(L)
        try:
            links = xp.cantor_string(L, args.q, args.min_segment)
        except ValueError as exc:
            parser.error(str(exc))
        rng = trial_generator(rc.seed, 0)
        E, C, sp, s, m = xp._fresh_arrays(1, L, dcfg.Z)
        E[links] = 1
        K.measure_ingest_1d(E, C, sp, s, np.zeros(L, dtype=np.uint8))
        cap = 8 * (L + dcfg.Z + 1)
        rounds, clean = xp._offline(K, 1, E, C, sp, s, m, dcfg.Z, dcfg,
                                    xp._draw_salts(rng, cap), cap)
        F = E ^ C
        nontrivial = 2 * int(F.sum()) >= L
        for metric, value in (("weight", float(len(links))),
                              ("decode_rounds", float(rounds)),
                              ("clean", float(clean)),
                              ("nontrivial", float(nontrivial))):
            writer.write(rc.row(L, metric, value, 0.0, n_trials=1))
        progress(f"cantor L={L} q={args.q}: weight={len(links)} "
                 f"clean={bool(clean)} nontrivial={nontrivial}")
    return 0


def _run_clusters(args, parser, writer):
    rc = _Resolved(args, parser)
    try:
        if args.w >= args.b:
            raise ValueError(f"need w < b, got w={args.w} b={args.b}")
        if args.n <= 1:
            raise ValueError(f"need n > 1, got n={args.n}")
        if args.levels < 1:
            raise ValueError(f"levels must be >= 1, got {args.levels}")
    except ValueError as exc:
        parser.error(str(exc))
    for L in rc.sizes:
        for p in rc.p_values:
            counts = np.zeros((rc.trials, args.levels + 1))
            for k in range(rc.trials):
                rng = trial_generator(rc.seed, k)
                pts = []
                for t in range(args.rounds):
                    flips = np.flatnonzero(rng.random((L,) * rc.d) < p)
                    for q in flips:
                        if rc.d == 1:
                            pts.append((t, int(q)))
                        else:
                            pts.append((t, int(q) // L, int(q) % L))
                levels = xp.cluster_decompose(
                    np.array(pts, dtype=np.int64).reshape(-1, rc.d + 1),
                    args.w, args.b, args.n, args.levels)
                counts[k] = [len(lv) for lv in levels]
            mean = counts.mean(axis=0)
            sem = (counts.std(axis=0, ddof=1) / math.sqrt(rc.trials)
                   if rc.trials > 1 else np.zeros(args.levels + 1))
            for k in range(args.levels + 1):
                writer.write(rc.row(L, f"survivors_k{k}", float(mean[k]),
                                    float(sem[k]), p_flip=p))
            progress(f"clusters L={L} p={p:g}: " +
                     " -> ".join(f"{v:.1f}" for v in mean))
    return 0


_DRIVERS = {
    "plog": _run_plog,
    "tmem": _run_tmem,
    "sweep": _run_sweep,
    "transition": _run_transition,
    "init": _run_init,
    "adversarial": _run_adversarial,
    "field": _run_field,
    "cantor": _run_cantor,
    "clusters": _run_clusters,
}


def run(args, parser) -> int:
    writer = RowWriter(args.out, args.format)
    try:
        return _DRIVERS[args.subcommand](args, parser, writer)
    except KeyboardInterrupt:
        progress("interrupted; rows written so far remain valid")
        return 130
    except (ValueError, OSError) as exc:
        progress(f"error: {exc}")
        return 1
    finally:
        writer.close()


def main(argv=None) -> int:
    parser = build_parser()
    args = parse_config(sys.argv[1:] if argv is None else argv, parser)
    return run(args, parser)


if __name__ == "__main__":
    sys.exit(main())
