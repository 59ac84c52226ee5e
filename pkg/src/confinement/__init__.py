"""Self-correcting-memory toolkit: a local message-passing decoder automaton,
adversarial and iid noise models, asynchronous schedules, a power-law field
baseline, and Monte Carlo experiment drivers.
"""
from .backend import active_backend_name, get_kernels, set_backend
from .code import (
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
from .automaton import (
    ControlState,
    DecoderConfig,
    World,
    default_buffer_height,
)
from .noise import (
    BlockedSinglePairNoise,
    IIDNoise,
    NoiseLog,
    ReplayNoise,
    bias,
    noise_site_pairs,
    r_star,
    shrink_probability,
    single_pair,
)
from .schedule import (
    MarchingSoldiersEngine,
    PoissonEngine,
    ScheduleSpec,
    SynchronousEngine,
    UniformWindowEngine,
    fire_column,
    is_quiet,
    make_engine,
    next_events,
    parse_schedule,
    run_until_quiet,
)
from .fieldsim import FieldWorld, compute_forces, field_step, fuse, minimum_image, phi
from .experiments import (
    BiasPoint,
    DecodeTimeCurve,
    OrderParams,
    PlogResult,
    TmemResult,
    TrialRecord,
    bias_scan,
    cantor_string,
    cantor_weight,
    cluster_decompose,
    decode_time_curve,
    erode_burst,
    estimate_crossing,
    estimate_plog,
    estimate_tmem,
    fit_collapse,
    fit_linear_vs_quadratic,
    offline_decode,
    order_params,
    scaling_collapse,
    t_indep_from,
    weighted_linear_root,
)
from .rng import spawn_generator, trial_generator

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # backend
    "active_backend_name", "get_kernels", "set_backend",
    # code
    "CodeGeometry", "CodeState", "apply_correction", "logical_class",
    "majority_vote_decode", "make_code", "measure_syndromes",
    "syndrome_deltas", "true_syndrome",
    # automaton
    "ControlState", "DecoderConfig", "World", "default_buffer_height",
    # noise
    "BlockedSinglePairNoise", "IIDNoise", "NoiseLog", "ReplayNoise",
    "bias", "noise_site_pairs", "r_star", "shrink_probability", "single_pair",
    # schedule
    "MarchingSoldiersEngine", "PoissonEngine", "ScheduleSpec",
    "SynchronousEngine", "UniformWindowEngine", "fire_column", "is_quiet",
    "make_engine", "next_events", "parse_schedule", "run_until_quiet",
    # fieldsim
    "FieldWorld", "compute_forces", "field_step", "fuse", "minimum_image", "phi",
    # experiments
    "BiasPoint", "DecodeTimeCurve", "OrderParams", "PlogResult", "TmemResult",
    "TrialRecord", "bias_scan", "cantor_string", "cantor_weight",
    "cluster_decompose", "decode_time_curve", "erode_burst",
    "estimate_crossing", "estimate_plog", "estimate_tmem", "fit_collapse",
    "fit_linear_vs_quadratic", "offline_decode", "order_params",
    "scaling_collapse", "t_indep_from", "weighted_linear_root",
    # rng
    "spawn_generator", "trial_generator",
]
