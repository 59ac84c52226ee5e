"""The control-lattice automaton: buffered defect state plus decoder ops.

The decoder runs on a control lattice L^d x {0..Z}: each code site carries a
column of buffer layers, layer Z being the back wall. Syndrome *changes*
enter as defects at z = 0, a conveyor drifts everything toward the wall, and
message passing lets defects sense each other's direction so feedback can
move them pairwise together. Confined (correlated) defects fuse quickly;
only defects that survive long enough to ride the conveyor reach the wall,
where a d-dimensional copy of the same dynamics cleans up what remains.

`World` bundles a code state with the control state and exposes one method
per phase of the synchronous cycle, plus `step` for the whole cycle. Hot
loops live in the kernel backends; this module is the readable orchestration
layer and the substrate for the asynchronous schedules.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .code import CodeState, make_code
from .kernels_numpy import INF

TIE_MODES = {"priority": 0, "hashed": 1}


def default_buffer_height(L: int) -> int:
    """Smallest Z with (3/2)^Z >= L (exact integer arithmetic)."""
    Z = 0
    while 3 ** Z < L * 2 ** Z:
        Z += 1
    return Z


@dataclass
class DecoderConfig:
    """Decoder parameters; None fields resolve against the code size."""
    v: int = 3                         # message sub-steps per cycle
    m_max: int | None = None           # message range cutoff (default L)
    Z: int | None = None               # buffer height (default ~log_1.5 L)
    modified_rules: bool = False       # double drift + post-move +x hop
    greedy_adjacent_fuse: bool = False
    tie_break: str = "hashed"          # or "priority"

    def resolve(self, L: int) -> "DecoderConfig":
        if self.tie_break not in TIE_MODES:
            raise ValueError(f"tie_break must be one of {sorted(TIE_MODES)}")
        return DecoderConfig(
            v=self.v,
            m_max=L if self.m_max is None else self.m_max,
            Z=default_buffer_height(L) if self.Z is None else self.Z,
            modified_rules=self.modified_rules,
            greedy_adjacent_fuse=self.greedy_adjacent_fuse,
            tie_break=self.tie_break,
        )

    @property
    def tie_mode(self) -> int:
        return TIE_MODES[self.tie_break]


@dataclass
class ControlState:
    """Defect field s (+1/-1), message field m (slot-major), cooldown c."""
    d: int
    L: int
    Z: int
    s: np.ndarray = field(repr=False, default=None)
    m: np.ndarray = field(repr=False, default=None)
    c: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        shape = (self.L,) * self.d + (self.Z + 1,)
        n_slots = 2 * self.d + 2
        if self.s is None:
            self.s = np.ones(shape, dtype=np.int8)
        if self.m is None:
            self.m = np.full((n_slots,) + shape, INF, dtype=np.int32)
        if self.c is None:
            self.c = np.zeros(shape, dtype=np.uint8)

    def copy(self) -> "ControlState":
        return ControlState(self.d, self.L, self.Z, self.s.copy(),
                            self.m.copy(), self.c.copy())

    @property
    def n_defects(self) -> int:
        return int((self.s == -1).sum())

    def defect_sites(self) -> np.ndarray:
        return np.argwhere(self.s == -1)


class World:
    """A code state coupled to its control lattice.

    All randomness (measurement flips, tie salts) is drawn here from the
    owned generator, so the compiled and pure-numpy backends are
    interchangeable bit-for-bit.
    """

    def __init__(self, code: CodeState, config: DecoderConfig | None = None,
                 rng: np.random.Generator | None = None):
        cfg = (config or DecoderConfig()).resolve(code.geom.L)
        self.code = code
        self.config = cfg
        self.control = ControlState(code.geom.d, code.geom.L, cfg.Z)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.t = 0

    # -- construction helpers ------------------------------------------

    @classmethod
    def fresh(cls, d: int, L: int, config: DecoderConfig | None = None,
              seed: int = 0) -> "World":
        rng = np.random.default_rng(seed)
        return cls(make_code(d, L), config, rng)

    # -- phase ops (synchronous semantics, no cooldown) ----------------

    def _k(self):
        return backend.get_kernels()

    def draw_salt(self) -> np.uint64:
        return self.rng.integers(0, 2 ** 63, dtype=np.uint64)

    def draw_meas_flips(self, p_meas: float) -> np.ndarray:
        shape = (self.control.L,) * self.control.d
        if p_meas <= 0.0:
            return np.zeros(shape, dtype=np.uint8)
        return (self.rng.random(shape) < p_meas).astype(np.uint8)

    def measure_and_ingest(self, meas_flips: np.ndarray) -> None:
        k = self._k()
        fn = k.measure_ingest_1d if self.control.d == 1 else k.measure_ingest_2d
        fn(self.code.E, self.code.C, self.code.sigma_prev, self.control.s,
           meas_flips)

    def vertical_drift(self) -> None:
        k = self._k()
        fn = k.drift_1d if self.control.d == 1 else k.drift_2d
        fn(self.control.s, self.control.m, self.control.Z,
           self.config.modified_rules)

    def source_messages(self) -> None:
        k = self._k()
        fn = k.source_1d if self.control.d == 1 else k.source_2d
        fn(self.control.s, self.control.m, self.control.Z)

    def propagate_messages(self, sweeps: int = 1) -> None:
        k = self._k()
        fn = k.relax_1d if self.control.d == 1 else k.relax_2d
        self.control.m[:] = fn(self.control.s, self.control.m,
                               self.control.Z, self.config.m_max, sweeps)

    def apply_feedback(self, tie_salt: np.uint64 | int | None = None) -> None:
        if tie_salt is None:
            tie_salt = self.draw_salt()
        k = self._k()
        fn = k.feedback_1d if self.control.d == 1 else k.feedback_2d
        fn(self.control.s, self.control.m, self.code.C, self.code.sigma_prev,
           self.control.Z, self.config.modified_rules,
           self.config.greedy_adjacent_fuse, self.config.tie_mode,
           np.uint64(tie_salt), False,
           np.zeros((1,) * self.control.d + (1,), dtype=np.uint8))

    # -- full synchronous cycle ----------------------------------------

    def step(self, p_meas: float = 0.0,
             meas_flips: np.ndarray | None = None,
             tie_salt: np.uint64 | int | None = None) -> None:
        """One decoder cycle: measure/ingest, drift, message, feedback.

        Qubit noise is the caller's business and precedes this call.
        """
        if meas_flips is None:
            meas_flips = self.draw_meas_flips(p_meas)
        salt = self.draw_salt() if tie_salt is None else np.uint64(tie_salt)
        k = self._k()
        fn = k.sync_round_1d if self.control.d == 1 else k.sync_round_2d
        fn(self.code.E, self.code.C, self.code.sigma_prev, self.control.s,
           self.control.m, meas_flips, self.control.Z, self.config.v,
           self.config.m_max, self.config.modified_rules,
           self.config.greedy_adjacent_fuse, self.config.tie_mode, salt)
        self.t += 1

    # -- inspection -----------------------------------------------------

    def snapshot(self) -> str:
        """Small text rendering of the defect field (debugging aid)."""
        s = self.control.s
        lines = [f"t={self.t} d={self.control.d} L={self.control.L} "
                 f"Z={self.control.Z} defects={self.control.n_defects}"]
        if self.control.d == 1:
            for z in range(self.control.Z, -1, -1):
                row = "".join("X" if s[r, z] == -1 else "."
                              for r in range(self.control.L))
                tag = "wall" if z == self.control.Z else f"z={z}"
                lines.append(f"{tag:>5} {row}")
        else:
            for z in range(self.control.Z + 1):
                if (s[:, :, z] == -1).any():
                    tag = "wall" if z == self.control.Z else f"z={z}"
                    lines.append(f"[{tag}]")
                    for i in range(self.control.L):
                        lines.append("      " + "".join(
                            "X" if s[i, j, z] == -1 else "."
                            for j in range(self.control.L)))
        return "\n".join(lines)
