"""Noise models: i.i.d phenomenological noise and adversarial single-pair noise.

Two families. `IIDNoise` flips every qubit link independently each round and
(separately) flips measurement outcomes; rates may be quoted directly or as a
depolarizing strength (2/3 of which lands in the tracked error sector).

`BlockedSinglePairNoise` is the p-bounded adversary: it watches the true
anyon positions of E xor C on a designated 1d strip of qubits (the whole
ring for d=1, the x-links of row y=0 for d=2) and, around the tracked
(leftmost, rightmost) anyon pair, creates mirror-symmetric nearest-neighbor
anyon pairs outside it -- each candidate pair independently with probability
p, the two sides of a mirror tuple firing together. If no pair of
separation > 2 exists it instead re-seeds a fresh pair of separation r0 with
probability p^r0. The strip may be partitioned into independent blocks;
candidate tuples whose flips would leave their block are dropped entirely.

The tuple geometry: with tracked anyons at (r_l, r_r), tuple n >= 1 flips
the single links r_l - 4n + 1 and r_r + 4n - 2. Flipping link q creates
anyons at sites {q, q+1}, so the new pairs' inner anyons sit at even
distances 4n - 2 from the tracked anyons -- never tied with the odd tracked
separation r, and exactly floor((r+2)/4) of them sit strictly inside r.
Shrink probability per round is therefore (1-p)^floor((r+2)/4) exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .code import CodeGeometry, CodeState, true_syndrome

__all__ = [
    "IIDNoise",
    "BlockedSinglePairNoise",
    "single_pair",
    "ReplayNoise",
    "NoiseLog",
    "strip_anyon_positions",
    "noise_site_pairs",
    "shrink_probability",
    "bias",
    "r_star",
]


def _link_shape(geom: CodeGeometry) -> tuple:
    return (geom.L,) if geom.d == 1 else (2, geom.L, geom.L)


def _site_shape(geom: CodeGeometry) -> tuple:
    return (geom.L,) if geom.d == 1 else (geom.L, geom.L)


# --------------------------------------------------------------- i.i.d ---


@dataclass(frozen=True)
class IIDNoise:
    """Independent qubit flips at p_flip and measurement flips at p_meas.

    p_meas = None means "equal strength" (same as p_flip). With
    depolarizing=True the quoted probabilities are depolarizing strengths
    and the simulated per-sector rates are 2/3 of them.
    """

    p_flip: float
    p_meas: float | None = None
    depolarizing: bool = False

    def __post_init__(self):
        pm = self.p_flip if self.p_meas is None else self.p_meas
        for name, val in (("p_flip", self.p_flip), ("p_meas", pm)):
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {val}")

    def _rate(self, p: float) -> float:
        return 2.0 * p / 3.0 if self.depolarizing else p

    @property
    def flip_rate(self) -> float:
        return self._rate(self.p_flip)

    @property
    def meas_rate(self) -> float:
        return self._rate(self.p_flip if self.p_meas is None else self.p_meas)

    def sample(self, code: CodeState, rng) -> np.ndarray:
        """Flip links in E; returns the flat indices of flipped links."""
        if self.flip_rate <= 0.0:
            return np.empty(0, dtype=np.int64)
        mask = rng.random(code.E.shape) < self.flip_rate
        code.E ^= mask.astype(np.uint8)
        return np.flatnonzero(mask)

    # bulk draws for the compiled multi-round kernels
    def draw_qubit_flips(self, geom: CodeGeometry, rounds: int, rng) -> np.ndarray:
        shape = (rounds,) + _link_shape(geom)
        if self.flip_rate <= 0.0:
            return np.zeros(shape, dtype=np.uint8)
        return (rng.random(shape) < self.flip_rate).astype(np.uint8)

    def draw_meas_flips(self, geom: CodeGeometry, rounds: int, rng) -> np.ndarray:
        shape = (rounds,) + _site_shape(geom)
        if self.meas_rate <= 0.0:
            return np.zeros(shape, dtype=np.uint8)
        return (rng.random(shape) < self.meas_rate).astype(np.uint8)


# --------------------------------------------------- single-pair family ---


def strip_anyon_positions(code: CodeState) -> np.ndarray:
    """Sorted x positions of anyons of E xor C on the noise strip.

    d=1: all anyon sites. d=2: anyon sites in row y=0 (the strip row).
    """
    par = true_syndrome(code) == -1
    if code.geom.d == 1:
        return np.flatnonzero(par)
    return np.flatnonzero(par[:, 0])


def noise_site_pairs(r_l: int, r_r: int, lo: int, hi: int) -> list[tuple[int, int]]:
    """Candidate (left, right) flip links for a tracked pair, block [lo, hi).

    Tuple n flips links (r_l - 4n + 1, r_r + 4n - 2); a tuple is kept only
    if both flips and the anyons they create stay inside the block.
    """
    out = []
    n = 1
    while True:
        ql = r_l - 4 * n + 1
        qr = r_r + 4 * n - 2
        if ql < lo or qr > hi - 2:  # created anyons {q, q+1} must stay inside
            break
        out.append((ql, qr))
        n += 1
    return out


def shrink_probability(r: int, p: float) -> float:
    """Exact P(r -> r-2) for one round of single-pair noise at v=infinity."""
    return (1.0 - p) ** ((r + 2) // 4)


def bias(r: int, p: float) -> float:
    """Walk bias b_r = 1 - 2(1-p)^floor((r+2)/4); positive means growth."""
    return 1.0 - 2.0 * shrink_probability(r, p)


def r_star(p: float) -> float:
    """Separation above which growth wins: 4 ln2 / ln(1/(1-p)) - 2."""
    return 4.0 * math.log(2.0) / math.log(1.0 / (1.0 - p)) - 2.0


@dataclass(frozen=True)
class BlockedSinglePairNoise:
    """The p-bounded single-pair adversary, optionally partitioned in blocks.

    block_width = None runs one block spanning the whole strip (the plain
    single-pair model). Measurement outcomes are noise-free under this
    adversary (meas_rate = 0).
    """

    p: float
    r0: int = 3
    block_width: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if self.r0 <= 2 or self.r0 % 2 == 0:
            raise ValueError(f"r0 must be an odd integer > 2, got {self.r0}")

    @property
    def meas_rate(self) -> float:
        return 0.0

    def blocks(self, L: int) -> list[tuple[int, int]]:
        """Half-open link intervals [lo, hi); the last absorbs any remainder."""
        W = L if self.block_width is None else self.block_width
        if W > L:
            raise ValueError(f"block_width {W} exceeds strip length {L}")
        if W < self.r0 + 2:
            raise ValueError(
                f"block_width {W} cannot hold a seeded pair of separation {self.r0}")
        count = max(1, L // W)
        edges = [k * W for k in range(count)] + [L]
        return [(edges[k], edges[k + 1]) for k in range(count)]

    def sample(self, code: CodeState, rng) -> np.ndarray:
        """One adversarial round; returns flat indices of flipped links."""
        L = code.geom.L
        anyons = strip_anyon_positions(code)
        flipped: list[int] = []
        for lo, hi in self.blocks(L):
            inside = anyons[(anyons >= lo) & (anyons < hi)]
            if len(inside) >= 2 and inside[-1] - inside[0] > 2:
                for ql, qr in noise_site_pairs(int(inside[0]), int(inside[-1]), lo, hi):
                    if rng.random() < self.p:
                        flipped += [ql, qr]
            elif rng.random() < self.p ** self.r0:
                center = lo + (hi - lo) // 2
                start = center - self.r0 // 2
                flipped += list(range(start, start + self.r0))
        self._apply(code, flipped)
        if code.geom.d == 1:
            return np.array(sorted(flipped), dtype=np.int64)
        # flat indices into E of shape (2, L, L): axis-0 links of row y=0
        return np.array(sorted(q * L for q in flipped), dtype=np.int64)

    def _apply(self, code: CodeState, links: list[int]) -> None:
        if code.geom.d == 1:
            for q in links:
                code.E[q] ^= 1
        else:
            for q in links:
                code.E[0, q, 0] ^= 1

    def draw_meas_flips(self, geom: CodeGeometry, rounds: int, rng) -> np.ndarray:
        return np.zeros((rounds,) + _site_shape(geom), dtype=np.uint8)


def single_pair(p: float, r0: int = 3) -> BlockedSinglePairNoise:
    """The plain single-pair adversary: one block spanning the strip."""
    return BlockedSinglePairNoise(p=p, r0=r0, block_width=None)


# ------------------------------------------------------- dump / replay ---


class NoiseLog:
    """Replayable per-round record of noise events.

    Events are (round, kind, locations) with kind in {"flip", "meas"} and
    locations flat indices (into E for flips, into the site lattice for
    measurement flips). Serialized one JSON object per line.
    """

    def __init__(self, events: list[dict] | None = None):
        self.events = events if events is not None else []

    def record(self, t: int, kind: str, locations) -> None:
        locs = [int(q) for q in np.atleast_1d(locations)]
        if locs:
            self.events.append({"round": int(t), "kind": kind, "locations": locs})

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(json.dumps(ev) + "\n")

    @classmethod
    def load(cls, path) -> "NoiseLog":
        events = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return cls(events)

    def locations_for(self, t: int, kind: str) -> list[int]:
        out: list[int] = []
        for ev in self.events:
            if ev["round"] == t and ev["kind"] == kind:
                out += ev["locations"]
        return out


class ReplayNoise:
    """Noise model that replays a recorded log, one round per sample call."""

    def __init__(self, log: NoiseLog):
        self.log = log
        self._t = 0

    @property
    def meas_rate(self) -> float:
        return 0.0

    def reset(self) -> None:
        self._t = 0

    def sample(self, code: CodeState, rng=None) -> np.ndarray:
        locs = self.log.locations_for(self._t, "flip")
        flat = code.E.reshape(-1)
        for q in locs:
            flat[q] ^= 1
        self._t += 1
        return np.array(locs, dtype=np.int64)
