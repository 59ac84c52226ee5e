"""Code layer: qubit geometry, Pauli frame, syndromes, logical readout.

Supported codes: the ring repetition code (d=1, qubits on the L links of a
Z_L ring, stabilizers on sites) and the toric code bit-flip sector (d=2,
qubits on the 2L^2 links of Z_L^2, stabilizers on sites). A single error
sector is simulated; errors and corrections are bit arrays over links.

Corrections live in their own frame C and are never merged into the error
E. apply_correction co-flips the stale syndrome record sigma_prev at the
link's endpoints, so a committed correction never shows up as a syndrome
change in the next round.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CodeGeometry:
    """Lattice shape for one code family."""

    d: int
    L: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.L < 3:
            raise ValueError(f"L must be >= 3, got {self.L}")

    @property
    def n_sites(self) -> int:
        return self.L ** self.d

    @property
    def n_links(self) -> int:
        return self.d * self.L ** self.d

    def link_endpoints(self, link) -> tuple:
        """Stabilizer sites adjacent to a link.

        d=1: link i joins sites (i, i+1 mod L).
        d=2: link (axis, i, j); axis 0 joins (i,j)-(i+1,j), axis 1 joins (i,j)-(i,j+1).
        """
        L = self.L
        if self.d == 1:
            i = int(link)
            return (i, (i + 1) % L)
        axis, i, j = link
        if axis == 0:
            return ((i, j), ((i + 1) % L, j))
        return ((i, j), (i, (j + 1) % L))


@dataclass
class CodeState:
    """Error frame E, correction frame C, and syndrome records (all per-sector bits)."""

    geom: CodeGeometry
    E: np.ndarray = field(default=None)  # uint8 links
    C: np.ndarray = field(default=None)
    sigma_prev: np.ndarray = field(default=None)  # int8 sites, +-1
    sigma_meas: np.ndarray = field(default=None)
    initial_logical: tuple = field(default=None)

    def __post_init__(self):
        g = self.geom
        link_shape = (g.L,) if g.d == 1 else (2, g.L, g.L)
        site_shape = (g.L,) if g.d == 1 else (g.L, g.L)
        if self.E is None:
            self.E = np.zeros(link_shape, dtype=np.uint8)
        if self.C is None:
            self.C = np.zeros(link_shape, dtype=np.uint8)
        if self.sigma_prev is None:
            self.sigma_prev = np.ones(site_shape, dtype=np.int8)
        if self.sigma_meas is None:
            self.sigma_meas = np.ones(site_shape, dtype=np.int8)
        if self.initial_logical is None:
            self.initial_logical = logical_class(self)

    def copy(self) -> "CodeState":
        return CodeState(
            geom=self.geom,
            E=self.E.copy(),
            C=self.C.copy(),
            sigma_prev=self.sigma_prev.copy(),
            sigma_meas=self.sigma_meas.copy(),
            initial_logical=self.initial_logical,
        )


def make_code(d: int, L: int, init_rate: float = 0.0, rng=None) -> CodeState:
    """Fresh code state; init_rate > 0 seeds E with i.i.d. flips at that rate."""
    geom = CodeGeometry(d=d, L=L)
    state = CodeState(geom=geom)
    if init_rate > 0.0:
        if rng is None:
            raise ValueError("init_rate > 0 requires an rng")
        state.E ^= (rng.random(state.E.shape) < init_rate).astype(np.uint8)
        state.initial_logical = logical_class(state)
    return state


def true_syndrome(state: CodeState) -> np.ndarray:
    """Noiseless syndrome of E xor C: -1 at sites with odd incident flip parity."""
    g = state.geom
    F = state.E ^ state.C
    if g.d == 1:
        par = F ^ np.roll(F, 1)  # links (r-1, r) incident to site r
        return np.where(par == 1, -1, 1).astype(np.int8)
    par = F[0] ^ np.roll(F[0], 1, axis=0) ^ F[1] ^ np.roll(F[1], 1, axis=1)
    return np.where(par == 1, -1, 1).astype(np.int8)


def measure_syndromes(state: CodeState, p_meas: float, rng=None,
                      meas_flips: np.ndarray = None) -> np.ndarray:
    """Measure all stabilizers of E xor C with i.i.d. outcome flips at p_meas.

    An explicit meas_flips mask (uint8 per site) overrides rng sampling; the
    result is stored as sigma_meas and returned.
    """
    sigma = true_syndrome(state)
    if meas_flips is not None:
        sigma = np.where(meas_flips == 1, -sigma, sigma)
    elif p_meas > 0.0:
        flips = rng.random(sigma.shape) < p_meas
        sigma = np.where(flips, -sigma, sigma)
    state.sigma_meas = sigma.astype(np.int8)
    return state.sigma_meas


def syndrome_deltas(state: CodeState) -> np.ndarray:
    """Sites where sigma_meas differs from sigma_prev; advances sigma_prev."""
    delta = state.sigma_meas != state.sigma_prev
    state.sigma_prev = state.sigma_meas.copy()
    return delta


def apply_correction(state: CodeState, link) -> None:
    """Flip one correction bit and co-flip sigma_prev at the link endpoints."""
    g = state.geom
    if g.d == 1:
        i = int(link)
        state.C[i] ^= 1
        a, b = g.link_endpoints(i)
        state.sigma_prev[a] = -state.sigma_prev[a]
        state.sigma_prev[b] = -state.sigma_prev[b]
    else:
        axis, i, j = link
        state.C[axis, i, j] ^= 1
        a, b = g.link_endpoints(link)
        state.sigma_prev[a] = -state.sigma_prev[a]
        state.sigma_prev[b] = -state.sigma_prev[b]


def logical_class(state: CodeState) -> tuple:
    """Homology class of E xor C, as cut-crossing parities.

    d=1: winding parity around the ring (one bit). d=2: parities of flips
    crossing a fixed vertical and horizontal cut (two bits). Well defined as
    a homology invariant only when the syndrome of E xor C is trivial.
    """
    g = state.geom
    F = state.E ^ state.C
    if g.d == 1:
        return (int(F[0]),)
    return (int(F[0, 0, :].sum() % 2), int(F[1, :, 0].sum() % 2))


def majority_vote_decode(state: CodeState) -> tuple:
    """Global majority vote for d=1: flip the minority domain of E xor C.

    Returns the logical class of the restored configuration: nontrivial when
    the flipped domain comprises >= ceil(L/2) spins.
    """
    g = state.geom
    if g.d != 1:
        raise ValueError("majority vote readout is defined for d=1 only")
    weight = int((state.E ^ state.C).sum())
    return (1,) if 2 * weight >= g.L else (0,)
