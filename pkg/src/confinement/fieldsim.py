"""Field-based baseline decoder: instantaneous power-law pairwise attraction.

Anyons on the torus Z_L^d feel F_i = q_i * sum_j q_j (r_j - r_i)/|r_j - r_i|^(alpha+1)
(minimum-image displacements, single closest copy) and every anyon hops one
lattice site along the signed unit direction of largest overlap with its
force, simultaneously from a pre-move force snapshot. The neutral variant
gives every anyon charge +1 with Z2 fusion (any coincident pair
annihilates); the charged variant conserves a U(1) charge, so only
opposite charges cancel and same-charge anyons stack into larger charges.

The underlying code state keeps the correction bookkeeping: every traversed
link flips the correction frame C, and a pair that crosses head-on through
one link fuses there (one link flip), or -- if same-signed charges forbid
annihilation -- the two moves block each other and nobody moves.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .code import CodeState, make_code, true_syndrome

__all__ = [
    "FieldWorld",
    "minimum_image",
    "compute_forces",
    "phi",
    "fuse",
    "field_step",
]

# global move priority: +x, -x, +y, -y (matches the decoder's declared order)
_DIRECTIONS_1D = ((1,), (-1,))
_DIRECTIONS_2D = ((1, 0), (-1, 0), (0, 1), (0, -1))


def minimum_image(delta: np.ndarray, L: int) -> np.ndarray:
    """Signed displacement folded to (-L/2, L/2] componentwise."""
    d = np.mod(delta, L)
    return np.where(d > L / 2.0, d - L, d)


@dataclass
class FieldWorld:
    """Tracked anyons (positions + integer charges) over a code state."""

    code: CodeState
    alpha: float
    charged: bool = False
    positions: np.ndarray = field(default=None)  # (n, d) int
    charges: np.ndarray = field(default=None)    # (n,) int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.positions is None:
            self.positions = np.zeros((0, self.code.geom.d), dtype=np.int64)
        if self.charges is None:
            self.charges = np.ones(len(self.positions), dtype=np.int64)

    @classmethod
    def fresh(cls, d: int, L: int, alpha: float, charged: bool = False) -> "FieldWorld":
        return cls(make_code(d, L), alpha, charged)

    @classmethod
    def from_code(cls, code: CodeState, alpha: float, charged: bool = False) -> "FieldWorld":
        """Anyons read off the E xor C syndrome.

        Neutral: all charge +1. Charged d=1: domain-wall orientation fixes
        the sign (+1 where the flipped region starts, -1 where it ends), so
        total charge is zero; charged d=2 has no canonical assignment from
        a bare syndrome and is rejected.
        """
        g = code.geom
        par = true_syndrome(code) == -1
        if g.d == 1:
            sites = np.flatnonzero(par)
            positions = sites[:, None].astype(np.int64)
            if charged:
                F = code.E ^ code.C
                charges = np.array([1 if F[s] == 1 else -1 for s in sites],
                                   dtype=np.int64)
            else:
                charges = np.ones(len(sites), dtype=np.int64)
        else:
            if charged:
                raise ValueError("charged anyons from a bare d=2 syndrome are ambiguous")
            positions = np.argwhere(par).astype(np.int64)
            charges = np.ones(len(positions), dtype=np.int64)
        return cls(code, alpha, charged, positions, charges)

    @property
    def n_anyons(self) -> int:
        return len(self.positions)

    @property
    def total_charge(self) -> int:
        return int(self.charges.sum())


def compute_forces(world: FieldWorld) -> np.ndarray:
    """Exact pairwise power-law forces, (n, d) array; n < 2 gives zeros.

    Neutral: every pair attracts, F_i = sum_j (r_j - r_i)/|r_j - r_i|^(a+1).
    Charged: electric sign convention -- opposite charges attract, like
    charges repel -- F_i = q_i sum_j q_j (r_i - r_j)/|r_i - r_j|^(a+1),
    so a created +/- pair is pulled back together and can annihilate.
    """
    pos = world.positions.astype(np.float64)
    n, d = pos.shape
    forces = np.zeros((n, d))
    if n < 2:
        return forces
    L = world.code.geom.L
    q = world.charges.astype(np.float64)
    sign = -1.0 if world.charged else 1.0
    for i in range(n):
        delta = minimum_image(pos - pos[i], L)       # r_j - r_i
        dist = np.sqrt((delta ** 2).sum(axis=1))
        dist[i] = np.inf
        w = sign * q[i] * q / dist ** (world.alpha + 1.0)
        w[i] = 0.0
        forces[i] = (w[:, None] * delta).sum(axis=0)
    return forces


def phi(v: np.ndarray) -> tuple | None:
    """Signed unit lattice direction of largest dot product with v.

    Ties resolve by the global priority order (+x, -x, +y, -y); an exactly
    zero vector means "no move" (None).
    """
    v = np.asarray(v, dtype=np.float64)
    dirs = _DIRECTIONS_1D if v.shape[0] == 1 else _DIRECTIONS_2D
    dots = [float(np.dot(v, u)) for u in dirs]
    best = max(dots)
    if best <= 0.0 and all(x == 0.0 for x in dots):
        return None
    return dirs[int(np.argmax(dots))]  # argmax keeps the priority order on ties


def fuse(world: FieldWorld) -> None:
    """Collapse coincident anyons: Z2 parity (neutral) or charge sum (charged)."""
    if world.n_anyons == 0:
        return
    groups: dict[tuple, int] = {}
    for pos, q in zip(world.positions, world.charges):
        key = tuple(int(x) for x in pos)
        groups[key] = groups.get(key, 0) + int(q)
    keep_pos, keep_q = [], []
    for key, total in groups.items():
        net = (total % 2) if not world.charged else total
        if net != 0:
            keep_pos.append(key)
            keep_q.append(net)
    world.positions = np.array(keep_pos, dtype=np.int64).reshape(-1, world.code.geom.d)
    world.charges = np.array(keep_q, dtype=np.int64)


def _traversed_link(geom, pos: tuple, step: tuple):
    """(link, canonical orientation key) for a unit hop from pos."""
    L = geom.L
    if geom.d == 1:
        (r,), (dx,) = pos, step
        link = r if dx == 1 else (r - 1) % L
        return link, dx
    (i, j), (dx, dy) = pos, step
    if dx != 0:
        link = (0, i, j) if dx == 1 else (0, (i - 1) % L, j)
        return link, dx
    link = (1, i, j) if dy == 1 else (1, i, (j - 1) % L)
    return link, dy


def _flip_link(code: CodeState, link) -> None:
    code.C[link] ^= 1


def apply_noise(world: FieldWorld, noise, rng) -> None:
    """Apply a qubit-noise round and track the created anyon pairs."""
    flipped = noise.sample(world.code, rng)
    if len(flipped) == 0:
        return
    g = world.code.geom
    L = g.L
    new_pos, new_q = [], []
    for q in np.atleast_1d(flipped):
        q = int(q)
        if g.d == 1:
            a, b = (q,), ((q + 1) % L,)
        else:
            axis, i, j = q // (L * L), (q // L) % L, q % L
            if axis == 0:
                a, b = (i, j), ((i + 1) % L, j)
            else:
                a, b = (i, j), (i, (j + 1) % L)
        new_pos += [a, b]
        new_q += [-1, 1] if world.charged else [1, 1]
    world.positions = np.vstack([world.positions,
                                 np.array(new_pos, dtype=np.int64)])
    world.charges = np.concatenate([world.charges,
                                    np.array(new_q, dtype=np.int64)])


def field_step(world: FieldWorld, noise=None, rng=None) -> None:
    """One decoder round: noise, fuse, snapshot forces, move, fuse.

    Moves are simultaneous from the pre-move snapshot. A pair crossing one
    link head-on fuses on that link when its charges cancel (single link
    flip); same-charge crossers block each other and stay put.
    """
    if noise is not None:
        apply_noise(world, noise, rng)
    fuse(world)
    if world.n_anyons < 2:
        return
    forces = compute_forces(world)
    g = world.code.geom
    moves = [phi(forces[i]) for i in range(world.n_anyons)]

    # head-on crossings: a link has two endpoint sites, and after fusion each
    # site holds at most one anyon, so at most two movers share a link and a
    # shared link always means a head-on pair.
    by_link: dict = {}
    for i, step in enumerate(moves):
        if step is None:
            continue
        link, orient = _traversed_link(g, tuple(world.positions[i]), step)
        by_link.setdefault(link, []).append((i, orient))
    remove = set()
    blocked = set()
    for link, users in by_link.items():
        if len(users) != 2:
            continue
        i, j = users[0][0], users[1][0]
        qi, qj = int(world.charges[i]), int(world.charges[j])
        if not world.charged:
            _flip_link(world.code, link)
            remove.update((i, j))
        elif qi * qj < 0:
            # annihilate min(|qi|,|qj|) +/- pairs across the link; the
            # correction frame tracks the Z2 shadow, so flip on odd count
            k = min(abs(qi), abs(qj))
            if k % 2 == 1:
                _flip_link(world.code, link)
            if qi + qj == 0:
                remove.update((i, j))
            else:
                small, big = (i, j) if abs(qi) < abs(qj) else (j, i)
                remove.add(small)
                world.charges[big] = qi + qj
                blocked.add(big)
        else:
            blocked.update((i, j))  # like charges cannot pass through each other

    for i, step in enumerate(moves):
        if step is None or i in remove or i in blocked:
            continue
        if world.charges[i] % 2 != 0:
            link, _ = _traversed_link(g, tuple(world.positions[i]), step)
            _flip_link(world.code, link)
        world.positions[i] = (world.positions[i] + np.array(step)) % g.L
    if remove:
        keep = np.array([i for i in range(world.n_anyons) if i not in remove],
                        dtype=np.int64)
        world.positions = world.positions[keep].reshape(-1, g.d)
        world.charges = world.charges[keep]
    fuse(world)
