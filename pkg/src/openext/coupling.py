"""Coupling channels and the finest split into non-interacting subsystems.

The singular value decomposition of the coupling block Gamma defines
the channels: unit vectors g_q in H1 and g'_q in H2 with
Gamma = sum_q sqrt(gamma_q) |g_q><g'_q|.  Channels whose orbits touch
belong to the same dynamical component; the connected components of
that contact graph give the finest decomposition of the system into
parts that evolve independently and split the observable space
("s-invariant": the component projectors commute with both the
frequency operator and the observable projection).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import BlockPartition, ConservativeSystem
from .numerics import (
    DEFAULT_TOLERANCES,
    Subspace,
    ToleranceConfig,
    max_abs,
    orthonormal_basis,
    svd,
)
from .decomposition import _block_frame, _embed, coupled_parts, orbit
from .extension import kernel_eval

__all__ = [
    "ChannelSet",
    "channels",
    "coupling_matrix",
    "is_s_invariant",
    "SInvariantDecomposition",
    "canonical_decomposition",
    "DecouplingReport",
    "decoupling_report",
]


@dataclass(frozen=True)
class ChannelSet:
    """Rank-one channels of the coupling block.

    gammas are the eigenvalues of Gamma Gamma^H in descending order; the
    columns of g and g_prime are the corresponding unit vectors in H1
    and H2.  Channel q carries coupling strength sqrt(gamma_q):
    Gamma^H g_q = sqrt(gamma_q) g'_q.  degenerate_groups lists channel
    indices whose strengths coincide within clustering tolerance; inside
    such a group the individual vectors are a basis choice, only their
    span is canonical.
    """

    rank: int
    gammas: tuple[float, ...]
    g: np.ndarray = field(repr=False)
    g_prime: np.ndarray = field(repr=False)
    degenerate_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.g.shape[1] != self.rank or self.g_prime.shape[1] != self.rank:
            raise ValidationError("channel vector count must equal the rank")
        if len(self.gammas) != self.rank:
            raise ValidationError("one strength per channel required")


def channels(system: ConservativeSystem, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ChannelSet:
    """Extract the coupling channels from the SVD of the coupling block."""
    gamma = system.coupling
    if gamma.size == 0 or max_abs(gamma) == 0.0:
        return ChannelSet(
            0,
            (),
            np.zeros((system.n1, 0), dtype=np.complex128),
            np.zeros((system.n2, 0), dtype=np.complex128),
        )
    left, sigma, right_h = svd(gamma, tol)
    rank = int(np.count_nonzero(sigma > tol.tau_rank * sigma[0]))
    gammas = tuple(float(s) ** 2 for s in sigma[:rank])
    groups = []
    start = 0
    for q in range(1, rank + 1):
        if q == rank or gammas[q - 1] - gammas[q] > tol.tau_eig_cluster * max(gammas[0], 1e-300):
            if q - start > 1:
                groups.append(tuple(range(start, q)))
            start = q
    return ChannelSet(
        rank,
        gammas,
        np.ascontiguousarray(left[:, :rank]),
        np.ascontiguousarray(right_h[:rank].conj().T),
        tuple(groups),
    )


def coupling_matrix(
    system: ConservativeSystem,
    partition1: BlockPartition,
    partition2: BlockPartition,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Integer matrix of coupling ranks between partition blocks.

    Entry (a, b) is the numerical rank of the compression of the
    coupling block to the a-th observable part and b-th hidden part,
    measured against the largest singular value of the whole coupling.
    A zero row or column marks a part that no channel reaches.
    """
    if partition1.side != 1 or partition2.side != 2:
        raise ValidationError("coupling_matrix needs an observable-side and a hidden-side partition")
    if partition1.ambient_dim != system.n1 or partition2.ambient_dim != system.n2:
        raise ValidationError("partition ambient dims do not match the system blocks")
    gamma = system.coupling
    scale = float(np.linalg.norm(gamma, 2)) if gamma.size else 0.0
    out = np.zeros((len(partition1.parts), len(partition2.parts)), dtype=np.int64)
    for a, pa in enumerate(partition1.parts):
        for b, pb in enumerate(partition2.parts):
            block = pa.frame.conj().T @ gamma @ pb.frame
            if block.size == 0 or scale == 0.0:
                continue
            s = np.linalg.svd(block, compute_uv=False)
            out[a, b] = int(np.count_nonzero(s > tol.tau_rank * scale))
    return out


def is_s_invariant(
    system: ConservativeSystem,
    h_sub: Subspace,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[bool, tuple[float, float]]:
    """Does the projector onto h_sub commute with omega and with P1?

    Returns (verdict, (||[pi, omega]||, ||[pi, P1]||)); the first
    residual is compared against tau_residual * ||omega||, the second
    against tau_residual (P1 has norm one).
    """
    n = system.dim
    if h_sub.ambient_dim != n:
        raise ValidationError("subspace must live in the full space")
    pi = h_sub.frame @ h_sub.frame.conj().T
    omega = system.omega
    p1 = np.zeros((n, n), dtype=np.complex128)
    p1[: system.n1, : system.n1] = np.eye(system.n1)
    r_omega = float(np.linalg.norm(pi @ omega - omega @ pi, 2))
    r_p1 = float(np.linalg.norm(pi @ p1 - p1 @ pi, 2))
    scale = float(np.linalg.norm(omega, 2))
    verdict = r_omega <= tol.tau_residual * scale and r_p1 <= tol.tau_residual
    return verdict, (r_omega, r_p1)


@dataclass(frozen=True)
class SInvariantDecomposition:
    """Finest splitting into independently evolving two-sided parts.

    components[k] = (observable part, hidden part), both in full-space
    coordinates; their direct sums over k recover H1 and H2.  Channel q
    drives component assignment[q].  Components beyond the assigned ones
    are the decoupled remainders (empty on one side).
    """

    components: tuple[tuple[Subspace, Subspace], ...]
    assignment: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.components)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def canonical_decomposition(
    system: ConservativeSystem, tol: ToleranceConfig = DEFAULT_TOLERANCES
) -> SInvariantDecomposition:
    """Group channels whose orbits overlap; each group is one component.

    Channels p and q interact iff the orbit of g_p under omega1 has a
    component along g_q, or the orbit of g'_p under omega2 has one along
    g'_q (the orbits then share an eigenspace direction, so no invariant
    splitting can separate them).  Connected components of that relation
    give the finest splitting; the decoupled remainders h1d and h2d are
    attached as extra components with an empty other side.
    """
    n1, n2 = system.n1, system.n2
    cs = channels(system, tol)
    r = cs.rank
    orbits1 = [orbit(system.omega1, cs.g[:, q], tol) for q in range(r)]
    orbits2 = [orbit(system.omega2, cs.g_prime[:, q], tol) for q in range(r)]
    uf = _UnionFind(r)
    for p in range(r):
        for q in range(p + 1, r):
            touch1 = float(np.linalg.norm(orbits1[p].frame.conj().T @ cs.g[:, q]))
            touch2 = float(np.linalg.norm(orbits2[p].frame.conj().T @ cs.g_prime[:, q]))
            if touch1 > tol.tau_residual or touch2 > tol.tau_residual:
                uf.union(p, q)

    roots: dict[int, list[int]] = {}
    for q in range(r):
        roots.setdefault(uf.find(q), []).append(q)
    ordered = sorted(roots.values(), key=lambda group: group[0])
    assignment = [0] * r
    components: list[tuple[Subspace, Subspace]] = []
    for k, group in enumerate(ordered):
        for q in group:
            assignment[q] = k
        h1 = orbit(system.omega1, cs.g[:, group], tol)
        h2 = orbit(system.omega2, cs.g_prime[:, group], tol)
        components.append(
            (
                Subspace(n1 + n2, _embed(h1.frame, n1, n2, 1)),
                Subspace(n1 + n2, _embed(h2.frame, n1, n2, 2)),
            )
        )

    parts = coupled_parts(system, tol)
    empty = Subspace(n1 + n2, np.zeros((n1 + n2, 0), dtype=np.complex128))
    if parts.h1d.dim:
        components.append((parts.h1d, empty))
    if parts.h2d.dim:
        components.append((empty, parts.h2d))
    return SInvariantDecomposition(tuple(components), tuple(assignment))


@dataclass(frozen=True)
class DecouplingReport:
    """Can a candidate observable subspace be split off?

    The split succeeds iff the internal operator and the friction kernel
    are both block-diagonal with respect to (h1_sub, complement): the
    forward residuals are the norms of the omega1 block and the worst
    kernel block over the sampled times.  Decoupling is mutual, so the
    reverse residuals must come out small whenever the forward ones do;
    both are reported.  On success `splitting` carries the full-space
    invariant pair (h1_sub, orbit of coupling^H h1_sub).
    """

    decoupled: bool
    residual_internal: float
    residual_kernel: float
    reverse_residual_internal: float
    reverse_residual_kernel: float
    times: np.ndarray = field(repr=False)
    splitting: tuple[Subspace, Subspace] | None = None

    def as_dict(self) -> dict:
        return {
            "decoupled": self.decoupled,
            "residual_internal": self.residual_internal,
            "residual_kernel": self.residual_kernel,
            "reverse_residual_internal": self.reverse_residual_internal,
            "reverse_residual_kernel": self.reverse_residual_kernel,
            "time_grid": [float(t) for t in self.times],
            "splitting_dims": None
            if self.splitting is None
            else [self.splitting[0].dim, self.splitting[1].dim],
        }


KERNEL_CHECK_POINTS = 25


def _kernel_check_times(system: ConservativeSystem) -> np.ndarray:
    """25 points covering the slowest beat period of the hidden spectrum."""
    if system.n2 >= 2:
        w = np.linalg.eigvalsh(system.omega2)
        radius = float(np.max(np.abs(w))) if w.size else 0.0
        diffs = np.diff(w)
        gaps = diffs[diffs > 1e-12 * max(radius, 1.0)]
        gap = float(gaps.min()) if gaps.size else 0.0
    else:
        gap = 0.0
    horizon = 2.0 * np.pi / gap if gap > 0 else 2.0 * np.pi
    return np.linspace(0.0, horizon, KERNEL_CHECK_POINTS)


def decoupling_report(
    system: ConservativeSystem,
    h1_sub: Subspace,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> DecouplingReport:
    """Test whether h1_sub decouples from the rest of the observable side."""
    n1, n2 = system.n1, system.n2
    if h1_sub.ambient_dim == n1 + n2:
        frame = _block_frame(h1_sub, n1, 1)
    elif h1_sub.ambient_dim == n1:
        frame = h1_sub.frame
    else:
        raise ValidationError("candidate subspace must live in H1 (or the full space, H1-supported)")

    pi = frame @ frame.conj().T
    pi_c = np.eye(n1, dtype=np.complex128) - pi
    omega1 = system.omega1
    r_int = float(np.linalg.norm(pi @ omega1 @ pi_c, 2))
    r_int_rev = float(np.linalg.norm(pi_c @ omega1 @ pi, 2))

    times = _kernel_check_times(system)
    kernel = kernel_eval(system, times, tol)
    r_ker = max(
        (float(np.linalg.norm(pi @ a @ pi_c, 2)) for a in kernel.values), default=0.0
    )
    r_ker_rev = max(
        (float(np.linalg.norm(pi_c @ a @ pi, 2)) for a in kernel.values), default=0.0
    )

    omega_scale = max(float(np.linalg.norm(system.omega, 2)), 1.0)
    kernel_scale = max(float(np.linalg.norm(kernel.values[0], 2)), 1.0)
    decoupled = r_int <= tol.tau_residual * omega_scale and r_ker <= tol.tau_residual * kernel_scale

    splitting = None
    if decoupled:
        seed = system.coupling.conj().T @ frame
        h2_part = orbit(system.omega2, seed, tol) if n2 else orthonormal_basis(
            np.zeros((0, 0)), tol
        )
        splitting = (
            Subspace(n1 + n2, _embed(frame, n1, n2, 1)),
            Subspace(n1 + n2, _embed(h2_part.frame, n1, n2, 2)),
        )
    return DecouplingReport(
        decoupled=decoupled,
        residual_internal=r_int,
        residual_kernel=r_ker,
        reverse_residual_internal=r_int_rev,
        reverse_residual_kernel=r_ker_rev,
        times=times,
        splitting=splitting,
    )
