"""Domain types: conservative systems, point spectral measures, open systems.

A conservative system is a Hermitian frequency operator on
C^n1 (+) C^n2 stored as one block matrix

    omega = [[omega1, coupling], [coupling^H, omega2]],

where the first block carries the observable variables and the second
the hidden ones.  A point measure is a finite list of (frequency, mass)
atoms describing a friction kernel a(t) = sum_k exp(-i w_k t) N_k, and
an open system pairs an observable frequency operator with such a
kernel.  Construction enforces structural invariants (shapes, Hermitian
symmetry of the stored blocks, ascending frequencies); definiteness of
the masses is a semantic property reported by :func:`validate` and by
the dissipation checker rather than a construction-time requirement, so
that invalid measures can still be represented and diagnosed.

Systems with a nontrivial mass operator enter through
:meth:`OpenSystem.from_mass_form`, which applies the standard rescaling
v -> m^(1/2) v and normalizes the mass to the identity.  Instantaneous
(delta-like) friction is rejected: it corresponds to an unbounded
coupling and is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnboundedCouplingError, ValidationError
from .numerics import (
    DEFAULT_TOLERANCES,
    Subspace,
    ToleranceConfig,
    as_matrix,
    eigh,
    max_abs,
    require_hermitian,
)

__all__ = [
    "ConservativeSystem",
    "MeasureAtom",
    "PointMeasure",
    "OpenSystem",
    "BlockPartition",
    "assemble",
    "validate",
    "Violation",
    "ValidationReport",
]


@dataclass(frozen=True)
class ConservativeSystem:
    """Two-block conservative system (n1 observable + n2 hidden variables)."""

    n1: int
    n2: int
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n1 < 1:
            raise ValidationError("n1 must be at least 1")
        if self.n2 < 0:
            raise ValidationError("n2 must be nonnegative")
        m = as_matrix(self.omega, square=True, name="omega")
        if m.shape[0] != self.n1 + self.n2:
            raise ValidationError(
                f"omega has size {m.shape[0]}, expected n1 + n2 = {self.n1 + self.n2}"
            )
        object.__setattr__(self, "omega", m)

    @property
    def dim(self) -> int:
        return self.n1 + self.n2

    @property
    def omega1(self) -> np.ndarray:
        return self.omega[: self.n1, : self.n1]

    @property
    def omega2(self) -> np.ndarray:
        return self.omega[self.n1 :, self.n1 :]

    @property
    def coupling(self) -> np.ndarray:
        """Top-right block mapping hidden to observable variables."""
        return self.omega[: self.n1, self.n1 :]

    @property
    def internal_part(self) -> np.ndarray:
        """Block-diagonal part of omega (couplings zeroed)."""
        out = np.zeros_like(self.omega)
        out[: self.n1, : self.n1] = self.omega1
        out[self.n1 :, self.n1 :] = self.omega2
        return out

    @property
    def coupling_part(self) -> np.ndarray:
        """Off-diagonal part of omega (internal blocks zeroed)."""
        return self.omega - self.internal_part


def assemble(omega1, omega2, coupling, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ConservativeSystem:
    """Build a conservative system from its three defining blocks."""
    w1 = require_hermitian(omega1, tol, name="omega1")
    w2 = require_hermitian(omega2, tol, name="omega2")
    g = as_matrix(coupling, name="coupling")
    n1, n2 = w1.shape[0], w2.shape[0]
    if g.shape != (n1, n2):
        raise ValidationError(f"coupling shape {g.shape} does not match blocks ({n1}, {n2})")
    omega = np.zeros((n1 + n2, n1 + n2), dtype=np.complex128)
    omega[:n1, :n1] = w1
    omega[:n1, n1:] = g
    omega[n1:, :n1] = g.conj().T
    omega[n1:, n1:] = w2
    return ConservativeSystem(n1, n2, omega)


@dataclass(frozen=True)
class MeasureAtom:
    """One atom of a point spectral measure: a frequency and its mass matrix."""

    frequency: float
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not np.isfinite(self.frequency):
            raise ValidationError("atom frequency must be finite")
        m = as_matrix(self.mass, square=True, name="mass")
        defect = max_abs(m - m.conj().T)
        if defect > 1e-9 * (1.0 + max_abs(m)):
            raise ValidationError(f"atom mass is not Hermitian: defect {defect:.3e}")
        object.__setattr__(self, "frequency", float(self.frequency))
        object.__setattr__(self, "mass", m)

    @property
    def dim(self) -> int:
        return self.mass.shape[0]


@dataclass(frozen=True)
class PointMeasure:
    """Finite point measure on the real frequency line with matrix masses."""

    dim: int
    atoms: tuple[MeasureAtom, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("measure dimension must be at least 1")
        atoms = tuple(self.atoms)
        for atom in atoms:
            if atom.dim != self.dim:
                raise ValidationError(
                    f"atom mass has size {atom.dim}, measure dimension is {self.dim}"
                )
        freqs = [a.frequency for a in atoms]
        if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
            raise ValidationError("atom frequencies must be strictly increasing")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def create(
        cls,
        dim: int,
        atoms,
        tol: ToleranceConfig = DEFAULT_TOLERANCES,
    ) -> "PointMeasure":
        """Normalize raw (frequency, mass) pairs into a measure.

        Atoms are sorted by frequency; atoms closer than
        tau_eig_cluster * (frequency span) are merged by summing masses;
        exactly-zero masses are dropped.
        """
        pairs = [(float(f), as_matrix(m, square=True, name="mass")) for f, m in atoms]
        pairs = [(f, m) for f, m in pairs if max_abs(m) > 0.0]
        pairs.sort(key=lambda p: p[0])
        merged: list[tuple[float, np.ndarray]] = []
        if pairs:
            span = pairs[-1][0] - pairs[0][0]
            gap = tol.tau_eig_cluster * span
            for f, m in pairs:
                if merged and (f - merged[-1][0]) <= gap:
                    f_prev, m_prev = merged[-1]
                    merged[-1] = (f_prev, m_prev + m)
                else:
                    merged.append((f, np.array(m)))
        return cls(dim, tuple(MeasureAtom(f, m) for f, m in merged))

    def total_mass(self) -> np.ndarray:
        """Sum of the atom masses; equals the kernel value at t = 0."""
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for atom in self.atoms:
            out = out + atom.mass
        return out


@dataclass(frozen=True)
class OpenSystem:
    """Observable frequency operator plus a friction kernel measure."""

    dim: int
    omega1: np.ndarray = field(repr=False)
    kernel: PointMeasure = field(default=None)

    def __post_init__(self):
        m = as_matrix(self.omega1, square=True, name="omega1")
        if m.shape[0] != self.dim:
            raise ValidationError(f"omega1 has size {m.shape[0]}, expected {self.dim}")
        if self.kernel is None:
            object.__setattr__(self, "kernel", PointMeasure(self.dim, ()))
        if self.kernel.dim != self.dim:
            raise ValidationError(
                f"kernel dimension {self.kernel.dim} does not match system dimension {self.dim}"
            )
        object.__setattr__(self, "omega1", m)

    @classmethod
    def from_mass_form(
        cls,
        mass,
        a_operator,
        kernel: PointMeasure,
        a_inf=None,
        tol: ToleranceConfig = DEFAULT_TOLERANCES,
    ) -> "OpenSystem":
        """Normalize m dv/dt = -i A v - (a * v) + f to unit mass.

        mass may be a positive vector (diagonal mass) or a positive
        definite Hermitian matrix.  The rescaling v -> m^(1/2) v maps
        A to m^(-1/2) A m^(-1/2) and every kernel mass the same way.
        A nonzero instantaneous friction coefficient a_inf is rejected.
        """
        if a_inf is not None and max_abs(np.atleast_2d(np.asarray(a_inf, dtype=np.complex128))) > 0.0:
            raise UnboundedCouplingError("unbounded coupling unsupported: instantaneous friction term")
        m = np.asarray(mass, dtype=np.complex128)
        if m.ndim == 1:
            m = np.diag(m)
        m = require_hermitian(m, tol, name="mass")
        w, v = eigh(m, tol)
        if w.size == 0 or w[0] <= tol.tau_rank * max(w[-1], 0.0) or w[0] <= 0.0:
            raise ValidationError("mass operator must be positive definite")
        inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
        a = require_hermitian(a_operator, tol, name="a_operator")
        if a.shape != m.shape:
            raise ValidationError("mass and a_operator must have the same shape")
        if kernel.dim != m.shape[0]:
            raise ValidationError("kernel dimension does not match the mass operator")
        omega1 = inv_root @ a @ inv_root
        omega1 = 0.5 * (omega1 + omega1.conj().T)
        scaled = PointMeasure.create(
            kernel.dim,
            [(atom.frequency, inv_root @ atom.mass @ inv_root) for atom in kernel.atoms],
            tol,
        )
        return cls(m.shape[0], omega1, scaled)


@dataclass(frozen=True)
class BlockPartition:
    """Ordered orthogonal parts inside one side (observable or hidden)."""

    side: int
    ambient_dim: int
    parts: tuple[Subspace, ...]

    def __post_init__(self):
        if self.side not in (1, 2):
            raise ValidationError("side must be 1 (observable) or 2 (hidden)")
        parts = tuple(self.parts)
        for p in parts:
            if p.ambient_dim != self.ambient_dim:
                raise ValidationError("all parts must share the partition's ambient dimension")
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                if parts[i].dim and parts[j].dim:
                    overlap = max_abs(parts[i].frame.conj().T @ parts[j].frame)
                    if overlap > 1e-9:
                        raise ValidationError(
                            f"partition parts {i} and {j} are not orthogonal: overlap {overlap:.3e}"
                        )
        object.__setattr__(self, "parts", parts)

    @property
    def complete(self) -> bool:
        return sum(p.dim for p in self.parts) == self.ambient_dim


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    kind: str
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _validate_system(system: ConservativeSystem, tol: ToleranceConfig) -> list[Violation]:
    out: list[Violation] = []
    defect = max_abs(system.omega - system.omega.conj().T)
    bound = tol.tau_herm * (1.0 + max_abs(system.omega))
    if defect > bound:
        out.append(Violation("not_hermitian", "omega is not Hermitian", defect))
    return out


def _validate_measure(measure: PointMeasure, tol: ToleranceConfig) -> list[Violation]:
    out: list[Violation] = []
    freqs = [a.frequency for a in measure.atoms]
    if freqs:
        span = max(freqs) - min(freqs)
        for f1, f2 in zip(freqs, freqs[1:]):
            if (f2 - f1) <= tol.tau_eig_cluster * span:
                out.append(
                    Violation(
                        "atoms_too_close",
                        f"frequencies {f1} and {f2} are closer than the cluster tolerance",
                        f2 - f1,
                    )
                )
    for k, atom in enumerate(measure.atoms):
        norm = max_abs(atom.mass)
        if norm == 0.0:
            out.append(Violation("zero_mass", f"atom {k} has zero mass", 0.0))
            continue
        w = np.linalg.eigvalsh(0.5 * (atom.mass + atom.mass.conj().T))
        if w[0] < -tol.tau_residual * norm:
            out.append(
                Violation(
                    "mass_not_psd",
                    f"atom {k} (frequency {atom.frequency}) has min eigenvalue {w[0]:.6e}",
                    float(w[0]),
                )
            )
    return out


def validate(obj, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ValidationReport:
    """Check semantic invariants and return a report of violations.

    Accepts a ConservativeSystem, PointMeasure or OpenSystem.
    """
    if isinstance(obj, ConservativeSystem):
        return ValidationReport("conservative_system", tuple(_validate_system(obj, tol)))
    if isinstance(obj, PointMeasure):
        return ValidationReport("point_measure", tuple(_validate_measure(obj, tol)))
    if isinstance(obj, OpenSystem):
        out: list[Violation] = []
        defect = max_abs(obj.omega1 - obj.omega1.conj().T)
        if defect > tol.tau_herm * (1.0 + max_abs(obj.omega1)):
            out.append(Violation("not_hermitian", "omega1 is not Hermitian", defect))
        out.extend(_validate_measure(obj.kernel, tol))
        return ValidationReport("open_system", tuple(out))
    raise ValidationError(f"cannot validate object of type {type(obj).__name__}")
