"""Lattice geometry, sparse Hermitian operators, and the one-particle chain.

Units: energies in units of the hopping J, times in hbar/J, positions as
integer site labels with the barrier at site 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, InvalidParameterError

__all__ = [
    "ModelParams",
    "SiteBasis",
    "SparseHermitianOperator",
    "StateVector",
    "apply",
    "build_h1",
    "dispersion",
    "expectation",
    "group_velocity",
    "site_range",
    "site_to_offset",
    "offset_to_site",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical configuration shared by every Hamiltonian builder.

    L: number of lattice sites (odd, >= 5 so a centre site exists).
    J: hopping energy, J > 0.
    mu: barrier height on the centre site.
    U: contact interaction between constituents of different type.
    """

    L: int
    J: float = 1.0
    mu: float = 0.0
    U: float = 0.0

    def __post_init__(self):
        if self.L % 2 == 0 or self.L < 5:
            raise InvalidParameterError(f"L must be odd and >= 5, got {self.L}")
        if not (self.J > 0):
            raise InvalidParameterError(f"J must be positive, got {self.J}")

    @property
    def half(self) -> int:
        return (self.L - 1) // 2

    def require_interaction(self):
        if self.U == 0:
            raise InvalidParameterError("U must be nonzero for composite operations")


def site_range(L: int) -> list[int]:
    """Ordered site labels -(L-1)/2 .. (L-1)/2 with the barrier at 0."""
    if L % 2 == 0 or L < 5:
        raise InvalidParameterError(f"L must be odd and >= 5, got {L}")
    h = (L - 1) // 2
    return list(range(-h, h + 1))


def site_to_offset(l: int, L: int) -> int:
    """Map a site label to its storage offset in 0..L-1."""
    h = (L - 1) // 2
    if not -h <= l <= h:
        raise InvalidParameterError(f"site {l} outside [-{h}, {h}]")
    return l + h


def offset_to_site(i: int, L: int) -> int:
    """Inverse of :func:`site_to_offset`."""
    if not 0 <= i < L:
        raise InvalidParameterError(f"offset {i} outside [0, {L})")
    return i - (L - 1) // 2


@dataclass(frozen=True)
class SiteBasis:
    """One particle on the chain; amplitudes indexed by site offset."""

    L: int

    @property
    def dim(self) -> int:
        return self.L

    @property
    def label(self) -> str:
        return f"sites(L={self.L})"

    def sites(self) -> list[int]:
        return site_range(self.L)


class SparseHermitianOperator:
    """Hermitian operator stored as upper-triangle coordinate triplets.

    Entries with row < col are stored once; the conjugate transpose is
    implied.  Instances are immutable after construction, so the assembled
    CSR form and the spectral decomposition are cached lazily and may be
    shared across threads.
    """

    def __init__(self, dim: int, rows, cols, vals, label: str = ""):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.complex128)
        if not (rows.shape == cols.shape == vals.shape):
            raise InvalidParameterError("rows/cols/vals must have equal length")
        if rows.size and (rows.min() < 0 or cols.max() >= dim):
            raise InvalidParameterError("entry index out of range")
        if np.any(rows > cols):
            raise InvalidParameterError("entries must satisfy row <= col")
        if vals.size and not np.all(np.isfinite(vals)):
            raise InvalidParameterError("operator entries must be finite")
        self.dim = int(dim)
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self.label = label
        self._csr = None
        self._spectral = None

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            upper = sp.coo_matrix(
                (self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim)
            )
            off = self.rows != self.cols
            lower = sp.coo_matrix(
                (np.conj(self.vals[off]), (self.cols[off], self.rows[off])),
                shape=(self.dim, self.dim),
            )
            self._csr = (upper + lower).tocsr()
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def spectral(self):
        """Cached eigendecomposition (ascending eigenvalues, column vectors)."""
        if self._spectral is None:
            import scipy.linalg as la

            w, v = la.eigh(self.to_dense())
            self._spectral = (w, v)
        return self._spectral

    def matvec(self, amp: np.ndarray) -> np.ndarray:
        return self.to_csr() @ amp

    def gershgorin_bounds(self) -> tuple[float, float]:
        """Rigorous enclosure of the spectrum from Gershgorin discs."""
        m = self.to_csr()
        diag = m.diagonal().real
        radius = np.abs(m).sum(axis=1).A1 - np.abs(diag)
        return float((diag - radius).min()), float((diag + radius).max())


@dataclass
class StateVector:
    """Complex amplitudes over a named basis."""

    basis: object
    amp: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=np.complex128)
        if self.amp.shape != (self.basis.dim,):
            raise DimensionMismatchError(
                f"amplitude length {self.amp.shape} != basis dim {self.basis.dim}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise InvalidParameterError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amp / n)

    def overlap(self, other: "StateVector") -> complex:
        if self.basis.label != other.basis.label:
            raise DimensionMismatchError(
                f"bases differ: {self.basis.label} vs {other.basis.label}"
            )
        return complex(np.vdot(self.amp, other.amp))


def build_h1(params: ModelParams) -> SparseHermitianOperator:
    """Nearest-neighbour chain with a single on-site barrier at the centre.

    Open boundary conditions; hopping amplitude -J, barrier mu at site 0.
    """
    L = params.L
    rows, cols, vals = [], [], []
    for i in range(L - 1):
        rows.append(i)
        cols.append(i + 1)
        vals.append(-params.J)
    if params.mu != 0.0:
        c = site_to_offset(0, L)
        rows.append(c)
        cols.append(c)
        vals.append(params.mu)
    return SparseHermitianOperator(L, rows, cols, vals, label=f"h1(L={L})")


def dispersion(k: float, j_hop: float) -> float:
    """Band energy -2 j_hop cos k of the nearest-neighbour chain."""
    return -2.0 * j_hop * math.cos(k)


def group_velocity(k: float, j_hop: float) -> float:
    """d(dispersion)/dk = 2 j_hop sin k, in sites per hbar/J."""
    return 2.0 * j_hop * math.sin(k)


def apply(op: SparseHermitianOperator, v: StateVector) -> StateVector:
    """Matrix-vector product, returned in the same basis."""
    if op.dim != v.basis.dim:
        raise DimensionMismatchError(f"operator dim {op.dim} != state dim {v.basis.dim}")
    return StateVector(v.basis, op.matvec(v.amp))


def expectation(op: SparseHermitianOperator, v: StateVector) -> float:
    """Real expectation value <v|op|v> (v need not be normalized)."""
    if op.dim != v.basis.dim:
        raise DimensionMismatchError(f"operator dim {op.dim} != state dim {v.basis.dim}")
    val = complex(np.vdot(v.amp, op.matvec(v.amp)))
    return val.real
